"""Power iteration and spectrally normalized convolutions"""

import numpy as np
import pytest
import torch
from scipy import linalg

from toonphoto.specnorm import (
    SpectralNormConv2d, SpectralState, init_state, matrix_view, power_iterate, spectral_normalize,
    spectral_states,
)

# Gaussian matrices have a small top spectral gap, so warm-up runs to convergence
WARM_UP_CHUNK = 20
WARM_UP_RTOL = 1e-5
WARM_UP_MAX_STEPS = 4000


def spiked_matrix(rows, cols, seed):
    """Gaussian bulk plus a rank-one spike so the top singular value is well separated"""
    rng = np.random.default_rng(seed)
    bulk = rng.standard_normal((rows, cols)) / np.sqrt(max(rows, cols))
    u = rng.standard_normal(rows)
    v = rng.standard_normal(cols)
    spike = 5.0 * np.outer(u / np.linalg.norm(u), v / np.linalg.norm(v))
    return torch.from_numpy(bulk + spike)


def gaussian_matrix(rows, cols, seed):
    return torch.from_numpy(np.random.default_rng(seed).standard_normal((rows, cols)))


def warm_up(weight, state, chunk=WARM_UP_CHUNK, rtol=WARM_UP_RTOL, max_steps=WARM_UP_MAX_STEPS):
    """Iterate in chunks until sigma moves by less than rtol over a whole chunk"""
    sigma, state = power_iterate(weight, state, steps=chunk)
    while state.iteration_count < max_steps:
        previous = sigma
        sigma, state = power_iterate(weight, state, steps=chunk)
        if abs(sigma - previous) <= rtol * abs(sigma):
            break
    return sigma, state


def top_singular_value(weight):
    return float(linalg.svdvals(matrix_view(weight).detach().numpy())[0])


def unit_state(rows, seed=0, dtype=torch.float64):
    return init_state(torch.zeros(rows, 1, dtype=dtype), torch.Generator().manual_seed(seed))


# ---------------------------------------------------------------------------
# power_iterate
# ---------------------------------------------------------------------------

def test_isotropic_matrix_is_exact_after_one_step():
    sigma, state = power_iterate(3.0 * torch.eye(4, dtype=torch.float64), unit_state(4))
    assert sigma == pytest.approx(3.0, abs=1e-12)
    assert state.iteration_count == 1


def test_diagonal_matrix_converges_to_first_axis():
    weight = torch.diag(torch.tensor([2.0, 1.0], dtype=torch.float64))
    sigma, state = power_iterate(weight, unit_state(2, seed=3), steps=40)
    assert sigma == pytest.approx(2.0, rel=1e-9)
    assert abs(float(state.u[0])) == pytest.approx(1.0, abs=1e-9)


def test_random_64_by_48_matches_svd():
    weight = gaussian_matrix(64, 48, seed=0)
    sigma, _ = warm_up(weight, unit_state(64))
    assert sigma == pytest.approx(top_singular_value(weight), rel=1e-3)


def test_warm_up_matches_svd_across_shapes():
    rng = np.random.default_rng(11)
    shapes = [(int(rng.integers(1, 65)), int(rng.integers(1, 577))) for _ in range(96)]
    shapes += [(512, 4608), (256, 2304), (128, 1152), (1, 8192)]
    for i, (rows, cols) in enumerate(shapes):
        weight = gaussian_matrix(rows, cols, seed=i)
        sigma, state = warm_up(weight, unit_state(rows, seed=i))
        assert state.iteration_count >= WARM_UP_CHUNK
        assert sigma == pytest.approx(top_singular_value(weight), rel=1e-3), (rows, cols)
        assert float(state.u.norm()) == pytest.approx(1.0, abs=1e-6)


def test_zero_matrix_is_degenerate_and_keeps_u():
    state = unit_state(5)
    sigma, new_state = power_iterate(torch.zeros(5, 7, dtype=torch.float64), state)
    assert sigma == 0.0
    assert new_state.degenerate
    assert torch.equal(new_state.u, state.u)
    assert new_state.iteration_count == state.iteration_count


def test_power_iterate_rejects_zero_steps():
    with pytest.raises(ValueError):
        power_iterate(torch.eye(2), unit_state(2, dtype=torch.float32), steps=0)


# ---------------------------------------------------------------------------
# spectral_normalize
# ---------------------------------------------------------------------------

def converged_state(weight, steps=50):
    _, state = power_iterate(weight, unit_state(weight.shape[0]), steps=steps)
    return state


def test_normalized_weight_has_unit_spectral_norm():
    weight = gaussian_matrix(32, 72, seed=5).reshape(32, 8, 3, 3)
    _, state = warm_up(weight, unit_state(32))
    w_norm, _ = spectral_normalize(weight, state)
    assert top_singular_value(w_norm) == pytest.approx(1.0, abs=1e-3)


def test_unit_norm_weight_is_a_fixed_point():
    weight = spiked_matrix(16, 20, seed=2)
    weight = weight / top_singular_value(weight)
    w_norm, _ = spectral_normalize(weight, converged_state(weight))
    assert torch.allclose(w_norm, weight, atol=1e-3)


def test_normalization_is_scale_invariant():
    weight = spiked_matrix(16, 20, seed=4)
    state = converged_state(weight)
    a, _ = spectral_normalize(weight, state)
    b, _ = spectral_normalize(7.5 * weight, state)
    assert torch.allclose(a, b, atol=1e-6)


def test_normalization_is_idempotent_at_convergence():
    weight = spiked_matrix(24, 40, seed=6)
    once, state = spectral_normalize(weight, converged_state(weight))
    twice, _ = spectral_normalize(once, state)
    assert float((once - twice).abs().max()) <= 1e-3


def test_zero_weight_is_returned_unchanged(caplog):
    weight = torch.zeros(4, 6, dtype=torch.float64)
    w_norm, state = spectral_normalize(weight, unit_state(4))
    assert w_norm is weight
    assert state.degenerate
    assert 'skipped' in caplog.text


def test_gradient_flows_through_sigma():
    weight = spiked_matrix(6, 5, seed=1).requires_grad_(True)
    state = converged_state(weight.detach())
    assert torch.autograd.gradcheck(lambda w: spectral_normalize(w, state)[0], (weight,))


# ---------------------------------------------------------------------------
# SpectralNormConv2d
# ---------------------------------------------------------------------------

def make_layer():
    torch.manual_seed(0)
    return SpectralNormConv2d(3, 8, kernel_size=4, stride=2, padding=1,
                              generator=torch.Generator().manual_seed(0))


def test_training_forward_advances_state_once():
    layer = make_layer()
    x = torch.randn(2, 3, 16, 16)
    before = layer.spectral_state
    layer(x)
    after = layer.spectral_state
    assert after.iteration_count == before.iteration_count + 1
    assert not torch.equal(after.u, before.u)
    assert float(after.u.norm()) == pytest.approx(1.0, abs=1e-6)


def test_eval_forward_does_not_mutate_state():
    layer = make_layer()
    layer(torch.randn(1, 3, 16, 16))
    layer.eval()
    before = layer.spectral_state
    first = layer(torch.ones(1, 3, 16, 16))
    second = layer(torch.ones(1, 3, 16, 16))
    after = layer.spectral_state
    assert torch.equal(before.u, after.u)
    assert before.iteration_count == after.iteration_count
    assert torch.equal(first, second)


def test_reset_state_restarts_the_counter():
    layer = make_layer()
    layer(torch.randn(1, 3, 8, 8))
    layer.reset_state(torch.Generator().manual_seed(1))
    assert layer.spectral_state.iteration_count == 0


def test_spectral_states_lists_every_layer():
    net = torch.nn.Sequential(make_layer(), torch.nn.LeakyReLU(0.2), make_layer())
    states = spectral_states(net)
    assert sorted(states) == ['0', '2']
    assert all(isinstance(s, SpectralState) for s in states.values())
