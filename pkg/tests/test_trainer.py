"""Training step, runs, checkpoints and translation on the toy corpus"""

import json
import warnings

import pytest
import torch

from toonphoto.checkpoint import NETWORK_NAMES, load_checkpoint, read_trainer_record, save_checkpoint
from toonphoto.errors import (
    CheckpointError, ConfigError, IntegrityError, NonFiniteLossError, NumericalError, SampleSizeError, ShapeError,
)
from toonphoto.fid import LinearTestExtractor
from toonphoto.specnorm import spectral_states
from toonphoto.toy import toy_batch, write_toy_corpus, write_toy_images
from toonphoto import trainer
from toonphoto.trainer import (
    CHECKPOINT_DIR, SAMPLES_DIR, evaluate_fid, fit, init_state, linear_decay, train_step, translate,
)
from toonphoto.training_log import LOG_NAME, TrainingLog

TOY_SIZE = 32


def toy_pair(count=4, seed=0):
    return toy_batch('cartoon', count, TOY_SIZE, seed), toy_batch('real', count, TOY_SIZE, seed)


def snapshot(net):
    return {name: p.detach().clone() for name, p in net.named_parameters()}


def same_params(a, b, atol=0.0):
    return all(torch.allclose(a[k], b[k], atol=atol, rtol=0.0) for k in a)


# ---------------------------------------------------------------------------
# train_step
# ---------------------------------------------------------------------------

def test_zeroed_discriminators_give_unit_generator_loss(tiny_config):
    state = init_state(tiny_config)
    with torch.no_grad():
        for net in (state.d_r, state.d_c):
            for param in net.parameters():
                param.zero_()
    cartoon, real = toy_pair()
    report = train_step(state, cartoon, real, lambda_cyc=0.0)
    assert report.g_r_adv == pytest.approx(1.0)
    assert report.g_c_adv == pytest.approx(1.0)
    assert report.d_r == pytest.approx(0.5)
    assert report.total_g == pytest.approx(2.0)
    assert state.step == 1


def test_report_totals_follow_the_weighting(tiny_config):
    state = init_state(tiny_config)
    report = train_step(state, *toy_pair(), lambda_cyc=10.0)
    expected = report.g_r_adv + report.g_c_adv + 10.0 * (report.forward_cyc + report.backward_cyc)
    assert report.total_g == pytest.approx(expected)
    assert report.total_d == pytest.approx(report.d_r + report.d_c)
    assert all(value >= 0 for value in report.to_dict().values())


def test_loss_values_are_read_without_autograd_warnings(tiny_config):
    state = init_state(tiny_config)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always')
        train_step(state, *toy_pair(), lambda_cyc=10.0)
    assert not [w for w in caught if 'requires_grad' in str(w.message)]


def test_train_step_is_deterministic(tiny_config):
    reports, params = [], []
    for _ in range(2):
        state = init_state(tiny_config)
        for seed in range(3):
            report = train_step(state, *toy_pair(seed=seed), lambda_cyc=10.0)
        reports.append(report.to_dict())
        params.append(snapshot(state.g_r))
    assert reports[0] == reports[1]
    assert same_params(*params)


def test_discriminators_are_frozen_during_generator_update(tiny_config):
    state = init_state(tiny_config)
    train_step(state, *toy_pair(seed=1), lambda_cyc=10.0)
    d_grads_before = {n: p.grad.clone() for n, p in state.d_r.named_parameters()}
    d_params_before = snapshot(state.d_r)
    seen = {}
    generator_step = state.opt_g.step

    def checked_step(*args, **kwargs):
        seen['d_grads'] = {n: p.grad.clone() for n, p in state.d_r.named_parameters()}
        seen['d_params'] = snapshot(state.d_r)
        seen['g_has_grad'] = all(p.grad is not None for p in state.g_r.parameters())
        result = generator_step(*args, **kwargs)
        seen['g_after'] = snapshot(state.g_r)
        return result

    state.opt_g.step = checked_step
    train_step(state, *toy_pair(seed=2), lambda_cyc=10.0)
    assert seen['g_has_grad']
    assert same_params(seen['d_grads'], d_grads_before)
    assert same_params(seen['d_params'], d_params_before)
    # The discriminator update leaves the generators alone
    assert same_params(snapshot(state.g_r), seen['g_after'])
    assert not same_params(snapshot(state.d_r), d_params_before)


def test_spectral_state_advances_twice_per_step(tiny_config):
    state = init_state(tiny_config)
    train_step(state, *toy_pair(), lambda_cyc=10.0)
    train_step(state, *toy_pair(seed=1), lambda_cyc=10.0)
    counts = [s.iteration_count for s in spectral_states(state.d_r).values()]
    assert counts and all(count == 4 for count in counts)


def test_fid_evaluation_does_not_touch_discriminators(tiny_config, toy_corpus):
    state = init_state(tiny_config)
    train_step(state, *toy_pair(), lambda_cyc=10.0)
    before = spectral_states(state.d_c)
    scores = evaluate_fid(state, toy_corpus['cartoon']['val'], toy_corpus['real']['val'],
                          LinearTestExtractor(), batch_size=3)
    after = spectral_states(state.d_c)
    assert all(torch.equal(before[k].u, after[k].u) for k in before)
    assert scores['fid'] == pytest.approx(0.8 * scores['fid_real'] + 0.2 * scores['fid_cartoon'])
    assert state.g_r.training


def test_train_step_rejects_bad_inputs(tiny_config):
    state = init_state(tiny_config)
    cartoon, real = toy_pair()
    with pytest.raises(ShapeError):
        train_step(state, cartoon, toy_batch('real', 3, TOY_SIZE), lambda_cyc=10.0)
    with pytest.raises(ConfigError):
        train_step(state, cartoon, real, lambda_cyc=-1.0)
    assert state.step == 0


def test_nan_weights_stop_the_step(tiny_config):
    state = init_state(tiny_config)
    with torch.no_grad():
        next(state.g_r.parameters()).fill_(float('nan'))
    with pytest.raises(NonFiniteLossError) as err:
        train_step(state, *toy_pair(), lambda_cyc=10.0)
    assert err.value.component == 'g_r_adv'


@pytest.mark.slow
def test_cycle_loss_drops_over_200_steps(tiny_config):
    state = init_state(tiny_config)
    history = []
    for step in range(200):
        report = train_step(state, *toy_pair(seed=step % 16), lambda_cyc=10.0)
        history.append(report.forward_cyc)
    early = sum(history[:20]) / 20
    late = sum(history[-20:]) / 20
    assert late < early


def test_linear_decay_schedule():
    factor = linear_decay(200)
    assert factor(0) == 1.0 and factor(99) == 1.0
    assert factor(150) == pytest.approx(0.5)
    assert factor(200) == 0.0


# ---------------------------------------------------------------------------
# Runs and checkpoints
# ---------------------------------------------------------------------------

def test_fit_writes_log_checkpoints_and_samples(tiny_config, toy_corpus):
    state = fit(tiny_config, toy_corpus)
    out = tiny_config.out_dir
    log = TrainingLog(out / LOG_NAME)
    assert len(log.losses()) == state.step == 6
    assert list(log.fid_curve()['epoch']) == [1, 2]
    assert list(log.aggregate_losses().index) == [1, 2]
    for name in ('latest', 'best'):
        assert read_trainer_record(out / CHECKPOINT_DIR / name)['config_hash'] == tiny_config.config_hash()
    assert read_trainer_record(out / CHECKPOINT_DIR / 'latest')['epoch'] == 2
    assert sorted(p.name for p in (out / SAMPLES_DIR).glob('*.png')) == ['epoch_001.png', 'epoch_002.png']
    assert state.best_fid == pytest.approx(log.fid_curve()['fid'].min())


def test_fid_interval_sets_evaluation_count(tiny_config, toy_corpus):
    config = tiny_config.model_copy(update={'epochs': 3, 'fid_interval': 2})
    fit(config, toy_corpus)
    assert list(TrainingLog(config.out_dir / LOG_NAME).fid_curve()['epoch']) == [2]


def test_small_validation_split_is_refused_before_training(tiny_config, tmp_path):
    corpus = write_toy_corpus(tmp_path / 'small', split_counts=(8, 1), size=TOY_SIZE, seed=0)
    with pytest.raises(SampleSizeError, match='validation images'):
        fit(tiny_config, corpus)
    assert not (tiny_config.out_dir / LOG_NAME).exists()
    assert not (tiny_config.out_dir / CHECKPOINT_DIR).exists()


def test_latest_checkpoint_is_saved_before_fid(tiny_config, toy_corpus, monkeypatch):
    def failing_fid(*args, **kwargs):
        raise NumericalError('no square root')

    monkeypatch.setattr(trainer, 'evaluate_fid', failing_fid)
    with pytest.raises(NumericalError):
        fit(tiny_config.model_copy(update={'epochs': 1}), toy_corpus)
    assert read_trainer_record(tiny_config.out_dir / CHECKPOINT_DIR / 'latest')['epoch'] == 1


def test_zero_epochs_leave_an_empty_log(tiny_config, toy_corpus):
    config = tiny_config.model_copy(update={'epochs': 0})
    state = fit(config, toy_corpus)
    assert state.step == 0
    assert TrainingLog(config.out_dir / LOG_NAME).losses().empty


def test_resumed_run_matches_uninterrupted_run(tiny_config, toy_corpus, tmp_path):
    straight = fit(tiny_config.model_copy(update={'out_dir': tmp_path / 'straight'}), toy_corpus)

    first_half = tiny_config.model_copy(update={'out_dir': tmp_path / 'resumed', 'epochs': 1})
    fit(first_half, toy_corpus)
    resumed = fit(first_half.model_copy(update={'epochs': 2}), toy_corpus, resume='latest')

    assert resumed.step == straight.step
    for name in NETWORK_NAMES:
        a = straight.networks[name].state_dict()
        b = resumed.networks[name].state_dict()
        for key in a:
            assert torch.allclose(a[key].float(), b[key].float(), atol=1e-6), (name, key)
    records = TrainingLog(tmp_path / 'resumed' / LOG_NAME).losses()
    assert list(records['step']) == list(range(1, straight.step + 1))


def test_checkpoint_from_another_config_is_refused(tiny_config, tmp_path):
    state = init_state(tiny_config)
    save_checkpoint(state, tiny_config, tmp_path / 'ckpt')
    other = init_state(tiny_config.model_copy(update={'lambda_cyc': 5.0}))
    with pytest.raises(ConfigError):
        load_checkpoint(other, tmp_path / 'ckpt')
    with pytest.raises(CheckpointError):
        load_checkpoint(state, tmp_path / 'nowhere')


def test_checkpoint_overwrite_leaves_no_staging_dirs(tiny_config, tmp_path):
    state = init_state(tiny_config)
    save_checkpoint(state, tiny_config, tmp_path / 'ckpt')
    state.step = 7
    save_checkpoint(state, tiny_config, tmp_path / 'ckpt')
    assert [p.name for p in tmp_path.iterdir()] == ['ckpt']
    assert json.loads((tmp_path / 'ckpt' / 'trainer.json').read_text())['step'] == 7


# ---------------------------------------------------------------------------
# Translation
# ---------------------------------------------------------------------------

def test_translate_keeps_names_and_is_repeatable(tiny_config, tmp_path):
    state = init_state(tiny_config)
    train_step(state, *toy_pair(), lambda_cyc=10.0)
    save_checkpoint(state, tiny_config, tmp_path / 'ckpt')
    inputs = write_toy_images(tmp_path / 'inputs', 'cartoon', 5, size=48, seed=3)

    first = translate(tmp_path / 'ckpt', inputs, tmp_path / 'out1')
    second = translate(tmp_path / 'ckpt', inputs, tmp_path / 'out2')
    assert sorted(p.name for p in first) == sorted(p.name for p in inputs.iterdir())
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()


def test_translate_needs_an_input_directory(tiny_config, tmp_path):
    save_checkpoint(init_state(tiny_config), tiny_config, tmp_path / 'ckpt')
    with pytest.raises(IntegrityError, match="not found"):
        translate(tmp_path / 'ckpt', tmp_path / 'missing', tmp_path / 'out')

