"""
Residual generator and PatchGAN discriminator

The generator follows the Johnson et al. transformation network: c7s1-64,
d128, d256, six residual blocks, u128, u64, c7s1-3 with instance
normalization and reflection padding. The discriminator is the 70x70
PatchGAN (C64-C128-C256-C512 then a 1-channel map) with raw, unsquashed
patch scores.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import torch
from torch import nn

from .config import DiscriminatorSpec, GeneratorSpec
from .errors import CheckpointError, ShapeError
from .imagedata import ImageBatch
from .specnorm import SpectralNormConv2d

logger = logging.getLogger(__name__)

INIT_STD = 0.02
PARAMS_BLOB = 'params.bin'
PARAMS_MANIFEST = 'manifest.json'


class ResidualBlock(nn.Module):
    """Two 3x3 convolutions with instance norm, ReLU after the first, identity skip"""

    def __init__(self, channels: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, kernel_size=3),
            nn.InstanceNorm2d(channels, affine=True),
            nn.ReLU(inplace=True),
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, kernel_size=3),
            nn.InstanceNorm2d(channels, affine=True),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.block(x)


class Generator(nn.Module):
    """Fully convolutional image-to-image network; output spatial size equals input size"""

    def __init__(self, spec: GeneratorSpec = GeneratorSpec()):
        super().__init__()
        self.spec = spec
        f = spec.base_filters
        k0 = spec.initial_kernel
        layers: List[nn.Module] = [
            nn.ReflectionPad2d(k0 // 2),
            nn.Conv2d(spec.in_channels, f, kernel_size=k0),
            nn.InstanceNorm2d(f, affine=True),
            nn.ReLU(inplace=True),
        ]
        channels = f
        for _ in range(spec.n_downsampling):
            layers += [
                nn.Conv2d(channels, channels * 2, kernel_size=spec.down_kernel, stride=2,
                          padding=spec.down_kernel // 2),
                nn.InstanceNorm2d(channels * 2, affine=True),
                nn.ReLU(inplace=True),
            ]
            channels *= 2
        layers += [ResidualBlock(channels) for _ in range(spec.n_residual)]
        for _ in range(spec.n_downsampling):
            layers += [
                nn.ConvTranspose2d(channels, channels // 2, kernel_size=spec.up_kernel, stride=2,
                                   padding=spec.up_kernel // 2, output_padding=1),
                nn.InstanceNorm2d(channels // 2, affine=True),
                nn.ReLU(inplace=True),
            ]
            channels //= 2
        layers += [
            nn.ReflectionPad2d(k0 // 2),
            nn.Conv2d(channels, spec.out_channels, kernel_size=k0),
            nn.Tanh(),
        ]
        self.model = nn.Sequential(*layers)

    @property
    def size_multiple(self) -> int:
        return 2 ** self.spec.n_downsampling

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.model(x)


class PatchDiscriminator(nn.Module):
    """PatchGAN classifier emitting one raw score per overlapping input patch"""

    def __init__(self, spec: DiscriminatorSpec = DiscriminatorSpec(),
                 generator: Optional[torch.Generator] = None):
        super().__init__()
        self.spec = spec
        f = spec.base_filters
        layers: List[nn.Module] = []
        channels_in = spec.in_channels
        channels_out = f
        for i in range(spec.n_layers + 1):
            stride = 2 if i < spec.n_layers else 1
            layers.append(self._conv(channels_in, channels_out, stride, generator))
            if i > 0 and spec.norm == 'instance':
                layers.append(nn.InstanceNorm2d(channels_out, affine=True))
            layers.append(nn.LeakyReLU(spec.leaky_slope, inplace=True))
            channels_in = channels_out
            channels_out = f * min(2 ** (i + 1), 8)
        layers.append(self._conv(channels_in, 1, 1, generator))
        self.model = nn.Sequential(*layers)

    def _conv(self, c_in: int, c_out: int, stride: int,
              generator: Optional[torch.Generator]) -> nn.Conv2d:
        kwargs = dict(kernel_size=self.spec.kernel, stride=stride, padding=self.spec.padding)
        if self.spec.norm == 'spectral':
            return SpectralNormConv2d(c_in, c_out, generator=generator, **kwargs)
        return nn.Conv2d(c_in, c_out, **kwargs)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.model(x)


# ---------------------------------------------------------------------------
# Shape arithmetic
# ---------------------------------------------------------------------------

def discriminator_layers(spec: DiscriminatorSpec) -> List[Tuple[int, int, int]]:
    """(kernel, stride, padding) of every convolution in order"""
    convs = [(spec.kernel, 2, spec.padding)] * spec.n_layers
    convs += [(spec.kernel, 1, spec.padding)] * 2
    return convs


def receptive_field(spec: DiscriminatorSpec = DiscriminatorSpec()) -> int:
    """Side of the input patch seen by one output unit (70 for the default spec)"""
    field = 1
    for kernel, stride, _ in reversed(discriminator_layers(spec)):
        field = field * stride + (kernel - stride)
    return field


def patch_grid_size(spec: DiscriminatorSpec, size: int) -> int:
    """Side of the patch score map for a square input of the given side"""
    for kernel, stride, padding in discriminator_layers(spec):
        size = (size + 2 * padding - kernel) // stride + 1
    return size


# ---------------------------------------------------------------------------
# Construction and forward passes
# ---------------------------------------------------------------------------

def _init_weights(module: nn.Module, generator: torch.Generator) -> None:
    for layer in module.modules():
        if isinstance(layer, (nn.Conv2d, nn.ConvTranspose2d)):
            with torch.no_grad():
                layer.weight.normal_(0.0, INIT_STD, generator=generator)
                if layer.bias is not None:
                    layer.bias.zero_()
        elif isinstance(layer, nn.InstanceNorm2d) and layer.affine:
            with torch.no_grad():
                layer.weight.fill_(1.0)
                layer.bias.zero_()


def build_generator(seed: int, spec: GeneratorSpec = GeneratorSpec()) -> Generator:
    """Generator with N(0, 0.02) convolution weights, zero biases, unit/zero norm affine"""
    rng = torch.Generator().manual_seed(seed)
    net = Generator(spec)
    _init_weights(net, rng)
    return net


def build_discriminator(seed: int, spec: DiscriminatorSpec = DiscriminatorSpec()) -> PatchDiscriminator:
    """Discriminator initialized like the generator; spectral u vectors drawn from the same seed"""
    rng = torch.Generator().manual_seed(seed)
    net = PatchDiscriminator(spec, generator=rng)
    _init_weights(net, rng)
    return net


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def generator_forward(net: Generator, x: ImageBatch) -> ImageBatch:
    """Translate a batch; spatial dims must be divisible by 2 ** n_downsampling"""
    _, _, height, width = x.data.shape
    multiple = net.size_multiple
    if height % multiple or width % multiple:
        raise ShapeError(f"Generator input {height}x{width} is not divisible by {multiple}")
    return ImageBatch(data=net(x.data), domain_tag='generated', names=x.names)


def discriminator_forward(net: PatchDiscriminator, x: ImageBatch) -> torch.Tensor:
    """Raw patch score map (m, 1, h', w')"""
    _, _, height, width = x.data.shape
    field = receptive_field(net.spec)
    if height < field or width < field:
        raise ShapeError(f"Discriminator input {height}x{width} is smaller than its "
                         f"{field}x{field} receptive field")
    return net(x.data)


# ---------------------------------------------------------------------------
# Serialization: little-endian float32 blob + JSON shape manifest
# ---------------------------------------------------------------------------

def save_params(net: nn.Module, directory: Union[str, Path]) -> Path:
    """Write every tensor of a network's state to params.bin and manifest.json"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries: Dict[str, Dict] = {}
    counters: Dict[str, int] = {}
    offset = 0
    with open(directory / PARAMS_BLOB, 'wb') as blob:
        for name, tensor in net.state_dict().items():
            if not tensor.is_floating_point():
                counters[name] = int(tensor)
                continue
            data = tensor.detach().cpu().numpy().astype('<f4').tobytes()
            entries[name] = {'shape': list(tensor.shape), 'dtype': 'float32',
                             'offset': offset, 'nbytes': len(data)}
            blob.write(data)
            offset += len(data)
    manifest = {'tensors': entries, 'counters': counters, 'total_bytes': offset}
    path = directory / PARAMS_MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    return path


def manifest_diff(net: nn.Module, manifest: Dict) -> Dict[str, List]:
    """Names missing from or unexpected in a manifest, and shape mismatches"""
    expected = {n: list(t.shape) for n, t in net.state_dict().items() if t.is_floating_point()}
    stored = {n: e['shape'] for n, e in manifest.get('tensors', {}).items()}
    return {
        'missing': sorted(set(expected) - set(stored)),
        'unexpected': sorted(set(stored) - set(expected)),
        'shape_mismatch': sorted(
            f"{n}: expected {expected[n]}, stored {stored[n]}"
            for n in set(expected) & set(stored) if expected[n] != stored[n]
        ),
    }


def load_params(net: nn.Module, directory: Union[str, Path]) -> nn.Module:
    """Load params.bin into a network built from the same spec"""
    directory = Path(directory)
    manifest_path = directory / PARAMS_MANIFEST
    blob_path = directory / PARAMS_BLOB
    if not manifest_path.exists() or not blob_path.exists():
        raise CheckpointError(f"Missing parameter files in {directory}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise CheckpointError(f"Corrupt parameter manifest {manifest_path}: {e}") from e

    diff = manifest_diff(net, manifest)
    if any(diff.values()):
        raise CheckpointError(f"Parameter manifest in {directory} does not match the network: {diff}")

    raw = blob_path.read_bytes()
    if len(raw) != manifest['total_bytes']:
        raise CheckpointError(f"{blob_path} holds {len(raw)} bytes, manifest expects {manifest['total_bytes']}")

    state = net.state_dict()
    for name, entry in manifest['tensors'].items():
        chunk = raw[entry['offset']:entry['offset'] + entry['nbytes']]
        array = np.frombuffer(chunk, dtype='<f4').reshape(entry['shape'])
        state[name] = torch.from_numpy(array.copy()).to(state[name].dtype)
    for name, value in manifest.get('counters', {}).items():
        if name in state:
            state[name] = torch.tensor(value, dtype=state[name].dtype)
    net.load_state_dict(state)
    return net
