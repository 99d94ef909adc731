"""
Adversarial training of the two generators and two discriminators

G_r maps cartoons to photos, G_c maps photos to cartoons; D_r judges photos
and D_c judges cartoons. Each step updates both generators jointly with the
discriminators frozen, then both discriminators on real images against
(optionally replayed) generated ones.
"""

import json
import logging
from dataclasses import dataclass
from itertools import chain
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Union

import torch
from torch import nn
from torch.optim import Adam
from torch.optim.lr_scheduler import LambdaLR
from torchvision.utils import save_image
from tqdm import tqdm

from .checkpoint import NETWORK_NAMES, load_checkpoint, load_generator, save_checkpoint
from .config import TrainConfig
from .errors import ConfigError, IntegrityError, NonFiniteLossError, SampleSizeError, ShapeError
from .fid import (
    MIN_STATS_SAMPLES, FeatureExtractor, compute_stats, frechet_distance, make_extractor, weighted_score,
)
from .imagedata import (
    SPLITS, DatasetManifest, ImageBatch, load_batches, load_image_folder, to_pil,
)
from .losses import (
    LossReport, generator_objective, lsgan_discriminator_loss, lsgan_generator_loss,
    reconstruction_loss, total_objective,
)
from .models import build_discriminator, build_generator, discriminator_forward, generator_forward
from .replay import ReplayBuffer
from .training_log import LOG_NAME, TrainingLogWriter

logger = logging.getLogger(__name__)

CHECKPOINT_DIR = 'checkpoints'
SAMPLES_DIR = 'samples'
NONFINITE_DUMP = 'nonfinite_report.json'
SAMPLE_COUNT = 4

Manifests = Mapping[str, Mapping[str, DatasetManifest]]


@dataclass
class TrainState:
    """Everything a training run needs to continue bit-for-bit"""

    g_r: nn.Module
    g_c: nn.Module
    d_r: nn.Module
    d_c: nn.Module
    opt_g: Adam
    opt_d: Adam
    buffer_r: ReplayBuffer
    buffer_c: ReplayBuffer
    sched_g: Optional[LambdaLR] = None
    sched_d: Optional[LambdaLR] = None
    epoch: int = 0
    step: int = 0
    rng_seed: int = 0
    config_hash: str = ''
    best_fid: Optional[float] = None

    @property
    def networks(self) -> Dict[str, nn.Module]:
        return dict(zip(NETWORK_NAMES, (self.g_r, self.g_c, self.d_r, self.d_c)))

    def optimizer_state(self) -> Dict:
        state = {'opt_g': self.opt_g.state_dict(), 'opt_d': self.opt_d.state_dict()}
        if self.sched_g is not None:
            state['sched_g'] = self.sched_g.state_dict()
            state['sched_d'] = self.sched_d.state_dict()
        return state

    def load_optimizer_state(self, state: Dict) -> None:
        self.opt_g.load_state_dict(state['opt_g'])
        self.opt_d.load_state_dict(state['opt_d'])
        if self.sched_g is not None and 'sched_g' in state:
            self.sched_g.load_state_dict(state['sched_g'])
            self.sched_d.load_state_dict(state['sched_d'])


def linear_decay(epochs: int):
    """LR factor: 1 for the first half of training, then linear to 0 at the last epoch"""
    half = epochs // 2

    def factor(epoch: int) -> float:
        if epoch < half:
            return 1.0
        return max(0.0, 1.0 - (epoch - half) / max(1, epochs - half))

    return factor


def init_state(config: TrainConfig) -> TrainState:
    """Seeded networks, optimizers, schedules and replay buffers for a fresh run"""
    seed = config.seed
    torch.manual_seed(seed)
    if config.deterministic:
        torch.use_deterministic_algorithms(True, warn_only=True)

    g_r = build_generator(seed, config.generator)
    g_c = build_generator(seed + 1, config.generator)
    d_r = build_discriminator(seed + 2, config.discriminator)
    d_c = build_discriminator(seed + 3, config.discriminator)
    betas = (config.beta1, config.beta2)
    opt_g = Adam(chain(g_r.parameters(), g_c.parameters()), lr=config.lr, betas=betas)
    opt_d = Adam(chain(d_r.parameters(), d_c.parameters()), lr=config.lr, betas=betas)
    sched_g = sched_d = None
    if config.lr_decay:
        sched_g = LambdaLR(opt_g, linear_decay(config.epochs))
        sched_d = LambdaLR(opt_d, linear_decay(config.epochs))
    enabled = config.use_replay_buffer
    return TrainState(
        g_r=g_r.train(), g_c=g_c.train(), d_r=d_r.train(), d_c=d_c.train(),
        opt_g=opt_g, opt_d=opt_d,
        buffer_r=ReplayBuffer(config.buffer_capacity, enabled, seed=seed),
        buffer_c=ReplayBuffer(config.buffer_capacity, enabled, seed=seed + 1),
        sched_g=sched_g, sched_d=sched_d,
        rng_seed=seed, config_hash=config.config_hash(),
    )


def set_requires_grad(nets: Iterable[nn.Module], flag: bool) -> None:
    for net in nets:
        for param in net.parameters():
            param.requires_grad_(flag)


def _check_finite(losses: Mapping[str, torch.Tensor], report: Dict[str, float]) -> None:
    for name, value in losses.items():
        if not torch.isfinite(value).all():
            logger.error(f"Non-finite {name} loss; components so far: {report}")
            raise NonFiniteLossError(name, report)


def train_step(state: TrainState, cartoon: ImageBatch, real: ImageBatch,
               lambda_cyc: float) -> LossReport:
    """
    One generator update followed by one discriminator update

    Args:
        state: Training state; networks, optimizers and buffers are updated in place
        cartoon: Cartoon batch in [-1, 1]
        real: Photo batch of the same size

    Returns:
        LossReport of the step (state.step is advanced)
    """
    if cartoon.size != real.size:
        raise ShapeError(f"Batch sizes differ: {cartoon.size} cartoons vs {real.size} photos")
    if lambda_cyc < 0:
        raise ConfigError(f"lambda_cyc must be >= 0, got {lambda_cyc}")
    discriminators = (state.d_r, state.d_c)

    # Generators, with both discriminators frozen
    set_requires_grad(discriminators, False)
    state.opt_g.zero_grad(set_to_none=True)
    fake_r = generator_forward(state.g_r, cartoon)
    fake_c = generator_forward(state.g_c, real)
    rec_c = generator_forward(state.g_c, fake_r)
    rec_r = generator_forward(state.g_r, fake_c)
    g_losses = {
        'g_r_adv': lsgan_generator_loss(discriminator_forward(state.d_r, fake_r)),
        'g_c_adv': lsgan_generator_loss(discriminator_forward(state.d_c, fake_c)),
        'forward_cyc': reconstruction_loss(cartoon.data, rec_c.data),
        'backward_cyc': reconstruction_loss(real.data, rec_r.data),
    }
    values = {name: float(v.detach()) for name, v in g_losses.items()}
    _check_finite(g_losses, values)
    total_g = generator_objective(g_losses['g_r_adv'], g_losses['g_c_adv'],
                                  g_losses['forward_cyc'], g_losses['backward_cyc'], lambda_cyc)
    total_g.backward()
    state.opt_g.step()

    # Discriminators: real and generated images share one forward pass each
    set_requires_grad(discriminators, True)
    state.opt_d.zero_grad(set_to_none=True)
    m = cartoon.size
    pool_r = state.buffer_r.query(fake_r.data.detach())
    pool_c = state.buffer_c.query(fake_c.data.detach())
    scores_r = discriminator_forward(state.d_r, ImageBatch(torch.cat([real.data, pool_r]), 'real'))
    scores_c = discriminator_forward(state.d_c, ImageBatch(torch.cat([cartoon.data, pool_c]), 'cartoon'))
    d_losses = {
        'd_r': lsgan_discriminator_loss(scores_r[:m], scores_r[m:]),
        'd_c': lsgan_discriminator_loss(scores_c[:m], scores_c[m:]),
    }
    values.update({name: float(v.detach()) for name, v in d_losses.items()})
    _check_finite(d_losses, values)
    (d_losses['d_r'] + d_losses['d_c']).backward()
    state.opt_d.step()

    state.step += 1
    return total_objective(values, lambda_cyc)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _translated(net: nn.Module, manifest: DatasetManifest, batch_size: int) -> Iterable[ImageBatch]:
    for batch in load_batches(manifest, batch_size, shuffle=False):
        with torch.no_grad():
            yield generator_forward(net, batch)


def evaluate_fid(state: TrainState, cartoon_val: DatasetManifest, real_val: DatasetManifest,
                 extractor: FeatureExtractor, w_target: float = 0.8, w_input: float = 0.2,
                 batch_size: int = 32) -> Dict[str, float]:
    """Plain and weighted FID of G_r on the validation splits; G_r and D stay untouched"""
    was_training = state.g_r.training
    state.g_r.eval()
    try:
        gen = compute_stats(_translated(state.g_r, cartoon_val, batch_size), extractor)
    finally:
        state.g_r.train(was_training)
    real = compute_stats(load_batches(real_val, batch_size, shuffle=False), extractor)
    cartoon = compute_stats(load_batches(cartoon_val, batch_size, shuffle=False), extractor)
    fid_real = frechet_distance(gen, real)
    fid_cartoon = frechet_distance(gen, cartoon)
    return {
        'fid': weighted_score(fid_real, fid_cartoon, w_target, w_input),
        'fid_real': fid_real,
        'fid_cartoon': fid_cartoon,
    }


def save_sample_grid(state: TrainState, cartoon: ImageBatch, path: Union[str, Path]) -> Path:
    """Rows of (cartoon, G_r(cartoon), G_c(G_r(cartoon)))"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    was_training = state.g_r.training, state.g_c.training
    state.g_r.eval()
    state.g_c.eval()
    with torch.no_grad():
        fake = state.g_r(cartoon.data)
        rec = state.g_c(fake)
    state.g_r.train(was_training[0])
    state.g_c.train(was_training[1])
    rows = torch.stack([cartoon.data, fake, rec], dim=1).flatten(0, 1)
    save_image(rows, path, nrow=3, normalize=True, value_range=(-1.0, 1.0))
    return path


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------

def load_manifests(config: TrainConfig) -> Dict[str, Dict[str, DatasetManifest]]:
    """{domain: {split: manifest}} from <root>/train and <root>/val of both domains"""
    roots = {'cartoon': config.cartoon_root, 'real': config.real_root}
    manifests: Dict[str, Dict[str, DatasetManifest]] = {}
    for domain, root in roots.items():
        if root is None:
            raise ConfigError(f"No {domain} data root configured")
        manifests[domain] = {}
        for split in SPLITS:
            manifest = DatasetManifest.load(Path(root) / split)
            if manifest.domain != domain:
                raise IntegrityError(f"{root}/{split} holds {manifest.domain} images, expected {domain}")
            manifests[domain][split] = manifest
    return manifests


def _dump_nonfinite(out_dir: Path, state: TrainState, error: NonFiniteLossError) -> None:
    path = out_dir / NONFINITE_DUMP
    payload = {'step': state.step, 'epoch': state.epoch,
               'component': error.component, 'losses': error.report}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + '\n', encoding='utf-8')
    logger.error(f"Training aborted at step {state.step}; diagnostic written to {path}")


def fit(config: TrainConfig, manifests: Manifests, resume: Optional[str] = None,
        extractor: Optional[FeatureExtractor] = None, progress: bool = False) -> TrainState:
    """
    Train for config.epochs epochs

    Writes the training log, the latest checkpoint after every epoch, the best
    checkpoint whenever weighted FID improves and a sample grid at every FID
    evaluation, all under config.out_dir.

    Args:
        config: Resolved training config; out_dir is required
        manifests: {domain: {split: manifest}} for 'cartoon' and 'real'
        resume: 'latest' or 'best' to continue from that checkpoint
        extractor: FID feature extractor; built from config.fid when first needed
        progress: Show a tqdm bar per epoch

    Returns:
        Final TrainState
    """
    if config.out_dir is None:
        raise ConfigError("Training needs an output directory")
    out_dir = Path(config.out_dir)
    ckpt_root = out_dir / CHECKPOINT_DIR
    if config.epochs >= config.fid_interval:
        for domain in ('cartoon', 'real'):
            count = len(manifests[domain]['val'])
            if count < MIN_STATS_SAMPLES:
                raise SampleSizeError(f"FID needs at least {MIN_STATS_SAMPLES} {domain} validation images, "
                                      f"got {count}")
    state = init_state(config)
    if resume is not None:
        load_checkpoint(state, ckpt_root / resume)

    cartoon_train, cartoon_val = manifests['cartoon']['train'], manifests['cartoon']['val']
    real_train, real_val = manifests['real']['train'], manifests['real']['val']
    fixed = next(load_batches(cartoon_val, SAMPLE_COUNT, shuffle=False), None)

    with TrainingLogWriter(out_dir / LOG_NAME, append=resume is not None) as log:
        for epoch in range(state.epoch, config.epochs):
            cartoons = load_batches(cartoon_train, config.batch_size, config.shuffle_seed,
                                    epoch, num_workers=config.num_workers)
            reals = load_batches(real_train, config.batch_size, config.shuffle_seed + 1,
                                 epoch, num_workers=config.num_workers)
            pairs = tqdm(zip(cartoons, reals), desc=f'epoch {epoch + 1}/{config.epochs}',
                         total=-(-min(len(cartoon_train), len(real_train)) // config.batch_size),
                         disable=not progress, leave=False)
            for cartoon, real in pairs:
                if cartoon.size != real.size:
                    m = min(cartoon.size, real.size)
                    cartoon = ImageBatch(cartoon.data[:m], 'cartoon', cartoon.names[:m])
                    real = ImageBatch(real.data[:m], 'real', real.names[:m])
                try:
                    report = train_step(state, cartoon, real, config.lambda_cyc)
                except NonFiniteLossError as e:
                    _dump_nonfinite(out_dir, state, e)
                    raise
                log.write_losses(state.step, epoch + 1, report)
                if state.step % config.log_every == 0:
                    logger.info(f"step {state.step} epoch {epoch + 1}: total_g={report.total_g:.4f} "
                                f"total_d={report.total_d:.4f}")
            state.epoch = epoch + 1
            if state.sched_g is not None:
                state.sched_g.step()
                state.sched_d.step()

            save_checkpoint(state, config, ckpt_root / 'latest')

            if state.epoch % config.fid_interval == 0:
                if extractor is None:
                    extractor = make_extractor(config.fid)
                scores = evaluate_fid(state, cartoon_val, real_val, extractor,
                                      config.fid.w_target, config.fid.w_input, config.fid.batch_size)
                log.write_fid(state.step, state.epoch, **scores)
                logger.info(f"epoch {state.epoch}: FID {scores['fid']:.4f} "
                            f"(real {scores['fid_real']:.4f}, cartoon {scores['fid_cartoon']:.4f})")
                if fixed is not None:
                    save_sample_grid(state, fixed, out_dir / SAMPLES_DIR / f'epoch_{state.epoch:03d}.png')
                if state.best_fid is None or scores['fid'] < state.best_fid:
                    state.best_fid = scores['fid']
                    save_checkpoint(state, config, ckpt_root / 'best')
                    # Refresh latest so a resume carries the new best score
                    save_checkpoint(state, config, ckpt_root / 'latest')
    return state


def translate(checkpoint: Union[str, Path], inputs: Union[str, Path],
              out_dir: Union[str, Path]) -> List[Path]:
    """
    Apply G_r of a checkpoint to every image in a directory

    Inputs are resized and center-cropped to the training resolution; each
    output keeps its input's file name.
    """
    net, config = load_generator(checkpoint, 'G_r')
    inputs = Path(inputs)
    if not inputs.is_dir():
        raise IntegrityError(f"Input directory not found: {inputs}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names, images = load_image_folder(inputs, config.image_size)
    written = []
    for name, image in zip(names, images):
        batch = ImageBatch(image.unsqueeze(0), 'cartoon', (name,))
        with torch.no_grad():
            fake = generator_forward(net, batch)
        target = out_dir / name
        to_pil(fake.data[0]).save(target)
        written.append(target)
    logger.info(f"Translated {len(written)} images into {out_dir}")
    return written

