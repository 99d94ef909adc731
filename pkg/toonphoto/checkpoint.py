"""
Checkpoint directory format

    <ckpt>/G_r/, G_c/, D_r/, D_c/   params.bin + manifest.json per network
    <ckpt>/optimizers.pt            optimizer moments and LR schedule state
    <ckpt>/replay.pt                replay buffers (images and RNG state)
    <ckpt>/trainer.json             epoch, step, rng_seed, config_hash, best_fid
    <ckpt>/config.json              resolved training config

A checkpoint is assembled in a temporary sibling directory and renamed into
place, so an interrupted save leaves the previous checkpoint intact.
"""

import json
import logging
import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Iterator, Tuple, Union

import torch

from .config import TrainConfig
from .errors import CheckpointError, ConfigError
from .models import Generator, build_generator, load_params, save_params

if TYPE_CHECKING:
    from .trainer import TrainState

logger = logging.getLogger(__name__)

NETWORK_NAMES = ('G_r', 'G_c', 'D_r', 'D_c')
TRAINER_RECORD = 'trainer.json'
CONFIG_RECORD = 'config.json'
OPTIMIZER_BLOB = 'optimizers.pt'
REPLAY_BLOB = 'replay.pt'


@contextmanager
def staged_directory(target: Path) -> Iterator[Path]:
    """Yield a temporary directory that replaces target once the block succeeds"""
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f'.{target.name}.', dir=target.parent))
    try:
        yield staging
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    previous = None
    if target.exists():
        previous = target.parent / f'.{target.name}.old'
        shutil.rmtree(previous, ignore_errors=True)
        os.replace(target, previous)
    os.replace(staging, target)
    if previous is not None:
        shutil.rmtree(previous, ignore_errors=True)


def save_checkpoint(state: 'TrainState', config: TrainConfig, directory: Union[str, Path]) -> Path:
    directory = Path(directory)
    with staged_directory(directory) as staging:
        for name, net in state.networks.items():
            save_params(net, staging / name)
        torch.save(state.optimizer_state(), staging / OPTIMIZER_BLOB)
        torch.save({'G_r': state.buffer_r.state_dict(), 'G_c': state.buffer_c.state_dict()},
                   staging / REPLAY_BLOB)
        record = {
            'epoch': state.epoch,
            'step': state.step,
            'rng_seed': state.rng_seed,
            'config_hash': state.config_hash,
            'best_fid': state.best_fid,
        }
        (staging / TRAINER_RECORD).write_text(json.dumps(record, indent=2, sort_keys=True) + '\n',
                                              encoding='utf-8')
        (staging / CONFIG_RECORD).write_text(config.model_dump_json(indent=2), encoding='utf-8')
    logger.debug(f"Checkpoint at step {state.step} written to {directory}")
    return directory


def read_trainer_record(directory: Union[str, Path]) -> Dict[str, Any]:
    path = Path(directory) / TRAINER_RECORD
    if not path.exists():
        raise CheckpointError(f"Not a checkpoint directory (no {TRAINER_RECORD}): {directory}")
    try:
        return json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise CheckpointError(f"Corrupt trainer record {path}: {e}") from e


def read_checkpoint_config(directory: Union[str, Path]) -> TrainConfig:
    path = Path(directory) / CONFIG_RECORD
    if not path.exists():
        raise CheckpointError(f"Checkpoint has no {CONFIG_RECORD}: {directory}")
    return TrainConfig.model_validate_json(path.read_text(encoding='utf-8'))


def load_checkpoint(state: 'TrainState', directory: Union[str, Path]) -> 'TrainState':
    """Restore a checkpoint into a state built from the same configuration"""
    directory = Path(directory)
    record = read_trainer_record(directory)
    if record['config_hash'] != state.config_hash:
        raise ConfigError(
            f"Checkpoint {directory} was written with config {record['config_hash'][:12]}, "
            f"active config is {state.config_hash[:12]}"
        )
    for name, net in state.networks.items():
        load_params(net, directory / name)
    for blob in (OPTIMIZER_BLOB, REPLAY_BLOB):
        if not (directory / blob).exists():
            raise CheckpointError(f"Checkpoint {directory} is missing {blob}")
    # Both blobs are written by save_checkpoint and hold numpy RNG state
    state.load_optimizer_state(torch.load(directory / OPTIMIZER_BLOB, weights_only=False))
    replay = torch.load(directory / REPLAY_BLOB, weights_only=False)
    state.buffer_r.load_state_dict(replay['G_r'])
    state.buffer_c.load_state_dict(replay['G_c'])
    state.epoch = int(record['epoch'])
    state.step = int(record['step'])
    state.rng_seed = int(record['rng_seed'])
    state.best_fid = record.get('best_fid')
    logger.info(f"Resumed from {directory} at epoch {state.epoch}, step {state.step}")
    return state


def load_generator(directory: Union[str, Path], name: str = 'G_r') -> Tuple[Generator, TrainConfig]:
    """One generator of a checkpoint in evaluation mode, with the config it was trained under"""
    directory = Path(directory)
    if not directory.is_dir():
        raise CheckpointError(f"Checkpoint directory not found: {directory}")
    config = read_checkpoint_config(directory)
    net = build_generator(config.seed, config.generator)
    load_params(net, directory / name)
    return net.eval(), config
