"""
Command-line entry point

    toonphoto prepare | train | translate | fid | plot-fid

Every command echoes its resolved configuration, refuses to write into an
existing output unless --force is given, and exits 1 with a one-line message
on any toonphoto error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Iterator, List, Optional

import torch

from .config import FIDConfig, PrepareConfig, TrainConfig, build_config, dump_config
from .data_integrity_checker import REPORT_NAME, ManifestIntegrityChecker
from .errors import ConfigError, IntegrityError, ToonPhotoError
from .fid import compute_stats, frechet_distance, make_extractor, weighted_score
from .imagedata import (
    build_manifest, load_frame_records, load_image_folder, read_exclusion_list,
)
from .sources import PhotoFolderSource, extract_video_dir
from .trainer import fit, load_manifests, translate
from .training_log import LOG_NAME, TrainingLog, plot_fid_curves

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
FRAMES_DIR = 'frames'
CURATION_RECORD = 'curation.json'
FID_RESULT = 'fid.json'
DEFAULT_VAL_FRACTION = 0.2


def _echo(config) -> None:
    print(config.model_dump_json(indent=2))


def _claim_output(path: Path, force: bool) -> None:
    """Refuse to write into an existing non-empty output unless forced"""
    if path.exists() and (path.is_file() or any(path.iterdir())) and not force:
        raise ConfigError(f"Output {path} already exists; pass --force to overwrite")


def _split_counts(config: PrepareConfig, accepted: int):
    val = config.val_count if config.val_count is not None else int(accepted * DEFAULT_VAL_FRACTION)
    train = config.train_count if config.train_count is not None else accepted - val
    return train, val


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_prepare(args: argparse.Namespace) -> int:
    config = build_config(PrepareConfig, args.config, {
        # Photo folders default to the real domain unless a config file decides
        'domain': args.domain or ('real' if args.photos and args.config is None else None),
        'sample_rate': args.fps,
        'trim_fraction': args.trim,
        'dark_threshold': args.dark,
        'image_size': args.size,
        'train_count': args.train,
        'val_count': args.val,
        'seed': args.seed,
        'exclude_file': args.exclude,
    })
    _echo(config)
    domain_root = Path(args.out) / config.domain
    _claim_output(domain_root, args.force)
    frames_dir = domain_root / FRAMES_DIR

    if args.videos:
        records = extract_video_dir(args.videos, frames_dir, config.sample_rate,
                                    config.trim_fraction, config.dark_threshold)
    else:
        photo_dir = Path(args.photos)
        if not photo_dir.is_dir():
            raise IntegrityError(f"Photo directory not found: {photo_dir}")
        records = PhotoFolderSource(photo_dir, config.dark_threshold).extract(frames_dir)

    excluded = set(read_exclusion_list(config.exclude_file))
    accepted = sum(1 for r in records if r.accepted and r.image_file not in excluded)
    manifests = build_manifest(frames_dir, config.domain, _split_counts(config, accepted),
                               seed=config.seed, out_root=args.out,
                               image_size=config.image_size, exclude=sorted(excluded))

    curation = []
    for record in load_frame_records(frames_dir) or []:
        if record.accepted and record.image_file in excluded:
            record.accepted = False
            record.reject_reason = 'excluded'
        curation.append(record.to_dict())
    (domain_root / CURATION_RECORD).write_text(
        json.dumps({'records': curation}, indent=2, sort_keys=True) + '\n', encoding='utf-8')

    checker = ManifestIntegrityChecker()
    passed = checker.check_corpus(domain_root)
    checker.save_report(domain_root / REPORT_NAME, title=f"domain: {config.domain}")
    if not passed:
        raise IntegrityError(f"Integrity check failed for {domain_root}: {checker.issues[0]}")
    dump_config(config, domain_root)
    for split, manifest in manifests.items():
        print(f"{config.domain}/{split}: {len(manifest)} images -> {manifest.root}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    overrides = {
        'cartoon_root': args.cartoon,
        'real_root': args.real,
        'out_dir': args.out,
        'epochs': args.epochs,
        'lambda_cyc': args.lambda_cyc,
        'lr': args.lr,
        'batch_size': args.batch_size,
        'fid_interval': args.fid_interval,
        'use_replay_buffer': True if args.replay_buffer else None,
        'seed': args.seed,
        'discriminator': {'norm': 'instance' if args.no_spectral_norm else None},
        'fid': {'extractor': args.extractor},
    }
    config = build_config(TrainConfig, args.config, overrides)
    _echo(config)
    if config.out_dir is None:
        raise ConfigError("train needs --out")
    if args.resume is None:
        _claim_output(Path(config.out_dir) / LOG_NAME, args.force)
    manifests = load_manifests(config)
    dump_config(config, config.out_dir)
    state = fit(config, manifests, resume=args.resume, progress=True)
    best = f"{state.best_fid:.4f}" if state.best_fid is not None else 'n/a'
    print(f"Finished epoch {state.epoch} at step {state.step}; best weighted FID {best}")
    return 0


def cmd_translate(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    _claim_output(out_dir, args.force)
    written = translate(args.checkpoint, args.inputs, out_dir)
    print(f"Wrote {len(written)} images to {out_dir}")
    return 0


def _folder_batches(directory: str, batch_size: int, size: Optional[int]) -> Iterator[torch.Tensor]:
    if not Path(directory).is_dir():
        raise IntegrityError(f"Image directory not found: {directory}")
    names, images = load_image_folder(directory, size)
    if not names:
        raise IntegrityError(f"No images found in {directory}")
    yield from torch.split(images, batch_size)


def cmd_fid(args: argparse.Namespace) -> int:
    config = build_config(FIDConfig, args.config, {
        'extractor': args.extractor,
        'w_target': args.w_target,
        'w_input': None if args.w_target is None else round(1.0 - args.w_target, 12),
    })
    _echo(config)
    out_dir = Path(args.out)
    _claim_output(out_dir / FID_RESULT, args.force)

    extractor = make_extractor(config)
    stats = {}
    for name, directory in (('gen', args.gen), ('real', args.real), ('cartoon', args.cartoon)):
        stats[name] = compute_stats(_folder_batches(directory, config.batch_size, args.size), extractor)
        stats[name].save(out_dir / 'stats' / name)
    fid_real = frechet_distance(stats['gen'], stats['real'])
    fid_cartoon = frechet_distance(stats['gen'], stats['cartoon'])
    weighted = weighted_score(fid_real, fid_cartoon, config.w_target, config.w_input)

    result = {'fid_real': fid_real, 'fid_cartoon': fid_cartoon, 'weighted_fid': weighted,
              'w_target': config.w_target, 'w_input': config.w_input,
              'extractor': extractor.identity, 'n': {k: s.n for k, s in stats.items()}}
    (out_dir / FID_RESULT).write_text(json.dumps(result, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    dump_config(config, out_dir)
    print(f"FID (generated vs real):    {fid_real:.4f}")
    print(f"FID (generated vs cartoon): {fid_cartoon:.4f}")
    print(f"Weighted FID ({config.w_target:g}/{config.w_input:g}): {weighted:.4f}")
    return 0


def cmd_plot_fid(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    _claim_output(out_dir / 'fid_curve.png', args.force)
    logs = [TrainingLog(path) for path in args.log]
    paths = plot_fid_curves(logs, out_dir)
    for log in logs:
        print(json.dumps(log.summary(), sort_keys=True))
    print(f"Wrote {paths['png']} and {paths['csv']}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='JSON config file (flags take precedence)')
    common.add_argument('--verbose', action='store_true', help='Debug logging')
    common.add_argument('--force', action='store_true', help='Overwrite existing outputs')

    parser = argparse.ArgumentParser(prog='toonphoto',
                                     description='Unpaired cartoon to photo translation toolkit')
    commands = parser.add_subparsers(dest='command', required=True)

    prepare = commands.add_parser('prepare', parents=[common], help='Curate a domain corpus')
    source = prepare.add_mutually_exclusive_group(required=True)
    source.add_argument('--videos', help='Directory of videos (cartoon domain)')
    source.add_argument('--photos', help='Directory of photos (real domain)')
    prepare.add_argument('--out', required=True, help='Corpus root; writes <out>/<domain>/')
    prepare.add_argument('--domain', choices=['cartoon', 'real'])
    prepare.add_argument('--fps', type=float, help='Frames sampled per second of video')
    prepare.add_argument('--trim', type=float, help='Timeline fraction dropped at each end')
    prepare.add_argument('--dark', type=float, help='Minimum mean luminance')
    prepare.add_argument('--size', type=int, help='Output image side')
    prepare.add_argument('--train', type=int, help='Training image count')
    prepare.add_argument('--val', type=int, help='Validation image count')
    prepare.add_argument('--seed', type=int)
    prepare.add_argument('--exclude', type=Path, help='File of image names to drop')
    prepare.set_defaults(handler=cmd_prepare)

    train = commands.add_parser('train', parents=[common], help='Train the translation model')
    train.add_argument('--cartoon', type=Path, help='Cartoon corpus root (<root>/train, <root>/val)')
    train.add_argument('--real', type=Path, help='Photo corpus root')
    train.add_argument('--out', type=Path, help='Run directory')
    train.add_argument('--epochs', type=int)
    train.add_argument('--lambda-cyc', type=float)
    train.add_argument('--lr', type=float)
    train.add_argument('--batch-size', type=int)
    train.add_argument('--fid-interval', type=int)
    train.add_argument('--replay-buffer', action='store_true', help='Show discriminators replayed fakes')
    train.add_argument('--no-spectral-norm', action='store_true',
                       help='Instance-normalized discriminators instead of spectral normalization')
    train.add_argument('--seed', type=int)
    train.add_argument('--extractor', choices=['inception_v3_pool3', 'test_linear'])
    train.add_argument('--resume', choices=['latest', 'best'])
    train.set_defaults(handler=cmd_train)

    trans = commands.add_parser('translate', parents=[common], help='Translate cartoons to photos')
    trans.add_argument('--checkpoint', required=True, type=Path)
    trans.add_argument('--inputs', required=True, type=Path)
    trans.add_argument('--out', required=True, type=Path)
    trans.set_defaults(handler=cmd_translate)

    fid = commands.add_parser('fid', parents=[common], help='Plain and weighted FID of image folders')
    fid.add_argument('--gen', required=True, help='Generated images')
    fid.add_argument('--real', required=True, help='Target-domain reference images')
    fid.add_argument('--cartoon', required=True, help='Input-domain reference images')
    fid.add_argument('--out', required=True)
    fid.add_argument('--extractor', choices=['inception_v3_pool3', 'test_linear'])
    fid.add_argument('--w-target', type=float, help='Weight of the target-domain distance')
    fid.add_argument('--size', type=int, help='Resize and crop images to this side first')
    fid.set_defaults(handler=cmd_fid)

    plot = commands.add_parser('plot-fid', parents=[common], help='Plot FID against epoch')
    plot.add_argument('--log', required=True, action='append', help='Training log (repeatable)')
    plot.add_argument('--out', required=True)
    plot.set_defaults(handler=cmd_plot_fid)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        return args.handler(args)
    except ToonPhotoError as e:
        logger.debug('Command failed', exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
