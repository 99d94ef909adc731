"""
Training log writing, reading and FID-curve plotting

The log is newline-delimited JSON. Loss records carry
{step, epoch, <loss components>, total_g, total_d}; FID records carry
{step, epoch, fid, fid_real, fid_cartoon} where fid is the weighted score.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Mapping, Union

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from .errors import EmptyLogError, IntegrityError  # noqa: E402
from .losses import LossReport  # noqa: E402

logger = logging.getLogger(__name__)

LOG_NAME = 'train_log.jsonl'
FID_COLUMNS = ['epoch', 'step', 'fid', 'fid_real', 'fid_cartoon']
LOSS_COLUMNS = list(LossReport().to_dict())


class TrainingLogWriter:
    """Append-only NDJSON log; every record is flushed as it is written"""

    def __init__(self, path: Union[str, Path], append: bool = True):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, 'a' if append else 'w', encoding='utf-8')

    def write(self, record: Mapping) -> None:
        self._file.write(json.dumps(dict(record), sort_keys=True) + '\n')
        self._file.flush()

    def write_losses(self, step: int, epoch: int, report: LossReport) -> None:
        self.write({'step': step, 'epoch': epoch, **report.to_dict()})

    def write_fid(self, step: int, epoch: int, fid: float, fid_real: float, fid_cartoon: float) -> None:
        self.write({'step': step, 'epoch': epoch, 'fid': fid,
                    'fid_real': fid_real, 'fid_cartoon': fid_cartoon})

    def close(self) -> None:
        if not self._file.closed:
            self._file.close()

    def __enter__(self) -> 'TrainingLogWriter':
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class TrainingLog:
    """
    Read a training log into pandas for aggregation and plotting
    """

    def __init__(self, path: Union[str, Path]):
        """
        Load a log file

        Args:
            path: NDJSON training log
        """
        self.path = Path(path)
        if not self.path.exists():
            raise IntegrityError(f"Training log not found: {self.path}")
        if self.path.stat().st_size == 0:
            self.records = pd.DataFrame(columns=['step', 'epoch'])
        else:
            self.records = pd.read_json(self.path, lines=True)
        logger.info(f"Loaded {self.path.name}: {len(self.records)} records")

    @property
    def label(self) -> str:
        # Runs usually share the default log name, so fall back to the run directory
        if self.path.name == LOG_NAME:
            return self.path.parent.name
        return self.path.stem

    def losses(self) -> pd.DataFrame:
        """Per-step loss records"""
        present = [c for c in LOSS_COLUMNS if c in self.records.columns]
        if not present:
            return pd.DataFrame(columns=['step', 'epoch'] + LOSS_COLUMNS)
        rows = self.records.dropna(subset=present, how='all')
        return rows[['step', 'epoch'] + present].reset_index(drop=True)

    def fid_curve(self) -> pd.DataFrame:
        """FID records ordered by epoch"""
        if 'fid' not in self.records.columns:
            return pd.DataFrame(columns=FID_COLUMNS)
        rows = self.records.dropna(subset=['fid'])
        columns = [c for c in FID_COLUMNS if c in rows.columns]
        return rows[columns].sort_values('epoch').reset_index(drop=True)

    def aggregate_losses(self, agg_func: Union[str, Dict] = 'mean') -> pd.DataFrame:
        """
        Aggregate loss components per epoch

        Args:
            agg_func: Aggregation function or dict of {column: function}

        Returns:
            DataFrame indexed by epoch
        """
        losses = self.losses()
        if losses.empty:
            return losses
        return losses.drop(columns=['step']).groupby('epoch').agg(agg_func)

    def summary(self) -> Dict:
        losses = self.losses()
        curve = self.fid_curve()
        result = {
            'log': str(self.path),
            'steps': int(losses['step'].max()) if not losses.empty else 0,
            'epochs': int(self.records['epoch'].max()) if not self.records.empty else 0,
            'fid_entries': len(curve),
        }
        if not losses.empty:
            result['final_losses'] = {k: float(v) for k, v in losses.iloc[-1].items()
                                      if k in LOSS_COLUMNS}
        if not curve.empty:
            best = curve.loc[curve['fid'].idxmin()]
            result['best_fid'] = float(best['fid'])
            result['best_epoch'] = int(best['epoch'])
        return result

    def save_curve_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.fid_curve().to_csv(path, index=False)
        return path


def plot_fid_curves(logs: List[TrainingLog], out_dir: Union[str, Path],
                    name: str = 'fid_curve') -> Dict[str, Path]:
    """
    Plot weighted FID against epoch for one or more runs

    Writes <name>.png and <name>.csv (the plotted data, one row per point with
    a ``run`` column) to out_dir.

    Raises:
        EmptyLogError: if no log holds an FID entry
    """
    out_dir = Path(out_dir)
    curves = []
    for log in logs:
        curve = log.fid_curve()
        if curve.empty:
            logger.warning(f"{log.path} has no FID entries")
            continue
        curve.insert(0, 'run', log.label)
        curves.append(curve)
    if not curves:
        raise EmptyLogError("no FID entries")

    out_dir.mkdir(parents=True, exist_ok=True)
    table = pd.concat(curves, ignore_index=True)
    csv_path = out_dir / f'{name}.csv'
    table.to_csv(csv_path, index=False)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for run, curve in table.groupby('run', sort=False):
        ax.plot(curve['epoch'], curve['fid'], marker='o', label=run)
    ax.set_xlabel('epoch')
    ax.set_ylabel('FID')
    ax.grid(True, alpha=0.3)
    if len(curves) > 1:
        ax.legend()
    fig.tight_layout()
    png_path = out_dir / f'{name}.png'
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    logger.info(f"FID curve with {len(table)} points written to {png_path}")
    return {'png': png_path, 'csv': csv_path}
