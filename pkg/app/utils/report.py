import csv
import logging
from pathlib import Path
from typing import Iterable, List, Sequence, Union

from ..schemas.bench import BenchResult
from ..schemas.objective import LossRecord

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def write_csv(
    path: PathLike,
    header: Sequence[str],
    rows: Iterable[Sequence[str]],
    append: bool = False,
) -> Path:
    """Write rows under `header`; with `append` the header is only written to a new file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    exists = append and path.exists() and path.stat().st_size > 0
    with path.open("a" if append else "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if not exists:
            writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    return path


def write_loss_curve(path: PathLike, records: List[LossRecord], append: bool = False) -> Path:
    path = write_csv(path, LossRecord.CSV_HEADER, (r.csv_row() for r in records), append=append)
    logger.info(f"Wrote {len(records)} loss rows to {path}")
    return path


def write_bench_results(path: PathLike, results: List[BenchResult]) -> Path:
    path = write_csv(path, BenchResult.CSV_HEADER, (r.csv_row() for r in results))
    logger.info(f"Wrote {len(results)} benchmark rows to {path}")
    return path


def format_bytes(n: int) -> str:
    """Human-readable byte count (binary units)."""
    value = float(n)
    for unit in ("B", "KiB", "MiB", "GiB"):
        if abs(value) < 1024.0 or unit == "GiB":
            return f"{value:.1f} {unit}" if unit != "B" else f"{int(value)} B"
        value /= 1024.0
    return f"{value:.1f} GiB"
