"""
Filesystem store for experiment matrix output.

Layout under the root:
    <method>/eps_<epsilon>/D_<D>/seed_<seed>/report.json
                                            trace.csv
                                            observations.csv
                                            profile/iter_<n>.csv
    failures.csv
    summary.csv
"""
import logging
import os
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import pandas as pd

from schemas.reports import CellFailure, RunReport
from services.objective import Observation, export_log
from utils.file_utils import FileProcessingError, read_csv, write_csv

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["query_index", "value", "incumbent"]
FAILURE_COLUMNS = ["method", "epsilon", "D", "seed", "error"]


def format_epsilon(epsilon: Optional[float]) -> str:
    return "replay" if epsilon is None else f"{epsilon:g}"


def format_size(size: Optional[int]) -> str:
    return "auto" if size is None else str(size)


@dataclass(frozen=True, order=True)
class CellKey:
    """One cell of the experiment matrix"""
    method: str
    epsilon: Optional[float]
    size: Optional[int]
    seed: int

    @property
    def relative_dir(self) -> Path:
        return Path(self.method) / f"eps_{format_epsilon(self.epsilon)}" / f"D_{format_size(self.size)}" / f"seed_{self.seed}"

    def __str__(self) -> str:
        return f"method={self.method} eps={format_epsilon(self.epsilon)} D={format_size(self.size)} seed={self.seed}"


def trace_frame(report: RunReport) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in report.records], columns=TRACE_COLUMNS)


class RunStore:
    """Owns one output directory; a cell directory exists only once complete"""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def cell_dir(self, key: CellKey) -> Path:
        return self.root / key.relative_dir

    def is_complete(self, key: CellKey) -> bool:
        return (self.cell_dir(key) / "report.json").exists()

    def write_cell(
        self,
        key: CellKey,
        report: RunReport,
        observations: Sequence[Observation] = (),
        profiles: Optional[Dict[int, pd.DataFrame]] = None,
    ) -> Path:
        """Write into a temporary sibling, then rename it into place"""
        target = self.cell_dir(key)
        staging = target.parent / f".{target.name}.tmp-{os.getpid()}"
        if staging.exists():
            shutil.rmtree(staging)
        staging.mkdir(parents=True)

        (staging / "report.json").write_text(report.model_dump_json(indent=2))
        write_csv(trace_frame(report), staging / "trace.csv")
        export_log(observations, staging / "observations.csv")
        for iteration, frame in sorted((profiles or {}).items()):
            write_csv(frame, staging / "profile" / f"iter_{iteration}.csv")

        if target.exists():
            shutil.rmtree(target)
        staging.rename(target)
        logger.debug("cell stored path=%s", target)
        return target

    def read_report(self, key_or_dir: Union[CellKey, Path]) -> RunReport:
        cell = self.cell_dir(key_or_dir) if isinstance(key_or_dir, CellKey) else Path(key_or_dir)
        path = cell / "report.json"
        try:
            return RunReport.model_validate_json(path.read_text())
        except OSError as e:
            raise FileProcessingError(f"Error reading file '{path}': {e}")

    def iter_cells(self) -> Iterator[Path]:
        for path in sorted(self.root.glob("*/eps_*/D_*/seed_*/report.json")):
            yield path.parent

    def iter_reports(self) -> Iterator[Tuple[Path, RunReport]]:
        for cell in self.iter_cells():
            yield cell, self.read_report(cell)

    def read_trace(self, cell: Path) -> pd.DataFrame:
        return read_csv(Path(cell) / "trace.csv")

    def read_profile(self, cell: Path, iteration: int) -> pd.DataFrame:
        path = Path(cell) / "profile" / f"iter_{iteration}.csv"
        if not path.exists():
            raise FileProcessingError(f"no profile snapshot for iteration {iteration} in {cell}")
        return read_csv(path)

    def record_failures(self, failures: List[CellFailure]) -> None:
        if not failures:
            return
        frame = pd.DataFrame(
            [[f.method, format_epsilon(f.epsilon), format_size(f.target_size), f.seed, f.error] for f in failures],
            columns=FAILURE_COLUMNS,
        )
        path = self.root / "failures.csv"
        if path.exists():
            frame = pd.concat([read_csv(path, dtype=str), frame.astype(str)], ignore_index=True)
        write_csv(frame, path)

    def read_failures(self) -> pd.DataFrame:
        path = self.root / "failures.csv"
        if not path.exists():
            return pd.DataFrame(columns=FAILURE_COLUMNS)
        return read_csv(path, dtype=str)
