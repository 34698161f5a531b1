"""Run traces: per-step metrics with CSV persistence.

A trace holds one row per recorded step: step index, optimality gap,
potential (gap plus weighted squared distance of the ``z`` iterate from
the minimizer; NaN when the minimizer is unknown) and elapsed wall
time.  Floats are written with ``repr`` so a round trip through CSV is
bit-exact.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

CSV_COLUMNS = ("t", "f_gap", "potential", "wall_ns")


@dataclass
class RunTrace:
    """Recorded solver trajectory plus run-level summary fields."""

    ts: List[int] = field(default_factory=list)
    f_gaps: List[float] = field(default_factory=list)
    potentials: List[float] = field(default_factory=list)
    wall_ns: List[int] = field(default_factory=list)
    #: maximum observed update overlap (0 for sequential runs)
    q_obs: int = 0
    #: final iterate, for callers that continue from the run
    final_x: Optional[np.ndarray] = None
    #: per-update commit log, populated by the asynchronous engine
    commit_log: Optional[object] = None

    def record(self, t: int, f_gap: float, potential: float, wall_ns: int) -> None:
        if self.ts and t <= self.ts[-1]:
            raise ValueError(f"trace steps must increase, got {t} after {self.ts[-1]}")
        self.ts.append(t)
        self.f_gaps.append(float(f_gap))
        self.potentials.append(float(potential))
        self.wall_ns.append(int(wall_ns))

    def __len__(self) -> int:
        return len(self.ts)

    @property
    def final_gap(self) -> float:
        if not self.ts:
            raise ValueError("empty trace has no final gap")
        return self.f_gaps[-1]

    @property
    def total_wall_ns(self) -> int:
        return self.wall_ns[-1] if self.ts else 0

    def gap_at(self, t: int) -> float:
        """Gap at recorded step ``t`` (exact match required)."""
        i = int(np.searchsorted(self.ts, t))
        if i == len(self.ts) or self.ts[i] != t:
            raise KeyError(f"step {t} was not recorded")
        return self.f_gaps[i]

    def first_step_reaching(self, gap: float) -> Optional[int]:
        """Earliest recorded step whose gap is at most ``gap``, if any."""
        for t, g in zip(self.ts, self.f_gaps):
            if g <= gap:
                return t
        return None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for t, g, pot, w in zip(self.ts, self.f_gaps, self.potentials, self.wall_ns):
                writer.writerow([t, repr(g), repr(pot), w])

    @classmethod
    def from_csv(cls, path) -> "RunTrace":
        trace = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != CSV_COLUMNS:
                raise ValueError(f"{path}: unexpected trace header {header}")
            for row in reader:
                trace.record(int(row[0]), float(row[1]), float(row[2]), int(row[3]))
        return trace


def potential_value(gap: float, z: np.ndarray, minimizer: Optional[np.ndarray], zeta: float) -> float:
    """Potential ``gap + zeta * |x* - z|^2``; NaN without a known minimizer."""
    if minimizer is None:
        return math.nan
    d = minimizer - z
    return gap + zeta * float(d @ d)
