"""Trajectory containers and their on-disk CSV form."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PathBundle:
    """Recorded trajectories of one integration run.

    ``t`` has shape (n_rec,); ``x`` has shape (n_paths, n_rec, d1) and ``y``
    either matches with trailing d2 or is None for runs without a fast
    component (averaged or limit equations).  ``exploded`` marks paths whose
    state left the finite range; their rows are frozen at the last finite
    value from ``explosion_step`` on.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray | None
    model_id: str
    epsilon: float | None
    seed: int
    stream_id: int
    dt: float
    scheme: str
    exploded: np.ndarray
    explosion_step: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.x.shape[0]

    @property
    def d1(self) -> int:
        return self.x.shape[2]

    def terminal_x(self) -> np.ndarray:
        return self.x[:, -1, :]

    def to_csv(self) -> str:
        """Long-format CSV: one row per (path, time), RFC-4180, LF endings.

        Floats are written with shortest round-trip formatting so rewriting
        the same bundle is byte-identical.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        d1 = self.x.shape[2]
        d2 = self.y.shape[2] if self.y is not None else 0
        header = ["path", "t"]
        header += [f"x{i + 1}" for i in range(d1)]
        header += [f"y{i + 1}" for i in range(d2)]
        writer.writerow(header)
        for p in range(self.x.shape[0]):
            for k in range(self.t.shape[0]):
                row = [str(p), repr(float(self.t[k]))]
                row += [repr(float(v)) for v in self.x[p, k]]
                if self.y is not None:
                    row += [repr(float(v)) for v in self.y[p, k]]
                writer.writerow(row)
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())
