"""Result containers shared by the grey and spectral solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MONOTONE_SLACK = 1e-10


@dataclass
class TemperatureProfile:
    """Nonnegative temperatures (scaled units) at the nodes of a depth grid.

    ``coords`` holds the physical coordinate of each node (``z`` for the
    lake problems, ``tau`` for the spectral solver).
    """

    T: np.ndarray
    coords: np.ndarray

    def __post_init__(self):
        self.T = np.asarray(self.T, dtype=float)
        self.coords = np.asarray(self.coords, dtype=float)
        if self.T.shape[-1] != self.coords.shape[-1]:
            raise ValueError("temperature and coordinate lengths differ")
        if not np.all(np.isfinite(self.T)):
            raise ValueError("temperatures must be finite")
        if np.any(self.T < 0):
            raise ValueError("temperatures must be >= 0")

    @property
    def T_max(self) -> float:
        return float(self.T.max())

    @property
    def T_min(self) -> float:
        return float(self.T.min())


@dataclass
class IterationReport:
    """Per-iteration bookkeeping of a source iteration.

    Every list has one entry per completed outer iteration.  ``ratio[n]`` is
    the ratio of successive source-norm increments (nan when undefined).
    """

    sup_increment: list = field(default_factory=list)
    min_increment: list = field(default_factory=list)
    source_norm: list = field(default_factory=list)
    ratio: list = field(default_factory=list)
    min_increment_J: list = field(default_factory=list)
    min_increment_K: list = field(default_factory=list)
    inner_iterations: list = field(default_factory=list)
    inner_residual: list = field(default_factory=list)
    converged: bool = False
    regularized: bool = False
    flags: dict = field(default_factory=dict)
    iterates: list = field(default_factory=list, repr=False)

    @property
    def n_iter(self) -> int:
        return len(self.sup_increment)

    @property
    def monotone(self) -> bool:
        """True when no temperature increment fell below -1e-10."""
        return all(m >= -MONOTONE_SLACK for m in self.min_increment)

    @property
    def monotone_J(self) -> bool:
        return all(m >= -MONOTONE_SLACK for m in self.min_increment_J)

    @property
    def monotone_K(self) -> bool:
        return all(m >= -MONOTONE_SLACK for m in self.min_increment_K)

    def record(self, T_new, T_old, source_norm=None):
        dT = np.asarray(T_new) - np.asarray(T_old)
        self.sup_increment.append(float(np.max(np.abs(dT))))
        self.min_increment.append(float(np.min(dT)))
        if source_norm is not None:
            prev = self.source_norm[-2:] if self.source_norm else []
            self.source_norm.append(float(source_norm))
            ratio = float("nan")
            if len(prev) == 2:
                d_old = prev[1] - prev[0]
                d_new = source_norm - prev[1]
                if d_old != 0:
                    ratio = d_new / d_old
            self.ratio.append(ratio)

    def summary(self) -> dict:
        return {
            "iterations": self.n_iter,
            "converged": bool(self.converged),
            "monotone": bool(self.monotone),
            "final_sup_increment": self.sup_increment[-1] if self.sup_increment else None,
            "regularized": bool(self.regularized),
            **{k: v for k, v in self.flags.items() if isinstance(v, (bool, int, float, str))},
        }
