"""Synthetic paths from the learning economy.

The data-generating process combines an AR(1) driving variable, the
constant-gain SAC learner and the actual law of motion for inflation.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterator, Optional

import numpy as np

from . import _kernels
from .domain import (
    AuxParams,
    Dataset,
    DegenerateVariance,
    NkpcError,
    StructuralParams,
    validate_aux,
)

R_FLOOR = 1e-12
TOL_BETA = 1e-9

ShockDist = Callable[[np.random.Generator, int], np.ndarray]

SIMPATH_COLUMNS = ("t", "pi", "y", "alpha", "beta", "r", "u", "eps")


def gaussian_shocks(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.standard_normal(size)


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``shock_dist`` draws unit-scale IID innovations and is called first for
    ``u`` then for ``eps``; draws are multiplied by ``sigma_u`` / ``sigma_eps``.
    ``init_y`` defaults to the stationary mean ``a / (1 - rho)``.
    """

    theta: StructuralParams
    aux: AuxParams
    n: int
    burn_in: int = 0
    seed: int = 0
    init_pi: float = 0.0
    init_y: Optional[float] = None
    shock_dist: ShockDist = field(default=gaussian_shocks, compare=False)
    r_floor: float = R_FLOOR
    guard: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if not 0 < self.theta.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not abs(self.theta.delta) < 1:
            raise ValueError("|delta| must be < 1")
        validate_aux(self.aux)

    @property
    def y0(self) -> float:
        if self.init_y is not None:
            return float(self.init_y)
        return self.aux.a / (1.0 - self.aux.rho)


@dataclass(frozen=True)
class SimPath:
    pi: np.ndarray
    y: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    r: np.ndarray
    u: np.ndarray
    eps: np.ndarray

    @property
    def n(self) -> int:
        return int(self.pi.size)

    def dataset(self) -> Dataset:
        return Dataset(self.pi, self.y)

    def _write(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SIMPATH_COLUMNS)
        cols = (self.pi, self.y, self.alpha, self.beta, self.r, self.u, self.eps)
        for t in range(self.n):
            w.writerow([t + 1] + [repr(float(c[t])) for c in cols])

    def csv_text(self) -> str:
        buf = io.StringIO()
        self._write(buf)
        return buf.getvalue()

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            self._write(fh)
        return path

    @classmethod
    def from_csv(cls, path) -> "SimPath":
        data = np.genfromtxt(path, delimiter=",", names=True)
        return cls(*(np.atleast_1d(data[c]) for c in SIMPATH_COLUMNS[1:]))


def simulate(config: SimConfig) -> SimPath:
    rng = np.random.default_rng(config.seed)
    total = config.n + config.burn_in
    u = config.aux.sigma_u * np.asarray(config.shock_dist(rng, total), dtype=float)
    eps = config.aux.sigma_eps * np.asarray(config.shock_dist(rng, total), dtype=float)
    th, aux = config.theta, config.aux
    pi, y, alpha, beta, r, status, fail_t = _kernels.simulate_dgp(
        u, eps, th.gamma, th.delta, th.psi, aux.a, aux.rho,
        float(config.init_pi), config.y0, config.r_floor, config.guard, TOL_BETA,
    )
    if status == _kernels.STATUS_R_FLOOR:
        raise DegenerateVariance(f"r_t fell below {config.r_floor} at t={fail_t + 1}")
    if status == _kernels.STATUS_BETA_BOUND:
        raise NkpcError(f"|beta_t| exceeded 1 + {TOL_BETA} at t={fail_t + 1}")
    cut = slice(config.burn_in, None)
    return SimPath(pi[cut], y[cut], alpha[cut], beta[cut], r[cut], u[cut], eps[cut])


def split_seed(seed: int, k: int) -> int:
    """Deterministic child seed for replication ``k``; replication 0 keeps ``seed``."""
    if k == 0:
        return int(seed)
    ss = np.random.SeedSequence(seed, spawn_key=(k,))
    return int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0])


def simulate_batch(config: SimConfig, reps: int) -> Iterator[SimPath]:
    """Yield ``reps`` independent paths; replication ``k`` uses ``split_seed(seed, k)``.

    Replication 0 reproduces ``simulate(config)`` exactly.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    for k in range(reps):
        yield simulate(replace(config, seed=split_seed(config.seed, k)))
