"""Learner recursions evaluated on observed data for a candidate gain.

The regression function uses observations ``t = 2..n``; every returned
series of ``f``/residuals/gradients therefore has length ``n - 1`` and is
aligned with ``data.pi[1:]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from . import _kernels
from .domain import Dataset, DegenerateVariance, NkpcError, StructuralParams

R_FLOOR = 1e-12
TOL_BETA = 1e-9
MAX_FLOOR_SHARE = 0.5


@dataclass(frozen=True)
class InitPolicy:
    """How the learner's initial value (``alpha_0 = pi_0``) is chosen.

    ``first_obs`` uses the first sample point, ``fixed`` uses ``value``;
    ``estimated`` is resolved by the estimator, which fills in ``value``.
    """

    mode: Literal["fixed", "first_obs", "estimated"] = "first_obs"
    value: Optional[float] = None

    def __post_init__(self):
        if self.mode not in ("fixed", "first_obs", "estimated"):
            raise ValueError(f"unknown init mode {self.mode!r}")
        if self.mode == "fixed" and self.value is None:
            raise ValueError("fixed init needs a value")

    @classmethod
    def fixed(cls, value: float) -> "InitPolicy":
        return cls("fixed", float(value))

    def resolve(self, data: Dataset) -> float:
        if self.mode == "first_obs":
            return float(data.pi[0])
        if self.value is None:
            raise NkpcError("estimated init has no value yet; run the estimator first")
        return float(self.value)


@dataclass(frozen=True)
class LearnerPath:
    alpha: np.ndarray
    beta: np.ndarray
    r: np.ndarray
    x: np.ndarray
    h: np.ndarray
    init: float
    gamma: float
    alpha_dot: Optional[np.ndarray] = None
    r_dot: Optional[np.ndarray] = None
    beta_dot: Optional[np.ndarray] = None
    h_dot: Optional[np.ndarray] = None

    @property
    def has_derivatives(self) -> bool:
        return self.h_dot is not None

    @property
    def h_lag(self) -> np.ndarray:
        """``h_{t-1}`` for ``t = 2..n``."""
        return self.h[:-1]


def _check_gamma(gamma) -> np.ndarray:
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    if np.any(~(g > 0)) or np.any(~(g < 1)):
        raise ValueError("gamma must lie in (0, 1)")
    return g


def learner_batch(pi: np.ndarray, gammas, inits, with_derivatives: bool = False,
                  r_floor: float = R_FLOOR, strict: bool = True):
    """Vectorised kernel call; ``inits`` broadcast against ``gammas``.

    Returns the raw tuple from the compiled kernel (arrays of shape ``(G, n)``).
    With ``strict`` a path whose ``r_t`` is floored in more than half of the
    periods raises ``DegenerateVariance``.
    """
    g = _check_gamma(gammas)
    a0 = np.broadcast_to(np.asarray(inits, dtype=float), g.shape).copy()
    out = _kernels.learner_paths(np.ascontiguousarray(pi, dtype=float), g, a0,
                                 float(r_floor), bool(with_derivatives))
    floored, max_beta = out[9], out[10]
    n = pi.shape[0]
    if strict and np.any(floored > MAX_FLOOR_SHARE * n):
        raise DegenerateVariance(
            f"r_t below {r_floor} in more than {MAX_FLOOR_SHARE:.0%} of periods"
        )
    if np.any(max_beta > 1.0 + TOL_BETA):
        raise NkpcError(f"|beta_t| exceeded 1 + {TOL_BETA} (max {max_beta.max():.12g})")
    return out


def run_filter(data: Dataset, gamma: float, init: InitPolicy = InitPolicy(),
               with_derivatives: bool = False, r_floor: float = R_FLOOR,
               strict: bool = True) -> LearnerPath:
    a0 = init.resolve(data)
    (alpha, beta, r, x, h, adot, rdot, bdot, hdot, _, _) = learner_batch(
        data.pi, gamma, a0, with_derivatives, r_floor, strict
    )
    deriv = {}
    if with_derivatives:
        deriv = dict(alpha_dot=adot[0], r_dot=rdot[0], beta_dot=bdot[0], h_dot=hdot[0])
    return LearnerPath(alpha[0], beta[0], r[0], x[0], h[0], a0, float(gamma), **deriv)


def regression_function(data: Dataset, theta: StructuralParams,
                        init: InitPolicy = InitPolicy()) -> tuple[np.ndarray, np.ndarray]:
    """Fitted values ``f_t = delta h_{t-1} + psi y_t`` and residuals, ``t = 2..n``."""
    path = run_filter(data, theta.gamma, init)
    f = theta.delta * path.h_lag + theta.psi * data.y[1:]
    return f, data.pi[1:] - f


def gradient_series(data: Dataset, theta: StructuralParams,
                    init: InitPolicy = InitPolicy()) -> np.ndarray:
    """``(n-1, 3)`` array of ``d f_t / d(gamma, delta, psi)``."""
    path = run_filter(data, theta.gamma, init, with_derivatives=True)
    return np.column_stack([theta.delta * path.h_dot[:-1], path.h_lag, data.y[1:]])
