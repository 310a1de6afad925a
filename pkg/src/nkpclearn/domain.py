"""Parameter and data containers shared across the package.

Parameter orderings are fixed:

* structural vector ``theta = (gamma, delta, psi)``
* equilibrium-defining vector ``lambda = (delta, psi, rho, sigma_u^2, sigma_eps^2)``

Every gradient, Jacobian and covariance matrix in the package uses these
orderings.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

THETA_NAMES = ("gamma", "delta", "psi")
LAMBDA_NAMES = ("delta", "psi", "rho", "sigma_u_sq", "sigma_eps_sq")


class NkpcError(Exception):
    """Base class for all package errors."""


class OutOfParamSpace(NkpcError, ValueError):
    def __init__(self, field: str, value: float, bound):
        self.field = field
        self.value = value
        self.bound = bound
        super().__init__(f"{field}={value!r} violates bound {bound}")


class InvalidData(NkpcError, ValueError):
    pass


class DegenerateVariance(NkpcError, ArithmeticError):
    pass


class SingularDesign(NkpcError, np.linalg.LinAlgError):
    pass


class NotPositiveDefinite(NkpcError, np.linalg.LinAlgError):
    def __init__(self, eigenvalues, message: str = "matrix is not positive definite"):
        self.eigenvalues = np.asarray(eigenvalues)
        super().__init__(f"{message}; eigenvalues={self.eigenvalues}")


class DegenerateDenominator(NkpcError, ArithmeticError):
    pass


class NoRootFound(NkpcError, RuntimeError):
    pass


class DegenerateScale(NkpcError, ArithmeticError):
    pass


class BoundaryHit(UserWarning):
    """Issued (not raised) when an estimate lies on the boundary of the parameter space."""


@dataclass(frozen=True)
class StructuralParams:
    gamma: float
    delta: float
    psi: float

    def as_array(self) -> np.ndarray:
        return np.array([self.gamma, self.delta, self.psi], dtype=float)

    @classmethod
    def from_array(cls, x: Sequence[float]) -> "StructuralParams":
        g, d, p = (float(v) for v in x)
        return cls(g, d, p)


@dataclass(frozen=True)
class AuxParams:
    a: float
    rho: float
    sigma_u: float
    sigma_eps: float


@dataclass(frozen=True)
class Lambda:
    delta: float
    psi: float
    rho: float
    sigma_u_sq: float
    sigma_eps_sq: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.delta, self.psi, self.rho, self.sigma_u_sq, self.sigma_eps_sq], dtype=float
        )

    @classmethod
    def from_array(cls, x: Sequence[float]) -> "Lambda":
        vals = [float(v) for v in x]
        if len(vals) != 5:
            raise ValueError("lambda needs exactly 5 components")
        return cls(*vals)

    @classmethod
    def from_params(cls, theta: StructuralParams, aux: AuxParams) -> "Lambda":
        return cls(theta.delta, theta.psi, aux.rho, aux.sigma_u**2, aux.sigma_eps**2)


@dataclass(frozen=True)
class ParamSpace:
    """Box ``Gamma x Delta x Psi``.

    With ``two_sided_delta`` the delta set is ``[-delta_hi, -delta_lo] U [delta_lo, delta_hi]``.
    """

    gamma_lo: float = 0.001
    gamma_hi: float = 0.30
    delta_lo: float = 0.01
    delta_hi: float = 0.9999
    psi_lo: float = -10.0
    psi_hi: float = 10.0
    two_sided_delta: bool = False

    def __post_init__(self):
        if not 0 < self.gamma_lo < self.gamma_hi < 1:
            raise ValueError("need 0 < gamma_lo < gamma_hi < 1")
        if not 0 < self.delta_lo < self.delta_hi < 1:
            raise ValueError("need 0 < delta_lo < delta_hi < 1")
        if not self.psi_lo < self.psi_hi:
            raise ValueError("need psi_lo < psi_hi")

    def delta_intervals(self) -> list[tuple[float, float]]:
        pos = (self.delta_lo, self.delta_hi)
        if self.two_sided_delta:
            return [(-self.delta_hi, -self.delta_lo), pos]
        return [pos]

    def contains(self, theta: StructuralParams) -> bool:
        try:
            validate_theta(theta, self)
        except OutOfParamSpace:
            return False
        return True

    def on_boundary(self, theta: StructuralParams, tol: float = 1e-10) -> list[str]:
        hits = []
        if min(abs(theta.gamma - self.gamma_lo), abs(theta.gamma - self.gamma_hi)) <= tol:
            hits.append("gamma")
        if any(min(abs(theta.delta - lo), abs(theta.delta - hi)) <= tol
               for lo, hi in self.delta_intervals()):
            hits.append("delta")
        if min(abs(theta.psi - self.psi_lo), abs(theta.psi - self.psi_hi)) <= tol:
            hits.append("psi")
        return hits


@dataclass(frozen=True)
class Dataset:
    pi: np.ndarray
    y: np.ndarray
    labels: Optional[Sequence[str]] = field(default=None, compare=False)

    def __post_init__(self):
        pi = np.ascontiguousarray(self.pi, dtype=float).ravel()
        y = np.ascontiguousarray(self.y, dtype=float).ravel()
        if pi.shape != y.shape:
            raise InvalidData(f"pi and y lengths differ ({pi.size} vs {y.size})")
        if pi.size < 10:
            raise InvalidData(f"need at least 10 observations, got {pi.size}")
        for name, arr in (("pi", pi), ("y", y)):
            bad = np.flatnonzero(~np.isfinite(arr))
            if bad.size:
                raise InvalidData(f"non-finite {name} at row(s) {bad[:10].tolist()}")
        if self.labels is not None and len(self.labels) != pi.size:
            raise InvalidData("labels length differs from data length")
        pi.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return int(self.pi.size)


def validate_theta(theta: StructuralParams, space: ParamSpace | None = None) -> StructuralParams:
    """Return ``theta`` unchanged if it lies in the closed box, else raise ``OutOfParamSpace``."""
    space = space or ParamSpace()
    vals = {"gamma": theta.gamma, "delta": theta.delta, "psi": theta.psi}
    for name, v in vals.items():
        if not np.isfinite(v):
            raise OutOfParamSpace(name, v, "finite")
    if not space.gamma_lo <= theta.gamma <= space.gamma_hi:
        raise OutOfParamSpace("gamma", theta.gamma, (space.gamma_lo, space.gamma_hi))
    if not any(lo <= theta.delta <= hi for lo, hi in space.delta_intervals()):
        raise OutOfParamSpace("delta", theta.delta, space.delta_intervals())
    if not space.psi_lo <= theta.psi <= space.psi_hi:
        raise OutOfParamSpace("psi", theta.psi, (space.psi_lo, space.psi_hi))
    return theta


def validate_lambda(lam: Lambda, require_pos_rho: bool = False) -> Lambda:
    """Check the restrictions the equilibrium map needs.

    ``require_pos_rho`` switches on the stronger mode used for root inference:
    ``0 < rho < 1`` and ``psi != 0``.
    """
    for name, v in zip(LAMBDA_NAMES, lam.as_array()):
        if not np.isfinite(v):
            raise OutOfParamSpace(name, v, "finite")
    if not abs(lam.delta) < 1:
        raise OutOfParamSpace("delta", lam.delta, "|delta| < 1")
    if require_pos_rho:
        if not 0 < lam.rho < 1:
            raise OutOfParamSpace("rho", lam.rho, "0 < rho < 1")
        if lam.psi == 0:
            raise OutOfParamSpace("psi", lam.psi, "psi != 0")
    elif not abs(lam.rho) < 1:
        raise OutOfParamSpace("rho", lam.rho, "|rho| < 1")
    if not lam.sigma_u_sq > 0:
        raise OutOfParamSpace("sigma_u_sq", lam.sigma_u_sq, "> 0")
    if not lam.sigma_eps_sq > 0:
        raise OutOfParamSpace("sigma_eps_sq", lam.sigma_eps_sq, "> 0")
    return lam


def validate_aux(aux: AuxParams) -> AuxParams:
    if not abs(aux.rho) < 1:
        raise OutOfParamSpace("rho", aux.rho, "|rho| < 1")
    if not aux.sigma_u >= 0:
        raise OutOfParamSpace("sigma_u", aux.sigma_u, ">= 0")
    if not aux.sigma_eps >= 0:
        raise OutOfParamSpace("sigma_eps", aux.sigma_eps, ">= 0")
    return aux


# Monte Carlo parameterisations
SCENARIO_A_THETA = StructuralParams(gamma=0.076, delta=0.998, psi=0.090)
SCENARIO_A_AUX = AuxParams(a=-0.02, rho=0.93, sigma_u=0.44, sigma_eps=0.76)
SCENARIO_B_THETA = StructuralParams(gamma=0.076, delta=0.95, psi=0.2734)
SCENARIO_B_AUX = AuxParams(a=-0.02, rho=0.9, sigma_u=1.0, sigma_eps=1.0)
