"""Behavioural equilibria: roots of ``G(beta; lambda) = beta - F(beta; lambda)`` on [0, 1].

``F(beta) = delta beta^2 + N(beta) / D(beta)`` with

    N = psi^2 rho (1 - delta^2 beta^4)
    D = psi^2 (delta beta^2 rho + 1) + (1 - rho^2)(1 - delta beta^2 rho) s,   s = sigma_u^2 / sigma_eps^2

Clearing the (positive) denominator gives the quartic
``P(beta) = (beta - delta beta^2) D(beta) - N(beta)`` which has the sign of ``G``.
The scan and bisection run on ``P``; derivatives and Jacobians use ``G``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import optimize

from .domain import (
    AuxParams,
    DegenerateDenominator,
    Lambda,
    LAMBDA_NAMES,
    NoRootFound,
    StructuralParams,
    validate_lambda,
)


@dataclass(frozen=True)
class RootOptions:
    scan_intervals: int = 10_000
    root_tol: float = 1e-12
    merge_tol: float = 1e-7
    double_tol: float = 1e-4
    # an interior extremum of G closer to zero than this is a (numerically) double root
    touch_tol: float = 1e-4
    pair_tol: float = 0.05
    require_pos_rho: bool = False


def _unpack(lam: Lambda):
    return lam.delta, lam.psi, lam.rho, lam.sigma_u_sq / lam.sigma_eps_sq


@dataclass(frozen=True)
class GCurve:
    """Polynomial representation of ``G`` for a fixed ``lambda``."""

    lam: Lambda
    d_coef: np.ndarray = field(repr=False)  # D(beta), ascending powers
    p_coef: np.ndarray = field(repr=False)  # P(beta), ascending powers

    @classmethod
    def from_lambda(cls, lam: Lambda) -> "GCurve":
        validate_lambda(lam)
        d, p, r, s = _unpack(lam)
        d0 = p * p + (1 - r * r) * s
        d2 = d * r * (p * p - (1 - r * r) * s)
        # D is even and quadratic in beta, so its minimum on [0, 1] is at an endpoint
        if min(d0, d0 + d2) <= 0:
            raise DegenerateDenominator(f"D(beta) <= 0 on [0, 1] for {lam}")
        dc = np.array([d0, 0.0, d2])
        pc = np.array([-p * p * r, d0, -d * d0, d2, -d * d2 + p * p * r * d * d])
        return cls(lam, dc, pc)

    def D(self, beta):
        return npoly.polyval(beta, self.d_coef)

    def P(self, beta):
        return npoly.polyval(beta, self.p_coef)

    def G(self, beta):
        return self.P(beta) / self.D(beta)

    def sample(self, grid_size: int = 401) -> np.ndarray:
        b = np.linspace(0.0, 1.0, grid_size)
        return np.column_stack([b, self.G(b)])

    def to_tsv(self, path, grid_size: int = 401):
        np.savetxt(path, self.sample(grid_size), delimiter="\t", header="beta\tG",
                   comments="", fmt="%.12g")


def eval_F(beta, lam: Lambda):
    """Exact rational evaluation of ``F(beta; lambda)``; vectorised in ``beta``."""
    d, p, r, s = _unpack(lam)
    b2 = np.asarray(beta, dtype=float) ** 2
    den = p * p * (d * b2 * r + 1) + (1 - r * r) * (1 - d * b2 * r) * s
    if np.any(den <= 0):
        raise DegenerateDenominator("D(beta; lambda) <= 0")
    return d * b2 + p * p * r * (1 - d * d * b2 * b2) / den


def eval_G(beta, lam: Lambda):
    return np.asarray(beta, dtype=float) - eval_F(beta, lam)


@dataclass(frozen=True)
class GDerivatives:
    G: np.ndarray
    G_b: np.ndarray
    G_bb: np.ndarray
    G_bbb: np.ndarray
    G_lam: np.ndarray  # (..., 5)
    G_blam: np.ndarray  # (..., 5)

    def __iter__(self):
        return iter((self.G, self.G_b, self.G_bb, self.G_bbb, self.G_lam, self.G_blam))


def eval_G_derivatives(beta, lam: Lambda) -> GDerivatives:
    """Closed-form ``G, G_b, G_bb, G_bbb, G_lambda, G_{b lambda}``.

    Vectorised in ``beta``; the lambda-derivatives carry a trailing axis of
    length 5 ordered as ``Lambda``.
    """
    d, p, r, _ = _unpack(lam)
    su, se = lam.sigma_u_sq, lam.sigma_eps_sq
    s = su / se
    b = np.asarray(beta, dtype=float)
    b2 = b * b
    p2 = p * p
    q = 1 - r * r

    N = p2 * r * (1 - d * d * b2 * b2)
    N1 = -4 * p2 * r * d * d * b2 * b
    N2 = -12 * p2 * r * d * d * b2
    N3 = -24 * p2 * r * d * d * b
    k = d * r * (p2 - q * s)
    D = p2 * (d * b2 * r + 1) + q * (1 - d * b2 * r) * s
    D1 = 2 * b * k
    D2 = 2 * k * np.ones_like(b)
    if np.any(D <= 0):
        raise DegenerateDenominator("D(beta; lambda) <= 0")

    # R = N / D and its beta-derivatives from N = R D (Leibniz)
    R = N / D
    R1 = (N1 - R * D1) / D
    R2 = (N2 - 2 * R1 * D1 - R * D2) / D
    R3 = (N3 - 3 * R2 * D1 - 3 * R1 * D2) / D

    G = b - d * b2 - R
    G1 = 1 - 2 * d * b - R1
    G2 = -2 * d - R2
    G3 = -R3

    # lambda-partials of N, D, N_b, D_b in the order (delta, psi, rho, su2, se2)
    z = np.zeros_like(b)
    Nl = [
        -2 * p2 * r * d * b2 * b2,
        2 * p * r * (1 - d * d * b2 * b2),
        p2 * (1 - d * d * b2 * b2),
        z,
        z,
    ]
    base = (1 - d * b2 * r)
    Dl = [
        p2 * b2 * r - q * b2 * r * s,
        2 * p * (d * b2 * r + 1),
        p2 * d * b2 + s * (-2 * r * base - q * d * b2),
        q * base / se,
        -q * base * su / se**2,
    ]
    N1l = [
        -8 * p2 * r * d * b2 * b,
        -8 * p * r * d * d * b2 * b,
        -4 * p2 * d * d * b2 * b,
        z,
        z,
    ]
    D1l = [
        2 * b * r * (p2 - q * s),
        4 * b * d * r * p,
        2 * b * d * (p2 - s + 3 * r * r * s),
        -2 * b * d * r * q / se,
        2 * b * d * r * q * su / se**2,
    ]
    Fpoly_l = [b2, z, z, z, z]  # delta beta^2 term
    Fpoly_bl = [2 * b, z, z, z, z]
    G_lam = []
    G_blam = []
    for j in range(5):
        Rl = (Nl[j] - R * Dl[j]) / D
        R1l = (N1l[j] - R1 * Dl[j] - Rl * D1 - R * D1l[j]) / D
        G_lam.append(-(Fpoly_l[j] + Rl))
        G_blam.append(-(Fpoly_bl[j] + R1l))
    return GDerivatives(G, G1, G2, G3, np.stack(G_lam, axis=-1), np.stack(G_blam, axis=-1))


def F_lambda(beta, lam: Lambda) -> np.ndarray:
    return -eval_G_derivatives(beta, lam).G_lam


@dataclass(frozen=True)
class DoubleRootQuantities:
    a: float
    B: np.ndarray
    c: float
    D: np.ndarray

    def to_dict(self) -> dict:
        return {"a": self.a, "B": self.B.tolist(), "c": self.c, "D": self.D.tolist()}


@dataclass(frozen=True)
class EquilibriaReport:
    lam: Lambda
    roots: tuple
    classification: tuple
    g_beta: tuple
    g_value: tuple
    jacobians: tuple  # per root; None for double roots
    double_root_quantities: Optional[DoubleRootQuantities]
    averaged_pair: Optional[float]
    sign_condition: bool

    @property
    def count(self) -> int:
        return len(self.roots)

    def to_dict(self) -> dict:
        return {
            "lambda": dict(zip(LAMBDA_NAMES, self.lam.as_array().tolist())),
            "count": self.count,
            "roots": list(self.roots),
            "classification": list(self.classification),
            "g_beta": list(self.g_beta),
            "g_value": list(self.g_value),
            "jacobians": [None if j is None else list(j) for j in self.jacobians],
            "double_root_quantities": (None if self.double_root_quantities is None
                                       else self.double_root_quantities.to_dict()),
            "averaged_pair": self.averaged_pair,
            "sign_condition": self.sign_condition,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def to_tsv(self) -> str:
        lines = ["beta\tclassification\tg_beta"]
        for b, c, g in zip(self.roots, self.classification, self.g_beta):
            lines.append(f"{b!r}\t{c}\t{g!r}")
        return "\n".join(lines) + "\n"


def _polish(curve: GCurve, lo: float, hi: float, tol: float) -> float:
    root = optimize.brentq(curve.P, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                           maxiter=200)
    dpc = npoly.polyder(curve.p_coef)
    for _ in range(5):
        if abs(curve.G(root)) < tol:
            break
        step = curve.P(root) / npoly.polyval(root, dpc)
        cand = root - step
        if not lo <= cand <= hi:
            break
        root = cand
    return float(root)


def _touch_points(curve: GCurve, grid: np.ndarray, vals: np.ndarray, tol: float) -> list[float]:
    """Interior extrema of ``G`` that approach zero without a sign change."""
    g = vals / curve.D(grid)
    out = []
    a = np.abs(g)
    idx = np.flatnonzero((a[1:-1] <= a[:-2]) & (a[1:-1] <= a[2:]) & (a[1:-1] < 10 * tol)) + 1
    for i in idx:
        if np.sign(vals[i - 1]) != np.sign(vals[i + 1]) or vals[i] == 0:
            continue
        lo, hi = grid[i - 1], grid[i + 1]

        def gb(x):
            return float(eval_G_derivatives(x, curve.lam).G_b)

        if gb(lo) * gb(hi) > 0:
            continue
        x = optimize.brentq(gb, lo, hi, xtol=1e-15)
        if abs(curve.G(x)) < tol:
            out.append(float(x))
    return out


def find_roots(lam: Lambda, opts: RootOptions = RootOptions()) -> EquilibriaReport:
    validate_lambda(lam, require_pos_rho=opts.require_pos_rho)
    curve = GCurve.from_lambda(lam)
    grid = np.linspace(0.0, 1.0, opts.scan_intervals + 1)
    vals = curve.P(grid)
    sign_ok = bool(vals[0] < 0 < vals[-1])

    found: list[tuple[float, str]] = []
    exact = np.flatnonzero(vals == 0)
    for i in exact:
        found.append((float(grid[i]), "scan"))
    change = np.flatnonzero(vals[:-1] * vals[1:] < 0)
    for i in change:
        found.append((_polish(curve, grid[i], grid[i + 1], opts.root_tol), "scan"))
    for x in _touch_points(curve, grid, vals, opts.touch_tol):
        found.append((x, "touch"))
    found.sort()

    # merge near-coincident roots; a merged cluster is a double root
    roots, kinds = [], []
    for x, kind in found:
        if roots and x - roots[-1][-1] < opts.merge_tol:
            roots[-1].append(x)
            kinds[-1] = "merged"
        else:
            roots.append([x])
            kinds.append(kind)
    if not roots:
        raise NoRootFound(f"no root of G on [0, 1] for {lam} (sign condition {sign_ok})")

    betas = np.array([float(np.mean(r)) for r in roots])
    der = eval_G_derivatives(betas, lam)
    classes, jacs = [], []
    dq = None
    for i, b in enumerate(betas):
        is_double = kinds[i] in ("touch", "merged") or abs(der.G_b[i]) < opts.double_tol
        classes.append("double" if is_double else "simple")
        if is_double:
            jacs.append(None)
            if dq is None:
                dq = DoubleRootQuantities(float(der.G_bb[i] / 2), der.G_lam[i].copy(),
                                          float(der.G_bbb[i] / 6), der.G_blam[i].copy())
        else:
            jacs.append(tuple((-der.G_lam[i] / der.G_b[i]).tolist()))

    report = EquilibriaReport(
        lam=lam,
        roots=tuple(betas.tolist()),
        classification=tuple(classes),
        g_beta=tuple(der.G_b.tolist()),
        g_value=tuple(der.G.tolist()),
        jacobians=tuple(jacs),
        double_root_quantities=dq,
        averaged_pair=None,
        sign_condition=sign_ok,
    )
    avg = average_double_pair(report, opts.pair_tol)
    if avg is not None:
        report = replace(report, averaged_pair=avg)
    return report


def near_double_pair(report: EquilibriaReport, pair_tol: float = 0.05) -> Optional[tuple[int, int]]:
    """Indices of the adjacent root pair that looks like a split double root.

    Among adjacent pairs with opposite ``G_beta`` signs the one with the
    smallest ``max |G_beta|`` at its endpoints is chosen; it qualifies when
    ``|G_beta|`` at its midpoint is below ``pair_tol``.
    """
    if report.count != 3:
        return None
    best, best_val = None, np.inf
    for i in range(2):
        if report.g_beta[i] * report.g_beta[i + 1] >= 0:
            continue
        v = max(abs(report.g_beta[i]), abs(report.g_beta[i + 1]))
        if v < best_val:
            best, best_val = (i, i + 1), v
    if best is None:
        return None
    mid = 0.5 * (report.roots[best[0]] + report.roots[best[1]])
    if abs(float(eval_G_derivatives(mid, report.lam).G_b)) >= pair_tol:
        return None
    return best


def average_double_pair(report: EquilibriaReport, pair_tol: float = 0.05) -> Optional[float]:
    pair = near_double_pair(report, pair_tol)
    if pair is None:
        return None
    return 0.5 * (report.roots[pair[0]] + report.roots[pair[1]])


def equilibrium_mean(theta: StructuralParams, aux: AuxParams) -> float:
    """Mean inflation ``psi a / ((1 - rho)(1 - delta))`` under the actual law of motion."""
    den = (1.0 - aux.rho) * (1.0 - theta.delta)
    if den == 0:
        raise ZeroDivisionError("rho = 1 or delta = 1")
    return theta.psi * aux.a / den
