"""Profiled NLS for ``(gamma, delta, psi)``, AR(1) OLS and assembly of lambda."""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .domain import (
    BoundaryHit,
    Dataset,
    Lambda,
    ParamSpace,
    SingularDesign,
    StructuralParams,
)
from .filter import InitPolicy, learner_batch, run_filter, gradient_series

COND_MAX = 1e12


@dataclass(frozen=True)
class NlsOptions:
    grid_size: int = 200
    grid: str = "log"  # or "linear"
    refine_tol: float = 1e-8
    max_refine_iter: int = 500
    init_quantiles: tuple = tuple(np.linspace(0.05, 0.95, 11))
    method: str = "profile"  # or "joint"
    constrain: bool = True


@dataclass(frozen=True)
class NlsFit:
    theta_hat: StructuralParams
    sigma_u_sq_hat: float
    objective_value: float
    gamma_profile: np.ndarray = field(repr=False)
    init_used: InitPolicy
    convergence: dict
    n_obs: int
    boundary: tuple = ()

    def to_dict(self) -> dict:
        return {
            "theta_hat": asdict(self.theta_hat),
            "sigma_u_sq_hat": self.sigma_u_sq_hat,
            "objective_value": self.objective_value,
            "gamma_profile": self.gamma_profile.tolist(),
            "init_used": asdict(self.init_used),
            "convergence": self.convergence,
            "n_obs": self.n_obs,
            "boundary": list(self.boundary),
        }


@dataclass(frozen=True)
class ArFit:
    a_hat: float
    rho_hat: float
    sigma_eps_sq_hat: float
    n_obs: int
    stationary: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LambdaFit:
    lambda_hat: Lambda
    sources: dict

    def to_dict(self) -> dict:
        return {"lambda_hat": asdict(self.lambda_hat), "sources": self.sources}


def to_json(obj, **kw) -> str:
    return json.dumps(obj.to_dict(), **kw)


# --- inner least squares -------------------------------------------------------

def _moments(hlag: np.ndarray, y: np.ndarray, pi: np.ndarray):
    """Cross moments per gain; ``hlag`` has shape ``(G, m)``."""
    shh = np.einsum("gt,gt->g", hlag, hlag)
    shy = hlag @ y
    syy = float(y @ y)
    shp = hlag @ pi
    syp = float(y @ pi)
    return shh, shy, syy, shp, syp


def _inner_ols(hlag, y, pi):
    shh, shy, syy, shp, syp = _moments(hlag, y, pi)
    det = shh * syy - shy**2
    # condition number of the symmetric 2x2 Gram matrix
    tr = shh + syy
    disc = np.sqrt(np.maximum((shh - syy) ** 2 + 4 * shy**2, 0.0))
    lmax = 0.5 * (tr + disc)
    lmin = 0.5 * (tr - disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(lmin > 0, lmax / lmin, np.inf)
        bad = ~(cond <= COND_MAX)
        delta = (syy * shp - shy * syp) / det
        psi = (shh * syp - shy * shp) / det
    return delta, psi, bad, (shh, shy, syy, shp, syp)


def _quad_q(d, p, mom, spp):
    shh, shy, syy, shp, syp = mom
    return spp - 2 * d * shp - 2 * p * syp + d * d * shh + 2 * d * p * shy + p * p * syy


def _box_inner(delta, psi, mom, spp, space: ParamSpace):
    """Minimise the (convex) quadratic inner objective over ``Delta x Psi``."""
    shh, shy, syy, shp, syp = mom
    best_q = np.full(delta.shape, np.inf)
    best_d = np.empty_like(delta)
    best_p = np.empty_like(psi)
    plo, phi = space.psi_lo, space.psi_hi
    # singular designs are flagged upstream; their candidates come out NaN
    with np.errstate(divide="ignore", invalid="ignore"):
        for dlo, dhi in space.delta_intervals():
            inside = (delta >= dlo) & (delta <= dhi) & (psi >= plo) & (psi <= phi)
            cands = [(np.where(inside, delta, np.nan), np.where(inside, psi, np.nan))]
            for dfix in (dlo, dhi):
                pc = np.clip((syp - dfix * shy) / syy, plo, phi)
                cands.append((np.full_like(delta, dfix), pc))
            for pfix in (plo, phi):
                dc = np.clip((shp - pfix * shy) / shh, dlo, dhi)
                cands.append((dc, np.full_like(psi, pfix)))
            for dc, pc in cands:
                q = _quad_q(dc, pc, mom, spp)
                q = np.where(np.isnan(q), np.inf, q)
                take = q < best_q
                best_q = np.where(take, q, best_q)
                best_d = np.where(take, dc, best_d)
                best_p = np.where(take, pc, best_p)
    return best_d, best_p


def _profile_many(data: Dataset, gammas, inits, space: Optional[ParamSpace]):
    """Profiled objective for arrays of gains/initial values (vectorised)."""
    # degenerate designs surface as SingularDesign from the inner regression
    out = learner_batch(data.pi, gammas, inits, strict=False)
    h = out[4]
    hlag = h[:, :-1]
    y = data.y[1:]
    pi = data.pi[1:]
    delta, psi, bad, mom = _inner_ols(hlag, y, pi)
    if space is not None:
        delta, psi = _box_inner(np.where(bad, 0.0, delta), np.where(bad, 0.0, psi),
                                mom, float(pi @ pi), space)
    resid = pi[None, :] - delta[:, None] * hlag - psi[:, None] * y[None, :]
    q = np.einsum("gt,gt->g", resid, resid)
    return q, delta, psi, bad


def profiled_objective(data: Dataset, gamma: float, init: InitPolicy = InitPolicy(),
                       space: Optional[ParamSpace] = None) -> tuple[float, float, float]:
    """``(Q*(gamma), delta(gamma), psi(gamma))`` from the inner regression of
    ``pi_t`` on ``(h_{t-1}(gamma), y_t)`` without intercept.

    With ``space`` the inner coefficients are restricted to ``Delta x Psi``.
    """
    q, d, p, bad = _profile_many(data, [gamma], init.resolve(data), space)
    if bad[0]:
        raise SingularDesign(f"inner design is singular or ill-conditioned at gamma={gamma}")
    return float(q[0]), float(d[0]), float(p[0])


def gamma_grid(space: ParamSpace, size: int, kind: str = "log") -> np.ndarray:
    if kind == "log":
        return np.geomspace(space.gamma_lo, space.gamma_hi, size)
    if kind == "linear":
        return np.linspace(space.gamma_lo, space.gamma_hi, size)
    raise ValueError(f"unknown grid kind {kind!r}")


def objective(data: Dataset, theta: StructuralParams, init: InitPolicy = InitPolicy()) -> float:
    """Full NLS criterion ``Q_n(theta)`` over ``t = 2..n``."""
    h = run_filter(data, theta.gamma, init).h_lag
    u = data.pi[1:] - theta.delta * h - theta.psi * data.y[1:]
    return float(u @ u)


def fit_nls(data: Dataset, space: ParamSpace = ParamSpace(),
            init: InitPolicy = InitPolicy(), opts: NlsOptions = NlsOptions()) -> NlsFit:
    cspace = space if opts.constrain else None
    grid = gamma_grid(space, opts.grid_size, opts.grid)

    if init.mode == "estimated":
        a_grid = np.quantile(data.pi, opts.init_quantiles)
        gg, aa = np.meshgrid(grid, a_grid, indexing="ij")
        q, _, _, bad = _profile_many(data, gg.ravel(), aa.ravel(), cspace)
        q = np.where(bad, np.inf, q).reshape(gg.shape)
        k, j = np.unravel_index(np.argmin(q), q.shape)
        a0 = float(a_grid[j])
        profile = np.column_stack([grid, q[:, j]])
        init_used = InitPolicy("estimated", a0)
    else:
        a0 = init.resolve(data)
        q, _, _, bad = _profile_many(data, grid, a0, cspace)
        q = np.where(bad, np.inf, q)
        k = int(np.argmin(q))
        profile = np.column_stack([grid, q])
        init_used = init
    if not np.isfinite(profile[k, 1]):
        raise SingularDesign("inner design singular on the whole gamma grid")

    def qstar(g):
        qq, _, _, b = _profile_many(data, [g], a0, cspace)
        return np.inf if b[0] else float(qq[0])

    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    res = optimize.minimize_scalar(
        qstar, bounds=(lo, hi), method="bounded",
        options={"xatol": opts.refine_tol, "maxiter": opts.max_refine_iter},
    )
    g_hat = float(res.x)
    q_hat = float(res.fun)
    if profile[k, 1] < q_hat:
        g_hat, q_hat = float(grid[k]), float(profile[k, 1])
    iterations = int(res.nfev)
    tol_met = bool(res.success)

    _, d_hat, p_hat, _ = _profile_many(data, [g_hat], a0, cspace)
    theta = StructuralParams(g_hat, float(d_hat[0]), float(p_hat[0]))

    if opts.method == "joint":
        theta, q_hat, iterations, tol_met = _joint_refine(data, theta, init_used, space,
                                                          opts, start=(grid[k],))
    elif opts.method != "profile":
        raise ValueError(f"unknown method {opts.method!r}")

    n_obs = data.n - 1
    boundary = tuple(space.on_boundary(theta, tol=10 * opts.refine_tol))
    if boundary:
        warnings.warn(f"estimate on boundary of parameter space: {boundary}", BoundaryHit,
                      stacklevel=2)
    conv = {"converged": tol_met and not boundary, "iterations": iterations,
            "tolerance_met": tol_met}
    return NlsFit(theta, q_hat / n_obs, q_hat, profile, init_used, conv, n_obs, boundary)


def _joint_refine(data, theta, init, space, opts, start):
    """Direct 3-d minimisation (cross-check of the profiled estimator)."""
    g0 = float(start[0])
    _, d0, p0 = profiled_objective(data, g0, init, space if opts.constrain else None)
    n_obs = data.n - 1

    def fun(x):
        th = StructuralParams(*x)
        h = run_filter(data, th.gamma, init).h_lag
        u = data.pi[1:] - th.delta * h - th.psi * data.y[1:]
        grad = -2.0 * gradient_series(data, th, init).T @ u
        return float(u @ u) / n_obs, grad / n_obs

    bounds = [(space.gamma_lo, space.gamma_hi),
              (min(lo for lo, _ in space.delta_intervals()), space.delta_hi),
              (space.psi_lo, space.psi_hi)]
    res = optimize.minimize(fun, np.array([g0, d0, p0]), jac=True, method="L-BFGS-B",
                            bounds=bounds,
                            options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 2000})
    th = StructuralParams.from_array(res.x)
    return th, float(res.fun) * n_obs, int(res.nit), bool(res.success)


def fit_ar1(data: Dataset) -> ArFit:
    """OLS of ``y_t`` on ``(1, y_{t-1})``; variance is the mean squared residual."""
    y = data.y
    X = np.column_stack([np.ones(y.size - 1), y[:-1]])
    if np.linalg.cond(X.T @ X) > COND_MAX:
        raise SingularDesign("AR(1) design is singular (constant y?)")
    coef, *_ = np.linalg.lstsq(X, y[1:], rcond=None)
    e = y[1:] - X @ coef
    a_hat, rho_hat = float(coef[0]), float(coef[1])
    return ArFit(a_hat, rho_hat, float(e @ e) / e.size, int(e.size), abs(rho_hat) < 1)


def ar1_residuals(data: Dataset, ar: ArFit) -> np.ndarray:
    return data.y[1:] - ar.a_hat - ar.rho_hat * data.y[:-1]


def assemble_lambda(nls: NlsFit, ar: ArFit) -> LambdaFit:
    lam = Lambda(nls.theta_hat.delta, nls.theta_hat.psi, ar.rho_hat,
                 nls.sigma_u_sq_hat, ar.sigma_eps_sq_hat)
    sources = {"delta": "nls", "psi": "nls", "rho": "ar1_ols",
               "sigma_u_sq": "nls_residual_mean_square",
               "sigma_eps_sq": "ar1_residual_mean_square"}
    return LambdaFit(lam, sources)
