"""Standard errors, the supF test for ``delta = 0``, influence functions and
uniform confidence bands for ``beta -> G(beta; lambda)``.

Sample averages run over the ``n - 1`` usable observations ``t = 2..n``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np
from scipy import stats

from .domain import (
    Dataset,
    DegenerateScale,
    NotPositiveDefinite,
    ParamSpace,
    SingularDesign,
    StructuralParams,
    THETA_NAMES,
)
from .equilibria import EquilibriaReport, F_lambda, GCurve
from .estimation import ArFit, LambdaFit, NlsFit, ar1_residuals, gamma_grid
from .filter import InitPolicy, gradient_series, learner_batch, regression_function

DEFAULT_STEP_SCALE = 0.01


class StepShrunk(UserWarning):
    """The Hessian stencil did not fit inside the gain interval and was shrunk."""


def default_step(n: int, scale: float = DEFAULT_STEP_SCALE) -> float:
    """``scale * n^{-1/4}``: vanishes while ``sqrt(n) * step`` diverges."""
    return scale * n ** -0.25


def _check_pd(A: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvalsh(A)
    if not np.all(ev > 0):
        raise NotPositiveDefinite(ev)
    return A


def _hessian_stencil(qfun: Callable[[np.ndarray], float], theta: np.ndarray,
                     step: float, n_obs: int) -> np.ndarray:
    k = theta.size
    A = np.empty((k, k))
    E = np.eye(k) * step
    for i in range(k):
        for j in range(i, k):
            v = (qfun(theta + E[i] + E[j]) - qfun(theta - E[i] + E[j])
                 - qfun(theta + E[i] - E[j]) + qfun(theta - E[i] - E[j]))
            A[i, j] = A[j, i] = v / (2 * step) ** 2 / (2 * n_obs)
    return A


def numerical_hessian(data: Optional[Dataset], theta_hat: StructuralParams,
                      init: InitPolicy = InitPolicy(), step: Optional[float] = None,
                      space: ParamSpace = ParamSpace(),
                      objective: Optional[Callable[[np.ndarray], float]] = None,
                      n_obs: Optional[int] = None) -> tuple[np.ndarray, float]:
    """Second-difference estimate of ``A_n`` (half the Hessian of ``Q_n / n``).

    ``objective`` replaces the NLS criterion (then ``n_obs`` is required).
    Returns ``(A_n, step_used)``.
    """
    th = theta_hat.as_array()
    if objective is None:
        n_obs = data.n - 1
        step = default_step(n_obs) if step is None else float(step)
        # only the gain enters nonlinearly; the stencil reaches gamma +- 2 step
        room = min(th[0] - space.gamma_lo, space.gamma_hi - th[0]) / 2
        if step > room:
            new = max(room, 1e-6)
            warnings.warn(f"Hessian step {step:.3g} shrunk to {new:.3g} to fit the gain interval",
                          StepShrunk, stacklevel=2)
            step = new
        offsets = np.array([-2, -1, 0, 1, 2]) * step
        a0 = init.resolve(data)
        hl = learner_batch(data.pi, th[0] + offsets, a0)[4][:, :-1]
        pi, y = data.pi[1:], data.y[1:]

        def objective(x):
            row = int(round((x[0] - th[0]) / step)) + 2
            u = pi - x[1] * hl[row] - x[2] * y
            return float(u @ u)
    else:
        if n_obs is None:
            raise ValueError("n_obs is required with an injected objective")
        step = default_step(n_obs) if step is None else float(step)
    A = _hessian_stencil(objective, th, step, n_obs)
    A = 0.5 * (A + A.T)
    return _check_pd(A), step


def outer_product_matrix(data: Dataset, theta: StructuralParams,
                         init: InitPolicy = InitPolicy()) -> np.ndarray:
    """``(1/n) sum fdot fdot'`` from the analytic gradient recursions."""
    g = gradient_series(data, theta, init)
    return g.T @ g / g.shape[0]


@dataclass(frozen=True)
class WaldReport:
    theta_hat: StructuralParams
    sigma_hat: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    step_size: float
    n_obs: int
    A_n: np.ndarray = field(repr=False)

    def t_test(self, theta0: StructuralParams) -> np.ndarray:
        return (self.theta_hat.as_array() - theta0.as_array()) / self.std_errors

    def conf_int(self, alpha: float = 0.05) -> np.ndarray:
        z = stats.norm.ppf(1 - alpha / 2)
        est = self.theta_hat.as_array()
        return np.column_stack([est - z * self.std_errors, est + z * self.std_errors])

    def to_dict(self) -> dict:
        ci = self.conf_int()
        return {
            "theta_hat": dict(zip(THETA_NAMES, self.theta_hat.as_array().tolist())),
            "sigma_hat": self.sigma_hat.tolist(),
            "std_errors": dict(zip(THETA_NAMES, self.std_errors.tolist())),
            "t_stats": dict(zip(THETA_NAMES, self.t_stats.tolist())),
            "p_values": dict(zip(THETA_NAMES, self.p_values.tolist())),
            "conf_int_95": dict(zip(THETA_NAMES, ci.tolist())),
            "step_size": self.step_size,
            "n_obs": self.n_obs,
        }


def wald(data: Dataset, nls: NlsFit, step: Optional[float] = None,
         space: ParamSpace = ParamSpace()) -> WaldReport:
    A, used = numerical_hessian(data, nls.theta_hat, nls.init_used, step, space)
    sigma = nls.sigma_u_sq_hat * np.linalg.inv(A)
    sigma = 0.5 * (sigma + sigma.T)
    se = np.sqrt(np.diag(sigma) / nls.n_obs)
    t = nls.theta_hat.as_array() / se
    p = 2 * stats.norm.sf(np.abs(t))
    return WaldReport(nls.theta_hat, sigma, se, t, p, used, nls.n_obs, A)


# --- supF ----------------------------------------------------------------------

@dataclass(frozen=True)
class SupFReport:
    statistic: float
    gamma_argmax: float
    bootstrap_stats: np.ndarray = field(repr=False)
    p_value: float
    B: int
    f_profile: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "gamma_argmax": self.gamma_argmax,
                "p_value": self.p_value, "B": self.B,
                "bootstrap_stats": self.bootstrap_stats.tolist(),
                "f_profile": self.f_profile.tolist()}


def _resid_maker(Z: np.ndarray):
    """Return a function computing residuals from projecting rows onto ``span(Z)``."""
    q, r = np.linalg.qr(Z)
    if np.min(np.abs(np.diag(r))) < 1e-10 * np.max(np.abs(np.diag(r))):
        raise SingularDesign("partialling design is singular")

    def resid(X):
        return X - (X @ q) @ q.T
    return resid


def supf_p_value(statistic: float, bootstrap_stats: np.ndarray) -> float:
    return float(np.mean(statistic <= bootstrap_stats))


def supf_test(data: Dataset, space: ParamSpace = ParamSpace(), B: int = 999, seed: int = 0,
              init: InitPolicy = InitPolicy(), grid_size: int = 200,
              intercept: bool = True) -> SupFReport:
    """sup over the gain grid of the F statistic for excluding ``h_{t-1}(gamma)``.

    The bootstrap treats ``h_{t-1}(gamma)`` as fixed, partials ``(1, y_t)`` out
    of it (``intercept=False`` drops the constant) and uses IID standard normal
    draws as the dependent variable.
    """
    if B < 99:
        raise ValueError("B must be >= 99")
    grid = gamma_grid(space, grid_size)
    a0 = init.resolve(data)
    H = learner_batch(data.pi, grid, a0)[4][:, :-1]
    pi, y = data.pi[1:], data.y[1:]
    m = pi.size

    syy = float(y @ y)
    if syy <= 0:
        raise SingularDesign("y is identically zero")
    s_tilde = float(pi @ pi - (y @ pi) ** 2 / syy) / m
    # data statistic on the (h, y) design without intercept
    ry = _resid_maker(y[:, None])
    Hy = ry(H)
    piy = pi - y * (y @ pi) / syy
    hh = np.einsum("gt,gt->g", Hy, Hy)
    if np.any(hh <= 1e-12 * np.einsum("gt,gt->g", H, H)):
        raise SingularDesign("h_{t-1} collinear with y_t on the gain grid")
    s_hat = s_tilde - (Hy @ piy) ** 2 / hh / m
    F = m * (s_tilde - s_hat) / s_hat
    k = int(np.argmax(F))

    Z = np.column_stack([np.ones(m), y]) if intercept else y[:, None]
    rz = _resid_maker(Z)
    Ht = rz(H)
    htht = np.einsum("gt,gt->g", Ht, Ht)
    rng = np.random.default_rng(seed)
    E = rz(rng.standard_normal((B, m)))
    ee = np.einsum("bt,bt->b", E, E)
    num = (Ht @ E.T) ** 2 / htht[:, None]  # (G, B)
    Fb = m * num / (ee[None, :] - num)
    boot = Fb.max(axis=0)
    return SupFReport(float(F[k]), float(grid[k]), boot, supf_p_value(float(F[k]), boot), B,
                      np.column_stack([grid, F]))


# --- influence functions and bands ---------------------------------------------

@dataclass(frozen=True)
class InfluencePanel:
    phi: np.ndarray  # (n-1, 5) ordered as Lambda
    omega_hat: np.ndarray
    phi_gamma: np.ndarray = field(repr=False)

    @property
    def n_obs(self) -> int:
        return int(self.phi.shape[0])


def influence_panel(data: Dataset, nls: NlsFit, ar: ArFit,
                    A_n: Optional[np.ndarray] = None) -> InfluencePanel:
    if A_n is None:
        A_n, _ = numerical_hessian(data, nls.theta_hat, nls.init_used)
    _check_pd(A_n)
    fdot = gradient_series(data, nls.theta_hat, nls.init_used)
    _, u = regression_function(data, nls.theta_hat, nls.init_used)
    phi_theta = np.linalg.solve(A_n, (fdot * u[:, None]).T).T
    eps = ar1_residuals(data, ar)
    ylag = data.y[:-1] - data.y[:-1].mean()
    phi_rho = ylag * eps / np.mean(ylag**2)
    phi = np.column_stack([
        phi_theta[:, 1], phi_theta[:, 2], phi_rho,
        u**2 - np.mean(u**2), eps**2 - np.mean(eps**2),
    ])
    omega = phi.T @ phi / phi.shape[0]
    return InfluencePanel(phi, omega, phi_theta[:, 0])


@dataclass(frozen=True)
class RootInterval:
    beta: float
    classification: str
    lo: Optional[float]
    hi: Optional[float]
    se: Optional[float]
    note: str = ""


def root_pointwise_ci(report: EquilibriaReport, panel: InfluencePanel, n: Optional[int] = None,
                      alpha: float = 0.05) -> list[RootInterval]:
    n = panel.n_obs if n is None else n
    z = stats.norm.ppf(1 - alpha / 2)
    out = []
    for b, cls, J in zip(report.roots, report.classification, report.jacobians):
        if cls != "simple" or J is None:
            out.append(RootInterval(b, cls, None, None, None, "nonstandard rate"))
            continue
        J = np.asarray(J)
        se = math.sqrt(float(J @ panel.omega_hat @ J) / n)
        out.append(RootInterval(b, cls, b - z * se, b + z * se, se))
    return out


@dataclass(frozen=True)
class BandResult:
    beta_grid: np.ndarray
    g_hat: np.ndarray
    s_hat: np.ndarray
    c_alpha: float
    band_lo: np.ndarray
    band_hi: np.ndarray
    mode: str
    alpha: float
    B: int
    bootstrap_stats: np.ndarray = field(repr=False, default=None)

    def covers(self, g_true: np.ndarray) -> bool:
        return bool(np.all((self.band_lo <= g_true) & (g_true <= self.band_hi)))

    def to_tsv(self, path=None) -> str:
        lines = ["grid\tG\tlo\thi"]
        for row in zip(self.beta_grid, self.g_hat, self.band_lo, self.band_hi):
            lines.append("\t".join(repr(float(v)) for v in row))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_dict(self) -> dict:
        return {"c_alpha": self.c_alpha, "mode": self.mode, "alpha": self.alpha, "B": self.B,
                "beta_grid": self.beta_grid.tolist(), "g_hat": self.g_hat.tolist(),
                "s_hat": self.s_hat.tolist(), "band_lo": self.band_lo.tolist(),
                "band_hi": self.band_hi.tolist()}


def ceil_quantile(x: np.ndarray, level: float) -> float:
    """Empirical quantile ``x_(ceil(level * B))`` of the sorted sample."""
    xs = np.sort(np.asarray(x))
    k = max(int(math.ceil(level * xs.size - 1e-9)), 1)
    return float(xs[k - 1])


def band_scores(lam_fit: LambdaFit, panel: InfluencePanel, beta_grid: np.ndarray) -> np.ndarray:
    """``m_t(beta) = -F_lambda(beta)' phi_t`` on the grid, shape ``(n-1, grid)``."""
    return -panel.phi @ F_lambda(beta_grid, lam_fit.lambda_hat).T


def uniform_band(lam_fit: LambdaFit, panel: InfluencePanel, grid_size: int = 401,
                 alpha: float = 0.05, B: int = 999, seed: int = 0,
                 mode: Literal["studentized", "percentile"] = "studentized",
                 c_override: Optional[float] = None) -> BandResult:
    if mode not in ("studentized", "percentile"):
        raise ValueError(f"unknown band mode {mode!r}")
    grid = np.linspace(0.0, 1.0, grid_size)
    M = band_scores(lam_fit, panel, grid)
    m = M.shape[0]
    s = np.sqrt(np.mean(M**2, axis=0))
    if s.min() < 1e-12:
        raise DegenerateScale(f"min s_n(beta) = {s.min():.3g}")
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((B, m))
    S = np.abs(xi @ M) / math.sqrt(m)
    T = (S / s).max(axis=1) if mode == "studentized" else S.max(axis=1)
    c = ceil_quantile(T, 1 - alpha) if c_override is None else float(c_override)
    g = GCurve.from_lambda(lam_fit.lambda_hat).G(grid)
    half = c * (s if mode == "studentized" else 1.0) / math.sqrt(m)
    return BandResult(grid, g, s, c, g - half, g + half, mode, alpha, B, T)
