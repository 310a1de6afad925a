"""Compiled inner loops for the learning recursions.

Time index ``t = 1..n`` maps to array position ``t - 1``. The pre-sample state
is ``alpha_0 = pi_0 = init`` and ``beta_0 = r_0 = 0``, so ``pi_0 - alpha_0 = 0``
and ``beta_1 = 0``.
"""
import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_R_FLOOR = 1
STATUS_BETA_BOUND = 2


@njit(cache=True)
def learner_paths(pi, gammas, inits, r_floor, with_deriv):
    """Run the SAC recursions for each gain in ``gammas``.

    Returns level arrays of shape ``(G, n)``, derivative arrays (empty when
    ``with_deriv`` is false) and the per-gain count of floored periods.
    """
    n = pi.shape[0]
    G = gammas.shape[0]
    alpha = np.empty((G, n))
    beta = np.empty((G, n))
    r = np.empty((G, n))
    x = np.empty((G, n))
    h = np.empty((G, n))
    m = n if with_deriv else 0
    adot = np.empty((G, m))
    rdot = np.empty((G, m))
    bdot = np.empty((G, m))
    hdot = np.empty((G, m))
    floored = np.zeros(G, dtype=np.int64)
    max_abs_beta = np.zeros(G)

    for g in range(G):
        gam = gammas[g]
        a_prev = inits[g]
        pi_prev = inits[g]
        b_prev = 0.0
        r_prev = 0.0
        x_prev = 0.0
        ad_prev = 0.0
        rd_prev = 0.0
        bd_prev = 0.0
        for t in range(n):
            pt = pi[t]
            xt = pt - a_prev
            w = pi_prev - a_prev
            at = (1.0 - gam) * a_prev + gam * pt
            rt = (1.0 - gam) * r_prev + gam * xt * xt
            num = xt * w - b_prev * xt * xt
            skip = rt < r_floor
            if skip:
                bt = b_prev
                floored[g] += 1
            else:
                bt = b_prev + gam * num / rt
            dev = pt - at
            alpha[g, t] = at
            beta[g, t] = bt
            r[g, t] = rt
            x[g, t] = xt
            h[g, t] = at + bt * bt * dev
            if abs(bt) > max_abs_beta[g]:
                max_abs_beta[g] = abs(bt)

            if with_deriv:
                adt = (1.0 - gam) * ad_prev - a_prev + pt
                rdt = (1.0 - gam) * rd_prev + xt * (xt - 2.0 * gam * ad_prev) - r_prev
                if skip:
                    bdt = bd_prev
                else:
                    ndot = (2.0 * b_prev * xt * ad_prev
                            - ad_prev * ((1.0 - gam) * x_prev + xt)
                            - bd_prev * xt * xt)
                    bdt = (bd_prev
                           + (1.0 - gam * rdt / rt) * num / rt
                           + gam * ndot / rt)
                adot[g, t] = adt
                rdot[g, t] = rdt
                bdot[g, t] = bdt
                hdot[g, t] = (1.0 - bt * bt) * adt + 2.0 * bt * bdt * dev
                ad_prev = adt
                rd_prev = rdt
                bd_prev = bdt

            a_prev = at
            pi_prev = pt
            b_prev = bt
            r_prev = rt
            x_prev = xt
    return alpha, beta, r, x, h, adot, rdot, bdot, hdot, floored, max_abs_beta


@njit(cache=True)
def simulate_dgp(u, eps, gamma, delta, psi, a, rho, init_pi, init_y,
                 r_floor, guard, tol_beta):
    """Generate ``(pi, y, alpha, beta, r)`` from the actual law of motion.

    ``status`` is ``STATUS_R_FLOOR`` when ``r_t`` under-runs the floor with the
    guard disabled and ``STATUS_BETA_BOUND`` when ``|beta_t|`` exceeds
    ``1 + tol_beta``; ``fail_t`` is the offending position.
    """
    n = u.shape[0]
    pi = np.empty(n)
    y = np.empty(n)
    alpha = np.empty(n)
    beta = np.empty(n)
    r = np.empty(n)
    a_prev = init_pi
    pi_prev = init_pi
    b_prev = 0.0
    r_prev = 0.0
    y_prev = init_y
    status = 0
    fail_t = -1
    for t in range(n):
        yt = a + rho * y_prev + eps[t]
        pt = delta * (a_prev + b_prev * b_prev * (pi_prev - a_prev)) + psi * yt + u[t]
        xt = pt - a_prev
        w = pi_prev - a_prev
        at = (1.0 - gamma) * a_prev + gamma * pt
        rt = (1.0 - gamma) * r_prev + gamma * xt * xt
        if rt < r_floor:
            if not guard:
                status = 1
                fail_t = t
                break
            bt = b_prev
        else:
            bt = b_prev + gamma * (xt * w - b_prev * xt * xt) / rt
        if abs(bt) > 1.0 + tol_beta:
            status = 2
            fail_t = t
            break
        pi[t] = pt
        y[t] = yt
        alpha[t] = at
        beta[t] = bt
        r[t] = rt
        a_prev = at
        pi_prev = pt
        b_prev = bt
        r_prev = rt
        y_prev = yt
    return pi, y, alpha, beta, r, status, fail_t
