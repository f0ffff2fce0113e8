"""Penalized nuisance learners: l1 logistic regression and weighted lasso.

Both solvers minimize a dyad-averaged loss plus an l1 penalty scaled by an
effective-sample-size normalizer ``n_pen`` supplied by the caller (the
cross-fitting engine passes the training node count, so the penalty rate
is governed by the number of nodes rather than the much larger number of
dyads).  Post-selection refits remove shrinkage bias.  Every fit can be
certified by :func:`kkt_check`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ._kernels import logit_cd, wls_cd

__all__ = [
    "DEFAULT_PENALTY_MULTIPLIER",
    "PenalizedFit",
    "default_penalty",
    "fit_lasso_logit",
    "post_fit_logit",
    "compute_weights",
    "fit_weighted_lasso_ols",
    "post_fit_ols",
    "kkt_check",
]

# Multiplier for the analytic penalty rate sqrt(n * log(q * n)).  The rate
# theory fixes only the shape; the constant is calibrated so that the
# node-count-normalized penalty dominates the score noise without drowning
# the signal at realistic sample sizes (see README).
DEFAULT_PENALTY_MULTIPLIER = 1.1

WEIGHT_FLOOR = 1e-10
RIDGE_JITTER = 1e-8


@dataclass(frozen=True)
class PenalizedFit:
    """Result of an l1-penalized fit.

    ``support`` is exactly the set of nonzero coefficient indices.  The
    penalty level ``lam`` and normalizer ``n_pen`` are retained so the fit
    is self-describing for :func:`kkt_check`; ``objective_history`` holds
    the penalized objective after every coordinate-descent sweep.
    """

    coefficients: np.ndarray
    support: tuple
    lam: float
    n_pen: float
    n_iterations: int
    converged: bool
    objective: float
    objective_history: np.ndarray
    penalty_free: tuple = ()
    column_scale: np.ndarray | None = None
    intercept: bool = False


def default_penalty(n_pen, q, c=None) -> float:
    """Analytic penalty level ``c * sqrt(n_pen * log(q * n_pen))``.

    ``n_pen`` is the effective sample size (training node count in the
    cross-fitting engine) and ``q`` the number of penalized columns.  The
    caller divides the returned level by ``n_pen`` inside the objective.
    """
    if n_pen < 2:
        raise ValueError(f"need n_pen >= 2, got {n_pen}")
    if q < 1:
        raise ValueError(f"need q >= 1, got {q}")
    if c is None:
        c = DEFAULT_PENALTY_MULTIPLIER
    return c * math.sqrt(n_pen * math.log(q * n_pen))


def _validate_design(design):
    design = np.asarray(design, dtype=np.float64)
    if design.ndim != 2:
        raise ValueError("design must be 2-d")
    if not np.isfinite(design).all():
        raise ValueError("non-finite design entries")
    return design


def _penalty_vector(q, lam, n_pen, penalty_free):
    pen = np.full(q, lam / n_pen, dtype=np.float64)
    for j in penalty_free:
        pen[j] = 0.0
    return pen


def _run_cd(kernel, args, pen, max_sweeps, tol, kkt_tol, grad_fn):
    """Drive a CD kernel until coefficient changes and KKT both pass."""
    q = pen.size
    coef = np.zeros(q)
    histories = []
    total = 0
    converged = False
    cur_tol = tol
    for _ in range(4):
        budget = max_sweeps - total
        if budget <= 0:
            break
        coef, used, delta_ok, hist = kernel(*args, pen, coef, budget, cur_tol)
        total += used
        histories.append(hist)
        if not delta_ok:
            break
        resid = _kkt_residual(grad_fn(coef), coef, pen)
        if resid <= kkt_tol:
            converged = True
            break
        cur_tol /= 100.0
    history = np.concatenate(histories) if histories else np.empty(0)
    return coef, total, converged, history


def _kkt_residual(grad, coef, pen):
    active = coef != 0.0
    resid_zero = np.maximum(np.abs(grad) - pen, 0.0)
    resid_active = np.abs(grad + pen * np.sign(coef))
    return float(np.max(np.where(active, resid_active, resid_zero), initial=0.0))


def _finish_fit(coef, design_cols_scale, lam, n_pen, n_iter, converged, history,
                penalty_free):
    if design_cols_scale is not None:
        coef = coef / design_cols_scale
    support = tuple(np.flatnonzero(coef).tolist())
    objective = float(history[-1]) if history.size else math.nan
    return PenalizedFit(
        coefficients=coef,
        support=support,
        lam=float(lam),
        n_pen=float(n_pen),
        n_iterations=int(n_iter),
        converged=bool(converged),
        objective=objective,
        objective_history=history,
        penalty_free=tuple(penalty_free),
        column_scale=design_cols_scale,
    )


def _column_scale(design):
    s = np.sqrt(np.mean(design * design, axis=0))
    s[s == 0.0] = 1.0
    return s


def fit_lasso_logit(design, y, lam, n_pen, *, intercept=False, penalty_free=(),
                    standardize=False, max_sweeps=10_000, tol=1e-8,
                    kkt_tol=1e-6) -> PenalizedFit:
    """l1-penalized logistic regression without intercept by default.

    Minimizes ``mean(log(1 + exp(u)) - y*u) + (lam / n_pen) * ||coef||_1``
    with ``u = design @ coef``; all columns are penalized unless listed in
    ``penalty_free`` (an unpenalized intercept column is prepended when
    ``intercept`` is set).  Hitting the sweep cap returns
    ``converged=False`` rather than raising.
    """
    design = _validate_design(design)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("logit outcome must be binary 0/1")
    if design.shape[0] != y.size:
        raise ValueError("design/outcome length mismatch")
    if lam < 0:
        raise ValueError("lam must be nonnegative")

    penalty_free = list(penalty_free)
    if intercept:
        design = np.column_stack([np.ones(y.size), design])
        penalty_free = [0] + [j + 1 for j in penalty_free]

    scale = _column_scale(design) if standardize else None
    A = np.asfortranarray(design / scale if standardize else design)
    pen = _penalty_vector(A.shape[1], lam, n_pen, penalty_free)

    def grad(coef):
        return A.T @ (expit(A @ coef) - y) / y.size

    coef, n_iter, converged, history = _run_cd(
        logit_cd, (A, y), pen, max_sweeps, tol, kkt_tol, grad
    )
    return _finish_fit(coef, scale, lam, n_pen, n_iter, converged, history,
                       penalty_free)


def fit_weighted_lasso_ols(x, d, weights, lam, n_pen, *, penalty_free=(),
                           standardize=False, max_sweeps=10_000, tol=1e-8,
                           kkt_tol=1e-6) -> PenalizedFit:
    """Weighted lasso: ``0.5*mean(w*(d - x@coef)^2) + (lam/n_pen)*||coef||_1``.

    Coordinate updates are exact soft-threshold minimizations, so the
    objective is non-increasing by construction.
    """
    x = _validate_design(x)
    d = np.asarray(d, dtype=np.float64).reshape(-1)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if not (np.isfinite(d).all() and np.isfinite(w).all()):
        raise ValueError("non-finite inputs")
    if (w <= 0).any():
        raise ValueError("weights must be positive")
    if lam < 0:
        raise ValueError("lam must be nonnegative")

    scale = _column_scale(x) if standardize else None
    A = np.asfortranarray(x / scale if standardize else x)
    pen = _penalty_vector(A.shape[1], lam, n_pen, penalty_free)

    def grad(coef):
        return -A.T @ (w * (d - A @ coef)) / d.size

    coef, n_iter, converged, history = _run_cd(
        wls_cd, (A, d, w), pen, max_sweeps, tol, kkt_tol, grad
    )
    return _finish_fit(coef, scale, lam, n_pen, n_iter, converged, history,
                       penalty_free)


def post_fit_logit(design, y, support, fallback=None) -> np.ndarray:
    """Unpenalized logistic refit restricted to ``support`` columns.

    Newton-Raphson with step halving; a singular restricted Hessian gets a
    1e-8 ridge.  If Newton fails to produce finite estimates the fallback
    coefficients (typically the penalized fit) restricted to the support
    are returned.  An empty support yields the zero vector.
    """
    design = _validate_design(design)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    m, q = design.shape
    support = sorted(int(j) for j in support)
    coef = np.zeros(q)
    if not support:
        return coef
    if len(support) >= m:
        raise ValueError("support size must be smaller than the sample")
    A = design[:, support]

    def loss(b):
        u = A @ b
        return float(np.mean(np.logaddexp(0.0, u) - y * u))

    b = np.zeros(len(support))
    ok = False
    cur = loss(b)
    for _ in range(100):
        u = A @ b
        p = expit(u)
        g = A.T @ (p - y) / m
        if np.max(np.abs(g)) < 1e-10:
            ok = True
            break
        w = p * (1.0 - p)
        H = (A * w[:, None]).T @ A / m
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.solve(H + RIDGE_JITTER * np.eye(len(support)), g)
        t = 1.0
        accepted = False
        for _ in range(50):
            cand = b - t * step
            c_loss = loss(cand)
            if np.isfinite(c_loss) and c_loss <= cur:
                b, cur, accepted = cand, c_loss, True
                break
            t /= 2.0
        if not accepted:
            ok = True  # stalled at a numerical optimum
            break

    if not ok or not np.isfinite(b).all():
        if fallback is not None:
            fb = np.asarray(fallback, dtype=np.float64).reshape(-1)
            coef[support] = fb[support]
            return coef
        b = np.zeros(len(support))
    coef[support] = b
    return coef


def post_fit_ols(x, d, weights, support) -> np.ndarray:
    """Weighted least-squares refit restricted to ``support`` columns."""
    x = _validate_design(x)
    d = np.asarray(d, dtype=np.float64).reshape(-1)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    m, q = x.shape
    support = sorted(int(j) for j in support)
    coef = np.zeros(q)
    if not support:
        return coef
    if len(support) >= m:
        raise ValueError("support size must be smaller than the sample")
    A = x[:, support]
    Aw = A * w[:, None]
    G = Aw.T @ A
    b_rhs = Aw.T @ d
    try:
        sol = np.linalg.solve(G, b_rhs)
        if not np.isfinite(sol).all():
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        sol = np.linalg.solve(G + RIDGE_JITTER * np.eye(len(support)), b_rhs)
    coef[support] = sol
    return coef


def compute_weights(theta_pilot, beta, d, x) -> np.ndarray:
    """Per-dyad logistic variance weights f^2 = p*(1-p), floored at 1e-10.

    ``p`` is the fitted link probability at ``d*theta_pilot + x@beta``.
    """
    u = np.asarray(d, dtype=np.float64) * theta_pilot + np.asarray(x) @ np.asarray(beta)
    p = expit(u)
    return np.clip(p * (1.0 - p), WEIGHT_FLOOR, None)


def kkt_check(fit, design, target, kind) -> float:
    """Max KKT residual of a penalized fit against its own problem.

    ``kind`` is ``"logit"`` (``target`` = binary outcome) or ``"wls"``
    (``target`` = (d, weights)).  Zero coordinates contribute
    ``max(|g_j| - pen_j, 0)`` and active ones ``|g_j + pen_j*sign|``,
    where g is the gradient of the unpenalized mean loss.
    """
    design = _validate_design(design)
    coef = fit.coefficients
    if design.shape[1] == coef.size - 1:  # fit was run with an intercept
        design = np.column_stack([np.ones(design.shape[0]), design])
    if fit.column_scale is not None:
        design = design / fit.column_scale
        coef = coef * fit.column_scale
    m = design.shape[0]
    if kind == "logit":
        y = np.asarray(target, dtype=np.float64).reshape(-1)
        grad = design.T @ (expit(design @ coef) - y) / m
    elif kind == "wls":
        d, w = target
        d = np.asarray(d, dtype=np.float64).reshape(-1)
        w = np.asarray(w, dtype=np.float64).reshape(-1)
        grad = -design.T @ (w * (d - design @ coef)) / m
    else:
        raise ValueError(f"unknown problem kind {kind!r}")
    pen = _penalty_vector(coef.size, fit.lam, fit.n_pen, fit.penalty_free)
    return _kkt_residual(grad, coef, pen)
