"""Single-component Poisson and NB-2 regression with weighted Newton fitting.

Both families use the log link, mu = exp(X beta).  The NB-2 density adds a
dispersion alpha > 0 with variance mu * (1 + alpha * mu); alpha -> 0 recovers
the Poisson model.  All operations are pure functions of their inputs, so
multiple fits may run concurrently on shared read-only datasets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import digamma, gammaln

from .data import Dataset
from .errors import (
    DimensionError,
    DomainError,
    NumericOverflowError,
    SingularDesignError,
)
from .numdiff import jacobian_central

POISSON = "poisson"
NB2 = "nb2"
FAMILIES = (POISSON, NB2)

ALPHA_MIN = 1e-8
ALPHA_MAX = 1e4
DEFAULT_TOL = 1e-8        # relative log-likelihood change
DEFAULT_GTOL = 1e-6       # max-norm of the gradient
DEFAULT_MAX_ITER = 100
MAX_HALVINGS = 20
WEIGHT_FLOOR = 1e-10      # rows below this weight are excluded from the rank check
# direct gammaln/digamma differences lose precision above this shape value
_LARGE_THETA = 1e6


@dataclass(frozen=True)
class GlmFit:
    """Result of a single-component count regression fit.

    ``alpha`` is exactly 0 for the Poisson family and positive for NB-2.
    ``alpha_pinned`` flags an NB-2 dispersion that ended on a search bound.
    ``se`` holds observed-information standard errors (NaN when the
    information matrix could not be inverted).
    """

    family: str
    beta: np.ndarray
    alpha: float
    se: np.ndarray
    logL: float
    converged: bool
    iterations: int
    alpha_pinned: bool = False


def validate_family(family: str) -> str:
    if family not in FAMILIES:
        raise DomainError(f"unknown family {family!r}; expected one of {FAMILIES}")
    return family


def _weights(d: Dataset, w) -> np.ndarray:
    if w is None:
        return np.ones(d.n)
    w = np.asarray(w, dtype=float)
    if w.shape != (d.n,):
        raise DimensionError(f"weights shape {w.shape} does not match n={d.n}")
    if not np.all(np.isfinite(w)) or w.min() < -1e-12 or w.max() > 1.0 + 1e-12:
        raise DomainError("weights must lie in [0, 1]")
    return np.clip(w, 0.0, 1.0)


def _linear_predictor(beta, d: Dataset) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (d.p + 1,):
        raise DimensionError(f"beta length {beta.size} does not match p+1={d.p + 1}")
    with np.errstate(over="ignore", invalid="ignore"):
        eta = d.X @ beta
    bad = ~np.isfinite(eta)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise NumericOverflowError(f"non-finite linear predictor at row {row}", row=row)
    return eta


def _weighted_sum(w: np.ndarray, rows: np.ndarray) -> float:
    # 0 * (-inf) from fully excluded rows must contribute 0, not NaN
    contrib = np.where(w > 0.0, w * rows, 0.0)
    return float(contrib.sum())


def poisson_logpmf(beta, d: Dataset) -> np.ndarray:
    """Per-row Poisson log-density with mu = exp(X beta)."""
    eta = _linear_predictor(beta, d)
    with np.errstate(over="ignore"):
        mu = np.exp(eta)
    return d.y * eta - mu - d.log_y_factorial


def poisson_loglik(beta, d: Dataset, w=None) -> float:
    """Weighted Poisson log-likelihood sum_i w_i [y_i eta_i - exp(eta_i) - log y_i!]."""
    return _weighted_sum(_weights(d, w), poisson_logpmf(beta, d))


def poisson_loglik_grad(beta, d: Dataset, w=None) -> np.ndarray:
    """Analytic gradient of :func:`poisson_loglik` with respect to beta."""
    w = _weights(d, w)
    eta = _linear_predictor(beta, d)
    with np.errstate(over="ignore"):
        mu = np.exp(eta)
    resid = np.where(w > 0.0, w * (d.y - mu), 0.0)
    return d.X.T @ resid


def _lgamma_ratio(y: np.ndarray, theta: float) -> np.ndarray:
    """log Gamma(y + theta) - log Gamma(theta) for integer counts y.

    For large theta the direct gammaln difference cancels catastrophically,
    so the rising-factorial sum sum_{j<y} log(theta + j) is used instead.
    """
    if theta <= _LARGE_THETA:
        return gammaln(np.asarray(y, dtype=float) + theta) - gammaln(theta)
    yi = np.asarray(y, dtype=np.int64)
    ymax = int(yi.max()) if yi.size else 0
    steps = np.concatenate(([0.0], np.cumsum(np.log(theta + np.arange(ymax, dtype=float)))))
    return steps[yi]


def _digamma_ratio(y: np.ndarray, theta: float) -> np.ndarray:
    """digamma(y + theta) - digamma(theta), stable for large theta."""
    if theta <= _LARGE_THETA:
        yf = np.asarray(y, dtype=float)
        return digamma(yf + theta) - digamma(theta)
    yi = np.asarray(y, dtype=np.int64)
    ymax = int(yi.max()) if yi.size else 0
    steps = np.concatenate(([0.0], np.cumsum(1.0 / (theta + np.arange(ymax, dtype=float)))))
    return steps[yi]


def nb2_logpmf(beta, alpha: float, d: Dataset) -> np.ndarray:
    """Per-row NB-2 log-density with mu = exp(X beta) and dispersion alpha."""
    if not np.isfinite(alpha) or alpha <= 0.0:
        raise DomainError(f"dispersion alpha must be positive, got {alpha}")
    eta = _linear_predictor(beta, d)
    theta = 1.0 / alpha
    with np.errstate(over="ignore"):
        mu = np.exp(eta)
        amu = alpha * mu
    log1p_amu = np.log1p(amu)
    # y * log(amu / (1 + amu)), written to stay finite as amu -> 0 or inf
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(amu > 1.0, -np.log1p(1.0 / amu), np.log(amu) - log1p_amu)
        ylog = np.where(d.y > 0, d.y * ratio, 0.0)
    out = _lgamma_ratio(d.y, theta) + ylog - theta * log1p_amu - d.log_y_factorial
    bad = np.isnan(out)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise NumericOverflowError(f"non-finite NB-2 log-density at row {row}", row=row)
    return out


def nb2_loglik(beta, alpha: float, d: Dataset, w=None) -> float:
    """Weighted NB-2 log-likelihood at (beta, alpha)."""
    return _weighted_sum(_weights(d, w), nb2_logpmf(beta, alpha, d))


def _nb2_alpha_grad_rows(y: np.ndarray, mu: np.ndarray, alpha: float) -> np.ndarray:
    """Per-row derivative of the NB-2 log-density with respect to alpha."""
    theta = 1.0 / alpha
    amu = alpha * mu
    dig = _digamma_ratio(y, theta)
    yf = np.asarray(y, dtype=float)
    return (
        -(theta**2) * dig
        + yf / alpha
        + theta**2 * np.log1p(amu)
        - (yf + theta) * mu / (1.0 + amu)
    )


def nb2_loglik_grad(beta, alpha: float, d: Dataset, w=None) -> np.ndarray:
    """Analytic gradient of :func:`nb2_loglik` over (beta, alpha), alpha last."""
    if not np.isfinite(alpha) or alpha <= 0.0:
        raise DomainError(f"dispersion alpha must be positive, got {alpha}")
    w = _weights(d, w)
    eta = _linear_predictor(beta, d)
    with np.errstate(over="ignore"):
        mu = np.exp(eta)
    resid = np.where(w > 0.0, w * (d.y - mu) / (1.0 + alpha * mu), 0.0)
    gbeta = d.X.T @ resid
    arows = _nb2_alpha_grad_rows(d.y, mu, alpha)
    galpha = _weighted_sum(w, arows)
    return np.concatenate([gbeta, [galpha]])


def check_design_rank(d: Dataset, w=None) -> None:
    """Raise :class:`SingularDesignError` if sqrt(w) X is rank deficient.

    Rows with weight below ``WEIGHT_FLOOR`` are excluded. The error names
    the columns that a pivoted QR identifies as linearly dependent.
    """
    w = _weights(d, w)
    active = w >= WEIGHT_FLOOR
    k = d.p + 1
    if int(active.sum()) < k:
        raise SingularDesignError(
            f"only {int(active.sum())} effectively weighted rows for {k} coefficients"
        )
    A = d.X[active] * np.sqrt(w[active])[:, None]
    _, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = (diag.max() * max(A.shape) * np.finfo(float).eps) if diag.size else 0.0
    rank = int((diag > tol).sum())
    if rank < k:
        dep = sorted(int(j) for j in piv[rank:])
        labels = tuple("intercept" if j == 0 else d.names[j - 1] for j in dep)
        raise SingularDesignError(
            f"design is rank deficient; dependent column(s): {', '.join(labels)}",
            columns=labels,
        )


def _safe_poisson_ll(beta, d, w):
    # w is pre-validated by the fit entry point; skip revalidation in hot loops
    try:
        return _weighted_sum(w, poisson_logpmf(beta, d))
    except NumericOverflowError:
        return -np.inf


def _newton_poisson(beta, d, w, tol, gtol, max_iter):
    """Damped Newton ascent on the weighted Poisson log-likelihood."""
    ll = _safe_poisson_ll(beta, d, w)
    prev_ll = None
    converged = False
    info = None
    iterations = 0
    for _ in range(max_iter):
        eta = d.X @ beta
        with np.errstate(over="ignore"):
            mu = np.exp(eta)
        grad = d.X.T @ np.where(w > 0.0, w * (d.y - mu), 0.0)
        wmu = np.where(w > 0.0, w * mu, 0.0)
        info = d.X.T @ (d.X * wmu[:, None])
        small_grad = np.max(np.abs(grad)) < gtol
        small_change = prev_ll is None or abs(ll - prev_ll) <= tol * (1.0 + abs(ll))
        if small_grad and small_change:
            converged = True
            break
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, grad, rcond=None)[0]
        t = 1.0
        cand, cand_ll = beta, ll
        for _ in range(MAX_HALVINGS + 1):
            trial = beta + t * step
            trial_ll = _safe_poisson_ll(trial, d, w)
            if trial_ll >= ll:
                cand, cand_ll = trial, trial_ll
                break
            t *= 0.5
        if cand_ll < ll or (cand is beta):
            break  # no ascent direction left at this precision
        prev_ll = ll
        beta, ll = cand, cand_ll
        iterations += 1
    return beta, ll, converged, iterations, info


def _se_from_info(info: np.ndarray) -> np.ndarray:
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        return np.full(info.shape[0], np.nan)
    with np.errstate(invalid="ignore"):
        return np.sqrt(np.diag(cov))


def fit_poisson(
    d: Dataset,
    w=None,
    init=None,
    tol: float = DEFAULT_TOL,
    gtol: float = DEFAULT_GTOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> GlmFit:
    """Maximum-likelihood Poisson regression by damped Newton (IRLS).

    Convergence requires both a relative log-likelihood change below
    ``tol`` and a gradient max-norm below ``gtol``.  Non-convergence
    returns the best iterate with ``converged=False`` rather than raising.
    """
    w = _weights(d, w)
    check_design_rank(d, w)
    if init is not None:
        beta = np.asarray(init, dtype=float).copy()
        if beta.shape != (d.p + 1,):
            raise DimensionError("init beta has wrong length")
    else:
        wsum = w.sum()
        ybar = float(w @ d.y) / wsum if wsum > 0 else 1.0
        beta = np.zeros(d.p + 1)
        beta[0] = np.log(max(ybar, 1e-8))
    beta, ll, converged, iterations, info = _newton_poisson(beta, d, w, tol, gtol, max_iter)
    return GlmFit(
        family=POISSON,
        beta=beta,
        alpha=0.0,
        se=_se_from_info(info),
        logL=ll,
        converged=converged,
        iterations=iterations,
    )


def _safe_nb2_ll(beta, alpha, d, w):
    # w is pre-validated by the fit entry point; skip revalidation in hot loops
    try:
        return _weighted_sum(w, nb2_logpmf(beta, alpha, d))
    except NumericOverflowError:
        return -np.inf


def _newton_beta_nb2(beta, alpha, d, w, tol, gtol, max_iter=30):
    """Damped Newton on beta at fixed alpha; never decreases the objective."""
    ll = _safe_nb2_ll(beta, alpha, d, w)
    prev_ll = None
    for _ in range(max_iter):
        eta = d.X @ beta
        with np.errstate(over="ignore"):
            mu = np.exp(eta)
        amu = alpha * mu
        grad = d.X.T @ np.where(w > 0.0, w * (d.y - mu) / (1.0 + amu), 0.0)
        if np.max(np.abs(grad)) < gtol and (
            prev_ll is None or abs(ll - prev_ll) <= tol * (1.0 + abs(ll))
        ):
            break
        # observed information weights: mu (1 + alpha y) / (1 + alpha mu)^2
        wobs = np.where(w > 0.0, w * mu * (1.0 + alpha * d.y) / (1.0 + amu) ** 2, 0.0)
        info = d.X.T @ (d.X * wobs[:, None])
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, grad, rcond=None)[0]
        t = 1.0
        improved = False
        for _ in range(MAX_HALVINGS + 1):
            trial = beta + t * step
            trial_ll = _safe_nb2_ll(trial, alpha, d, w)
            if trial_ll >= ll:
                prev_ll = ll
                beta, ll = trial, trial_ll
                improved = True
                break
            t *= 0.5
        if not improved:
            break
    return beta, ll


def _alpha_grad(beta, alpha, d, w):
    # per-fit internal: weights already validated
    with np.errstate(over="ignore"):
        mu = np.exp(d.X @ beta)
    return _weighted_sum(w, _nb2_alpha_grad_rows(d.y, mu, alpha))


def _alpha_step(beta, alpha, d, w, ll, gtol):
    """One safeguarded Newton update of alpha on the log scale.

    Uses the analytic gradient and a finite-difference curvature; steps
    that fail to improve the log-likelihood are halved, and the search
    never leaves [ALPHA_MIN, ALPHA_MAX].  Returns (alpha, ll), never worse.
    """
    s = np.log(alpha)
    gs = _alpha_grad(beta, alpha, d, w) * alpha  # chain rule to the log scale
    if abs(gs) < 0.1 * gtol:
        return alpha, ll
    at_lo = alpha <= ALPHA_MIN * (1.0 + 1e-9)
    at_hi = alpha >= ALPHA_MAX * (1.0 - 1e-9)
    if (at_lo and gs < 0.0) or (at_hi and gs > 0.0):
        return alpha, ll  # pinned: the gradient points outside the box
    ds = 1e-4
    gp = _alpha_grad(beta, float(np.exp(s + ds)), d, w) * np.exp(s + ds)
    gm = _alpha_grad(beta, float(np.exp(s - ds)), d, w) * np.exp(s - ds)
    curv = (gp - gm) / (2.0 * ds)
    if np.isfinite(curv) and curv < -1e-12:
        step = -gs / curv
    else:
        step = np.sign(gs) * 0.5  # non-concave region: bounded uphill step
    step = float(np.clip(step, -5.0, 5.0))
    lo, hi = np.log(ALPHA_MIN), np.log(ALPHA_MAX)
    t = 1.0
    for _ in range(MAX_HALVINGS + 1):
        s_new = float(np.clip(s + t * step, lo, hi))
        if s_new == s:
            break
        a_new = float(np.exp(s_new))
        ll_new = _safe_nb2_ll(beta, a_new, d, w)
        if ll_new >= ll:
            return a_new, ll_new
        t *= 0.5
    return alpha, ll


def _alpha_moment_estimate(beta, d, w):
    mu = np.exp(d.X @ beta)
    num = _weighted_sum(w, (d.y - mu) ** 2 - d.y)
    den = _weighted_sum(w, mu**2)
    if den <= 0 or not np.isfinite(num):
        return 1.0
    return float(np.clip(num / den, 1e-4, ALPHA_MAX))


def fit_nb2(
    d: Dataset,
    w=None,
    init=None,
    tol: float = DEFAULT_TOL,
    gtol: float = DEFAULT_GTOL,
    max_iter: int = DEFAULT_MAX_ITER,
    compute_se: bool = True,
) -> GlmFit:
    """Maximum-likelihood NB-2 regression.

    Alternates damped Newton steps on beta (alpha fixed) with a
    safeguarded 1-D Newton/bisection update of alpha on the log scale
    (beta fixed) until joint convergence.  ``init`` may be a
    ``(beta, alpha)`` pair for warm starts.  An alpha that ends on a
    search bound sets ``alpha_pinned`` instead of raising.
    ``compute_se=False`` skips the (relatively costly) standard-error
    pass; EM inner loops use this.
    """
    w = _weights(d, w)
    if d.n < d.p + 2:
        raise DimensionError(f"NB-2 needs n >= p + 2 ({d.n} < {d.p + 2})")
    check_design_rank(d, w)
    if init is not None:
        beta0, alpha0 = init
        beta = np.asarray(beta0, dtype=float).copy()
        if beta.shape != (d.p + 1,):
            raise DimensionError("init beta has wrong length")
        alpha = float(np.clip(alpha0, ALPHA_MIN, ALPHA_MAX))
    else:
        beta = fit_poisson(d, w, tol=tol, gtol=gtol, max_iter=max_iter).beta
        alpha = _alpha_moment_estimate(beta, d, w)

    ll = _safe_nb2_ll(beta, alpha, d, w)
    prev_ll = None
    converged = False
    iterations = 0
    for _ in range(max_iter):
        with np.errstate(over="ignore"):
            mu = np.exp(d.X @ beta)
        gb = d.X.T @ np.where(w > 0.0, w * (d.y - mu) / (1.0 + alpha * mu), 0.0)
        ga = _weighted_sum(w, _nb2_alpha_grad_rows(d.y, mu, alpha))
        at_lo = alpha <= ALPHA_MIN * (1.0 + 1e-9)
        at_hi = alpha >= ALPHA_MAX * (1.0 - 1e-9)
        alpha_ok = (
            abs(ga * alpha) < gtol or (at_lo and ga < 0.0) or (at_hi and ga > 0.0)
        )
        small_change = prev_ll is None or abs(ll - prev_ll) <= tol * (1.0 + abs(ll))
        if np.max(np.abs(gb)) < gtol and alpha_ok and small_change:
            converged = True
            break
        prev_ll = ll
        beta, ll = _newton_beta_nb2(beta, alpha, d, w, tol, gtol)
        alpha, ll = _alpha_step(beta, alpha, d, w, ll, gtol)
        iterations += 1

    se = np.full(d.p + 1, np.nan)
    if compute_se:
        # joint observed information over (beta, alpha)
        def _grad(theta):
            a = float(np.clip(theta[-1], ALPHA_MIN / 10.0, ALPHA_MAX * 10.0))
            return nb2_loglik_grad(theta[:-1], a, d, w)

        theta = np.concatenate([beta, [alpha]])
        try:
            J = jacobian_central(_grad, theta)
            info = -(J + J.T) / 2.0
            se = _se_from_info(info)[: d.p + 1]
        except (NumericOverflowError, np.linalg.LinAlgError):
            pass
    return GlmFit(
        family=NB2,
        beta=beta,
        alpha=float(alpha),
        se=se,
        logL=ll,
        converged=converged,
        iterations=iterations,
        alpha_pinned=bool(
            alpha <= ALPHA_MIN * (1.0 + 1e-9) or alpha >= ALPHA_MAX * (1.0 - 1e-9)
        ),
    )


def dispersion_stat(d: Dataset) -> float:
    """Unconditional variance-to-mean ratio of the outcome.

    A cheap pre-gate diagnostic: values well above 1 signal overdispersion.
    Returns +inf when the mean is 0.
    """
    if d.n < 2:
        raise DimensionError("dispersion_stat needs n >= 2")
    mean = float(d.y.mean())
    if mean == 0.0:
        return np.inf
    return float(d.y.var(ddof=1)) / mean
