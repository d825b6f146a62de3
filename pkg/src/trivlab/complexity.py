"""Closed-form landscape theory and expected critical-point counts.

Scalar rate functions for the expected number of critical points of a
confined locally isotropic Gaussian field, their closed-form maximizers,
the trivialization predictions at the global minimum (energy, radius,
Hessian bulk and lower edge), finite-size Monte Carlo and quadrature
estimates of the expected count, and the fixed-overlap replica saddle
equations with their edge dictionary.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import (
    DegenerateConditioningError,
    GridCoverageError,
    UnsupportedRegimeError,
)
from .rmt import (
    DENSE_METHOD_MAX_N,
    DensityEstimate,
    SemicircleLaw,
    goe_eigenvalues,
    jackknife_se_of_log_mean,
)
from .structure_functions import (
    LrcStructure,
    SrcCorrelator,
    conditioning_variance,
    eval_lrc,
    eval_src,
    trivialization_threshold,
)

logger = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)
_HALF_LOG2 = 0.5 * math.log(2.0)


def phi(x):
    """Log-potential defect of the standard semicircle (radius sqrt(2)).

    Zero on [-sqrt(2), sqrt(2)]; outside equals
    -|x| sqrt(x^2 - 2)/2 + log((|x| + sqrt(x^2 - 2)) / sqrt(2)) <= 0.
    Accepts scalars or arrays.
    """
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    ax = np.abs(arr)
    out = np.zeros_like(ax)
    tail = ax > _SQRT2
    if tail.any():
        a = ax[tail]
        s = np.sqrt(np.maximum(a * a - 2.0, 0.0))
        out[tail] = -0.5 * a * s + np.log((a + s) / _SQRT2)
    if np.ndim(x) == 0:
        return float(out[0])
    return out.reshape(np.shape(x))


def psi_star_semicircle(x):
    """Log-potential of the standard semicircle, int log|x - t| sc(dt).

    Closed form x^2/2 - 1/2 - log(2)/2 + phi(x); scalar or array input.
    """
    arr = np.asarray(x, dtype=float)
    out = 0.5 * arr * arr - 0.5 - _HALF_LOG2 + phi(arr)
    if np.ndim(x) == 0:
        return float(out)
    return out


def big_f(x, m):
    """Tilted log-potential -x^2/2 + 2 m x + phi(x); scalar or array x."""
    arr = np.asarray(x, dtype=float)
    out = -0.5 * arr * arr + 2.0 * float(m) * arr + phi(arr)
    if np.ndim(x) == 0:
        return float(out)
    return out


def big_f_maximizer(m):
    """Unique maximizer of big_f(., m) for m < 0, in closed form.

    Returns {"x_max", "f_max", "f_second"}.  The branch switches at
    m = -sqrt(2)/2 where the maximizer crosses the spectral edge; the
    curvature of the bulk branch is exactly -1.
    """
    m = float(m)
    if m >= 0.0:
        raise UnsupportedRegimeError("big_f_maximizer is defined for m < 0 only")
    if m < -_SQRT2 / 2.0:
        x_max = m + 1.0 / (2.0 * m)
        f_max = m * m + math.log(-m) + 0.5 * (1.0 + math.log(2.0))
        f_second = -4.0 * m * m / (2.0 * m * m - 1.0)
    else:
        x_max = 2.0 * m
        f_max = 2.0 * m * m
        f_second = -1.0
    return {"x_max": x_max, "f_max": f_max, "f_second": f_second}


@dataclass(frozen=True)
class ComplexityPoint:
    """A point (rho, u, y): radius per sqrt(N), energy per N, spectral shift."""

    rho: float
    u: float
    y: float

    def __post_init__(self):
        if not self.rho > 0.0:
            raise ValueError("rho must be positive")


def psi_src(point, model, mu):
    """Rate density of the expected critical-point count, stationary case.

    Evaluates the three-variable rate function at (rho, u, y).  For
    correlators with a single spectral atom and no constant offset the
    variance of the Hessian shift conditioned on the field value
    vanishes (B(0)B''(0) = B'(0)^2), the y-marginal degenerates, and the
    function is -inf off the pinned slice.
    """
    if not isinstance(model, SrcCorrelator):
        raise TypeError("psi_src expects an SrcCorrelator model")
    mu = float(mu)
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    b0 = eval_src(model, 0.0, 0)
    b1 = eval_src(model, 0.0, 1)
    b2 = eval_src(model, 0.0, 2)
    if b2 <= 0.0:
        raise UnsupportedRegimeError(
            "constant correlator (no atoms): the rate function is undefined"
        )
    rho, u, y = point.rho, point.u, point.y
    w = u - 0.5 * mu * rho * rho
    base = (
        psi_star_semicircle(y)
        - w * w / (2.0 * b0)
        + mu * mu * rho * rho / (4.0 * b1)
        + math.log(rho)
    )
    c = (mu + (2.0 * b1 / b0) * w) / math.sqrt(8.0 * b2)
    resid = y + c
    disc = b0 * b2 - b1 * b1
    if disc <= 1e-12 * b0 * b2:
        if abs(resid) <= 1e-9 * (1.0 + abs(c)):
            return float(base)
        return float("-inf")
    return float(base - (b0 * b2 / disc) * resid * resid)


def psi_src_maximizer(model, mu):
    """Closed-form argmax of psi_src over rho > 0, u, y and its value.

    Valid above the trivialization threshold only; below it the y
    component would cross the spectral edge and the formulas stop
    maximizing anything.
    """
    if not isinstance(model, SrcCorrelator):
        raise TypeError("psi_src_maximizer expects an SrcCorrelator model")
    mu = float(mu)
    thr = trivialization_threshold(model)
    if thr <= 0.0:
        raise UnsupportedRegimeError(
            "constant correlator (no atoms): the rate function is undefined"
        )
    if mu <= thr:
        raise UnsupportedRegimeError(
            f"maximizer requires mu > {thr:.6g} (got {mu:.6g})"
        )
    b1 = eval_src(model, 0.0, 1)
    b2 = eval_src(model, 0.0, 2)
    s = math.sqrt(4.0 * b2)
    point = ComplexityPoint(
        rho=math.sqrt(-2.0 * b1) / mu,
        u=b1 / mu,
        y=-(mu / s + s / mu) / _SQRT2,
    )
    value = -math.log(s) + 0.5 * math.log(-2.0 * b1) - 0.5 - _HALF_LOG2
    return point, value


def psi_lrc(point, model, mu):
    """Rate density of the expected count for isotropic-increment fields."""
    if not isinstance(model, LrcStructure):
        raise TypeError("psi_lrc expects an LrcStructure model")
    mu = float(mu)
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    d1_0 = eval_lrc(model, 0.0, 1)
    d2_0 = eval_lrc(model, 0.0, 2)
    if d2_0 >= 0.0:
        raise UnsupportedRegimeError(
            "pure-ramp structure function (no atoms): the rate function is undefined"
        )
    rho, u, y = point.rho, point.u, point.y
    r = rho * rho
    d1r = eval_lrc(model, r, 1)
    v = conditioning_variance(model, rho)
    m_y = 0.5 * mu * r - mu * d1r * r / d1_0
    w = u - m_y
    beta_sq = (d1r - d1_0) ** 2 / v
    v3 = -2.0 * d2_0 - beta_sq
    if v3 <= 0.0:
        raise DegenerateConditioningError(
            "conditional variance of the spectral shift is not positive at this rho"
        )
    kappa = -2.0 * d2_0 / v3
    c = (mu + w * (d1r - d1_0) / v) / math.sqrt(-4.0 * d2_0)
    return float(
        psi_star_semicircle(y)
        - w * w / (2.0 * v)
        - mu * mu * r / (2.0 * d1_0)
        + math.log(rho)
        - kappa * (y + c) ** 2
    )


def psi_lrc_maximizer(model, mu):
    """Closed-form argmax of psi_lrc and its value, above threshold only.

    The u component simplifies to -D'(0)/(2 mu) for every structure
    function, which is also the limiting energy per site of the global
    minimum.
    """
    if not isinstance(model, LrcStructure):
        raise TypeError("psi_lrc_maximizer expects an LrcStructure model")
    mu = float(mu)
    thr = trivialization_threshold(model)
    if thr <= 0.0:
        raise UnsupportedRegimeError(
            "pure-ramp structure function (no atoms): the rate function is undefined"
        )
    if mu <= thr:
        raise UnsupportedRegimeError(
            f"maximizer requires mu > {thr:.6g} (got {mu:.6g})"
        )
    d1_0 = eval_lrc(model, 0.0, 1)
    d2_0 = eval_lrc(model, 0.0, 2)
    point = ComplexityPoint(
        rho=math.sqrt(d1_0) / mu,
        u=-d1_0 / (2.0 * mu),
        y=-mu / math.sqrt(-4.0 * d2_0) - math.sqrt(-d2_0) / mu,
    )
    value = -0.5 * math.log(-4.0 * d2_0) - 0.5 + 0.5 * math.log(d1_0)
    return point, value


@dataclass(frozen=True)
class PredictionReport:
    """Trivialization predictions for a model at confinement stiffness mu.

    Above threshold: (rho_star, u_star, y_star) is the rate-function
    maximizer, so rho_star and u_star are the limiting radius per
    sqrt(N) and energy per N of the global minimum; center and radius
    describe the limiting Hessian bulk there, lambda_edge its lower
    edge, psi_max the maximal rate (zero net exponent after the entropy
    prefactor).  At or below threshold those fields are None and
    exponent_subcritical carries the annealed growth rate of the
    expected count; the Hessian law below threshold is an open question
    and deliberately not reported.
    """

    kind: str
    mu: float
    threshold: float
    m: float
    rho_star: Optional[float]
    u_star: Optional[float]
    y_star: Optional[float]
    center: Optional[float]
    radius: Optional[float]
    lambda_edge: Optional[float]
    psi_max: Optional[float]
    exponent_subcritical: Optional[float]

    def bulk_law(self) -> SemicircleLaw:
        if self.center is None or self.radius is None:
            raise UnsupportedRegimeError(
                "no limiting bulk law at or below the trivialization threshold"
            )
        return SemicircleLaw(center=self.center, radius=self.radius)


def _hessian_scales(model):
    """Scales (a, sigma) of the count reduction a*GOE + (sigma Z/sqrt(n) + mu) I.

    sigma/a = 1/sqrt(2) for both families.
    """
    if isinstance(model, SrcCorrelator):
        b2 = eval_src(model, 0.0, 2)
        if b2 <= 0.0:
            raise UnsupportedRegimeError("constant correlator has no Hessian noise scale")
        return math.sqrt(8.0 * b2), math.sqrt(4.0 * b2)
    if isinstance(model, LrcStructure):
        d2 = eval_lrc(model, 0.0, 2)
        if d2 >= 0.0:
            raise UnsupportedRegimeError("pure-ramp structure function has no Hessian noise scale")
        return math.sqrt(-4.0 * d2), math.sqrt(-2.0 * d2)
    raise TypeError("model must be SrcCorrelator or LrcStructure")


def predictions(model, mu) -> PredictionReport:
    """Fill a PredictionReport from the closed-form theory."""
    mu = float(mu)
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    thr = trivialization_threshold(model)
    a, _sigma = _hessian_scales(model)
    m = -mu / a
    if isinstance(model, SrcCorrelator):
        kind = "src"
        b2 = eval_src(model, 0.0, 2)
        center = mu + 4.0 * b2 / mu
        radius = 4.0 * math.sqrt(b2)
        edge = (math.sqrt(mu) - math.sqrt(4.0 * b2 / mu)) ** 2
    else:
        kind = "lrc"
        d2 = eval_lrc(model, 0.0, 2)
        center = mu - 2.0 * d2 / mu
        radius = math.sqrt(-8.0 * d2)
        edge = (math.sqrt(mu) - math.sqrt(-2.0 * d2 / mu)) ** 2
    if mu > thr:
        if kind == "src":
            point, value = psi_src_maximizer(model, mu)
        else:
            point, value = psi_lrc_maximizer(model, mu)
        return PredictionReport(
            kind=kind,
            mu=mu,
            threshold=thr,
            m=m,
            rho_star=point.rho,
            u_star=point.u,
            y_star=point.y,
            center=center,
            radius=radius,
            lambda_edge=edge,
            psi_max=value,
            exponent_subcritical=None,
        )
    exponent = m * m - math.log(-m) - 0.5 - _HALF_LOG2
    return PredictionReport(
        kind=kind,
        mu=mu,
        threshold=thr,
        m=m,
        rho_star=None,
        u_star=None,
        y_star=None,
        center=None,
        radius=None,
        lambda_edge=None,
        psi_max=None,
        exponent_subcritical=exponent,
    )


def expected_crt_mc(model, mu, n, n_samples, seed):
    """Monte Carlo estimate of log E[number of critical points] at size n.

    Uses the one-Gaussian reduction
    E Crt_n = mu^{-n} E |det(a GOE_n + (sigma Z / sqrt(n) + mu) I)|
    with Z drawn from an exponentially tilted proposal centered on the
    saddle of the z-integrand; a plain N(0, 1) proposal misses the
    dominant determinant values already at n ~ 50 and is biased low by
    factors that grow exponentially in n.  Tilting changes the sampling
    law only, so the reweighted estimator stays unbiased for any center.

    Returns {"log_value": float, "se": float} with a jackknife standard
    error of the log estimate.
    """
    mu = float(mu)
    n = int(n)
    n_samples = int(n_samples)
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    a, _sigma = _hessian_scales(model)
    am = mu / a
    # Saddle of -z^2/2 + n (x^2/2 + phi(x)) with x = am + z / sqrt(2 n):
    # x_hat = am + 1/(2 am) outside the bulk, 2 am inside.
    if am >= 1.0 / _SQRT2:
        x_hat = am + 1.0 / (2.0 * am)
    else:
        x_hat = 2.0 * am
    zeta = math.sqrt(2.0 * n) * (x_hat - am)
    method = "dense" if n <= DENSE_METHOD_MAX_N else "tridiagonal"
    rng = np.random.default_rng(seed)
    sqrt2n = math.sqrt(2.0 * n)
    logs = np.empty(n_samples)
    for i in range(n_samples):
        z = zeta + rng.standard_normal()
        x = am + z / sqrt2n
        eigs = goe_eigenvalues(n, rng, method)
        with np.errstate(divide="ignore"):
            logdet = float(np.sum(np.log(np.abs(eigs + x))))
        logs[i] = logdet - zeta * z + 0.5 * zeta * zeta - n * math.log(am)
    log_value = float(logsumexp(logs) - math.log(n_samples))
    return {"log_value": log_value, "se": jackknife_se_of_log_mean(logs)}


def expected_crt_quadrature(model, mu, n, rho_estimate, diagnostics=None):
    """log E[number of critical points] by quadrature against a density.

    rho_estimate must be a DensityEstimate of the mean empirical
    spectral density at size n + 1.  The integrand is the product of a
    Gaussian tilt kernel and the density; the integration box is the
    union of the 6-sigma boxes of the tilt kernel and of the
    tilt-times-density envelope, and the estimate grid must cover it.

    Returns the log value.  If `diagnostics` is a dict it is updated
    with the box and with the boundary-to-peak log ratio of the
    realized integrand; a ratio near zero means the truncation is
    suspect (also logged as a warning).
    """
    mu = float(mu)
    n = int(n)
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    if not isinstance(rho_estimate, DensityEstimate):
        raise TypeError("rho_estimate must be a DensityEstimate")
    a, _sigma = _hessian_scales(model)
    m = -mu / a
    np1 = n + 1
    w1 = 2.0 * m * math.sqrt(n / np1)
    s1 = 1.0 / math.sqrt(np1)
    w2 = m * math.sqrt(n / np1)
    s2 = 1.0 / math.sqrt(2.0 * np1)
    lo = min(w1 - 6.0 * s1, w2 - 6.0 * s2)
    hi = max(w1 + 6.0 * s1, w2 + 6.0 * s2)
    grid = rho_estimate.grid
    if lo < grid[0] or hi > grid[-1]:
        raise GridCoverageError(
            f"density grid [{grid[0]:.4g}, {grid[-1]:.4g}] does not cover "
            f"the integration box [{lo:.4g}, {hi:.4g}]"
        )
    inside = (grid >= lo) & (grid <= hi)
    x = grid[inside]
    vals = rho_estimate.values[inside]
    if x.size < 2:
        raise GridCoverageError("fewer than two grid points inside the integration box")
    pos = vals > 0.0
    if not pos.any():
        raise GridCoverageError(
            "estimated density carries no mass inside the integration box"
        )
    with np.errstate(divide="ignore"):
        log_f = -0.5 * np1 * x * x + 2.0 * math.sqrt(n * np1) * m * x + np.log(vals)
    # Trapezoid weights on a possibly nonuniform grid.
    wts = np.empty_like(x)
    wts[1:-1] = 0.5 * (x[2:] - x[:-2])
    wts[0] = 0.5 * (x[1] - x[0])
    wts[-1] = 0.5 * (x[-1] - x[-2])
    log_integral = float(logsumexp(log_f[pos] + np.log(wts[pos])))
    log_pref = (
        _HALF_LOG2
        + gammaln(0.5 * np1)
        + math.log(np1)
        - 0.5 * math.log(math.pi)
        - n * math.log(-m)
        - 0.5 * n * math.log(n)
        - n * m * m
    )
    peak = float(np.max(log_f[pos]))
    boundary = float(max(log_f[0], log_f[-1]))
    ratio = boundary - peak
    if ratio > -6.0:
        logger.warning(
            "quadrature truncation suspect: boundary integrand within e^%.2f of peak",
            ratio,
        )
    else:
        logger.debug("quadrature boundary-to-peak log ratio %.2f", ratio)
    if diagnostics is not None:
        diagnostics["box"] = (lo, hi)
        diagnostics["boundary_log_ratio"] = ratio
    return log_pref + log_integral


@dataclass(frozen=True)
class ReplicaSolution:
    """Solution of the fixed-overlap saddle equations.

    branch is "q0" when only the identically satisfied Q = 0 branch was
    found (v is then a reporting convention) and "interior" when a
    positive-Q root of both equations was located by Newton iteration.
    """

    v: float
    Q: float
    mu_eff: float
    edge: float
    branch: str


def replica_residuals(model, mu, v, q, convention_factor=4.0):
    """Residuals (r1, r2) of the two saddle equations at (v, q).

    The correlator enters scaled by convention_factor, which translates
    between the normalization the saddle equations were written in and
    the one used elsewhere here; 4 is the value for which the resulting
    bulk edge mu_eff - 2 sqrt(B''_scaled(0)) reproduces the stationary
    closed-form edge.
    """
    if not isinstance(model, SrcCorrelator):
        raise TypeError("replica equations are formulated for SrcCorrelator models")
    mu = float(mu)
    v = float(v)
    q = float(q)
    f = float(convention_factor)
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    if f <= 0.0:
        raise ValueError("convention_factor must be positive")
    if v <= 0.0:
        raise ValueError("v must be positive")
    if q < 0.0:
        raise ValueError("q must be nonnegative")
    g = 1.0 - mu * v * q
    if g <= 0.0:
        raise ValueError("1 - mu v q must stay positive")
    b_0 = f * eval_src(model, 0.0, 0)
    b_q = f * eval_src(model, q, 0)
    b1_0 = f * eval_src(model, 0.0, 1)
    b1_q = f * eval_src(model, q, 1)
    r1 = mu * mu * q / g - (b1_q - b1_0)
    r2 = math.log(g) / v - (-mu * q + v * (b_q - b_0 - q * b1_q))
    return r1, r2


def _replica_mu_eff(model, mu, v, q, f):
    b1_0 = f * eval_src(model, 0.0, 1)
    b1_q = f * eval_src(model, q, 1)
    b2_0 = f * eval_src(model, 0.0, 2)
    return mu + b2_0 / mu + v * (b1_q - b1_0 - q * b2_0)


def replica_solve(model, mu, convention_factor=4.0, q_max=10.0, n_starts=24, v0=1.0):
    """Solve the fixed-overlap saddle equations for (v, Q).

    Q = 0 satisfies both equations identically for every v, so the Q = 0
    branch (with v fixed to the v0 convention) is always available.  A
    damped Newton iteration on the residual pair, started from a
    log-spaced grid of Q values in (0, q_max], searches for interior
    roots; when one converges (residual norm below 1e-11) the interior
    solution is returned instead.

    edge = mu_eff - 2 sqrt(convention_factor * B''(0)).
    """
    if not isinstance(model, SrcCorrelator):
        raise TypeError("replica equations are formulated for SrcCorrelator models")
    mu = float(mu)
    f = float(convention_factor)
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    if f <= 0.0:
        raise ValueError("convention_factor must be positive")
    if q_max <= 0.0:
        raise ValueError("q_max must be positive")

    b2_0 = f * eval_src(model, 0.0, 2)

    def resid(vq):
        v, q = vq
        if v <= 0.0 or q < 0.0 or 1.0 - mu * v * q <= 0.0:
            return None
        r1, r2 = replica_residuals(model, mu, v, q, convention_factor=f)
        return np.array([r1, r2])

    def jac(vq):
        out = np.empty((2, 2))
        for j in range(2):
            h = 1e-7 * (1.0 + abs(vq[j]))
            up = vq.copy()
            up[j] += h
            dn = vq.copy()
            dn[j] -= h
            ru, rd = resid(up), resid(dn)
            if ru is None or rd is None:
                return None
            out[:, j] = (ru - rd) / (2.0 * h)
        return out

    root = None
    b1_0 = f * eval_src(model, 0.0, 1)
    for q0 in np.geomspace(1e-4, q_max, int(n_starts)):
        # Initial v from the first equation when it allows a positive value.
        r1q = f * eval_src(model, q0, 1) - b1_0
        if r1q > mu * mu * q0:
            v_init = (1.0 - mu * mu * q0 / r1q) / (mu * q0)
        else:
            v_init = v0
        vq = np.array([max(v_init, 1e-8), q0])
        r = resid(vq)
        if r is None:
            continue
        for _ in range(80):
            j = jac(vq)
            if j is None:
                break
            try:
                step = np.linalg.solve(j, -r)
            except np.linalg.LinAlgError:
                break
            scale = 1.0
            improved = False
            for _ in range(25):
                cand = vq + scale * step
                rc = resid(cand)
                if rc is not None and np.linalg.norm(rc) < np.linalg.norm(r):
                    vq, r = cand, rc
                    improved = True
                    break
                scale *= 0.5
            if not improved:
                break
            if np.max(np.abs(r)) <= 1e-12:
                break
        if r is not None and np.max(np.abs(r)) <= 1e-11 and vq[1] > 1e-6:
            root = (float(vq[0]), float(vq[1]))
            break

    if root is not None:
        v, q = root
        mu_eff = _replica_mu_eff(model, mu, v, q, f)
        return ReplicaSolution(
            v=v,
            Q=q,
            mu_eff=mu_eff,
            edge=mu_eff - 2.0 * math.sqrt(b2_0),
            branch="interior",
        )
    mu_eff = mu + b2_0 / mu
    return ReplicaSolution(
        v=float(v0),
        Q=0.0,
        mu_eff=mu_eff,
        edge=mu_eff - 2.0 * math.sqrt(b2_0),
        branch="q0",
    )
