"""Differentiable realizations of the random field and exact Gaussian sampling.

The field itself lives in dimension N with covariance of order N, so a
random-feature sum of K cosines with Gaussian frequencies reproduces it
with O(1/sqrt(K)) covariance error while staying globally smooth:

* stationary (SRC):   X(x) = sqrt(N c0) g0 + sum_k s cos(w_k . x + phi_k),
  s = sqrt(2 M N / K), M = sum of atom weights, w_k drawn per-feature from
  a mixture of N(0, (2 t^2 / N) I) with atom probabilities a_k / M.  The
  population covariance is exactly N * B(|x - y|^2 / N) at every K.
* isotropic increments (LRC):  X(x) = xi . x + sum_k s [cos(w_k . x + phi_k)
  - cos(phi_k)], s = sqrt(M N / K), xi_i iid N(0, A).  The cos(phi_k)
  subtraction pins X(0) = 0 bit-exactly; increments have variance
  N * D(|x - y|^2 / N) at every K (the increment loses the 1/2
  phase-averaging factor a stationary covariance has, hence the smaller
  amplitude).

``exact_sample_on_points`` bypasses the feature approximation entirely and
draws from the closed-form joint covariance on a finite point set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedCovarianceError
from .structure_functions import LrcStructure, SrcCorrelator, eval_lrc, eval_src

__all__ = [
    "FieldRealization",
    "HamiltonianEval",
    "sample_field",
    "eval_hamiltonian",
    "covariance_on_points",
    "exact_sample_on_points",
]


@dataclass(frozen=True, eq=False)
class FieldRealization:
    """One frozen draw of the random-feature field, evaluable anywhere.

    All arrays are read-only; a realization is safe to share across
    threads.  ``kind`` is "src" or "lrc".  For SRC fields ``xi`` is the
    zero vector and ``g0`` is the realized constant component
    (sqrt(N c0) times a standard normal); for LRC fields ``g0`` is 0 and
    ``xi`` is the exact linear slope term.
    """

    kind: str
    n: int
    k: int
    w: np.ndarray            # (k, n) feature frequencies
    phases: np.ndarray       # (k,)
    amplitudes: np.ndarray   # (k,) all equal by construction, kept per-feature
    xi: np.ndarray           # (n,)
    g0: float
    seed: int

    def field_value(self, x) -> float:
        """X(x) without the confinement term."""
        x = np.asarray(x, dtype=float)
        t = self.w @ x + self.phases
        val = float(self.amplitudes @ np.cos(t)) + float(self.xi @ x) + self.g0
        if self.kind == "lrc":
            val -= float(self.amplitudes @ np.cos(self.phases))
        return val

    def field_gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = self.w @ x + self.phases
        return self.xi - (self.amplitudes * np.sin(t)) @ self.w

    def field_hessian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = self.w @ x + self.phases
        g = -((self.amplitudes * np.cos(t))[:, None] * self.w).T @ self.w
        # commutative additions make the symmetrization bit-exact
        return 0.5 * (g + g.T)


@dataclass(frozen=True)
class HamiltonianEval:
    """Value, gradient and Hessian of H(x) = X(x) + (mu/2)|x|^2 at one point."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def sample_field(model, n: int, k: int = 4096, seed: int = 0) -> FieldRealization:
    """Draw one random-feature realization of the field in dimension n.

    ``k`` is the feature count; the covariance is unbiased at every k, with
    realization-to-realization fluctuation O(1/sqrt(k)).  Models with no
    atoms yield featureless realizations (k stored as 0) regardless of the
    requested k.  Deterministic given (model, n, k, seed).
    """
    n = int(n)
    k = int(k)
    if n < 1:
        raise ValueError(f"dimension must be at least 1, got {n}")
    if k < 0:
        raise ValueError(f"feature count must be nonnegative, got {k}")
    if isinstance(model, SrcCorrelator):
        kind = "src"
    elif isinstance(model, LrcStructure):
        kind = "lrc"
    else:
        raise TypeError(f"expected SrcCorrelator or LrcStructure, got {type(model).__name__}")

    weights = np.array([a for a, _ in model.atoms], dtype=float)
    scales = np.array([t for _, t in model.atoms], dtype=float)
    m_total = float(weights.sum()) if weights.size else 0.0
    if m_total > 0.0 and k == 0:
        raise ValueError("feature count k must be >= 1 when the model has atoms")

    rng = np.random.default_rng(seed)
    if kind == "src":
        g0 = float(rng.standard_normal()) * math.sqrt(n * model.c0)
        xi = np.zeros(n)
    else:
        g0 = 0.0
        xi = rng.standard_normal(n) * math.sqrt(model.A)

    if m_total > 0.0:
        idx = rng.choice(weights.size, size=k, p=weights / m_total)
        t_sel = scales[idx]
        w = rng.standard_normal((k, n)) * (t_sel * math.sqrt(2.0 / n))[:, None]
        phases = rng.uniform(0.0, 2.0 * math.pi, size=k)
        amp = math.sqrt((2.0 if kind == "src" else 1.0) * m_total * n / k)
        amplitudes = np.full(k, amp)
    else:
        k = 0
        w = np.zeros((0, n))
        phases = np.zeros(0)
        amplitudes = np.zeros(0)

    return FieldRealization(
        kind=kind,
        n=n,
        k=k,
        w=_frozen(w),
        phases=_frozen(phases),
        amplitudes=_frozen(amplitudes),
        xi=_frozen(xi),
        g0=g0,
        seed=int(seed),
    )


def eval_hamiltonian(field: FieldRealization, mu: float, x) -> HamiltonianEval:
    """Evaluate H = X + (mu/2)|x|^2 with analytic gradient and Hessian.

    The Hessian is exactly symmetric (symmetrized rank-one sum plus mu on
    the diagonal).
    """
    mu = float(mu)
    if not (mu > 0.0):
        raise ValueError(f"mu must be positive, got {mu}")
    x = np.asarray(x, dtype=float)
    if x.shape != (field.n,):
        raise ValueError(f"x must have shape ({field.n},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    value = field.field_value(x) + 0.5 * mu * float(x @ x)
    gradient = field.field_gradient(x) + mu * x
    hessian = field.field_hessian(x)
    hessian[np.diag_indices(field.n)] += mu
    return HamiltonianEval(value=value, gradient=gradient, hessian=hessian)


def _pairwise_sq_dists(pts: np.ndarray) -> np.ndarray:
    sq = np.sum(pts * pts, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    return np.maximum(d2, 0.0)


def covariance_on_points(model, points) -> np.ndarray:
    """Closed-form joint covariance of (X(p_1), ..., X(p_m)).

    SRC: N B(|p_i - p_j|^2 / N).  LRC (pinned increments):
    (N/2) [D(|p_i|^2/N) + D(|p_j|^2/N) - D(|p_i - p_j|^2/N)].
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[1]
    d2 = _pairwise_sq_dists(pts) / n
    if isinstance(model, SrcCorrelator):
        return n * eval_src(model, d2)
    if isinstance(model, LrcStructure):
        r_self = np.sum(pts * pts, axis=1) / n
        d_self = eval_lrc(model, r_self)
        return 0.5 * n * (d_self[:, None] + d_self[None, :] - eval_lrc(model, d2))
    raise TypeError(f"expected SrcCorrelator or LrcStructure, got {type(model).__name__}")


def exact_sample_on_points(model, points, n_samples: int, seed: int = 0) -> np.ndarray:
    """Draw exact joint Gaussian samples of the field on a finite point set.

    Returns an (n_samples, m) array.  Factorization is Cholesky with
    escalating diagonal jitter up to 1e-10 * trace/m (the pinned LRC
    covariance is rank-deficient whenever the origin is among the points);
    if that fails the covariance is declared ill-conditioned.
    """
    n_samples = int(n_samples)
    if n_samples < 1:
        raise ValueError(f"n_samples must be at least 1, got {n_samples}")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m = pts.shape[0]
    d2 = _pairwise_sq_dists(pts)
    off = d2[~np.eye(m, dtype=bool)]
    if off.size and off.min() <= 0.0:
        raise ValueError("points must be pairwise distinct")

    cov = covariance_on_points(model, pts)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_samples, m))

    scale = float(np.trace(cov)) / m
    if scale <= 0.0:
        # PSD with zero trace is the zero matrix: the field is a.s. zero here
        # (single pinned origin, or a model with no variance at these points)
        return np.zeros((n_samples, m))
    for jitter in (0.0, 1e-13, 1e-12, 1e-11, 1e-10):
        try:
            chol = np.linalg.cholesky(cov + (jitter * scale) * np.eye(m))
        except np.linalg.LinAlgError:
            continue
        return z @ chol.T
    raise IllConditionedCovarianceError(
        f"covariance on {m} points failed Cholesky at jitter 1e-10 * trace/m = {1e-10 * scale:.3e}"
    )
