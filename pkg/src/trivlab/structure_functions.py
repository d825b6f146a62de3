"""Structure functions of locally isotropic Gaussian fields.

Two model families are supported, both parameterized by a mixture of Gaussian
atoms ``(weight, scale)``:

* ``SrcCorrelator`` -- stationary fields with covariance ``N * B(|x-y|^2 / N)``
  where ``B(r) = c0 + sum_k a_k exp(-t_k^2 r)``.  The increment structure
  function is ``D(r) = 2 (B(0) - B(r))``, which is bounded, hence the name
  short-range correlations.
* ``LrcStructure`` -- fields with isotropic increments pinned to ``X(0) = 0``,
  ``E (X(x) - X(y))^2 = N * D(|x-y|^2 / N)`` with
  ``D(r) = A r + sum_k a_k (1 - exp(-t_k^2 r))``.  The linear ramp makes the
  increment variance unbounded (long-range correlations).

All radial arguments ``r`` are squared distances divided by dimension, matching
the normalization above.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConditioningError


def _validated_atoms(atoms) -> tuple[tuple[float, float], ...]:
    # An empty tuple is legal: B degenerates to the constant c0 and D to the
    # pure ramp A*r.  Downstream formulas that need curvature guard for it.
    out = []
    for pair in atoms:
        a, t = float(pair[0]), float(pair[1])
        if not (a > 0.0) or not np.isfinite(a):
            raise ValueError(f"atom weight must be positive and finite, got {a}")
        if not (t > 0.0) or not np.isfinite(t):
            raise ValueError(f"atom scale must be positive and finite, got {t}")
        out.append((a, t))
    return tuple(out)


@dataclass(frozen=True)
class SrcCorrelator:
    """Correlation function B(r) = c0 + sum a_k exp(-t_k^2 r), c0 >= 0."""

    c0: float = 0.0
    atoms: tuple[tuple[float, float], ...] = field(default=((1.0, 1.0),))

    def __post_init__(self):
        object.__setattr__(self, "c0", float(self.c0))
        object.__setattr__(self, "atoms", _validated_atoms(self.atoms))
        if self.c0 < 0.0 or not np.isfinite(self.c0):
            raise ValueError(f"c0 must be nonnegative and finite, got {self.c0}")


@dataclass(frozen=True)
class LrcStructure:
    """Structure function D(r) = A r + sum a_k (1 - exp(-t_k^2 r)), A >= 0."""

    A: float = 0.5
    atoms: tuple[tuple[float, float], ...] = field(default=((1.0, 1.0),))

    def __post_init__(self):
        object.__setattr__(self, "A", float(self.A))
        object.__setattr__(self, "atoms", _validated_atoms(self.atoms))
        if self.A < 0.0 or not np.isfinite(self.A):
            raise ValueError(f"ramp slope A must be nonnegative and finite, got {self.A}")


def eval_src(model: SrcCorrelator, r, order: int = 0):
    """Evaluate B(r) or one of its first two radial derivatives.

    Vectorized over ``r``; returns a scalar for scalar input.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    r_arr = np.asarray(r, dtype=float)
    acc = np.zeros_like(r_arr)
    for a, t in model.atoms:
        t2 = t * t
        acc += a * (-t2) ** order * np.exp(-t2 * r_arr)
    if order == 0:
        acc += model.c0
    return acc if np.ndim(r) else float(acc)


def eval_lrc(model: LrcStructure, r, order: int = 0):
    """Evaluate D(r) or one of its radial derivatives up to order 4."""
    if order not in (0, 1, 2, 3, 4):
        raise ValueError(f"order must be between 0 and 4, got {order}")
    r_arr = np.asarray(r, dtype=float)
    acc = np.zeros_like(r_arr)
    if order == 0:
        acc += model.A * r_arr
        for a, t in model.atoms:
            acc += a * (-np.expm1(-t * t * r_arr))
    elif order == 1:
        acc += model.A
        for a, t in model.atoms:
            t2 = t * t
            acc += a * t2 * np.exp(-t2 * r_arr)
    else:
        for a, t in model.atoms:
            t2 = t * t
            acc += -a * (-t2) ** order * np.exp(-t2 * r_arr)
    return acc if np.ndim(r) else float(acc)


def trivialization_threshold(model) -> float:
    """Smallest confinement strength mu at which the landscape trivializes.

    Above the returned value the expected number of critical points tends to
    one (a single minimum); below it the count grows exponentially with
    dimension.
    """
    if isinstance(model, SrcCorrelator):
        return float(np.sqrt(4.0 * eval_src(model, 0.0, order=2)))
    if isinstance(model, LrcStructure):
        return float(np.sqrt(-2.0 * eval_lrc(model, 0.0, order=2)))
    raise TypeError(f"expected SrcCorrelator or LrcStructure, got {type(model).__name__}")


def conditioning_variance(model: LrcStructure, rho: float) -> float:
    """Variance scale V(rho) of the radial observable used for conditioning.

    ``V = D(rho^2) - D'(rho^2)^2 rho^2 / D'(0)`` is the residual variance (times
    dimension) of the field value at radius ``rho sqrt(N)`` after projecting out
    the radial gradient component.  Raises if numerically degenerate.
    """
    if not isinstance(model, LrcStructure):
        raise TypeError("conditioning constants are defined for LrcStructure models")
    rho = float(rho)
    if rho <= 0.0:
        raise DegenerateConditioningError("conditioning requires rho > 0")
    r = rho * rho
    d0 = eval_lrc(model, r)
    d1 = eval_lrc(model, r, order=1)
    v = d0 - d1 * d1 * r / eval_lrc(model, 0.0, order=1)
    if v <= 1e-14 * d0:
        raise DegenerateConditioningError(
            f"conditioning variance {v:.3e} is degenerate relative to D(rho^2) = {d0:.3e}"
        )
    return float(v)


def alpha_beta(model: LrcStructure, rho: float) -> tuple[float, float]:
    """Normalized curvature/slope pair entering the conditional Hessian law.

    alpha = 2 D''(rho^2) / sqrt(V), beta = (D'(rho^2) - D'(0)) / sqrt(V).
    Both are negative for any mixture model: D' is strictly decreasing and
    D'' < 0.
    """
    v = conditioning_variance(model, rho)
    r = float(rho) ** 2
    sv = np.sqrt(v)
    alpha = 2.0 * eval_lrc(model, r, order=2) / sv
    beta = (eval_lrc(model, r, order=1) - eval_lrc(model, 0.0, order=1)) / sv
    return float(alpha), float(beta)


def check_assumption3(model: LrcStructure, rho_max: float = 10.0, grid_points: int = 200) -> dict:
    """Check the nondegeneracy inequalities of the conditional Hessian model.

    On a log-spaced grid of radii in ``[rho_max * 1e-4, rho_max]`` both

    * ``-2 D''(0) - (alpha rho^2 + beta) beta > 0`` and
    * ``-4 D''(0) - (alpha rho^2 + beta) alpha rho^2 > 0``

    must hold.  The lower end of the grid is floored because the second margin
    tends to zero (from above, for mixture models) as rho -> 0.  Returns a dict
    with keys ``pass``, ``worst_margin`` and ``worst_rho``.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    if rho_max <= 0.0:
        raise ValueError("rho_max must be positive")
    d2_0 = eval_lrc(model, 0.0, order=2)
    rhos = np.geomspace(rho_max * 1e-4, rho_max, grid_points)
    worst_margin = np.inf
    worst_rho = rhos[0]
    for rho in rhos:
        alpha, beta = alpha_beta(model, rho)
        s = alpha * rho * rho + beta
        margin = min(-2.0 * d2_0 - s * beta, -4.0 * d2_0 - s * alpha * rho * rho)
        if margin < worst_margin:
            worst_margin = margin
            worst_rho = rho
    return {"pass": bool(worst_margin > 0.0), "worst_margin": float(worst_margin), "worst_rho": float(worst_rho)}
