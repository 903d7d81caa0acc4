"""Valuation distributions for single-parameter auction settings.

Three families are implemented behind one interface:

* :class:`FAlpha` -- the extremal alpha-strongly-regular family with a
  power-law tail.  At unit scale its cdf is
  ``F(v) = 1 - (1 + ((1-a)/a) v)^(-1/(1-a))`` and its virtual valuation is
  the straight line ``phi(v) = a (v - 1)``.
* :class:`Exponential` -- the memoryless distribution, i.e. the ``a = 1``
  (monotone-hazard-rate) limit of the family above.
* :class:`DiscreteTabular` -- an explicit finite support with a pmf, used
  for exhaustively checkable instances.

Every distribution exposes the usual derived quantities: quantile
``q(v) = 1 - F(v)``, value-of-quantile, virtual valuation, hazard rate,
cumulative hazard, monopoly reserve, revenue curve ``CR(q) = q * v(q)``,
posted-price welfare, and powers of the survival function integrated over
the value axis.  Scalar arguments give floats; numpy arrays broadcast.
"""

from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import integrate

__all__ = [
    "ValuationDistribution",
    "FAlpha",
    "Exponential",
    "DiscreteTabular",
    "RevenueCurvePoint",
    "AlphaSrReport",
    "UndefinedVirtualValueError",
    "NoReserveError",
    "make_falpha",
    "make_exponential",
    "make_discrete",
    "dist_from_spec",
    "dist_to_spec",
    "make_random_alpha_sr_discrete",
]

#: Relative tolerance for adaptive quadrature fallbacks.
QUAD_REL_TOL = 1e-8
#: Integration over an unbounded tail stops where the survival drops below this.
TAIL_SURVIVAL_CUTOFF = 1e-12
#: Absolute tolerance for bisection root finding (reserves, inversions).
BISECT_TOL = 1e-10


class UndefinedVirtualValueError(ValueError):
    """Raised when the virtual valuation is requested at a zero-density point."""


class NoReserveError(ValueError):
    """Raised when the virtual valuation is negative on the entire support."""


@dataclass(frozen=True)
class RevenueCurvePoint:
    """A point (q, cr) on the revenue curve in quantile space."""

    q: float
    cr: float


@dataclass(frozen=True)
class AlphaSrReport:
    """Result of an alpha-strong-regularity check.

    ``margin`` is the minimum of ``(phi(y) - phi(x)) / (y - x) - alpha`` over
    the checked pairs; the distribution passes iff the margin is nonnegative
    up to numerical slack.
    """

    alpha: float
    margin: float
    satisfied: bool
    pairs_checked: int


def _as_array(v) -> tuple[np.ndarray, bool]:
    arr = np.asarray(v, dtype=float)
    return arr, arr.ndim == 0


def _scalarize(arr: np.ndarray, scalar: bool):
    return float(arr) if scalar else arr


class ValuationDistribution(ABC):
    """Common interface of all valuation distributions.

    Instances are immutable and safe to share between threads; the lazily
    cached reserve price is idempotent to recompute.
    """

    # -- primitives -------------------------------------------------------

    @abstractmethod
    def cdf(self, v):
        """F(v) = Pr[value <= v]."""

    @abstractmethod
    def density(self, v):
        """Density f(v) for continuous kinds, pmf mass for discrete kinds."""

    def quantile_of_value(self, v):
        """q(v) = 1 - F(v)."""
        arr, scalar = _as_array(v)
        return _scalarize(1.0 - np.asarray(self.cdf(arr), dtype=float), scalar)

    def sale_probability(self, v):
        """Pr[value >= v]; coincides with ``quantile_of_value`` off atoms."""
        return self.quantile_of_value(v)

    @abstractmethod
    def value_of_quantile(self, q):
        """The value v with q(v) = q; rejects q <= 0 on unbounded supports."""

    @abstractmethod
    def virtual_valuation(self, v):
        """phi(v) = v - (1 - F(v)) / f(v), with the discrete analogue on atoms."""

    @abstractmethod
    def hazard_rate(self, v):
        """h(v) = f(v) / (1 - F(v)) (discrete: mass over sale probability)."""

    @abstractmethod
    def cumulative_hazard(self, v):
        """H(v) with 1 - F(v) = exp(-H(v))."""

    @abstractmethod
    def support_min(self) -> float: ...

    @abstractmethod
    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` values by inverse-cdf sampling from ``rng``."""

    # -- derived quantities ------------------------------------------------

    @cached_property
    def reserve_price(self) -> float:
        """The least price r with phi(r) >= 0 (monopoly reserve)."""
        return self._compute_reserve()

    @abstractmethod
    def _compute_reserve(self) -> float: ...

    def revenue_curve(self, q: float) -> RevenueCurvePoint:
        """CR(q) = q * v(q): expected revenue of the price with sale quantile q."""
        if q == 0.0:
            return RevenueCurvePoint(0.0, 0.0)
        return RevenueCurvePoint(float(q), float(q) * float(self.value_of_quantile(q)))

    @abstractmethod
    def posted_price_welfare(self, t: float) -> float:
        """V(t) = E[value; value >= t], the welfare of posting the price t."""

    @abstractmethod
    def survival_power_integral(self, p: int) -> float:
        """Integral of (1 - F(v))^p over the value axis; p=1 is the mean."""

    # -- serialization -----------------------------------------------------

    @abstractmethod
    def to_spec(self) -> dict: ...


class FAlpha(ValuationDistribution):
    """The extremal alpha-strongly-regular distribution, scaled.

    For ``0 < alpha < 1`` and ``scale > 0``::

        F(v)   = 1 - (1 + ((1-alpha)/alpha) * v/scale)^(-1/(1-alpha))
        phi(v) = alpha * (v - scale)

    so the monopoly reserve is exactly ``scale``.  All derived quantities
    below are closed forms; no quadrature is involved.
    """

    def __init__(self, alpha: float, scale: float = 1.0):
        if not (0.0 < alpha < 1.0):
            raise ValueError(
                f"alpha must lie strictly inside (0, 1), got {alpha!r}; "
                "use Exponential for the alpha = 1 limit"
            )
        if scale <= 0:
            raise ValueError(f"scale must be positive, got {scale!r}")
        self.alpha = float(alpha)
        self.scale = float(scale)
        self._b = (1.0 - self.alpha) / self.alpha

    def __repr__(self) -> str:
        return f"FAlpha(alpha={self.alpha}, scale={self.scale})"

    def support_min(self) -> float:
        return 0.0

    def _base(self, v: np.ndarray) -> np.ndarray:
        return 1.0 + self._b * np.maximum(v, 0.0) / self.scale

    def cdf(self, v):
        arr, scalar = _as_array(v)
        out = np.where(arr < 0, 0.0, 1.0 - self._base(arr) ** (-1.0 / (1.0 - self.alpha)))
        return _scalarize(out, scalar)

    def density(self, v):
        arr, scalar = _as_array(v)
        expo = -(2.0 - self.alpha) / (1.0 - self.alpha)
        out = np.where(arr < 0, 0.0, self._base(arr) ** expo / (self.alpha * self.scale))
        return _scalarize(out, scalar)

    def quantile_of_value(self, v):
        arr, scalar = _as_array(v)
        out = np.where(arr < 0, 1.0, self._base(arr) ** (-1.0 / (1.0 - self.alpha)))
        return _scalarize(out, scalar)

    def value_of_quantile(self, q):
        arr, scalar = _as_array(q)
        if np.any(arr <= 0.0) or np.any(arr > 1.0):
            raise ValueError("quantile must lie in (0, 1] for an unbounded support")
        out = self.scale * (arr ** (-(1.0 - self.alpha)) - 1.0) / self._b
        return _scalarize(out, scalar)

    def virtual_valuation(self, v):
        arr, scalar = _as_array(v)
        if np.any(arr < 0):
            raise UndefinedVirtualValueError("no density below the support")
        return _scalarize(self.alpha * (arr - self.scale), scalar)

    def hazard_rate(self, v):
        arr, scalar = _as_array(v)
        out = 1.0 / (self.alpha * self.scale + (1.0 - self.alpha) * np.maximum(arr, 0.0))
        return _scalarize(out, scalar)

    def cumulative_hazard(self, v):
        arr, scalar = _as_array(v)
        out = np.log1p((1.0 - self.alpha) * np.maximum(arr, 0.0) / (self.alpha * self.scale)) / (
            1.0 - self.alpha
        )
        return _scalarize(out, scalar)

    def _compute_reserve(self) -> float:
        return self.scale

    def posted_price_welfare(self, t: float) -> float:
        t = max(float(t), 0.0)
        q = self.quantile_of_value(t)
        # t*q(t) plus the tail integral of the survival, which is scale*q(t)^alpha.
        return t * q + self.scale * q**self.alpha

    def survival_power_integral(self, p: int) -> float:
        if p < 1:
            raise ValueError("power must be a positive integer")
        return self.scale * self.alpha / (p - 1.0 + self.alpha)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if n == 0:
            return np.empty(0)
        q = 1.0 - rng.random(int(n))  # uniform on (0, 1]
        return self.value_of_quantile(q)

    def to_spec(self) -> dict:
        return {"kind": "falpha", "alpha": self.alpha, "scale": self.scale}


class Exponential(ValuationDistribution):
    """Exponential distribution with the given rate: F(v) = 1 - exp(-rate*v).

    Its virtual valuation ``phi(v) = v - 1/rate`` has unit slope, so it is
    alpha-strongly-regular for every alpha <= 1 -- the monotone-hazard-rate
    limit of the :class:`FAlpha` family.
    """

    def __init__(self, rate: float = 1.0):
        if rate <= 0:
            raise ValueError(f"rate must be positive, got {rate!r}")
        self.rate = float(rate)

    def __repr__(self) -> str:
        return f"Exponential(rate={self.rate})"

    def support_min(self) -> float:
        return 0.0

    def cdf(self, v):
        arr, scalar = _as_array(v)
        return _scalarize(np.where(arr < 0, 0.0, 1.0 - np.exp(-self.rate * np.maximum(arr, 0))), scalar)

    def density(self, v):
        arr, scalar = _as_array(v)
        return _scalarize(np.where(arr < 0, 0.0, self.rate * np.exp(-self.rate * np.maximum(arr, 0))), scalar)

    def value_of_quantile(self, q):
        arr, scalar = _as_array(q)
        if np.any(arr <= 0.0) or np.any(arr > 1.0):
            raise ValueError("quantile must lie in (0, 1] for an unbounded support")
        return _scalarize(-np.log(arr) / self.rate, scalar)

    def virtual_valuation(self, v):
        arr, scalar = _as_array(v)
        if np.any(arr < 0):
            raise UndefinedVirtualValueError("no density below the support")
        return _scalarize(arr - 1.0 / self.rate, scalar)

    def hazard_rate(self, v):
        arr, scalar = _as_array(v)
        return _scalarize(np.full_like(arr, self.rate), scalar)

    def cumulative_hazard(self, v):
        arr, scalar = _as_array(v)
        return _scalarize(self.rate * np.maximum(arr, 0.0), scalar)

    def _compute_reserve(self) -> float:
        return 1.0 / self.rate

    def posted_price_welfare(self, t: float) -> float:
        t = max(float(t), 0.0)
        q = math.exp(-self.rate * t)
        return t * q + q / self.rate

    def survival_power_integral(self, p: int) -> float:
        if p < 1:
            raise ValueError("power must be a positive integer")
        return 1.0 / (p * self.rate)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if n == 0:
            return np.empty(0)
        q = 1.0 - rng.random(int(n))
        return -np.log(q) / self.rate

    def to_spec(self) -> dict:
        return {"kind": "exponential", "rate": self.rate}


class DiscreteTabular(ValuationDistribution):
    """Finite-support distribution given by an ascending support and a pmf.

    The discrete virtual valuation on an atom v is
    ``phi(v) = v - (1 - F(v)) / (F(v) - F(v-))`` with ``F`` evaluated just
    below the support minimum being 0.  ``sale_probability(v)`` is
    ``Pr[value >= v]``, which differs from ``q(v) = 1 - F(v)`` by the atom
    at v; both are exposed because posted-price arguments need the former
    while quantile bookkeeping uses the latter.
    """

    def __init__(self, support: Sequence[float], pmf: Sequence[float]):
        support_arr = np.asarray(support, dtype=float)
        pmf_arr = np.asarray(pmf, dtype=float)
        if support_arr.ndim != 1 or support_arr.size == 0:
            raise ValueError("support must be a nonempty 1-d sequence")
        if support_arr.shape != pmf_arr.shape:
            raise ValueError("support and pmf must have equal length")
        if np.any(np.diff(support_arr) <= 0):
            raise ValueError("support must be strictly ascending")
        if support_arr[0] < 0:
            raise ValueError("valuations must be nonnegative")
        if np.any(pmf_arr < 0):
            raise ValueError("pmf entries must be nonnegative")
        total = float(pmf_arr.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"pmf must sum to 1, got {total!r}")
        keep = pmf_arr > 0.0  # zero-mass atoms would make phi undefined there
        support_arr, pmf_arr = support_arr[keep], pmf_arr[keep]
        if support_arr.size == 0:
            raise ValueError("pmf has no positive mass")
        self.support = support_arr
        self.pmf = pmf_arr / total
        self._cdf = np.cumsum(self.pmf)
        self._cdf[-1] = 1.0
        # sale probability Pr[value >= support[k]]
        self._sale = np.concatenate(([1.0], 1.0 - self._cdf[:-1]))

    def __repr__(self) -> str:
        return f"DiscreteTabular(support={self.support.tolist()}, pmf={self.pmf.tolist()})"

    def support_min(self) -> float:
        return float(self.support[0])

    def support_max(self) -> float:
        return float(self.support[-1])

    def cdf(self, v):
        arr, scalar = _as_array(v)
        idx = np.searchsorted(self.support, arr, side="right")
        out = np.where(idx == 0, 0.0, self._cdf[np.maximum(idx - 1, 0)])
        return _scalarize(out, scalar)

    def density(self, v):
        """Probability mass at v (0 off the support)."""
        arr, scalar = _as_array(v)
        idx = np.searchsorted(self.support, arr)
        idx_c = np.minimum(idx, len(self.support) - 1)
        out = np.where(np.isclose(self.support[idx_c], arr, rtol=0.0, atol=1e-12), self.pmf[idx_c], 0.0)
        return _scalarize(out, scalar)

    def sale_probability(self, v):
        """Pr[value >= v] -- the chance a posted price v sells."""
        arr, scalar = _as_array(v)
        idx = np.searchsorted(self.support, arr, side="left")
        padded = np.concatenate((self._sale, [0.0]))
        return _scalarize(padded[idx], scalar)

    def value_of_quantile(self, q):
        """Largest support value whose sale probability still reaches q."""
        arr, scalar = _as_array(q)
        if np.any(arr <= 0.0) or np.any(arr > 1.0 + 1e-12):
            raise ValueError("quantile must lie in (0, 1]")
        # self._sale is descending; in the reversed (ascending) copy,
        # searchsorted counts the entries strictly below q - eps, so the
        # largest original index with sale >= q is len - 1 - count.
        pos = np.searchsorted(self._sale[::-1], arr - 1e-12, side="left")
        idx = len(self.support) - 1 - np.minimum(pos, len(self.support) - 1)
        out = self.support[idx]
        return _scalarize(out, scalar)

    def virtual_valuation(self, v):
        arr, scalar = _as_array(v)
        idx = np.searchsorted(self.support, arr)
        idx_c = np.minimum(idx, len(self.support) - 1)
        on_support = np.isclose(self.support[idx_c], arr, rtol=0.0, atol=1e-12)
        if not np.all(on_support):
            raise UndefinedVirtualValueError(f"value {arr} has zero mass")
        upper = 1.0 - self._cdf[idx_c]
        out = arr - upper / self.pmf[idx_c]
        return _scalarize(out, scalar)

    def hazard_rate(self, v):
        arr, scalar = _as_array(v)
        idx = np.searchsorted(self.support, arr)
        idx_c = np.minimum(idx, len(self.support) - 1)
        on_support = np.isclose(self.support[idx_c], arr, rtol=0.0, atol=1e-12)
        if not np.all(on_support):
            raise UndefinedVirtualValueError(f"value {arr} has zero mass")
        out = self.pmf[idx_c] / self._sale[idx_c]
        return _scalarize(out, scalar)

    def cumulative_hazard(self, v):
        arr, scalar = _as_array(v)
        surv = 1.0 - np.asarray(self.cdf(arr), dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(surv > 0.0, -np.log(np.maximum(surv, 1e-300)), np.inf)
        return _scalarize(out, scalar)

    def _compute_reserve(self) -> float:
        phi = self.virtual_values()
        nonneg = np.nonzero(phi >= 0.0)[0]
        if nonneg.size == 0:  # cannot happen: the top atom has phi = max value
            raise NoReserveError("virtual valuation negative on the whole support")
        return float(self.support[nonneg[0]])

    def virtual_values(self) -> np.ndarray:
        """phi on every atom, in support order."""
        upper = 1.0 - self._cdf
        return self.support - upper / self.pmf

    def revenue_curve_hull(self, q):
        """Concave revenue curve through the atom vertices.

        The raw curve ``q * v(q)`` is scalloped between the vertices
        ``(Pr[value >= r], r * Pr[value >= r])``; the piecewise-linear curve
        through those vertices (anchored at (0, 0)) is its concave majorant
        for regular distributions, and is the curve that satisfies
        ``sum_{v >= r} f(v) phi(v) = r * Pr[value >= r]`` segment by segment.
        """
        arr, scalar = _as_array(q)
        qs = np.concatenate(([0.0], self._sale[::-1]))
        crs = np.concatenate(([0.0], (self._sale * self.support)[::-1]))
        out = np.interp(arr, qs, crs)
        return _scalarize(out, scalar)

    def posted_price_welfare(self, t: float) -> float:
        mask = self.support >= float(t) - 1e-12
        return float(np.sum(self.support[mask] * self.pmf[mask]))

    def survival_power_integral(self, p: int) -> float:
        if p < 1:
            raise ValueError("power must be a positive integer")
        edges = np.concatenate(([0.0], self.support))
        surv = np.concatenate(([1.0], 1.0 - self._cdf))  # survival just right of each edge
        widths = np.diff(edges)
        return float(np.sum(widths * surv[:-1] ** p))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if n == 0:
            return np.empty(0)
        u = rng.random(int(n))
        idx = np.searchsorted(self._cdf, u, side="right")
        return self.support[np.minimum(idx, len(self.support) - 1)]

    def truncate_at(self, B: float) -> "DiscreteTabular":
        """Fold all mass above B onto an atom at B."""
        if B < self.support[0]:
            raise ValueError(f"truncation point {B} lies below the support minimum")
        if B >= self.support[-1]:
            return self
        below = self.support < B - 1e-12
        new_support = np.concatenate((self.support[below], [float(B)]))
        new_pmf = np.concatenate((self.pmf[below], [float(np.sum(self.pmf[~below]))]))
        return DiscreteTabular(new_support, new_pmf)

    def scale_values(self, factor: float) -> "DiscreteTabular":
        """The distribution of factor * value."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return DiscreteTabular(self.support * factor, self.pmf)

    def to_spec(self) -> dict:
        return {"kind": "discrete", "support": self.support.tolist(), "pmf": self.pmf.tolist()}


# ---------------------------------------------------------------------------
# module-level constructors and helpers
# ---------------------------------------------------------------------------


def make_falpha(alpha: float, scale: float = 1.0) -> FAlpha:
    return FAlpha(alpha, scale)


def make_exponential(rate: float = 1.0) -> Exponential:
    return Exponential(rate)


def make_discrete(support: Sequence[float], pmf: Sequence[float]) -> DiscreteTabular:
    return DiscreteTabular(support, pmf)


def dist_from_spec(spec: dict | str) -> ValuationDistribution:
    """Deserialize a distribution from its JSON object (or JSON text)."""
    if isinstance(spec, str):
        spec = json.loads(spec)
    kind = spec.get("kind")
    if kind == "falpha":
        return FAlpha(float(spec["alpha"]), float(spec.get("scale", 1.0)))
    if kind == "exponential":
        return Exponential(float(spec.get("rate", 1.0)))
    if kind == "discrete":
        return DiscreteTabular(spec["support"], spec["pmf"])
    raise ValueError(f"unknown distribution kind {kind!r}")


def dist_to_spec(d: ValuationDistribution) -> dict:
    return d.to_spec()


def truncate_at(
    d: ValuationDistribution, B: float, grid: Sequence[float] | None = None
) -> DiscreteTabular:
    """Truncate ``d`` at B, folding all upper mass onto an atom at B.

    Discrete inputs keep their own support (clipped).  Continuous inputs are
    discretized onto ``grid`` (ascending, capped at B; B is appended if
    missing): each grid point receives the mass of the half-open interval
    below it, and the whole upper tail lands on B.
    """
    if isinstance(d, DiscreteTabular):
        return d.truncate_at(B)
    if grid is None:
        raise ValueError("a value grid is required to truncate a continuous distribution")
    pts = sorted(float(g) for g in grid)
    if not pts:
        raise ValueError("grid must be nonempty")
    if pts[-1] > B + 1e-12:
        raise ValueError("grid points must not exceed the truncation point")
    if pts[-1] < B - 1e-12:
        pts.append(float(B))
    pts_arr = np.asarray(pts)
    cdf_vals = np.asarray(d.cdf(pts_arr), dtype=float)
    pmf = np.diff(np.concatenate(([0.0], cdf_vals)))
    pmf[-1] += 1.0 - cdf_vals[-1]
    return DiscreteTabular(pts_arr, pmf)


def check_alpha_sr(
    d: ValuationDistribution, alpha: float, grid_size: int = 200
) -> AlphaSrReport:
    """Check alpha-strong regularity: phi(y) - phi(x) >= alpha (y - x).

    Discrete kinds are checked exactly on consecutive support atoms; the
    minimum slope over consecutive pairs bounds the slope over every pair.
    Continuous kinds are checked on a quantile grid of the given size.
    """
    if isinstance(d, DiscreteTabular):
        values = d.support
        phi = d.virtual_values()
    else:
        qs = np.linspace(1e-4, 1.0, int(grid_size))
        values = np.asarray(d.value_of_quantile(qs), dtype=float)[::-1]
        phi = np.asarray(d.virtual_valuation(values), dtype=float)
    if len(values) < 2:
        return AlphaSrReport(alpha=float(alpha), margin=math.inf, satisfied=True, pairs_checked=0)
    slopes = np.diff(phi) / np.diff(values)
    margin = float(np.min(slopes) - alpha)
    return AlphaSrReport(
        alpha=float(alpha),
        margin=margin,
        satisfied=margin >= -1e-6,
        pairs_checked=len(values) - 1,
    )


def revenue_curve_hull(d: ValuationDistribution, q):
    """Concave revenue curve: q*v(q) for continuous kinds (already concave
    when the distribution is regular), the vertex polyline for discrete kinds."""
    if isinstance(d, DiscreteTabular):
        return d.revenue_curve_hull(q)
    arr, scalar = _as_array(q)
    vals = np.where(arr > 0, np.asarray(d.value_of_quantile(np.clip(arr, 1e-300, 1.0))), 0.0)
    return _scalarize(np.where(arr > 0, arr * vals, 0.0), scalar)


def expected_positive_part_of_virtual(d: ValuationDistribution) -> float:
    """E[max(0, phi(value))] -- the optimal single-bidder revenue (Myerson).

    Closed forms for the analytic kinds, exact summation for discrete kinds.
    """
    if isinstance(d, DiscreteTabular):
        phi = d.virtual_values()
        return float(np.sum(d.pmf * np.maximum(phi, 0.0)))
    r = d.reserve_price
    # E[(phi)^+] = integral over t >= 0 of Pr[phi(v) > t]; for these kinds the
    # revenue of posting the reserve equals it: r * q(r).
    return float(r * d.quantile_of_value(r))


def survival_integral(d: ValuationDistribution, lo: float, hi: float) -> float:
    """Integral of 1 - F over [lo, hi] by adaptive quadrature (rel-tol 1e-8)."""
    val, _ = integrate.quad(
        lambda v: float(d.quantile_of_value(v)), lo, hi, epsrel=QUAD_REL_TOL, limit=200
    )
    return val


def make_random_alpha_sr_discrete(
    rng: np.random.Generator,
    alpha: float,
    max_support: int = 6,
    min_support: int = 3,
) -> DiscreteTabular:
    """Generate a random alpha-strongly-regular pmf on {1, ..., L}.

    Virtual-valuation increments are drawn no smaller than alpha and at most
    1, which pins phi(v) < v everywhere below the top atom, and the pmf is
    reconstructed backward from phi through the sale probabilities:
    ``S(v+1)/S(v) = (v - phi(v)) / (1 + v - phi(v))``.  The construction is
    validated (and in principle rejection-sampled, though the bounds above
    make rejection unreachable) before returning.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError("alpha must lie in (0, 1]")
    for _ in range(64):
        L = int(rng.integers(min_support, max_support + 1))
        phi = np.empty(L)
        phi[0] = 1.0 - rng.uniform(0.1, 3.0)
        increments = rng.uniform(alpha, min(1.0, alpha + 0.8), size=max(L - 2, 0))
        for k, delta in enumerate(increments, start=1):
            phi[k] = phi[k - 1] + delta
        sale = np.empty(L)
        sale[0] = 1.0
        for v in range(1, L):
            gap = v - phi[v - 1]  # strictly positive by construction
            sale[v] = sale[v - 1] * gap / (1.0 + gap)
        pmf = np.concatenate((-np.diff(sale), [sale[-1]]))
        cand = DiscreteTabular(np.arange(1, L + 1, dtype=float), pmf)
        if check_alpha_sr(cand, alpha).satisfied:
            return cand
    raise RuntimeError("failed to generate a strongly regular pmf (should be unreachable)")
