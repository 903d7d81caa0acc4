"""Sample-based empirical model of a valuation distribution.

Given m i.i.d. samples, the largest few are discarded, each remaining j-th
largest sample v_j is placed at the empirical quantile t_j = (2j-1)/(2m),
and the empirical revenue curve R(q) = q * v(q) is drawn through the points
(t_j, t_j * v_j) with anchors at (0,0) and (1,0).  Its concave upper
envelope CR plays the role the true revenue curve plays in full
information: the envelope's slopes are the empirical virtual values and its
maximizer gives the empirical reserve.  A point mass at the top (quantile
xi_bar) makes the value/quantile maps total.

The accuracy guarantee tracked throughout is the multiplicative bracketing
event: for every retained sample value v, the true quantile q(v) lies
within a (1+gamma)^2 factor of the empirical one.  Sample-count
prerequisites for that event come in two strengths (per-build and
union-bounded over mechanism runs), both encoded in `validate_params`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dists import ValuationDistribution

__all__ = [
    "SampleParams",
    "ValidityReport",
    "EmpiricalModel",
    "InsufficientSamplesError",
    "SampleCountWarning",
    "validate_params",
    "build_empirical",
    "concave_envelope",
]


class InsufficientSamplesError(ValueError):
    """Raised when the discard rule would drop every sample."""


class SampleCountWarning(UserWarning):
    """Emitted when a model is built from fewer samples than the accuracy
    guarantee needs; the build still proceeds."""


@dataclass(frozen=True)
class SampleParams:
    """Accuracy parameters of an empirical build.

    gamma is the per-quantile multiplicative error, xi the fraction of the
    top of the distribution that is cut away, delta the failure probability;
    m may be omitted when only the required sample count is being queried.
    """

    gamma: float
    xi: float
    delta: float
    m: int | None = None

    def __post_init__(self):
        for name in ("gamma", "xi", "delta"):
            val = getattr(self, name)
            if not (0.0 < val < 1.0):
                raise ValueError(f"{name} must lie in (0,1), got {val!r}")
        if self.m is not None and self.m < 1:
            raise ValueError("m must be a positive integer")


@dataclass(frozen=True)
class ValidityReport:
    lemma_grade: bool
    theorem_grade: bool
    required_m: int
    messages: tuple[str, ...] = ()

    def __str__(self) -> str:  # pragma: no cover - convenience only
        return (
            f"lemma_grade={self.lemma_grade} theorem_grade={self.theorem_grade} "
            f"required_m={self.required_m} messages={list(self.messages)}"
        )


def _log_term(gamma: float, delta: float) -> float:
    return max(math.log(3.0) / gamma, math.log(3.0 / delta))


def lemma_grade_threshold(p: SampleParams) -> float:
    return 3.0 / (p.gamma**2 * (1.0 + p.gamma) * p.xi) * _log_term(p.gamma, p.delta)


def theorem_grade_threshold(p: SampleParams) -> float:
    return 6.0 * (1.0 + p.gamma) / (p.gamma**2 * p.xi) * _log_term(p.gamma, p.delta)


def validate_params(p: SampleParams) -> ValidityReport:
    """Check the sample-count prerequisites and report the binding minimum m.

    required_m is the least m that passes the stronger (theorem-grade) gate,
    including the side condition gamma*xi*m >= 4.
    """
    messages: list[str] = []
    required_m = max(
        math.ceil(theorem_grade_threshold(p)), math.ceil(4.0 / (p.gamma * p.xi))
    )
    params_ok = (1.0 + p.gamma) ** 2 <= 1.5
    if not params_ok:
        messages.append(
            f"(1+gamma)^2 = {(1 + p.gamma) ** 2:.4g} exceeds 3/2; no m can qualify"
        )
    if p.m is None:
        messages.append("no sample count supplied; gates evaluated as false")
        return ValidityReport(False, False, required_m, tuple(messages))
    side_ok = p.gamma * p.xi * p.m >= 4.0
    if not side_ok:
        messages.append(f"gamma*xi*m = {p.gamma * p.xi * p.m:.4g} is below 4")
    lemma = params_ok and side_ok and p.m >= lemma_grade_threshold(p)
    theorem = params_ok and side_ok and p.m >= theorem_grade_threshold(p)
    return ValidityReport(lemma, theorem, required_m, tuple(messages))


def _hull_prefilter(pts: np.ndarray) -> np.ndarray:
    """Drop points that sit strictly below the chord of their neighbors.

    Such a point lies strictly below the upper concave hull (the chord of any
    two points under a concave curve stays under it), so it can never be a
    hull vertex and simultaneous deletion passes are lossless.  The guard is
    relative so near-collinear points survive for the exact scan to settle.
    Keeps million-point builds out of the Python scan loop.
    """
    for _ in range(64):
        if len(pts) <= 4096:
            break
        x, y = pts[:, 0], pts[:, 1]
        left = (y[1:-1] - y[:-2]) * (x[2:] - x[1:-1])
        right = (y[2:] - y[1:-1]) * (x[1:-1] - x[:-2])
        guard = 1e-12 * (np.abs(left) + np.abs(right))
        keep = np.ones(len(pts), dtype=bool)
        keep[1:-1] = left - right >= -guard
        if keep.all():
            break
        pts = pts[keep]
    return pts


def concave_envelope(points: Sequence[tuple[float, float]]) -> np.ndarray:
    """Upper concave hull of points sorted by x, by the monotone-chain scan.

    Returns the hull vertices as an (k, 2) array; every vertex is one of the
    inputs.  Collinear interior points are absorbed.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("expected an iterable of (x, y) pairs")
    order = np.argsort(pts[:, 0], kind="stable")
    pts = _hull_prefilter(pts[order])
    hull_x: list[float] = []
    hull_y: list[float] = []
    for x, y in pts:
        while len(hull_x) >= 2:
            x1, y1 = hull_x[-2], hull_y[-2]
            x2, y2 = hull_x[-1], hull_y[-1]
            # pop the middle point unless it turns strictly downward (concave)
            if (y2 - y1) * (x - x2) > (y - y2) * (x2 - x1) + 1e-15:
                break
            hull_x.pop()
            hull_y.pop()
        if hull_x and x == hull_x[-1]:
            # duplicate abscissa: keep only the higher point
            if y > hull_y[-1]:
                hull_y[-1] = y
            continue
        hull_x.append(float(x))
        hull_y.append(float(y))
    return np.column_stack((hull_x, hull_y))


@dataclass(frozen=True, eq=False)
class EmpiricalModel:
    """Immutable result of one empirical build; see the module docstring."""

    sorted_samples: np.ndarray  # descending
    kept_from: int  # 1-based index of the first retained sample
    params: SampleParams
    quantile_points: np.ndarray = field(repr=False)  # (t_j, v_j) rows, t ascending
    revenue_points: np.ndarray = field(repr=False)  # anchored (q, R) rows
    envelope: np.ndarray = field(repr=False)  # hull vertices (q, CR)
    xi_bar: float
    point_mass_value: float

    # -- curves -------------------------------------------------------------

    @property
    def m(self) -> int:
        return len(self.sorted_samples)

    def revenue_at(self, q):
        """The raw (pre-envelope) empirical revenue curve, linearly interpolated."""
        return np.interp(q, self.revenue_points[:, 0], self.revenue_points[:, 1])

    def envelope_at(self, q):
        """CR(q): the concave envelope of the revenue curve."""
        return np.interp(q, self.envelope[:, 0], self.envelope[:, 1])

    def empirical_virtual(self, q: float) -> float:
        """Slope of the envelope at quantile q (left-segment convention)."""
        hx, hy = self.envelope[:, 0], self.envelope[:, 1]
        i = int(np.searchsorted(hx, q, side="left"))
        i = min(max(i, 1), len(hx) - 1)
        return float((hy[i] - hy[i - 1]) / (hx[i] - hx[i - 1]))

    def empirical_reserve(self) -> float:
        """Value at the envelope's maximizer (smallest maximizing quantile)."""
        hy = self.envelope[:, 1]
        i = int(np.argmax(hy))  # argmax returns the first (smallest-q) maximum
        q_star = float(self.envelope[i, 0])
        if q_star <= 0.0:
            return self.point_mass_value
        return float(self.envelope[i, 1] / q_star)

    def value_at_quantile(self, q: float) -> float:
        """v(q) = R(q)/q, clipped to the top point mass below xi_bar."""
        if q < self.xi_bar:
            return self.point_mass_value
        if q <= 0.0:
            return self.point_mass_value
        return float(self.revenue_at(q)) / float(q)

    def quantile_of_value(self, v) -> float | np.ndarray:
        """Leftmost quantile with v(q) <= v (the generalized inverse).

        Values above the point mass clip to xi_bar.  Vectorized over v.
        """
        v_arr = np.atleast_1d(np.asarray(v, dtype=float))
        qs = self.revenue_points[:, 0]
        rs = self.revenue_points[:, 1]
        # value of the raw curve at each breakpoint; qs[0] = 0 is the anchor
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(qs > 0, rs / np.where(qs > 0, qs, 1.0), np.inf)
        vals[0] = np.inf
        # vals is nonincreasing; find the first breakpoint with vals <= v
        idx = np.searchsorted(-vals, -v_arr, side="left")
        idx = np.clip(idx, 1, len(qs) - 1)
        q1, r1 = qs[idx - 1], rs[idx - 1]
        q2, r2 = qs[idx], rs[idx]
        slope = (r2 - r1) / (q2 - q1)
        c0 = r1 - slope * q1  # R(q) = slope*q + c0 on the segment
        denom = v_arr - slope
        with np.errstate(divide="ignore", invalid="ignore"):
            cross = np.where(np.abs(denom) > 1e-300, c0 / denom, q2)
        cross = np.clip(cross, q1, q2)
        # exact hit at a breakpoint (v equals a sample value) lands on it
        exact = vals[idx] >= v_arr - 1e-15
        out = np.where(exact, qs[idx], cross)
        out = np.maximum(out, self.xi_bar)
        out = np.where(v_arr > self.point_mass_value + 1e-12, self.xi_bar, out)
        return float(out[0]) if np.isscalar(v) or np.ndim(v) == 0 else out

    # -- diagnostics ----------------------------------------------------------

    def retained_values(self) -> np.ndarray:
        return self.quantile_points[:, 1]

    def retained_quantiles(self) -> np.ndarray:
        return self.quantile_points[:, 0]

    def coverage_event_holds(self, d: ValuationDistribution, gamma: float | None = None) -> bool:
        """True iff, for every retained sample value, the true quantile meets
        a (1+gamma)^2 multiplicative bracket around its empirical quantile.

        At an atom of ``d`` the true quantile is the whole jump interval
        ``[Pr[v > u], Pr[v >= u]]``; the event asks that this interval
        intersect the bracket.  Off atoms the interval collapses to
        ``1 - F(u)`` and the check is the usual two-sided one.
        """
        g = self.params.gamma if gamma is None else float(gamma)
        factor = (1.0 + g) ** 2
        values = np.unique(self.quantile_points[:, 1])
        qbar = np.asarray(self.quantile_of_value(values), dtype=float)
        q_lo = np.asarray(d.quantile_of_value(values), dtype=float)
        q_hi = np.asarray(d.sale_probability(values), dtype=float)
        return bool(np.all(q_lo <= qbar * factor + 1e-15) and np.all(q_hi >= qbar / factor - 1e-15))

    def to_json_dict(self) -> dict:
        return {
            "quantiles": self.retained_quantiles().tolist(),
            "values": self.retained_values().tolist(),
            "hull_vertices": self.envelope.tolist(),
            "reserve": self.empirical_reserve(),
            "xi_bar": self.xi_bar,
        }


def build_empirical(samples: Sequence[float], p: SampleParams) -> EmpiricalModel:
    """Sort, discard the top floor(xi*m)-1 samples, and assemble the model.

    A sub-lemma-grade sample count is allowed (with a warning); only an
    empty retained set is an error.
    """
    values = np.asarray(samples, dtype=float)
    if values.size == 0:
        raise InsufficientSamplesError("no samples given")
    m = int(values.size)
    report = validate_params(SampleParams(p.gamma, p.xi, p.delta, m))
    if not report.lemma_grade:
        warnings.warn(
            f"sample count m={m} is below lemma grade for {p}; "
            f"required_m={report.required_m}",
            SampleCountWarning,
            stacklevel=2,
        )
    order = np.argsort(values, kind="stable")
    desc = values[order[::-1]]
    kept_from = max(math.floor(p.xi * m), 1)
    if kept_from > m:
        raise InsufficientSamplesError(
            f"discard rule drops all samples (floor(xi*m)={math.floor(p.xi * m)}, m={m})"
        )
    j = np.arange(kept_from, m + 1)
    t = (2 * j - 1) / (2 * m)
    kept_vals = desc[kept_from - 1 :]
    quantile_points = np.column_stack((t, kept_vals))
    revenue_points = np.vstack(
        (
            [0.0, 0.0],
            np.column_stack((t, t * kept_vals)),
            [1.0, 0.0],
        )
    )
    envelope = concave_envelope(revenue_points)
    xi_bar = max((math.floor(2 * p.xi * m) - 1) / (2 * m), float(t[0]))
    raw_at_xi_bar = float(np.interp(xi_bar, revenue_points[:, 0], revenue_points[:, 1]))
    point_mass_value = raw_at_xi_bar / xi_bar if xi_bar > 0 else float(kept_vals[0])
    return EmpiricalModel(
        sorted_samples=desc,
        kept_from=kept_from,
        params=p,
        quantile_points=quantile_points,
        revenue_points=revenue_points,
        envelope=envelope,
        xi_bar=float(xi_bar),
        point_mass_value=float(point_mass_value),
    )
