r"""Deterministic quadrature, inner products, and norm measurements.

Two grades of accuracy run through everything built on top of this module.
Construction-grade rules are composite 16-point Gauss-Legendre rules whose
panel edges honor every structural breakpoint of the integrand factors
(knots, kinks, oscillation scales). Verification-grade rules refine each
construction panel fourfold, so a verifier never evaluates at construction
nodes and cannot alias construction error.

All weighted sums go through math.fsum, which is exactly rounded and hence
independent of summation order and platform; this is what makes certificate
digests reproducible across machines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import ConfigurationError, EvaluationError, UnsupportedNormError


@lru_cache(maxsize=64)
def _leggauss(points: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(points)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w

L2 = "l2"
W12 = "w12"
SUP = "sup"
CHEBYSHEV_WEIGHTED_L2 = "chebyshev_weighted_l2"

_NORM_KINDS = (L2, W12, SUP, CHEBYSHEV_WEIGHTED_L2)

GAUSS_LEGENDRE = "gauss_legendre"
GAUSS_CHEBYSHEV = "gauss_chebyshev"
COMPOSITE_GAUSS_LEGENDRE = "composite_gauss_legendre"

MAX_POINTS = 64


@dataclass(frozen=True)
class NormTag:
    """Which norm a measurement or certificate refers to, and on what interval."""

    kind: str
    domain: tuple[float, float]

    def __post_init__(self):
        if self.kind not in _NORM_KINDS:
            raise ConfigurationError(f"unknown norm kind {self.kind!r}")
        lo, hi = self.domain
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ConfigurationError(f"invalid norm domain [{lo}, {hi}]")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "domain": [float(self.domain[0]), float(self.domain[1])]}

    @staticmethod
    def from_dict(d: dict) -> "NormTag":
        return NormTag(str(d["kind"]), (float(d["domain"][0]), float(d["domain"][1])))


def l2_norm(domain=(0.0, 1.0)) -> NormTag:
    return NormTag(L2, domain)


def w12_norm(domain=(0.0, 1.0)) -> NormTag:
    return NormTag(W12, domain)


def sup_norm(domain=(0.0, 1.0)) -> NormTag:
    return NormTag(SUP, domain)


def chebyshev_weighted_norm() -> NormTag:
    return NormTag(CHEBYSHEV_WEIGHTED_L2, (-1.0, 1.0))


# ----------------------------------------------------------------------------
# rules
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights over a panel decomposition of an interval.

    edges holds the panel boundaries in ascending order; a plain (single
    panel) rule has two edges. For Gauss-Chebyshev the weight function
    1/sqrt(1-x^2) is built into the weights and edges are fixed at +-1.
    """

    kind: str
    points: int
    edges: tuple[float, ...]
    policy: str = "explicit"

    def __post_init__(self):
        if self.kind not in (GAUSS_LEGENDRE, GAUSS_CHEBYSHEV, COMPOSITE_GAUSS_LEGENDRE):
            raise ConfigurationError(f"unknown rule kind {self.kind!r}")
        if self.kind == GAUSS_CHEBYSHEV:
            # node count scales with the requested degree, only bounded sanity-wise
            if not (1 <= self.points <= 1_000_000):
                raise ConfigurationError(f"unreasonable node count {self.points}")
        elif not (1 <= self.points <= MAX_POINTS):
            raise ConfigurationError(
                f"points per panel must lie in 1..{MAX_POINTS}, got {self.points}")
        e = np.asarray(self.edges, dtype=float)
        if e.size < 2 or np.any(np.diff(e) <= 0.0):
            raise ConfigurationError("panel edges must be strictly increasing")
        if self.kind == GAUSS_LEGENDRE and e.size != 2:
            raise ConfigurationError("plain gauss_legendre takes a single panel")
        if self.kind == GAUSS_CHEBYSHEV and self.edges != (-1.0, 1.0):
            raise ConfigurationError("gauss_chebyshev lives on [-1, 1]")

    @property
    def n_panels(self) -> int:
        return len(self.edges) - 1

    @cached_property
    def nodes(self) -> np.ndarray:
        return self._nodes_weights[0]

    @cached_property
    def weights(self) -> np.ndarray:
        return self._nodes_weights[1]

    @cached_property
    def _nodes_weights(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == GAUSS_CHEBYSHEV:
            n = self.points
            k = np.arange(n, 0, -1)  # ascending nodes
            x = np.cos((2 * k - 1) * np.pi / (2 * n))
            w = np.full(n, np.pi / n)
            x.setflags(write=False)
            w.setflags(write=False)
            return x, w
        ref_x, ref_w = _leggauss(self.points)
        e = np.asarray(self.edges)
        a, b = e[:-1], e[1:]
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        x = (half[:, None] * ref_x[None, :] + mid[:, None]).reshape(-1)
        w = (half[:, None] * ref_w[None, :]).reshape(-1)
        x.setflags(write=False)
        w.setflags(write=False)
        return x, w

    def refined(self, factor: int = 4) -> "QuadratureRule":
        """Verification-grade companion: every panel split `factor` ways.

        The refined node set is disjoint from the original's, so a
        verification measurement never reuses construction samples.
        """
        if self.kind == GAUSS_CHEBYSHEV:
            return QuadratureRule(GAUSS_CHEBYSHEV, self.points * factor,
                                  (-1.0, 1.0), policy="oracle")
        e = np.asarray(self.edges)
        fine = [e[0]]
        for a, b in zip(e[:-1], e[1:]):
            fine.extend(np.linspace(a, b, factor + 1)[1:])
        return QuadratureRule(COMPOSITE_GAUSS_LEGENDRE, self.points, tuple(fine),
                              policy="oracle")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "points": int(self.points),
             "panels": int(self.n_panels), "policy": self.policy}
        if self.policy == "explicit":
            d["edges"] = [float(v) for v in self.edges]
        return d


def gauss_legendre_rule(points: int, interval: tuple[float, float]) -> QuadratureRule:
    return QuadratureRule(GAUSS_LEGENDRE, points, (float(interval[0]), float(interval[1])))


def gauss_chebyshev_rule(points: int) -> QuadratureRule:
    return QuadratureRule(GAUSS_CHEBYSHEV, points, (-1.0, 1.0))


def composite_gauss_legendre_rule(points: int, edges) -> QuadratureRule:
    e = tuple(float(v) for v in np.unique(np.asarray(edges, dtype=float)))
    return QuadratureRule(COMPOSITE_GAUSS_LEGENDRE, points, e)


def construction_rule(f, elements, interval: tuple[float, float] | None = None,
                      points: int = 16) -> QuadratureRule:
    """Composite GL rule whose edges honor f's and every element's structure.

    interval restricts the rule (overlap measurements, patch norms); by
    default the rule spans the intersection of the operand domains.
    """
    pieces = [np.asarray(f.panel_edges(), dtype=float)]
    for e in elements:
        pieces.append(np.asarray(e.panel_edges(), dtype=float))
    if interval is None:
        lo = max(float(p[0]) for p in pieces)
        hi = min(float(p[-1]) for p in pieces)
    else:
        lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ConfigurationError(f"empty integration interval [{lo}, {hi}]")
    merged = np.unique(np.concatenate(pieces))
    merged = merged[(merged > lo) & (merged < hi)]
    merged = np.concatenate([[lo], merged, [hi]])
    # grids built from different rational spacings can land an ulp apart;
    # such slivers break panel refinement, so coalesce them
    keep = [merged[0]]
    tol = (hi - lo) * 1e-13
    for v in merged[1:]:
        if v - keep[-1] > tol:
            keep.append(v)
    keep[-1] = hi
    return QuadratureRule(COMPOSITE_GAUSS_LEGENDRE, points,
                          tuple(float(v) for v in keep), policy="structural")


# ----------------------------------------------------------------------------
# integration and norms
# ----------------------------------------------------------------------------

def integrate(fn, rule: QuadratureRule) -> float:
    """Weighted node sum of fn; exactly-rounded accumulation via fsum."""
    x = rule.nodes
    v = np.asarray(fn(x), dtype=float)
    if v.shape != x.shape:
        v = np.broadcast_to(v, x.shape)
    bad = ~np.isfinite(v)
    if np.any(bad):
        raise EvaluationError(
            f"non-finite integrand value at node x = {x[bad][0]}", float(x[bad][0]))
    return math.fsum(rule.weights * v)


def inner_product(f, e, norm: NormTag, rule: QuadratureRule) -> float:
    """<f, e> in the given norm's inner product, by the given rule.

    The Chebyshev-weighted pairing demands a Gauss-Chebyshev rule (the
    weight is folded into the nodes); sup admits no inner product.
    """
    if norm.kind == SUP:
        raise UnsupportedNormError("sup norm has no inner product")
    if norm.kind == CHEBYSHEV_WEIGHTED_L2:
        if rule.kind != GAUSS_CHEBYSHEV:
            raise ConfigurationError(
                "chebyshev_weighted_l2 inner products need a gauss_chebyshev rule")
        return integrate(lambda x: np.asarray(f.evaluate(x)) * np.asarray(e.evaluate(x)), rule)
    if norm.kind == L2:
        return integrate(lambda x: np.asarray(f.evaluate(x)) * np.asarray(e.evaluate(x)), rule)
    # W12: L2 pairing of values plus L2 pairing of first derivatives
    val = integrate(lambda x: np.asarray(f.evaluate(x)) * np.asarray(e.evaluate(x)), rule)
    der = integrate(lambda x: np.asarray(f.evaluate_deriv(x)) * np.asarray(e.evaluate_deriv(x)),
                    rule)
    return val + der


def norm_of_difference(f, g, norm: NormTag, rule: QuadratureRule | None = None) -> float:
    """||f - g|| in the given norm; pass g=None for ||f||."""
    if norm.kind == SUP:
        value, _method = sup_distance(f, g, norm.domain)
        return value
    if rule is None:
        raise ConfigurationError("integral norms need a quadrature rule")

    def diff(x):
        a = np.asarray(f.evaluate(x), dtype=float)
        if g is None:
            return a * a
        b = np.asarray(g.evaluate(x), dtype=float)
        return (a - b) ** 2

    def diff_deriv(x):
        a = np.asarray(f.evaluate_deriv(x), dtype=float)
        if g is None:
            return a * a
        b = np.asarray(g.evaluate_deriv(x), dtype=float)
        return (a - b) ** 2

    if norm.kind == CHEBYSHEV_WEIGHTED_L2 and rule.kind != GAUSS_CHEBYSHEV:
        raise ConfigurationError(
            "chebyshev_weighted_l2 norms need a gauss_chebyshev rule")
    total = integrate(diff, rule)
    if norm.kind == W12:
        total += integrate(diff_deriv, rule)
    return math.sqrt(max(total, 0.0))


GRID_POINTS = 4097


def sup_distance(f, g, domain: tuple[float, float], grid: int = GRID_POINTS):
    """Max of |f - g| over the interval, with the method used.

    When both operands expose linear breakpoints (piecewise-linear
    structure), the difference is piecewise linear and the max over merged
    breakpoints is exact. Otherwise a dense grid scan plus golden-section
    refinement around the best cell yields a flagged estimate.
    """
    lo, hi = domain

    def h(x):
        a = np.asarray(f.evaluate(x), dtype=float)
        if g is None:
            return np.abs(a)
        return np.abs(a - np.asarray(g.evaluate(x), dtype=float))

    bf = f.linear_breakpoints() if hasattr(f, "linear_breakpoints") else None
    bg = (g.linear_breakpoints() if hasattr(g, "linear_breakpoints") else None) \
        if g is not None else np.asarray([lo, hi])
    if bf is not None and bg is not None:
        pts = np.unique(np.concatenate([bf, bg, [lo, hi]]))
        pts = pts[(pts >= lo) & (pts <= hi)]
        vals = h(pts)
        return float(np.max(vals)), "breakpoint_sup"

    xs = np.linspace(lo, hi, grid)
    vals = h(xs)
    i = int(np.argmax(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, grid - 1)]
    best = _golden_max(h, a, b, tol=(hi - lo) * 1e-12)
    return float(max(vals[i], best)), f"grid_{grid}+golden"


def _golden_max(h, a: float, b: float, tol: float) -> float:
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - inv * (b - a)
    x2 = a + inv * (b - a)
    f1 = float(h(np.asarray([x1]))[0])
    f2 = float(h(np.asarray([x2]))[0])
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv * (b - a)
            f2 = float(h(np.asarray([x2]))[0])
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv * (b - a)
            f1 = float(h(np.asarray([x1]))[0])
    return max(f1, f2)
