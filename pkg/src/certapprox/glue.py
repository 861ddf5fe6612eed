r"""Overlapping covers, local extraction, reconciliation, and gluing.

A cover splits the domain into M equal cells widened symmetrically so that
consecutive patches share an overlap of width (cell width) * overlap_fraction.
Locals are extracted per patch at half the global tolerance. Before blending,
consecutive locals are compared in the Sobolev norm on their overlap; pairs
that disagree by delta = eps/(2M) or more get reconciled by adjusting the
higher-indexed patch, left to right, and every adjustment is recorded with
its coefficient deltas. The blended approximant uses complementary piecewise
linear ramps, so a ramp pair sums to one up to a single rounding.

The glued certificate's reported error is a direct oracle measurement of the
blended approximant against the target; the partition-of-unity bound
max_i(local error) + C_PU * eps/2 with C_PU = 1 + 2 max_i ||psi_i'|| * width_i
is recorded alongside for comparison, never as the acceptance figure.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import quadrature, target as target_mod
from .approximate import ExtractionSettings, approximate_gram
from .basis import BasisFamily, cubic_bspline_family
from .certificate import (ApproximationCertificate, CertificateStore,
                          Construction, VerificationReport, assemble,
                          bound_is_honored, canonical_dumps, certificate_from_dict,
                          compute_digest, structural_findings, SCHEMA_VERSION)
from .certificate import verify as verify_approximation
from .errors import (CertificateParseError, ConfigurationError,
                     IllConditionedBasisError, ReconciliationFailureError,
                     ToleranceViolated, TopologyError)
from .quadrature import NormTag

DEFAULT_OVERLAP_FRACTION = 0.2


# ----------------------------------------------------------------------------
# covers and partitions of unity
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Cover:
    domain: tuple[float, float]
    patches: tuple[tuple[float, float], ...]
    overlap_fraction: float

    @property
    def m(self) -> int:
        return len(self.patches)

    def overlap(self, i: int) -> tuple[float, float]:
        """Intersection of patches i and i+1."""
        s = self.patches[i + 1][0]
        e = self.patches[i][1]
        if not s < e:
            raise TopologyError(f"patches {i} and {i + 1} do not overlap")
        return (s, e)

    def to_dict(self) -> dict:
        return {"domain": [float(self.domain[0]), float(self.domain[1])],
                "patches": [[float(a), float(b)] for a, b in self.patches],
                "overlap_fraction": float(self.overlap_fraction)}

    @staticmethod
    def from_dict(d: dict) -> "Cover":
        return Cover((float(d["domain"][0]), float(d["domain"][1])),
                     tuple((float(a), float(b)) for a, b in d["patches"]),
                     float(d["overlap_fraction"]))


def make_cover(domain: tuple[float, float], m: int,
               overlap_fraction: float = DEFAULT_OVERLAP_FRACTION) -> Cover:
    """M equal cells widened by overlap_fraction and clipped to the domain."""
    lo, hi = float(domain[0]), float(domain[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ConfigurationError(f"invalid domain [{lo}, {hi}]")
    if m < 1:
        raise ConfigurationError("cover needs at least one patch")
    if not (0.0 < overlap_fraction <= 0.5):
        raise ConfigurationError("overlap fraction must lie in (0, 1/2]")
    h = (hi - lo) / m
    width = h * (1.0 + overlap_fraction)
    patches = []
    for i in range(m):
        c = lo + (i + 0.5) * h
        patches.append((max(lo, c - 0.5 * width), min(hi, c + 0.5 * width)))
    cover = Cover((lo, hi), tuple(patches), overlap_fraction)
    for i in range(m - 1):
        cover.overlap(i)  # raises if degenerate
    for i in range(m - 2):
        if cover.patches[i][1] >= cover.patches[i + 2][0]:
            raise ConfigurationError("non-consecutive patches must stay disjoint")
    return cover


@dataclass(frozen=True)
class PartitionOfUnity:
    """Complementary piecewise-linear ramps over a cover's overlaps."""

    cover: Cover
    ramps: tuple[tuple[float, float], ...]

    def _ramp_up(self, i: int, x: np.ndarray) -> np.ndarray:
        # ascending weight of patch i across overlap (i-1, i)
        if i == 0:
            return np.ones_like(x)
        s, e = self.ramps[i - 1]
        return np.clip((x - s) / (e - s), 0.0, 1.0)

    def weight(self, i: int, x) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.cover.patches[i]
        inside = (xs >= lo) & (xs <= hi)
        up = self._ramp_up(i, xs)
        if i == self.cover.m - 1:
            down = np.ones_like(xs)
        else:
            down = 1.0 - self._ramp_up(i + 1, xs)
        v = np.where(inside, up * down, 0.0)
        return v if np.ndim(x) else float(v[0])

    def weight_deriv(self, i: int, x) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        v = np.zeros_like(xs)
        if i > 0:
            s, e = self.ramps[i - 1]
            v = np.where((xs >= s) & (xs < e), 1.0 / (e - s), v)
        if i < self.cover.m - 1:
            s, e = self.ramps[i]
            v = np.where((xs >= s) & (xs < e), -1.0 / (e - s), v)
        lo, hi = self.cover.patches[i]
        v = np.where((xs < lo) | (xs > hi), 0.0, v)
        return v if np.ndim(x) else float(v[0])

    def max_ramp_slope(self, i: int) -> float:
        slopes = []
        if i > 0:
            s, e = self.ramps[i - 1]
            slopes.append(1.0 / (e - s))
        if i < self.cover.m - 1:
            s, e = self.ramps[i]
            slopes.append(1.0 / (e - s))
        return max(slopes, default=0.0)

    def to_dict(self) -> dict:
        return {"ramps": [[float(s), float(e)] for s, e in self.ramps]}


def build_pou(cover: Cover) -> PartitionOfUnity:
    ramps = tuple(cover.overlap(i) for i in range(cover.m - 1))
    return PartitionOfUnity(cover, ramps)


# ----------------------------------------------------------------------------
# local certificates
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalCertificate:
    patch_index: int
    patch: tuple[float, float]
    cert: ApproximationCertificate

    def series(self) -> target_mod.TargetFunction:
        return self.cert.approximant()

    def to_dict(self) -> dict:
        return {"patch_index": int(self.patch_index),
                "patch": [float(self.patch[0]), float(self.patch[1])],
                "certificate": self.cert.to_dict()}


def local_bspline_family(patch: tuple[float, float], knots: int) -> BasisFamily:
    """Clamped cubic family on the patch with `knots` distinct knots."""
    if knots < 2:
        raise ConfigurationError("a patch family needs at least 2 distinct knots")
    return cubic_bspline_family(knots + 2, (float(patch[0]), float(patch[1])))


def extract_local(f, patch_index: int, patch: tuple[float, float],
                  family: BasisFamily, settings: ExtractionSettings) -> LocalCertificate:
    """Gram-solve the full patch family against f in W12 on the patch.

    settings.epsilon is the local budget (half the global tolerance in the
    gluing pipeline). The full family is used: a restriction of f has no
    reason to vanish at patch boundaries.
    """
    if family.domain != (float(patch[0]), float(patch[1])):
        raise ConfigurationError("family domain must equal the patch")
    norm = NormTag(quadrature.W12, family.domain)
    cert = approximate_gram(f, family.elements(), norm, settings)
    return LocalCertificate(patch_index, family.domain, cert)


def check_overlap(a: LocalCertificate, b: LocalCertificate) -> float:
    """Sobolev mismatch of two local approximants on their patch intersection,
    measured at verification grade."""
    lo = max(a.patch[0], b.patch[0])
    hi = min(a.patch[1], b.patch[1])
    if not lo < hi:
        raise TopologyError(
            f"patches {a.patch_index} and {b.patch_index} do not overlap")
    sa, sb = a.series(), b.series()
    norm = NormTag(quadrature.W12, (lo, hi))
    rule = quadrature.construction_rule(sa, [sb], interval=(lo, hi)).refined(4)
    return quadrature.norm_of_difference(sa, sb, norm, rule)


@dataclass(frozen=True)
class ReconciliationRecord:
    pair: tuple[int, int]
    pre_mismatch: float
    post_mismatch: float
    deltas: tuple[tuple[int, float], ...]
    adjusted: bool

    def to_dict(self) -> dict:
        return {"pair": [int(self.pair[0]), int(self.pair[1])],
                "pre_mismatch": float(self.pre_mismatch),
                "post_mismatch": float(self.post_mismatch),
                "deltas": [[int(j), float(d)] for j, d in self.deltas],
                "adjusted": self.adjusted}


def reconcile(f, a: LocalCertificate, b: LocalCertificate, delta: float,
              settings: ExtractionSettings) -> tuple[LocalCertificate, ReconciliationRecord]:
    """Pull b toward a on their overlap, touching only b's coefficients.

    Elements of b with no support on the overlap keep their coefficients;
    the rest are re-fit by least squares in W12(overlap) against a's
    approximant. Three gates, each a reconciliation failure when missed:
    every coefficient delta stays below `delta`, the post-adjustment
    mismatch falls below `delta`, and b still meets its own patch budget.
    """
    pre = check_overlap(a, b)
    if pre < delta:
        record = ReconciliationRecord((a.patch_index, b.patch_index), pre, pre, (), False)
        return b, record
    lo = max(a.patch[0], b.patch[0])
    hi = min(a.patch[1], b.patch[1])
    fam = b.cert.basis
    sa = a.series()
    norm = NormTag(quadrature.W12, (lo, hi))
    old = dict(b.cert.terms)
    movable = []
    for j, _ in b.cert.terms:
        s_lo, s_hi = fam.element(j).support()
        if s_lo < hi and s_hi > lo:
            movable.append(j)
    if not movable:
        raise ReconciliationFailureError(
            f"pair ({a.patch_index}, {b.patch_index}): no element reaches the overlap")
    fixed = [(j, c) for j, c in b.cert.terms if j not in movable]
    els = [fam.element(j) for j in movable]
    rule = quadrature.construction_rule(sa, els + [b.series()], interval=(lo, hi),
                                        points=settings.points)
    k = len(els)
    G = np.zeros((k, k))
    for i in range(k):
        for jj in range(i, k):
            G[i, jj] = G[jj, i] = quadrature.inner_product(els[i], els[jj], norm, rule)
    if fixed:
        fixed_series = target_mod.series(fam, fixed)
        def resid_eval(x):
            return np.asarray(sa.evaluate(x)) - np.asarray(fixed_series.evaluate(x))
        def resid_deriv(x):
            return np.asarray(sa.evaluate_deriv(x)) - np.asarray(fixed_series.evaluate_deriv(x))
        resid = _Callable(resid_eval, resid_deriv)
    else:
        resid = sa
    rhs = np.array([quadrature.inner_product(resid, e, norm, rule) for e in els])
    try:
        cond = float(np.linalg.cond(G))
        if not math.isfinite(cond) or cond > 1e12:
            raise IllConditionedBasisError(cond)
        sol = scipy.linalg.cho_solve(scipy.linalg.cho_factor(G), rhs)
    except (IllConditionedBasisError, np.linalg.LinAlgError) as e:
        raise ReconciliationFailureError(
            f"pair ({a.patch_index}, {b.patch_index}): overlap system unsolvable ({e})"
        ) from None
    new_terms = []
    deltas = []
    for j, c in b.cert.terms:
        if j in movable:
            cj = float(sol[movable.index(j)])
            deltas.append((j, cj - old[j]))
            new_terms.append((j, cj))
        else:
            new_terms.append((j, c))
    worst = max(abs(d) for _, d in deltas)
    if worst >= delta:
        raise ReconciliationFailureError(
            f"pair ({a.patch_index}, {b.patch_index}): coefficient delta {worst:.6g}"
            f" exceeds gate {delta:.6g}")
    candidate_cert = _reissue(b.cert, new_terms, f, settings)
    candidate = LocalCertificate(b.patch_index, b.patch, candidate_cert)
    post = check_overlap(a, candidate)
    if post >= delta:
        raise ReconciliationFailureError(
            f"pair ({a.patch_index}, {b.patch_index}): mismatch {post:.6g}"
            f" still at or above gate {delta:.6g}")
    record = ReconciliationRecord((a.patch_index, b.patch_index), pre, post,
                                  tuple(deltas), True)
    return candidate, record


class _Callable:
    """Adapter giving residual expressions the target evaluation interface."""

    def __init__(self, fn, dfn):
        self._fn = fn
        self._dfn = dfn

    def evaluate(self, x):
        return self._fn(x)

    def evaluate_deriv(self, x):
        return self._dfn(x)


def _reissue(cert: ApproximationCertificate, new_terms, f,
             settings: ExtractionSettings) -> ApproximationCertificate:
    """Child certificate with adjusted coefficients, re-measured on its patch."""
    g = target_mod.series(cert.basis, new_terms)
    rule = quadrature.construction_rule(f, [g], interval=cert.norm.domain,
                                        points=settings.points)
    err = quadrature.norm_of_difference(f, g, cert.norm, rule)
    if err >= cert.tolerance:
        raise ReconciliationFailureError(
            f"adjusted patch error {err:.6g} breaks local budget {cert.tolerance:.6g}")
    construction = Construction(cert.construction.method,
                                cert.construction.stopping + "; reconciled",
                                rule=cert.construction.rule)
    return assemble(cert.target_descriptor, cert.basis, new_terms, cert.norm,
                    cert.tolerance, err, construction,
                    genealogy=cert.genealogy + (cert.digest,))


# ----------------------------------------------------------------------------
# blending and the glued certificate
# ----------------------------------------------------------------------------

class GluedFunction:
    """The blended approximant sum_i psi_i * s_i, evaluable like a target."""

    def __init__(self, pou: PartitionOfUnity, locals_: tuple[LocalCertificate, ...]):
        self.pou = pou
        self.locals = locals_
        self._series = [lc.series() for lc in locals_]
        self.domain = pou.cover.domain

    def evaluate(self, x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(xs)
        for i, s in enumerate(self._series):
            lo, hi = self.pou.cover.patches[i]
            mask = (xs >= lo) & (xs <= hi)
            if np.any(mask):
                out[mask] += self.pou.weight(i, xs[mask]) * np.asarray(s.evaluate(xs[mask]))
        return out if np.ndim(x) else float(out[0])

    def evaluate_deriv(self, x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(xs)
        for i, s in enumerate(self._series):
            lo, hi = self.pou.cover.patches[i]
            mask = (xs >= lo) & (xs <= hi)
            if np.any(mask):
                xm = xs[mask]
                out[mask] += (self.pou.weight_deriv(i, xm) * np.asarray(s.evaluate(xm))
                              + self.pou.weight(i, xm) * np.asarray(s.evaluate_deriv(xm)))
        return out if np.ndim(x) else float(out[0])

    def panel_edges(self) -> np.ndarray:
        pieces = [np.asarray(self.domain)]
        for lo, hi in self.pou.cover.patches:
            pieces.append(np.asarray([lo, hi]))
        for s, e in self.pou.ramps:
            pieces.append(np.asarray([s, e]))
        for s in self._series:
            pieces.append(s.panel_edges())
        merged = np.unique(np.concatenate(pieces))
        lo, hi = self.domain
        return merged[(merged >= lo) & (merged <= hi)]


@dataclass(frozen=True)
class GluedCertificate:
    target_descriptor: str
    cover: Cover
    pou: PartitionOfUnity
    locals: tuple[LocalCertificate, ...]
    parents: tuple[ApproximationCertificate, ...]
    records: tuple[ReconciliationRecord, ...]
    tolerance: float
    reported_error: float
    bound_estimate: float
    c_pu: float
    genealogy: tuple[str, ...]
    digest: str = ""

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "glued",
            "target": self.target_descriptor,
            "cover": self.cover.to_dict(),
            "pou": self.pou.to_dict(),
            "locals": [lc.to_dict() for lc in self.locals],
            "parents": [p.to_dict() for p in self.parents],
            "reconciliation": [r.to_dict() for r in self.records],
            "tolerance": float(self.tolerance),
            "reported_error": float(self.reported_error),
            "bound_estimate": float(self.bound_estimate),
            "c_pu": float(self.c_pu),
            "genealogy": list(self.genealogy),
            "digest": self.digest,
        }

    def approximant(self) -> GluedFunction:
        return GluedFunction(self.pou, self.locals)


def glue(f, locals_: list[LocalCertificate], pou: PartitionOfUnity,
         epsilon: float, settings: ExtractionSettings | None = None) -> GluedCertificate:
    """Reconcile pairwise left to right, blend, and certify the global error.

    Locals must each hold a budget of at most epsilon/2 on their patch.
    delta = epsilon/(2M) gates every overlap mismatch after reconciliation.
    """
    if settings is None:
        settings = ExtractionSettings(epsilon=epsilon)
    cover = pou.cover
    m = cover.m
    if len(locals_) != m:
        raise ConfigurationError(f"cover has {m} patches, got {len(locals_)} locals")
    for i, lc in enumerate(locals_):
        if lc.patch_index != i or lc.patch != cover.patches[i]:
            raise ConfigurationError(f"local {i} does not match its patch")
        if lc.cert.tolerance > 0.5 * epsilon * (1.0 + 1e-12):
            raise ConfigurationError(
                f"local {i} budget {lc.cert.tolerance:.6g} exceeds epsilon/2")
    delta = epsilon / (2.0 * m)
    originals = tuple(locals_)
    current = list(locals_)
    records = []
    parents = []
    for i in range(m - 1):
        adjusted, record = reconcile(f, current[i], current[i + 1], delta, settings)
        if record.adjusted:
            parents.append(current[i + 1].cert)
        current[i + 1] = adjusted
        records.append(record)
    glued_fn = GluedFunction(pou, tuple(current))
    norm = NormTag(quadrature.W12, cover.domain)
    rule = quadrature.construction_rule(f, [glued_fn], interval=cover.domain,
                                        points=settings.points).refined(4)
    global_err = quadrature.norm_of_difference(f, glued_fn, norm, rule)
    if global_err >= epsilon:
        raise ToleranceViolated(global_err, epsilon, "glued global error")
    c_pu = 1.0 + 2.0 * max(
        pou.max_ramp_slope(i) * (cover.patches[i][1] - cover.patches[i][0])
        for i in range(m))
    bound = max(lc.cert.reported_error for lc in current) + c_pu * 0.5 * epsilon
    cert = GluedCertificate(f.descriptor, cover, pou, tuple(current), tuple(parents),
                            tuple(records), float(epsilon), float(global_err),
                            float(bound), float(c_pu),
                            tuple(lc.cert.digest for lc in originals))
    return dataclasses.replace(cert, digest=compute_digest(cert.to_dict()))


# ----------------------------------------------------------------------------
# serialization and verification
# ----------------------------------------------------------------------------

def serialize_glued(cert: GluedCertificate) -> bytes:
    return canonical_dumps(cert.to_dict())


def glued_from_dict(doc: dict) -> GluedCertificate:
    if not isinstance(doc, dict):
        raise CertificateParseError("$ is not an object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise CertificateParseError(
            f"unsupported schema_version {doc.get('schema_version')!r}")
    if doc.get("kind") != "glued":
        raise CertificateParseError(f"$.kind is {doc.get('kind')!r}, not 'glued'")
    try:
        cover = Cover.from_dict(doc["cover"])
        ramps = tuple((float(s), float(e)) for s, e in doc["pou"]["ramps"])
        pou = PartitionOfUnity(cover, ramps)
        locals_ = tuple(
            LocalCertificate(int(d["patch_index"]),
                             (float(d["patch"][0]), float(d["patch"][1])),
                             certificate_from_dict(d["certificate"],
                                                   f"$.locals[{i}]"))
            for i, d in enumerate(doc["locals"]))
        parents = tuple(certificate_from_dict(d, f"$.parents[{i}]")
                        for i, d in enumerate(doc.get("parents", [])))
        records = tuple(
            ReconciliationRecord((int(r["pair"][0]), int(r["pair"][1])),
                                 float(r["pre_mismatch"]), float(r["post_mismatch"]),
                                 tuple((int(j), float(d)) for j, d in r["deltas"]),
                                 bool(r["adjusted"]))
            for r in doc.get("reconciliation", []))
        return GluedCertificate(
            str(doc["target"]), cover, pou, locals_, parents, records,
            float(doc["tolerance"]), float(doc["reported_error"]),
            float(doc["bound_estimate"]), float(doc["c_pu"]),
            tuple(str(g) for g in doc["genealogy"]), str(doc["digest"]))
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise CertificateParseError(f"malformed glued certificate: {e!r}") from None


def verify_glued(cert: GluedCertificate, f, store: CertificateStore | None = None
                 ) -> VerificationReport:
    """Re-check a glued claim: structure, locals, overlap gates, global bound."""
    notes: list[str] = []
    if cert.digest != compute_digest(cert.to_dict()):
        notes.append("digest does not match canonical content")
    try:
        reread = glued_from_dict(json.loads(serialize_glued(cert).decode("utf-8")))
        if serialize_glued(reread) != serialize_glued(cert):
            notes.append("serialization does not round-trip to identical bytes")
    except CertificateParseError as e:
        notes.append(f"round-trip failed: {e}")
    local_store = CertificateStore()
    for lc in cert.locals:
        local_store.add(lc.cert)
    for p in cert.parents:
        local_store.add(p)
    if store is not None:
        for d in store.digests():
            local_store.add(store.get(d))
    for g in cert.genealogy:
        if local_store.get(g) is None:
            notes.append(f"genealogy digest {g[:16]}... does not resolve")
    if len(cert.locals) != cert.cover.m:
        notes.append("local count does not match the cover")
    if cert.pou.ramps != tuple(cert.cover.overlap(i) for i in range(cert.cover.m - 1)):
        notes.append("partition ramps disagree with cover overlaps")
    half = 0.5 * cert.tolerance * (1.0 + 1e-12)
    delta = cert.tolerance / (2.0 * cert.cover.m)
    for i, lc in enumerate(cert.locals):
        sub_notes = structural_findings(lc.cert, local_store)
        notes.extend(f"local {i}: {n}" for n in sub_notes)
        if lc.cert.tolerance > half:
            notes.append(f"local {i} budget exceeds half the global tolerance")
        local_report = None
        try:
            local_report = verify_approximation(lc.cert, f, local_store)
        except Exception as e:
            notes.append(f"local {i} verification failed to run: {e}")
        if local_report is not None and not local_report.bound_honored:
            notes.append(f"local {i} bound not honored")
    for i in range(cert.cover.m - 1):
        mismatch = check_overlap(cert.locals[i], cert.locals[i + 1])
        if mismatch >= delta:
            notes.append(
                f"overlap ({i}, {i + 1}) mismatch {mismatch:.6g} at or above delta {delta:.6g}")
    structural_ok = not notes
    glued_fn = cert.approximant()
    norm = NormTag(quadrature.W12, cert.cover.domain)
    rule = quadrature.construction_rule(f, [glued_fn], interval=cert.cover.domain
                                        ).refined(8)
    recomputed = quadrature.norm_of_difference(f, glued_fn, norm, rule)
    honored = bound_is_honored(recomputed, cert.reported_error, cert.tolerance)
    if cert.reported_error > cert.bound_estimate:
        notes.append("direct error exceeds the partition bound estimate")
        structural_ok = False
    if not honored:
        notes.append(f"recomputed global error {recomputed:.6g} vs reported "
                     f"{cert.reported_error:.6g}")
    return VerificationReport(cert.digest, cert.reported_error, recomputed,
                              cert.tolerance, honored, structural_ok,
                              f"composite_gl16x{rule.n_panels}", tuple(notes))
