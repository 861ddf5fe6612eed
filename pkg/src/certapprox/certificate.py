r"""Certificates, canonical serialization, digests, and verification.

A certificate is a claim: these terms over this basis approximate that
target within this error in this norm. Claims are serialized canonically
(sorted keys, no insignificant whitespace, floats as 17-significant-digit
decimals) so that equal claims are equal bytes, and the SHA-256 digest of
the canonical bytes minus the digest field is the certificate's identity.

Verification recomputes the error with a verification-grade measurement
(refined quadrature panels or the finer sup scan) and checks

    recomputed <= reported * (1 + 1e-6) + 1e-12   and   reported < tolerance

alongside the structural invariants. Adverse findings land in the report's
notes; verification itself does not raise on a failed claim.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass

from . import quadrature, target as target_mod
from .basis import BasisFamily
from .errors import CertificateParseError, ConfigurationError, ToleranceViolated
from .quadrature import NormTag

SCHEMA_VERSION = "1"
FILE_SUFFIX = ".uelat.json"

RELATIVE_SLACK = 1e-6
ABSOLUTE_SLACK = 1e-12

GREEDY = "greedy"


# ----------------------------------------------------------------------------
# canonical encoding
# ----------------------------------------------------------------------------

def _encode(value, out: list, path: str):
    if isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, bool):
        out.append("true" if value else "false")
    elif isinstance(value, int):
        out.append(repr(value))
    elif isinstance(value, float):
        if not math.isfinite(value):
            raise ConfigurationError(f"non-finite float at {path}")
        # the sign of zero depends on the computation path, so it must not
        # reach the digest
        out.append("%.17g" % (value + 0.0))
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _encode(item, out, f"{path}[{i}]")
        out.append("]")
    elif isinstance(value, dict):
        out.append("{")
        for i, key in enumerate(sorted(value)):
            if not isinstance(key, str):
                raise ConfigurationError(f"non-string key at {path}")
            if i:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(":")
            _encode(value[key], out, f"{path}.{key}")
        out.append("}")
    else:
        raise ConfigurationError(f"unserializable {type(value).__name__} at {path}")


def canonical_dumps(value) -> bytes:
    """Canonical JSON bytes: sorted keys, %.17g floats, UTF-8, no whitespace."""
    out: list[str] = []
    _encode(value, out, "$")
    return "".join(out).encode("utf-8")


def compute_digest(doc: dict) -> str:
    """SHA-256 hex of the canonical bytes with the digest field excluded."""
    body = {k: v for k, v in doc.items() if k != "digest"}
    return hashlib.sha256(canonical_dumps(body)).hexdigest()


# ----------------------------------------------------------------------------
# certificate data
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Construction:
    """How a certificate was built: method, rule provenance, stopping reason."""

    method: str
    stopping: str
    rule: dict | None = None
    supnorm_method: str | None = None

    def to_dict(self) -> dict:
        d = {"method": self.method, "stopping": self.stopping}
        if self.rule is not None:
            d["rule"] = self.rule
        if self.supnorm_method is not None:
            d["supnorm_method"] = self.supnorm_method
        return d

    @staticmethod
    def from_dict(d: dict) -> "Construction":
        return Construction(str(d["method"]), str(d["stopping"]),
                            d.get("rule"), d.get("supnorm_method"))


@dataclass(frozen=True)
class ApproximationCertificate:
    target_descriptor: str
    basis: BasisFamily
    terms: tuple[tuple[int, float], ...]
    norm: NormTag
    tolerance: float
    reported_error: float
    construction: Construction
    genealogy: tuple[str, ...] = ()
    digest: str = ""

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "approximation",
            "target": self.target_descriptor,
            "basis": self.basis.to_dict(),
            "terms": [[int(j), float(a)] for j, a in self.terms],
            "norm": self.norm.to_dict(),
            "tolerance": float(self.tolerance),
            "reported_error": float(self.reported_error),
            "construction": self.construction.to_dict(),
            "genealogy": list(self.genealogy),
            "digest": self.digest,
        }

    def approximant(self) -> target_mod.TargetFunction:
        return target_mod.series(self.basis, self.terms)

    def elements(self):
        return tuple(self.basis.element(j) for j, _ in self.terms)


def assemble(target_descriptor: str, basis: BasisFamily, terms, norm: NormTag,
             tolerance: float, reported_error: float, construction: Construction,
             genealogy=()) -> ApproximationCertificate:
    """Validate the claim data and mint the digest.

    The reported error must already be measured with the construction-grade
    rule; assembly checks the tolerance gate and the term-shape invariants
    but never re-measures.
    """
    tt = tuple((int(j), float(a)) for j, a in terms)
    if not tt:
        raise ConfigurationError("a certificate needs at least one term")
    if not (math.isfinite(tolerance) and tolerance > 0.0):
        raise ConfigurationError(f"invalid tolerance {tolerance}")
    if not math.isfinite(reported_error) or reported_error < 0.0:
        raise ConfigurationError(f"invalid reported error {reported_error}")
    if reported_error >= tolerance:
        raise ToleranceViolated(reported_error, tolerance, "at assembly")
    for j, a in tt:
        basis.element(j)
        if not math.isfinite(a):
            raise ConfigurationError(f"non-finite coefficient for index {j}")
    if construction.method != GREEDY:
        idx = [j for j, _ in tt]
        if any(b <= a for a, b in zip(idx[:-1], idx[1:])):
            raise ConfigurationError(
                "term indices must be strictly increasing (greedy excepted)")
    cert = ApproximationCertificate(target_descriptor, basis, tt, norm,
                                    float(tolerance), float(reported_error),
                                    construction, tuple(genealogy))
    return dataclasses.replace(cert, digest=compute_digest(cert.to_dict()))


def serialize(cert) -> bytes:
    return canonical_dumps(cert.to_dict())


def _need(doc: dict, key: str, path: str):
    if key not in doc:
        raise CertificateParseError(f"missing field {path}.{key}")
    return doc[key]


def deserialize(data) -> ApproximationCertificate:
    """Parse canonical bytes back into a certificate.

    Shape and types are validated here; the digest is kept as claimed so
    that tampering surfaces as a verification failure, not a parse error.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise CertificateParseError(f"not valid JSON: {e}") from None
    return certificate_from_dict(doc)


def certificate_from_dict(doc: dict, path: str = "$") -> ApproximationCertificate:
    if not isinstance(doc, dict):
        raise CertificateParseError(f"{path} is not an object")
    version = _need(doc, "schema_version", path)
    if version != SCHEMA_VERSION:
        raise CertificateParseError(
            f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION!r})")
    kind = _need(doc, "kind", path)
    if kind != "approximation":
        raise CertificateParseError(f"{path}.kind is {kind!r}, not 'approximation'")
    try:
        fam = BasisFamily.from_dict(_need(doc, "basis", path))
        norm = NormTag.from_dict(_need(doc, "norm", path))
    except (KeyError, TypeError, ValueError, ConfigurationError) as e:
        raise CertificateParseError(f"bad basis/norm under {path}: {e}") from None
    raw_terms = _need(doc, "terms", path)
    if not isinstance(raw_terms, list) or not raw_terms:
        raise CertificateParseError(f"{path}.terms must be a non-empty list")
    terms = []
    for i, pair in enumerate(raw_terms):
        if (not isinstance(pair, list) or len(pair) != 2
                or not isinstance(pair[0], int) or isinstance(pair[0], bool)
                or not isinstance(pair[1], (int, float))):
            raise CertificateParseError(f"{path}.terms[{i}] must be [index, coefficient]")
        terms.append((pair[0], float(pair[1])))
    try:
        construction = Construction.from_dict(_need(doc, "construction", path))
    except KeyError as e:
        raise CertificateParseError(f"missing field {path}.construction.{e.args[0]}") from None
    genealogy = _need(doc, "genealogy", path)
    if not isinstance(genealogy, list) or not all(isinstance(g, str) for g in genealogy):
        raise CertificateParseError(f"{path}.genealogy must be a list of digests")
    tolerance = _need(doc, "tolerance", path)
    reported = _need(doc, "reported_error", path)
    digest = _need(doc, "digest", path)
    if not isinstance(digest, str):
        raise CertificateParseError(f"{path}.digest must be a string")
    return ApproximationCertificate(
        str(_need(doc, "target", path)), fam, tuple(terms), norm,
        float(tolerance), float(reported), construction, tuple(genealogy), digest)


# ----------------------------------------------------------------------------
# verification
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class VerificationReport:
    digest: str
    reported_error: float
    recomputed_error: float
    tolerance: float
    bound_honored: bool
    structural_ok: bool
    method: str
    notes: tuple[str, ...] = ()

    @property
    def verdict(self) -> bool:
        return self.bound_honored and self.structural_ok

    def to_dict(self) -> dict:
        return {
            "digest": self.digest,
            "reported_error": float(self.reported_error),
            "recomputed_error": float(self.recomputed_error),
            "tolerance": float(self.tolerance),
            "bound_honored": self.bound_honored,
            "structural_ok": self.structural_ok,
            "method": self.method,
            "notes": list(self.notes),
            "verdict": self.verdict,
        }


def bound_is_honored(recomputed: float, reported: float, tolerance: float) -> bool:
    return (recomputed <= reported * (1.0 + RELATIVE_SLACK) + ABSOLUTE_SLACK
            and reported < tolerance)


def recompute_error(cert: ApproximationCertificate, f) -> tuple[float, str]:
    """Verification-grade error measurement for the certificate's claim."""
    approx = cert.approximant()
    if cert.norm.kind == quadrature.SUP:
        value, method = quadrature.sup_distance(f, approx, cert.norm.domain)
        return value, method
    if cert.norm.kind == quadrature.CHEBYSHEV_WEIGHTED_L2:
        base_points = 64
        if cert.construction.rule and cert.construction.rule.get("kind") == quadrature.GAUSS_CHEBYSHEV:
            base_points = int(cert.construction.rule["points"])
        rule = quadrature.gauss_chebyshev_rule(base_points).refined(4)
        return quadrature.norm_of_difference(f, approx, cert.norm, rule), \
            f"gauss_chebyshev_{rule.points}"
    # the approximant's own panel edges already consolidate every term's
    # structure; per-element unions would balloon for high-index series
    rule = quadrature.construction_rule(f, [approx],
                                        interval=cert.norm.domain).refined(4)
    return quadrature.norm_of_difference(f, approx, cert.norm, rule), \
        f"composite_gl{rule.points}x{rule.n_panels}"


def structural_findings(cert: ApproximationCertificate, store=None) -> list[str]:
    notes = []
    if cert.digest != compute_digest(cert.to_dict()):
        notes.append("digest does not match canonical content")
    try:
        if serialize(deserialize(serialize(cert))) != serialize(cert):
            notes.append("serialization does not round-trip to identical bytes")
    except CertificateParseError as e:
        notes.append(f"serialization round-trip failed: {e}")
    if not cert.terms:
        notes.append("empty term list")
    if not cert.reported_error < cert.tolerance:
        notes.append("reported error does not beat the tolerance")
    if cert.construction.method != GREEDY:
        idx = [j for j, _ in cert.terms]
        if any(b <= a for a, b in zip(idx[:-1], idx[1:])):
            notes.append("term indices not strictly increasing")
    try:
        cert.elements()
    except ConfigurationError as e:
        notes.append(f"invalid term index: {e}")
    nlo, nhi = cert.norm.domain
    blo, bhi = cert.basis.domain
    if nlo < blo - 1e-12 or nhi > bhi + 1e-12:
        notes.append("norm domain exceeds basis domain")
    for g in cert.genealogy:
        if len(g) != 64 or any(c not in "0123456789abcdef" for c in g):
            notes.append(f"malformed genealogy digest {g[:16]}...")
        elif store is not None and store.get(g) is None:
            notes.append(f"genealogy digest {g[:16]}... does not resolve")
    return notes


def verify(cert: ApproximationCertificate, f, store=None) -> VerificationReport:
    """Independently check a certificate against the target it claims to fit.

    Never raises on adverse findings; the report carries them.
    """
    notes = structural_findings(cert, store)
    structural_ok = not notes
    try:
        recomputed, method = recompute_error(cert, f)
    except Exception as e:  # a claim that cannot be measured is a failed claim
        notes.append(f"error recomputation failed: {e}")
        return VerificationReport(cert.digest, cert.reported_error, math.inf,
                                  cert.tolerance, False, structural_ok,
                                  "unmeasurable", tuple(notes))
    honored = bound_is_honored(recomputed, cert.reported_error, cert.tolerance)
    if not honored:
        notes.append(
            f"recomputed error {recomputed:.6g} vs reported {cert.reported_error:.6g}"
            f" at tolerance {cert.tolerance:.6g}")
    return VerificationReport(cert.digest, cert.reported_error, recomputed,
                              cert.tolerance, honored, structural_ok, method,
                              tuple(notes))


# ----------------------------------------------------------------------------
# store
# ----------------------------------------------------------------------------

class CertificateStore:
    """In-memory digest-addressed collection used for genealogy resolution."""

    def __init__(self):
        self._by_digest: dict[str, object] = {}

    def add(self, cert) -> str:
        self._by_digest[cert.digest] = cert
        return cert.digest

    def get(self, digest: str):
        return self._by_digest.get(digest)

    def __len__(self) -> int:
        return len(self._by_digest)

    def digests(self) -> tuple[str, ...]:
        return tuple(self._by_digest)

    def is_acyclic(self) -> bool:
        """Parent-digest edges among stored certificates form a DAG."""
        state: dict[str, int] = {}

        def visit(d: str) -> bool:
            if state.get(d) == 1:
                return False
            if state.get(d) == 2:
                return True
            state[d] = 1
            cert = self._by_digest.get(d)
            for parent in getattr(cert, "genealogy", ()) or ():
                if parent in self._by_digest and not visit(parent):
                    return False
            state[d] = 2
            return True

        return all(visit(d) for d in tuple(self._by_digest))
