r"""Certificate sequences, exact Cauchy evidence, and limit transfer.

The model sequence is the dyadic tent series: partial sums
S_n(x) = sum_{k=0..n} 2^-k T_k(x) where T_k is the unit tent at scale k.
Every question the transfer asks about this sequence has an exact rational
answer. The sup distance between two partial sums is periodic with the
finer structure's period, so it reduces to finitely many dyadic grid
evaluations done in integer arithmetic; tails telescope to 2^-n.

transfer(seq, eps) evaluates the modulus at eps/2 to pick the anchor depth
n_star, measures a ladder of Cauchy gaps (n_star against the next K deeper
members) exactly, and refuses with a contradiction naming the pair if any
measured gap reaches eps/2. The resulting limit certificate carries the
member certificates up to the anchor, the evidence records, the modulus
evaluation, and a deeper proxy expansion for evaluation, each with its own
digest, so the claim re-checks from the file alone.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from . import target as target_mod
from .basis import tent_family
from .certificate import (ApproximationCertificate, CertificateStore,
                          Construction, VerificationReport, assemble,
                          bound_is_honored, canonical_dumps, certificate_from_dict,
                          compute_digest, structural_findings, SCHEMA_VERSION)
from .certificate import verify as verify_approximation
from .errors import (CertificateParseError, ConfigurationError,
                     EvidenceContradictionError, IncompleteSequenceError)
from .quadrature import NormTag, SUP

SEQUENCE_TENT = "tent"
DYADIC_RULE = "ceil(log2(2/epsilon))"
LADDER_RUNGS = 8
PROXY_EXTRA = 12
MEMBER_TOLERANCE = 1e-15


# ----------------------------------------------------------------------------
# exact rational helpers
# ----------------------------------------------------------------------------

def frac_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def parse_frac(s: str) -> Fraction:
    num, den = s.split("/")
    return Fraction(int(num), int(den))


def exact_ceil_log2(q: Fraction) -> int:
    """Smallest integer n with 2**n >= q, by integer comparison only."""
    if q <= 0:
        raise ConfigurationError("ceil(log2) needs a positive argument")
    num, den = q.numerator, q.denominator
    n = num.bit_length() - den.bit_length() - 1

    def pow2_ge(k: int) -> bool:
        if k >= 0:
            return den << k >= num
        return den >= num << (-k)

    while not pow2_ge(n):
        n += 1
    while pow2_ge(n - 1):
        n -= 1
    return n


def tent_value_exact(k: int, x: Fraction) -> Fraction:
    """Unit tent at scale k: T_k(x) = dist(2^k x, nearest integer) * 2."""
    u = x * 2 ** k
    t = u - math.floor(u)
    return 2 * t if t <= Fraction(1, 2) else 2 * (1 - t)


def partial_sum_exact(n: int, x: Fraction) -> Fraction:
    return sum(Fraction(1, 2 ** k) * tent_value_exact(k, x) for k in range(n + 1))


def exact_pair_sup(n: int, m: int) -> Fraction:
    """sup |S_m - S_n| on [0, 1], exactly.

    The difference is a sum of scales n+1..m, so it repeats with period
    2^-(n+1) and is linear between consecutive multiples of 2^-(m+1).
    One period therefore holds the sup on its dyadic grid.
    """
    if not 0 <= n < m:
        raise ConfigurationError(f"need 0 <= n < m, got ({n}, {m})")
    best = Fraction(0)
    step = Fraction(1, 2 ** (m + 1))
    for j in range(2 ** (m - n) + 1):
        x = j * step
        d = abs(partial_sum_exact(m, x) - partial_sum_exact(n, x))
        if d > best:
            best = d
    return best


# ----------------------------------------------------------------------------
# the sequence and its members
# ----------------------------------------------------------------------------

def tent_certificate(n: int) -> ApproximationCertificate:
    """Member certificate: S_n written in the tent family, error zero."""
    if n < 0:
        raise ConfigurationError("partial sum depth must be nonnegative")
    f = target_mod.tent_partial_sum(n)
    fam = tent_family()
    terms = [(k, float(2.0 ** -k)) for k in range(n + 1)]
    construction = Construction("exact_representation",
                                f"terms copied through depth {n}; distance zero "
                                "by shared breakpoints",
                                supnorm_method="breakpoint_sup")
    return assemble(f.descriptor, fam, terms, NormTag(SUP, (0.0, 1.0)),
                    MEMBER_TOLERANCE, 0.0, construction)


@dataclass(frozen=True)
class Modulus:
    """Named rule mapping a rational tolerance to a depth."""

    rule: str
    fn: Callable[[Fraction], int]

    def __call__(self, epsilon: Fraction) -> int:
        return self.fn(epsilon)


def dyadic_modulus() -> Modulus:
    return Modulus(DYADIC_RULE, lambda eps: exact_ceil_log2(2 / eps))


@dataclass(frozen=True)
class CertifiedSequence:
    name: str
    generator: Callable[[int], ApproximationCertificate]
    modulus: Modulus
    pair_sup: Callable[[int, int], Fraction] | None = None

    def member(self, n: int) -> ApproximationCertificate:
        try:
            return self.generator(n)
        except ConfigurationError:
            raise
        except Exception as e:
            raise IncompleteSequenceError(f"member {n} unavailable: {e}") from None


def tent_sequence(modulus: Modulus | None = None) -> CertifiedSequence:
    return CertifiedSequence(SEQUENCE_TENT, tent_certificate,
                             modulus or dyadic_modulus(), exact_pair_sup)


# ----------------------------------------------------------------------------
# evidence
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class EvidenceRecord:
    pair: tuple[int, int]
    measured: str
    bound: str
    digest: str = ""

    def to_dict(self) -> dict:
        return {"pair": [int(self.pair[0]), int(self.pair[1])],
                "measured": self.measured, "bound": self.bound,
                "digest": self.digest}


def _sealed_evidence(pair, measured: Fraction, bound: Fraction) -> EvidenceRecord:
    rec = EvidenceRecord(pair, frac_str(measured), frac_str(bound))
    return dataclasses.replace(rec, digest=compute_digest(rec.to_dict()))


def check_pair(seq: CertifiedSequence, n: int, m: int,
               budget: Fraction) -> EvidenceRecord:
    """Measure |S_m - S_n| exactly; contradiction if it reaches the budget."""
    if seq.pair_sup is None:
        raise IncompleteSequenceError(
            f"sequence {seq.name!r} has no exact pair oracle")
    measured = seq.pair_sup(n, m)
    if not measured < budget:
        raise EvidenceContradictionError(n, m, frac_str(budget), frac_str(measured))
    return _sealed_evidence((n, m), measured, budget)


@dataclass(frozen=True)
class ModulusRecord:
    rule: str
    epsilon: str
    argument: str
    value: int
    digest: str = ""

    def to_dict(self) -> dict:
        return {"rule": self.rule, "epsilon": self.epsilon,
                "argument": self.argument, "value": int(self.value),
                "digest": self.digest}


def _sealed_modulus(rule: str, epsilon: Fraction, argument: Fraction,
                    value: int) -> ModulusRecord:
    rec = ModulusRecord(rule, frac_str(epsilon), frac_str(argument), value)
    return dataclasses.replace(rec, digest=compute_digest(rec.to_dict()))


# ----------------------------------------------------------------------------
# the limit certificate
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class LimitCertificate:
    sequence: str
    target_descriptor: str
    tolerance: float
    epsilon_exact: str
    n_star: int
    members: tuple[ApproximationCertificate, ...]
    ladder: tuple[EvidenceRecord, ...]
    modulus_record: ModulusRecord
    tail_bound: str
    tail_budget: str
    proxy_depth: int
    proxy_terms: tuple[tuple[int, float], ...]
    proxy_tail: str
    reported_error: float
    genealogy: tuple[str, ...]
    digest: str = ""

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "limit",
            "sequence": self.sequence,
            "target": self.target_descriptor,
            "tolerance": float(self.tolerance),
            "epsilon_exact": self.epsilon_exact,
            "n_star": int(self.n_star),
            "members": [c.to_dict() for c in self.members],
            "ladder": [r.to_dict() for r in self.ladder],
            "modulus": self.modulus_record.to_dict(),
            "tail_bound": self.tail_bound,
            "tail_budget": self.tail_budget,
            "proxy_depth": int(self.proxy_depth),
            "proxy_terms": [[int(k), float(a)] for k, a in self.proxy_terms],
            "proxy_tail": self.proxy_tail,
            "reported_error": float(self.reported_error),
            "genealogy": list(self.genealogy),
            "digest": self.digest,
        }

    def base(self) -> target_mod.TargetFunction:
        """The anchored partial sum the bound is stated for."""
        return self.members[-1].approximant()

    def approximant(self) -> target_mod.TargetFunction:
        """Deeper proxy expansion, within proxy_tail of the limit."""
        return target_mod.series(tent_family(), self.proxy_terms,
                                 descriptor=f"series:tent:n={self.proxy_depth}")


def transfer(seq: CertifiedSequence, epsilon: float,
             ladder: int = LADDER_RUNGS,
             proxy_extra: int = PROXY_EXTRA) -> LimitCertificate:
    """Anchor at the modulus depth for eps/2 and certify the limit to eps.

    The anchor member's own certificate plus the exact telescoped tail
    2^-n_star <= eps/2 gives the bound; the ladder of measured gaps is
    consistency evidence, not part of the bound, but any rung at or above
    eps/2 contradicts the modulus and aborts the transfer.
    """
    eps = Fraction(epsilon)
    if not 0 < eps < 1:
        raise ConfigurationError("limit transfer expects 0 < epsilon < 1")
    if ladder < 1:
        raise ConfigurationError("ladder needs at least one rung")
    half = eps / 2
    n_star = seq.modulus(half)
    if n_star < 1:
        n_star = 1
    mod_rec = _sealed_modulus(seq.modulus.rule, eps, half, n_star)
    members = tuple(seq.member(n) for n in range(1, n_star + 1))
    evidence = tuple(check_pair(seq, n_star, n_star + i, half)
                     for i in range(1, ladder + 1))
    tail = Fraction(1, 2 ** n_star)
    if not tail <= half:
        raise EvidenceContradictionError(n_star, n_star, frac_str(half),
                                         frac_str(tail))
    base = members[-1]
    reported = base.reported_error + float(tail)
    depth = n_star + proxy_extra
    proxy_terms = tuple((k, float(2.0 ** -k)) for k in range(depth + 1))
    proxy_tail = Fraction(1, 2 ** depth)
    genealogy = tuple(c.digest for c in members) \
        + tuple(r.digest for r in evidence) + (mod_rec.digest,)
    cert = LimitCertificate(
        seq.name, f"limit:{seq.name}", float(epsilon), frac_str(eps), n_star,
        members, evidence, mod_rec, frac_str(tail), frac_str(half),
        depth, proxy_terms, frac_str(proxy_tail), reported, genealogy)
    return dataclasses.replace(cert, digest=compute_digest(cert.to_dict()))


# ----------------------------------------------------------------------------
# serialization and verification
# ----------------------------------------------------------------------------

def serialize_limit(cert: LimitCertificate) -> bytes:
    return canonical_dumps(cert.to_dict())


def limit_from_dict(doc: dict) -> LimitCertificate:
    if not isinstance(doc, dict):
        raise CertificateParseError("$ is not an object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise CertificateParseError(
            f"unsupported schema_version {doc.get('schema_version')!r}")
    if doc.get("kind") != "limit":
        raise CertificateParseError(f"$.kind is {doc.get('kind')!r}, not 'limit'")
    try:
        members = tuple(certificate_from_dict(d, f"$.members[{i}]")
                        for i, d in enumerate(doc["members"]))
        ladder = tuple(
            EvidenceRecord((int(r["pair"][0]), int(r["pair"][1])),
                           str(r["measured"]), str(r["bound"]), str(r["digest"]))
            for r in doc["ladder"])
        mod = doc["modulus"]
        mod_rec = ModulusRecord(str(mod["rule"]), str(mod["epsilon"]),
                                str(mod["argument"]), int(mod["value"]),
                                str(mod["digest"]))
        return LimitCertificate(
            str(doc["sequence"]), str(doc["target"]), float(doc["tolerance"]),
            str(doc["epsilon_exact"]), int(doc["n_star"]), members, ladder,
            mod_rec, str(doc["tail_bound"]), str(doc["tail_budget"]),
            int(doc["proxy_depth"]),
            tuple((int(k), float(a)) for k, a in doc["proxy_terms"]),
            str(doc["proxy_tail"]), float(doc["reported_error"]),
            tuple(str(g) for g in doc["genealogy"]), str(doc["digest"]))
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise CertificateParseError(f"malformed limit certificate: {e!r}") from None


def _record_digest_ok(rec) -> bool:
    d = rec.to_dict()
    return rec.digest == compute_digest(d)


def verify_limit(cert: LimitCertificate, store: CertificateStore | None = None
                 ) -> VerificationReport:
    """Re-derive every exact quantity in a limit claim from scratch.

    Members are re-verified against their own partial sums, ladder gaps are
    re-measured in rational arithmetic and compared to the recorded strings,
    the modulus value is re-evaluated when the rule is the known dyadic one,
    and the telescoped tail is re-compared to its budget exactly.
    """
    notes: list[str] = []
    if cert.digest != compute_digest(cert.to_dict()):
        notes.append("digest does not match canonical content")
    try:
        reread = limit_from_dict(json.loads(serialize_limit(cert).decode("utf-8")))
        if serialize_limit(reread) != serialize_limit(cert):
            notes.append("serialization does not round-trip to identical bytes")
    except CertificateParseError as e:
        notes.append(f"round-trip failed: {e}")
    if cert.sequence != SEQUENCE_TENT:
        notes.append(f"unknown sequence {cert.sequence!r}; nothing can be re-measured")
    eps = parse_frac(cert.epsilon_exact)
    half = eps / 2
    if parse_frac(cert.tail_budget) != half:
        notes.append("tail budget is not half of epsilon")
    if len(cert.members) != cert.n_star:
        notes.append(f"expected {cert.n_star} members, found {len(cert.members)}")
    local_store = CertificateStore()
    for c in cert.members:
        local_store.add(c)
    if store is not None:
        for d in store.digests():
            local_store.add(store.get(d))
    expected_genealogy = tuple(c.digest for c in cert.members) \
        + tuple(r.digest for r in cert.ladder) + (cert.modulus_record.digest,)
    if cert.genealogy != expected_genealogy:
        notes.append("genealogy does not list members, ladder, modulus in order")
    if cert.sequence == SEQUENCE_TENT:
        for i, member in enumerate(cert.members, start=1):
            sub = structural_findings(member, local_store)
            notes.extend(f"member {i}: {n}" for n in sub)
            f_n = target_mod.tent_partial_sum(i)
            if member.target_descriptor != f_n.descriptor:
                notes.append(f"member {i} does not describe depth {i}")
                continue
            report = verify_approximation(member, f_n, local_store)
            if not report.verdict:
                notes.append(f"member {i} fails verification: {report.notes}")
        for rec in cert.ladder:
            if not _record_digest_ok(rec):
                notes.append(f"evidence {rec.pair} digest mismatch")
            n, m = rec.pair
            if n != cert.n_star:
                notes.append(f"evidence {rec.pair} is not anchored at {cert.n_star}")
                continue
            remeasured = exact_pair_sup(n, m)
            if frac_str(remeasured) != rec.measured:
                notes.append(
                    f"evidence {rec.pair}: recorded gap {rec.measured}, "
                    f"re-measured {frac_str(remeasured)}")
            if not remeasured < parse_frac(rec.bound):
                notes.append(
                    f"evidence {rec.pair}: measured gap {frac_str(remeasured)} "
                    f"reaches bound {rec.bound}")
        expected_proxy = tuple(
            (k, float(2.0 ** -k)) for k in range(cert.proxy_depth + 1))
        if cert.proxy_terms != expected_proxy:
            notes.append("proxy terms do not follow the sequence law")
    if not _record_digest_ok(cert.modulus_record):
        notes.append("modulus record digest mismatch")
    if cert.modulus_record.rule == DYADIC_RULE:
        arg = parse_frac(cert.modulus_record.argument)
        if exact_ceil_log2(2 / arg) != cert.modulus_record.value:
            notes.append("modulus value does not match its rule")
    else:
        notes.append(f"unrecognized modulus rule {cert.modulus_record.rule!r};"
                     " value taken as claimed")
    tail = Fraction(1, 2 ** cert.n_star)
    if parse_frac(cert.tail_bound) != tail:
        notes.append("tail bound is not the telescoped closed form")
    if not tail <= half:
        notes.append(f"tail {frac_str(tail)} exceeds budget {frac_str(half)}")
    recomputed = (cert.members[-1].reported_error if cert.members else float("inf")) \
        + float(tail)
    honored = bound_is_honored(recomputed, cert.reported_error, cert.tolerance)
    if not honored:
        notes.append(f"combined bound {recomputed:.6g} breaks the claim")
    structural_ok = not notes
    return VerificationReport(cert.digest, cert.reported_error, recomputed,
                              cert.tolerance, honored, structural_ok,
                              "exact_dyadic_tail", tuple(notes))
