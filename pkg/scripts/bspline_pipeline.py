"""Knot sweep and full round trip for the sobolev spline route.

Shows the W12 error decaying as knots are added, then runs one fit through
serialization, reload, and independent verification.

    python3 scripts/bspline_pipeline.py --target builtin:sinpi --eps 1e-3
"""

import argparse
import json
import sys

sys.path.insert(0, "src")

from certapprox import quadrature, target
from certapprox.approximate import ExtractionSettings, approximate_gram
from certapprox.basis import cubic_bspline_family
from certapprox.certificate import deserialize, serialize, verify


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--target", default="builtin:sinpi")
    ap.add_argument("--eps", type=float, default=1e-3)
    ap.add_argument("--min-knots", type=int, default=4)
    ap.add_argument("--max-knots", type=int, default=14)
    ap.add_argument("--out", default="spline_demo.uelat.json")
    args = ap.parse_args()

    f = target.resolve_spec(args.target)
    norm = quadrature.w12_norm(f.domain)

    print(f"{'m':>4} {'terms':>6} {'w12 error':>13} {'ratio':>7}")
    prev = None
    best = None
    for m in range(args.min_knots, args.max_knots + 1):
        fam = cubic_bspline_family(m, f.domain)
        cert = approximate_gram(f, fam.interior_elements(), norm,
                                ExtractionSettings(1.0))
        ratio = prev / cert.reported_error if prev else float("nan")
        print(f"{m:>4} {len(cert.terms):>6} {cert.reported_error:>13.6e}"
              f" {ratio:>7.2f}")
        prev = cert.reported_error
        if best is None and cert.reported_error < args.eps:
            best = m

    if best is None:
        print(f"no knot count up to {args.max_knots} reaches {args.eps:g}")
        return 2

    print(f"\nsmallest family under {args.eps:g}: m = {best}")
    fam = cubic_bspline_family(best, f.domain)
    cert = approximate_gram(f, fam.interior_elements(), norm,
                            ExtractionSettings(args.eps))
    data = serialize(cert)
    with open(args.out, "wb") as fh:
        fh.write(data)
    print(f"wrote {args.out} ({len(data)} bytes)")

    with open(args.out, "rb") as fh:
        reloaded = deserialize(fh.read())
    assert serialize(reloaded) == data
    rep = verify(reloaded, f)
    print(f"reloaded and reverified: {'PASS' if rep.verdict else 'FAIL'}"
          f" (recomputed {rep.recomputed_error:.6e} via {rep.method})")
    return 0 if rep.verdict else 3


if __name__ == "__main__":
    sys.exit(main())
