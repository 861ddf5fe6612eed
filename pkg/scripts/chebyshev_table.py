"""Degree sweep for the weighted coefficient pipeline.

Prints the coefficient table for a smooth target at one degree, then sweeps
degrees to show the reported sup bound falling and the independent recheck
staying inside it.

    python3 scripts/chebyshev_table.py --target builtin:exp --max-degree 10
"""

import argparse
import sys

sys.path.insert(0, "src")

from certapprox import target
from certapprox.approximate import ExtractionSettings, approximate_chebyshev
from certapprox.certificate import verify
from certapprox.errors import ToleranceViolated


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--target", default="builtin:exp")
    ap.add_argument("--max-degree", type=int, default=10)
    ap.add_argument("--table-degree", type=int, default=4,
                    help="degree whose full coefficient table is printed")
    args = ap.parse_args()

    f = target.resolve_spec(args.target)
    loose = ExtractionSettings(1.0)

    cert = approximate_chebyshev(f, args.table_degree, loose)
    print(f"coefficients of {f.descriptor} at degree {args.table_degree}:")
    for j, a in cert.terms:
        print(f"  a_{j} = {a: .17g}")
    print()

    print(f"{'deg':>4} {'reported':>13} {'recomputed':>13} {'ratio':>8}  verdict")
    prev = None
    for d in range(0, args.max_degree + 1):
        try:
            cert = approximate_chebyshev(f, d, loose)
        except ToleranceViolated as e:
            print(f"{d:>4} {'-':>13} {e.achieved:>13.6e}    miss")
            continue
        rep = verify(cert, f)
        ratio = prev / cert.reported_error if prev else float("nan")
        print(f"{d:>4} {cert.reported_error:>13.6e} {rep.recomputed_error:>13.6e}"
              f" {ratio:>8.2f}  {'PASS' if rep.verdict else 'FAIL'}")
        prev = cert.reported_error
    return 0


if __name__ == "__main__":
    sys.exit(main())
