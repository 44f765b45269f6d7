"""Every repeated pattern of two short strings, printed in full.

    python demos/worked_example.py
"""

import tempfile
from pathlib import Path

from ex2sm import PipelineConfig, catalog_from_strings, query_pattern, run_ex2sm, stats_by_length

TEXTS = ["CATTATTAGGA", "CATTCA"]


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        catalog = catalog_from_strings(TEXTS, tmp / "catalog")
        store = run_ex2sm(catalog, PipelineConfig(lerp=4, level=1), tmp / "store")

        for i, text in enumerate(TEXTS):
            print(f"sequence {i}: {text}")
        print()
        print("pattern  count  positions")
        for r in sorted(store, key=lambda r: (len(r.pattern), r.pattern)):
            print(f"{r.pattern:<8} {r.count:>5}  {','.join(map(str, r.positions))}")

        print()
        print("length  patterns  occurrences")
        for row in stats_by_length(store):
            print(f"{row.length:>6}  {row.patterns:>8}  {row.occurrences:>11}")

        # the longest repeat; nothing of length five repeats
        print()
        for probe in ("ATTA", "ATTAG"):
            hit = query_pattern(store, probe)
            print(probe, "->", "absent" if hit is None else f"{hit.count} occurrences")


if __name__ == "__main__":
    main()
