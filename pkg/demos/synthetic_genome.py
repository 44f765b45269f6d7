"""Random DNA with planted repeats, run end to end.

Copies of a few motifs are pasted into random chromosomes.  Every long
reported pattern should come from one of them (a copy may extend a little
where its flanks happen to agree).

    python demos/synthetic_genome.py --length 2000000 --chromosomes 3
"""

import argparse
import tempfile
import time
from pathlib import Path

import numpy as np

from ex2sm import (
    PipelineConfig, Sequence, build_catalog, cross_sequence_share, load_report, run_ex2sm,
    stats_by_length, top_patterns,
)

DNA = np.frombuffer(b"ACGT", dtype=np.uint8)


def plant(rng, chromosomes, n_motifs, width, copies):
    """Paste motif copies; returns the (chromosome, offset) of every copy."""
    pasted = []
    for _ in range(n_motifs):
        motif = DNA[rng.integers(0, 4, width)]
        for _ in range(copies):
            c = int(rng.integers(len(chromosomes)))
            at = int(rng.integers(0, len(chromosomes[c]) - width))
            chromosomes[c][at : at + width] = motif
            pasted.append((c, at))
    return pasted


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--length", type=int, default=1_000_000, help="total symbols")
    ap.add_argument("--chromosomes", type=int, default=3)
    ap.add_argument("--motifs", type=int, default=4)
    ap.add_argument("--width", type=int, default=60)
    ap.add_argument("--copies", type=int, default=3)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    size = args.length // args.chromosomes
    chromosomes = [DNA[rng.integers(0, 4, size)] for _ in range(args.chromosomes)]
    pasted = plant(rng, chromosomes, args.motifs, args.width, args.copies)

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        catalog = build_catalog(
            [Sequence(i, f"chr{i + 1}", c.tobytes()) for i, c in enumerate(chromosomes)], tmp / "catalog"
        )
        t0 = time.perf_counter()
        store = run_ex2sm(catalog, PipelineConfig(), tmp / "store")
        wall = time.perf_counter() - t0
        report = load_report(tmp / "store")

        print(f"{catalog.total_length} symbols in {wall:.1f}s, level {report['level']}, "
              f"windows {[s['lerp'] for s in report['rounds']]}")
        rows = stats_by_length(store)
        for row in rows[:12]:
            print(f"  length {row.length:>3}: {row.patterns:>9} patterns {row.occurrences:>10} occurrences")
        if len(rows) > 12:
            print(f"  ... up to length {rows[-1].length}")

        # random DNA of this size has no chance repeat anywhere near the motif width
        width = args.width
        long_ones = [r for key in store.class_keys for r in top_patterns(store, width, key, 100)]

        def inside(p):
            return any(p.seq == c and abs(p.off - at) < width for c, at in pasted)

        planted = sum(all(map(inside, r.positions)) for r in long_ones)
        print(f"{len(long_ones)} repeats of length {width}, {planted} of them planted motifs")
        share = cross_sequence_share(store, 2)
        print("share of twice-seen patterns spanning chromosomes:", "n/a" if share is None else f"{share:.3f}")


if __name__ == "__main__":
    main()
