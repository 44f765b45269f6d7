"""Acceptance checks, one per criterion, each printing a PASS/FAIL line.

Run on their own with ``pytest tests/test_acceptance.py -s``; the lines are
also repeated in the pytest terminal summary.
"""

import random
import shutil
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from ex2sm.arpad import DetectConfig, brute_force_oracle, detect
from ex2sm.ingest import Sequence, build_catalog, catalog_from_strings
from ex2sm.lerp import ClassificationScheme, compute_lerp
from ex2sm.pipeline import PipelineConfig, load_report, run_ex2sm
from ex2sm.rsa import build_partitions, merge_partitions, sort_partition
from ex2sm.store import cross_sequence_share, query_pattern, read_results, write_results

from conftest import PAIR, pos

LINES = []


def verdict(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    LINES.append(line)
    print(line)
    assert ok, line


def as_dict(results):
    return {r.pattern: r.positions for r in results}


def test_criterion_1_two_string_fixture(tmp_path):
    cat = catalog_from_strings(PAIR, tmp_path / "c")
    checks, times = [], []
    for lerp in (4, 5, 11):
        t0 = time.perf_counter()
        got = as_dict(run_ex2sm(cat, PipelineConfig(lerp=lerp, level=1), tmp_path / f"r{lerp}"))
        times.append(time.perf_counter() - t0)
        checks.append(
            got.get("T") == pos("0.2", "0.3", "0.5", "0.6", "1.2", "1.3")
            and got.get("ATTA") == pos("0.1", "0.4")
            and got.get("CATT") == pos("0.0", "1.0")
        )
    verdict(1, all(checks) and max(times) < 1.0, f"T/ATTA/CATT exact for lerp 4, 5, 11; slowest run {max(times):.3f}s")


def _round_file_patterns(out, r):
    found = []
    for path in sorted((out / "rounds" / f"r{r}").glob("*.arpad")):
        found.extend(read_results(path))
    return found


def test_criterion_2_iterative_deepening(tmp_path):
    cat = catalog_from_strings(PAIR, tmp_path / "c")
    out = tmp_path / "r"
    t0 = time.perf_counter()
    run_ex2sm(cat, PipelineConfig(lerp=3, factor=2, level=0, keep_intermediate=True), out)
    elapsed = time.perf_counter() - t0
    report = load_report(out)
    first = _round_file_patterns(out, 1)
    second = _round_file_patterns(out, 2)
    ceiling = {r.pattern: r.positions for r in first if len(r.pattern) == 3}
    names = [r.pattern for r in first + second]
    ok = (
        len(report["rounds"]) == 2
        and ceiling == {"ATT": pos("0.1", "0.4", "1.1"), "CAT": pos("0.0", "1.0"), "TTA": pos("0.2", "0.5")}
        and as_dict(second) == {"ATTA": pos("0.1", "0.4"), "CATT": pos("0.0", "1.0")}
        and len(names) == len(set(names))
        and elapsed < 1.0
    )
    verdict(2, ok, f"{len(report['rounds'])} rounds, ceiling {sorted(ceiling)}, round 2 {sorted(as_dict(second))}, "
                   f"{elapsed:.3f}s")


# ---------------------------------------------------------------- random catalogs

SEED = 20241015
N_CATALOGS = 200


def _random_case(i):
    rng = random.Random(SEED + i)
    alphabet = rng.choice(["AC", "ACGT"])
    n_seqs = rng.randint(1, 4)
    total = rng.randint(50, 2000)
    cuts = sorted(rng.sample(range(1, total), n_seqs - 1))
    lengths = [b - a for a, b in zip([0] + cuts, cuts + [total])]
    texts = ["".join(rng.choice(alphabet) for _ in range(k)) for k in lengths]
    return dict(seed=SEED + i, alphabet=alphabet, texts=texts, lerp=rng.randint(1, 8), level=rng.randint(0, 3))


@pytest.fixture(scope="module")
def random_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("random")
    runs = []
    pipeline_seconds = 0.0
    for i in range(N_CATALOGS):
        case = _random_case(i)
        cat = catalog_from_strings(case["texts"], root / f"c{i}", case["alphabet"])
        t0 = time.perf_counter()
        store = run_ex2sm(cat, PipelineConfig(lerp=case["lerp"], level=case["level"]), root / f"r{i}")
        got = sorted(store, key=lambda r: r.pattern)
        pipeline_seconds += time.perf_counter() - t0
        runs.append(dict(case, catalog=cat, store=store, got=got, out=root / f"r{i}"))
    return runs, pipeline_seconds


def test_criterion_3_oracle_equivalence(random_runs):
    runs, seconds = random_runs
    t0 = time.perf_counter()
    bad = [r["seed"] for r in runs if r["got"] != brute_force_oracle(r["catalog"])]
    total = seconds + time.perf_counter() - t0
    verdict(3, not bad and total < 60, f"{len(runs) - len(bad)}/{len(runs)} catalogs equal the oracle, "
                                       f"{total:.1f}s total, mismatching seeds {bad[:5]}")


def test_criterion_5_occurrence_sum(random_runs):
    runs, _ = random_runs
    failures = []
    checked = 0
    for run in runs:
        texts = run["texts"]
        longest = max((len(r.pattern) for r in run["got"]), default=0)
        by_len = Counter()
        for r in run["got"]:
            by_len[len(r.pattern)] += r.count
        # past longest + 1 no window repeats, so the identity is the plain window count
        for k in range(1, longest + 2):
            windows = Counter(t[i : i + k] for t in texts for i in range(len(t) - k + 1))
            singletons = sum(1 for c in windows.values() if c == 1)
            checked += 1
            if by_len[k] + singletons != sum(max(0, len(t) - k + 1) for t in texts):
                failures.append((run["seed"], k))
    verdict(5, not failures, f"{checked} (catalog, length) pairs checked, failures {failures[:5]}")


def test_criterion_9_store_round_trip(random_runs, tmp_path):
    runs, _ = random_runs
    rng = random.Random(SEED)
    missing = wrong = absent_checked = absent_wrong = 0
    rewrite_mismatch = []
    for run in runs:
        store = run["store"]
        for r in run["got"]:
            hit = query_pattern(store, r.pattern)
            if hit is None:
                missing += 1
            elif hit != r:
                wrong += 1
        present = {r.pattern for r in run["got"]}
        for _ in range(5):
            while True:
                probe = "".join(rng.choice(run["alphabet"]) for _ in range(rng.randint(1, 14)))
                if probe not in present:
                    break
            absent_checked += 1
            absent_wrong += query_pattern(store, probe) is not None
        for path in sorted(Path(run["out"]).glob("*.arpad")):
            data = path.read_bytes()
            copy = tmp_path / path.name
            write_results(read_results(path), copy)
            if copy.read_bytes() != data:
                rewrite_mismatch.append(str(path))
    n_patterns = sum(len(r["got"]) for r in runs)
    ok = not (missing or wrong or absent_wrong or rewrite_mismatch) and absent_checked == 1000
    verdict(9, ok, f"{n_patterns} patterns queried ({missing} missing, {wrong} differing), "
                   f"{absent_checked} absent probes ({absent_wrong} false hits), "
                   f"{len(rewrite_mismatch)} files not byte-identical on re-read")


# ---------------------------------------------------------------- formula and filters


def test_criterion_4_lerp_formula():
    t0 = time.perf_counter()
    exact = compute_lerp(2, 2, 1) == 1 and compute_lerp(10**6, 4, 0.001) == 25
    ns = [10**e for e in range(2, 10)]
    ps = [10.0**-e for e in range(0, 7)]
    monotone = True
    for m in (2, 4, 20):
        grid = [[compute_lerp(n, m, p) for p in ps] for n in ns]
        monotone &= all(grid[i][j] <= grid[i + 1][j] for i in range(len(ns) - 1) for j in range(len(ps)))
        monotone &= all(grid[i][j] <= grid[i][j + 1] for i in range(len(ns)) for j in range(len(ps) - 1))
    for n in ns:
        for p in ps:
            monotone &= compute_lerp(n, 2, p) >= compute_lerp(n, 4, p) >= compute_lerp(n, 20, p)
    elapsed = time.perf_counter() - t0
    verdict(4, exact and monotone and elapsed < 1.0, f"known values exact, grid monotone, {elapsed * 1000:.1f}ms")


def test_criterion_6_spl_filter():
    rng = np.random.default_rng(SEED)
    mismatches = 0
    for i in range(50):
        alphabet = "AC" if i % 2 else "ACGT"
        n_seqs = int(rng.integers(1, 4))
        lerp = int(rng.integers(2, 10))
        scheme = ClassificationScheme(alphabet, int(rng.integers(0, 3)))
        pieces = {}
        for s in range(n_seqs):
            text = "".join(rng.choice(list(alphabet), int(rng.integers(1, 400))))
            for key, part in build_partitions(Sequence(s, "s", text.encode()), lerp, scheme).items():
                pieces.setdefault(key, []).append(sort_partition(part))
        key = max(pieces, key=lambda k: sum(len(p) for p in pieces[k]))
        part = merge_partitions(pieces[key])
        spl = int(rng.integers(1, lerp))
        full = detect(part, DetectConfig(lerp))
        mismatches += detect(part, DetectConfig(lerp, spl=spl)) != [r for r in full if len(r.pattern) > spl]
    verdict(6, mismatches == 0, f"50 random partitions, {mismatches} mismatches")


# ---------------------------------------------------------------- scale


SIZES = (1_000_000, 4_000_000, 16_000_000)


def test_criterion_7_scale(tmp_path):
    rng = np.random.default_rng(SEED)
    walls, notes, disk_ok = [], [], True
    for n in SIZES:
        symbols = np.frombuffer(b"ACGT", np.uint8)[rng.integers(0, 4, n)].tobytes()
        cat = build_catalog([Sequence(0, "random", symbols)], tmp_path / f"c{n}")
        out = tmp_path / f"r{n}"
        t0 = time.perf_counter()
        run_ex2sm(cat, PipelineConfig(level=2), out)
        walls.append(time.perf_counter() - t0)
        report = load_report(out)
        lerp = report["rounds"][0]["lerp"]
        bound = n * lerp * 1.2
        disk_ok &= report["peak_partition_bytes"] <= bound
        notes.append(f"{n // 10**6}MB {walls[-1]:.1f}s lerp {lerp} peak disk {report['peak_partition_bytes']}")
        shutil.rmtree(out)
        shutil.rmtree(tmp_path / f"c{n}")
    ratios = [b / a for a, b in zip(walls, walls[1:])]
    ok = all(r <= 5.0 for r in ratios) and disk_ok and walls[-1] < 600
    verdict(7, ok, "; ".join(notes) + f"; ratios {', '.join(f'{r:.2f}' for r in ratios)}")


# ---------------------------------------------------------------- cross-sequence share


def test_criterion_8_planted_pattern(tmp_path):
    rng = np.random.default_rng(SEED)
    size, width = 100_000, 40
    while True:
        planted = np.frombuffer(b"ACGT", np.uint8)[rng.integers(0, 4, width)].tobytes()
        seqs = [bytearray(np.frombuffer(b"ACGT", np.uint8)[rng.integers(0, 4, size)].tobytes()) for _ in range(2)]
        at = [int(rng.integers(0, size - width)) for _ in range(2)]
        for s, a in zip(seqs, at):
            s[a : a + width] = planted
        # planted exactly once per sequence and nowhere else
        if all(bytes(s).count(planted) == 1 for s in seqs):
            break
    cat = build_catalog([Sequence(i, f"s{i}", bytes(s)) for i, s in enumerate(seqs)], tmp_path / "c")
    store = run_ex2sm(cat, PipelineConfig(level=1), tmp_path / "r")
    planted_text = planted.decode()
    hit = query_pattern(store, planted_text)
    planted_ok = hit is not None and hit.count == 2 and {p.seq for p in hit.positions} == {0, 1}
    # every prefix of the planted pattern that occurs exactly twice is counted as cross-sequence
    twice_prefixes = []
    for k in range(1, width + 1):
        r = query_pattern(store, planted_text[:k])
        if r is not None and r.count == 2:
            twice_prefixes.append(r)
    prefixes_ok = all(p.sequences == {0, 1} for p in twice_prefixes)
    twice = [r for r in store if r.count == 2]
    cross = sum(len(r.sequences) > 1 for r in twice)
    share = cross_sequence_share(store, 2)
    share_ok = share == pytest.approx(cross / len(twice))
    ok = planted_ok and prefixes_ok and share_ok
    verdict(8, ok, f"planted {width}-mer at {at} counted cross-sequence; {len(twice_prefixes)} twice-occurring "
                   f"prefixes all cross-sequence; share {share:.4f} over {len(twice)} patterns")
