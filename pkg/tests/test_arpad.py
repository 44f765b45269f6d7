import pytest

from ex2sm.arpad import DetectConfig, PatternResult, brute_force_oracle, detect, shallow_counts
from ex2sm.errors import ContractError, OracleGuardError, ParameterError
from ex2sm.ingest import Sequence
from ex2sm.lerp import ClassificationScheme
from ex2sm.rsa import build_partitions, build_restricted, merge_partitions, sort_partition

from conftest import PAIR, pos

FLAT = ClassificationScheme("ACGT", 0)


def merged(texts, lerp, scheme=FLAT):
    pieces = {}
    for i, t in enumerate(texts):
        for key, part in build_partitions(Sequence(i, "s", t.encode()), lerp, scheme).items():
            pieces.setdefault(key, []).append(sort_partition(part))
    return {key: merge_partitions(ps) for key, ps in pieces.items()}


def as_dict(results):
    return {r.pattern: r.positions for r in results}


def test_pair_includes_known_patterns():
    got = as_dict(detect(merged(PAIR, 4)[""], DetectConfig(4)))
    assert got["T"] == pos("0.2", "0.3", "0.5", "0.6", "1.2", "1.3")
    assert got["CATT"] == pos("0.0", "1.0")
    assert got["ATTA"] == pos("0.1", "0.4")


def test_single_string_exact_set():
    got = detect(merged(["CATTATTAGGA"], 4)[""], DetectConfig(4))
    counts = {r.pattern: r.count for r in got}
    assert counts == {"A": 4, "T": 4, "G": 2, "AT": 2, "TA": 2, "TT": 2, "ATT": 2, "TTA": 2, "ATTA": 2}
    assert [r.pattern for r in got] == sorted(counts)


def test_distinct_symbols_give_nothing():
    assert detect(merged(["ACGT"], 3)[""], DetectConfig(3)) == []


def test_restricted_second_round(pair_catalog):
    positions = pos("0.0", "1.0", "0.1", "0.4", "1.1", "0.2", "0.5")
    part = build_restricted(pair_catalog, positions, 6, FLAT)[""]
    got = detect(part, DetectConfig(6, spl=3))
    assert as_dict(got) == {"ATTA": pos("0.1", "0.4"), "CATT": pos("0.0", "1.0")}


def test_unsorted_partition_rejected():
    part = build_partitions(Sequence(0, "s", b"GATTACA"), 3, FLAT)[""]
    with pytest.raises(ContractError):
        detect(part, DetectConfig(3))


@pytest.mark.parametrize("kw", [dict(max_len=3, spl=3), dict(max_len=3, spl=-1), dict(max_len=3, min_count=1),
                                dict(max_len=3, min_report_len=0)])
def test_bad_config(kw):
    with pytest.raises(ParameterError):
        DetectConfig(**kw)


def test_min_count_and_min_len():
    part = merged(["AAAAAA"], 6)[""]
    got = {r.pattern: r.count for r in detect(part, DetectConfig(6, min_count=3, min_report_len=2))}
    assert got == {"AA": 5, "AAA": 4, "AAAA": 3}


def test_result_count_must_match():
    with pytest.raises(ParameterError):
        PatternResult("A", 3, pos("0.0", "0.1"))


def test_shallow_assembles_short_patterns():
    scheme = ClassificationScheme("ACGT", 2)
    parts = merged(PAIR, 4, scheme)
    got = as_dict(shallow_counts(parts, scheme, DetectConfig(4)))
    assert got["T"] == pos("0.2", "0.3", "0.5", "0.6", "1.2", "1.3")
    assert got["G"] == pos("0.8", "0.9")
    assert set(got) == {"A", "C", "G", "T"}


def test_shallow_level_one_is_empty():
    scheme = ClassificationScheme("ACGT", 1)
    assert shallow_counts(merged(PAIR, 4, scheme), scheme, DetectConfig(4)) == []


def test_shallow_needs_every_class():
    scheme = ClassificationScheme("ACGT", 2)
    parts = merged(PAIR, 4, scheme)
    del parts["TT"]
    with pytest.raises(ContractError):
        shallow_counts(parts, scheme, DetectConfig(4))


def test_oracle_examples():
    assert as_dict(brute_force_oracle(["AAA"])) == {"A": pos("0.0", "0.1", "0.2"), "AA": pos("0.0", "0.1")}
    assert brute_force_oracle([]) == []
    assert max(len(r.pattern) for r in brute_force_oracle(["CATTATTAGGA"])) == 4


def test_oracle_guard():
    with pytest.raises(OracleGuardError):
        brute_force_oracle(["A" * 10_001])


def test_oracle_length_window():
    got = brute_force_oracle(["CATTATTAGGA"], min_len=2, max_len=3)
    assert {len(r.pattern) for r in got} == {2, 3}
