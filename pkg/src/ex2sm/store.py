"""Persistent pattern results and the metadata analyses run over them.

Result file (one per class, ``<classkey>.arpad``), sorted by pattern::

    <pattern>\\t<count>\\t<seq>.<off>[,<seq>.<off>]...

Occurrence lists longer than :data:`SPILL_THRESHOLD` are moved to
``<classkey>.arpad.pos`` and the main line carries ``@<byte-offset>`` instead.
Since every symbol sorts after the tab byte, line order equals pattern order.
"""

import heapq
import json
import mmap
import os
import shutil
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

from .arpad import PatternResult
from .errors import ContractError, ParameterError, StorageError
from .lerp import RESIDUAL_KEY, ClassificationScheme
from .rsa import Position, partition_filename

SPILL_THRESHOLD = 100_000
SHALLOW_KEY = "_shallow"
INDEX = "store.json"


def result_filename(key: str) -> str:
    return partition_filename(key, ".arpad")


def format_positions(positions: Iterable[Position]) -> str:
    return ",".join(f"{p.seq}.{p.off}" for p in positions)


def parse_positions(text: str) -> Tuple[Position, ...]:
    if not text:
        return ()
    return tuple(Position.parse(t) for t in text.split(","))


class ResultWriter:
    """Append patterns in strictly ascending order, spilling long occurrence lists."""

    def __init__(self, path):
        self.path = Path(path)
        self.pos_path = Path(str(path) + ".pos")
        try:
            self._fh = open(self.path, "wb")
        except OSError as exc:
            raise StorageError(f"cannot create result file {path}: {exc}") from exc
        self._pos = None
        self._pos_offset = 0
        self._last: Optional[str] = None
        self.summary = {"patterns": 0, "min": None, "max": None, "lengths": {}}

    def _check_order(self, first: str, last: str) -> None:
        if self._last is not None and first <= self._last:
            raise ContractError(f"results out of order: {first!r} after {self._last!r}")
        self._last = last
        self.summary["min"] = self.summary["min"] or first
        self.summary["max"] = last

    def tally(self, length: int, patterns: int, occurrences: int) -> None:
        row = self.summary["lengths"].setdefault(str(length), [0, 0])
        row[0] += patterns
        row[1] += occurrences
        self.summary["patterns"] += patterns

    def write_line(self, pattern: str, count: int, positions, tally: bool = True) -> None:
        """``positions`` is the comma-joined text (str or bytes, no newline)."""
        self._check_order(pattern, pattern)
        if isinstance(positions, str):
            positions = positions.encode("ascii")
        if count > SPILL_THRESHOLD:
            if self._pos is None:
                self._pos = open(self.pos_path, "wb")
            self._pos.write(positions + b"\n")
            ref = self._pos_offset
            self._pos_offset += len(positions) + 1
            positions = b"@%d" % ref
        self._fh.write(b"%s\t%d\t%s\n" % (pattern.encode("ascii"), count, positions))
        if tally:
            self.tally(len(pattern), 1, count)

    def write_rendered(self, data: bytes, first: str, last: str) -> None:
        """Append pre-rendered, already ordered lines holding no spilled lists.

        The caller accounts for them with :meth:`tally`.
        """
        self._check_order(first, last)
        self._fh.write(data)

    def write(self, result: PatternResult) -> None:
        self.write_line(result.pattern, result.count, format_positions(result.positions))

    def close(self) -> dict:
        self._fh.close()
        if self._pos is not None:
            self._pos.close()
        return self.summary

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_results(results: Iterable[PatternResult], path) -> dict:
    with ResultWriter(path) as w:
        for r in results:
            w.write(r)
    return w.summary


def _split(line: str):
    pattern, count, rest = line.rstrip("\n").split("\t")
    return pattern, int(count), rest


def _resolve(rest: str, pos_path) -> str:
    if not rest.startswith("@"):
        return rest
    with open(pos_path, "rb") as fh:
        fh.seek(int(rest[1:]))
        return fh.readline().decode("ascii").rstrip("\n")


def iter_lines(path) -> Iterator[Tuple[str, int, str]]:
    """Yield ``(pattern, count, positions_text)`` with spilled lists resolved lazily."""
    pos_path = str(path) + ".pos"
    with open(path) as fh:
        for line in fh:
            pattern, count, rest = _split(line)
            yield pattern, count, rest if not rest.startswith("@") else _LazyPositions(rest, pos_path)


class _LazyPositions(str):
    """A spilled ``@offset`` reference that materializes on :meth:`resolve`."""

    def __new__(cls, ref, pos_path):
        obj = super().__new__(cls, ref)
        obj.pos_path = pos_path
        return obj

    def resolve(self) -> str:
        return _resolve(str(self), self.pos_path)


def _materialize(rest) -> str:
    return rest.resolve() if isinstance(rest, _LazyPositions) else rest


def read_results(path) -> List[PatternResult]:
    return [
        PatternResult(p, c, parse_positions(_materialize(rest))) for p, c, rest in iter_lines(path)
    ]


def merge_result_files(sources: List[Path], dest: Path) -> dict:
    """K-way merge of sorted result files with disjoint pattern sets."""
    with ResultWriter(dest) as w:
        for pattern, count, rest in heapq.merge(*(iter_lines(s) for s in sources), key=lambda t: t[0]):
            w.write_line(pattern, count, _materialize(rest))
    return w.summary


# ------------------------------------------------------------------ the store


@dataclass(frozen=True)
class LengthStatsRow:
    length: int
    patterns: int
    occurrences: int
    cumulative: int


class ResultsStore:
    """Read-only view of a finalized results directory."""

    def __init__(self, root):
        self.root = Path(root)
        index_path = self.root / INDEX
        if not index_path.exists():
            raise ContractError(f"{self.root} is not a finalized results store")
        with open(index_path) as fh:
            self.index = json.load(fh)
        if not self.index.get("finalized"):
            raise ContractError(f"{self.root} is not finalized")
        self.scheme = ClassificationScheme(self.index["alphabet"], self.index["level"])

    @property
    def level(self) -> int:
        return self.scheme.level

    @property
    def n_sequences(self) -> int:
        return self.index["n_sequences"]

    @property
    def class_keys(self) -> List[str]:
        keys = [k for k in self.scheme.keys if k != RESIDUAL_KEY] if self.level else [""]
        return keys + [SHALLOW_KEY]

    def path_for(self, key: str) -> Path:
        return self.root / result_filename(key)

    def files(self) -> List[Path]:
        return [p for p in (self.path_for(k) for k in self.class_keys) if p.exists()]

    def route(self, pattern: str) -> str:
        if len(pattern) < self.level:
            return SHALLOW_KEY
        return pattern[: self.level]

    def __iter__(self) -> Iterator[PatternResult]:
        for path in self.files():
            yield from read_results(path)

    def query(self, pattern: str) -> Optional[PatternResult]:
        return query_pattern(self, pattern)


def _bisect(mm, key: bytes) -> int:
    """Byte offset of the first line whose pattern is >= ``key``."""
    lo, hi = 0, len(mm)
    while lo < hi:
        mid = (lo + hi) // 2
        start = mm.rfind(b"\n", lo, mid) + 1 if mid > lo else lo
        if start < lo:
            start = lo
        tab = mm.find(b"\t", start)
        if mm[start:tab] < key:
            lo = mm.find(b"\n", start) + 1
        else:
            hi = start
    return lo


def query_pattern(store: ResultsStore, pattern: str) -> Optional[PatternResult]:
    """Binary search the class file the pattern routes to; ``None`` when absent."""
    if not pattern:
        raise ParameterError("query pattern must be non-empty")
    pattern = pattern.upper()
    if set(pattern) - set(store.scheme.alphabet):
        return None
    path = store.path_for(store.route(pattern))
    if not path.exists() or path.stat().st_size == 0:
        return None
    key = pattern.encode("ascii")
    with open(path, "rb") as fh, mmap.mmap(fh.fileno(), 0, access=mmap.ACCESS_READ) as mm:
        at = _bisect(mm, key)
        if at >= len(mm):
            return None
        end = mm.find(b"\n", at)
        line = mm[at:end].decode("ascii")
    found, count, rest = _split(line)
    if found != pattern:
        return None
    return PatternResult(found, count, parse_positions(_resolve(rest, str(path) + ".pos")))


def stats_by_length(store: ResultsStore) -> List[LengthStatsRow]:
    tally: Dict[int, List[int]] = defaultdict(lambda: [0, 0])
    for summary in store.index["classes"].values():
        for length, (n, occ) in summary["lengths"].items():
            tally[int(length)][0] += n
            tally[int(length)][1] += occ
    rows, cumulative = [], 0
    for length in sorted(tally):
        n, occ = tally[length]
        cumulative += n
        rows.append(LengthStatsRow(length, n, occ, cumulative))
    return rows


def cross_sequence_share(store: ResultsStore, occurrence_count: int = 2) -> Optional[float]:
    """Fraction of patterns with exactly ``occurrence_count`` occurrences spread over >1 sequence.

    Returns ``None`` when no pattern has that count.
    """
    if store.n_sequences < 2:
        raise ParameterError("cross-sequence share needs a catalog with at least 2 sequences")
    total = cross = 0
    for pattern, count, rest in _iter_count(store, occurrence_count):
        total += 1
        seqs = {p.split(".", 1)[0] for p in _materialize(rest).split(",")}
        cross += len(seqs) > 1
    return cross / total if total else None


def _iter_count(store, occurrence_count):
    for path in store.files():
        for pattern, count, rest in iter_lines(path):
            if count == occurrence_count:
                yield pattern, count, rest


def top_patterns(store: ResultsStore, length: int, class_key: str, k: int) -> List[PatternResult]:
    """The ``k`` most frequent patterns of ``length`` in one class; ties by pattern."""
    if class_key not in store.class_keys:
        raise ParameterError(f"unknown class {class_key!r}")
    if k <= 0:
        return []
    summary = store.index["classes"].get(class_key)
    if not summary or str(length) not in summary["lengths"]:
        return []
    path = store.path_for(class_key)
    best = heapq.nsmallest(
        k,
        ((-c, p, rest) for p, c, rest in iter_lines(path) if len(p) == length),
        key=lambda t: (t[0], t[1]),
    )
    return [PatternResult(p, -c, parse_positions(_materialize(rest))) for c, p, rest in best]


class StoreBuilder:
    """Collect per-round class result files and finalize them into a store."""

    def __init__(self, root, scheme: ClassificationScheme, n_sequences: int, meta: Optional[dict] = None):
        self.root = Path(root)
        self.scheme = scheme
        self.n_sequences = n_sequences
        self.meta = meta or {}
        self.parts: Dict[str, List[Tuple[Path, dict]]] = defaultdict(list)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageError(f"cannot create store {root}: {exc}") from exc
        if (self.root / INDEX).exists():
            (self.root / INDEX).unlink()

    def round_dir(self, r: int) -> Path:
        d = self.root / "rounds" / f"r{r}"
        d.mkdir(parents=True, exist_ok=True)
        return d

    def add(self, key: str, path: Path, summary: dict) -> None:
        if summary["patterns"]:
            self.parts[key].append((Path(path), summary))
        else:
            _remove(path)

    def finalize(self, keep_intermediate: bool = False) -> ResultsStore:
        classes = {}
        for key in sorted(self.parts):
            dest = self.root / result_filename(key)
            _remove(dest)
            sources = self.parts[key]
            if len(sources) == 1 and not keep_intermediate:
                src, summary = sources[0]
                os.replace(src, dest)
                if Path(str(src) + ".pos").exists():
                    os.replace(str(src) + ".pos", str(dest) + ".pos")
            else:
                summary = merge_result_files([s for s, _ in sources], dest)
            classes[key] = summary
        if not keep_intermediate:
            shutil.rmtree(self.root / "rounds", ignore_errors=True)
        index = {
            "finalized": True,
            "alphabet": self.scheme.alphabet,
            "level": self.scheme.level,
            "n_sequences": self.n_sequences,
            "classes": classes,
            **self.meta,
        }
        with open(self.root / INDEX, "w") as fh:
            json.dump(index, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return ResultsStore(self.root)


def _remove(path) -> None:
    for p in (Path(path), Path(str(path) + ".pos")):
        if p.exists():
            p.unlink()
