"""All repeated pattern detection over sorted class partitions.

Adjacent records of a sorted partition share a longest common prefix (LCP).
For a length ``k``, maximal runs of consecutive records whose adjacent LCPs
are all ``>= k`` are exactly the groups of suffixes sharing one ``k``-symbol
prefix, so every run with at least ``min_count`` members is a repeated
pattern of length ``k`` and its members are the occurrences.  Runs for
``k + 1`` nest inside runs for ``k``; the scan therefore shrinks the active
record set as ``k`` grows and stops at the first length with no repeats.
"""

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterator, List, Mapping, Optional, Tuple

import numpy as np

from .errors import ContractError, OracleGuardError, ParameterError
from .lerp import RESIDUAL_KEY, ClassificationScheme
from .rsa import ClassPartition, Position, is_sorted

ORACLE_LIMIT = 10_000


@dataclass(frozen=True)
class PatternResult:
    pattern: str
    count: int
    positions: Tuple[Position, ...]

    def __post_init__(self):
        if self.count != len(self.positions):
            raise ParameterError(f"{self.pattern!r}: count {self.count} != {len(self.positions)} positions")

    @property
    def sequences(self) -> set:
        return {p.seq for p in self.positions}


@dataclass(frozen=True)
class DetectConfig:
    max_len: int
    spl: int = 0
    min_count: int = 2
    min_report_len: int = 1

    def __post_init__(self):
        if not 0 <= self.spl < self.max_len:
            raise ParameterError(f"need 0 <= spl < max_len, got spl={self.spl}, max_len={self.max_len}")
        if self.min_count < 2:
            raise ParameterError(f"min_count must be >= 2, got {self.min_count}")
        if self.min_report_len < 1:
            raise ParameterError(f"min_report_len must be >= 1, got {self.min_report_len}")

    @property
    def floor(self) -> int:
        """Reported lengths are strictly greater than this."""
        return max(self.spl, self.min_report_len - 1)


@dataclass
class PatternBlock:
    """All repeated patterns of one length found in a partition.

    ``first`` indexes the partition record that spells each pattern,
    ``members`` lists the partition records of every occurrence, grouped by
    pattern (in ``first`` order) and sorted by position inside each group.
    """

    length: int
    first: np.ndarray
    counts: np.ndarray
    members: np.ndarray

    @property
    def bounds(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts)])


def adjacent_lcp(partition: ClassPartition, chunk: int = 1 << 20) -> np.ndarray:
    """``out[i]`` is the LCP of records ``i - 1`` and ``i``; ``out[0] = 0``."""
    n = len(partition)
    out = np.zeros(n, dtype=np.int64)
    if n < 2:
        return out
    mat = partition.matrix()
    lens = (mat != 0).sum(axis=1)
    for lo in range(1, n, chunk):
        hi = min(n, lo + chunk)
        neq = mat[lo - 1 : hi - 1] != mat[lo:hi]
        first = np.where(neq.any(axis=1), neq.argmax(axis=1), partition.lerp)
        out[lo:hi] = np.minimum(first, np.minimum(lens[lo - 1 : hi - 1], lens[lo:hi]))
    return out


def iter_blocks(partition: ClassPartition, config: DetectConfig, lcp=None) -> Iterator[PatternBlock]:
    """Yield one :class:`PatternBlock` per reported length, ascending."""
    if not partition.sorted or not is_sorted(partition):
        raise ContractError(f"partition {partition.key!r} is not sorted")
    top = min(config.max_len, partition.lerp)
    k = config.floor + 1
    if len(partition) < config.min_count or k > top:
        return
    n = len(partition)
    idx = np.arange(n)
    lcp = adjacent_lcp(partition) if lcp is None else lcp
    # rank of each record in position order; run * n + rank then sorts groups in one pass
    rank = np.empty(n, dtype=np.int64)
    span = int(partition.off.max()) + 1
    if (int(partition.seq.max()) + 1) * span < 2**63:
        rank[np.argsort(partition.seq * span + partition.off)] = idx
    else:
        rank[np.lexsort((partition.off, partition.seq))] = idx
    composite = n * n < 2**63
    while k <= top:
        brk = lcp < k
        brk[0] = True
        run = np.cumsum(brk) - 1
        sizes = np.bincount(run)
        good = sizes >= config.min_count
        if not good.any():
            return
        keep = good[run]
        starts = np.flatnonzero(brk)[good]
        members = idx[keep]
        if composite:
            members = members[np.argsort(run[keep] * n + rank[members])]
        else:
            members = members[np.lexsort((rank[members], run[keep]))]
        yield PatternBlock(k, idx[starts], sizes[good], members)
        idx, lcp = idx[keep], np.where(brk[keep], 0, lcp[keep])
        k += 1


def block_results(partition: ClassPartition, block: PatternBlock) -> List[PatternResult]:
    texts = partition.texts[block.first].tolist()
    seq = partition.seq[block.members].tolist()
    off = partition.off[block.members].tolist()
    bounds = block.bounds.tolist()
    out = []
    for g, text in enumerate(texts):
        a, b = bounds[g], bounds[g + 1]
        out.append(
            PatternResult(
                text[: block.length].decode("ascii"), b - a,
                tuple(Position(s, o) for s, o in zip(seq[a:b], off[a:b])),
            )
        )
    return out


def detect(partition: ClassPartition, config: DetectConfig) -> List[PatternResult]:
    """Every prefix of length in ``(config.floor, max_len]`` shared by ``>= min_count`` records."""
    results = []
    for block in iter_blocks(partition, config):
        results.extend(block_results(partition, block))
    results.sort(key=lambda r: r.pattern)
    return results


def iter_shallow(
    partitions: Mapping[str, ClassPartition], scheme: ClassificationScheme, config: DetectConfig
) -> Iterator[Tuple[str, np.ndarray, np.ndarray]]:
    """Yield ``(pattern, seq, off)`` for repeated patterns shorter than the level.

    A pattern ``p`` with ``len(p) < level`` occurs at the union of all classes
    whose key starts with ``p`` plus the residual records starting with ``p``.
    Output is grouped by length, each group in pattern order.
    """
    missing = [k for k in scheme.keys if k not in partitions]
    if missing:
        raise ContractError(f"shallow_counts needs every class; missing {missing[:5]}")
    level = scheme.level
    full_keys = scheme.keys[: scheme.n_full] if level else []
    residual = partitions.get(RESIDUAL_KEY)
    res_lens = residual.lengths() if residual is not None and len(residual) else None
    for j in range(config.floor + 1, min(level, config.max_len + 1)):
        width = scheme.m ** (level - j)
        for g in range(0, len(full_keys), width):
            prefix = full_keys[g][:j]
            group = [partitions[k] for k in full_keys[g : g + width]]
            seqs = [p.seq for p in group]
            offs = [p.off for p in group]
            if res_lens is not None:
                hit = (res_lens >= j) & (residual.texts.astype(f"S{j}") == prefix.encode("ascii"))
                seqs.append(residual.seq[hit])
                offs.append(residual.off[hit])
            seq = np.concatenate(seqs)
            off = np.concatenate(offs)
            if len(seq) < config.min_count:
                continue
            # each piece is already in position order, so a stable sort only merges runs
            order = np.argsort(seq * (int(off.max()) + 1) + off, kind="stable")
            yield prefix, seq[order], off[order]


def shallow_counts(
    partitions: Mapping[str, ClassPartition], scheme: ClassificationScheme, config: DetectConfig
) -> List[PatternResult]:
    """Repeated patterns shorter than the classification level, in pattern order."""
    results = [
        PatternResult(p, len(seq), tuple(map(Position, seq.tolist(), off.tolist())))
        for p, seq, off in iter_shallow(partitions, scheme, config)
    ]
    results.sort(key=lambda r: r.pattern)
    return results


def _texts(catalog) -> List[str]:
    if hasattr(catalog, "sequences"):
        return [catalog.text(i) for i in range(len(catalog.sequences))]
    return [t if isinstance(t, str) else t.decode("ascii") for t in catalog]


def brute_force_oracle(
    catalog, min_len: int = 1, max_len: Optional[int] = None, min_count: int = 2
) -> List[PatternResult]:
    """Tally every substring window by length and keep those seen ``min_count`` times.

    Accepts a catalog or a plain list of strings. Lengths past the first one
    with no repeat are skipped: a longer repeat would repeat its prefix too.
    """
    texts = _texts(catalog)
    total = sum(map(len, texts))
    if total > ORACLE_LIMIT:
        raise OracleGuardError(f"oracle enumerates at most {ORACLE_LIMIT} symbols, got {total}")
    longest = max(map(len, texts), default=0)
    max_len = longest if max_len is None else min(max_len, longest)
    out = []
    for k in range(1, max_len + 1):
        table = defaultdict(list)
        for seq_id, text in enumerate(texts):
            for off in range(len(text) - k + 1):
                table[text[off : off + k]].append(Position(seq_id, off))
        repeated = {p: pos for p, pos in table.items() if len(pos) >= min_count}
        if not repeated:
            break
        if k >= min_len:
            out.extend(PatternResult(p, len(pos), tuple(pos)) for p, pos in repeated.items())
    out.sort(key=lambda r: r.pattern)
    return out
