"""LERP-reduced suffix arrays: truncated actual suffixes, classified and sorted.

A class partition keeps its records column-wise in numpy arrays: the
zero-padded truncated suffix texts (fixed-width ``S<lerp>``), the sequence
id and the offset of every record.  Bytewise comparison of the padded texts
gives the usual lexicographic order with shorter prefixes first.
"""

import heapq
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Sequence as Seq

import numpy as np

from .errors import ContractError, ParameterError, StorageError
from .lerp import RESIDUAL_KEY, ClassificationScheme


class Position(NamedTuple):
    seq: int
    off: int

    def __str__(self):
        return f"{self.seq}.{self.off}"

    @classmethod
    def parse(cls, text: str) -> "Position":
        seq, _, off = text.partition(".")
        return cls(int(seq), int(off))


class SuffixRecord(NamedTuple):
    text: str
    pos: Position


def _text_dtype(lerp: int) -> np.dtype:
    return np.dtype(f"S{lerp}")


@dataclass
class ClassPartition:
    key: str
    lerp: int
    texts: np.ndarray
    seq: np.ndarray
    off: np.ndarray
    sorted: bool = False

    @classmethod
    def empty(cls, key: str, lerp: int, sorted: bool = True) -> "ClassPartition":
        return cls(
            key, lerp, np.zeros(0, _text_dtype(lerp)),
            np.zeros(0, np.int64), np.zeros(0, np.int64), sorted,
        )

    @classmethod
    def from_records(cls, key: str, lerp: int, records: Iterable[SuffixRecord], sorted=False):
        records = list(records)
        for r in records:
            if not 1 <= len(r.text) <= lerp:
                raise ParameterError(f"record text {r.text!r} does not fit lerp={lerp}")
        texts = np.array([r.text.encode("ascii") for r in records], dtype=_text_dtype(lerp))
        seq = np.array([r.pos.seq for r in records], dtype=np.int64)
        off = np.array([r.pos.off for r in records], dtype=np.int64)
        return cls(key, lerp, texts, seq, off, sorted)

    def __len__(self):
        return len(self.texts)

    @property
    def records(self) -> List[SuffixRecord]:
        return [
            SuffixRecord(t.decode("ascii"), Position(int(s), int(o)))
            for t, s, o in zip(self.texts.tolist(), self.seq.tolist(), self.off.tolist())
        ]

    def matrix(self) -> np.ndarray:
        """Texts as an (N, lerp) uint8 matrix, zero-padded on the right."""
        return np.ascontiguousarray(self.texts).view(np.uint8).reshape(len(self), self.lerp)

    def lengths(self) -> np.ndarray:
        return (self.matrix() != 0).sum(axis=1)

    @property
    def nbytes(self) -> int:
        return self.texts.nbytes + self.seq.nbytes + self.off.nbytes


def suffix_texts(symbols: np.ndarray, offsets: np.ndarray, lerp: int) -> np.ndarray:
    """Truncated suffixes of ``symbols`` starting at ``offsets`` as ``S<lerp>`` values."""
    offsets = np.asarray(offsets, dtype=np.int64)
    padded = np.zeros(len(symbols) + lerp, dtype=np.uint8)
    padded[: len(symbols)] = symbols
    # whole-row gathers touch each suffix once instead of once per column
    windows = np.lib.stride_tricks.sliding_window_view(padded, lerp)
    mat = np.ascontiguousarray(windows[offsets])
    return mat.view(_text_dtype(lerp)).ravel()


def _as_array(symbols) -> np.ndarray:
    if isinstance(symbols, (bytes, bytearray)):
        return np.frombuffer(bytes(symbols), dtype=np.uint8)
    if isinstance(symbols, str):
        return np.frombuffer(symbols.encode("ascii"), dtype=np.uint8)
    return np.asarray(symbols, dtype=np.uint8)


def route_offsets(symbols, scheme: ClassificationScheme) -> List[np.ndarray]:
    """Offsets of every suffix grouped by class index (in increasing offset order)."""
    idx = scheme.class_indices(_as_array(symbols))
    n_classes = len(scheme.keys) if scheme.level > 0 else 1
    order = np.argsort(idx, kind="stable")
    bounds = np.searchsorted(idx[order], np.arange(n_classes + 1))
    return [order[bounds[c] : bounds[c + 1]] for c in range(n_classes)]


def build_partitions(sequence, lerp: int, scheme: ClassificationScheme) -> Dict[str, ClassPartition]:
    """One unsorted partition per class key; every offset of the sequence appears once."""
    if lerp < 1:
        raise ParameterError(f"lerp must be >= 1, got {lerp}")
    symbols = _as_array(sequence.symbols)
    if len(symbols) == 0:
        raise ParameterError("cannot build partitions for an empty sequence")
    parts = {}
    for c, offs in enumerate(route_offsets(symbols, scheme)):
        key = scheme.key_of(c)
        parts[key] = ClassPartition(
            key, lerp, suffix_texts(symbols, offs, lerp),
            np.full(len(offs), sequence.id, dtype=np.int64), offs.astype(np.int64), False,
        )
    return parts


def _code_table(sample: np.ndarray) -> np.ndarray:
    present = np.zeros(256, dtype=bool)
    present[sample.ravel()] = True
    present[0] = False
    lut = np.zeros(256, dtype=np.uint8)
    lut[present] = np.arange(1, int(present.sum()) + 1)
    return lut


def prefix_keys(texts: np.ndarray) -> np.ndarray:
    """uint64 keys whose order agrees with the text order on the leading symbols.

    Symbols that occur are coded 1..u in byte order (0 is the padding of
    short records) and as many codes as fit are packed into one word.
    """
    n, lerp = len(texts), texts.dtype.itemsize
    b = texts.view(np.uint8).reshape(n, lerp)
    # guess the symbols from a sample and fall back to a full scan if one was missed
    lut = _code_table(b[:4096])
    width = min(lerp, 64 // max(1, int(lut.max()).bit_length()))
    codes = lut[b[:, :width]]
    if np.count_nonzero(codes) != np.count_nonzero(b[:, :width]):
        lut = _code_table(b)
        width = min(lerp, 64 // max(1, int(lut.max()).bit_length()))
        codes = lut[b[:, :width]]
    shift = np.uint64(max(1, int(lut.max()).bit_length()))
    keys = np.zeros(n, dtype=np.uint64)
    for col in codes.T:
        keys <<= shift
        keys |= col
    return keys


def sort_order(texts: np.ndarray, seq: np.ndarray, off: np.ndarray) -> np.ndarray:
    """Permutation ordering records by text, then sequence id, then offset."""
    if len(texts) < 2:
        return np.arange(len(texts))
    keys = prefix_keys(texts)
    order = np.argsort(keys)
    ranked = keys[order]
    tie = ranked[1:] == ranked[:-1]
    if tie.any():
        # records sharing a packed prefix are settled on the full text and position
        grouped = np.zeros(len(keys), dtype=bool)
        grouped[1:] = tie
        grouped[:-1] |= tie
        slots = np.flatnonzero(grouped)
        gid = np.cumsum(np.concatenate([[True], ~tie]))[slots]
        members = order[slots]
        order[slots] = members[np.lexsort((off[members], seq[members], texts[members], gid))]
    return order


def sort_partition(partition: ClassPartition) -> ClassPartition:
    """Order by text, then sequence id, then offset."""
    if partition.sorted:
        return partition
    order = sort_order(partition.texts, partition.seq, partition.off)
    return replace(
        partition, texts=partition.texts[order], seq=partition.seq[order],
        off=partition.off[order], sorted=True,
    )


def is_sorted(partition: ClassPartition) -> bool:
    t, s, o = partition.texts, partition.seq, partition.off
    if len(t) < 2:
        return True
    lt = t[:-1] < t[1:]
    eq = t[:-1] == t[1:]
    tie_ok = (s[:-1] < s[1:]) | ((s[:-1] == s[1:]) & (o[:-1] < o[1:]))
    return bool(np.all(lt | (eq & tie_ok)))


def merge_partitions(parts: Seq[ClassPartition]) -> ClassPartition:
    """Merge sorted partitions of one class into a single sorted partition."""
    if not parts:
        raise ParameterError("nothing to merge")
    key, lerp = parts[0].key, parts[0].lerp
    for p in parts:
        if p.key != key or p.lerp != lerp:
            raise ParameterError(
                f"cannot merge partition ({p.key!r}, lerp={p.lerp}) into ({key!r}, lerp={lerp})"
            )
        if not p.sorted:
            raise ContractError(f"partition {p.key!r} must be sorted before merging")
    nonempty = [p for p in parts if len(p)]
    if len(nonempty) <= 1:
        return nonempty[0] if nonempty else parts[0]
    merged = ClassPartition(
        key, lerp,
        np.concatenate([p.texts for p in nonempty]),
        np.concatenate([p.seq for p in nonempty]),
        np.concatenate([p.off for p in nonempty]),
    )
    return sort_partition(merged)


def build_restricted(catalog, positions: Iterable, lerp: int, scheme: ClassificationScheme):
    """Sorted partitions holding only the suffixes at ``positions``, truncated at ``lerp``."""
    by_seq: Dict[int, List[int]] = {}
    for seq, off in positions:
        if not 0 <= seq < len(catalog.sequences):
            raise ParameterError(f"position {seq}.{off}: unknown sequence")
        if not 0 <= off < catalog.sequences[seq].length:
            raise ParameterError(f"position {seq}.{off}: offset out of range")
        by_seq.setdefault(seq, []).append(off)
    pieces: Dict[str, List[ClassPartition]] = {}
    for seq_id in sorted(by_seq):
        symbols = catalog.symbols(seq_id)
        offs = np.unique(np.array(by_seq[seq_id], dtype=np.int64))
        parts = restricted_partitions(symbols, seq_id, offs, lerp, scheme)
        for key, part in parts.items():
            pieces.setdefault(key, []).append(sort_partition(part))
    return {key: merge_partitions(ps) for key, ps in pieces.items()}


def restricted_partitions(symbols, seq_id: int, offsets: np.ndarray, lerp: int, scheme):
    """Unsorted partitions for chosen offsets of one sequence; empty classes omitted."""
    symbols = _as_array(symbols)
    idx = scheme.class_indices(symbols)[offsets]
    out = {}
    for c in np.unique(idx):
        offs = offsets[idx == c]
        key = scheme.key_of(int(c))
        out[key] = ClassPartition(
            key, lerp, suffix_texts(symbols, offs, lerp),
            np.full(len(offs), seq_id, dtype=np.int64), offs, False,
        )
    return out


# ---------------------------------------------------------------- file formats


def partition_filename(key: str, suffix: str = ".rsa") -> str:
    if key == "":
        return "_all" + suffix
    return key + suffix


def write_partition(partition: ClassPartition, path) -> None:
    """Canonical text form: ``<text>\\t<seq>.<off>`` per line, LF terminated."""
    if not partition.sorted:
        raise ContractError("only sorted partitions are written")
    lines = [
        f"{t.decode('ascii')}\t{s}.{o}\n"
        for t, s, o in zip(partition.texts.tolist(), partition.seq.tolist(), partition.off.tolist())
    ]
    try:
        with open(path, "w", newline="\n") as fh:
            fh.writelines(lines)
    except OSError as exc:
        raise StorageError(f"cannot write partition {path}: {exc}") from exc


def read_partition(path, key: str, lerp: int) -> ClassPartition:
    records = []
    with open(path) as fh:
        for line in fh:
            text, _, pos = line.rstrip("\n").partition("\t")
            records.append(SuffixRecord(text, Position.parse(pos)))
    part = ClassPartition.from_records(key, lerp, records)
    part.sorted = is_sorted(part)
    return part


def _binary_dtype(lerp: int, wide: bool) -> np.dtype:
    return np.dtype([("text", _text_dtype(lerp)), ("gpos", "<u8" if wide else "<u4")])


def save_binary(partition: ClassPartition, path, starts: np.ndarray) -> int:
    """Compact binary form: fixed-width text plus one global coordinate per record.

    ``starts`` maps sequence ids to global coordinates. Returns bytes written.
    """
    wide = int(starts[-1]) >= 2**32
    arr = np.empty(len(partition), dtype=_binary_dtype(partition.lerp, wide))
    arr["text"] = partition.texts
    arr["gpos"] = starts[partition.seq] + partition.off
    try:
        with open(path, "wb") as fh:
            arr.tofile(fh)
    except OSError as exc:
        raise StorageError(f"cannot write partition {path}: {exc}") from exc
    return arr.nbytes


def load_binary(path, key: str, lerp: int, starts: np.ndarray, sorted=True) -> ClassPartition:
    wide = int(starts[-1]) >= 2**32
    dtype = _binary_dtype(lerp, wide)
    if os.path.getsize(path) == 0:
        return ClassPartition.empty(key, lerp, sorted)
    arr = np.fromfile(path, dtype=dtype)
    gpos = arr["gpos"].astype(np.int64)
    seq = np.searchsorted(starts, gpos, side="right") - 1
    return ClassPartition(key, lerp, arr["text"].copy(), seq, gpos - starts[seq], sorted)


def external_sort(
    parts: Iterable[ClassPartition], out_path, starts: np.ndarray, scratch, chunk_records: int
) -> int:
    """Sort records that may not fit in memory into a binary partition file.

    Records are sorted in chunks of ``chunk_records``, each chunk is spilled to
    ``scratch`` and the sorted runs are k-way merged from disk. Returns the
    peak number of bytes held in scratch and output files together.
    """
    scratch = Path(scratch)
    scratch.mkdir(parents=True, exist_ok=True)
    runs, lerp, key, spilled = [], None, None, 0
    for part in parts:
        lerp, key = part.lerp, part.key
        for lo in range(0, len(part), chunk_records):
            chunk = ClassPartition(
                key, lerp, part.texts[lo : lo + chunk_records],
                part.seq[lo : lo + chunk_records], part.off[lo : lo + chunk_records],
            )
            run = scratch / f"run{len(runs):05d}.bin"
            spilled += save_binary(sort_partition(chunk), run, starts)
            runs.append(run)
    if lerp is None:
        Path(out_path).write_bytes(b"")
        return 0
    wide = int(starts[-1]) >= 2**32
    dtype = _binary_dtype(lerp, wide)
    maps = [np.memmap(r, dtype=dtype, mode="r") if os.path.getsize(r) else np.zeros(0, dtype) for r in runs]

    def stream(mm, block=65536):
        for lo in range(0, len(mm), block):
            blk = mm[lo : lo + block]
            yield from zip(blk["text"].tolist(), blk["gpos"].tolist())

    written = 0
    with open(out_path, "wb") as out:
        buf = []
        for rec in heapq.merge(*(stream(mm) for mm in maps)):
            buf.append(rec)
            if len(buf) >= chunk_records:
                written += _flush(out, buf, dtype)
                buf = []
        if buf:
            written += _flush(out, buf, dtype)
    del maps
    for r in runs:
        r.unlink()
    return spilled + written


def _flush(fh, records, dtype) -> int:
    arr = np.array(records, dtype=dtype)
    arr.tofile(fh)
    return arr.nbytes
