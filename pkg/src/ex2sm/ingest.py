"""FASTA parsing, sequence cleaning and the on-disk sequence catalog."""

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, List, Optional

import numpy as np

from .errors import FastaFormatError, ParameterError, StorageError

DEFAULT_ALPHABET = "ACGT"
MANIFEST = "catalog.json"

_UPPER = bytes.maketrans(b"abcdefghijklmnopqrstuvwxyz", b"ABCDEFGHIJKLMNOPQRSTUVWXYZ")


@dataclass(frozen=True)
class RawSequence:
    header: str
    residues: bytes


@dataclass(frozen=True)
class Sequence:
    id: int
    name: str
    symbols: bytes

    @property
    def length(self) -> int:
        return len(self.symbols)


@dataclass(frozen=True)
class SequenceInfo:
    id: int
    name: str
    length: int
    file: str


@dataclass
class Catalog:
    """Manifest of cleaned sequences persisted under ``root``."""

    root: Path
    alphabet: str
    sequences: List[SequenceInfo] = field(default_factory=list)

    @property
    def total_length(self) -> int:
        return sum(s.length for s in self.sequences)

    @property
    def max_length(self) -> int:
        return max((s.length for s in self.sequences), default=0)

    def __len__(self):
        return len(self.sequences)

    def symbols(self, seq_id: int) -> np.ndarray:
        """Sequence bytes as a read-only uint8 array (memory-mapped when non-empty)."""
        info = self.sequences[seq_id]
        path = self.root / info.file
        if info.length == 0:
            return np.zeros(0, dtype=np.uint8)
        return np.memmap(path, dtype=np.uint8, mode="r", shape=(info.length,))

    def text(self, seq_id: int) -> str:
        return self.symbols(seq_id).tobytes().decode("ascii")

    def offsets(self) -> np.ndarray:
        """Start of every sequence in the global coordinate (concatenated) space."""
        lengths = np.array([s.length for s in self.sequences], dtype=np.int64)
        return np.concatenate([[0], np.cumsum(lengths)])


def validate_alphabet(alphabet: str) -> str:
    alphabet = alphabet.upper()
    if len(alphabet) < 2:
        raise ParameterError(f"alphabet needs at least 2 symbols, got {alphabet!r}")
    if len(set(alphabet)) != len(alphabet):
        raise ParameterError(f"alphabet has repeated symbols: {alphabet!r}")
    if not (alphabet.isascii() and alphabet.isalnum()):
        raise ParameterError(f"alphabet symbols must be ASCII letters or digits: {alphabet!r}")
    return alphabet


def iter_fasta(stream: BinaryIO) -> Iterator[RawSequence]:
    """Stream records from a binary FASTA handle; LF and CRLF are both accepted."""
    offset = 0
    header = None
    chunks: List[bytes] = []
    for line in stream:
        start = offset
        offset += len(line)
        line = line.rstrip(b"\r\n")
        if line.startswith(b">"):
            if header is not None:
                yield RawSequence(header, b"".join(chunks))
            header = line[1:].strip().decode("utf-8", "replace")
            if not header:
                raise FastaFormatError("empty FASTA header", start)
            chunks = []
        elif header is None:
            stripped = line.lstrip()
            if stripped:
                raise FastaFormatError(
                    "expected '>' header line", start + len(line) - len(stripped)
                )
        else:
            chunks.append(line.strip())
    if header is not None:
        yield RawSequence(header, b"".join(chunks))


def parse_fasta(stream: BinaryIO) -> List[RawSequence]:
    return list(iter_fasta(stream))


def clean_sequence(raw: RawSequence, alphabet: str = DEFAULT_ALPHABET, seq_id: int = 0) -> Sequence:
    """Uppercase soft-masked letters and delete every byte outside ``alphabet``.

    Offsets of the result are coordinates in the cleaned string; no map back
    to the raw residues is kept.
    """
    if not alphabet:
        raise ParameterError("alphabet must be non-empty")
    # translate() deletes before it maps, so lowercase forms must survive the delete
    keep = set((alphabet.upper() + alphabet.lower()).encode("ascii"))
    drop = bytes(b for b in range(256) if b not in keep)
    symbols = raw.residues.translate(_UPPER, drop)
    return Sequence(seq_id, raw.header, symbols)


def build_catalog(
    sequences: Iterable[Sequence],
    root,
    alphabet: str = DEFAULT_ALPHABET,
    allow_empty: bool = False,
) -> Catalog:
    """Persist ``sequences`` under ``root`` and write the JSON manifest.

    Ids are reassigned from input order starting at 0.
    """
    alphabet = validate_alphabet(alphabet)
    sequences = list(sequences)
    if not sequences and not allow_empty:
        raise ParameterError("no sequences to catalog (pass allow_empty=True to permit)")
    root = Path(root)
    catalog = Catalog(root, alphabet)
    allowed = set(alphabet.encode("ascii"))
    try:
        root.mkdir(parents=True, exist_ok=True)
        for seq_id, seq in enumerate(sequences):
            if not set(seq.symbols) <= allowed:
                raise ParameterError(f"sequence {seq.name!r} has symbols outside {alphabet!r}")
            fname = f"seq{seq_id:05d}.bin"
            with open(root / fname, "wb") as fh:
                fh.write(seq.symbols)
            catalog.sequences.append(SequenceInfo(seq_id, seq.name, seq.length, fname))
        save_catalog(catalog)
    except OSError as exc:
        raise StorageError(f"cannot write catalog under {root}: {exc}") from exc
    return catalog


def save_catalog(catalog: Catalog) -> None:
    manifest = {
        "alphabet": catalog.alphabet,
        "sequences": [
            {"id": s.id, "name": s.name, "length": s.length, "file": s.file}
            for s in catalog.sequences
        ],
        "total_length": catalog.total_length,
    }
    with open(catalog.root / MANIFEST, "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def load_catalog(root) -> Catalog:
    root = Path(root)
    try:
        with open(root / MANIFEST) as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise StorageError(f"cannot read catalog manifest in {root}: {exc}") from exc
    seqs = [SequenceInfo(s["id"], s["name"], s["length"], s["file"]) for s in manifest["sequences"]]
    catalog = Catalog(root, manifest["alphabet"], seqs)
    if catalog.total_length != manifest["total_length"]:
        raise StorageError(f"catalog {root} total_length does not match its sequences")
    return catalog


def ingest_fasta(
    paths: Iterable, root, alphabet: str = DEFAULT_ALPHABET, allow_empty: bool = False
) -> Catalog:
    """Parse and clean every record of every FASTA file into one catalog."""
    alphabet = validate_alphabet(alphabet)
    cleaned = []
    for path in paths:
        with open(path, "rb") as fh:
            for raw in iter_fasta(fh):
                cleaned.append(clean_sequence(raw, alphabet, len(cleaned)))
    return build_catalog(cleaned, root, alphabet, allow_empty=allow_empty)


def catalog_from_strings(
    texts: Iterable[str], root, alphabet: Optional[str] = None, names: Optional[List[str]] = None
) -> Catalog:
    """Convenience for tests and demos: catalog already-clean strings."""
    texts = list(texts)
    if alphabet is None:
        alphabet = DEFAULT_ALPHABET
    names = names or [f"s{i}" for i in range(len(texts))]
    seqs = [Sequence(i, n, t.encode("ascii")) for i, (n, t) in enumerate(zip(names, texts))]
    return build_catalog(seqs, root, alphabet, allow_empty=True)


def disk_usage(catalog: Catalog) -> int:
    return sum(os.path.getsize(catalog.root / s.file) for s in catalog.sequences)
