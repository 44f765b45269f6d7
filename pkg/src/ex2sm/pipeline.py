"""End-to-end exhaustive repeated pattern detection with moving-LERP rounds.

Round 1 builds the classified LERP-RSA of every sequence, merges it per
class, scans each class for repeats up to the LERP length and records the
positions of the patterns that hit that ceiling. Each later round rebuilds
the structure only at those positions with a larger LERP and reports only
lengths above the previous LERP, until nothing reaches the ceiling.
"""

import json
import logging
import math
import os
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from operator import itemgetter
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set

import numpy as np

from .arpad import DetectConfig, PatternResult, iter_blocks, iter_shallow
from .errors import Ex2smError, ParameterError
from .ingest import Catalog
from .lerp import (
    DEFAULT_P_BAR, RESIDUAL_KEY, ClassificationScheme, choose_level, compute_lerp,
)
from .rsa import (
    ClassPartition, Position, external_sort, load_binary, merge_partitions,
    partition_filename, restricted_partitions, route_offsets, save_binary,
    sort_partition, suffix_texts, write_partition,
)
from ._render import render_lines, render_positions, render_tokens, segments, squeeze
from .store import SPILL_THRESHOLD, SHALLOW_KEY, ResultsStore, ResultWriter, StoreBuilder, result_filename

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 1 << 30


@dataclass
class PipelineConfig:
    p_bar: float = DEFAULT_P_BAR
    level: Optional[int] = None
    lerp: Optional[int] = None
    # None selects the resource-driven multiplier
    factor: Optional[int] = 2
    min_count: int = 2
    min_report_len: int = 1
    budget: int = DEFAULT_BUDGET
    workers: int = 1
    keep_intermediate: bool = False

    def __post_init__(self):
        if self.factor is not None and self.factor < 2:
            raise ParameterError(f"growth factor must be >= 2, got {self.factor}")
        if not 0 < self.p_bar <= 1:
            raise ParameterError(f"p_bar must lie in (0, 1], got {self.p_bar}")
        for name in ("min_report_len", "budget", "workers"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be positive")
        if self.min_count < 2:
            raise ParameterError("min_count must be >= 2")
        if self.lerp is not None and self.lerp < 1:
            raise ParameterError("lerp must be >= 1")
        if self.level is not None and self.level < 0:
            raise ParameterError("classification level must be >= 0")


@dataclass
class RoundState:
    index: int
    lerp: int
    spl: int
    records: int = 0
    patterns: int = 0
    ceiling_patterns: int = 0
    ceiling_positions: int = 0
    seconds: float = 0.0
    stages: Dict[str, float] = field(default_factory=dict)


def collect_ceiling_positions(results: Iterable[PatternResult], lerp: int) -> Set[Position]:
    return {p for r in results if len(r.pattern) == lerp for p in r.positions}


def next_lerp(
    current: int, ceiling_fraction: float, config: PipelineConfig,
    budget: Optional[int] = None, n_positions: int = 0,
) -> int:
    """LERP for the next round.

    With a fixed factor the LERP is multiplied by it. Otherwise the
    multiplier is the inverse of the ceiling fraction (at least 2), capped so
    the restricted structure of ``n_positions`` records fits ``budget`` bytes.
    """
    if not 0 <= ceiling_fraction <= 1:
        raise ParameterError(f"ceiling fraction must lie in [0, 1], got {ceiling_fraction}")
    if config.factor is not None:
        return current * config.factor
    mult = 2 if ceiling_fraction == 0 else max(2, math.floor(1 / ceiling_fraction + 1e-9))
    new = current * mult
    if budget and n_positions:
        new = min(new, max(current + 1, budget // n_positions))
    return new


# ------------------------------------------------------------- class workers


@dataclass
class _ClassTask:
    round: int
    key: str
    lerp: int
    detect: Optional[DetectConfig]
    pieces: list  # (seq_id, offsets) per sequence
    catalog_root: str
    alphabet: str
    level: int
    scratch: str
    results: str
    budget: int
    keep: bool

    @property
    def size(self) -> int:
        return sum(len(o) for _, o in self.pieces)


def write_blocks(writer: ResultWriter, partition: ClassPartition, blocks, chunk_records=1 << 16) -> None:
    """Write every pattern of ``blocks`` to ``writer`` in pattern order.

    Patterns of one partition sort by (first record, length): a pattern
    precedes its extensions, and unrelated patterns keep the order of their
    runs in the sorted partition.  Lines are rendered one range of first
    records at a time so the buffer stays small.
    """
    if not blocks:
        return
    lerp = partition.lerp
    texts = partition.matrix()
    tokens = render_tokens(partition.seq, partition.off)
    pool = np.concatenate([block.members for block in blocks])
    sizes = [len(block.members) for block in blocks]
    bases = np.cumsum(sizes) - sizes
    for block in blocks:
        writer.tally(block.length, len(block.counts), int(block.counts.sum()))

    for a in range(0, len(partition), chunk_records):
        parts = []
        for block, base in zip(blocks, bases):
            g0, g1 = np.searchsorted(block.first, [a, a + chunk_records]).tolist()
            if g0 < g1:
                cnt = block.counts[g0:g1]
                mstart = base + block.bounds[g0:g1]
                parts.append((block.first[g0:g1], np.full(g1 - g0, block.length), cnt, mstart))
        if not parts:
            continue
        first, length, counts, mstart = (np.concatenate(col) for col in zip(*parts))
        order = np.argsort(first * (lerp + 1) + length)
        first, length, counts, mstart = first[order], length[order], counts[order], mstart[order]
        spills = np.flatnonzero(counts > SPILL_THRESHOLD).tolist()
        lo = 0
        for cut in spills + [len(first)]:
            if lo < cut:
                sl = slice(lo, cut)
                members = pool[segments(mstart[sl], counts[sl])]
                buf, _ = render_lines(texts, first[sl], length[sl], counts[sl], members, tokens)
                writer.write_rendered(
                    buf.tobytes(), _pattern(partition, first[lo], length[lo]),
                    _pattern(partition, first[cut - 1], length[cut - 1]),
                )
            if cut < len(first):
                m = pool[mstart[cut] : mstart[cut] + counts[cut]]
                text = squeeze(tokens.cells[m])
                writer.write_line(
                    _pattern(partition, first[cut], length[cut]), len(m), text[:-1].tobytes(), tally=False
                )
            lo = cut + 1


def _pattern(partition: ClassPartition, first, length) -> str:
    return partition.texts[int(first)][: int(length)].decode("ascii")


def _run_class(task: _ClassTask) -> dict:
    try:
        return _process_class(task)
    except (Ex2smError, OSError) as exc:
        exc.args = (f"class {task.key or '_all'!r}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
        raise
    except Exception as exc:
        raise RuntimeError(f"class {task.key or '_all'!r} failed: {exc}") from exc


def _process_class(task: _ClassTask) -> dict:
    from .ingest import load_catalog

    catalog = load_catalog(task.catalog_root)
    scheme = ClassificationScheme(task.alphabet, task.level)
    starts = catalog.offsets()
    timings = {}
    t0 = time.perf_counter()
    parts = []
    for seq_id, offs in task.pieces:
        symbols = np.asarray(catalog.symbols(seq_id))
        parts.append(
            ClassPartition(
                task.key, task.lerp, suffix_texts(symbols, offs, task.lerp),
                np.full(len(offs), seq_id, dtype=np.int64), offs,
            )
        )
    t1 = time.perf_counter()
    timings["build"] = t1 - t0

    rsa_path = Path(task.scratch) / partition_filename(task.key, ".rsab")
    record_bytes = task.lerp + 16
    disk_start = time.time()
    if task.size * record_bytes > task.budget:
        chunk = max(1, task.budget // record_bytes)
        disk_bytes = external_sort(parts, rsa_path, starts, Path(task.scratch) / f"{task.key}.runs", chunk)
        timings["merge"] = time.perf_counter() - t1
    else:
        merged = merge_partitions([sort_partition(p) for p in parts])
        t2 = time.perf_counter()
        timings["sort"] = t2 - t1
        disk_bytes = save_binary(merged, rsa_path, starts)
        timings["merge"] = time.perf_counter() - t2
    del parts
    partition = load_binary(rsa_path, task.key, task.lerp, starts)
    if task.keep:
        write_partition(partition, Path(task.scratch) / partition_filename(task.key))

    t3 = time.perf_counter()
    out_path = Path(task.results) / result_filename(task.key)
    ceiling, n_ceiling = np.zeros(0, np.int64), 0
    with ResultWriter(out_path) as writer:
        if task.detect is not None:
            blocks = list(iter_blocks(partition, task.detect))
            write_blocks(writer, partition, blocks)
            if blocks and blocks[-1].length == task.lerp:
                top = blocks[-1]
                n_ceiling = len(top.counts)
                ceiling = starts[partition.seq[top.members]] + partition.off[top.members]
    del partition
    if not task.keep:
        rsa_path.unlink()
    timings["detect"] = time.perf_counter() - t3
    return {
        "key": task.key,
        "path": str(out_path),
        "summary": writer.summary,
        "records": task.size,
        "ceiling": np.asarray(ceiling, dtype=np.int64),
        "ceiling_patterns": n_ceiling,
        "disk": (disk_bytes, disk_start, math.inf if task.keep else time.time()),
        "timings": timings,
    }


def _peak_concurrent(intervals) -> int:
    events = []
    for size, start, end in intervals:
        events.append((start, 1, size))
        events.append((end, 0, -size))
    # releases sort before acquisitions at equal timestamps
    events.sort(key=lambda e: (e[0], e[1]))
    peak = cur = 0
    for _, _, delta in events:
        cur += delta
        peak = max(peak, cur)
    return peak


# ------------------------------------------------------------------ driver


def _round_one_pieces(catalog: Catalog, scheme: ClassificationScheme):
    """Per class index: list of (seq_id, offsets)."""
    n_classes = len(scheme.keys) if scheme.level else 1
    pieces = [[] for _ in range(n_classes)]
    for info in catalog.sequences:
        if info.length == 0:
            continue
        groups = route_offsets(catalog.symbols(info.id), scheme)
        for c, offs in enumerate(groups):
            if len(offs):
                pieces[c].append((info.id, offs.astype(np.int64)))
    return pieces


def _restricted_pieces(catalog: Catalog, scheme: ClassificationScheme, gpos: np.ndarray):
    starts = catalog.offsets()
    seq = np.searchsorted(starts, gpos, side="right") - 1
    n_classes = len(scheme.keys) if scheme.level else 1
    pieces = [[] for _ in range(n_classes)]
    for seq_id in np.unique(seq).tolist():
        offs = gpos[seq == seq_id] - starts[seq_id]
        idx = scheme.class_indices(np.asarray(catalog.symbols(seq_id)))[offs]
        for c in np.unique(idx).tolist():
            pieces[c].append((seq_id, offs[idx == c]))
    return pieces


def _shallow(catalog, scheme, pieces, config: DetectConfig, path) -> dict:
    partitions = {}
    for c, key in enumerate(scheme.keys):
        parts = [
            ClassPartition(
                key, scheme.level, suffix_texts(np.asarray(catalog.symbols(s)), o, scheme.level),
                np.full(len(o), s, dtype=np.int64), o,
            )
            for s, o in pieces[c]
        ]
        partitions[key] = (
            ClassPartition(
                key, scheme.level,
                np.concatenate([p.texts for p in parts]),
                np.concatenate([p.seq for p in parts]),
                np.concatenate([p.off for p in parts]),
            )
            if parts else ClassPartition.empty(key, scheme.level)
        )
    entries = [
        (p, len(seq), render_positions(seq, off)[:-1])
        for p, seq, off in iter_shallow(partitions, scheme, config)
    ]
    entries.sort(key=itemgetter(0))
    with ResultWriter(path) as writer:
        for entry in entries:
            writer.write_line(*entry)
    return writer.summary


def resolve_plan(catalog: Catalog, config: PipelineConfig):
    """Initial LERP and classification scheme for a catalog."""
    m = len(catalog.alphabet)
    lerp = config.lerp or compute_lerp(max(1, catalog.total_length), m, config.p_bar)
    lerp = max(1, min(lerp, catalog.max_length))
    level = config.level
    if level is None:
        level = choose_level(catalog.total_length, lerp, m, config.budget)
    level = min(level, lerp)
    return lerp, ClassificationScheme(catalog.alphabet, level)


def run_ex2sm(catalog: Catalog, config: PipelineConfig, out) -> ResultsStore:
    """Detect every repeated pattern of ``catalog`` and finalize a store under ``out``."""
    if catalog.total_length == 0:
        raise ParameterError("catalog is empty")
    wall0 = time.perf_counter()
    out = Path(out)
    lerp, scheme = resolve_plan(catalog, config)
    log.info("plan: n=%d m=%d lerp=%d level=%d", catalog.total_length, scheme.m, lerp, scheme.level)
    builder = StoreBuilder(
        out, scheme, len(catalog.sequences),
        {"min_count": config.min_count, "min_report_len": config.min_report_len},
    )
    scratch_root = out / "scratch"
    rounds: List[RoundState] = []
    intervals = []
    spl = 0
    r = 1
    pool = ProcessPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        while True:
            t_round = time.perf_counter()
            state = RoundState(r, lerp, spl)
            results_dir = builder.round_dir(r)
            scratch = scratch_root / f"r{r}"
            scratch.mkdir(parents=True, exist_ok=True)
            if r == 1:
                pieces = _round_one_pieces(catalog, scheme)
            else:
                pieces = _restricted_pieces(catalog, scheme, ceiling)
            floor_len = max(config.min_report_len, scheme.level) if r == 1 else config.min_report_len
            detect_cfg = DetectConfig(lerp, spl, config.min_count, floor_len)
            if r == 1 and scheme.level > 1 and config.min_report_len < scheme.level:
                t0 = time.perf_counter()
                path = results_dir / result_filename(SHALLOW_KEY)
                summary = _shallow(
                    catalog, scheme, pieces,
                    DetectConfig(lerp, 0, config.min_count, config.min_report_len), path,
                )
                builder.add(SHALLOW_KEY, path, summary)
                state.patterns += summary["patterns"]
                state.stages["shallow"] = time.perf_counter() - t0
                log.info("round %d class %s: %d patterns", r, SHALLOW_KEY, summary["patterns"])
            tasks = [
                _ClassTask(
                    r, scheme.key_of(c), lerp,
                    None if scheme.key_of(c) == RESIDUAL_KEY else detect_cfg,
                    pieces[c], str(catalog.root), scheme.alphabet, scheme.level,
                    str(scratch), str(results_dir), config.budget, config.keep_intermediate,
                )
                for c in range(len(pieces)) if pieces[c]
            ]
            del pieces
            # longest first to balance parallel workers
            tasks.sort(key=lambda t: -t.size)
            outputs = pool.map(_run_class, tasks) if pool else map(_run_class, tasks)
            ceilings = []
            for res in outputs:
                if res["key"] != RESIDUAL_KEY:
                    builder.add(res["key"], Path(res["path"]), res["summary"])
                else:
                    Path(res["path"]).unlink()
                state.records += res["records"]
                state.patterns += res["summary"]["patterns"]
                state.ceiling_patterns += res["ceiling_patterns"]
                ceilings.append(res["ceiling"])
                intervals.append(res["disk"])
                for stage, secs in res["timings"].items():
                    state.stages[stage] = state.stages.get(stage, 0.0) + secs
                log.info(
                    "round %d class %s: %d records, %d patterns",
                    r, res["key"] or "_all", res["records"], res["summary"]["patterns"],
                )
            ceiling = np.unique(np.concatenate(ceilings)) if ceilings else np.zeros(0, np.int64)
            state.ceiling_positions = len(ceiling)
            state.seconds = time.perf_counter() - t_round
            rounds.append(state)
            if not config.keep_intermediate:
                shutil.rmtree(scratch, ignore_errors=True)
            if len(ceiling) == 0 or lerp >= catalog.max_length:
                break
            fraction = state.ceiling_patterns / state.patterns if state.patterns else 1.0
            new = next_lerp(lerp, fraction, config, config.budget, len(ceiling))
            spl, lerp = lerp, min(new, catalog.max_length)
            r += 1
    finally:
        if pool:
            pool.shutdown()
    if not config.keep_intermediate:
        shutil.rmtree(scratch_root, ignore_errors=True)
    builder.meta["lerp_rounds"] = [s.lerp for s in rounds]
    store = builder.finalize(config.keep_intermediate)
    report = {
        "total_length": catalog.total_length,
        "n_sequences": len(catalog.sequences),
        "alphabet": catalog.alphabet,
        "level": scheme.level,
        "p_bar": config.p_bar,
        "peak_partition_bytes": _peak_concurrent(intervals),
        "rounds": [asdict(s) for s in rounds],
        "wall_seconds": time.perf_counter() - wall0,
    }
    with open(out / "run.json", "w") as fh:
        json.dump(report, fh, indent=1)
        fh.write("\n")
    return store


def load_report(out) -> dict:
    with open(Path(out) / "run.json") as fh:
        return json.load(fh)
