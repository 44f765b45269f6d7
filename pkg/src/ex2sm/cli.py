"""The ``ex2sm`` command line.

Every long flag can also come from an ``EX2SM_<FLAG>`` environment variable
(``--min-count`` reads ``EX2SM_MIN_COUNT``); a flag on the command line wins.
Exit codes: 0 success, 1 usage, 2 bad data or broken contract, 3 resources.
"""

import argparse
import json
import logging
import os
import sys
from collections import defaultdict
from pathlib import Path

from . import __version__
from .arpad import DetectConfig, detect
from .errors import ContractError, Ex2smError, FastaFormatError, ParameterError, StorageError
from .ingest import Sequence, ingest_fasta, load_catalog, validate_alphabet
from .lerp import choose_level, compute_lerp
from .pipeline import DEFAULT_BUDGET, PipelineConfig, resolve_plan, run_ex2sm
from .rsa import (
    build_partitions, merge_partitions, partition_filename, read_partition, sort_partition, write_partition,
)
from .store import (
    ResultsStore, cross_sequence_share, format_positions, query_pattern, stats_by_length,
    top_patterns, write_results,
)

log = logging.getLogger("ex2sm")

ENV_PREFIX = "EX2SM_"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RESOURCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _flag(parser, *names, default=None, type=str, owner=None, **kw):
    """Add an option whose fallback is ``EX2SM_<NAME>`` and then ``default``.

    ``owner`` is the parser when ``parser`` is an argument group.
    """
    action = kw.get("action")
    if action == "store_true":
        parser.add_argument(*names, default=None, action="store_const", const=True, **_rest(kw))
    else:
        parser.add_argument(*names, default=None, type=type, **kw)
    dest = kw.get("dest") or names[-1].lstrip("-").replace("-", "_")
    (owner or parser).set_defaults(**{f"_env_{dest}": (names[-1], type, default, action == "store_true")})


def _rest(kw):
    return {k: v for k, v in kw.items() if k != "action"}


def _truthy(text):
    return text.strip().lower() in ("1", "true", "yes", "on")


def _resolve(args) -> None:
    """Fill options not given on the command line from the environment, then defaults."""
    args.explicit = set()
    for key, spec in list(vars(args).items()):
        if not key.startswith("_env_"):
            continue
        flag, conv, default, boolean = spec
        dest = key[len("_env_"):]
        delattr(args, key)
        if getattr(args, dest, None) is not None:
            args.explicit.add(dest)
            continue
        env = os.environ.get(ENV_PREFIX + flag.lstrip("-").replace("-", "_").upper())
        if env is None:
            setattr(args, dest, default)
            continue
        args.explicit.add(dest)
        try:
            setattr(args, dest, _truthy(env) if boolean else conv(env))
        except ValueError:
            raise UsageError(f"bad value {env!r} for {ENV_PREFIX}{dest.upper()}")


def _global_flags(parser):
    _flag(parser, "--workers", type=int, default=1, help="worker processes for class tasks")
    _flag(parser, "--budget", type=_byte_count, default=DEFAULT_BUDGET, help="memory budget in bytes (1e9 style accepted)")
    _flag(parser, "--quiet", action="store_true", default=False, help="no progress on stderr")


def _byte_count(text):
    return int(float(text))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ex2sm", description="Exhaustive detection of repeated patterns in symbol sequences.")
    parser.add_argument("--version", action="version", version=f"ex2sm {__version__}")
    _global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="clean FASTA files into a catalog")
    p.add_argument("fasta", nargs="+", help="FASTA input files")
    _flag(p, "--out", required=False, help="catalog directory")
    _flag(p, "--alphabet", default="ACGT", help="symbols to keep (default ACGT)")
    _flag(p, "--allow-empty", action="store_true", default=False, help="accept input with no symbols")

    p = sub.add_parser("plan", help="print the LERP value (and the class level with --budget)")
    _flag(p, "--n", type=int, help="total sequence length")
    _flag(p, "--alphabet", default="ACGT", help="alphabet symbols")
    _flag(p, "--prob", type=float, default=1e-4, help="acceptable probability of a longer repeat")

    p = sub.add_parser("build", help="write the sorted partitions of a catalog as text files")
    _flag(p, "--catalog", help="catalog directory")
    _flag(p, "--out", help="partition directory")
    _flag(p, "--prob", type=float, default=1e-4, help="probability for the LERP value")
    _flag(p, "--lerp", type=int, help="explicit LERP value")
    _flag(p, "--cl", type=int, help="classification level")

    p = sub.add_parser("detect", help="run pattern detection on one partition file")
    _flag(p, "--partition", help="sorted partition file (.rsa)")
    _flag(p, "--out", help="results file (.arpad)")
    _flag(p, "--lerp", type=int, help="LERP of the partition (default: longest record)")
    _flag(p, "--spl", type=int, default=0, help="report only lengths above this")
    _flag(p, "--min-count", type=int, default=2, help="least occurrences of a pattern")
    _flag(p, "--min-len", type=int, default=1, help="least reported pattern length")

    p = sub.add_parser("pipeline", help="run the full pipeline into a results store")
    _flag(p, "--catalog", help="catalog directory")
    _flag(p, "--out", help="store directory")
    _flag(p, "--prob", type=float, default=1e-4, help="probability for the LERP value")
    _flag(p, "--lerp", type=int, help="explicit initial LERP value")
    _flag(p, "--cl", type=int, help="classification level")
    growth = p.add_mutually_exclusive_group()
    _flag(growth, "--factor", type=int, default=2, owner=p, help="LERP multiplier between rounds")
    _flag(growth, "--auto-factor", action="store_true", default=False, owner=p,
          help="choose the multiplier from resources")
    _flag(p, "--min-count", type=int, default=2, help="least occurrences of a pattern")
    _flag(p, "--min-len", type=int, default=1, help="least reported pattern length")
    _flag(p, "--keep-intermediate", action="store_true", default=False, help="keep partitions and round files")

    p = sub.add_parser("query", help="look up one pattern")
    _flag(p, "--store", help="store directory")
    _flag(p, "--pattern", help="pattern to look up")

    p = sub.add_parser("stats", help="patterns and occurrences per length")
    _flag(p, "--store", help="store directory")
    _flag(p, "--format", choices=("tsv", "json"), default="tsv", help="output format")

    p = sub.add_parser("cross", help="share of patterns spread over several sequences")
    _flag(p, "--store", help="store directory")
    _flag(p, "--count", type=int, default=2, help="occurrence count to look at")

    p = sub.add_parser("top", help="most frequent patterns of one length")
    _flag(p, "--store", help="store directory")
    _flag(p, "--length", type=int, help="pattern length")
    _flag(p, "--class", dest="class_key", help="class key (default: every class)")
    _flag(p, "--k", type=int, default=10, help="how many patterns")

    for name, choice in sub.choices.items():
        _global_flags_in(choice)
    return parser


def _global_flags_in(parser):
    # the global flags are accepted after the subcommand as well
    for flag, conv, default, boolean in (
        ("--workers", int, 1, False), ("--budget", _byte_count, DEFAULT_BUDGET, False), ("--quiet", str, False, True),
    ):
        if any(flag in a.option_strings for a in parser._actions):
            continue
        dest = flag.lstrip("-")
        if boolean:
            parser.add_argument(flag, dest=f"sub_{dest}", default=None, action="store_const", const=True,
                                help=argparse.SUPPRESS)
        else:
            parser.add_argument(flag, dest=f"sub_{dest}", default=None, type=conv, help=argparse.SUPPRESS)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"ex2sm {args.command}: missing {flags}")


def cmd_ingest(args, out):
    _require(args, "out")
    catalog = ingest_fasta(args.fasta, args.out, args.alphabet, allow_empty=args.allow_empty)
    for info in catalog.sequences:
        print(f"{info.id}\t{info.name}\t{info.length}", file=out)
    log.info("catalog %s: %d sequences, %d symbols", args.out, len(catalog.sequences), catalog.total_length)


def cmd_plan(args, out):
    _require(args, "n")
    m = len(validate_alphabet(args.alphabet))
    lerp = compute_lerp(args.n, m, args.prob)
    print(lerp, file=out)
    if "budget" in args.explicit:
        print(choose_level(args.n, lerp, m, args.budget), file=out)


def cmd_build(args, out):
    _require(args, "catalog", "out")
    catalog = load_catalog(args.catalog)
    config = PipelineConfig(p_bar=args.prob, lerp=args.lerp, level=args.cl, budget=args.budget)
    lerp, scheme = resolve_plan(catalog, config)
    per_class = defaultdict(list)
    for info in catalog.sequences:
        if info.length == 0:
            continue
        sequence = Sequence(info.id, info.name, catalog.text(info.id).encode("ascii"))
        for key, part in build_partitions(sequence, lerp, scheme).items():
            per_class[key].append(sort_partition(part))
    root = Path(args.out)
    root.mkdir(parents=True, exist_ok=True)
    for key in scheme.keys:
        parts = per_class.get(key)
        if not parts:
            continue
        merged = merge_partitions(parts)
        path = root / partition_filename(key)
        write_partition(merged, path)
        print(f"{key or '_all'}\t{len(merged)}\t{path}", file=out)
        log.info("class %s: %d records", key or "_all", len(merged))
    with open(root / "partitions.json", "w") as fh:
        json.dump({"alphabet": scheme.alphabet, "level": scheme.level, "lerp": lerp}, fh)
        fh.write("\n")


def cmd_detect(args, out):
    _require(args, "partition", "out")
    path = Path(args.partition)
    key = path.stem
    key = "" if key == "_all" else key
    lerp = args.lerp
    if lerp is None:
        manifest = path.parent / "partitions.json"
        if manifest.exists():
            lerp = json.loads(manifest.read_text())["lerp"]
        else:
            with open(path) as fh:
                lerp = max((len(line.partition("\t")[0]) for line in fh), default=1)
    part = read_partition(path, key, lerp)
    if not part.sorted:
        raise ContractError(f"{path} is not sorted")
    config = DetectConfig(lerp, args.spl, args.min_count, args.min_len)
    summary = write_results(detect(part, config), args.out)
    print(f"{summary['patterns']}\t{args.out}", file=out)


def cmd_pipeline(args, out):
    _require(args, "catalog", "out")
    catalog = load_catalog(args.catalog)
    config = PipelineConfig(
        p_bar=args.prob, level=args.cl, lerp=args.lerp,
        factor=None if args.auto_factor else args.factor,
        min_count=args.min_count, min_report_len=args.min_len,
        budget=args.budget, workers=args.workers, keep_intermediate=args.keep_intermediate,
    )
    run_ex2sm(catalog, config, args.out)
    with open(Path(args.out) / "run.json") as fh:
        report = json.load(fh)
    print("round\tlerp\tspl\tpatterns\tceiling_patterns\tceiling_positions", file=out)
    for r in report["rounds"]:
        print(
            f"{r['index']}\t{r['lerp']}\t{r['spl']}\t{r['patterns']}\t{r['ceiling_patterns']}\t{r['ceiling_positions']}",
            file=out,
        )


def cmd_query(args, out):
    _require(args, "store", "pattern")
    result = query_pattern(ResultsStore(args.store), args.pattern)
    if result is None:
        print("not-found", file=out)
        return
    print(f"{result.pattern}\t{result.count}\t{format_positions(result.positions)}", file=out)


def cmd_stats(args, out):
    _require(args, "store")
    rows = stats_by_length(ResultsStore(args.store))
    if args.format == "json":
        json.dump([row.__dict__ for row in rows], out)
        out.write("\n")
        return
    print("length\tpatterns\toccurrences\tcumulative", file=out)
    for row in rows:
        print(f"{row.length}\t{row.patterns}\t{row.occurrences}\t{row.cumulative}", file=out)


def cmd_cross(args, out):
    _require(args, "store")
    share = cross_sequence_share(ResultsStore(args.store), args.count)
    print("nan" if share is None else f"{share:.4f}", file=out)


def cmd_top(args, out):
    _require(args, "store", "length")
    store = ResultsStore(args.store)
    if args.class_key is None:
        results = []
        for key in store.class_keys:
            results.extend(top_patterns(store, args.length, key, args.k))
        results.sort(key=lambda r: (-r.count, r.pattern))
        results = results[: args.k]
    else:
        results = top_patterns(store, args.length, args.class_key, args.k)
    for r in results:
        print(f"{r.pattern}\t{r.count}", file=out)


COMMANDS = {
    "ingest": cmd_ingest, "plan": cmd_plan, "build": cmd_build, "detect": cmd_detect,
    "pipeline": cmd_pipeline, "query": cmd_query, "stats": cmd_stats, "cross": cmd_cross, "top": cmd_top,
}


def _merge_globals(args):
    for name in ("workers", "budget", "quiet"):
        value = getattr(args, f"sub_{name}", None)
        if hasattr(args, f"sub_{name}"):
            delattr(args, f"sub_{name}")
        if value is not None:
            setattr(args, name, value)


def run_command(argv, out=None) -> int:
    """Parse ``argv``, run the subcommand and return the exit code."""
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _merge_globals(args)
        _resolve(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return exc.code or 0
    logging.basicConfig(format="%(name)s: %(message)s", stream=sys.stderr)
    logging.getLogger("ex2sm").setLevel(logging.WARNING if args.quiet else logging.INFO)
    try:
        COMMANDS[args.command](args, out)
    except (UsageError, ParameterError) as exc:
        print(f"ex2sm: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FastaFormatError, ContractError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        print(f"ex2sm: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (StorageError, OSError, MemoryError) as exc:
        print(f"ex2sm: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except Ex2smError as exc:
        print(f"ex2sm: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
