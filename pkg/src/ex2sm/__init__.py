"""Exhaustive detection of every repeated substring in symbol sequences."""

__version__ = "0.1.0"

from .arpad import DetectConfig, PatternResult, brute_force_oracle, detect, shallow_counts
from .errors import (
    ContractError, Ex2smError, FastaFormatError, OracleGuardError, ParameterError, StorageError,
)
from .ingest import (
    Catalog, Sequence, build_catalog, catalog_from_strings, clean_sequence, ingest_fasta,
    load_catalog, parse_fasta,
)
from .lerp import ClassificationScheme, choose_level, compute_lerp
from .pipeline import PipelineConfig, load_report, next_lerp, run_ex2sm
from .rsa import (
    ClassPartition, Position, SuffixRecord, build_partitions, build_restricted, merge_partitions,
    read_partition, sort_partition, write_partition,
)
from .store import (
    ResultsStore, cross_sequence_share, query_pattern, read_results, stats_by_length, top_patterns,
)
