"""trajbench: parallel trajectory analysis engine and I/O benchmark lab.

A numpy-based laboratory for studying how trajectory storage strategies
behave under split-apply-combine parallel analysis: a minimal-RMSD kernel,
two binary trajectory formats (sequential lossy SEQ and fixed-stride
DENSE), subfiling and chained-segment readers, a multiprocess executor
with per-rank instrumentation, and the metrics, straggler detection,
heuristics and reporting needed to compare strategies.
"""

from .chain import ChainReader, chain_open
from .dense import DenseReader, convert_seq_to_dense, dense_read_frame, dense_write
from .engine import (
    StrategyConfig,
    generate_synthetic,
    run_parallel,
    run_serial,
    synthetic_system,
)
from .errors import (
    BlockReadError,
    CorruptFileError,
    RunTimeoutError,
    TrajbenchError,
    TruncatedRecordError,
    WorkerError,
)
from .model import (
    BenchRun,
    BlockAssignment,
    CoordFrame,
    RankTiming,
    RepeatRecord,
    Strategy,
    System,
    decompose_blocks,
)
from .perf import (
    Advice,
    ScalingPoint,
    StragglerVerdict,
    advise_strategy,
    detect_stragglers,
    ratio_comp_io,
    ratio_comp_comm,
    speedup_efficiency,
    theoretical_ratio,
    total_time,
)
from .report import emit_report, write_report_json, write_timings_csv
from .rmsd import RmsdResult, block_rmsd, rmsd_kabsch_oracle, rmsd_qcp
from .seq import (
    OffsetIndex,
    SeqReader,
    seq_build_index,
    seq_read_frame,
    seq_scan,
    seq_validate_index,
    seq_write,
    split_trajectory,
)
from .topology import read_topology, write_topology

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # model
    "Strategy", "CoordFrame", "System", "BlockAssignment", "RankTiming",
    "RepeatRecord", "BenchRun", "decompose_blocks",
    # rmsd
    "RmsdResult", "rmsd_qcp", "rmsd_kabsch_oracle", "block_rmsd",
    # trajectory I/O
    "OffsetIndex", "seq_write", "seq_scan", "seq_build_index",
    "seq_validate_index", "seq_read_frame", "SeqReader", "split_trajectory",
    "dense_write", "dense_read_frame", "DenseReader", "convert_seq_to_dense",
    "ChainReader", "chain_open", "read_topology", "write_topology",
    # engine
    "StrategyConfig", "run_parallel", "run_serial", "generate_synthetic",
    "synthetic_system",
    # perf / reporting
    "ScalingPoint", "StragglerVerdict", "Advice", "total_time",
    "speedup_efficiency", "ratio_comp_io", "ratio_comp_comm",
    "theoretical_ratio", "detect_stragglers", "advise_strategy",
    "emit_report", "write_report_json", "write_timings_csv",
    # errors
    "TrajbenchError", "CorruptFileError", "TruncatedRecordError",
    "BlockReadError", "WorkerError", "RunTimeoutError",
]
