"""Blind interactive information reconciliation with rate-adaptive LDPC codes."""

from .channel import BscParams, bsc_transmit, generate_key_pair
from .decoder import DecodeResult, Outcome, decode_syndrome, init_llrs
from .ldpc_core import (
    DEFAULT_DISTRIBUTION,
    DegreeDistribution,
    ParityCheckMatrix,
    build_peg_code,
    design_rate,
    load_alist,
    save_alist,
    syndrome,
)
from .metrics import (
    AggregateStats,
    ExecutionRecord,
    aggregate,
    binary_entropy,
    execution_efficiency,
    raw_efficiency,
    round_efficiency_params,
)
from .protocol import Alice, Bob, ProtocolConfig, SessionResult, run_session
from .rate_adapt import (
    Frame,
    ModulationParams,
    RoundSchedule,
    assemble_frame,
    build_schedule,
    convert_to_shortened,
    modulated_rate,
    range_check,
    rate_bounds,
    symbols_for_rate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
