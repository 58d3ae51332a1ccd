"""Low-delay streaming erasure codes over GF(2^w): layered constructions,
decoders, channel models and a simulation harness."""
from .gf import GF, Unsolvable
from .mdsconv import ConvCode, gen_strongly_mds, recoverable
from .codes import (CodeSpec, Codec, Family, InvalidParams, build_codec, mds_params, midas_params,
                    ms_params, prc_params)
from .decoders import LayeredDecoder, RecoveryOutcome, Status, decode_prc_event, generic_decode
from .channels import ChannelSpec, ErasureSequence, enumerate_ci_window, enumerate_cii_events, ge_sample
from .analysis import SimReport, classify_bursts, run_simulation, tradeoff_curves

__version__ = "0.1.0"

__all__ = [
    "GF", "Unsolvable", "ConvCode", "gen_strongly_mds", "recoverable", "CodeSpec", "Codec", "Family",
    "InvalidParams", "build_codec", "mds_params", "midas_params", "ms_params", "prc_params",
    "LayeredDecoder", "RecoveryOutcome", "Status", "decode_prc_event", "generic_decode", "ChannelSpec",
    "ErasureSequence", "enumerate_ci_window", "enumerate_cii_events", "ge_sample", "SimReport",
    "classify_bursts", "run_simulation", "tradeoff_curves",
]
