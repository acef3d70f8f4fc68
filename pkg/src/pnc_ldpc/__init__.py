"""LDPC-coded noncoherent M-FSK physical-layer network coding at a two-way relay."""

from .channel import CsiMode, draw_fading, noise_density, transmit, transmit_symbols
from .decoder import BPDecoder, decode
from .exit import (
    CharacteristicCache,
    DetectorConfig,
    detector_characteristic,
    exit_threshold,
    optimize_degrees,
)
from .jfunc import J, J_inv, mutual_information
from .ldpc_code import (
    CodeError,
    DegreeDistribution,
    Encoder,
    ParityCheckMatrix,
    load_alist,
    realize_matrix,
    save_alist,
    solve_free_counts,
    validate_distribution,
)
from .modem import Interleaver, dnc_somap, super_symbol_likelihoods
from .sim import Feedback, ResultRecord, TrialConfig, run_point, run_sweep

__version__ = "0.1.0"
