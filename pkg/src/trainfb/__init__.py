"""Training and CSI-feedback allocation for zero-forcing MIMO broadcast channels."""

from .allocator import (InnerSolution, KConstant, approx_effective_gap, approx_t1,
                        approx_tt_upper, inner_split, inner_split_analog, inner_split_digital,
                        inner_split_integer, inner_split_qam, k_constant, outer_optimize)
from .core import (AllocationResult, ResourceSplit, SchemeKind, SchemeSpec, SystemConfig,
                   db_to_linear, validate_config)
from .gaps import (GapValue, g_analog, g_digital_errorfree, g_digital_quantized, g_tdd,
                   mmse_error_variance, net_rate, quantization_bits, zf_rate)
from .montecarlo import run_campaign
from .qam import Constellation, fb_error_prob, q_function, qam_ser

__version__ = "0.1.0"
