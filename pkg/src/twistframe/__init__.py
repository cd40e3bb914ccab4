"""Twisted shift-invariant spaces on a truncated grid.

Twisted translations, the Weyl kernel and Weyl-Zak transform, bracket maps,
fiber Gramians and range operators of twisted shift-preserving operators.
"""

from .errors import (BasisNotParseval, ConfigError, GridMismatch, MembershipFailure, NotAFrame,
                     NotSelfAdjoint, NotTSP, ShiftOutOfBox, TruncationError, TwistFrameError,
                     ZeroFunction)
from .frames import (FiberGram, FrameReport, GeneratorSet, InverseFrameOperator, decompose,
                     fiber_gram, frame_bounds_single, frame_operator_apply,
                     inverse_frame_operator_apply, lattice_gram, parsevalize, span_residual,
                     truncated_gram_translates)
from .grids import (GridSpec, SampledFunction, inner, make_gaussian, make_hermite, make_indicator,
                    modulated, norm, random_smooth, zeros)
from .rangeops import (FiberOperatorField, OperatorHandle, adjoint_operator, bounded_below,
                       build_tsp_from_range, check_tsp_property_transfer, extract_range_operator,
                       fiber_adjoint, is_selfadjoint, is_unitary, multiplier_residual,
                       range_reconstruction_residual, spectrum_box, verify_tsp)
from .twist import LatticePoint, check_composition, compose_phase, twisted_translate
from .weyl import KernelField, hs_norm, kernel_twist_residual, weyl_inverse, weyl_kernel
from .zak import (BracketField, ZakField, bracket, inverse_zak, membership_residual,
                  zak_transform, zak_twist_residual)

__version__ = "0.1.0"
