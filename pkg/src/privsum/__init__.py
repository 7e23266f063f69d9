"""Privacy-bounded distributed summation with forced-error Reed-Solomon codes."""

__version__ = "0.1.0"

from .code import CodeParams, DecodeFailure, ReedSolomonCode, make_rs_code  # noqa: E402
from .field import FieldElement, PrimeField  # noqa: E402
from .protocol import ErrorPlan, make_error_plan, node_bound, run_dps  # noqa: E402
from .quantizer import QuantizerConfig, UniformQuantizer  # noqa: E402

__all__ = [
    "CodeParams",
    "DecodeFailure",
    "ErrorPlan",
    "FieldElement",
    "PrimeField",
    "QuantizerConfig",
    "ReedSolomonCode",
    "UniformQuantizer",
    "make_error_plan",
    "make_rs_code",
    "node_bound",
    "run_dps",
]
