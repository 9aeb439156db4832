"""Three-party secret-sharing engine for privacy-preserving GP regression.

Two compute servers hold additive shares of every private value over the
ring Z_{2^l}; an assistant server deals correlated randomness (Beaver
triples, exponentiation masks) but never sees data-dependent traffic.
"""

from .ring import FixedPointCodec, RingParams
from .sharing import SharedArray, rec, reconstruct, share_reals, shr
from .protocols import ExpParams
from .session import DivisionConfig, PartyRuntime, run_session
from .gpr import KernelConfig, gpr_predict_plaintext

__all__ = [
    "FixedPointCodec", "RingParams", "SharedArray", "shr", "rec",
    "share_reals", "reconstruct", "ExpParams", "DivisionConfig",
    "PartyRuntime", "run_session", "KernelConfig", "gpr_predict_plaintext",
]

__version__ = "0.1.0"
