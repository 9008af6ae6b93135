"""Concatenated inner synchronization / outer nonbinary codes for IDS channels."""
from .channel import ChannelParams, ReadSet, transmit, transmit_multi
from .inner import InnerCode, make_scheme
from .kernels import BACKEND
from .multiseq import CapacityError, combine_separate, decode_joint, decode_separate
from .trellis import DriftBounds, decode_single, lattice_forward

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CapacityError",
    "ChannelParams",
    "DriftBounds",
    "InnerCode",
    "ReadSet",
    "combine_separate",
    "decode_joint",
    "decode_separate",
    "decode_single",
    "lattice_forward",
    "make_scheme",
    "transmit",
    "transmit_multi",
]
