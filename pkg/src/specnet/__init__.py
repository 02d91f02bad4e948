"""Spectral networks of rational quadratic differentials on the sphere,
and the rank-2 non-abelianization of rank-1 local systems on the
spectral double cover."""

from .qdiff import (
    CriticalInventory,
    RationalQD,
    SheetPoint,
    construct,
    evaluate,
    find_zeros,
    local_zero_frame,
    phi_length,
    sqrt_continue,
)

__version__ = "0.1.0"
