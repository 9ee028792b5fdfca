"""Interlaced polynomial lattice rules over Z_b."""
from .cbc import SPOD_LEAD, CBCResult, ProductWeights, SPODWeights, cbc_construct, criterion, omega_table
from .gfpoly import GFPoly, int_to_poly, poly_to_int, primitive_modulus
from .io import VectorFormatError, load_vector, save_vector
from .lattice import (
    GeneratingVector,
    PointSet,
    classical_digits,
    classical_points,
    deinterlace,
    generate_points,
    importance_order,
    interlace,
    laurent_digits,
    vm_map,
)

__all__ = [
    "SPOD_LEAD", "CBCResult", "ProductWeights", "SPODWeights", "cbc_construct", "criterion", "omega_table",
    "GFPoly", "int_to_poly", "poly_to_int", "primitive_modulus",
    "VectorFormatError", "load_vector", "save_vector",
    "GeneratingVector", "PointSet", "classical_digits", "classical_points", "deinterlace",
    "generate_points", "importance_order", "interlace", "laurent_digits", "vm_map",
]
