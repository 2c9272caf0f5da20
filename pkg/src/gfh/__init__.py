"""Generating family homology toolkit.

Computes Legendrian invariants from closed-form generating families
(difference-function sublevel homology on cubical grids) and manipulates
the algebra attached to families of generating families: filtered Z/2
complexes over sphere and interval bases, their spectral sequences, the
monodromy endomorphism, and spinning / Kunneth / twist-spin constructions.
"""

from gfh.families import (
    ChainMap,
    FamilyError,
    HomotopyData,
    MonodromyData,
    PsiMap,
    base_betti_numbers,
    certificate,
    compose,
    cover_pullback,
    dumbbell,
    factor_check,
    kunneth,
    product_family,
    psi,
    spin_block_check,
    spin_family,
    spin_gh,
    sphere_family,
    twist_spin,
    verify_homotopy,
)
from gfh.genfam import (
    FrontCloud,
    GHResult,
    GenFamError,
    GenFamSpec,
    StabilityReport,
    bundled,
    bundled_names,
    gh,
    legendrian_front,
    spin_spec,
    stability,
)
from gfh.spectral import (
    FilteredComplex,
    SpectralError,
    SpectralPages,
    collapse_check,
    convergence_check,
    pages,
    total_homology,
)
from gfh.z2 import (
    GHTable,
    GradedComplex,
    Z2Error,
    Z2Matrix,
    homology,
    reduce,
    verify_d_squared,
)

__all__ = [
    "ChainMap",
    "FamilyError",
    "FilteredComplex",
    "FrontCloud",
    "GHResult",
    "GHTable",
    "GenFamError",
    "GenFamSpec",
    "GradedComplex",
    "HomotopyData",
    "MonodromyData",
    "PsiMap",
    "SpectralError",
    "SpectralPages",
    "StabilityReport",
    "Z2Error",
    "Z2Matrix",
    "base_betti_numbers",
    "bundled",
    "bundled_names",
    "certificate",
    "collapse_check",
    "compose",
    "convergence_check",
    "cover_pullback",
    "dumbbell",
    "factor_check",
    "gh",
    "homology",
    "kunneth",
    "legendrian_front",
    "pages",
    "product_family",
    "psi",
    "reduce",
    "spin_block_check",
    "spin_family",
    "spin_gh",
    "spin_spec",
    "sphere_family",
    "stability",
    "total_homology",
    "twist_spin",
    "verify_d_squared",
    "verify_homotopy",
]

__version__ = "0.1.0"
