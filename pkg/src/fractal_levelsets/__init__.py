"""Hölder functions on self-similar sets and box dimensions of their level sets."""
from .boxdim import (DimensionFit, LevelQuery, SliceSpec, SpectrumEstimate, covering_upper_bound,
                     fit_dimension, level_cells, slice_cells, spectrum)
from .holder import (AffineFunction, AuxiliaryFunction, HolderCertificate, McShaneExtension, compose,
                     holder_certify, holder_exponent, k_epsilon, mcshane_extend, permitted_pair, phi_eval)
from .ifs import (CellSet, GridSpec, SimilarityMap, SimilaritySystem, attractor_cells, attractor_levels,
                  moran_dimension, refine_cells, sierpinski_carpet, sierpinski_gasket)
from .pwa import PiecewiseAffine, pwa_approximate, translation_adjust

__version__ = "0.1.0"

__all__ = [
    "AffineFunction", "AuxiliaryFunction", "CellSet", "DimensionFit", "GridSpec", "HolderCertificate",
    "LevelQuery", "McShaneExtension", "PiecewiseAffine", "SimilarityMap", "SimilaritySystem", "SliceSpec",
    "SpectrumEstimate", "attractor_cells", "attractor_levels", "compose", "covering_upper_bound",
    "fit_dimension", "holder_certify", "holder_exponent", "k_epsilon", "level_cells", "mcshane_extend",
    "moran_dimension", "permitted_pair", "phi_eval", "pwa_approximate", "refine_cells", "sierpinski_carpet",
    "sierpinski_gasket", "slice_cells", "spectrum", "translation_adjust",
]
