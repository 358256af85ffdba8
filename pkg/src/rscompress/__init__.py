"""Matrix-free compression of rank-structured operators.

Builds hierarchical off-diagonal low-rank and nested-basis representations of
an N-by-N operator from black-box products with the operator and its adjoint,
then applies, inspects, serializes, and benchmarks them.
"""

from .tree import IndexTree, build_tree, nodes_on_level
from .dense import (Mode, full, fixed_rank, tolerance, make_rng,
                    gaussian_block, qr, svd, id_decompose,
                    randomized_range, orthonormalize)
from .operators import (LinearOracle, DenseOracle, dense_oracle,
                        ProductOracle, product_oracle, CompressedOracle,
                        CountingOracle, PointSet2D, load_points,
                        log_kernel_oracle, StarCurve, UnitCircle,
                        double_layer_oracle, SchurFrontalOracle,
                        schur_frontal_oracle, assemble_grid_conduction)
from .hodlr import HodlrMatrix, PairFactors, hodlr_compress
from .hbs import HbsMatrix, HbsIdMatrix, hbs_compress, hbs_to_hbsid
from .synthetic import planted_spectrum, planted_hodlr_dense, planted_hbs

__all__ = [name for name in dir() if not name.startswith("_")]
