"""Storage, deterministic products, compensated kernels and Matrix Market I/O."""
from .storage import (
    EPS,
    BandedMatrix,
    DenseMatrix,
    DimensionError,
    Matrix,
    SparseMatrix,
    abs_matvec,
    as_matrix,
    as_vector,
    col_abs_sums,
    fast_operator,
    matvec,
    norms,
    row_abs_sums,
    seqdot,
    to_dense,
)
from .eft import comp_dot, comp_matvec, comp_rank1_matvec, comp_residual, comp_residual_pair, two_prod, two_sum
from .mmio import MatrixMarketError, mm_read, mm_write, read_vector, write_vector

__all__ = [
    "EPS", "BandedMatrix", "DenseMatrix", "DimensionError", "Matrix", "SparseMatrix",
    "abs_matvec", "as_matrix", "as_vector", "col_abs_sums", "fast_operator", "matvec", "norms",
    "row_abs_sums", "seqdot", "to_dense",
    "comp_dot", "comp_matvec", "comp_rank1_matvec", "comp_residual", "comp_residual_pair",
    "two_prod", "two_sum",
    "MatrixMarketError", "mm_read", "mm_write", "read_vector", "write_vector",
]
