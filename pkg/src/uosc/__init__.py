"""Subspace clustering by innovation pursuit, matrix factorization and thresholding."""

__version__ = "0.1.0"
