"""Exact-arithmetic checking of UNSAT proofs from LP-based ReLU network verifiers."""

__version__ = "0.1.0"
