"""Rank-one updated linear systems: Sherman-Morrison solves, iterative
refinement, stability diagnostics and a seeded test-problem gallery."""

__version__ = "0.1.0"
