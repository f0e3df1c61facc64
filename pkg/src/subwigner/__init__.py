"""Fluctuations of traces of nested and overlapping Wigner submatrices.

Submodules: ``ensembles`` (keyed entry generation), ``indexing`` (index
sequences and overlap profiles), ``matrixops`` (submatrices and traces),
``theory`` (limiting covariances), ``gff`` (correlated GFF marginals),
``montecarlo`` (replicated experiments) and ``cli``.
"""

__version__ = "0.1.0"
