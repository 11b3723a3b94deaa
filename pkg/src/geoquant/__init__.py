"""Geometric quantization on model phase spaces.

Modules: ``chartcalc`` (forms on charted spaces), ``weylalg`` (exact operator
algebra), ``prequantum`` (line bundles and transport), ``hilbert`` (truncated
Hilbert spaces), ``bks`` (pairings of polarizations), ``cswzw`` (Verlinde and
the abelian WZW action) and ``cli``.
"""

__version__ = "0.1.0"
