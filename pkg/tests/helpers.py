"""Shared test utilities (independent mode-synthesis oracle)."""

import numpy as np

from lupe.grid import COS


def synth_at(field, x, y, z):
    """Independent synthesis of a spectral field at arbitrary points."""
    g = field.grid
    vals = np.zeros(np.broadcast(x, y, z).shape, dtype=complex)
    basis = np.cos if field.parity == COS else np.sin
    for i, kx in enumerate(g.kx):
        for j, ky in enumerate(g.ky):
            mult = 1.0 if (j == 0 or (g.ny % 2 == 0 and j == g.ny // 2)) else 2.0
            for m in range(g.nz):
                c = field.coeffs[i, j, m]
                if c == 0:
                    continue
                wave = np.exp(1j * (kx * x + ky * y)) * basis(m * np.pi * z / g.h)
                vals += mult * (c * wave).real if mult == 2.0 else c * wave
    return vals.real
