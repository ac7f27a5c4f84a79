"""Amplitude encoding between variable vectors and register states.

A variable vector z = (1, z_1, ..., z_d) is stored as the normalized state
c0 * z, zero-padded to the next power-of-two register size, with
c0 = 1 / sqrt(1 + sum |z_i|^2).  The inverse chart divides by the leading
amplitude, which also fixes the global phase.
"""

from __future__ import annotations

import numpy as np


class VanishingReferenceAmplitude(ValueError):
    """The leading amplitude is too small for the affine chart to be defined."""


def next_power_of_two(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def encode(z: np.ndarray) -> np.ndarray:
    """Normalized amplitude vector of a variable vector with z[0] = 1."""
    z = np.asarray(z, dtype=complex)
    if z.ndim != 1 or z.size < 1:
        raise ValueError("variable vector must be a nonempty 1-D array")
    if not np.all(np.isfinite(z.view(float))):
        raise ValueError("variable vector contains non-finite entries")
    if abs(z[0] - 1.0) > 1e-12:
        raise ValueError(f"variable vector must have first component 1, got {z[0]}")
    c0 = 1.0 / np.sqrt(np.sum(np.abs(z) ** 2))
    amps = np.zeros(next_power_of_two(z.size), dtype=complex)
    amps[: z.size] = c0 * z
    return amps


def decode(amps: np.ndarray, d: int | None = None) -> np.ndarray:
    """Variable vector z with z[0] = 1 recovered from an encoded state.

    d is the number of variables; amplitudes beyond index d are padding and
    must be negligible.  Raises VanishingReferenceAmplitude when the leading
    amplitude is below 1e-9.
    """
    amps = np.asarray(amps, dtype=complex)
    if d is None:
        d = amps.size - 1
    if d + 1 > amps.size:
        raise ValueError(f"d={d} does not fit a dim-{amps.size} state")
    if abs(amps[0]) < 1e-9:
        raise VanishingReferenceAmplitude(
            f"leading amplitude {abs(amps[0]):.3e} < 1e-9; affine chart undefined"
        )
    pad = np.abs(amps[d + 1 :])
    if pad.size and pad.max() > 1e-9:
        raise ValueError(f"padding amplitudes leaked to {pad.max():.3e}")
    z = amps[: d + 1] / amps[0]
    z[0] = 1.0
    return z
