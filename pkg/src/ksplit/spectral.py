"""Spectral projectors and transforms on torus functions.

The frequency-cone catalogue covers the regions used throughout the package:
half planes, the nonnegative quadrant, the union cone (first or second
frequency nonnegative), the strictly-lower half plane, and their complements.
``N`` always contains 0.  The projector onto the union cone (zeroing every
coefficient with both frequencies negative) is exposed as ``UNION_CONE``;
the second-variable projector keeping k <= -1 is ``LOWER_STRICT`` and, by
construction, annihilates constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .torus import Grid1D, TorusFn1D, TorusFn2D

__all__ = [
    "SpectralCone",
    "FULL_PLANE",
    "RIGHT_HALF",
    "TOP_HALF",
    "QUADRANT",
    "UNION_CONE",
    "LOWER_STRICT",
    "CONES",
    "cone_by_name",
    "hilbert",
    "hilbert_z1",
    "analytic_signal",
    "analytic_signal_axis",
    "riesz",
    "antiriesz",
    "project_cone",
    "framed_project",
    "framed_lower_z2",
    "membership",
]


@dataclass(frozen=True)
class SpectralCone:
    """Pure membership predicate over integer frequency pairs (m, k)."""

    name: str
    contains: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def mask(self, grids) -> np.ndarray:
        g1, g2 = grids
        M, K = np.meshgrid(g1.freqs, g2.freqs, indexing="ij")
        return self.contains(M, K).astype(bool)

    def complement(self) -> "SpectralCone":
        if self.name.startswith("not-"):
            name = self.name[4:]
        else:
            name = "not-" + self.name
        inner = self.contains
        return SpectralCone(name, lambda M, K: ~inner(M, K))


FULL_PLANE = SpectralCone("full", lambda M, K: np.ones_like(M, dtype=bool))
RIGHT_HALF = SpectralCone("right-half", lambda M, K: M >= 0)
TOP_HALF = SpectralCone("top-half", lambda M, K: K >= 0)
QUADRANT = SpectralCone("quadrant", lambda M, K: (M >= 0) & (K >= 0))
UNION_CONE = SpectralCone("union", lambda M, K: (M >= 0) | (K >= 0))
LOWER_STRICT = SpectralCone("lower-strict", lambda M, K: K <= -1)

CONES = {
    c.name: c
    for c in (
        FULL_PLANE,
        RIGHT_HALF,
        TOP_HALF,
        QUADRANT,
        UNION_CONE,
        LOWER_STRICT,
        FULL_PLANE.complement(),
        RIGHT_HALF.complement(),
        TOP_HALF.complement(),
        QUADRANT.complement(),
        UNION_CONE.complement(),
        LOWER_STRICT.complement(),
    )
}


def cone_by_name(name: str) -> SpectralCone:
    try:
        return CONES[name]
    except KeyError:
        raise ValueError(f"unknown cone {name!r}; known: {sorted(CONES)}") from None


def _conj_sign(freqs: np.ndarray) -> np.ndarray:
    """sign(m) with the unpaired Nyquist bin treated like the mean.

    The conjugate of cos(n theta / 2) is sin(n theta / 2), which vanishes on
    the grid, so the discrete conjugation annihilates the Nyquist bin just as
    it does constants.
    """
    s = np.sign(freqs).astype(np.float64)
    s[0] = 0.0  # m = -n/2
    return s


def hilbert(f: TorusFn1D) -> TorusFn1D:
    """Conjugate function: multiply c_m by -i*sign(m).  Constants map to 0."""
    mult = -1j * _conj_sign(f.grid.freqs)
    return TorusFn1D.from_spectrum(f.grid, f.spectrum * mult)


def hilbert_z1(f: TorusFn2D) -> TorusFn2D:
    """Conjugation acting in the first variable, fiberwise in the second."""
    mult = -1j * _conj_sign(f.grids[0].freqs)
    return TorusFn2D.from_spectrum(f.grids, f.spectrum * mult[:, None])


def analytic_signal_axis(values: np.ndarray, axis: int = 0) -> np.ndarray:
    """x + i*H(x) along one axis of a raw array.

    Doubles positive frequencies, keeps the mean and the self-conjugate
    Nyquist bin, zeroes strictly negative frequencies; for real input the
    real part reproduces the input exactly.
    """
    n = values.shape[axis]
    freqs = np.arange(-n // 2, n // 2)
    mult = np.where(freqs > 0, 2.0, np.where(freqs < 0, 0.0, 1.0))
    mult[0] = 1.0  # Nyquist kept: its grid alias is the real cosine e^{i n t/2}
    shape = [1] * values.ndim
    shape[axis] = n
    c = np.fft.fftshift(np.fft.fft(values, axis=axis), axes=axis)
    return np.fft.ifft(
        np.fft.ifftshift(c * mult.reshape(shape), axes=axis), axis=axis
    )


def analytic_signal(f: TorusFn1D) -> TorusFn1D:
    """f + i*H(f) with exactly nonnegative spectrum."""
    return TorusFn1D(f.grid, analytic_signal_axis(f.values, axis=0))


def riesz(f: TorusFn1D) -> TorusFn1D:
    """Keep coefficients with m >= 0, zero the rest."""
    keep = f.grid.freqs >= 0
    return TorusFn1D.from_spectrum(f.grid, f.spectrum * keep)


def antiriesz(f: TorusFn1D) -> TorusFn1D:
    """Keep coefficients with m <= -1; the 1-D lower-half projector."""
    keep = f.grid.freqs <= -1
    return TorusFn1D.from_spectrum(f.grid, f.spectrum * keep)


def project_cone(f: TorusFn2D, cone: SpectralCone) -> TorusFn2D:
    """Zero every coefficient outside the cone.  Idempotent."""
    mask = cone.mask(f.grids)
    return TorusFn2D.from_spectrum(f.grids, f.spectrum * mask)


def _frame_values(u, shape):
    uv = np.asarray(getattr(u, "values", u), dtype=np.complex128)
    if uv.shape != shape:
        raise ValueError(f"frame shape {uv.shape} does not match {shape}")
    if np.min(np.abs(uv)) == 0.0:
        raise ValueError("frame function vanishes on the grid")
    return uv


def framed_project(f: TorusFn2D, u, cone: SpectralCone) -> TorusFn2D:
    """Framed projector: u^{-1} * project_cone(u*f, cone).

    The frame u must be nonvanishing on the grid.  Idempotence holds exactly
    on inputs where u*f is a grid trigonometric polynomial and to roundoff
    otherwise.
    """
    uv = _frame_values(u, f.values.shape)
    inner = project_cone(TorusFn2D(f.grids, uv * f.values), cone)
    return TorusFn2D(f.grids, inner.values / uv)


def framed_lower_z2(f: TorusFn2D, u) -> TorusFn2D:
    """The framed second-variable projector u^{-1} P2 (u f), P2 keeping k <= -1."""
    return framed_project(f, u, LOWER_STRICT)


def membership(f: TorusFn2D, cone: SpectralCone, tol: float):
    """Check spectral membership in a cone.

    Returns (member, leakage) where leakage is the largest coefficient
    magnitude outside the cone relative to the largest coefficient overall.
    The zero function is a member with leakage 0.
    """
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    c = np.abs(f.spectrum)
    peak = float(c.max())
    if peak == 0.0:
        return True, 0.0
    outside = c[~cone.mask(f.grids)]
    leakage = float(outside.max() / peak) if outside.size else 0.0
    return leakage <= tol, leakage


def leakage_1d(f: TorusFn1D, keep_mask: np.ndarray) -> float:
    """Relative size of 1-D spectrum outside a boolean frequency mask."""
    c = np.abs(f.spectrum)
    peak = float(c.max())
    if peak == 0.0:
        return 0.0
    outside = c[~keep_mask]
    return float(outside.max() / peak) if outside.size else 0.0
