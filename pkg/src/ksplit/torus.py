"""Discrete model of the circle T and the bi-torus T^2.

Functions are sampled on uniform grids theta_k = 2*pi*k/n (n a power of two),
integrals use the normalized measure (weight 1/n per point), and spectra follow
the convention that coefficient c_m multiplies z^m = exp(i*m*theta).  The
frequency band is the symmetric range -n/2 .. n/2-1, stored in ascending order
(``np.fft.fftshift`` layout).

All function objects are immutable after construction; spectra are computed
lazily and cached.
"""

from __future__ import annotations

import threading

import numpy as np
from numpy.fft import fft, fft2, ifft, ifft2, fftshift, ifftshift

__all__ = [
    "Grid1D",
    "TorusFn1D",
    "TorusFn2D",
    "to_spectrum",
    "from_spectrum",
    "poisson_convolve",
    "poisson_smooth_axis",
    "weighted_norm",
    "write_torus",
    "read_torus",
    "random_fn1d",
    "random_fn2d",
    "random_logsmooth_weight",
]

_CACHE_LOCK = threading.Lock()


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


class Grid1D:
    """Uniform grid of n points (n >= 8, power of two) on the circle."""

    __slots__ = ("n",)

    def __init__(self, n: int):
        n = int(n)
        if n < 8 or not _is_pow2(n):
            raise ValueError(f"grid size must be a power of two >= 8, got {n}")
        object.__setattr__(self, "n", n)

    def __setattr__(self, name, value):
        raise AttributeError("Grid1D is immutable")

    @property
    def points(self) -> np.ndarray:
        """Angles 2*pi*k/n for k = 0..n-1."""
        return 2.0 * np.pi * np.arange(self.n) / self.n

    @property
    def freqs(self) -> np.ndarray:
        """Frequencies -n/2 .. n/2-1 in spectrum order."""
        return np.arange(-self.n // 2, self.n // 2)

    def __eq__(self, other):
        return isinstance(other, Grid1D) and other.n == self.n

    def __hash__(self):
        return hash(("Grid1D", self.n))

    def __repr__(self):
        return f"Grid1D(n={self.n})"


def _as_values(x, shape, name="values"):
    v = np.asarray(x, dtype=np.complex128)
    if v.shape != shape:
        raise ValueError(f"{name} has shape {v.shape}, expected {shape}")
    if not np.all(np.isfinite(v.view(np.float64))):
        raise ValueError(f"{name} contains non-finite entries")
    v = v.copy()
    v.setflags(write=False)
    return v


class TorusFn1D:
    """Complex function on a 1-D torus grid with a cached spectrum."""

    def __init__(self, grid: Grid1D, values):
        self.grid = grid
        self.values = _as_values(values, (grid.n,))
        self._spectrum = None

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def spectrum(self) -> np.ndarray:
        """Coefficients c_m, m = -n/2..n/2-1, with c_m multiplying z^m."""
        if self._spectrum is None:
            with _CACHE_LOCK:
                if self._spectrum is None:
                    c = fftshift(fft(self.values)) / self.n
                    c.setflags(write=False)
                    self._spectrum = c
        return self._spectrum

    @classmethod
    def from_spectrum(cls, grid: Grid1D, coeffs) -> "TorusFn1D":
        c = np.asarray(coeffs, dtype=np.complex128)
        if c.shape != (grid.n,):
            raise ValueError(
                f"coefficient array has shape {c.shape}, expected ({grid.n},)"
            )
        values = ifft(ifftshift(c)) * grid.n
        fn = cls(grid, values)
        cached = c.copy()
        cached.setflags(write=False)
        fn._spectrum = cached
        return fn

    def __repr__(self):
        return f"TorusFn1D(n={self.n})"


class TorusFn2D:
    """Complex function on a 2-D torus grid; axis 0 is z1, axis 1 is z2."""

    def __init__(self, grids, values):
        g1, g2 = grids
        self.grids = (g1, g2)
        self.values = _as_values(values, (g1.n, g2.n))
        self._spectrum = None

    @property
    def shape(self):
        return (self.grids[0].n, self.grids[1].n)

    @property
    def spectrum(self) -> np.ndarray:
        """Coefficients c_{m,k} multiplying z1^m z2^k, fftshift layout."""
        if self._spectrum is None:
            with _CACHE_LOCK:
                if self._spectrum is None:
                    n1, n2 = self.shape
                    c = fftshift(fft2(self.values)) / (n1 * n2)
                    c.setflags(write=False)
                    self._spectrum = c
        return self._spectrum

    @classmethod
    def from_spectrum(cls, grids, coeffs) -> "TorusFn2D":
        g1, g2 = grids
        c = np.asarray(coeffs, dtype=np.complex128)
        if c.shape != (g1.n, g2.n):
            raise ValueError(
                f"coefficient array has shape {c.shape}, expected {(g1.n, g2.n)}"
            )
        values = ifft2(ifftshift(c)) * (g1.n * g2.n)
        fn = cls(grids, values)
        cached = c.copy()
        cached.setflags(write=False)
        fn._spectrum = cached
        return fn

    def fiber_z2(self, i1: int) -> TorusFn1D:
        """Restriction to a fixed z1 grid index, a function of z2."""
        return TorusFn1D(self.grids[1], self.values[i1, :])

    def __repr__(self):
        return f"TorusFn2D(shape={self.shape})"


def to_spectrum(f):
    """Discrete Fourier coefficients of f under the c_m * z^m convention."""
    return np.array(f.spectrum)


def from_spectrum(coeffs, grid_or_grids):
    """Inverse of :func:`to_spectrum`; accepts a Grid1D or a pair of them."""
    if isinstance(grid_or_grids, Grid1D):
        return TorusFn1D.from_spectrum(grid_or_grids, coeffs)
    return TorusFn2D.from_spectrum(tuple(grid_or_grids), coeffs)


def poisson_convolve(f: TorusFn1D, rho: float) -> TorusFn1D:
    """Convolve with the Poisson kernel of radius rho: c_m -> rho^|m| c_m."""
    rho = float(rho)
    if not (0.0 <= rho < 1.0):
        raise ValueError(f"Poisson radius must lie in [0, 1), got {rho}")
    mult = rho ** np.abs(f.grid.freqs).astype(np.float64)
    if rho == 0.0:
        mult = (f.grid.freqs == 0).astype(np.float64)
    return TorusFn1D.from_spectrum(f.grid, f.spectrum * mult)


def poisson_smooth_axis(values: np.ndarray, rho: float, axis: int) -> np.ndarray:
    """Poisson smoothing of a raw array along one axis (grid size = shape)."""
    rho = float(rho)
    if not (0.0 <= rho < 1.0):
        raise ValueError(f"Poisson radius must lie in [0, 1), got {rho}")
    n = values.shape[axis]
    freqs = np.arange(-n // 2, n // 2)
    mult = (freqs == 0).astype(np.float64) if rho == 0.0 else rho ** np.abs(freqs)
    shape = [1] * values.ndim
    shape[axis] = n
    c = fftshift(fft(values, axis=axis), axes=axis)
    out = ifft(ifftshift(c * mult.reshape(shape), axes=axis), axis=axis)
    if np.isrealobj(values):
        return out.real
    return out


def _weight_values(w):
    v = np.asarray(getattr(w, "values", w), dtype=np.float64)
    if v.size and v.min() <= 0.0:
        raise ValueError("weight must be strictly positive on the grid")
    return v


def weighted_norm(f, w, s: float) -> float:
    """Weighted L^s quasi-norm of f on the grid.

    For s < infinity this is (mean(|f|^s w))^(1/s) with the normalized grid
    measure.  For s = infinity the weight divides: max over the grid of
    |f| / w, matching the convention L^inf(w) = {f : sup |f/w| finite}.
    """
    v = np.asarray(getattr(f, "values", f))
    wv = _weight_values(w)
    if wv.shape != v.shape:
        raise ValueError(f"weight shape {wv.shape} does not match {v.shape}")
    s = float(s)
    if s <= 0.0:
        raise ValueError(f"exponent must be positive, got {s}")
    if np.isinf(s):
        return float(np.max(np.abs(v) / wv))
    return float(np.mean(np.abs(v) ** s * wv) ** (1.0 / s))


# ---------------------------------------------------------------------------
# TORUS v1 file format: ASCII header "TORUS v1 <dims> <n1> [<n2>]", newline,
# then row-major little-endian float64 interleaved (re, im) pairs.
# ---------------------------------------------------------------------------

def write_torus(path, f) -> None:
    """Write a TorusFn1D/TorusFn2D (or a weight) as a TORUS v1 file."""
    values = np.asarray(getattr(f, "values", f))
    if values.ndim == 1:
        header = f"TORUS v1 1 {values.shape[0]}\n"
    elif values.ndim == 2:
        header = f"TORUS v1 2 {values.shape[0]} {values.shape[1]}\n"
    else:
        raise ValueError(f"unsupported rank {values.ndim}")
    flat = np.ravel(values.astype(np.complex128), order="C")
    payload = np.empty(2 * flat.size, dtype="<f8")
    payload[0::2] = flat.real
    payload[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(payload.tobytes())


def read_torus(path):
    """Read a TORUS v1 file, returning a TorusFn1D or TorusFn2D."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").strip()
        parts = header.split()
        if len(parts) < 4 or parts[0] != "TORUS" or parts[1] != "v1":
            raise ValueError(f"not a TORUS v1 file: header {header!r}")
        dims = int(parts[2])
        if dims == 1:
            if len(parts) != 4:
                raise ValueError(f"malformed 1-D header: {header!r}")
            n1 = int(parts[3])
            count = n1
            shape = (n1,)
        elif dims == 2:
            if len(parts) != 5:
                raise ValueError(f"malformed 2-D header: {header!r}")
            n1, n2 = int(parts[3]), int(parts[4])
            count = n1 * n2
            shape = (n1, n2)
        else:
            raise ValueError(f"unsupported dims {dims}")
        payload = np.frombuffer(fh.read(), dtype="<f8")
    if payload.size != 2 * count:
        raise ValueError(
            f"payload has {payload.size} floats, expected {2 * count}"
        )
    values = (payload[0::2] + 1j * payload[1::2]).reshape(shape)
    if dims == 1:
        return TorusFn1D(Grid1D(shape[0]), values)
    return TorusFn2D((Grid1D(shape[0]), Grid1D(shape[1])), values)


# ---------------------------------------------------------------------------
# Seeded random functions used by the experiment harness and the test suite.
# ---------------------------------------------------------------------------

def _random_coeffs(rng, freqs, band, decay):
    c = rng.standard_normal(freqs.size) + 1j * rng.standard_normal(freqs.size)
    c *= np.exp(-decay * np.abs(freqs) / max(band, 1))
    c[np.abs(freqs) > band] = 0.0
    return c


def random_fn1d(rng, grid: Grid1D, band=None, decay=1.0) -> TorusFn1D:
    """Random band-limited function; band defaults to n/8."""
    band = grid.n // 8 if band is None else int(band)
    c = _random_coeffs(rng, grid.freqs, band, decay)
    return TorusFn1D.from_spectrum(grid, c)


def random_fn2d(rng, grids, band=None, decay=1.0) -> TorusFn2D:
    g1, g2 = grids
    b1 = g1.n // 8 if band is None else int(band)
    b2 = g2.n // 8 if band is None else int(band)
    f1 = np.abs(g1.freqs)
    f2 = np.abs(g2.freqs)
    c = rng.standard_normal((g1.n, g2.n)) + 1j * rng.standard_normal((g1.n, g2.n))
    damp = np.exp(-decay * (f1[:, None] / max(b1, 1) + f2[None, :] / max(b2, 1)))
    c = c * damp
    c[f1 > b1, :] = 0.0
    c[:, f2 > b2] = 0.0
    return TorusFn2D.from_spectrum((g1, g2), c)


def random_logsmooth_weight(rng, grid: Grid1D, band=None, amplitude=1.0) -> np.ndarray:
    """Strictly positive weight exp(L) with L a random real trig polynomial.

    The log is band-limited, so the associated boundary functions have
    rapidly decaying spectra; used wherever a generic smooth weight is needed.
    """
    band = max(2, grid.n // 32) if band is None else int(band)
    c = _random_coeffs(rng, grid.freqs, band, decay=2.0)
    L = TorusFn1D.from_spectrum(grid, c).values.real
    peak = np.max(np.abs(L))
    if peak > 0:
        L = L * (amplitude / peak)
    return np.exp(L)
