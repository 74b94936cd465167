"""Outer functions, inner-outer factorization, and analytic partitions of unity.

An outer function with prescribed boundary modulus w is exp(L + i H(L)) with
L = log w; its modulus reproduces w up to roundoff and its spectrum is
nonnegative up to aliasing of the tail of exp.  The partition builder produces
a family {phi_j} of analytic functions indexed by dyadic levels whose moduli
track the level sets of a positive weight: phi_j is close to 1 where the
weight is comparable to 2^j, the family telescopes to 1 exactly, and each atom
factors as an inner function times the 8th power of an outer root.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import analytic_signal_axis
from .torus import Grid1D, TorusFn1D, poisson_smooth_axis
from .weights import Weight1D, bmo_norm

__all__ = [
    "OuterFn",
    "outer_function",
    "inner_outer",
    "PartitionAtom",
    "Partition",
    "build_partition",
]


@dataclass(frozen=True)
class OuterFn:
    """Boundary values of an outer function together with its source modulus.

    modulus_error is the max relative deviation of |values| from the source;
    leakage is the relative size of the negative-frequency spectrum.  Both are
    measured at construction; smooth moduli keep them at roundoff level while
    rough moduli degrade gracefully (callers assert what their context needs).
    """

    fn: TorusFn1D
    modulus: np.ndarray
    modulus_error: float
    leakage: float

    @property
    def values(self) -> np.ndarray:
        return self.fn.values

    @property
    def grid(self) -> Grid1D:
        return self.fn.grid

    @classmethod
    def zero(cls, grid: Grid1D) -> "OuterFn":
        z = TorusFn1D(grid, np.zeros(grid.n))
        return cls(z, np.zeros(grid.n), 0.0, 0.0)


def _neg_leakage(fn: TorusFn1D) -> float:
    # the self-conjugate Nyquist bin aliases the analytic e^{i n t / 2} and is
    # not counted as leakage
    c = np.abs(fn.spectrum)
    peak = float(c.max())
    if peak == 0.0:
        return 0.0
    freqs = fn.grid.freqs
    neg = c[(freqs < 0) & (freqs != -fn.grid.n // 2)]
    return float(neg.max() / peak)


def outer_function(w, grid: Grid1D | None = None) -> OuterFn:
    """Outer function with |result| = w on the grid: exp(L + i H(L)), L = log w."""
    if isinstance(w, Weight1D):
        grid = w.grid
        wv = w.values
    else:
        wv = np.asarray(w, dtype=np.float64)
        if grid is None:
            grid = Grid1D(wv.shape[0])
        if wv.min() <= 0.0:
            raise ValueError("outer function needs a strictly positive modulus")
    L = np.log(wv)
    values = np.exp(analytic_signal_axis(L, axis=0))
    fn = TorusFn1D(grid, values)
    err = float(np.max(np.abs(np.abs(values) - wv) / wv))
    return OuterFn(fn, wv.copy(), err, _neg_leakage(fn))


def inner_outer(f: TorusFn1D, eps: float = 1e-12, root: int = 1):
    """Factor f = theta * psi^root with psi an outer root and |theta| <= 1.

    psi is the outer function of max(|f|, eps * max|f|)^{1/root}; theta is the
    pointwise quotient, unimodular (to roundoff) wherever |f| clears the
    regularization floor.  root=1 is the plain inner-outer factorization.
    """
    root = int(root)
    if root < 1:
        raise ValueError(f"root must be a positive integer, got {root}")
    af = np.abs(f.values)
    peak = float(af.max())
    if peak == 0.0:
        raise ValueError("cannot factor the zero function")
    floor = eps * peak
    wmod = np.maximum(af, floor)
    A = analytic_signal_axis(np.log(wmod), axis=0)
    psi_values = np.exp(A / root)
    psi_fn = TorusFn1D(f.grid, psi_values)
    wroot = wmod ** (1.0 / root)
    err = float(np.max(np.abs(np.abs(psi_values) - wroot) / wroot))
    psi = OuterFn(psi_fn, wroot, err, _neg_leakage(psi_fn))
    denom = psi_values ** root
    theta = TorusFn1D(f.grid, f.values / denom)
    return theta, psi


@dataclass(frozen=True)
class PartitionAtom:
    """One partition atom: level j, atom phi, inner factor theta, outer root psi."""

    j: int
    phi: TorusFn1D
    theta: TorusFn1D
    psi: OuterFn
    leakage: float

    @property
    def is_zero(self) -> bool:
        return float(np.max(np.abs(self.phi.values))) == 0.0


@dataclass
class Partition:
    """Analytic partition of unity subordinate to a weight.

    c_upper: max_j sup |phi_j|^{1/power} * a * 2^{-j}   (per-level bound)
    c_lower: sup of sum_j |phi_j|^{1/power} 2^j / a     (reconstruction bound)
    c_sum:   sup of sum_j |phi_j|^{1/power}             (summability)
    """

    atoms: list
    weight: Weight1D
    jmin: int
    jmax: int
    power: int
    c_sum: float
    c_upper: float
    c_lower: float
    max_leakage: float
    sum_error: float
    smooth_radius: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def active_atoms(self):
        return [a for a in self.atoms if not a.is_zero]


def _smoothstep(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        e0 = np.where(t > 0.0, np.exp(-1.0 / np.clip(t, 1e-300, None)), 0.0)
        e1 = np.where(t < 1.0, np.exp(-1.0 / np.clip(1.0 - t, 1e-300, None)), 0.0)
    out = np.where(t <= 0.0, 0.0, np.where(t >= 1.0, 1.0, e0 / (e0 + e1)))
    return out


def _blend(t: np.ndarray) -> np.ndarray:
    """Smooth clipped-identity: t for t <= -1, 0 for t >= 0, C-infinity blend."""
    return t * _smoothstep(-t)


def level_modulus(j: float, h: np.ndarray, power: int) -> np.ndarray:
    """Modulus profile of the level-j cutoff: a smooth version of
    min(1, 2^{power*(j-h)}), exactly 1 for j >= h and exactly the power law
    for j <= h-1."""
    return np.exp2(power * _blend(j - h))


DEFAULT_SMOOTH_RADIUS = 3.0 * np.pi / 128.0  # ~12 cells at n = 1024


def build_partition(
    a: Weight1D,
    jmin: int | None = None,
    jmax: int | None = None,
    power: int = 8,
    smooth_radius: float = DEFAULT_SMOOTH_RADIUS,
    factor_eps: float = 1e-12,
) -> Partition:
    """Analytic partition of unity subordinate to the weight a.

    Telescoping construction: with h = log2(a) (Poisson-presmoothed at the
    angular radius ``smooth_radius`` so the level cutoffs stay spectrally
    resolved; the radius is resolution-independent, making refinements of the
    same weight produce the same continuum atoms), V_j is the outer function
    with modulus ``level_modulus(j, h, power)``.  Atoms are
    phi_j = V_j - V_{j-1} for jmin < j < jmax; the bottom atom absorbs the
    tail below jmin (V_jmin is replaced by 0) and the top atom is
    1 - V_{jmax-1}, so sum_j phi_j = 1 pointwise by telescoping.  The
    level-jmin slot is kept as an identically zero atom so the list covers
    jmin..jmax.

    The per-level bound |phi_j|^{1/power} * a <= c * 2^j holds by construction
    of the moduli; the summability and reconstruction constants are measured
    per run and reported, not guaranteed.
    """
    grid = a.grid
    n = grid.n
    h_raw = np.log2(a.values)
    if smooth_radius > 0.0:
        rho = float(np.exp(-smooth_radius))
        h = poisson_smooth_axis(h_raw, rho, axis=0)
    else:
        h = h_raw
    hmin, hmax = float(h.min()), float(h.max())
    if jmin is None:
        jmin = int(np.floor(hmin)) - 1
    if jmax is None:
        jmax = max(int(np.ceil(hmax)), jmin + 1)
    if not 2.0 ** jmin <= 2.0 ** hmin * (1.0 + 1e-12):
        raise ValueError(
            f"level range does not cover the weight: 2^{jmin} > min a ~ 2^{hmin:.3f}"
        )
    if not 2.0 ** jmax >= 2.0 ** hmax * (1.0 - 1e-12):
        raise ValueError(
            f"level range does not cover the weight: 2^{jmax} < max a ~ 2^{hmax:.3f}"
        )
    if jmax <= jmin:
        raise ValueError(f"need jmax > jmin, got [{jmin}, {jmax}]")

    ones = np.ones(n)
    V_prev = np.zeros(n, dtype=np.complex128)  # bottom tail absorbed
    phis: dict[int, np.ndarray] = {jmin: np.zeros(n, dtype=np.complex128)}
    for j in range(jmin + 1, jmax + 1):
        if j == jmax:
            V_j = ones.astype(np.complex128)
        else:
            mod = level_modulus(float(j), h, power)
            if np.all(mod == 1.0):
                V_j = ones.astype(np.complex128)
            else:
                V_j = outer_function(mod, grid).values
        phis[j] = V_j - V_prev
        V_prev = V_j

    atoms = []
    max_leak = 0.0
    root_sum = np.zeros(n)
    weighted_sum = np.zeros(n)
    c_upper = 0.0
    neg_mask = grid.freqs < 0
    for j in range(jmin, jmax + 1):
        phi_fn = TorusFn1D(grid, phis[j])
        amp = np.abs(phis[j])
        if amp.max() == 0.0:
            atoms.append(
                PartitionAtom(j, phi_fn, TorusFn1D(grid, ones), OuterFn.zero(grid), 0.0)
            )
            continue
        c = np.abs(phi_fn.spectrum)
        leak = float(c[neg_mask].max() / c.max()) if c.max() else 0.0
        max_leak = max(max_leak, leak)
        theta, psi = _factor_atom(phi_fn, factor_eps, power)
        atoms.append(PartitionAtom(j, phi_fn, theta, psi, leak))
        rootamp = amp ** (1.0 / power)
        root_sum += rootamp
        weighted_sum += rootamp * 2.0 ** j
        c_upper = max(c_upper, float(np.max(rootamp * a.values) / 2.0 ** j))

    total = sum(phis[j] for j in range(jmin, jmax + 1))
    sum_error = float(np.max(np.abs(total - 1.0)))
    return Partition(
        atoms=atoms,
        weight=a,
        jmin=jmin,
        jmax=jmax,
        power=power,
        c_sum=float(root_sum.max()),
        c_upper=c_upper,
        c_lower=float(np.max(weighted_sum / a.values)),
        max_leakage=max_leak,
        sum_error=sum_error,
        smooth_radius=smooth_radius,
        diagnostics={"log_bmo_of_weight": bmo_norm(np.log(a.values))},
    )
