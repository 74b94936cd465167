"""Weighted Calderon-Zygmund decomposition on a circle fiber.

Dyadic stopping-time construction relative to the weighted measure w*mu:
the bad set Omega is the union of maximal aligned dyadic arcs on which the
w-average of |f| strictly exceeds the level, the good part g0 replaces f by
its w-average on each stopped arc, and g1 = f - g0 is supported on Omega with
w-mean zero on every stopped arc.  If the global average already exceeds the
level, the whole circle is stopped (the torus has no larger ancestor).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import riesz
from .torus import TorusFn1D
from .weights import Weight1D

__all__ = ["CZResult", "cz_decompose", "cz_tail_check"]


@dataclass
class CZResult:
    """Result of one weighted CZ decomposition at level lam.

    constants holds the measured per-bullet ratios:
      good_sup_ratio      sup |g0| / lam over stopped arcs (0 if none)
      doubling_defect     max over stopped arcs of w(parent)/w(arc)
      good_l1_ratio       int |g0| w  /  int |f| w
      bad_l1_ratio        int |g1| w  /  int |f| w
      omega_ratio         (w mu)(Omega) * lam / int |f| w
    """

    g0: TorusFn1D
    g1: TorusFn1D
    omega_arcs: list
    omega_mask: np.ndarray
    lam: float
    stopped_at_top: bool
    omega_weighted_measure: float = 0.0
    constants: dict = field(default_factory=dict)


def _level_sums(x: np.ndarray):
    """Aligned dyadic arc sums of x for every length n, n/2, ..., 1.

    Returns {L: array of length n/L} with entry k = sum over [k*L, (k+1)*L).
    """
    n = x.shape[0]
    sums = {1: x.astype(np.float64, copy=True)}
    L = 2
    while L <= n:
        prev = sums[L // 2]
        sums[L] = prev[0::2] + prev[1::2]
        L *= 2
    return sums


def cz_decompose(f: TorusFn1D, w: Weight1D, lam: float) -> CZResult:
    """Weighted CZ decomposition of f at level lam > 0 w.r.t. the weight w."""
    lam = float(lam)
    if lam <= 0.0:
        raise ValueError(f"level must be positive, got {lam}")
    if f.grid != w.grid:
        raise ValueError("function and weight live on different grids")
    n = f.grid.n
    wv = w.values
    afw = np.abs(f.values) * wv
    fw = f.values * wv
    SW = _level_sums(wv)
    SAFW = _level_sums(afw)
    SFW_re = _level_sums(fw.real)
    SFW_im = _level_sums(fw.imag)

    values = f.values.copy()
    omega_mask = np.zeros(n, dtype=bool)
    omega_arcs: list = []
    wmass = 0.0
    defect = 1.0
    good_sup = 0.0
    stopped_at_top = False

    top_avg = SAFW[n][0] / SW[n][0]
    if np.isfinite(lam) and top_avg > lam:
        stopped_at_top = True
        avg = (SFW_re[n][0] + 1j * SFW_im[n][0]) / SW[n][0]
        values[:] = avg
        omega_mask[:] = True
        omega_arcs.append((0, n))
        wmass = SW[n][0] / n
        good_sup = abs(avg) / lam
    elif np.isfinite(lam):
        # walk down the aligned dyadic tree; an arc is examined only if its
        # parent was not stopped
        active = np.array([True])  # mask over arcs of the current level
        L = n // 2
        while L >= 1:
            k = n // L
            parent_active = np.repeat(active, 2)
            avgs = SAFW[L] / SW[L]
            stop = parent_active & (avgs > lam)
            idx = np.nonzero(stop)[0]
            for i in idx:
                start = int(i) * L
                omega_arcs.append((start, L))
                omega_mask[start:start + L] = True
                avg = (SFW_re[L][i] + 1j * SFW_im[L][i]) / SW[L][i]
                values[start:start + L] = avg
                wmass += SW[L][i] / n
                defect = max(defect, SW[2 * L][i // 2] / SW[L][i])
                good_sup = max(good_sup, abs(avg) / lam)
            active = parent_active & ~stop
            L //= 2

    g0 = TorusFn1D(f.grid, values)
    g1 = TorusFn1D(f.grid, f.values - values)
    total = float(np.mean(afw))
    int_g0 = float(np.mean(np.abs(values) * wv))
    int_g1 = float(np.mean(np.abs(g1.values) * wv))
    return CZResult(
        g0=g0,
        g1=g1,
        omega_arcs=omega_arcs,
        omega_mask=omega_mask,
        lam=lam,
        stopped_at_top=stopped_at_top,
        omega_weighted_measure=wmass,
        constants={
            "good_sup_ratio": good_sup,
            "doubling_defect": defect,
            "good_l1_ratio": int_g0 / total if total else 0.0,
            "bad_l1_ratio": int_g1 / total if total else 0.0,
            "omega_ratio": (wmass * lam / total) if total else 0.0,
        },
    )


def cz_tail_check(res: CZResult, u_frame, w: Weight1D) -> float:
    """Tail ratio of the framed lower projector applied to the bad part.

    Computes int over T \\ Omega of |u^{-1} P2 (u g1)| w dmu divided by
    int |f| w dmu, with P2 the 1-D projector keeping strictly negative
    frequencies.  Returns 0 when g1 vanishes.
    """
    uv = np.asarray(getattr(u_frame, "values", u_frame), dtype=np.complex128)
    if np.min(np.abs(uv)) == 0.0:
        raise ValueError("frame function vanishes on the grid")
    g1 = res.g1.values
    if np.max(np.abs(g1)) == 0.0:
        return 0.0
    ug1 = TorusFn1D(res.g1.grid, uv * g1)
    proj = ug1.values - riesz(ug1).values  # keep m <= -1
    p2u = proj / uv
    off = ~res.omega_mask
    wv = w.values
    lhs = float(np.mean(np.where(off, np.abs(p2u) * wv, 0.0)))
    f_total = float(np.mean(np.abs(res.g0.values + res.g1.values) * wv))
    return lhs / f_total if f_total else 0.0
