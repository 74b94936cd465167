"""Brute-force estimator of near-optimal splitting constants on small grids.

Given f = g + h and a pair of spectral-cone subspaces, the solver minimizes
max(||g'||_X1 / ||g||_X1, ||h'||_X2 / ||h||_X2) over the affine family
g' = (mandatory part of f) + (free coefficients), h' = f - g'.  Coefficients
of f outside Y1 | Y2 make the instance infeasible and are flagged.  The
optimization runs directly on spectral coefficients: projection onto the
cones is coefficient zeroing, so the feasible set is an affine subspace.

For r = p = 2 with constant weights the norms are diagonal in coefficients
(Parseval) and the minimizer lies on the segment between the two quadratic
centers; that case is solved in closed form.  Exponents below 1 give a
nonconvex quasinorm objective and are handled by a multi-start heuristic
whose results are labeled as upper bounds only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import SpectralCone, QUADRANT
from .torus import Grid1D, TorusFn1D, TorusFn2D, random_fn2d
from .weights import weight_from_spec

__all__ = [
    "OracleProblem",
    "OracleResult",
    "solve_convex",
    "solve_heuristic",
    "kconstant_sweep",
    "SweepRow",
]

_DEFAULT_MAX_GRID = 64


def _mask_from_cone(cone, fn) -> np.ndarray:
    if isinstance(cone, np.ndarray):
        mask = cone.astype(bool)
        if mask.shape != fn.spectrum.shape:
            raise ValueError("mask shape does not match the spectrum")
        return mask
    if isinstance(fn, TorusFn1D):
        if isinstance(cone, str):
            freqs = fn.grid.freqs
            if cone == "analytic":
                return freqs >= 0
            if cone == "antianalytic":
                return freqs <= -1
            if cone == "full":
                return np.ones_like(freqs, dtype=bool)
            raise ValueError(f"unknown 1-D cone {cone!r}")
        raise ValueError("1-D problems take cone names or boolean masks")
    if isinstance(cone, SpectralCone):
        return cone.mask(fn.grids)
    raise ValueError(f"cannot interpret cone {cone!r}")


@dataclass
class OracleProblem:
    """One splitting instance on a small grid (at most max_grid per axis)."""

    f: TorusFn1D | TorusFn2D
    g: TorusFn1D | TorusFn2D
    h: TorusFn1D | TorusFn2D
    cone1: object
    cone2: object
    weight1: np.ndarray
    weight2: np.ndarray
    r: float
    p: float
    max_iter: int = 400
    tol: float = 1e-9
    max_grid: int = _DEFAULT_MAX_GRID

    def __post_init__(self):
        shape = self.f.values.shape
        for nx in shape:
            if nx > self.max_grid:
                raise ValueError(
                    f"grid size {nx} exceeds the oracle limit {self.max_grid}"
                )
        resid = np.max(np.abs(self.f.values - self.g.values - self.h.values))
        scale = max(1.0, float(np.max(np.abs(self.f.values))))
        if resid > 1e-10 * scale:
            raise ValueError(f"f = g + h violated: residual {resid:.3e}")
        self.weight1 = np.asarray(self.weight1, dtype=np.float64)
        self.weight2 = np.asarray(self.weight2, dtype=np.float64)
        if self.weight1.shape != shape or self.weight2.shape != shape:
            raise ValueError("weights must match the grid shape")
        if self.weight1.min() <= 0 or self.weight2.min() <= 0:
            raise ValueError("weights must be strictly positive")
        self.mask1 = _mask_from_cone(self.cone1, self.f)
        self.mask2 = _mask_from_cone(self.cone2, self.f)


@dataclass
class OracleResult:
    g_prime: object
    h_prime: object
    c1: float
    c2: float
    objective: float
    converged: bool
    iterations: int
    method: str
    feasible: bool
    infeasible_leakage: float = 0.0
    heuristic: bool = False


# --- norm machinery on raw value arrays -----------------------------------

_SUP_SURROGATE = 64.0


def _norm_exact(v, W, s):
    if math.isinf(s):
        return float(np.max(np.abs(v) / W))
    return float(np.mean(np.abs(v) ** s * W) ** (1.0 / s))


def _norm_smooth(v, W, s):
    """Objective norm used during descent; power-mean surrogate for s = inf."""
    if math.isinf(s):
        t = np.abs(v) / W
        return float(np.mean(t ** _SUP_SURROGATE) ** (1.0 / _SUP_SURROGATE))
    return _norm_exact(v, W, s)


def _norm_grad(v, W, s):
    """Gradient G with d norm = Re <G, dv>; zero where v = 0."""
    ngrid = v.size
    av = np.abs(v)
    if math.isinf(s):
        S = _SUP_SURROGATE
        t = av / W
        N = np.mean(t ** S) ** (1.0 / S)
        if N == 0.0:
            return 0.0, np.zeros_like(v)
        with np.errstate(divide="ignore", invalid="ignore"):
            phase = np.where(av > 0, v / np.where(av > 0, av, 1.0), 0.0)
        # (t/N)^{S-1} stays bounded by ngrid^{(S-1)/S}; the split form avoids
        # overflow of N^{1-S}
        G = (t / N) ** (S - 1.0) * phase / W / ngrid
        return N, G
    N = np.mean(av ** s * W) ** (1.0 / s)
    if N == 0.0:
        return 0.0, np.zeros_like(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = np.where(av > 0, av ** (s - 2.0), 0.0)
    G = N ** (1.0 - s) * mag * v * W / ngrid
    return N, G


def _synthesize(coeffs, like):
    if isinstance(like, TorusFn1D):
        return TorusFn1D.from_spectrum(like.grid, coeffs)
    return TorusFn2D.from_spectrum(like.grids, coeffs)


def _synth_values(coeffs, like):
    ngrid = coeffs.size
    return np.fft.ifftn(np.fft.ifftshift(coeffs)) * ngrid


def _adjoint_synth(values):
    return np.fft.fftshift(np.fft.fftn(values))


class _Objective:
    """Evaluate max of the two norm ratios as a function of the free block."""

    def __init__(self, prob: OracleProblem):
        self.prob = prob
        sp_f = prob.f.spectrum
        self.free = prob.mask1 & prob.mask2
        self.mand1 = prob.mask1 & ~prob.mask2
        outside = ~(prob.mask1 | prob.mask2)
        peak = float(np.max(np.abs(sp_f))) or 1.0
        self.infeasible_leakage = (
            float(np.max(np.abs(sp_f[outside])) / peak) if outside.any() else 0.0
        )
        self.feasible = self.infeasible_leakage <= 1e-8
        self.base = np.where(self.mand1, sp_f, 0.0)
        self.sp_f = sp_f
        self.norm_g = _norm_exact(prob.g.values, prob.weight1, prob.r)
        self.norm_h = _norm_exact(prob.h.values, prob.weight2, prob.p)
        if self.norm_g == 0.0 or self.norm_h == 0.0:
            raise ValueError("g and h must both have nonzero norm")

    def coeffs(self, x):
        c = self.base.copy()
        c[self.free] = x
        return c

    def values_pair(self, x):
        cg = self.coeffs(x)
        vg = _synth_values(cg, self.prob.f)
        vh = self.prob.f.values - vg
        return vg, vh

    def ratios_exact(self, x):
        vg, vh = self.values_pair(x)
        return (
            _norm_exact(vg, self.prob.weight1, self.prob.r) / self.norm_g,
            _norm_exact(vh, self.prob.weight2, self.prob.p) / self.norm_h,
        )

    def value(self, x):
        vg, vh = self.values_pair(x)
        r1 = _norm_smooth(vg, self.prob.weight1, self.prob.r) / self.norm_g
        r2 = _norm_smooth(vh, self.prob.weight2, self.prob.p) / self.norm_h
        return max(r1, r2)

    def value_and_grad(self, x):
        vg, vh = self.values_pair(x)
        n1, g1 = _norm_grad(vg, self.prob.weight1, self.prob.r)
        n2, g2 = _norm_grad(vh, self.prob.weight2, self.prob.p)
        r1, r2 = n1 / self.norm_g, n2 / self.norm_h
        if r1 >= r2:
            grad_vals = g1 / self.norm_g
        else:
            grad_vals = -g2 / self.norm_h  # dh'/dg' = -1
        grad = _adjoint_synth(grad_vals)[self.free]
        return max(r1, r2), grad


def _descent(objf: _Objective, x0, max_iter, tol):
    x = x0.copy()
    J = objf.value(x)
    best_x, best_J = x.copy(), J
    step = None
    it = 0
    stall = 0
    while it < max_iter:
        it += 1
        Jg, G = objf.value_and_grad(x)
        gnorm2 = float(np.sum(np.abs(G) ** 2))
        if gnorm2 == 0.0:
            break
        if step is None:
            step = 0.1 * max(1e-12, Jg) / gnorm2 ** 0.5
        accepted = False
        t = step
        for _ in range(40):
            xn = x - t * G
            Jn = objf.value(xn)
            if Jn < J - 1e-4 * t * gnorm2:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        improvement = (J - Jn) / max(J, 1e-300)
        x, J = xn, Jn
        step = t * 1.5
        if J < best_J:
            best_x, best_J = x.copy(), J
        if improvement < tol:
            stall += 1
            if stall >= 3:
                break
        else:
            stall = 0
    return best_x, best_J, it


def _closed_form_22(objf: _Objective):
    """Exact min-max for r = p = 2 with constant weights (diagonal norms)."""
    prob = objf.prob
    ngrid = prob.f.values.size
    c1 = float(prob.weight1.flat[0])
    c2 = float(prob.weight2.flat[0])
    f_free = objf.sp_f[objf.free]
    M1 = float(np.sum(np.abs(objf.sp_f[objf.mand1]) ** 2))
    mand2 = prob.mask2 & ~prob.mask1
    M2 = float(np.sum(np.abs(objf.sp_f[mand2]) ** 2))
    F = float(np.sum(np.abs(f_free) ** 2))
    # R1(t)^2 = c1 (M1 + t^2 F) / ng^2 ; R2(t)^2 = c2 (M2 + (1-t)^2 F) / nh^2
    a1 = c1 / objf.norm_g ** 2
    a2 = c2 / objf.norm_h ** 2

    def R1sq(t):
        return a1 * (M1 + t * t * F)

    def R2sq(t):
        return a2 * (M2 + (1 - t) * (1 - t) * F)

    if F == 0.0:
        t_star = 0.0
    elif R1sq(0.0) >= R2sq(0.0):
        t_star = 0.0
    elif R1sq(1.0) <= R2sq(1.0):
        t_star = 1.0
    else:
        # crossing of the two parabolas inside (0, 1)
        A = (a1 - a2) * F
        B = 2.0 * a2 * F
        C = a1 * M1 - a2 * M2 - a2 * F
        if abs(A) < 1e-300:
            t_star = -C / B
        else:
            disc = max(B * B - 4 * A * C, 0.0)
            roots = [(-B + math.sqrt(disc)) / (2 * A), (-B - math.sqrt(disc)) / (2 * A)]
            inside = [t for t in roots if -1e-12 <= t <= 1.0 + 1e-12]
            t_star = min(inside, key=lambda t: max(R1sq(t), R2sq(t))) if inside else 0.5
        t_star = min(max(t_star, 0.0), 1.0)
    return t_star * f_free


def solve_convex(prob: OracleProblem, warm_starts=()) -> OracleResult:
    """Minimize the larger of the two norm ratios over the feasible affine set.

    warm_starts may contain candidate g' functions (same grid); the best of
    all starting points wins, so supplying a known feasible point guarantees
    the result is at least as good.
    """
    if prob.r < 1.0 or prob.p < 1.0:
        raise ValueError("solve_convex needs r, p >= 1 (use solve_heuristic)")
    objf = _Objective(prob)
    ng = prob.f.values.size

    starts = []
    sp_g = prob.g.spectrum
    starts.append(sp_g[objf.free])
    starts.append(np.zeros(int(objf.free.sum()), dtype=np.complex128))
    starts.append(objf.sp_f[objf.free])
    for cand in warm_starts:
        starts.append(cand.spectrum[objf.free])

    closed_form = (
        prob.r == 2.0
        and prob.p == 2.0
        and np.ptp(prob.weight1) == 0.0
        and np.ptp(prob.weight2) == 0.0
    )
    method = "projected-descent"
    total_it = 0
    if closed_form:
        starts.insert(0, _closed_form_22(objf))
        method = "closed-form"

    best_x, best_J = None, math.inf
    for x0 in starts:
        if closed_form:
            x, J, it = x0, objf.value(x0), 0
        else:
            x, J, it = _descent(objf, x0, prob.max_iter, prob.tol)
        total_it += it
        if J < best_J:
            best_x, best_J = x, J

    c = objf.coeffs(best_x)
    g_prime = _synthesize(c, prob.f)
    h_prime = _synthesize(prob.f.spectrum - c, prob.f)
    r1, r2 = objf.ratios_exact(best_x)
    return OracleResult(
        g_prime=g_prime,
        h_prime=h_prime,
        c1=r1,
        c2=r2,
        objective=max(r1, r2),
        converged=True,
        iterations=total_it,
        method=method,
        feasible=objf.feasible,
        infeasible_leakage=objf.infeasible_leakage,
    )


def solve_heuristic(prob: OracleProblem, seed: int = 0, starts: int = 8) -> OracleResult:
    """Multi-start projected descent for the nonconvex range 0 < r < 1 <= p.

    The reported value is only an upper bound for the optimal constant.
    """
    if not (0.0 < prob.r < 1.0 <= prob.p):
        raise ValueError("solve_heuristic handles 0 < r < 1 <= p")
    objf = _Objective(prob)
    rng = np.random.default_rng(seed)
    nfree = int(objf.free.sum())
    cands = [
        prob.g.spectrum[objf.free],
        np.zeros(nfree, dtype=np.complex128),
        objf.sp_f[objf.free],
    ]
    scale = float(np.max(np.abs(objf.sp_f))) or 1.0
    for _ in range(max(0, starts - len(cands))):
        cands.append(
            objf.sp_f[objf.free]
            + scale * 0.3 * (rng.standard_normal(nfree) + 1j * rng.standard_normal(nfree))
        )
    best_x, best_J, total_it = None, math.inf, 0
    for x0 in cands:
        x, J, it = _descent(objf, x0, prob.max_iter, prob.tol)
        total_it += it
        if J < best_J:
            best_x, best_J = x, J
    c = objf.coeffs(best_x)
    r1, r2 = objf.ratios_exact(best_x)
    return OracleResult(
        g_prime=_synthesize(c, prob.f),
        h_prime=_synthesize(prob.f.spectrum - c, prob.f),
        c1=r1,
        c2=r2,
        objective=max(r1, r2),
        converged=True,
        iterations=total_it,
        method="heuristic",
        feasible=objf.feasible,
        infeasible_leakage=objf.infeasible_leakage,
        heuristic=True,
    )


# --- instance generation and sweeps ----------------------------------------

def random_instance(rng, grids, cone1, cone2, band=None):
    """Random f = g + h with f in Y1 + Y2 by pre-projection.

    The non-subspace residue of the raw draw is assigned to g, so g and h
    stay generic while f lands in the subspace sum exactly.
    """
    g_raw = random_fn2d(rng, grids, band=band)
    h_raw = random_fn2d(rng, grids, band=band)
    mask_sum = cone1.mask(grids) | cone2.mask(grids)
    total = g_raw.spectrum + h_raw.spectrum
    f = TorusFn2D.from_spectrum(grids, np.where(mask_sum, total, 0.0))
    g = TorusFn2D(grids, f.values - h_raw.values)
    return f, g, h_raw


@dataclass
class SweepRow:
    family: str
    param: float
    r: float
    p: float
    n: int
    trials: int
    oracle_max: float
    constructive_max: float
    seed: int

    csv_columns = (
        "family", "param", "r", "p", "n", "trials",
        "oracle_max", "constructive_max", "seed",
    )

    def as_csv_dict(self):
        return {
            "family": self.family,
            "param": repr(float(self.param)),
            "r": repr(float(self.r)),
            "p": repr(float(self.p)),
            "n": str(self.n),
            "trials": str(self.trials),
            "oracle_max": repr(float(self.oracle_max)),
            "constructive_max": (
                "" if math.isnan(self.constructive_max)
                else repr(float(self.constructive_max))
            ),
            "seed": str(self.seed),
        }


def kconstant_sweep(
    family_template: str,
    param_values,
    r: float,
    p: float,
    trials: int,
    n: int,
    seed: int,
    cone1: SpectralCone = QUADRANT,
    cone2: SpectralCone = QUADRANT,
    weight1_template: str = "const",
    constructive_fn=None,
    max_workers: int = 1,
):
    """Empirical worst splitting constants along a weight-family parameter.

    For each parameter value, draws ``trials`` random instances with f
    pre-projected into Y1 + Y2, runs the oracle (convex for r >= 1, heuristic
    below), optionally a constructive splitter, and tabulates the worst
    constants.  ``family_template`` builds the X2 weight via str.format, e.g.
    ``"separating a=const b=(power alpha={param})"``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    grids = (Grid1D(n), Grid1D(n))
    rows = []
    for pi, param in enumerate(param_values):
        w2_spec = family_template.format(param=param)
        W2 = weight_from_spec(w2_spec, grids)
        W1 = weight_from_spec(weight1_template.format(param=param), grids)

        def one_trial(t, _pi=pi, _W1=W1, _W2=W2):
            rng = np.random.default_rng([seed, _pi, t])
            f, g, h = random_instance(rng, grids, cone1, cone2)
            prob = OracleProblem(
                f, g, h, cone1, cone2, _W1.values, _W2.values, r, p,
                max_grid=max(n, _DEFAULT_MAX_GRID),
            )
            if r >= 1.0:
                res = solve_convex(prob)
            else:
                res = solve_heuristic(prob, seed=int(np.random.default_rng(
                    [seed, _pi, t, 7]).integers(2 ** 31)))
            cons = math.nan
            if constructive_fn is not None:
                cons = float(constructive_fn(f, g, h, _W1, _W2))
            return float(res.objective), cons

        if max_workers > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=max_workers) as ex:
                outcomes = list(ex.map(one_trial, range(trials)))
        else:
            outcomes = [one_trial(t) for t in range(trials)]
        worst = max(o for o, _ in outcomes)
        cons_vals = [c for _, c in outcomes if not math.isnan(c)]
        worst_cons = max(cons_vals) if cons_vals else math.nan
        rows.append(
            SweepRow(
                family=w2_spec, param=float(param), r=float(r), p=float(p),
                n=int(n), trials=int(trials), oracle_max=worst,
                constructive_max=worst_cons, seed=int(seed),
            )
        )
    return rows
