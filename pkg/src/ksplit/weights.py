"""Weight construction and hypothesis checking.

Condition constants (Muckenhoupt A_p and A_1, reverse Holder, BMO of the log)
are measured over the dyadic-plus-half-shifted arc family: all dyadic arcs of
lengths n, n/2, ..., 4 at aligned offsets, plus the same lengths shifted by
half their length.  Any arc is covered by at most three family arcs of
comparable length, so the family constant tracks the true supremum up to a
fixed factor; every recorded constant names the family it was measured on.

Two-variable conditions use rectangles B1 x B2 built from two 1-D families.
"Uniform in one variable" always means the max of the 1-D fiber constants
over the grid fibers of the other variable.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .torus import Grid1D, TorusFn1D, read_torus

__all__ = [
    "Weight1D",
    "Weight2D",
    "ArcFamily",
    "RectFamily",
    "dyadic_family",
    "rect_family",
    "ap_constant",
    "a1_constant",
    "reverse_holder_constant",
    "bmo_norm",
    "uniform_fiber_constant",
    "maximal_function",
    "dual_weights",
    "dual_weights_inverse",
    "single_weight_reduction",
    "glue_weight",
    "HypothesisEntry",
    "HypothesisReport",
    "hypothesis_check",
    "weight_from_spec",
    "weight_from_file",
]


def _positive(values, name="weight"):
    v = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    if v.min() <= 0.0:
        raise ValueError(f"{name} must be strictly positive on the grid")
    v = v.copy()
    v.setflags(write=False)
    return v


class Weight1D:
    """Strictly positive grid function on T with a condition-constant cache."""

    def __init__(self, grid: Grid1D, values):
        self.grid = grid
        self.values = _positive(values)
        if self.values.shape != (grid.n,):
            raise ValueError("weight values do not match the grid")
        self.log_mean = float(np.mean(np.log(self.values)))
        self.cache: dict = {}

    @property
    def n(self):
        return self.grid.n

    def power(self, alpha: float) -> "Weight1D":
        return Weight1D(self.grid, self.values ** float(alpha))

    def times(self, other) -> "Weight1D":
        ov = np.asarray(getattr(other, "values", other), dtype=np.float64)
        return Weight1D(self.grid, self.values * ov)

    def __repr__(self):
        return f"Weight1D(n={self.n})"


class Weight2D:
    """Strictly positive grid function on T^2; axis 0 is z1, axis 1 is z2."""

    def __init__(self, grids, values):
        g1, g2 = grids
        self.grids = (g1, g2)
        self.values = _positive(values)
        if self.values.shape != (g1.n, g2.n):
            raise ValueError("weight values do not match the grids")
        self.log_mean = float(np.mean(np.log(self.values)))
        self.cache: dict = {}

    @property
    def shape(self):
        return self.values.shape

    def power(self, alpha: float) -> "Weight2D":
        return Weight2D(self.grids, self.values ** float(alpha))

    def times(self, other) -> "Weight2D":
        ov = np.asarray(getattr(other, "values", other), dtype=np.float64)
        return Weight2D(self.grids, self.values * ov)

    def fiber_z2(self, i1: int) -> Weight1D:
        return Weight1D(self.grids[1], self.values[i1, :])

    def __repr__(self):
        return f"Weight2D(shape={self.shape})"


# ---------------------------------------------------------------------------
# Arc families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArcFamily:
    """Dyadic + half-shifted arcs on an n-point grid, stored as (start, length)."""

    n: int
    arcs: tuple
    name: str

    @property
    def size(self) -> int:
        return len(self.arcs)


def dyadic_family(n: int, min_len: int = 4) -> ArcFamily:
    """All dyadic arcs of lengths n, n/2, ..., min_len at aligned offsets,
    plus every such arc shifted by half its length."""
    arcs = []
    L = n
    while L >= min_len:
        for start in range(0, n, L):
            arcs.append((start, L))
        if L < n:  # the half-shift of the full circle is the full circle
            for start in range(L // 2, n, L):
                arcs.append((start, L))
        L //= 2
    return ArcFamily(n, tuple(arcs), f"dyadic+half[{min_len}..{n}]")


@dataclass(frozen=True)
class RectFamily:
    """Product family of rectangles B1 x B2."""

    fam1: ArcFamily
    fam2: ArcFamily

    @property
    def size(self) -> int:
        return self.fam1.size * self.fam2.size

    @property
    def name(self) -> str:
        return f"({self.fam1.name})x({self.fam2.name})"


def rect_family(n1: int, n2: int, min_len: int = 4) -> RectFamily:
    return RectFamily(dyadic_family(n1, min_len), dyadic_family(n2, min_len))


def _arc_arrays(fam: ArcFamily):
    starts = np.array([a[0] for a in fam.arcs], dtype=np.intp)
    lens = np.array([a[1] for a in fam.arcs], dtype=np.intp)
    return starts, lens


def _arc_avgs(x: np.ndarray, fam: ArcFamily) -> np.ndarray:
    """Average of x over every family arc (wrap-around handled by doubling).

    x may be 1-D (returns a vector over arcs) or 2-D with the circle along the
    last axis (returns rows x arcs).
    """
    starts, lens = _arc_arrays(fam)
    doubled = np.concatenate([x, x], axis=-1)
    csum = np.cumsum(doubled, axis=-1, dtype=np.float64)
    csum = np.concatenate(
        [np.zeros(csum.shape[:-1] + (1,)), csum], axis=-1
    )
    sums = csum[..., starts + lens] - csum[..., starts]
    return sums / lens


def _arc_mins(x: np.ndarray, fam: ArcFamily) -> np.ndarray:
    """Minimum of x over every family arc; same shapes as :func:`_arc_avgs`."""
    starts, lens = _arc_arrays(fam)
    doubled = np.concatenate([x, x], axis=-1)
    idx = np.empty(2 * len(starts), dtype=np.intp)
    idx[0::2] = starts
    idx[1::2] = starts + lens
    # reduceat reduces [idx[i], idx[i+1]); keep the even slots (start..end)
    red = np.minimum.reduceat(doubled, idx[:-1], axis=-1)
    mins = red[..., 0::2]
    # the trailing arc [last_start, last_end) is reduced to the array end;
    # fix it up explicitly
    last = np.min(doubled[..., idx[-2]:idx[-1]], axis=-1)
    mins = np.array(mins)
    mins[..., -1] = last
    return mins


def _cache_key(kind, fam, *params):
    return (kind, fam.name) + params


def ap_constant(w, p: float, fam=None) -> float:
    """Muckenhoupt A_p constant over the arc (or rectangle) family.

    max over B of avg_B(w) * avg_B(w^{1/(1-p)})^{p-1}; equals 1 for constant
    weights and is >= 1 always.
    """
    p = float(p)
    if p <= 1.0:
        raise ValueError(f"A_p needs p > 1, got {p}")
    if isinstance(w, Weight2D):
        fam = fam or rect_family(*w.shape)
        key = _cache_key("ap", fam, p)
        if key not in w.cache:
            av_w = _rect_avgs(w.values, fam)
            av_dual = _rect_avgs(w.values ** (1.0 / (1.0 - p)), fam)
            w.cache[key] = float(np.max(av_w * av_dual ** (p - 1.0)))
        return w.cache[key]
    fam = fam or dyadic_family(w.n)
    key = _cache_key("ap", fam, p)
    if key not in w.cache:
        av_w = _arc_avgs(w.values, fam)
        av_dual = _arc_avgs(w.values ** (1.0 / (1.0 - p)), fam)
        w.cache[key] = float(np.max(av_w * av_dual ** (p - 1.0)))
    return w.cache[key]


def a1_constant(w, fam=None) -> float:
    """A_1 constant: max over arcs B and x in B of avg_B(w) / w(x)."""
    if isinstance(w, Weight2D):
        fam = fam or rect_family(*w.shape)
        key = _cache_key("a1", fam)
        if key not in w.cache:
            w.cache[key] = float(
                np.max(_rect_avgs(w.values, fam) / _rect_mins(w.values, fam))
            )
        return w.cache[key]
    fam = fam or dyadic_family(w.n)
    key = _cache_key("a1", fam)
    if key not in w.cache:
        w.cache[key] = float(
            np.max(_arc_avgs(w.values, fam) / _arc_mins(w.values, fam))
        )
    return w.cache[key]


def reverse_holder_constant(w, delta: float = 1.0, fam=None) -> float:
    """Reverse Holder constant: max of (avg w^{1+d})^{1/(1+d)} / avg w."""
    delta = float(delta)
    if delta <= 0.0:
        raise ValueError(f"reverse Holder exponent must be positive, got {delta}")
    if isinstance(w, Weight2D):
        fam = fam or rect_family(*w.shape)
        key = _cache_key("rh", fam, delta)
        if key not in w.cache:
            hi = _rect_avgs(w.values ** (1.0 + delta), fam) ** (1.0 / (1.0 + delta))
            w.cache[key] = float(np.max(hi / _rect_avgs(w.values, fam)))
        return w.cache[key]
    fam = fam or dyadic_family(w.n)
    key = _cache_key("rh", fam, delta)
    if key not in w.cache:
        hi = _arc_avgs(w.values ** (1.0 + delta), fam) ** (1.0 / (1.0 + delta))
        w.cache[key] = float(np.max(hi / _arc_avgs(w.values, fam)))
    return w.cache[key]


def bmo_norm(phi, fam=None) -> float:
    """L^1 mean-oscillation norm: max over arcs of avg_B |phi - avg_B phi|."""
    values = np.asarray(getattr(phi, "values", phi))
    if np.iscomplexobj(values):
        if np.max(np.abs(values.imag)) > 1e-12 * max(1.0, np.max(np.abs(values))):
            raise ValueError("BMO norm is defined for real-valued functions")
        values = values.real
    fam = fam or dyadic_family(values.shape[-1])
    avgs = _arc_avgs(values, fam)
    doubled = np.concatenate([values, values], axis=-1)
    worst = 0.0
    for i, (start, length) in enumerate(fam.arcs):
        seg = doubled[..., start:start + length]
        osc = np.mean(np.abs(seg - avgs[..., i:i + 1]), axis=-1)
        worst = max(worst, float(np.max(osc)))
    return worst


def _rect_avgs(x: np.ndarray, fam: RectFamily) -> np.ndarray:
    """Average over every rectangle in the family; |fam1| x |fam2| matrix."""
    s1, l1 = _arc_arrays(fam.fam1)
    s2, l2 = _arc_arrays(fam.fam2)
    doubled = np.tile(x, (2, 2))
    P = doubled.cumsum(axis=0).cumsum(axis=1)
    P = np.pad(P, ((1, 0), (1, 0)))
    e1 = s1 + l1
    e2 = s2 + l2
    sums = (
        P[np.ix_(e1, e2)]
        - P[np.ix_(s1, e2)]
        - P[np.ix_(e1, s2)]
        + P[np.ix_(s1, s2)]
    )
    return sums / (l1[:, None] * l2[None, :])


def _rect_mins(x: np.ndarray, fam: RectFamily) -> np.ndarray:
    """Minimum over every rectangle; built from row-wise arc minima."""
    row_mins = _arc_mins(x, fam.fam2)  # n1 x |fam2|
    return _arc_mins(row_mins.T, fam.fam1).T  # |fam1| x |fam2|


def uniform_fiber_constant(
    w: Weight2D, which_variable: str, condition: str, *,
    p: float | None = None, delta: float = 1.0, fam=None,
) -> float:
    """Max over fibers of a 1-D condition constant.

    which_variable is the variable of the fiber weight: "z2" measures
    w(z1, .) as a function of z2 for each fixed z1 (uniformity in z1),
    "z1" measures w(., z2) fibers.  condition is one of "A_p" (needs p),
    "A_1", "RH" (uses delta), "BMO-log".
    """
    if which_variable == "z2":
        rows = w.values  # each row is a fiber in z2
        n = w.grids[1].n
    elif which_variable == "z1":
        rows = w.values.T
        n = w.grids[0].n
    else:
        raise ValueError(f"which_variable must be 'z1' or 'z2', got {which_variable!r}")
    fam = fam or dyadic_family(n)
    if condition == "A_p":
        if p is None:
            raise ValueError("condition 'A_p' requires the exponent p")
        av = _arc_avgs(rows, fam)
        avd = _arc_avgs(rows ** (1.0 / (1.0 - p)), fam)
        return float(np.max(av * avd ** (p - 1.0)))
    if condition == "A_1":
        return float(np.max(_arc_avgs(rows, fam) / _arc_mins(rows, fam)))
    if condition == "RH":
        hi = _arc_avgs(rows ** (1.0 + delta), fam) ** (1.0 / (1.0 + delta))
        return float(np.max(hi / _arc_avgs(rows, fam)))
    if condition == "BMO-log":
        return bmo_norm(np.log(rows), fam)
    raise ValueError(f"unknown condition {condition!r}")


def maximal_function(x, include_short=True) -> np.ndarray:
    """Grid Hardy-Littlewood maximal function over dyadic + half-shifted arcs.

    M(x)(i) = max over family arcs containing i of the arc average of x.
    With include_short=True the family extends down to single points, so
    M(x) >= x pointwise.
    """
    v = np.asarray(getattr(x, "values", x), dtype=np.float64)
    n = v.shape[-1]
    out = v.copy() if include_short else np.full_like(v, -np.inf)
    csum = np.concatenate([[0.0], np.cumsum(np.concatenate([v, v]))])
    L = 2
    while L <= n:
        for shift in (0, L // 2):
            starts = np.arange(shift, n + shift, L)
            avgs = (csum[starts + L] - csum[starts]) / L
            # repeat(avgs, L) indexes points shift..shift+n-1; roll back
            out = np.maximum(out, np.roll(np.repeat(avgs, L), shift))
        L *= 2
    return out


# ---------------------------------------------------------------------------
# Weight transforms
# ---------------------------------------------------------------------------

def conjugate_exponent(p: float) -> float:
    p = float(p)
    if p <= 1.0:
        raise ValueError(f"exponent must exceed 1, got {p}")
    return p / (p - 1.0)


def dual_weights(w1: Weight2D, w2: Weight2D, a1: Weight1D, a2: Weight1D,
                 b1: Weight1D, b2: Weight1D, p: float):
    """Pass to the predual couple: exponent q = p/(p-1) and the transformed
    weight tuple.  Slot 1 of the output takes the old slot-2 weights; slot 2
    takes the old slot-1 weights raised to the power 1-q, all pointwise.

    Returns (q, (b1t, w1t, a1t), (b2t, w2t, a2t)).
    """
    q = conjugate_exponent(p)
    slot1 = (b2, w2, a2)
    slot2 = (b1.power(1.0 - q), w1.power(1.0 - q), a1.power(1.0 - q))
    return q, slot1, slot2


def dual_weights_inverse(w1t: Weight2D, w2t: Weight2D, a1t, a2t, b1t, b2t,
                         q: float):
    """Invert :func:`dual_weights`: recover the original tuple and p."""
    p = conjugate_exponent(q)
    inv = 1.0 / (1.0 - q)
    return (
        p,
        (b2t.power(inv), w2t.power(inv), a2t.power(inv)),  # slot 1 originals
        (b1t, w1t, a1t),                                   # slot 2 originals
    )


def single_weight_reduction(w1: Weight2D, w2: Weight2D, q: float):
    """Collapse the two-weight couple to one weight and a frame.

    w = w1^{q/(q-1)} / w2^{1/(q-1)} and u = w1^{1/(q-1)} / w2^{1/(q-1)},
    both pointwise and strictly positive.
    """
    q = float(q)
    if q <= 1.0:
        raise ValueError(f"exponent must exceed 1, got {q}")
    e = 1.0 / (q - 1.0)
    w = Weight2D(w1.grids, w1.values ** (q * e) / w2.values ** e)
    u = Weight2D(w1.grids, w1.values ** e / w2.values ** e)
    return w, u


def glue_weight(w1: Weight2D, w2: Weight2D, theta: float) -> Weight2D:
    """Intermediate weight w1 * w2^{theta/(theta-1)}; pair with 1/(1-theta)."""
    theta = float(theta)
    if not (0.0 < theta < 1.0):
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    return Weight2D(w1.grids, w1.values * w2.values ** (theta / (theta - 1.0)))


# ---------------------------------------------------------------------------
# Hypothesis reports
# ---------------------------------------------------------------------------

DEFAULT_CAPS = {"ap": 100.0, "a1": 100.0, "rh": 10.0, "bmo": 8.0}


@dataclass
class HypothesisEntry:
    name: str
    constant: float
    threshold: float
    passed: bool
    family_size: int
    note: str = ""


@dataclass
class HypothesisReport:
    theorem: str
    entries: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def warnings(self):
        return [e for e in self.entries if not e.passed]

    def to_text(self) -> str:
        lines = [f"hypothesis.theorem: {self.theorem}"]
        for e in self.entries:
            status = "pass" if e.passed else "FAIL"
            lines.append(
                f"hypothesis.{e.name}: {e.constant!r} (cap {e.threshold!r}, "
                f"{status}, family {e.family_size}{', ' + e.note if e.note else ''})"
            )
        return "\n".join(lines)


def _entry(report, name, constant, cap, fam_size, note=""):
    report.entries.append(
        HypothesisEntry(name, float(constant), float(cap),
                        bool(constant <= cap), fam_size, note)
    )


def _best_exponent(w: Weight2D, which: str, grid_exponents):
    best = math.inf
    best_e = None
    for e in grid_exponents:
        c = uniform_fiber_constant(w, which, "A_p", p=e)
        if c < best:
            best, best_e = c, e
    return best, best_e


def hypothesis_check(
    theorem_id: str,
    *,
    w1: Weight2D | None = None,
    w2: Weight2D | None = None,
    a1: Weight1D | None = None,
    a2: Weight1D | None = None,
    b1: Weight1D | None = None,
    b2: Weight1D | None = None,
    p: float | None = None,
    delta: float = 1.0,
    exponent_grid=(1.5, 2.0, 3.0, 4.0, 8.0),
    caps: dict | None = None,
) -> HypothesisReport:
    """Evaluate every numbered hypothesis of a named theorem.

    theorem_id is one of 'rght', 'lft', 'one_naib', 'inf_neib_all_q', 'glue'.
    Measured constants are compared against configurable caps; failing an
    entry marks a warning, it does not raise.
    """
    caps = {**DEFAULT_CAPS, **(caps or {})}
    rep = HypothesisReport(theorem_id)
    deflt_bmo = lambda v: bmo_norm(np.log(v.values))  # noqa: E731

    if theorem_id == "rght":
        if w1 is None or w2 is None or p is None:
            raise ValueError("rght needs w1, w2 and p")
        fam = rect_family(*w1.shape)
        _entry(rep, "u1_in_Ap_2d", ap_constant(w1, p, fam), caps["ap"], fam.size)
        _entry(rep, "u2_in_A1_2d", a1_constant(w2, fam), caps["a1"], fam.size)
        for nm, wt in (("a1", a1), ("a2", a2), ("b1", b1), ("b2", b2)):
            if wt is not None:
                _entry(rep, f"log_{nm}_bmo", deflt_bmo(wt), caps["bmo"],
                       dyadic_family(wt.n).size)
        comb = Weight2D(w1.grids, w2.values ** p * w1.values)
        c = uniform_fiber_constant(comb, "z2", "RH", delta=delta)
        _entry(rep, "u2^p.u1_rh_unif_z2", c, caps["rh"],
               dyadic_family(w1.grids[1].n).size, note=f"delta={delta}")
        return rep

    if theorem_id == "lft":
        if w1 is None or w2 is None or p is None:
            raise ValueError("lft needs w1, w2 and p")
        fam = rect_family(*w1.shape)
        _entry(rep, "w1_in_Ainf_2d", reverse_holder_constant(w1, delta, fam),
               caps["rh"], fam.size, note=f"delta={delta}")
        _entry(rep, "w2_in_Ap_2d", ap_constant(w2, p, fam), caps["ap"], fam.size)
        return rep

    if theorem_id == "one_naib":
        if w1 is None or w2 is None or p is None:
            raise ValueError("one_naib needs w1, w2 and p")
        n2 = w1.grids[1].n
        c1, l_best = _best_exponent(w1, "z2", exponent_grid)
        _entry(rep, "w1_in_Al_unif_z2", c1, caps["ap"],
               dyadic_family(n2).size, note=f"best l={l_best}")
        c2 = uniform_fiber_constant(w2, "z2", "A_p", p=p)
        _entry(rep, "w2_in_Ap_unif_z2", c2, caps["ap"], dyadic_family(n2).size)
        n1 = w1.grids[0].n
        c3a, m_best_a = _best_exponent(w1, "z1", exponent_grid)
        c3b, m_best_b = _best_exponent(w2, "z1", exponent_grid)
        _entry(rep, "w1_in_Am_unif_z1", c3a, caps["ap"],
               dyadic_family(n1).size, note=f"best m={m_best_a}")
        _entry(rep, "w2_in_Am_unif_z1", c3b, caps["ap"],
               dyadic_family(n1).size, note=f"best m={m_best_b}")
        return rep

    if theorem_id == "inf_neib_all_q":
        if w1 is None or w2 is None or p is None:
            raise ValueError("inf_neib_all_q needs w1, w2 and p")
        n1, n2 = w1.shape
        fam2 = dyadic_family(n2)
        _entry(rep, "w1_mean", float(np.mean(w1.values)), math.inf, 0,
               note="integrability record")
        _entry(rep, "w2_mean", float(np.mean(w2.values)), math.inf, 0,
               note="integrability record")
        _entry(rep, "w1^{1/(1-p)}_mean",
               float(np.mean(w1.values ** (1.0 / (1.0 - p)))), math.inf, 0,
               note="integrability record")
        comb = Weight2D(w1.grids, w2.values ** p * w1.values)
        _entry(rep, "w2^p.w1_rh_unif_z2",
               uniform_fiber_constant(comb, "z2", "RH", delta=delta),
               caps["rh"], fam2.size, note=f"delta={delta}")
        _entry(rep, "w1_in_Ap_unif_z2",
               uniform_fiber_constant(w1, "z2", "A_p", p=p), caps["ap"], fam2.size)
        _entry(rep, "w2_in_A1_unif_z2",
               uniform_fiber_constant(w2, "z2", "A_1"), caps["a1"], fam2.size)
        for nm, wt in (("a1", a1), ("a2", a2), ("b1", b1), ("b2", b2)):
            if wt is not None:
                _entry(rep, f"log_{nm}_bmo", deflt_bmo(wt), caps["bmo"],
                       dyadic_family(wt.n).size)
        _entry(rep, "log_w1_bmo_unif_z1",
               uniform_fiber_constant(w1, "z1", "BMO-log"), caps["bmo"],
               dyadic_family(n1).size)
        _entry(rep, "log_w2_bmo_unif_z1",
               uniform_fiber_constant(w2, "z1", "BMO-log"), caps["bmo"],
               dyadic_family(n1).size)
        return rep

    if theorem_id == "glue":
        if w1 is None or w2 is None:
            raise ValueError("glue needs w1 and w2")
        fam = rect_family(*w1.shape)
        _entry(rep, "w1_in_A1_2d", a1_constant(w1, fam), caps["a1"], fam.size)
        _entry(rep, "w2_in_A1_2d", a1_constant(w2, fam), caps["a1"], fam.size)
        _entry(rep, "w1w2_in_Ainf_2d",
               reverse_holder_constant(w1.times(w2), delta, fam),
               caps["rh"], fam.size, note=f"delta={delta}")
        return rep

    raise ValueError(f"unknown theorem id {theorem_id!r}")


# ---------------------------------------------------------------------------
# Structured-text weight families
#
# Grammar (whitespace separated):
#   spec    := term { "*" term }            product of terms, pointwise
#   term    := NAME [":" NUMBER] {KEY "=" VALUE} | "(" spec ")"
#   1-D families:
#     const [value=1]
#     power alpha=<a> [center=<theta0>]     |e^{i theta} - e^{i c}|^alpha with
#                                           the singular point c offset half a
#                                           grid cell from center, so grid
#                                           samples stay strictly positive
#     exp-cos eps=<e> [freq=1]              exp(eps * cos(freq * theta))
#   2-D families:
#     const, exp-cos (uses cos(theta1 + theta2)),
#     power alpha=<a> [center=..] axis=<1|2>
#     separating a=(1-D spec) b=(1-D spec)  a(z1) * b(z2)
#   The shorthand NAME:<x> binds <x> to the family's leading parameter
#   (value / alpha / eps).
# ---------------------------------------------------------------------------

_LEADING_PARAM = {"const": "value", "power": "alpha", "exp-cos": "eps"}


def _split_kv_nested(text: str):
    """Split 'a=(power alpha=0.5) b=const' into {'a': 'power alpha=0.5', ...}."""
    out = {}
    i = 0
    text = text.strip()
    while i < len(text):
        m = re.match(r"\s*([A-Za-z_][\w-]*)=", text[i:])
        if not m:
            raise ValueError(f"cannot parse nested arguments near {text[i:]!r}")
        key = m.group(1)
        i += m.end()
        if i < len(text) and text[i] == "(":
            depth, j = 1, i + 1
            while j < len(text) and depth:
                depth += text[j] == "("
                depth -= text[j] == ")"
                j += 1
            if depth:
                raise ValueError("unbalanced parentheses in nested weight spec")
            out[key] = text[i + 1:j - 1]
            i = j
        else:
            j = i
            while j < len(text) and not text[j].isspace():
                j += 1
            out[key] = text[i:j]
            i = j
    return out


def _eval_family_1d(name, params, grid: Grid1D) -> np.ndarray:
    theta = grid.points
    if name == "const":
        return np.full(grid.n, float(params.get("value", 1.0)))
    if name == "power":
        alpha = float(params["alpha"])
        center = float(params.get("center", 0.0)) + np.pi / grid.n
        return np.abs(np.exp(1j * theta) - np.exp(1j * center)) ** alpha
    if name == "exp-cos":
        eps = float(params["eps"])
        freq = int(params.get("freq", 1))
        return np.exp(eps * np.cos(freq * theta))
    raise ValueError(f"unknown 1-D weight family {name!r}")


def _eval_family_2d(name, params, grids) -> np.ndarray:
    g1, g2 = grids
    t1 = g1.points[:, None]
    t2 = g2.points[None, :]
    if name == "const":
        return np.full((g1.n, g2.n), float(params.get("value", 1.0)))
    if name == "exp-cos":
        eps = float(params["eps"])
        return np.exp(eps * np.cos(t1 + t2))
    if name == "power":
        axis = int(params.get("axis", 2))
        if axis not in (1, 2):
            raise ValueError("power axis must be 1 or 2")
        sub = _eval_family_1d("power", params, g1 if axis == 1 else g2)
        return np.broadcast_to(
            sub[:, None] if axis == 1 else sub[None, :], (g1.n, g2.n)
        ).copy()
    if name == "separating":
        raise ValueError("separating requires nested a=(..) b=(..) arguments")
    raise ValueError(f"unknown 2-D weight family {name!r}")


def weight_from_spec(text: str, grid_or_grids):
    """Build a Weight1D/Weight2D from a structured-text family spec."""
    text = text.strip()
    if not text:
        raise ValueError("empty weight spec")
    two_d = not isinstance(grid_or_grids, Grid1D)

    # handle 'separating ...' at top level of each product factor
    factors = _split_product(text)
    if two_d:
        g1, g2 = grid_or_grids
        vals = np.ones((g1.n, g2.n))
        for f in factors:
            vals = vals * _eval_factor_2d(f, (g1, g2))
        return Weight2D((g1, g2), vals)
    grid = grid_or_grids
    vals = np.ones(grid.n)
    for f in factors:
        vals = vals * _eval_factor_1d(f, grid)
    return Weight1D(grid, vals)


def _split_product(text: str):
    """Split on top-level '*' respecting parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ValueError("unbalanced parentheses in weight spec")
        if ch == "*" and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if depth:
        raise ValueError("unbalanced parentheses in weight spec")
    parts.append("".join(cur).strip())
    return [p for p in parts if p]


def _head_and_rest(factor: str):
    factor = factor.strip()
    if factor.startswith("(") and factor.endswith(")"):
        return None, factor[1:-1]
    m = re.match(r"([A-Za-z][\w-]*)(?::([-\w.+]+))?\s*(.*)", factor, re.S)
    if not m:
        raise ValueError(f"cannot parse weight family {factor!r}")
    name, lead, rest = m.group(1), m.group(2), m.group(3)
    return (name, lead), rest


def _eval_factor_1d(factor: str, grid: Grid1D) -> np.ndarray:
    head, rest = _head_and_rest(factor)
    if head is None:  # parenthesised subexpression
        return np.asarray(weight_from_spec(rest, grid).values)
    name, lead = head
    params = _split_kv_nested(rest) if rest.strip() else {}
    if lead is not None:
        params.setdefault(_LEADING_PARAM.get(name, "value"), lead)
    return _eval_family_1d(name, params, grid)


def _eval_factor_2d(factor: str, grids) -> np.ndarray:
    head, rest = _head_and_rest(factor)
    if head is None:
        return np.asarray(weight_from_spec(rest, grids).values)
    name, lead = head
    params = _split_kv_nested(rest) if rest.strip() else {}
    if lead is not None:
        params.setdefault(_LEADING_PARAM.get(name, "value"), lead)
    if name == "separating":
        if "a" not in params or "b" not in params:
            raise ValueError("separating needs a=(..) and b=(..)")
        g1, g2 = grids
        av = _eval_factor_1d(params["a"], g1)
        bv = _eval_factor_1d(params["b"], g2)
        return av[:, None] * bv[None, :]
    return _eval_family_2d(name, params, grids)


def weight_from_file(path, expect_dims=None):
    """Load a weight from a TORUS v1 file (imaginary parts must vanish)."""
    fn = read_torus(path)
    values = fn.values
    if np.max(np.abs(values.imag)) > 1e-12 * max(1.0, np.max(np.abs(values))):
        raise ValueError("weight file has a non-trivial imaginary part")
    if values.ndim == 1:
        if expect_dims == 2:
            raise ValueError("expected a 2-D weight file")
        return Weight1D(fn.grid, values.real)
    if expect_dims == 1:
        raise ValueError("expected a 1-D weight file")
    return Weight2D(fn.grids, values.real)
