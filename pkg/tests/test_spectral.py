import numpy as np
import pytest

from ksplit.spectral import (
    CONES,
    LOWER_STRICT,
    QUADRANT,
    RIGHT_HALF,
    TOP_HALF,
    UNION_CONE,
    analytic_signal,
    cone_by_name,
    framed_project,
    hilbert,
    hilbert_z1,
    membership,
    project_cone,
    riesz,
)
from ksplit.torus import (
    Grid1D,
    TorusFn1D,
    TorusFn2D,
    poisson_convolve,
    random_fn1d,
    random_fn2d,
)
from ksplit.weights import Weight1D
from conftest import refine1d


def monomial2(grids, m, k):
    t1 = grids[0].points[:, None]
    t2 = grids[1].points[None, :]
    return TorusFn2D(grids, np.exp(1j * (m * t1 + k * t2)))


class TestHilbert:
    def test_constant_maps_to_zero(self):
        g = Grid1D(16)
        f = TorusFn1D(g, np.ones(16))
        assert np.max(np.abs(hilbert(f).values)) < 1e-14

    def test_cos_to_sin(self):
        g = Grid1D(16)
        f = TorusFn1D(g, np.cos(g.points))
        assert np.max(np.abs(hilbert(f).values - np.sin(g.points))) < 1e-13

    def test_h_squared_is_minus_identity_minus_mean(self, rng):
        g = Grid1D(32)
        for _ in range(20):
            f = random_fn1d(rng, g, band=15)
            hh = hilbert(hilbert(f))
            expected = -(f.values - np.mean(f.values))
            scale = max(1.0, np.max(np.abs(f.values)))
            assert np.max(np.abs(hh.values - expected)) < 1e-12 * scale


class TestRiesz:
    def test_keeps_nonnegative_frequencies(self):
        g = Grid1D(8)
        t = g.points
        f = TorusFn1D(g, np.exp(-1j * t) + 1.0 + np.exp(1j * t))
        out = riesz(f)
        expected = 1.0 + np.exp(1j * t)
        assert np.max(np.abs(out.values - expected)) < 1e-13

    def test_fixes_analytic_polynomials(self, rng):
        g = Grid1D(16)
        raw = random_fn1d(rng, g, band=6)
        analytic = TorusFn1D.from_spectrum(g, raw.spectrum * (g.freqs >= 0))
        out = riesz(analytic)
        assert np.max(np.abs(out.values - analytic.values)) < 1e-13

    def test_multiplier_composition_identity(self, rng):
        # R = (I + iH + mean-projection) / 2 away from the Nyquist bin
        g = Grid1D(16)
        for _ in range(20):
            f = random_fn1d(rng, g, band=7)
            lhs = riesz(f).values
            rhs = 0.5 * (f.values + 1j * hilbert(f).values + np.mean(f.values))
            assert np.max(np.abs(lhs - rhs)) < 1e-12


class TestAnalyticSignal:
    def test_exact_nonnegative_spectrum(self, rng):
        g = Grid1D(16)
        raw = TorusFn1D(g, rng.standard_normal(16))
        # drop the unpaired Nyquist bin so the completion is exactly invertible
        f = TorusFn1D.from_spectrum(g, raw.spectrum * (g.freqs > -g.n // 2))
        out = analytic_signal(f)
        c = out.spectrum
        assert np.max(np.abs(c[g.freqs < 0])) < 1e-14
        assert np.max(np.abs(out.values.real - f.values.real)) < 1e-13


class TestProjectCone:
    def test_projector_P_examples(self):
        grids = (Grid1D(8), Grid1D(8))
        # both frequencies negative: annihilated
        f = monomial2(grids, -1, -1)
        out = project_cone(f, UNION_CONE)
        assert np.max(np.abs(out.values)) < 1e-13
        # first nonnegative: kept even with very negative second
        f = monomial2(grids, 1, -3)
        out = project_cone(f, UNION_CONE)
        assert np.max(np.abs(out.values - f.values)) < 1e-13

    def test_lower_strict_annihilates_constants(self):
        grids = (Grid1D(8), Grid1D(8))
        f = TorusFn2D(grids, np.ones((8, 8)))
        out = project_cone(f, LOWER_STRICT)
        assert np.max(np.abs(out.values)) < 1e-14

    def test_idempotent_on_random(self, rng):
        grids = (Grid1D(16), Grid1D(16))
        for name in ("union", "quadrant", "lower-strict", "right-half"):
            cone = cone_by_name(name)
            for _ in range(25):
                f = random_fn2d(rng, grids, band=7)
                once = project_cone(f, cone)
                twice = project_cone(once, cone)
                assert np.array_equal(once.spectrum, twice.spectrum)

    def test_identity_decomposition_every_cone(self, rng):
        grids = (Grid1D(16), Grid1D(16))
        f = random_fn2d(rng, grids, band=7)
        for cone in CONES.values():
            part = project_cone(f, cone)
            rest = project_cone(f, cone.complement())
            # exact at the coefficient level
            assert np.array_equal(
                part.spectrum + rest.spectrum, f.spectrum
            )

    def test_riesz_commutes_with_poisson(self, rng):
        g = Grid1D(32)
        f = random_fn1d(rng, g)
        a = riesz(poisson_convolve(f, 0.9))
        b = poisson_convolve(riesz(f), 0.9)
        assert np.max(np.abs(a.values - b.values)) < 1e-12


class TestFramedProject:
    def test_unit_frame_reduces_to_projection(self, rng):
        grids = (Grid1D(16), Grid1D(16))
        f = random_fn2d(rng, grids, band=7)
        a = framed_project(f, np.ones((16, 16)), UNION_CONE)
        b = project_cone(f, UNION_CONE)
        assert np.max(np.abs(a.values - b.values)) < 1e-12

    def test_monomial_frame_exact(self, rng):
        grids = (Grid1D(16), Grid1D(16))
        t1 = grids[0].points[:, None]
        u = np.exp(1j * t1) * np.ones((1, 16))  # frame z1
        f = random_fn2d(rng, grids, band=4)
        out = framed_project(f, u, UNION_CONE)
        inner = project_cone(TorusFn2D(grids, u * f.values), UNION_CONE)
        expected = inner.values / u
        assert np.max(np.abs(out.values - expected)) < 1e-12

    def test_idempotent_on_framed_polynomials(self, rng):
        grids = (Grid1D(16), Grid1D(16))
        u = np.exp(rng.standard_normal((16, 16)) * 0.3)
        poly = random_fn2d(rng, grids, band=4)
        f = TorusFn2D(grids, poly.values / u)
        once = framed_project(f, u, UNION_CONE)
        twice = framed_project(once, u, UNION_CONE)
        scale = max(1.0, np.max(np.abs(once.values)))
        assert np.max(np.abs(twice.values - once.values)) < 1e-10 * scale

    def test_frame_scaling_invariance(self, rng):
        grids = (Grid1D(16), Grid1D(16))
        u = np.exp(rng.standard_normal((16, 16)) * 0.3)
        f = random_fn2d(rng, grids, band=4)
        a = framed_project(f, u, UNION_CONE)
        b = framed_project(f, 3.7 * u, UNION_CONE)
        assert np.max(np.abs(a.values - b.values)) < 1e-12 * np.max(np.abs(a.values))

    def test_vanishing_frame_rejected(self, rng):
        grids = (Grid1D(8), Grid1D(8))
        f = random_fn2d(rng, grids, band=3)
        u = np.ones((8, 8))
        u[2, 5] = 0.0
        with pytest.raises(ValueError):
            framed_project(f, u, UNION_CONE)


class TestMembership:
    def test_quadrant_member(self):
        grids = (Grid1D(8), Grid1D(8))
        f = monomial2(grids, 2, 3)
        member, leak = membership(f, QUADRANT, 1e-10)
        assert member and leak < 1e-13

    def test_quadrant_non_member(self):
        grids = (Grid1D(8), Grid1D(8))
        f = monomial2(grids, 0, -1)
        member, leak = membership(f, QUADRANT, 1e-10)
        assert not member and leak > 0.9

    def test_zero_function_is_member(self):
        grids = (Grid1D(8), Grid1D(8))
        f = TorusFn2D(grids, np.zeros((8, 8)))
        member, leak = membership(f, QUADRANT, 1e-10)
        assert member and leak == 0.0

    def test_projection_output_always_passes(self, rng):
        grids = (Grid1D(16), Grid1D(16))
        for _ in range(10):
            f = random_fn2d(rng, grids, band=7)
            out = project_cone(f, UNION_CONE)
            member, leak = membership(out, UNION_CONE, 1e-12)
            assert member and leak < 1e-14


class TestWeakTypeTail:
    """Tail bound for the framed lower projector on circle fibers.

    For Q with weak type (1,1) w.r.t. nu = w*mu and e = {|Qf| > lam}:
    int_e |Qf|^alpha dnu <= C * ||f||_{L1(nu)}^alpha * nu(e)^{1-alpha}.
    The measured envelope C must be finite and refinement-stable.
    """

    @staticmethod
    def _envelope(n, alpha=0.5, trials=20):
        rng = np.random.default_rng(99)
        g = Grid1D(n)
        theta = g.points
        w = np.exp(0.4 * np.cos(theta))
        u = np.exp(0.3 * np.sin(theta))
        worst = 0.0
        for _ in range(trials):
            f = random_fn1d(rng, g, band=32)
            uf = TorusFn1D(g, u * f.values)
            qf = (uf.values - riesz(uf).values) / u
            norm_f = np.mean(np.abs(f.values) * w)
            aq = np.abs(qf)
            for lam in (0.25, 0.5, 1.0) :
                e = aq > lam * np.max(aq)
                nu_e = np.mean(np.where(e, w, 0.0))
                if nu_e == 0.0:
                    continue
                lhs = np.mean(np.where(e, aq ** alpha * w, 0.0))
                worst = max(worst, lhs / (norm_f ** alpha * nu_e ** (1 - alpha)))
        return worst

    def test_envelope_finite_and_stable(self):
        e128 = self._envelope(128)
        e256 = self._envelope(256)
        assert np.isfinite(e128) and e128 > 0
        assert e256 <= 2.0 * e128 and e128 <= 2.0 * e256
