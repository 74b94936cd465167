import numpy as np
import pytest

from ksplit.oracle import (
    OracleProblem,
    kconstant_sweep,
    random_instance,
    solve_convex,
    solve_heuristic,
)
from ksplit.spectral import QUADRANT, TOP_HALF, UNION_CONE, project_cone
from ksplit.torus import Grid1D, TorusFn1D, TorusFn2D, random_fn2d, weighted_norm


def make_problem(rng, n=8, r=1.0, p=2.0, cone1=QUADRANT, cone2=QUADRANT,
                 unit_weights=True, **kw):
    grids = (Grid1D(n), Grid1D(n))
    f, g, h = random_instance(rng, grids, cone1, cone2, band=n // 4)
    if unit_weights:
        w1 = np.ones((n, n))
        w2 = np.ones((n, n))
    else:
        w1 = np.exp(rng.standard_normal((n, n)) * 0.3)
        w2 = np.exp(rng.standard_normal((n, n)) * 0.3)
    return OracleProblem(f, g, h, cone1, cone2, w1, w2, r, p, **kw)


class TestClosedForm22:
    def test_orthogonal_projection_constants(self, rng):
        # analytic f, same cones, r = p = 2, unit weights: both constants <= 1
        for _ in range(10):
            prob = make_problem(rng, n=8, r=2.0, p=2.0)
            res = solve_convex(prob)
            assert res.method == "closed-form"
            assert res.c1 <= 1.0 + 1e-8
            assert res.c2 <= 1.0 + 1e-8
            assert res.feasible

    def test_additivity_and_membership(self, rng):
        prob = make_problem(rng, n=8, r=2.0, p=2.0)
        res = solve_convex(prob)
        err = np.max(np.abs(res.g_prime.values + res.h_prime.values - prob.f.values))
        assert err < 1e-12 * max(1.0, np.max(np.abs(prob.f.values)))
        mask = QUADRANT.mask(prob.f.grids)
        leak = np.max(np.abs(res.g_prime.spectrum[~mask]))
        assert leak < 1e-10 * max(1.0, np.max(np.abs(res.g_prime.spectrum)))

    def test_zero_g_gives_zero_g_prime(self, rng):
        n = 8
        grids = (Grid1D(n), Grid1D(n))
        F = random_fn2d(rng, grids, band=2)
        f = project_cone(F, QUADRANT)
        zero = TorusFn2D(grids, np.zeros((n, n)))
        prob = OracleProblem(
            f, zero, f, QUADRANT, QUADRANT, np.ones((n, n)), np.ones((n, n)),
            2.0, 2.0,
        )
        with pytest.raises(ValueError):
            solve_convex(prob)  # zero-norm g is rejected per the contract

    def test_beats_or_matches_descent(self, rng):
        # the closed form is optimal: descent from any start cannot do better
        prob = make_problem(rng, n=8, r=2.0, p=2.0)
        res = solve_convex(prob)
        prob_desc = make_problem(
            np.random.default_rng(0), n=8, r=2.0, p=2.0
        )  # fresh but same distribution; compare on the same instance instead
        # rerun the same instance with weights perturbed to force descent
        w = np.ones((8, 8))
        w[0, 0] = 1.0 + 1e-12  # non-constant: descent path
        prob2 = OracleProblem(
            prob.f, prob.g, prob.h, QUADRANT, QUADRANT, w, np.ones((8, 8)),
            2.0, 2.0, max_iter=600,
        )
        res2 = solve_convex(prob2)
        assert res2.method == "projected-descent"
        assert res2.objective <= res.objective * (1.0 + 1e-4)


class TestDescent:
    def test_slice_search_cannot_beat_solver(self, rng):
        # coarse exhaustive lattice over a 2-complex-dimensional slice through
        # the solver's solution neighbourhood
        prob = make_problem(rng, n=8, r=1.0, p=2.0, max_iter=800)
        res = solve_convex(prob)
        free = prob.mask1 & prob.mask2
        nfree = int(free.sum())
        x_star = res.g_prime.spectrum[free]

        def objective(x):
            c = np.where(prob.mask1 & ~prob.mask2, prob.f.spectrum, 0.0)
            c[free] = x
            vg = np.fft.ifftn(np.fft.ifftshift(c)) * c.size
            vh = prob.f.values - vg
            r1 = weighted_norm(vg, prob.weight1, 1.0) / weighted_norm(
                prob.g, prob.weight1, 1.0
            )
            r2 = weighted_norm(vh, prob.weight2, 2.0) / weighted_norm(
                prob.h, prob.weight2, 2.0
            )
            return max(r1, r2)

        sub = np.random.default_rng(5)
        d1 = sub.standard_normal(nfree) + 1j * sub.standard_normal(nfree)
        d2 = sub.standard_normal(nfree) + 1j * sub.standard_normal(nfree)
        scale = max(np.max(np.abs(x_star)), 1e-3)
        grid_pts = np.linspace(-0.5, 0.5, 9) * scale
        best_slice = np.inf
        for a in grid_pts:
            for b in grid_pts:
                best_slice = min(best_slice, objective(x_star + a * d1 + b * d2))
        # the solver point lies on the slice (a = b = 0): slice min <= solver
        assert best_slice <= res.objective + 1e-12
        # and the coarse search cannot improve materially on it (convexity)
        assert res.objective <= best_slice + 5e-3

    def test_local_optimality_certificate(self, rng):
        # convex objective: no random perturbation may decrease it materially
        prob = make_problem(rng, n=8, r=1.0, p=2.0, max_iter=800, tol=1e-12)
        res = solve_convex(prob)
        free = prob.mask1 & prob.mask2
        x_star = res.g_prime.spectrum[free]
        obj0 = res.objective
        sub = np.random.default_rng(17)
        scale = max(np.max(np.abs(x_star)), 1e-3)
        best = obj0
        for _ in range(100):
            d = sub.standard_normal(x_star.size) + 1j * sub.standard_normal(x_star.size)
            for eps in (1e-3, 1e-2, 3e-2):
                c = np.where(prob.mask1 & ~prob.mask2, prob.f.spectrum, 0.0)
                c[free] = x_star + eps * scale * d
                vg = np.fft.ifftn(np.fft.ifftshift(c)) * c.size
                vh = prob.f.values - vg
                r1 = weighted_norm(vg, prob.weight1, 1.0) / weighted_norm(
                    prob.g, prob.weight1, 1.0
                )
                r2 = weighted_norm(vh, prob.weight2, 2.0) / weighted_norm(
                    prob.h, prob.weight2, 2.0
                )
                best = min(best, max(r1, r2))
        assert best >= obj0 - 5e-3 * obj0

    def test_weighted_instance_runs(self, rng):
        prob = make_problem(rng, n=8, r=1.0, p=2.0, unit_weights=False)
        res = solve_convex(prob)
        assert np.isfinite(res.objective)
        assert res.converged

    def test_warm_start_never_hurts(self, rng):
        prob = make_problem(rng, n=8, r=1.0, p=3.0)
        base = solve_convex(prob)
        warm = solve_convex(prob, warm_starts=[base.g_prime])
        assert warm.objective <= base.objective + 1e-12

    def test_sup_norm_instance(self, rng):
        prob = make_problem(rng, n=8, r=1.0, p=np.inf, max_iter=300)
        res = solve_convex(prob)
        assert np.isfinite(res.objective)
        # exact final评估: c2 is the true weighted sup ratio
        vh = res.h_prime.values
        sup = np.max(np.abs(vh) / prob.weight2)
        sup_h = np.max(np.abs(prob.h.values) / prob.weight2)
        assert res.c2 == pytest.approx(sup / sup_h, rel=1e-12)

    def test_rejects_quasinorm_exponents(self, rng):
        prob = make_problem(rng, n=8, r=0.5, p=2.0)
        with pytest.raises(ValueError):
            solve_convex(prob)


class TestHeuristic:
    def test_zero_g_exact(self, rng):
        n = 8
        grids = (Grid1D(n), Grid1D(n))
        F = random_fn2d(rng, grids, band=2)
        f = project_cone(F, QUADRANT)
        h = TorusFn2D(grids, f.values.copy())
        eps = 1e-8 * np.max(np.abs(f.values))
        g = TorusFn2D(grids, np.full((n, n), eps))  # tiny but nonzero norm
        fe = TorusFn2D(grids, f.values + eps)
        prob = OracleProblem(
            fe, g, h, QUADRANT, QUADRANT, np.ones((n, n)), np.ones((n, n)),
            0.5, 2.0,
        )
        res = solve_heuristic(prob, seed=3)
        assert res.heuristic
        assert res.method == "heuristic"
        assert res.c2 <= 1.0 + 1e-4

    def test_matches_coarse_exhaustive_on_tiny_instance(self):
        # 8x8 grid but spectra confined to a 2x2 block: 1 free coefficient
        n = 8
        grids = (Grid1D(n), Grid1D(n))
        rng = np.random.default_rng(11)
        mask1 = np.zeros((n, n), dtype=bool)
        mask1[n // 2: n // 2 + 2, n // 2: n // 2 + 2] = True  # freqs {0,1}^2
        mask2 = np.zeros_like(mask1)
        mask2[n // 2, n // 2] = True
        mask2[n // 2 + 1, n // 2 + 1] = True
        c = np.where(mask1, rng.standard_normal((n, n)) +
                     1j * rng.standard_normal((n, n)), 0.0)
        f = TorusFn2D.from_spectrum(grids, c)
        ch = np.where(mask2, rng.standard_normal((n, n)) +
                      1j * rng.standard_normal((n, n)), 0.0)
        h = TorusFn2D.from_spectrum(grids, ch)
        g = TorusFn2D(grids, f.values - h.values)
        prob = OracleProblem(
            f, g, h, mask1, mask2, np.ones((n, n)), np.ones((n, n)), 0.5, 2.0,
            max_iter=800,
        )
        res = solve_heuristic(prob, seed=2, starts=12)
        free = mask1 & mask2
        assert int(free.sum()) == 2

        def objective(x):
            cc = np.where(mask1 & ~mask2, c, 0.0)
            cc[free] = x
            vg = np.fft.ifftn(np.fft.ifftshift(cc)) * cc.size
            vh = f.values - vg
            r1 = weighted_norm(vg, prob.weight1, 0.5) / weighted_norm(
                g, prob.weight1, 0.5
            )
            r2 = weighted_norm(vh, prob.weight2, 2.0) / weighted_norm(
                h, prob.weight2, 2.0
            )
            return max(r1, r2)

        scale = np.max(np.abs(c))
        pts = np.linspace(-1.2, 1.2, 13) * scale
        best = np.inf
        for a in pts:
            for b in pts:
                for cc_ in pts:
                    for d in pts:
                        best = min(best, objective(np.array([a + 1j * b, cc_ + 1j * d])))
        resolution = 2.4 * scale / 12  # lattice spacing
        assert res.objective <= best + resolution

    def test_upper_bound_is_nonnegative_and_finite(self, rng):
        prob = make_problem(rng, n=8, r=0.5, p=2.0)
        res = solve_heuristic(prob, seed=1)
        assert 0.0 <= res.objective < np.inf


class TestDeterminism:
    def test_bitwise_repeatability(self):
        for seed in (0, 99):
            rng1 = np.random.default_rng(seed)
            rng2 = np.random.default_rng(seed)
            p1 = make_problem(rng1, n=8, r=1.0, p=2.0)
            p2 = make_problem(rng2, n=8, r=1.0, p=2.0)
            r1 = solve_convex(p1)
            r2 = solve_convex(p2)
            assert r1.objective == r2.objective
            assert np.array_equal(r1.g_prime.values, r2.g_prime.values)
            assert r1.iterations == r2.iterations


class TestProblemValidation:
    def test_rejects_large_grid(self, rng):
        n = 128
        grids = (Grid1D(n), Grid1D(n))
        f, g, h = random_instance(rng, grids, QUADRANT, QUADRANT, band=4)
        with pytest.raises(ValueError):
            OracleProblem(f, g, h, QUADRANT, QUADRANT,
                          np.ones((n, n)), np.ones((n, n)), 1.0, 2.0)
        # explicit override allowed
        OracleProblem(f, g, h, QUADRANT, QUADRANT,
                      np.ones((n, n)), np.ones((n, n)), 1.0, 2.0, max_grid=128)

    def test_rejects_broken_decomposition(self, rng):
        n = 8
        grids = (Grid1D(n), Grid1D(n))
        f = random_fn2d(rng, grids, band=2)
        g = random_fn2d(rng, grids, band=2)
        with pytest.raises(ValueError):
            OracleProblem(f, g, g, QUADRANT, QUADRANT,
                          np.ones((n, n)), np.ones((n, n)), 1.0, 2.0)

    def test_infeasible_flagged(self, rng):
        n = 8
        grids = (Grid1D(n), Grid1D(n))
        f = random_fn2d(rng, grids, band=2)  # full-spectrum f
        h = TorusFn2D(grids, 0.5 * f.values)
        g = TorusFn2D(grids, f.values - h.values)
        prob = OracleProblem(f, g, h, QUADRANT, QUADRANT,
                             np.ones((n, n)), np.ones((n, n)), 1.0, 2.0)
        res = solve_convex(prob)
        assert not res.feasible
        assert res.infeasible_leakage > 1e-8

    def test_1d_problem_with_named_cones(self, rng):
        g1 = Grid1D(16)
        from ksplit.torus import random_fn1d

        raw = random_fn1d(rng, g1, band=6)
        f = TorusFn1D.from_spectrum(g1, raw.spectrum * (g1.freqs >= 0))
        h = random_fn1d(rng, g1, band=6)
        g = TorusFn1D(g1, f.values - h.values)
        prob = OracleProblem(f, g, h, "analytic", "analytic",
                             np.ones(16), np.ones(16), 2.0, 2.0)
        res = solve_convex(prob)
        assert res.objective <= 1.0 + 1e-8


class TestInstanceGeneration:
    def test_instance_in_subspace_sum(self, rng):
        grids = (Grid1D(16), Grid1D(16))
        f, g, h = random_instance(rng, grids, TOP_HALF, UNION_CONE)
        mask = TOP_HALF.mask(grids) | UNION_CONE.mask(grids)
        leak = np.max(np.abs(f.spectrum[~mask]))
        assert leak < 1e-13
        err = np.max(np.abs(f.values - g.values - h.values))
        assert err < 1e-12 * max(1.0, np.max(np.abs(f.values)))

    def test_components_not_in_subspaces(self, rng):
        grids = (Grid1D(16), Grid1D(16))
        f, g, h = random_instance(rng, grids, QUADRANT, QUADRANT)
        mask = QUADRANT.mask(grids)
        assert np.max(np.abs(g.spectrum[~mask])) > 1e-6
        assert np.max(np.abs(h.spectrum[~mask])) > 1e-6


class TestSweep:
    def test_constant_family_finite(self):
        rows = kconstant_sweep(
            "const", [1.0], r=1.0, p=2.0, trials=5, n=16, seed=3
        )
        assert len(rows) == 1
        assert np.isfinite(rows[0].oracle_max)
        assert rows[0].oracle_max > 0

    def test_deterministic_rows(self):
        a = kconstant_sweep("const", [1.0], 1.0, 2.0, trials=3, n=16, seed=5)
        b = kconstant_sweep("const", [1.0], 1.0, 2.0, trials=3, n=16, seed=5)
        assert a[0].oracle_max == b[0].oracle_max

    def test_thread_pool_matches_serial(self):
        a = kconstant_sweep("const", [1.0], 1.0, 2.0, trials=4, n=16, seed=5,
                            max_workers=1)
        b = kconstant_sweep("const", [1.0], 1.0, 2.0, trials=4, n=16, seed=5,
                            max_workers=4)
        assert a[0].oracle_max == b[0].oracle_max

    def test_rejects_zero_trials(self):
        with pytest.raises(ValueError):
            kconstant_sweep("const", [1.0], 1.0, 2.0, trials=0, n=16, seed=1)
