import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from batchgrad.objectives import (
    Example21,
    NonConvergenceError,
    Objective,
    audit_assumptions,
    compute_jstar_oracle,
    make_example21,
    make_objective,
    make_quadratic_logsumexp,
    make_strongly_convex_quadratic,
)


def central_difference(obj, theta, h):
    g = np.empty(obj.dim)
    for i in range(obj.dim):
        e = np.zeros(obj.dim)
        e[i] = h
        g[i] = (obj.evaluate(theta + e) - obj.evaluate(theta - e)) / (2 * h)
    return g


OBJECTIVES = [
    lambda: make_quadratic_logsumexp(8, 100.0, seed=3),
    lambda: make_quadratic_logsumexp(2, 5.0, seed=0),
    lambda: make_strongly_convex_quadratic(6, 1.0, 3.0, seed=2),
    make_example21,
]


@pytest.mark.parametrize("factory", OBJECTIVES)
class TestObjectiveContract:
    def test_gradient_matches_central_differences(self, factory):
        obj = factory()
        rng = np.random.default_rng(0)
        for _ in range(100):
            theta = rng.uniform(-3, 3, obj.dim)
            h = 1e-5 * (1 + np.linalg.norm(theta))
            num = central_difference(obj, theta, h)
            ana = obj.gradient(theta)
            np.testing.assert_allclose(ana, num, rtol=1e-4, atol=1e-6)

    def test_gradient_lipschitz(self, factory):
        obj = factory()
        rng = np.random.default_rng(1)
        for _ in range(1000):
            x, y = rng.uniform(-8, 8, (2, obj.dim))
            lhs = np.linalg.norm(obj.gradient(x) - obj.gradient(y))
            assert lhs <= obj.lipschitz_2L * np.linalg.norm(x - y) * (1 + 1e-12)

    def test_generic_perturbed_values_agree_with_override(self, factory):
        obj = factory()
        theta = np.linspace(-1, 1, obj.dim)
        coords = np.arange(obj.dim)
        fast = obj.perturbed_values(theta, coords, 0.1)
        slow = Objective.perturbed_values(obj, theta, coords, 0.1)
        np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-12)


class TestQuadraticLogSumExp:
    @pytest.mark.parametrize("d,cond", [(2, 2.0), (10, 100.0), (100, 100.0), (1000, 100.0)])
    def test_condition_number(self, d, cond):
        obj = make_quadratic_logsumexp(d, cond, seed=7)
        lam = np.linalg.eigvalsh(obj.A)
        assert lam[0] > 0
        assert abs(lam[-1] / lam[0] - cond) <= 1e-9 * cond
        np.testing.assert_allclose(obj.A, obj.A.T, atol=0)

    def test_not_diagonal(self):
        A = make_quadratic_logsumexp(50, 100.0, seed=7).A
        off = A - np.diag(np.diag(A))
        assert np.linalg.norm(off) > 0.5 * np.linalg.norm(np.diag(A))

    @pytest.mark.parametrize("d", [2, 5, 100])
    def test_gradient_at_origin_is_uniform(self, d):
        obj = make_quadratic_logsumexp(d, 10.0, seed=0)
        np.testing.assert_allclose(obj.gradient(np.zeros(d)), np.full(d, 1.0 / d), rtol=1e-15)

    def test_lipschitz_constant_formula(self):
        obj = make_quadratic_logsumexp(20, 100.0, seed=4)
        assert obj.lipschitz_2L == pytest.approx(2 * np.linalg.eigvalsh(obj.A)[-1] + 1)

    def test_rejects_dimension_one(self):
        with pytest.raises(ValueError, match="invalid dimension"):
            make_quadratic_logsumexp(1, 10.0, seed=0)

    def test_no_overflow_at_large_arguments(self):
        obj = make_quadratic_logsumexp(3, 10.0, seed=0)
        theta = np.array([800.0, 0.0, -800.0])
        assert np.isfinite(obj.evaluate(theta))
        assert np.all(np.isfinite(obj.gradient(theta)))

    def test_seed_determinism(self):
        a = make_quadratic_logsumexp(10, 10.0, seed=5).A
        b = make_quadratic_logsumexp(10, 10.0, seed=5).A
        assert np.array_equal(a, b)

    def test_j_star_unknown_until_oracle(self):
        obj = make_quadratic_logsumexp(5, 10.0, seed=0)
        assert obj.j_star is None and obj.minimizer_estimate is None
        value = compute_jstar_oracle(obj)
        assert obj.j_star == value
        assert np.linalg.norm(obj.gradient(obj.minimizer_estimate)) < 1e-10


class TestExample21:
    def test_seams_continuous(self):
        obj = Example21()
        for x in (5.0, -5.0):
            assert obj.sine_branch(x) == pytest.approx(1.0, abs=1e-15)
            assert obj.sqrt_branch(abs(x)) == pytest.approx(1.0, abs=1e-15)
            assert obj.evaluate(np.array([x])) == pytest.approx(1.0, abs=1e-15)

    def test_values(self):
        obj = make_example21()
        assert obj.evaluate(np.array([3.0])) == pytest.approx(1.0, abs=1e-15)
        assert obj.evaluate(np.array([-1.0])) == pytest.approx(1.0, abs=1e-15)
        for x in (-4.0, 0.0, 4.0):
            assert obj.evaluate(np.array([x])) == pytest.approx(0.0, abs=1e-15)

    def test_minimizers_by_grid_oracle(self):
        obj = make_example21()
        grid = np.linspace(-20, 20, 400_001)
        vals = np.array([obj.evaluate(np.array([x])) for x in grid])
        assert vals.min() >= -1e-15
        # local minima of the sampled values that reach zero
        zeros = grid[vals < 1e-9]
        clusters = np.split(zeros, np.flatnonzero(np.diff(zeros) > 0.5) + 1)
        centres = sorted(round(float(c.mean()), 3) for c in clusters)
        assert centres == [-4.0, 0.0, 4.0]
        assert sorted(float(m[0]) for m in obj.minimizer_set) == centres
        assert obj.j_star == 0.0

    def test_tails_grow(self):
        obj = make_example21()
        assert obj.evaluate(np.array([50.0])) > obj.evaluate(np.array([10.0])) > 1.0
        assert obj.evaluate(np.array([-50.0])) == obj.evaluate(np.array([50.0]))


class TestStronglyConvexQuadratic:
    def test_scalar_example(self):
        obj = make_strongly_convex_quadratic(1, 1.0, 1.0, seed=0, theta_star=np.zeros(1))
        assert obj.evaluate(np.array([2.0])) == pytest.approx(2.0)
        np.testing.assert_allclose(obj.gradient(np.array([2.0])), [2.0])

    def test_gradient_zero_at_minimizer(self):
        obj = make_strongly_convex_quadratic(5, 1.0, 4.0, seed=3)
        np.testing.assert_allclose(obj.gradient(obj.theta_star), 0.0, atol=1e-15)
        assert obj.j_star == 0.0

    def test_eigendirection_profile(self):
        obj = make_strongly_convex_quadratic(4, 0.5, 2.0, seed=1)
        lam, vec = np.linalg.eigh(obj.H)
        for k in range(4):
            for t in (-1.5, 0.3, 2.0):
                value = obj.evaluate(obj.theta_star + t * vec[:, k])
                assert value == pytest.approx(0.5 * lam[k] * t * t, rel=1e-12)

    def test_spectrum_bounds(self):
        obj = make_strongly_convex_quadratic(7, 0.5, 3.0, seed=8)
        lam = np.linalg.eigvalsh(obj.H)
        assert lam[0] == pytest.approx(0.5) and lam[-1] == pytest.approx(3.0)
        assert obj.c1 == pytest.approx(2 * 3.0 ** 2 / 0.5)

    @pytest.mark.parametrize("c_lo,c_hi", [(0.0, 1.0), (-1.0, 1.0), (2.0, 1.0)])
    def test_invalid_spectrum(self, c_lo, c_hi):
        with pytest.raises(ValueError, match="invalid spectrum"):
            make_strongly_convex_quadratic(3, c_lo, c_hi, seed=0)


class TestOracle:
    def test_strongly_convex_quadratic_minimum(self):
        obj = make_strongly_convex_quadratic(6, 1.0, 5.0, seed=0)
        tol = 1e-8
        assert abs(compute_jstar_oracle(obj, tol=tol)) <= tol ** 2 * 5.0

    def test_agrees_from_three_starts(self):
        values = []
        for start in (np.zeros(10), np.full(10, 3.0), np.linspace(-5, 5, 10)):
            obj = make_quadratic_logsumexp(10, 10.0, seed=1)
            values.append(compute_jstar_oracle(obj, theta0=start))
        assert max(values) - min(values) < 1e-8

    def test_example21_from_grid_neighbourhood(self):
        assert compute_jstar_oracle(make_example21(), theta0=np.array([0.7])) == pytest.approx(
            0.0, abs=1e-15)

    def test_iteration_cap(self):
        obj = make_quadratic_logsumexp(10, 100.0, seed=1)
        with pytest.raises(NonConvergenceError) as info:
            compute_jstar_oracle(obj, theta0=np.full(10, 5.0), max_iter=3)
        assert np.isfinite(info.value.best_value)

    def test_rejects_nonpositive_tol(self):
        with pytest.raises(ValueError):
            compute_jstar_oracle(make_example21(), tol=0.0)

    def test_desk_objective(self):
        obj = make_quadratic_logsumexp(100, 100.0, seed=7)
        value = compute_jstar_oracle(obj, tol=1e-10)
        g = obj.gradient(obj.minimizer_estimate)
        assert np.linalg.norm(g) < 1e-10
        # no sampled point does better
        rng = np.random.default_rng(0)
        for _ in range(200):
            assert obj.evaluate(obj.minimizer_estimate + 0.1 * rng.standard_normal(100)) >= value


class TestAudit:
    def test_quadratic_c1_bound(self):
        obj = make_strongly_convex_quadratic(5, 1.0, 2.0, seed=0)
        audit = audit_assumptions(obj, 2000, region_radius=3.0, seed=1)
        assert audit.estimated_C1 <= 8.0 * 1.05
        assert audit.estimated_L <= 0.5 * obj.lipschitz_2L * 1.05
        assert all(v != "pass" for v in audit.verdicts.values())
        assert "fail" not in audit.verdicts.values()

    def test_example21_non_fail(self):
        audit = audit_assumptions(make_example21(), 500, region_radius=10.0, seed=2)
        assert set(audit.verdicts) == {"J1", "J2", "J3", "J4", "J5"}
        assert "fail" not in audit.verdicts.values()
        assert audit.j4_witness.shape == (500, 2) and audit.j5_witness.shape == (500, 2)

    def test_j3_samples_respect_estimate(self):
        obj = make_strongly_convex_quadratic(3, 0.5, 2.0, seed=5)
        audit = audit_assumptions(obj, 300, region_radius=2.0, seed=0)
        jbar, gnorm = audit.j4_witness.T
        keep = jbar > 1e-12
        assert np.all(gnorm[keep] ** 2 <= audit.estimated_C1 * jbar[keep] * (1 + 1e-12))

    def test_falsifies_wrong_lipschitz_claim(self):
        obj = make_strongly_convex_quadratic(3, 1.0, 4.0, seed=0)
        obj.lipschitz_2L = 1.0  # wrong on purpose
        audit = audit_assumptions(obj, 200, region_radius=1.0, seed=0)
        assert audit.verdicts["J1"] == "fail"

    def test_identical_pairs_skipped(self):
        obj = make_example21()
        audit = audit_assumptions(obj, 100, region_radius=0.0, seed=0)
        assert audit.estimated_L == 0.0 and math.isfinite(audit.estimated_C1)

    def test_unavailable_without_minimum(self):
        with pytest.raises(ValueError, match="audit unavailable"):
            audit_assumptions(make_quadratic_logsumexp(3, 2.0, seed=0), 100, 1.0, seed=0)

    def test_sample_count_floor(self):
        with pytest.raises(ValueError):
            audit_assumptions(make_example21(), 99, 1.0, seed=0)


def test_make_objective_roundtrip():
    obj = make_quadratic_logsumexp(4, 10.0, seed=2)
    again = make_objective(obj.spec())
    assert np.array_equal(obj.A, again.A)
    with pytest.raises(ValueError, match="unknown objective"):
        make_objective({"name": "rosenbrock"})


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=3, max_size=3))
def test_jstar_is_lower_bound(values):
    obj = make_strongly_convex_quadratic(3, 0.5, 2.0, seed=9)
    assert obj.evaluate(np.array(values)) >= obj.j_star
