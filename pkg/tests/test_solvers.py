import numpy as np
import pytest

from holoseq.geometry import TrapLayout, TrapSite
from holoseq.metrics import uniformity
from holoseq.propagation import TrapField, build_separable, forward, wrap_phase
from holoseq.solvers import (
    DarkTrapError,
    SolverSettings,
    TargetSpec,
    objective,
    over_relax,
    phase_step,
    scale_update,
    weight_update,
    wgs_solve,
    wpgs_solve,
)


def uniform_target(n, phase=0.0):
    return TargetSpec(np.ones(n), np.full(n, phase))


class TestTargetSpec:
    def test_field(self):
        t = TargetSpec(np.array([4.0]), np.array([np.pi / 2]))
        np.testing.assert_allclose(t.field, [2j], atol=1e-12)

    def test_positive_intensity_required(self):
        with pytest.raises(ValueError):
            TargetSpec(np.array([1.0, 0.0]), np.zeros(2))


class TestSolverSettings:
    def test_validation(self):
        with pytest.raises(ValueError):
            SolverSettings(iterations=0)
        with pytest.raises(ValueError):
            SolverSettings(over_relaxation=1.0)
        with pytest.raises(ValueError):
            SolverSettings(over_relaxation_last_iters=-1)


class TestWeightUpdate:
    def test_fixed_point(self):
        target = uniform_target(3)
        field = TrapField(np.exp(1j * np.array([0.1, 0.2, 0.3])))
        w = weight_update(np.ones(3), field, target)
        np.testing.assert_allclose(w, 1.0, atol=1e-15)

    def test_two_trap_example(self):
        # amplitudes (1, 2) against unit targets: raw (1, 0.5) -> (4/3, 2/3)
        target = uniform_target(2)
        field = TrapField(np.array([1.0 + 0j, 2.0 + 0j]))
        w = weight_update(np.ones(2), field, target)
        np.testing.assert_allclose(w, [4.0 / 3.0, 2.0 / 3.0], rtol=1e-15)

    def test_unit_mean_invariant(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 20))
            field = TrapField(rng.normal(size=n) + 1j * rng.normal(size=n) + 3.0)
            target = TargetSpec(rng.uniform(0.5, 2.0, n), rng.uniform(-np.pi, np.pi, n))
            w = weight_update(rng.uniform(0.5, 1.5, n), field, target)
            assert abs(w.mean() - 1.0) <= 1e-12
            assert (w > 0).all()

    def test_dark_trap_raises(self):
        target = uniform_target(2)
        field = TrapField(np.array([1.0 + 0j, 0.0 + 0j]))
        with pytest.raises(DarkTrapError) as err:
            weight_update(np.ones(2), field, target)
        assert 1 in err.value.indices


class TestOverRelax:
    def test_beta_zero_returns_previous_tilde(self):
        w_prev = np.array([1.0, 1.0])
        w_tilde_prev = np.array([1.05, 0.95])
        w_tilde_new = np.array([1.2, 0.8])
        np.testing.assert_allclose(
            over_relax(w_prev, w_tilde_prev, w_tilde_new, 0.0), w_tilde_prev
        )

    def test_fixed_point(self):
        w = np.array([1.1, 0.9])
        np.testing.assert_allclose(over_relax(w, w, w, 0.85), w)

    def test_direct_substitution(self):
        got = over_relax(
            np.array([1.0, 1.0]), np.array([1.1, 0.9]), np.array([1.2, 0.8]), 0.85
        )
        np.testing.assert_allclose(got, [1.27, 0.73], rtol=1e-15)


class TestScaleUpdate:
    def test_exact_alignment(self):
        target = TargetSpec(np.array([1.0, 2.0]), np.array([0.3, -0.7]))
        s_true = 2.0 * np.exp(1j * np.pi / 3)
        field = TrapField(s_true * target.field)
        s = scale_update(field, np.ones(2), target)
        assert s == pytest.approx(s_true)
        assert objective(field, np.ones(2), s, target) == pytest.approx(0.0, abs=1e-24)

    def test_orthogonal_field_gives_zero(self):
        target = TargetSpec(np.array([1.0, 1.0]), np.array([0.0, 0.0]))
        field = TrapField(np.array([1.0, -1.0]))  # orthogonal to (1, 1)
        assert scale_update(field, np.ones(2), target) == pytest.approx(0.0)

    def test_beats_random_perturbations(self, rng):
        for _ in range(20):
            n = 8
            field = TrapField(rng.normal(size=n) + 1j * rng.normal(size=n))
            target = TargetSpec(rng.uniform(0.5, 2.0, n), rng.uniform(-np.pi, np.pi, n))
            w = rng.uniform(0.5, 1.5, n)
            s = scale_update(field, w, target)
            base = objective(field, w, s, target)
            for _ in range(100):
                delta = 0.3 * (rng.normal() + 1j * rng.normal())
                assert objective(field, w, s + delta, target) >= base - 1e-12

    def test_projective_identity(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 12))
            field = TrapField(rng.normal(size=n) + 1j * rng.normal(size=n))
            target = TargetSpec(rng.uniform(0.5, 2.0, n), rng.uniform(-np.pi, np.pi, n))
            w = rng.uniform(0.5, 1.5, n)
            s = scale_update(field, w, target)
            j = objective(field, w, s, target)
            e_tar = target.field
            p = np.outer(e_tar, np.conj(e_tar)) / np.vdot(e_tar, e_tar).real
            we = w * field.amplitudes
            j_proj = np.linalg.norm(we - p @ we) ** 2
            assert j == pytest.approx(j_proj, rel=1e-10)


class TestPhaseStep:
    def test_single_trap_steering(self, small_config):
        layout = TrapLayout((TrapSite("t", 9e-6, -6e-6, 0.0),))
        prop = build_separable(small_config, layout)
        target = TargetSpec(np.array([1.0]), np.array([0.4]))
        mask = phase_step(prop, np.ones(1), 1.0 + 0j, target)
        expected = -(
            np.angle(prop.kernel_x[0])[:, None] + np.angle(prop.kernel_y[0])[None, :]
        ) + np.angle(np.conj(prop.axial_phase[0]) * np.exp(0.4j))
        np.testing.assert_allclose(wrap_phase(mask.phases - expected), 0.0, atol=1e-10)

    def test_positive_scaling_invariance(self, small_config, grid_3x3, rng):
        prop = build_separable(small_config, grid_3x3)
        target = TargetSpec(rng.uniform(0.5, 2, 9), rng.uniform(-np.pi, np.pi, 9))
        w = rng.uniform(0.5, 1.5, 9)
        m1 = phase_step(prop, w, 0.8 + 0j, target)
        m2 = phase_step(prop, 3.0 * w, 0.8 + 0j, target)
        np.testing.assert_allclose(m1.phases, m2.phases, atol=1e-12)

    def test_unit_phase_scaling_shifts_mask(self, small_config, grid_3x3, rng):
        prop = build_separable(small_config, grid_3x3)
        target = TargetSpec(rng.uniform(0.5, 2, 9), rng.uniform(-np.pi, np.pi, 9))
        w = rng.uniform(0.5, 1.5, 9)
        theta = 0.9
        m1 = phase_step(prop, w, 1.0 + 0j, target)
        m2 = phase_step(prop, w, np.exp(1j * theta), target)
        np.testing.assert_allclose(wrap_phase(m2.phases - m1.phases - theta), 0.0, atol=1e-10)


class TestWpgsSolve:
    def test_single_trap_one_iteration(self, desk_config):
        layout = TrapLayout((TrapSite("t", 12e-6, -7e-6, 0.0),))
        prop = build_separable(desk_config, layout)
        target = TargetSpec(np.array([1.0]), np.array([0.7]))
        res = wpgs_solve(prop, target, SolverSettings(iterations=1, seed=3))
        assert uniformity(res.field.intensity) == 1.0
        predicted = 0.7 + np.angle(res.scale)
        assert abs(wrap_phase(res.field.phase[0] - predicted)) <= 1e-6

    def test_3x3_uniform_converges(self, desk_config, grid_3x3):
        prop = build_separable(desk_config, grid_3x3)
        settings = SolverSettings(seed=0)
        warm = wgs_solve(prop, np.ones(9), settings)
        target = TargetSpec(np.ones(9), warm.field.phase)
        res = wpgs_solve(prop, target, settings, init_mask=warm.mask, init_weights=warm.weights)
        assert uniformity(res.field.intensity) >= 0.99
        assert len(res.objective) == settings.iterations
        # J trend is recorded but not asserted: the warm-started solve sits at
        # the noise floor where monotone descent is not guaranteed
        print("wpgs 3x3 objective trace:", [f"{v:.4e}" for v in res.objective])

    def test_weights_stay_unit_mean(self, desk_config, grid_3x3):
        prop = build_separable(desk_config, grid_3x3)
        res = wpgs_solve(prop, uniform_target(9), SolverSettings(seed=1))
        assert abs(res.weights.mean() - 1.0) <= 1e-12

    def test_field_matches_mask(self, small_config, grid_3x3):
        prop = build_separable(small_config, grid_3x3)
        res = wpgs_solve(prop, uniform_target(9), SolverSettings(seed=2))
        re_run = forward(prop, res.mask).amplitudes
        np.testing.assert_allclose(res.field.amplitudes, re_run, rtol=1e-12)

    def test_nonuniform_target_fixed_point(self, desk_config, grid_3x3, rng):
        # converged solve: |E_n| proportional to |E_tar,n| within 2 percent
        prop = build_separable(desk_config, grid_3x3)
        inten = rng.uniform(0.5, 2.0, 9)
        settings = SolverSettings(seed=0)
        warm = wgs_solve(prop, inten, settings)
        target = TargetSpec(inten, warm.field.phase)
        res = wpgs_solve(
            prop, target, SolverSettings(iterations=20),
            init_mask=warm.mask, init_weights=warm.weights,
        )
        ratio = np.abs(res.field.amplitudes) / np.sqrt(inten)
        assert np.abs(ratio / ratio.mean() - 1.0).max() <= 0.02

    def test_rejects_bad_weights(self, small_config, grid_3x3):
        prop = build_separable(small_config, grid_3x3)
        with pytest.raises(ValueError):
            wpgs_solve(
                prop, uniform_target(9), SolverSettings(), init_weights=np.zeros(9)
            )


class TestWgsSolve:
    def test_3x3_converges(self, desk_config, grid_3x3):
        prop = build_separable(desk_config, grid_3x3)
        res = wgs_solve(prop, np.ones(9), SolverSettings(seed=0))
        assert uniformity(res.field.intensity) >= 0.99
        assert len(res.objective) == 26
        assert res.scale == 1.0 + 0j

    def test_single_trap_parity_with_wpgs(self, small_config):
        layout = TrapLayout((TrapSite("t", -10e-6, 3e-6, 0.0),))
        prop = build_separable(small_config, layout)
        settings = SolverSettings(seed=5)
        res_wgs = wgs_solve(prop, np.ones(1), settings)
        res_wpgs = wpgs_solve(prop, uniform_target(1), settings)
        assert uniformity(res_wgs.field.intensity) == uniformity(res_wpgs.field.intensity) == 1.0

    def test_intensity_length_check(self, small_config, grid_3x3):
        prop = build_separable(small_config, grid_3x3)
        with pytest.raises(ValueError):
            wgs_solve(prop, np.ones(4), SolverSettings())
