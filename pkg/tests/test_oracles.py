import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from quatfreq.oracles import (
    OracleError,
    dense_kalman_step,
    fft_frequency_oracle,
    finite_difference_jacobian,
    fit_counter_rotating,
)
from quatfreq.quaternion import unit_pure
from quatfreq.signal import (
    ScenarioSpec,
    Segment,
    balanced_scenario,
    embed,
    generate,
    sag_scenario,
)

RNG = np.random.default_rng(2024)


class TestDenseKalman:
    def test_zero_noise_full_observation(self):
        f_mat = RNG.standard_normal((3, 3))
        x = RNG.standard_normal(3)
        p0 = np.eye(3)
        z = f_mat @ x
        x_post, _ = dense_kalman_step(x, p0, f_mat, np.eye(3),
                                      np.zeros((3, 3)), np.zeros((3, 3)) + 1e-15 * np.eye(3), z)
        assert_allclose(x_post, z, atol=1e-9)

    def test_scalar_gain(self):
        # posterior variance p*r/(p+r), gain p/(p+r), on a static scalar
        p, r = 2.0, 3.0
        x_post, p_post = dense_kalman_step(
            np.array([1.0]), np.array([[p]]), np.eye(1), np.eye(1),
            np.zeros((1, 1)), np.array([[r]]), np.array([2.0]))
        gain = p / (p + r)
        assert x_post[0] == pytest.approx(1.0 + gain * 1.0)
        assert p_post[0, 0] == pytest.approx(p * (1 - gain))

    def test_singular_innovation_rejected(self):
        with pytest.raises(OracleError):
            dense_kalman_step(np.zeros(2), np.zeros((2, 2)), np.eye(2),
                              np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)),
                              np.zeros(2))

    def test_nonlinear_mean_hook(self):
        x = np.array([2.0, 3.0])
        x_post, _ = dense_kalman_step(
            x, np.zeros((2, 2)), np.eye(2), np.eye(2), np.zeros((2, 2)),
            np.eye(2), np.zeros(2), predict_mean=lambda v: v ** 2)
        assert_allclose(x_post, [4.0, 9.0])


class TestFiniteDifferences:
    def test_quadratic_function(self):
        def func(v):
            return np.array([v[0] ** 2, v[0] * v[1], math.sin(v[1])])

        x0 = np.array([1.5, -0.7])
        jac = finite_difference_jacobian(func, x0)
        want = np.array([
            [2 * x0[0], 0.0],
            [x0[1], x0[0]],
            [0.0, math.cos(x0[1])],
        ])
        assert np.abs(jac - want).max() < 1e-9


class TestCounterRotatingFit:
    def test_balanced_signal(self):
        samples = [embed(s) for s in generate(balanced_scenario(duration_s=0.2))]
        fit = fit_counter_rotating(samples, 50.0, 1000.0)
        assert fit.residual_rms < 1e-9
        assert fit.q_minus0.norm() < 1e-9
        assert fit.q_plus0.norm() == pytest.approx(math.sqrt(1.5), abs=1e-9)
        # plane normal parallel to (1,1,1); orientation fixed by the
        # dominant component rotating positively
        want = unit_pure(-1.0, -1.0, -1.0)
        assert (fit.axis - want).norm() < 1e-9

    def test_sag_signal_unbalance(self):
        spec = ScenarioSpec(1000.0, (Segment(
            duration_s=0.3, amp_a=0.2, phase_b_rad=math.radians(20),
            phase_c_rad=math.radians(20), start_freq_hz=49.8),))
        samples = [embed(s) for s in generate(spec)]
        fit = fit_counter_rotating(samples, 49.8, 1000.0)
        rms = math.sqrt(np.mean([s.q.norm_sq() for s in samples]))
        assert fit.residual_rms < 1e-9 * rms
        assert fit.q_minus0.norm() > 0.05 * fit.q_plus0.norm()

    def test_single_phase_degenerates_to_line(self):
        spec = ScenarioSpec(1000.0, (Segment(duration_s=0.2),))
        base = generate(spec)
        samples = [embed(type(s)(s.n, s.t, s.va, 0.0, 0.0)) for s in base]
        fit = fit_counter_rotating(samples, 50.0, 1000.0)
        assert fit.q_plus0.norm() == pytest.approx(fit.q_minus0.norm(), rel=1e-9)
        assert fit.residual_rms < 1e-9

    def test_random_unbalanced_triples_exact(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            freq = rng.uniform(45.0, 55.0)
            seg = Segment(
                duration_s=0.25,
                amp_a=rng.uniform(0.2, 1.5),
                amp_b=rng.uniform(0.2, 1.5),
                amp_c=rng.uniform(0.2, 1.5),
                phase_a_rad=rng.uniform(-math.pi, math.pi),
                phase_b_rad=rng.uniform(-math.pi, math.pi),
                phase_c_rad=rng.uniform(-math.pi, math.pi),
                start_freq_hz=freq,
            )
            samples = [embed(s) for s in generate(ScenarioSpec(1000.0, (seg,)))]
            fit = fit_counter_rotating(samples, freq, 1000.0)
            rms = math.sqrt(np.mean([s.q.norm_sq() for s in samples]))
            assert fit.residual_rms < 1e-9 * rms

    def test_reconstruction(self):
        samples = [embed(s) for s in generate(balanced_scenario(duration_s=0.1))]
        fit = fit_counter_rotating(samples, 50.0, 1000.0)
        for n in (0, 10, 57):
            assert (fit.reconstruct(n) - samples[n].q).norm() < 1e-9

    def test_under_determined_window(self):
        samples = [embed(s) for s in generate(balanced_scenario(duration_s=0.01))]
        with pytest.raises(OracleError):
            fit_counter_rotating(samples, 50.0, 1000.0)


class TestFftOracle:
    def test_pure_50hz(self):
        t = np.arange(1000) / 1000.0
        v = np.sin(2 * math.pi * 50.0 * t + 0.4)
        assert abs(fft_frequency_oracle(v, 1000.0) - 50.0) < 0.01

    def test_offgrid_frequency(self):
        t = np.arange(1000) / 1000.0
        v = np.sin(2 * math.pi * 49.8 * t - 1.0)
        assert abs(fft_frequency_oracle(v, 1000.0) - 49.8) < 0.01

    def test_noisy_sag_segment(self):
        samples = generate(sag_scenario(seed=6))
        vb = np.array([s.vb for s in samples[500:]])
        assert abs(fft_frequency_oracle(vb, 1000.0) - 49.8) < 0.01

    def test_dc_input_rejected(self):
        with pytest.raises(OracleError):
            fft_frequency_oracle(np.ones(1000), 1000.0)

    def test_short_window_rejected(self):
        with pytest.raises(OracleError):
            fft_frequency_oracle(np.sin(np.arange(10)), 1000.0)

    def test_too_few_cycles_rejected(self):
        t = np.arange(1000) / 1000.0
        v = np.sin(2 * math.pi * 5.0 * t)  # 5 cycles in the window
        with pytest.raises(OracleError):
            fft_frequency_oracle(v, 1000.0)
