import math

import numpy as np
import pytest

from quatfreq.pipeline import (
    DEFAULT_HARMONIC_NOISE,
    EstimationError,
    EstimatorConfig,
    TwoStageFrequencyFilter,
    run,
    summarize,
)
from quatfreq.qekf import QekfNoise, phase_increment
from quatfreq.quaternion import Quaternion
from quatfreq.signal import (
    PureQuatSample,
    balanced_scenario,
    embed,
    generate,
    ramp_scenario,
    sag_scenario,
    truth_trajectory,
)

FS = 1000.0


def scaled_noise(noise: QekfNoise, s: float) -> QekfNoise:
    return QekfNoise(phi_var=noise.phi_var,
                     component_var=noise.component_var * s * s,
                     obs_var=noise.obs_var * s * s)


def load(spec):
    return [embed(s) for s in generate(spec)], truth_trajectory(spec)


class TestConfig:
    def test_defaults(self):
        cfg = EstimatorConfig(sample_rate_hz=FS)
        assert cfg.dt == 1e-3
        assert cfg.warmup_samples == 100
        assert not cfg.feedback_enabled
        assert cfg.noise_for_bank(0) == QekfNoise()

    def test_feedback_auto(self):
        assert EstimatorConfig(sample_rate_hz=FS,
                               harmonic_orders=(1, 3)).feedback_enabled
        assert not EstimatorConfig(sample_rate_hz=FS, harmonic_orders=(1, 3),
                                   feedback=False).feedback_enabled
        assert EstimatorConfig(sample_rate_hz=FS,
                               feedback=True).feedback_enabled

    def test_per_bank_noise_defaults(self):
        cfg = EstimatorConfig(sample_rate_hz=FS, harmonic_orders=(1, 3, 5))
        assert cfg.noise_for_bank(0) == QekfNoise()
        assert cfg.noise_for_bank(1) == DEFAULT_HARMONIC_NOISE
        assert cfg.noise_for_bank(2) == DEFAULT_HARMONIC_NOISE

    def test_explicit_noise_sequence(self):
        noises = (QekfNoise(), QekfNoise(component_var=1e-5))
        cfg = EstimatorConfig(sample_rate_hz=FS, harmonic_orders=(1, 3),
                              qekf_noise=noises)
        assert cfg.noise_for_bank(1) == noises[1]

    def test_validation(self):
        with pytest.raises(ValueError):
            EstimatorConfig(sample_rate_hz=0.0)
        with pytest.raises(ValueError):
            EstimatorConfig(sample_rate_hz=FS, harmonic_orders=(3, 1))
        with pytest.raises(ValueError):
            EstimatorConfig(sample_rate_hz=FS, harmonic_orders=())
        with pytest.raises(ValueError):
            EstimatorConfig(sample_rate_hz=FS, harmonic_orders=(1, 1))
        with pytest.raises(ValueError):
            EstimatorConfig(sample_rate_hz=FS, harmonic_orders=(1, 2))
        with pytest.raises(ValueError):
            EstimatorConfig(sample_rate_hz=FS, harmonic_orders=(1, 3),
                            qekf_noise=(QekfNoise(),))


class TestSingleBank:
    def test_noise_free_balanced_convergence(self):
        samples, (f_true, _) = load(balanced_scenario(duration_s=0.6))
        records = run(samples, EstimatorConfig(sample_rate_hz=FS))
        tail = [r for r in records if r.t >= 0.3]
        assert max(abs(r.freq_hz - 50.0) for r in tail) < 1e-4
        assert max(abs(r.rocof_hz_per_s) for r in tail) < 1e-3

    def test_first_record_is_initialization(self):
        samples, _ = load(balanced_scenario(duration_s=0.05))
        records = run(samples, EstimatorConfig(sample_rate_hz=FS))
        first = records[0]
        assert first.n == 0
        assert first.freq_hz == 50.0
        assert first.rocof_hz_per_s == 0.0
        assert first.innovation_mag == 0.0
        assert abs(first.delta_theta - math.pi / 10) < 1e-12

    def test_single_sample_run(self):
        samples, _ = load(balanced_scenario(duration_s=0.05))
        records = run(samples[:1], EstimatorConfig(sample_rate_hz=FS))
        assert len(records) == 1
        assert records[0].warmup

    def test_empty_run_rejected(self):
        with pytest.raises(ValueError):
            run([], EstimatorConfig(sample_rate_hz=FS))

    def test_warmup_marking(self):
        samples, _ = load(balanced_scenario(duration_s=0.2))
        records = run(samples, EstimatorConfig(sample_rate_hz=FS))
        assert all(r.warmup for r in records[:100])
        assert not any(r.warmup for r in records[100:])


class TestMultiBank:
    def test_sag_scenario_steady_state(self):
        samples, (f_true, _) = load(sag_scenario(seed=1))
        cfg = EstimatorConfig(sample_rate_hz=FS, harmonic_orders=(1, 3))
        records = run(samples, cfg)
        f_hat = np.array([r.freq_hz for r in records])
        err = f_hat[800:] - f_true[800:]
        assert abs(err.mean()) < 0.02
        assert err.std() < 0.02

    def test_ramp_scenario_rate(self):
        for rate in (0.5, -0.5):
            samples, (f_true, r_true) = load(ramp_scenario(rate, seed=1))
            cfg = EstimatorConfig(sample_rate_hz=FS, harmonic_orders=(1, 3))
            records = run(samples, cfg)
            r_hat = np.array([r.rocof_hz_per_s for r in records])
            assert abs(r_hat[1000:].mean() - rate) < 0.05

    def test_determinism(self):
        samples, _ = load(sag_scenario(seed=3))
        cfg = EstimatorConfig(sample_rate_hz=FS, harmonic_orders=(1, 3))
        assert run(samples, cfg) == run(samples, cfg)

    def test_harmonic_rejection_ordering(self):
        samples, (f_true, _) = load(sag_scenario(seed=1))
        rec13 = run(samples, EstimatorConfig(sample_rate_hz=FS,
                                             harmonic_orders=(1, 3)))
        rec1 = run(samples, EstimatorConfig(sample_rate_hz=FS))
        err13 = np.array([r.freq_hz for r in rec13])[800:] - f_true[800:]
        err1 = np.array([r.freq_hz for r in rec1])[800:] - f_true[800:]
        assert err13.var() < err1.var()

    def test_unbalance_robustness_step_size(self):
        samples, (f_true, _) = load(sag_scenario(seed=2))
        cfg = EstimatorConfig(sample_rate_hz=FS, harmonic_orders=(1, 3))
        records = run(samples, cfg)
        f_hat = np.array([r.freq_hz for r in records])
        pre = f_hat[200:500].mean()
        post = f_hat[800:].mean()
        assert pre - post == pytest.approx(0.2, abs=0.02)

    def test_feedback_consistency(self):
        # converged noise-free run: harmonic angle = m * fundamental angle
        samples, _ = load(sag_scenario(seed=0, snr_db=None))
        cfg = EstimatorConfig(sample_rate_hz=FS, harmonic_orders=(1, 3))
        filt = TwoStageFrequencyFilter(cfg)
        worst = 0.0
        for k, s in enumerate(samples):
            filt.step(s.q)
            if k >= 1200:
                a1, a3 = (phase_increment(x).angle for x in filt.bank_states)
                worst = max(worst, abs(a3 - 3.0 * a1))
        assert worst < 1e-6

    def test_bank_telemetry_shape(self):
        samples, _ = load(sag_scenario(seed=0))
        cfg = EstimatorConfig(sample_rate_hz=FS, harmonic_orders=(1, 3))
        rec = run(samples[:200], cfg)[-1]
        assert tuple(b.order for b in rec.banks) == (1, 3)
        assert all(b.q_plus_mag >= 0 for b in rec.banks)

    def test_third_harmonic_bank_locks_on(self):
        # after the sag the m=3 bank carries the injected harmonic energy
        samples, _ = load(sag_scenario(seed=0, snr_db=None))
        cfg = EstimatorConfig(sample_rate_hz=FS, harmonic_orders=(1, 3))
        records = run(samples, cfg)
        pre = records[450]
        post = records[-1]
        assert pre.banks[1].q_plus_mag + pre.banks[1].q_minus_mag < 0.02
        assert post.banks[1].q_plus_mag + post.banks[1].q_minus_mag > 0.05


class TestGainInvariance:
    def test_balanced_path_exactly_invariant(self):
        samples, _ = load(balanced_scenario(duration_s=0.5))
        scaled = [PureQuatSample(s.n, s.q * 3.7) for s in samples]
        cfg = EstimatorConfig(sample_rate_hz=FS)
        f_a = [r.freq_hz for r in run(samples, cfg)]
        f_b = [r.freq_hz for r in run(scaled, cfg)]
        assert max(abs(a - b) for a, b in zip(f_a, f_b)) < 1e-6

    def test_full_equivariance_with_scaled_config(self):
        # scaling voltages and the (component, observation) noise together
        # must reproduce the trajectory exactly, transients included
        s = 4.0
        samples, _ = load(sag_scenario(seed=2, snr_db=None))
        scaled = [PureQuatSample(p.n, p.q * s) for p in samples]
        cfg = EstimatorConfig(sample_rate_hz=FS, harmonic_orders=(1, 3))
        cfg_scaled = EstimatorConfig(
            sample_rate_hz=FS, harmonic_orders=(1, 3),
            qekf_noise=(scaled_noise(QekfNoise(), s),
                        scaled_noise(DEFAULT_HARMONIC_NOISE, s)),
            init_component_cov=cfg.init_state_cov * s * s)
        f_a = np.array([r.freq_hz for r in run(samples, cfg)])
        f_b = np.array([r.freq_hz for r in run(scaled, cfg_scaled)])
        assert np.abs(f_a - f_b).max() < 1e-9


class TestPlausibilityWarning:
    def test_out_of_band_estimate_warns_once(self):
        from quatfreq.pipeline import PlausibilityWarning

        samples, _ = load(balanced_scenario(duration_s=0.3))
        # a 50 Hz signal against a 110 Hz nominal leaves the +/-15 Hz band
        cfg = EstimatorConfig(sample_rate_hz=FS, nominal_freq_hz=110.0)
        with pytest.warns(PlausibilityWarning):
            run(samples, cfg)

    def test_in_band_is_silent(self):
        import warnings as _warnings

        samples, _ = load(balanced_scenario(duration_s=0.3))
        with _warnings.catch_warnings():
            _warnings.simplefilter("error")
            run(samples, EstimatorConfig(sample_rate_hz=FS))


class TestErrorContext:
    def test_non_finite_sample_names_index(self):
        samples, _ = load(balanced_scenario(duration_s=0.05))
        bad = samples[:10] + [PureQuatSample(10, Quaternion(0, math.nan, 0, 0))]
        with pytest.raises(EstimationError, match="sample 10"):
            run(bad, EstimatorConfig(sample_rate_hz=FS))

    def test_bank_index_in_message(self):
        cfg = EstimatorConfig(sample_rate_hz=FS, harmonic_orders=(1, 3))
        filt = TwoStageFrequencyFilter(cfg)
        filt.step(Quaternion(0, 1.0, 0.0, 0.0))
        with pytest.raises(EstimationError, match="bank m="):
            filt.step(Quaternion(0, math.inf, 0.0, 0.0))


class TestSummarize:
    def test_convergence_and_stats(self):
        samples, (f_true, r_true) = load(sag_scenario(seed=1))
        cfg = EstimatorConfig(sample_rate_hz=FS, harmonic_orders=(1, 3))
        records = run(samples, cfg)
        summary = summarize(records, f_true, r_true)
        assert summary.convergence_time_s < 0.9
        assert abs(summary.mean_freq_error_hz) < 0.05
        assert summary.freq_error_var_hz2 < 1e-3
        text = summary.format()
        assert "convergence time" in text
        assert "f_hat - f_true" in text  # definitions printed with values

    def test_never_converges_is_nan(self):
        samples, (f_true, r_true) = load(balanced_scenario(duration_s=0.3))
        records = run(samples, EstimatorConfig(sample_rate_hz=FS))
        summary = summarize(records, f_true + 10.0, r_true)
        assert math.isnan(summary.convergence_time_s)

    def test_length_mismatch(self):
        samples, (f_true, r_true) = load(balanced_scenario(duration_s=0.3))
        records = run(samples, EstimatorConfig(sample_rate_hz=FS))
        with pytest.raises(ValueError):
            summarize(records, f_true[:-1], r_true)
