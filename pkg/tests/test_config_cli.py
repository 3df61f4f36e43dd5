import numpy as np
import pytest

from quatfreq.cli import (
    infer_sample_rate,
    main,
    read_records_csv,
    truth_sidecar_path,
)
from quatfreq.config import (
    ConfigError,
    parse_estimator_config,
    parse_scenario,
)
from quatfreq.signal import builtin_scenario, generate, load_csv, sag_scenario

SCENARIO_TEXT = """\
# two-part benchmark
sample_rate_hz = 1000.0
seed = 7

[segment]
duration_s = 0.5
start_freq_hz = 50.0
snr_db = 30.0

[segment]
duration_s = 1.5
amp_a_pu = 0.2
phase_b_rad = 0.3490658503988659
phase_c_rad = 0.3490658503988659
start_freq_hz = 49.8
harmonic = 3:0.1
snr_db = 30.0
"""


class TestScenarioParsing:
    def test_round_trips_builtin(self):
        spec = parse_scenario(SCENARIO_TEXT)
        want = sag_scenario(seed=7)
        assert spec.sample_rate_hz == want.sample_rate_hz
        assert spec.seed == want.seed
        assert spec.segments == want.segments
        assert generate(spec) == generate(want)

    def test_unknown_key_is_error(self):
        with pytest.raises(ConfigError, match="line 2.*unknown key 'sample_rate'"):
            parse_scenario("sample_rate_hz = 1000\nsample_rate = 1\n"
                           "[segment]\nduration_s = 1\n")

    def test_unknown_segment_key(self):
        with pytest.raises(ConfigError, match="unknown segment key 'amp_d_pu'"):
            parse_scenario("sample_rate_hz = 1000\n[segment]\n"
                           "duration_s = 1\namp_d_pu = 1\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_scenario("sample_rate_hz = 1000\nsample_rate_hz = 500\n"
                           "[segment]\nduration_s = 1\n")

    def test_missing_sample_rate(self):
        with pytest.raises(ConfigError, match="sample_rate_hz"):
            parse_scenario("[segment]\nduration_s = 1\n")

    def test_missing_duration(self):
        with pytest.raises(ConfigError, match="duration_s"):
            parse_scenario("sample_rate_hz = 1000\n[segment]\namp_a_pu = 1\n")

    def test_bad_number_names_line(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_scenario("sample_rate_hz = fast\n[segment]\nduration_s = 1\n")

    def test_per_phase_harmonic(self):
        spec = parse_scenario(
            "sample_rate_hz = 1000\n[segment]\nduration_s = 1\n"
            "harmonic = 3:0.1,0.0,0.2\n")
        h = spec.segments[0].harmonics[0]
        assert h.phase_fractions() == (0.1, 0.0, 0.2)

    def test_invariants_still_enforced(self):
        with pytest.raises(Exception):
            parse_scenario("sample_rate_hz = 1000\n[segment]\n"
                           "duration_s = 1\nharmonic = 4:0.1\n")


class TestEstimatorConfigParsing:
    def test_defaults(self):
        cfg = parse_estimator_config("sample_rate_hz = 1000\n")
        assert cfg.sample_rate_hz == 1000.0
        assert cfg.harmonic_orders == (1,)

    def test_full_file(self):
        text = (
            "sample_rate_hz = 1000\n"
            "nominal_freq_hz = 60\n"
            "harmonic_orders = 1,3,5\n"
            "feedback = on\n"
            "phi_process_var = 2e-6\n"
            "component_process_var = 5e-4\n"
            "harmonic_component_var = 1e-5\n"
            "qekf_obs_var = 2e-2\n"
            "rate_process_var = 2e-4\n"
            "freq_process_var = 2e-7\n"
            "freq_obs_var = 6e-4\n"
            "joseph_update = true\n"
            "init_state_cov = 0.2\n"
        )
        cfg = parse_estimator_config(text)
        assert cfg.nominal_freq_hz == 60.0
        assert cfg.harmonic_orders == (1, 3, 5)
        assert cfg.feedback is True
        assert cfg.joseph_update is True
        assert cfg.noise_for_bank(0).component_var == 5e-4
        assert cfg.noise_for_bank(1).component_var == 1e-5
        assert cfg.noise_for_bank(0).phi_var == 2e-6
        assert cfg.freq_noise.obs_var == 6e-4
        assert cfg.init_state_cov == 0.2

    def test_fallback_sample_rate(self):
        cfg = parse_estimator_config("nominal_freq_hz = 50\n",
                                     sample_rate_hz=2000.0)
        assert cfg.sample_rate_hz == 2000.0

    def test_missing_sample_rate(self):
        with pytest.raises(ConfigError, match="sample_rate_hz"):
            parse_estimator_config("nominal_freq_hz = 50\n")

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key 'qekf_obs_noise'"):
            parse_estimator_config("sample_rate_hz = 1000\n"
                                   "qekf_obs_noise = 1\n")

    def test_feedback_values(self):
        for token, want in (("auto", None), ("on", True), ("off", False)):
            cfg = parse_estimator_config(
                f"sample_rate_hz = 1000\nfeedback = {token}\n")
            assert cfg.feedback is want
        with pytest.raises(ConfigError):
            parse_estimator_config("sample_rate_hz = 1000\nfeedback = maybe\n")

    def test_invalid_orders_reported_as_config_error(self):
        with pytest.raises(ConfigError, match="harmonic_orders"):
            parse_estimator_config("sample_rate_hz = 1000\n"
                                   "harmonic_orders = 3,1\n")


class TestCliHelpers:
    def test_truth_sidecar_path(self):
        assert truth_sidecar_path("wave.csv").name == "wave.truth.csv"

    def test_infer_sample_rate(self):
        samples = generate(builtin_scenario("balanced"))
        assert infer_sample_rate(samples) == pytest.approx(1000.0)

    def test_infer_rejects_irregular(self):
        samples = generate(builtin_scenario("balanced"))
        bad = samples[:10] + samples[20:30]
        with pytest.raises(ConfigError):
            infer_sample_rate(bad)


class TestCliCommands:
    def test_simulate_estimate_round_trip(self, tmp_path, capsys):
        wave = tmp_path / "wave.csv"
        est = tmp_path / "est.csv"
        assert main(["simulate", "experiment1", "--out", str(wave),
                     "--seed", "1"]) == 0
        assert wave.exists()
        assert truth_sidecar_path(wave).exists()

        assert main(["estimate", str(wave), "--out", str(est)]) == 0
        out = capsys.readouterr().out
        assert "convergence time" in out
        assert "samples/s" in out

        rows = read_records_csv(est)
        assert len(rows) == 2000
        assert rows[0]["warmup"] and not rows[-1]["warmup"]
        # steady-state estimates sit near the post-sag truth
        steady = [r["f_hat"] for r in rows if r["t"] >= 1.0]
        assert abs(np.mean(steady) - 49.8) < 0.05

    def test_simulate_determinism(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["simulate", "experiment2", "--out", str(a), "--seed", "9"])
        main(["simulate", "experiment2", "--out", str(b), "--seed", "9"])
        assert a.read_bytes() == b.read_bytes()
        c = tmp_path / "c.csv"
        main(["simulate", "experiment2", "--out", str(c), "--seed", "10"])
        assert a.read_bytes() != c.read_bytes()

    def test_simulate_scenario_file(self, tmp_path):
        scn = tmp_path / "case.scn"
        scn.write_text("sample_rate_hz = 1000\n[segment]\nduration_s = 0.1\n",
                       encoding="utf-8")
        out = tmp_path / "wave.csv"
        assert main(["simulate", str(scn), "--out", str(out)]) == 0
        assert len(load_csv(out)) == 100

    def test_simulate_unknown_scenario_exit_2(self, tmp_path, capsys):
        code = main(["simulate", "nope", "--out", str(tmp_path / "x.csv")])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_estimate_with_config(self, tmp_path, capsys):
        wave = tmp_path / "wave.csv"
        main(["simulate", "experiment1", "--out", str(wave), "--seed", "1"])
        cfg = tmp_path / "est.cfg"
        cfg.write_text("harmonic_orders = 1,3\n", encoding="utf-8")
        est = tmp_path / "est.csv"
        assert main(["estimate", str(wave), "--config", str(cfg),
                     "--out", str(est)]) == 0

    def test_estimate_config_mismatch_exit_2(self, tmp_path, capsys):
        wave = tmp_path / "wave.csv"
        main(["simulate", "balanced", "--out", str(wave)])
        cfg = tmp_path / "est.cfg"
        cfg.write_text("sample_rate_hz = 500\n", encoding="utf-8")
        code = main(["estimate", str(wave), "--config", str(cfg),
                     "--out", str(tmp_path / "e.csv")])
        assert code == 2

    def test_estimate_without_truth_skips_summary(self, tmp_path, capsys):
        wave = tmp_path / "wave.csv"
        main(["simulate", "balanced", "--out", str(wave)])
        truth_sidecar_path(wave).unlink()
        capsys.readouterr()
        assert main(["estimate", str(wave), "--out",
                     str(tmp_path / "e.csv")]) == 0
        out = capsys.readouterr().out
        assert "convergence time" not in out

    def test_bad_csv_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("n,t,va,vb,vc\n0,0.0,oops,0,0\n", encoding="utf-8")
        assert main(["estimate", str(bad), "--out",
                     str(tmp_path / "e.csv")]) == 2

    def test_bench_smoke(self, capsys):
        assert main(["bench", "--samples", "2000", "--orders", "1,3"]) == 0
        assert "samples/s" in capsys.readouterr().out

    def test_accept_exit_codes(self, monkeypatch, capsys, tmp_path):
        from quatfreq import cli
        from quatfreq.accept import CriterionResult

        good = [CriterionResult(1, "stub", True, "ok")]
        monkeypatch.setattr(cli, "run_acceptance", lambda: good)
        report = tmp_path / "report.txt"
        assert main(["accept", "--report", str(report)]) == 0
        assert "stub" in report.read_text()

        bad = [CriterionResult(1, "stub", False, "broken")]
        monkeypatch.setattr(cli, "run_acceptance", lambda: bad)
        assert main(["accept"]) == 1

    def test_usage_error_exit_2(self):
        with pytest.raises(SystemExit) as err:
            main(["simulate"])  # missing required --out
        assert err.value.code == 2
