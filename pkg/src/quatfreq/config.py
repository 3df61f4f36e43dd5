"""Strict key-value configuration files for scenarios and estimator setup.

The format is deliberately small: ``key = value`` lines, ``#`` comments,
and (for scenario files) repeated ``[segment]`` sections. Keys carry
their unit in the name. Unknown or duplicate keys are hard errors with
line numbers; silently ignoring a misspelled noise intensity is the
classic way to ruin a filter deployment.

Scenario file::

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

Estimator file::

    sample_rate_hz = 1000.0
    harmonic_orders = 1,3
    feedback = auto
    freq_obs_var = 3e-4
"""

from __future__ import annotations

import math
from pathlib import Path

from quatfreq.freqkf import FreqNoise
from quatfreq.pipeline import DEFAULT_HARMONIC_NOISE, EstimatorConfig
from quatfreq.qekf import QekfNoise
from quatfreq.signal import Harmonic, ScenarioSpec, Segment

__all__ = [
    "ConfigError",
    "parse_scenario",
    "load_scenario_file",
    "parse_estimator_config",
    "load_estimator_config_file",
]


class ConfigError(ValueError):
    """Configuration text violates the schema; message names the line."""

    def __init__(self, message: str, line: int | None = None,
                 source: str | None = None):
        self.line = line
        where = ""
        if source is not None:
            where = f"{source}: "
        if line is not None:
            where += f"line {line}: "
        super().__init__(where + message)


def _tokenize(text: str, source: str):
    """Yield (line_number, kind, payload) with kind in {'section', 'pair'}."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            yield lineno, "section", line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}",
                              lineno, source)
        key, value = line.split("=", 1)
        yield lineno, "pair", (key.strip(), value.strip())


def _to_float(value: str, key: str, lineno: int, source: str) -> float:
    try:
        out = float(value)
    except ValueError:
        raise ConfigError(f"key {key!r}: {value!r} is not a number",
                          lineno, source) from None
    if not math.isfinite(out):
        raise ConfigError(f"key {key!r} must be finite", lineno, source)
    return out


def _to_int(value: str, key: str, lineno: int, source: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"key {key!r}: {value!r} is not an integer",
                          lineno, source) from None


def _to_bool(value: str, key: str, lineno: int, source: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "on", "yes", "1"):
        return True
    if lowered in ("false", "off", "no", "0"):
        return False
    raise ConfigError(f"key {key!r}: expected a boolean, got {value!r}",
                      lineno, source)


def _parse_harmonic(value: str, lineno: int, source: str) -> Harmonic:
    parts = value.split(":")
    if len(parts) != 2:
        raise ConfigError(
            f"harmonic must be 'order:fraction' or "
            f"'order:frac_a,frac_b,frac_c', got {value!r}", lineno, source)
    order = _to_int(parts[0].strip(), "harmonic order", lineno, source)
    fracs = [f.strip() for f in parts[1].split(",")]
    if len(fracs) == 1:
        return Harmonic(order, _to_float(fracs[0], "harmonic fraction",
                                         lineno, source))
    if len(fracs) == 3:
        fa, fb, fc = (_to_float(f, "harmonic fraction", lineno, source)
                      for f in fracs)
        return Harmonic(order, fa, fraction_a=fa, fraction_b=fb, fraction_c=fc)
    raise ConfigError("harmonic needs one fraction or three per-phase "
                      "fractions", lineno, source)


# ----------------------------------------------------------------------
# scenario files
# ----------------------------------------------------------------------

_SCENARIO_TOP_KEYS = {"sample_rate_hz", "seed"}
_SEGMENT_FLOAT_KEYS = {
    "duration_s", "amp_a_pu", "amp_b_pu", "amp_c_pu",
    "phase_a_rad", "phase_b_rad", "phase_c_rad",
    "start_freq_hz", "rocof_hz_per_s", "snr_db",
}


def parse_scenario(text: str, source: str = "<scenario>") -> ScenarioSpec:
    top: dict[str, float] = {}
    segments: list[dict] = []
    current: dict | None = None

    for lineno, kind, payload in _tokenize(text, source):
        if kind == "section":
            if payload != "segment":
                raise ConfigError(f"unknown section [{payload}]", lineno, source)
            current = {"harmonics": [], "line": lineno}
            segments.append(current)
            continue
        key, value = payload
        if current is None:
            if key not in _SCENARIO_TOP_KEYS:
                raise ConfigError(f"unknown key {key!r} before the first "
                                  f"[segment]", lineno, source)
            if key in top:
                raise ConfigError(f"duplicate key {key!r}", lineno, source)
            top[key] = (_to_int(value, key, lineno, source) if key == "seed"
                        else _to_float(value, key, lineno, source))
        else:
            if key == "harmonic":
                current["harmonics"].append(
                    _parse_harmonic(value, lineno, source))
                continue
            if key not in _SEGMENT_FLOAT_KEYS:
                raise ConfigError(f"unknown segment key {key!r}", lineno, source)
            if key in current:
                raise ConfigError(f"duplicate segment key {key!r}", lineno,
                                  source)
            current[key] = _to_float(value, key, lineno, source)

    if "sample_rate_hz" not in top:
        raise ConfigError("missing required key 'sample_rate_hz'",
                          source=source)
    if not segments:
        raise ConfigError("scenario needs at least one [segment]",
                          source=source)

    built = []
    for seg in segments:
        if "duration_s" not in seg:
            raise ConfigError("segment is missing 'duration_s'", seg["line"],
                              source)
        built.append(Segment(
            duration_s=seg["duration_s"],
            amp_a=seg.get("amp_a_pu", 1.0),
            amp_b=seg.get("amp_b_pu", 1.0),
            amp_c=seg.get("amp_c_pu", 1.0),
            phase_a_rad=seg.get("phase_a_rad", 0.0),
            phase_b_rad=seg.get("phase_b_rad", 0.0),
            phase_c_rad=seg.get("phase_c_rad", 0.0),
            start_freq_hz=seg.get("start_freq_hz", 50.0),
            rocof_hz_per_s=seg.get("rocof_hz_per_s", 0.0),
            harmonics=tuple(seg["harmonics"]),
            snr_db=seg.get("snr_db"),
        ))
    spec = ScenarioSpec(sample_rate_hz=top["sample_rate_hz"],
                        segments=tuple(built),
                        seed=int(top.get("seed", 0)))
    spec.validate()
    return spec


def load_scenario_file(path) -> ScenarioSpec:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), source=str(path))


# ----------------------------------------------------------------------
# estimator configuration files
# ----------------------------------------------------------------------

_ESTIMATOR_KEYS = {
    "sample_rate_hz": "float",
    "nominal_freq_hz": "float",
    "harmonic_orders": "orders",
    "feedback": "feedback",
    "phi_process_var": "float",
    "component_process_var": "float",
    "harmonic_component_var": "float",
    "qekf_obs_var": "float",
    "rate_process_var": "float",
    "freq_process_var": "float",
    "freq_obs_var": "float",
    "joseph_update": "bool",
    "init_state_cov": "float",
    "init_component_cov": "float",
    "init_freq_hz": "float",
    "init_rate_hz_per_s": "float",
    "init_freq_cov": "float",
}


def parse_estimator_config(text: str, source: str = "<config>",
                           sample_rate_hz: float | None = None,
                           ) -> EstimatorConfig:
    """Build an :class:`EstimatorConfig` from configuration text.

    ``sample_rate_hz`` supplies a fallback (e.g. inferred from an input
    file) when the text does not pin it.
    """
    values: dict[str, object] = {}
    for lineno, kind, payload in _tokenize(text, source):
        if kind == "section":
            raise ConfigError("estimator configuration has no sections",
                              lineno, source)
        key, value = payload
        spec = _ESTIMATOR_KEYS.get(key)
        if spec is None:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno, source)
        if spec == "float":
            values[key] = _to_float(value, key, lineno, source)
        elif spec == "bool":
            values[key] = _to_bool(value, key, lineno, source)
        elif spec == "orders":
            try:
                orders = tuple(int(tok.strip()) for tok in value.split(","))
            except ValueError:
                raise ConfigError(
                    f"key {key!r}: expected comma-separated integers",
                    lineno, source) from None
            values[key] = orders
        elif spec == "feedback":
            lowered = value.lower()
            if lowered == "auto":
                values[key] = None
            elif lowered in ("on", "true", "yes"):
                values[key] = True
            elif lowered in ("off", "false", "no"):
                values[key] = False
            else:
                raise ConfigError(
                    f"key {key!r}: expected auto/on/off, got {value!r}",
                    lineno, source)

    fs = values.pop("sample_rate_hz", sample_rate_hz)
    if fs is None:
        raise ConfigError("missing 'sample_rate_hz' and no fallback "
                          "available", source=source)

    orders = values.pop("harmonic_orders", (1,))
    phi_var = values.pop("phi_process_var", 1e-6)
    comp_var = values.pop("component_process_var", 1e-3)
    harm_var = values.pop("harmonic_component_var",
                          DEFAULT_HARMONIC_NOISE.component_var)
    obs_var = values.pop("qekf_obs_var", 1e-2)
    freq_noise = FreqNoise(
        rate_var=values.pop("rate_process_var", FreqNoise().rate_var),
        freq_var=values.pop("freq_process_var", FreqNoise().freq_var),
        obs_var=values.pop("freq_obs_var", FreqNoise().obs_var),
    )
    try:
        bank_noises = tuple(
            QekfNoise(phi_var=phi_var,
                      component_var=comp_var if m == 1 else harm_var,
                      obs_var=obs_var)
            for m in orders)
        return EstimatorConfig(
            sample_rate_hz=float(fs),
            nominal_freq_hz=values.pop("nominal_freq_hz", 50.0),
            harmonic_orders=orders,
            qekf_noise=bank_noises,
            freq_noise=freq_noise,
            feedback=values.pop("feedback", None),
            joseph_update=values.pop("joseph_update", False),
            init_state_cov=values.pop("init_state_cov", 0.1),
            init_component_cov=values.pop("init_component_cov", None),
            init_freq_hz=values.pop("init_freq_hz", None),
            init_rate_hz_per_s=values.pop("init_rate_hz_per_s", 0.0),
            init_freq_cov=values.pop("init_freq_cov", 1.0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), source=source) from exc


def load_estimator_config_file(path, sample_rate_hz: float | None = None,
                               ) -> EstimatorConfig:
    path = Path(path)
    return parse_estimator_config(path.read_text(encoding="utf-8"),
                                  source=str(path),
                                  sample_rate_hz=sample_rate_hz)
