"""Quaternion two-stage Kalman filtering for three-phase power systems.

Estimates the fundamental frequency and its rate of change from the
three phase voltages: a quaternion extended Kalman filter tracks the
per-sample rotation of the voltage trajectory (optionally with parallel
banks for odd harmonics), and a linear Kalman filter turns the phase
increments into fused frequency / ROCOF estimates.

Typical use::

    from quatfreq import ThreePhaseFrequencyEstimator
    est = ThreePhaseFrequencyEstimator(sample_rate_hz=1000.0,
                                       harmonic_orders=(1, 3))
    estimates = est.fit_transform(voltages)   # (n, 3): f, rocof, stage-1 f
"""

from quatfreq.estimator import (
    NotFittedError,
    ThreePhaseFrequencyEstimator,
    check_voltage_array,
)
from quatfreq.freqkf import FreqNoise, FreqState
from quatfreq.pipeline import (
    EstimateRecord,
    EstimationError,
    EstimatorConfig,
    PlausibilityWarning,
    RunSummary,
    TwoStageFrequencyFilter,
    run,
    summarize,
)
from quatfreq.qekf import QekfNoise, QssState
from quatfreq.quaternion import Quaternion
from quatfreq.signal import (
    Harmonic,
    PureQuatSample,
    ScenarioSpec,
    Segment,
    ThreePhaseSample,
    embed,
    generate,
)

__version__ = "0.1.0"

__all__ = [
    "ThreePhaseFrequencyEstimator",
    "NotFittedError",
    "check_voltage_array",
    "Quaternion",
    "QssState",
    "QekfNoise",
    "FreqState",
    "FreqNoise",
    "EstimatorConfig",
    "EstimateRecord",
    "EstimationError",
    "PlausibilityWarning",
    "RunSummary",
    "TwoStageFrequencyFilter",
    "run",
    "summarize",
    "ThreePhaseSample",
    "PureQuatSample",
    "Harmonic",
    "Segment",
    "ScenarioSpec",
    "embed",
    "generate",
    "__version__",
]
