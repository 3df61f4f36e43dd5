"""Estimator-API front end over the two-stage pipeline.

``ThreePhaseFrequencyEstimator`` follows the scikit-learn contract
(constructor stores parameters untouched, ``fit`` validates, ``get_params``
/ ``set_params`` expose them, ``transform`` maps an ``(n_samples, 3)``
voltage array to per-sample estimates) without importing scikit-learn;
the duck-typed surface is what pipelines and ``clone()`` actually use.
"""

from __future__ import annotations

import inspect

import numpy as np

from quatfreq.pipeline import EstimateRecord, EstimatorConfig, run
from quatfreq.qekf import QekfNoise
from quatfreq.freqkf import FreqNoise
from quatfreq.quaternion import Quaternion
from quatfreq.signal import PureQuatSample

__all__ = [
    "ThreePhaseFrequencyEstimator",
    "NotFittedError",
    "check_voltage_array",
]


class NotFittedError(ValueError, AttributeError):
    """Raised when transform/predict is called before fit."""


def check_voltage_array(X) -> np.ndarray:
    """Validate and coerce a three-phase voltage array.

    Accepts anything array-like of shape ``(n_samples, 3)`` with finite
    values; returns a float64 C-contiguous copy.
    """
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1 and arr.size == 3:
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(
            f"expected an (n_samples, 3) array of phase voltages, got shape "
            f"{np.shape(X)}")
    if arr.shape[0] == 0:
        raise ValueError("empty voltage array")
    if not np.all(np.isfinite(arr)):
        raise ValueError("voltage array contains non-finite values")
    return np.ascontiguousarray(arr)


class ThreePhaseFrequencyEstimator:
    """Frequency and ROCOF estimates from raw three-phase voltages.

    Parameters
    ----------
    sample_rate_hz : sampling rate of the voltage rows.
    nominal_freq_hz : expected fundamental frequency used to initialize
        the rotation elements.
    harmonic_orders : odd orders tracked in parallel, starting with 1.
    feedback : True/False, or None to enable it automatically when more
        than one harmonic order is configured.
    phi_process_var, component_process_var, harmonic_component_var,
    qekf_obs_var : first-stage noise intensities. ``component_process_var``
        applies to the fundamental bank, ``harmonic_component_var`` to the
        higher-order banks.
    rate_process_var, freq_process_var, freq_obs_var : second-stage noise
        intensities.
    joseph_update : use the Joseph-form covariance update.

    Examples
    --------
    >>> est = ThreePhaseFrequencyEstimator(sample_rate_hz=1000.0,
    ...                                    harmonic_orders=(1, 3))
    >>> out = est.fit_transform(voltages)       # doctest: +SKIP
    >>> f_hat, rocof, stage1 = out.T            # doctest: +SKIP
    """

    def __init__(self, *, sample_rate_hz: float = 1000.0,
                 nominal_freq_hz: float = 50.0,
                 harmonic_orders: tuple[int, ...] = (1,),
                 feedback: bool | None = None,
                 phi_process_var: float = 1e-6,
                 component_process_var: float = 1e-3,
                 harmonic_component_var: float = 3e-5,
                 qekf_obs_var: float = 1e-2,
                 rate_process_var: float = 1e-4,
                 freq_process_var: float = 1e-7,
                 freq_obs_var: float = 3e-4,
                 joseph_update: bool = False):
        self.sample_rate_hz = sample_rate_hz
        self.nominal_freq_hz = nominal_freq_hz
        self.harmonic_orders = harmonic_orders
        self.feedback = feedback
        self.phi_process_var = phi_process_var
        self.component_process_var = component_process_var
        self.harmonic_component_var = harmonic_component_var
        self.qekf_obs_var = qekf_obs_var
        self.rate_process_var = rate_process_var
        self.freq_process_var = freq_process_var
        self.freq_obs_var = freq_obs_var
        self.joseph_update = joseph_update

    # -- scikit-learn parameter protocol --------------------------------
    @classmethod
    def _param_names(cls) -> list[str]:
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "ThreePhaseFrequencyEstimator":
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(
                    f"invalid parameter {key!r} for estimator "
                    f"{type(self).__name__}; valid parameters: {sorted(valid)}")
            setattr(self, key, value)
        return self

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"

    # -- estimator API ---------------------------------------------------
    def fit(self, X=None, y=None) -> "ThreePhaseFrequencyEstimator":
        """Validate parameters and freeze the filter configuration.

        The filter needs no training data; ``X`` is accepted (and
        validated when given) only for pipeline compatibility.
        """
        if X is not None:
            check_voltage_array(X)
        bank_noises = tuple(
            QekfNoise(phi_var=self.phi_process_var,
                      component_var=(self.component_process_var if m == 1
                                     else self.harmonic_component_var),
                      obs_var=self.qekf_obs_var)
            for m in tuple(self.harmonic_orders))
        self.config_ = EstimatorConfig(
            sample_rate_hz=self.sample_rate_hz,
            nominal_freq_hz=self.nominal_freq_hz,
            harmonic_orders=tuple(self.harmonic_orders),
            qekf_noise=bank_noises,
            freq_noise=FreqNoise(rate_var=self.rate_process_var,
                                 freq_var=self.freq_process_var,
                                 obs_var=self.freq_obs_var),
            feedback=self.feedback,
            joseph_update=self.joseph_update,
        )
        self.n_features_in_ = 3
        return self

    def _check_fitted(self) -> EstimatorConfig:
        config = getattr(self, "config_", None)
        if config is None:
            raise NotFittedError(
                f"{type(self).__name__} is not fitted yet; call fit() first")
        return config

    def transform_records(self, X) -> list[EstimateRecord]:
        """Full per-sample records for the given voltage array."""
        config = self._check_fitted()
        arr = check_voltage_array(X)
        samples = [PureQuatSample(n, Quaternion(0.0, *row))
                   for n, row in enumerate(arr)]
        return run(samples, config)

    def transform(self, X) -> np.ndarray:
        """Estimates as an ``(n_samples, 3)`` array.

        Columns are the fused frequency (Hz), its rate of change (Hz/s),
        and the raw first-stage frequency (Hz) from the phase increment.
        """
        config = self._check_fitted()
        records = self.transform_records(X)
        scale = config.sample_rate_hz / (2.0 * np.pi)
        out = np.empty((len(records), 3))
        for k, rec in enumerate(records):
            out[k, 0] = rec.freq_hz
            out[k, 1] = rec.rocof_hz_per_s
            out[k, 2] = rec.delta_theta * scale
        return out

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X, y).transform(X)

    def predict(self, X) -> np.ndarray:
        """Fused frequency estimate (Hz) per sample."""
        return self.transform(X)[:, 0]

    def get_feature_names_out(self, input_features=None) -> np.ndarray:
        return np.array(["freq_hz", "rocof_hz_per_s", "stage1_freq_hz"],
                        dtype=object)
