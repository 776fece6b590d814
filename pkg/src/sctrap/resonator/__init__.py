"""Resonator spectroscopy: forward models, fitters and trace I/O."""
from .fitting import FitResult, fit_circle, fit_coupled, fit_notch
from .io import read_trace, write_trace
from .models import (NonlinearDissipation, ResonatorParams, SpectrumTrace, coupled_amplitudes,
                     coupled_s11, current_from_photons, k_from_threshold, mode_frequency,
                     nonlinear_q, normal_mode_amplitudes, notch_s21, steady_state_photons)

__all__ = [
    "FitResult", "NonlinearDissipation", "ResonatorParams", "SpectrumTrace",
    "coupled_amplitudes", "coupled_s11", "current_from_photons", "fit_circle", "fit_coupled",
    "fit_notch", "k_from_threshold", "mode_frequency", "nonlinear_q", "normal_mode_amplitudes",
    "notch_s21", "read_trace", "steady_state_photons", "write_trace",
]
