"""Forward models: notch S21, coupled-resonator S11, photon numbers, Q_nl."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from ..constants import HBAR, TWO_PI

TRACE_KINDS = ("notch-S21", "reflection-S11")
DRIVES = ("single-port", "symmetric", "antisymmetric")
MODES = ("bare", "AH", "H")


@dataclass(frozen=True)
class ResonatorParams:
    """Resonator description; frequencies in Hz (not angular).

    ``g_m`` is the coupling, so the normal modes sit at f_r +- g_m.
    ``delta_bt`` is the top/bottom mismatch, recorded but not modelled.
    ``k_current`` converts sqrt(photon number) to current in A.
    """

    f_r: float
    Q_int: float
    Q_ext: float
    g_m: float = 0.0
    delta_bt: float = 0.0
    k_current: float = 0.0

    def __post_init__(self):
        if not self.f_r > 0:
            raise ValueError("f_r must be positive")
        if not (self.Q_int > 0 and self.Q_ext > 0):
            raise ValueError("quality factors must be positive")
        if self.g_m < 0 or self.k_current < 0:
            raise ValueError("g_m and k_current must be non-negative")

    @property
    def Q_tot(self):
        return 1.0 / (1.0 / self.Q_int + 1.0 / self.Q_ext)

    @property
    def omega_r(self):
        return TWO_PI * self.f_r

    @property
    def kappa(self):
        """Total energy decay rate (rad/s)."""
        return self.omega_r / self.Q_tot

    @property
    def kappa_ext(self):
        return self.omega_r / self.Q_ext

    def with_extra_loss(self, Q_nl):
        """Copy with a parallel loss channel folded into Q_int."""
        if Q_nl is None or not np.isfinite(Q_nl):
            return self
        return replace(self, Q_int=1.0 / (1.0 / self.Q_int + 1.0 / Q_nl))


@dataclass(frozen=True)
class NonlinearDissipation:
    """Power-law loss Q_nl = Q_ext (P_c / P_nl)^r."""

    P_c: float
    r: float

    def __post_init__(self):
        if not (self.P_c > 0 and self.r > 0):
            raise ValueError("P_c and r must be positive")


@dataclass(frozen=True)
class SpectrumTrace:
    frequencies: np.ndarray
    s_values: np.ndarray
    input_power: float = 0.0
    kind: str = "notch-S21"
    sigma: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        f = np.asarray(self.frequencies, float)
        s = np.asarray(self.s_values, complex)
        if f.shape != s.shape or f.ndim != 1:
            raise ValueError("frequencies and s_values must be 1D of equal length")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if not np.all(np.isfinite(s)):
            raise ValueError("non-finite S values")
        if self.kind not in TRACE_KINDS:
            raise ValueError(f"unknown trace kind {self.kind!r}")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "s_values", s)


def nonlinear_q(P_nl, nl: NonlinearDissipation, Q_ext):
    if not P_nl > 0:
        raise ValueError("P_nl must be positive")
    return Q_ext * (nl.P_c / P_nl) ** nl.r


def notch_core(f, f_r, Q_int, Q_ext):
    f = np.asarray(f, float)
    q_tot = 1.0 / (1.0 / Q_int + 1.0 / Q_ext)
    return 1.0 - (q_tot / Q_ext) / (1.0 + 2j * q_tot * (f - f_r) / f_r)


def _notch_linear(f, p: ResonatorParams):
    return notch_core(f, p.f_r, p.Q_int, p.Q_ext)


def _self_consistent(f, params, drive_power, nonlinear, model):
    """Per-frequency solve where the absorbed power sets Q_nl."""
    f = np.atleast_1d(np.asarray(f, float))
    out = np.empty(f.shape, complex)
    for k, fk in enumerate(f):
        def absorbed(p_nl):
            q = nonlinear_q(p_nl, nonlinear, params.Q_ext)
            s = model(fk, params.with_extra_loss(q))
            return drive_power * max(0.0, 1.0 - abs(s) ** 2)

        lo = drive_power * 1e-15
        g_lo = lo - absorbed(lo)
        if g_lo >= 0:
            p_nl = lo
        else:
            p_nl = brentq(lambda x: x - absorbed(x), lo, drive_power, xtol=drive_power * 1e-12)
        q = nonlinear_q(p_nl, nonlinear, params.Q_ext)
        out[k] = model(fk, params.with_extra_loss(q))
    return out


def notch_s21(f, params: ResonatorParams, drive_power=None, nonlinear=None):
    """Hanger transmission 1 - (Q_tot/Q_ext) / (1 + 2i Q_tot (f - f_r)/f_r).

    With ``nonlinear`` and ``drive_power`` the power-law loss enters as a
    third parallel channel whose power is the absorbed power, found self
    consistently at every frequency.
    """
    if nonlinear is None or not drive_power:
        return _notch_linear(f, params)
    out = _self_consistent(f, params, drive_power, nonlinear,
                           lambda fk, p: complex(_notch_linear(fk, p)))
    return out if np.ndim(f) else out[0]


def _drive_vector(drive):
    if drive == "single-port":
        return np.array([1.0, 0.0])
    if drive == "symmetric":
        return np.array([1.0, 1.0]) / math.sqrt(2.0)
    if drive == "antisymmetric":
        return np.array([1.0, -1.0]) / math.sqrt(2.0)
    raise ValueError(f"unknown drive {drive!r}")


def amplitudes_core(f, f_r, g_m, Q_int, Q_ext, drive="single-port"):
    f = np.atleast_1d(np.asarray(f, float))
    v = _drive_vector(drive)
    w_r = TWO_PI * f_r
    kappa = w_r * (1.0 / Q_int + 1.0 / Q_ext)
    d = 1j * TWO_PI * (f - f_r) - 0.5 * kappa
    g = TWO_PI * g_m
    det = d * d + g * g
    # inverse of [[d, -ig], [-ig, d]] is [[d, ig], [ig, d]] / det
    rhs = -math.sqrt(w_r / Q_ext) * v
    a_t = (d * rhs[0] + 1j * g * rhs[1]) / det
    a_b = (1j * g * rhs[0] + d * rhs[1]) / det
    return np.stack([a_t, a_b], axis=-1)


def coupled_core(f, f_r, g_m, Q_int, Q_ext, drive="single-port"):
    """Reflection at the top port, normalised to the top-port input."""
    v = _drive_vector(drive)
    a = amplitudes_core(f, f_r, g_m, Q_int, Q_ext, drive)
    out = v[None, :] - math.sqrt(TWO_PI * f_r / Q_ext) * a
    return out[:, 0] / v[0]


def coupled_amplitudes(f, params: ResonatorParams, drive="single-port"):
    """Steady-state amplitudes (a_top, a_bottom) per unit input amplitude.

    Rotating-frame coupled-mode equations at drive detuning
    Delta = 2 pi (f - f_r):
        0 = (i Delta - kappa/2) a_t - i g a_b + sqrt(kappa_e) a_in,t
        0 = (i Delta - kappa/2) a_b - i g a_t + sqrt(kappa_e) a_in,b
    Returns an array of shape (len(f), 2).
    """
    return amplitudes_core(f, params.f_r, params.g_m, params.Q_int, params.Q_ext, drive)


def normal_mode_amplitudes(f, params: ResonatorParams, drive="single-port"):
    """Amplitudes of the H (symmetric) and AH (antisymmetric) normal modes."""
    a = coupled_amplitudes(f, params, drive)
    h = (a[:, 0] + a[:, 1]) / math.sqrt(2.0)
    ah = (a[:, 0] - a[:, 1]) / math.sqrt(2.0)
    return h, ah


def _coupled_linear(f, p, drive):
    return coupled_core(f, p.f_r, p.g_m, p.Q_int, p.Q_ext, drive)


def coupled_s11(f, drive_power, params: ResonatorParams, drive="single-port", nonlinear=None):
    """Reflection at the top port of two identical coupled resonators.

    a_out = a_in - sqrt(kappa_e) a per port.  For single-port drive the
    response shows the H mode at f_r + g_m and the AH mode at f_r - g_m
    with equal linewidths f_r / Q_tot.  ``drive_power`` matters only with
    ``nonlinear`` (self-consistent absorbed-power loss, as in notch_s21).
    """
    scalar = np.ndim(f) == 0
    if nonlinear is None or not drive_power:
        out = _coupled_linear(f, params, drive)
    else:
        out = _self_consistent(f, params, drive_power, nonlinear,
                               lambda fk, p: complex(_coupled_linear(fk, p, drive)[0]))
    return out[0] if scalar else out


def mode_frequency(params: ResonatorParams, mode="bare"):
    if mode == "bare":
        return params.f_r
    if mode == "AH":
        return params.f_r - params.g_m
    if mode == "H":
        return params.f_r + params.g_m
    raise ValueError(f"unknown mode {mode!r}")


def steady_state_photons(drive_power, f_drive, params: ResonatorParams, mode="bare"):
    """Mean photon number kappa_e P / (hbar w_d ((kappa/2)^2 + Delta^2)).

    Delta is the drive detuning from the selected mode (bare, AH or H).
    """
    if np.any(np.asarray(drive_power) < 0):
        raise ValueError("drive power must be non-negative")
    w_d = TWO_PI * np.asarray(f_drive, float)
    delta = w_d - TWO_PI * mode_frequency(params, mode)
    lorentz = (0.5 * params.kappa) ** 2 + delta ** 2
    return params.kappa_ext * np.asarray(drive_power) / (HBAR * w_d * lorentz)


def current_from_photons(n_photons, k_current):
    n = np.asarray(n_photons, float)
    if np.any(n < 0):
        raise ValueError("photon number must be non-negative")
    return k_current * np.sqrt(n)


def k_from_threshold(n_threshold, I_max):
    """Calibration: the k that maps the threshold photon number onto I_max."""
    if not n_threshold > 0:
        raise ValueError("threshold photon number must be positive")
    return I_max / math.sqrt(n_threshold)
