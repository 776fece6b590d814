"""Fitters for notch S21 and coupled-resonator S11 traces.

Both fitters share the background model a exp(i alpha) exp(-2 pi i (f - f0) tau)
(complex scale and cable delay about the trace centre f0) and finish with a
least-squares refinement over real and imaginary residuals.  Quality factors
are refined in log space, which keeps them positive and well scaled.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eig
from scipy.optimize import least_squares

from ..errors import FitFailureError, NoResonanceError
from .models import ResonatorParams, SpectrumTrace, coupled_core, notch_core


@dataclass
class FitResult:
    params: ResonatorParams
    uncertainties: dict
    covariance: np.ndarray
    names: tuple
    residual_norm: float
    background: dict = field(default_factory=dict)

    def to_json(self):
        p = self.params
        out = {
            "params": {"f_r_Hz": p.f_r, "Q_int": p.Q_int, "Q_ext": p.Q_ext, "g_m_Hz": p.g_m},
            "uncertainties_1sigma": self.uncertainties,
            "residual_norm": self.residual_norm,
            "background": self.background,
        }
        return json.dumps(out, indent=2, sort_keys=True)


def _background(f, f0, a, alpha, tau):
    return a * np.exp(1j * alpha) * np.exp(-2j * math.pi * (f - f0) * tau)


def estimate_delay(f, s, edge_fraction=0.1):
    """Cable delay from the phase slope of the outer parts of the trace."""
    n = max(3, int(edge_fraction * len(f)))
    idx = np.r_[0:n, len(f) - n:len(f)]
    ph = np.unwrap(np.angle(s))
    slope = np.polyfit(f[idx], ph[idx], 1)[0]
    return -slope / (2 * math.pi)


def fit_circle(z):
    """Algebraic (Pratt-normalised) circle fit; returns (centre, radius)."""
    x, y = z.real, z.imag
    w = x * x + y * y
    M = np.column_stack([w, x, y, np.ones_like(x)])
    moments = M.T @ M / len(z)
    B = np.array([[0, 0, 0, -2], [0, 1, 0, 0], [0, 0, 1, 0], [-2, 0, 0, 0]], float)
    evals, evecs = eig(moments, B)
    evals = np.real(evals)
    ok = np.isfinite(evals) & (evals >= -1e-12 * np.nanmax(np.abs(evals[np.isfinite(evals)])))
    # smallest non-negative generalized eigenvalue gives the Pratt solution
    k = int(np.argmin(np.where(ok, evals, np.inf)))
    A, Bx, By, C = np.real(evecs[:, k])
    if abs(A) < 1e-300:
        raise NoResonanceError("degenerate circle fit")
    xc, yc = -Bx / (2 * A), -By / (2 * A)
    r = math.sqrt(max(Bx * Bx + By * By - 4 * A * C, 0.0)) / (2 * abs(A))
    return complex(xc, yc), r


def _phase_fit(f, z, f_guess, q_guess):
    """theta(f) = theta0 + 2 arctan(2 Q (1 - f/f_r)) on a circle centred at 0."""
    ph = np.unwrap(np.angle(z))

    def res(p):
        th0, fr, lq = p
        return ph - (th0 + 2 * np.arctan(2 * math.exp(lq) * (1 - f / fr)))

    th0 = ph[np.argmin(np.abs(f - f_guess))]
    sol = least_squares(res, [th0, f_guess, math.log(q_guess)],
                        x_scale=[1.0, f_guess / q_guess, 1.0], method="lm")
    return sol.x[0], sol.x[1], math.exp(sol.x[2])


def _noise_level(s):
    """Robust point-to-point noise estimate (sigma per quadrature)."""
    d = np.diff(s)
    return float(np.median(np.abs(d)) / math.sqrt(2) / 0.8326)


def _covariance(jac, resid, n_par):
    dof = max(len(resid) - n_par, 1)
    s2 = float(resid @ resid) / dof
    jtj = jac.T @ jac
    try:
        cov = np.linalg.inv(jtj) * s2
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj) * s2
    return cov


def _refine(residual_fn, x0, x_scale):
    sol = least_squares(residual_fn, x0, x_scale=x_scale, method="lm",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise FitFailureError(f"least-squares refinement failed: {sol.message}",
                              float(np.linalg.norm(sol.fun)))
    return sol


def _initial_notch(f, s):
    f0 = 0.5 * (f[0] + f[-1])
    tau = estimate_delay(f, s)
    z = s * np.exp(2j * math.pi * (f - f0) * tau)
    zc, r = fit_circle(z)
    noise = _noise_level(z)
    if r < 3 * noise or r < 1e-6 * np.median(np.abs(z)):
        raise NoResonanceError(f"circle radius {r:.3g} not above noise {noise:.3g}")
    span = f[-1] - f[0]
    k = int(np.argmax(np.abs(z - np.median(z))))
    f_guess = f[k]
    th0, fr, qt = _phase_fit(f, z - zc, f_guess, max(f_guess / (0.05 * span), 10.0))
    off = zc + r * np.exp(1j * (th0 + math.pi))
    a, alpha = abs(off), float(np.angle(off))
    diam = min(2 * r / a, 0.999)
    q_ext = qt / diam
    q_int = 1.0 / max(1.0 / qt - 1.0 / q_ext, 1e-12 / qt)
    return f0, dict(f_r=fr, Q_int=q_int, Q_ext=q_ext, a=a, alpha=alpha, tau=tau)


def fit_notch(trace: SpectrumTrace) -> FitResult:
    """Fit a hanger S21 trace: delay, circle, phase, then full refinement."""
    if trace.kind != "notch-S21":
        raise ValueError("fit_notch needs a notch-S21 trace")
    f, s = trace.frequencies, trace.s_values
    f0, g = _initial_notch(f, s)

    def model(x):
        fr, lqi, lqe, a, alpha, tau = x
        return _background(f, f0, a, alpha, tau) * notch_core(f, fr, math.exp(lqi),
                                                              math.exp(lqe))

    def resid(x):
        d = model(x) - s
        return np.concatenate([d.real, d.imag])

    x0 = [g["f_r"], math.log(g["Q_int"]), math.log(g["Q_ext"]), g["a"], g["alpha"], g["tau"]]
    lw = g["f_r"] / min(g["Q_int"], g["Q_ext"])
    scale = [lw * 0.01, 0.1, 0.1, 0.01 * g["a"], 0.01, 0.01 / max(f[-1] - f[0], 1.0)]
    sol = _refine(resid, x0, scale)
    fr, lqi, lqe, a, alpha, tau = sol.x
    cov = _covariance(sol.jac, sol.fun, len(x0))
    sd = np.sqrt(np.clip(np.diag(cov), 0, None))
    q_int, q_ext = math.exp(lqi), math.exp(lqe)
    params = ResonatorParams(float(fr), q_int, q_ext)
    unc = {"f_r_Hz": float(sd[0]), "Q_int": float(q_int * sd[1]), "Q_ext": float(q_ext * sd[2])}
    return FitResult(params, unc, cov, ("f_r", "log_Q_int", "log_Q_ext", "a", "alpha", "tau"),
                     float(np.linalg.norm(sol.fun)),
                     {"amplitude": float(a), "phase_rad": float(alpha), "delay_s": float(tau),
                      "f_ref_Hz": float(f0)})


def _dip_guesses(f, mag):
    """Two deepest well-separated minima of |S11|."""
    order = np.argsort(mag)
    first = order[0]
    sep = max(3, len(f) // 50)
    for k in order[1:]:
        if abs(k - first) > sep:
            # require a local maximum in between
            lo, hi = sorted((first, k))
            if mag[lo:hi + 1].max() > max(mag[lo], mag[hi]) + 0.1 * (mag.max() - mag.min()):
                return sorted((f[first], f[k]))
    raise NoResonanceError("could not find two resonances in the reflection trace")


def fit_coupled(trace: SpectrumTrace) -> FitResult:
    """Joint complex fit of (f_r, g_m, Q_int, Q_ext) plus background."""
    if trace.kind != "reflection-S11":
        raise ValueError("fit_coupled needs a reflection-S11 trace")
    f, s = trace.frequencies, trace.s_values
    f0 = 0.5 * (f[0] + f[-1])
    tau = estimate_delay(f, s)
    z = s * np.exp(2j * math.pi * (f - f0) * tau)
    edge = np.r_[z[:5], z[-5:]]
    a0 = float(np.mean(np.abs(edge)))
    alpha0 = float(np.angle(np.mean(edge)))
    mag = np.abs(z) / a0
    if mag.max() - mag.min() < 3 * _noise_level(z) / a0:
        raise NoResonanceError("reflection trace shows no resonance above noise")
    f_lo, f_hi = _dip_guesses(f, mag)
    fr, gm = 0.5 * (f_lo + f_hi), 0.5 * (f_hi - f_lo)
    # linewidth from the half-depth width of the lower dip
    k = int(np.argmin(np.abs(f - f_lo)))
    depth = 1 - mag[k]
    half = mag < 1 - 0.5 * depth
    left = k
    while left > 0 and half[left - 1]:
        left -= 1
    right = k
    while right < len(f) - 1 and half[right + 1]:
        right += 1
    fwhm = max(f[right] - f[left], f[1] - f[0])
    q_tot = fr / fwhm

    def model(x):
        fr_, gm_, lqi, lqe, a, alpha, tau_ = x
        return _background(f, f0, a, alpha, tau_) * coupled_core(
            f, fr_, abs(gm_), math.exp(lqi), math.exp(lqe))

    def resid(x):
        d = model(x) - s
        return np.concatenate([d.real, d.imag])

    best = None
    # over- and under-coupled starts; the reflection circle alone cannot tell them apart
    for ratio in (0.5, 2.0, 1.0 / 0.9, 10.0):
        qe = q_tot * (1 + ratio)
        qi = q_tot * (1 + 1 / ratio)
        x0 = [fr, gm, math.log(qi), math.log(qe), a0, alpha0, tau]
        scale = [fwhm * 0.01, fwhm * 0.01, 0.1, 0.1, 0.01 * a0, 0.01,
                 0.01 / max(f[-1] - f[0], 1.0)]
        try:
            sol = _refine(resid, x0, scale)
        except FitFailureError:
            continue
        if best is None or sol.cost < best.cost:
            best = sol
    if best is None:
        raise FitFailureError("coupled fit failed from every starting point")
    fr, gm, lqi, lqe, a, alpha, tau = best.x
    cov = _covariance(best.jac, best.fun, len(best.x))
    sd = np.sqrt(np.clip(np.diag(cov), 0, None))
    q_int, q_ext = math.exp(lqi), math.exp(lqe)
    params = ResonatorParams(float(fr), q_int, q_ext, float(abs(gm)))
    unc = {"f_r_Hz": float(sd[0]), "g_m_Hz": float(sd[1]), "Q_int": float(q_int * sd[2]),
           "Q_ext": float(q_ext * sd[3])}
    return FitResult(params, unc, cov,
                     ("f_r", "g_m", "log_Q_int", "log_Q_ext", "a", "alpha", "tau"),
                     float(np.linalg.norm(best.fun)),
                     {"amplitude": float(a), "phase_rad": float(alpha), "delay_s": float(tau),
                      "f_ref_Hz": float(f0)})
