"""Time-domain simulation of the single-sideband (SS) gate.

Basis: |s1 s2> (x) |n> with s in (up, down) = (0, 1) and n = 0..n_max, so
index = (2 s1 + s2)(n_max + 1) + n.  Hamiltonians are handled in rad/s
(hbar = 1) internally; :func:`build_ss_hamiltonian` returns joules.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.linalg import expm, sqrtm

from .constants import HBAR
from .errors import AlignmentError, IntegratorError

NORM_TOL = 1e-8
SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class SSDriveConfig:
    Omega_C: float
    Omega_S: float
    delta: float
    duration: float
    dt: float
    b_signs: tuple = (1, -1)
    n_max: int = 10

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        fastest = max(abs(self.Omega_C), abs(self.delta), abs(self.Omega_S) * math.sqrt(self.n_max))
        if fastest > 0 and self.dt > 2 * math.pi / (50 * fastest) * (1 + 1e-12):
            raise ValueError("dt exceeds 2 pi / (50 x fastest rate)")
        if len(self.b_signs) != 2 or any(s not in (1, -1) for s in self.b_signs):
            raise ValueError("b_signs must be two entries of +1/-1")

    @property
    def dim(self):
        return 4 * (self.n_max + 1)

    @property
    def n_steps(self):
        return max(1, int(round(self.duration / self.dt)))


def max_dt(Omega_C, Omega_S, delta, n_max):
    fastest = max(abs(Omega_C), abs(delta), abs(Omega_S) * math.sqrt(n_max))
    return 2 * math.pi / (50 * fastest)


def gate_config(Omega_S, ratio, n_max=10, steps_per_limit=1, delta=None, duration=None):
    """SS gate at delta = Omega_S for one loop, tau = 2 pi / delta.

    The step is the largest allowed by the config invariant, divided by
    ``steps_per_limit`` and shrunk so that it tiles the duration exactly.
    """
    delta = Omega_S if delta is None else delta
    duration = 2 * math.pi / abs(delta) if duration is None else duration
    Omega_C = ratio * Omega_S
    dt_lim = max_dt(Omega_C, Omega_S, delta, n_max) / steps_per_limit
    n = math.ceil(duration / dt_lim)
    return SSDriveConfig(Omega_C, Omega_S, delta, duration, duration / n, (1, -1), n_max)


@dataclass
class QuantumState:
    amplitudes: np.ndarray
    n_max: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, complex)
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        if self.amplitudes.shape != (4 * (self.n_max + 1),):
            raise ValueError("amplitude vector has the wrong length")
        if abs(np.linalg.norm(self.amplitudes) - 1) > 1e-9:
            raise ValueError("state is not normalised")


def basis_index(s1, s2, n, n_max):
    return (2 * s1 + s2) * (n_max + 1) + n


def product_state(s1, s2, n, n_max) -> QuantumState:
    """|s1 s2>|n> with s = 0 for up and 1 for down."""
    v = np.zeros(4 * (n_max + 1), complex)
    v[basis_index(s1, s2, n, n_max)] = 1.0
    return QuantumState(v, n_max)


def initial_state(n_max=10) -> QuantumState:
    """|up down> (x) |0>."""
    return product_state(0, 1, 0, n_max)


@lru_cache(maxsize=32)
def _operators(n_max):
    """Single-site operators embedded in the full space."""
    I2 = np.eye(2)
    sp = np.array([[0, 1], [0, 0]], complex)  # |up><down|
    nf = n_max + 1
    a = np.diag(np.sqrt(np.arange(1, nf)), 1).astype(complex)
    If = np.eye(nf)
    sp1 = np.kron(np.kron(sp, I2), If)
    sp2 = np.kron(np.kron(I2, sp), If)
    A = np.kron(np.kron(I2, I2), a)
    N = np.kron(np.kron(I2, I2), np.diag(np.arange(nf)).astype(complex))
    return sp1, sp2, A, N


def _parts(cfg: SSDriveConfig):
    """H(t) = H0 + e^{-i delta t} X + e^{+i delta t} X^dagger, in rad/s."""
    sp1, sp2, A, _ = _operators(cfg.n_max)
    sx = [sp1 + sp1.conj().T, sp2 + sp2.conj().T]
    H0 = 0.5 * cfg.Omega_C * (sx[0] + sx[1])
    X = np.zeros_like(H0)
    for sgn, sp in zip(cfg.b_signs, (sp1, sp2)):
        X = X + 0.5 * sgn * cfg.Omega_S * (A.conj().T @ sp.conj().T)
    return H0, X


def _h_rad(cfg, t, parts=None):
    H0, X = parts or _parts(cfg)
    ph = np.exp(-1j * cfg.delta * t)
    return H0 + ph * X + np.conj(ph) * X.conj().T


def build_ss_hamiltonian(cfg: SSDriveConfig, t) -> np.ndarray:
    """Interaction-picture SS Hamiltonian at time ``t`` in joules."""
    return HBAR * _h_rad(cfg, t)


def effective_hamiltonian_parts(cfg: SSDriveConfig):
    """Spin-dependent force (Omega_S/2)(e^{-i delta t} a^dag + h.c.) S_x."""
    sp1, sp2, A, _ = _operators(cfg.n_max)
    Sx = 0.5 * sum(s * (sp + sp.conj().T) for s, sp in zip(cfg.b_signs, (sp1, sp2)))
    X = 0.5 * cfg.Omega_S * (A.conj().T @ Sx)
    return np.zeros_like(X), X


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    n_max: int
    meta: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.states[-1]

    def norms(self):
        return np.linalg.norm(self.states, axis=1)


def _magnus_step(h_of_t, t, dt):
    """Fourth-order Magnus propagator over [t, t + dt] (exactly unitary)."""
    c = 0.5 - SQRT3 / 6
    A1 = -1j * h_of_t(t + c * dt)
    A2 = -1j * h_of_t(t + (1 - c) * dt)
    omega = 0.5 * dt * (A1 + A2) + (SQRT3 / 12) * dt * dt * (A2 @ A1 - A1 @ A2)
    return expm(omega)


def _propagate(cfg, psi0, parts, sample_every=1, frame=None):
    if abs(np.linalg.norm(psi0.amplitudes) - 1) > 1e-9:
        raise ValueError("initial state must be normalised")
    if psi0.n_max != cfg.n_max:
        raise AlignmentError("state truncation differs from the config")
    n = cfg.n_steps
    dt = cfg.duration / n
    psi = psi0.amplitudes.copy()
    times, states = [0.0], [psi.copy()]
    h = lambda t: _h_rad(cfg, t, parts)  # noqa: E731
    for k in range(n):
        psi = _magnus_step(h, k * dt, dt) @ psi
        if (k + 1) % sample_every == 0 or k + 1 == n:
            times.append((k + 1) * dt)
            states.append(psi.copy())
    states = np.array(states)
    drift = np.max(np.abs(np.linalg.norm(states, axis=1) - 1))
    if drift > NORM_TOL:
        raise IntegratorError(f"norm drift {drift:.2e}; reduce dt")
    times = np.array(times)
    if frame is not None:
        states = np.array([frame(t) @ s for t, s in zip(times, states)])
    return Trajectory(times, states, cfg.n_max, {"dt": dt, "norm_drift": float(drift)})


def evolve(cfg: SSDriveConfig, psi0: QuantumState, sample_every=1) -> Trajectory:
    """Integrate the full SS Hamiltonian with a fourth-order Magnus stepper."""
    return _propagate(cfg, psi0, _parts(cfg), sample_every)


def carrier_frame(cfg: SSDriveConfig):
    """exp(-i (Omega_C/2) sum_j sigma_x,j t): carrier rotation as a function of t."""
    sp1, sp2, _, _ = _operators(cfg.n_max)
    G = 0.5 * cfg.Omega_C * (sp1 + sp1.conj().T + sp2 + sp2.conj().T)
    w, V = np.linalg.eigh(G)
    return lambda t: (V * np.exp(-1j * w * t)) @ V.conj().T


def evolve_effective(cfg: SSDriveConfig, psi0: QuantumState, sample_every=1,
                     lab_frame=True) -> Trajectory:
    """Ideal spin-dependent-force evolution.

    The effective model lives in the frame rotating with the carrier; with
    ``lab_frame`` the states are mapped back by the carrier rotation so that
    they are directly comparable with :func:`evolve`.
    """
    frame = carrier_frame(cfg) if lab_frame else None
    return _propagate(cfg, psi0, effective_hamiltonian_parts(cfg), sample_every, frame)


def evolve_exact(cfg: SSDriveConfig, psi0: QuantumState, times) -> Trajectory:
    """Closed form of the full model via the frame rotating with a^dag a.

    With psi = exp(-i delta t N) phi the Hamiltonian for phi is time
    independent: H0 + X + X^dagger - delta N.
    """
    H0, X = _parts(cfg)
    _, _, _, N = _operators(cfg.n_max)
    Hr = H0 + X + X.conj().T - cfg.delta * N
    w, V = np.linalg.eigh(Hr)
    c0 = V.conj().T @ psi0.amplitudes
    nvals = np.real(np.diag(N))
    out = []
    for t in np.atleast_1d(times):
        phi = V @ (np.exp(-1j * w * t) * c0)
        out.append(np.exp(-1j * cfg.delta * t * nvals) * phi)
    return Trajectory(np.atleast_1d(np.asarray(times, float)), np.array(out), cfg.n_max)


def reduced_spin(state, n_max):
    """Two-spin density matrix after tracing out the motional mode."""
    m = np.asarray(state).reshape(4, n_max + 1)
    return m @ m.conj().T


def reduced_motion(state, n_max):
    m = np.asarray(state).reshape(4, n_max + 1)
    return m.T @ m.conj()


def purity(rho):
    return float(np.real(np.trace(rho @ rho)))


def concurrence(rho):
    """Wootters concurrence of a two-qubit density matrix."""
    sy = np.array([[0, -1j], [1j, 0]])
    yy = np.kron(sy, sy)
    R = rho @ yy @ rho.conj() @ yy
    ev = np.sqrt(np.clip(np.sort(np.real(np.linalg.eigvals(R)))[::-1], 0, None))
    return float(max(0.0, ev[0] - ev[1] - ev[2] - ev[3]))


def uhlmann_fidelity(rho, sigma):
    s = sqrtm(rho)
    return float(np.real(np.trace(sqrtm(s @ sigma @ s))) ** 2)


@dataclass(frozen=True)
class InfidelityReport:
    full: float
    spin: float


def bell_infidelity(full: Trajectory, ideal: Trajectory) -> InfidelityReport:
    """1 - |<ideal|full>|^2 at the final time, plus the spin-reduced value."""
    if full.n_max != ideal.n_max or len(full.times) != len(ideal.times) \
            or not np.allclose(full.times, ideal.times, rtol=0, atol=1e-15 + 1e-12 * full.times[-1]):
        raise AlignmentError("trajectories do not share a time grid")
    a, b = ideal.final, full.final
    ov = abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real)
    f_spin = uhlmann_fidelity(reduced_spin(a, ideal.n_max), reduced_spin(b, full.n_max))
    return InfidelityReport(float(min(max(1 - ov, 0.0), 1.0)),
                            float(min(max(1 - f_spin, 0.0), 1.0)))


def _ratio_point(args):
    ratio, base = args
    cfg = gate_config(base.Omega_S, ratio, base.n_max, delta=base.delta, duration=base.duration)
    psi0 = initial_state(cfg.n_max)
    step = cfg.n_steps
    rep = bell_infidelity(evolve(cfg, psi0, step), evolve_effective(cfg, psi0, step))
    return ratio, rep


def infidelity_vs_ratio(ratios, base: SSDriveConfig, workers=1):
    """Infidelity of the full model against the effective one for each ratio.

    Omega_S, delta, duration and n_max come from ``base``; Omega_C is
    ratio * Omega_S and dt follows the config limit.  Returns rows
    (ratio, full infidelity, spin infidelity) sorted by ratio.
    """
    ratios = sorted(float(r) for r in ratios)
    if any(r < 2 for r in ratios):
        raise ValueError("ratios must be at least 2")
    jobs = [(r, base) for r in ratios]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            res = list(ex.map(_ratio_point, jobs))
    else:
        res = [_ratio_point(j) for j in jobs]
    return [(r, rep.full, rep.spin) for r, rep in res]


def write_trajectory(path, full: Trajectory, ideal: Trajectory | None = None):
    """CSV rows: t, spin populations (uu, ud, du, dd), spin and full fidelity."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "p_uu", "p_ud", "p_du", "p_dd", "spin_fidelity", "full_fidelity"])
        for k, t in enumerate(full.times):
            rho = reduced_spin(full.states[k], full.n_max)
            pops = np.real(np.diag(rho))
            if ideal is not None:
                ref = ideal.states[k]
                ff = abs(np.vdot(ref, full.states[k])) ** 2
                fs = uhlmann_fidelity(reduced_spin(ref, ideal.n_max), rho)
            else:
                ff = fs = float("nan")
            w.writerow([repr(float(t))] + [repr(float(p)) for p in pops]
                       + [repr(float(fs)), repr(float(ff))])
    return path
