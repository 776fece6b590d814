"""Microwave input-power budgets for the MS and single-sideband (SS) gates.

All couplings enter as magnitudes: the sign of the transition moment and of
the field gradient only sets a phase, and power is phase-insensitive.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .constants import HBAR, TWO_PI
from .errors import OptimizationError

SCHEMES = ("MS", "SS")


@dataclass(frozen=True)
class GatePhysics:
    """Single-photon couplings and drive targets; angular quantities in rad/s."""

    mu_parallel: float
    dBdr_single_photon: float
    B_H0: float
    b_j: float
    q0: float
    phi_deg: float
    theta_HF_deg: float
    g_m: float
    omega_rock: float
    omega_r: float
    Omega_M: float
    Omega_S: float
    rabi_ratio: float = 15.0

    def __post_init__(self):
        vals = [v for v in asdict(self).values() if isinstance(v, (int, float))]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("gate parameters must be finite")
        if abs(self.b_j) > 1:
            raise ValueError("|b_j| must not exceed 1")
        if self.rabi_ratio <= 1:
            raise ValueError("carrier to sideband ratio must exceed 1")

    @property
    def Omega_C(self):
        return self.rabi_ratio * self.Omega_S

    def scaled(self, **changes):
        return replace(self, **changes)


REFERENCE_GATE = GatePhysics(
    mu_parallel=-9.28e-24,
    dBdr_single_photon=1.2e-6,
    B_H0=5.9e-11,
    b_j=1.0 / math.sqrt(2.0),
    q0=9.30e-9,
    phi_deg=45.0,
    theta_HF_deg=36.0,
    g_m=TWO_PI * 30e6,
    omega_rock=TWO_PI * 4.4e6,
    omega_r=TWO_PI * 1.074e9,
    Omega_M=TWO_PI * 1e3,
    Omega_S=TWO_PI * 2e3,
    rabi_ratio=15.0,
)


@dataclass
class PowerBudget:
    scheme: str
    P_total: float
    components: dict
    Q_int: float
    Q_ext: float
    optimal_Q_ext: float | None = None

    def to_dict(self):
        return {"scheme": self.scheme, "P_total_W": self.P_total,
                "components_W": self.components, "Q_int": self.Q_int, "Q_ext": self.Q_ext,
                "optimal_Q_ext": self.optimal_Q_ext}


def zero_point_motion(mass, omega):
    """Ground-state extent sqrt(hbar / (2 M omega)) of a mode at ``omega``."""
    if not (mass > 0 and omega > 0):
        raise ValueError("mass and mode frequency must be positive")
    return math.sqrt(HBAR / (2.0 * mass * omega))


def sideband_rabi_per_photon(p: GatePhysics):
    """|mu dB/dr b q0 cos(phi)| / hbar for one AH-mode photon."""
    return abs(p.mu_parallel * p.dBdr_single_photon * p.b_j * p.q0
               * math.cos(math.radians(p.phi_deg))) / HBAR


def carrier_rabi_per_photon(p: GatePhysics):
    """|mu B_H0 cos(phi)| / hbar for one H-mode photon."""
    return abs(p.mu_parallel * p.B_H0 * math.cos(math.radians(p.phi_deg))) / HBAR


def photons_for(rabi, per_photon):
    """Photon number reaching ``rabi``: (rabi / per-photon rate)^2."""
    if per_photon == 0:
        return math.inf if rabi else 0.0
    return (rabi / per_photon) ** 2


def _q_total(Q_int, Q_ext):
    return 1.0 / (1.0 / np.asarray(Q_int, float) + 1.0 / np.asarray(Q_ext, float))


def _ms_components(p, Q_int, Q_ext):
    n = photons_for(p.Omega_M, sideband_rabi_per_photon(p))
    kap = p.omega_r / _q_total(Q_int, Q_ext)
    return {"P_MS": HBAR * (4 * p.omega_rock ** 2 + kap ** 2) * Q_ext * n}


def _ss_components(p, Q_int, Q_ext):
    n_c = photons_for(p.Omega_C, carrier_rabi_per_photon(p))
    n_s = photons_for(p.Omega_S, sideband_rabi_per_photon(p))
    kap = p.omega_r / _q_total(Q_int, Q_ext)
    det = 2 * p.g_m - p.omega_rock
    P_C = 0.5 * HBAR * (4 * det ** 2 + kap ** 2) * Q_ext * n_c
    P_R = 0.5 * HBAR * kap ** 2 * Q_ext * n_s
    return {"P_C": P_C, "P_R": P_R}


def _components(p, Q_int, Q_ext, scheme):
    if scheme == "MS":
        return _ms_components(p, Q_int, Q_ext)
    if scheme == "SS":
        return _ss_components(p, Q_int, Q_ext)
    raise ValueError(f"unknown scheme {scheme!r}")


def _total(p, Q_int, Q_ext, scheme):
    return sum(_components(p, Q_int, Q_ext, scheme).values())


def ms_power(p: GatePhysics, Q_int, Q_ext) -> PowerBudget:
    """P_MS = hbar (4 w_rock^2 + (w_r/Q_tot)^2) Q_ext n_M."""
    comp = {k: float(v) for k, v in _ms_components(p, Q_int, Q_ext).items()}
    return PowerBudget("MS", sum(comp.values()), comp, float(Q_int), float(Q_ext))


def ss_power(p: GatePhysics, Q_int, Q_ext) -> PowerBudget:
    """Carrier through the H-mode tail plus red sideband on the AH resonance."""
    comp = {k: float(v) for k, v in _ss_components(p, Q_int, Q_ext).items()}
    return PowerBudget("SS", sum(comp.values()), comp, float(Q_int), float(Q_ext))


def scheme_power(p: GatePhysics, Q_int, Q_ext, scheme) -> PowerBudget:
    return ms_power(p, Q_int, Q_ext) if scheme == "MS" else ss_power(p, Q_int, Q_ext)


def asymptotic_q_ext(p: GatePhysics, scheme):
    """Minimiser for Q_int -> infinity, used to centre the search bracket."""
    if scheme == "MS":
        return p.omega_r / (2 * p.omega_rock)
    n_c = photons_for(p.Omega_C, carrier_rabi_per_photon(p))
    n_s = photons_for(p.Omega_S, sideband_rabi_per_photon(p))
    c_C = 2 * HBAR * (2 * p.g_m - p.omega_rock) ** 2 * n_c
    c_R = 0.5 * HBAR * p.omega_r ** 2 * (n_s + n_c)
    return math.sqrt(c_R / c_C)


def optimal_q_ext(p: GatePhysics, Q_int, scheme, decades=4.0):
    """Q_ext minimising the total power, by bounded search in log10(Q_ext)."""
    centre = math.log10(asymptotic_q_ext(p, scheme))
    lo, hi = centre - decades, centre + decades
    res = minimize_scalar(lambda u: math.log(_total(p, Q_int, 10.0 ** u, scheme)),
                          bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    if not res.success or min(res.x - lo, hi - res.x) < 1e-3:
        raise OptimizationError(f"no interior power minimum for {scheme} at Q_int={Q_int}")
    # bracket check: the objective must rise on both sides of the optimum
    f0 = _total(p, Q_int, 10.0 ** res.x, scheme)
    if not (_total(p, Q_int, 10.0 ** lo, scheme) > f0 and _total(p, Q_int, 10.0 ** hi, scheme) > f0):
        raise OptimizationError("power objective is not unimodal on the search bracket")
    return float(10.0 ** res.x)


def minimum_power(p: GatePhysics, Q_int, scheme) -> PowerBudget:
    q = optimal_q_ext(p, Q_int, scheme)
    b = scheme_power(p, Q_int, q, scheme)
    b.optimal_Q_ext = q
    return b


@dataclass
class PowerMap:
    scheme: str
    Q_int: np.ndarray
    Q_ext: np.ndarray
    P_total: np.ndarray
    components: dict = field(default_factory=dict)

    def budget(self, i, j) -> PowerBudget:
        comp = {k: float(v[i, j]) for k, v in self.components.items()}
        return PowerBudget(self.scheme, float(self.P_total[i, j]), comp,
                           float(self.Q_int[i]), float(self.Q_ext[j]))

    def argmin_q_ext(self, i):
        """Grid Q_ext with the lowest total power for row ``i``."""
        return float(self.Q_ext[int(np.argmin(self.P_total[i]))])

    def minima(self):
        return {repr(float(qi)): {"Q_ext": self.argmin_q_ext(i),
                                  "P_W": float(self.P_total[i].min())}
                for i, qi in enumerate(self.Q_int)}

    def to_json(self):
        return json.dumps({"scheme": self.scheme, "minima": self.minima()}, indent=2)


def power_map(p: GatePhysics, Q_int_grid, Q_ext_grid, scheme) -> PowerMap:
    """Total and per-component power on the (Q_int, Q_ext) grid."""
    qi = np.asarray(Q_int_grid, float)
    qe = np.asarray(Q_ext_grid, float)
    if qi.size == 0 or qe.size == 0:
        raise ValueError("empty Q grid")
    QI, QE = np.meshgrid(qi, qe, indexing="ij")
    comp = {k: np.asarray(v, float) for k, v in _components(p, QI, QE, scheme).items()}
    total = sum(comp.values())
    return PowerMap(scheme, qi, qe, total, comp)
