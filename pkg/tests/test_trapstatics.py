import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from conftest import energy_map, uniform_mesh
from sctrap.constants import E_CHARGE
from sctrap.errors import AlignmentError, FieldKindError, NoTrapError, SaddleError
from sctrap.fieldsolver import FieldMap, trap3d_cross_section
from sctrap.trapstatics import (BE9, IonSpecies, TrapDrive, boundary_a0, boundary_b1,
                                hessian_modes, mathieu_a, mathieu_q, pseudopotential_map,
                                solve_trap, stability_check, total_potential, trap_depth)

TWO_PI = 2 * math.pi
OMEGA_RF = TWO_PI * 70e6
M = BE9.mass
REGION = (-15e-6, 15e-6, -15e-6, 15e-6)


def uniform_e(mag, n=21):
    mesh = uniform_mesh(10e-6, n)
    vals = np.zeros(mesh.shape + (2,))
    vals[..., 0] = mag
    return FieldMap(mesh, "electric", vals)


def rotated_quadratic(w1, w2, theta_deg, quartic=0.0):
    th = math.radians(theta_deg)
    k1, k2 = M * w1 ** 2, M * w2 ** 2

    def fn(X, Z):
        u = X * math.cos(th) + Z * math.sin(th)
        v = -X * math.sin(th) + Z * math.cos(th)
        return 0.5 * k1 * u ** 2 + 0.5 * k2 * v ** 2 + quartic * (u ** 4 + v ** 4)

    return fn


# -- pseudopotential and total potential --------------------------------

def test_zero_field_zero_pseudopotential():
    phi = pseudopotential_map(uniform_e(0.0), BE9, OMEGA_RF)
    assert np.all(phi.values == 0.0)


def test_pseudopotential_spot_value():
    phi = pseudopotential_map(uniform_e(1e5), BE9, OMEGA_RF)
    assert phi.values[0, 0] == pytest.approx(2.217e-20, rel=5e-4)
    assert phi.values[0, 0] / E_CHARGE == pytest.approx(0.1384, rel=5e-4)


def test_pseudopotential_scaling():
    base = pseudopotential_map(uniform_e(3e4), BE9, OMEGA_RF).values
    assert np.allclose(pseudopotential_map(uniform_e(6e4), BE9, OMEGA_RF).values, 4 * base,
                       rtol=1e-14)
    assert np.allclose(pseudopotential_map(uniform_e(3e4), BE9, 2 * OMEGA_RF).values,
                       base / 4, rtol=1e-14)
    assert np.all(base >= 0)


def test_pseudopotential_kind_check():
    with pytest.raises(FieldKindError):
        pseudopotential_map(energy_map(lambda X, Z: X * 0), BE9, OMEGA_RF)


def test_total_potential_identities():
    mesh = uniform_mesh(10e-6, 21)
    pseudo = pseudopotential_map(uniform_e(2e4), BE9, OMEGA_RF)
    zero_dc = FieldMap(mesh, "potential", np.zeros(mesh.shape))
    assert np.array_equal(total_potential(pseudo, zero_dc, BE9).values, pseudo.values)
    one_v = FieldMap(mesh, "potential", np.ones(mesh.shape))
    tot = total_potential(pseudopotential_map(uniform_e(0.0), BE9, OMEGA_RF), one_v, BE9)
    assert np.allclose(tot.values / E_CHARGE, 1.0, rtol=1e-15)


def test_total_potential_mesh_mismatch():
    pseudo = pseudopotential_map(uniform_e(1.0), BE9, OMEGA_RF)
    other = uniform_mesh(10e-6, 31)
    with pytest.raises(AlignmentError):
        total_potential(pseudo, FieldMap(other, "potential", np.zeros(other.shape)), BE9)


def test_ion_species_invariants():
    with pytest.raises(ValueError):
        IonSpecies(0.0, E_CHARGE)
    with pytest.raises(ValueError):
        IonSpecies(M, 0.0)
    with pytest.raises(ValueError):
        TrapDrive(0.0, 10.0)


# -- Hessian modes ----------------------------------------------------------

def test_isotropic_bowl():
    w = TWO_PI * 1e6
    modes = hessian_modes(energy_map(rotated_quadratic(w, w, 0.0)), BE9, REGION)
    assert modes.omega_HF == pytest.approx(w, rel=1e-9)
    assert modes.omega_LF == pytest.approx(w, rel=1e-9)
    assert abs(abs(modes.theta_HF - modes.theta_LF) - 90.0) < 1e-6


def test_anisotropic_inverse_problem():
    w_hf, w_lf = TWO_PI * 4.8e6, TWO_PI * 4.5e6
    pot = energy_map(rotated_quadratic(w_hf, w_lf, 36.0))
    modes = hessian_modes(pot, BE9, REGION)
    assert modes.omega_HF == pytest.approx(w_hf, rel=1e-3)
    assert modes.omega_LF == pytest.approx(w_lf, rel=1e-3)
    assert modes.theta_HF == pytest.approx(36.0, abs=0.05)
    assert modes.theta_LF == pytest.approx(-54.0, abs=0.05)
    assert np.allclose(modes.minimum_location, (0.0, 0.0), atol=1e-9)


def test_sub_cell_minimum():
    w = TWO_PI * 2e6
    x0, z0 = 0.13e-6, -0.31e-6
    base = rotated_quadratic(w, 0.7 * w, 20.0)
    modes = hessian_modes(energy_map(lambda X, Z: base(X - x0, Z - z0)), BE9, REGION)
    assert np.allclose(modes.minimum_location, (x0, z0), atol=1e-10)


def test_rotation_invariance():
    w1, w2 = TWO_PI * 4.8e6, TWO_PI * 4.5e6
    # anharmonicity on the scale of the electrode distance
    quartic = 0.5 * M * w1 ** 2 / (20e-6) ** 2
    a = hessian_modes(energy_map(rotated_quadratic(w1, w2, 0.0, quartic)), BE9, REGION)
    b = hessian_modes(energy_map(rotated_quadratic(w1, w2, 30.0, quartic)), BE9, REGION)
    assert b.omega_HF == pytest.approx(a.omega_HF, rel=5e-3)
    assert b.omega_LF == pytest.approx(a.omega_LF, rel=5e-3)
    assert b.theta_HF - a.theta_HF == pytest.approx(30.0, abs=0.5)


def test_no_interior_minimum():
    with pytest.raises(NoTrapError):
        hessian_modes(energy_map(lambda X, Z: 1e-20 * X / 1e-6 + 0 * Z), BE9, REGION)


def test_saddle_detected():
    mesh = uniform_mesh(20e-6, 81)
    h = mesh.x[1] - mesh.x[0]
    nodes = np.rint(mesh.z / h).astype(int)
    table = {0: 0.0, 1: 0.2, 2: 0.05}
    fz = np.array([table.get(abs(k), 1.0 + k * k) for k in nodes]) * E_CHARGE
    fx = 0.2 * E_CHARGE * (mesh.x / h) ** 2
    pot = FieldMap(mesh, "energy", fx[:, None] + fz[None, :])
    with pytest.raises(SaddleError):
        hessian_modes(pot, BE9, REGION)


# -- trap depth -------------------------------------------------------------

def test_bowl_depth_is_boundary_minimum():
    w1, w2 = TWO_PI * 3e6, TWO_PI * 2e6
    pot = energy_map(rotated_quadratic(w1, w2, 0.0))
    half = 20e-6
    expect = 0.5 * M * w2 ** 2 * half ** 2 / E_CHARGE
    assert trap_depth(pot, (0.0, 0.0)) == pytest.approx(expect, rel=1e-12)


def double_well(barrier_eV=0.05, a=10e-6):
    eb = barrier_eV * E_CHARGE
    kz = 20 * eb / (20e-6) ** 2

    def fn(X, Z):
        s = X / a + 1.0
        return eb * (3 * s ** 2 - 2 * s ** 3) + 0.5 * kz * Z ** 2

    return fn


def test_double_well_barrier():
    pot = energy_map(double_well())
    modes = hessian_modes(pot, BE9, (-15e-6, -5e-6, -5e-6, 5e-6))
    # the cubic well is asymmetric, so the quadratic fit is biased by a sub-cell amount
    assert modes.minimum_location[0] == pytest.approx(-10e-6, abs=0.1 * 0.5e-6)
    assert trap_depth(pot, modes.minimum_location) == pytest.approx(0.05, rel=1e-9)


@settings(max_examples=15, deadline=None)
@given(shift=st.floats(-1.0, 1.0), scale=st.floats(0.01, 100.0))
def test_depth_shift_and_scale(shift, scale):
    fn = double_well()
    base = trap_depth(energy_map(fn), (-10e-6, 0.0))
    shifted = energy_map(lambda X, Z: scale * fn(X, Z) + shift * E_CHARGE)
    assert trap_depth(shifted, (-10e-6, 0.0)) == pytest.approx(scale * base, rel=1e-9)


def test_depth_minimum_on_boundary():
    with pytest.raises(NoTrapError):
        trap_depth(energy_map(double_well()), (-20e-6, 0.0))


# -- Mathieu parameters ---------------------------------------------------

def test_mathieu_examples():
    assert mathieu_q(0.0, OMEGA_RF) == 0.0
    assert mathieu_q(TWO_PI * 4.7e6, OMEGA_RF) == pytest.approx(0.190, abs=5e-4)
    assert mathieu_a(TWO_PI * 4.8e6, 0.19, OMEGA_RF) == pytest.approx(7.6e-4, abs=0.05e-4)
    assert mathieu_a(TWO_PI * 4.5e6, 0.19, OMEGA_RF) == pytest.approx(-1.5e-3, abs=0.05e-3)
    q = 0.19
    assert mathieu_a(0.5 * OMEGA_RF * q / math.sqrt(2), q, OMEGA_RF) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        mathieu_a(OMEGA_RF, 0.1, OMEGA_RF)


@given(st.floats(0.0, TWO_PI * 20e6))
def test_mathieu_round_trip(w):
    q = mathieu_q(w, OMEGA_RF)
    assert abs(mathieu_a(w, q, OMEGA_RF)) < 1e-12
    assert 0.5 * OMEGA_RF * q / math.sqrt(2) == pytest.approx(w, rel=1e-9, abs=1e-9)


def test_stability_examples():
    origin = stability_check(0.0, 0.0)
    assert origin.stable and origin.margin == 1.0
    assert stability_check(0.85e-3, 0.19).stable
    assert boundary_b1(0.19) == pytest.approx(0.806, abs=1e-3)
    # (0.5, 0.19) sits below b1(0.19), so the unstable example uses a = 0.9
    assert not stability_check(0.9, 0.19).stable
    assert stability_check(0.9, 0.19).margin < 0
    assert not stability_check(-0.1, 0.19).stable
    with pytest.warns(UserWarning):
        res = stability_check(0.0, 0.95)
    assert res.warning


def floquet_stable(a, q):
    """|trace of the one-period monodromy| < 2 for x'' + (a - 2q cos 2t) x = 0."""
    def rhs(t, y):
        return [y[1], -(a - 2 * q * math.cos(2 * t)) * y[0]]
    tr = 0.0
    for k, y0 in enumerate(([1.0, 0.0], [0.0, 1.0])):
        sol = solve_ivp(rhs, (0.0, math.pi), y0, rtol=1e-10, atol=1e-12)
        tr += sol.y[k, -1]
    return abs(tr) < 2.0


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-0.3, 1.0), q=st.floats(0.0, 0.6))
def test_stability_matches_floquet(a, q):
    res = stability_check(a, q)
    if abs(a - boundary_a0(q)) < 0.01 or abs(a - boundary_b1(q)) < 0.01:
        return
    assert res.stable == floquet_stable(a, q)


# -- two-chip trap at the reference drive --------------------------------------------------

@pytest.fixture(scope="module")
def flip_chip_trap():
    drive = TrapDrive(OMEGA_RF, 10.0, {"inner": 1.0, "endcap": 2.0})
    return solve_trap(trap3d_cross_section(), drive, omega_axial=TWO_PI * 0.93e6)


def test_flip_chip_trap_invariants(flip_chip_trap):
    res = flip_chip_trap[0]
    assert res.omega_HF >= res.omega_LF > 0
    assert abs(abs(res.theta_HF - res.theta_LF) - 90.0) < 0.5
    assert res.trap_depth > 0
    assert res.theta_HF not in (0.0, 90.0) and 1.0 < abs(res.theta_HF) < 89.0
    assert res.stable


def test_flip_chip_trap_json(flip_chip_trap):
    d = json.loads(flip_chip_trap[0].to_json())
    assert {"f_HF_Hz", "f_LF_Hz", "theta_HF_deg", "trap_depth_eV", "mathieu"} <= set(d)
    assert d["omega_axial_rad_s"] == pytest.approx(TWO_PI * 0.93e6)


def test_pseudopotential_only_consistency(flip_chip_trap):
    res, rf_map, _ = flip_chip_trap
    pseudo = pseudopotential_map(rf_map.gradient(), BE9, OMEGA_RF)
    rf_only = hessian_modes(pseudo, BE9, (-20e-6, 20e-6, -20e-6, 20e-6))
    for w in (rf_only.omega_HF, rf_only.omega_LF):
        q = mathieu_q(w, OMEGA_RF)
        assert 0.5 * OMEGA_RF * q / math.sqrt(2) == pytest.approx(w, rel=1e-9)
    assert res.mathieu["omega_rf_only_rad_s"] == pytest.approx(
        [rf_only.omega_HF, rf_only.omega_LF], rel=1e-12)
