import io
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_dpd_system
from svdpd.core import PhasePoint
from svdpd.diagnostics import kinetic_temperature, potential_energy, total_energy
from svdpd.dpd import (DpdParams, DpdSystem, accumulate_forces, brute_force_pairs, build_cell_grid,
                       dpd_step, init_system, minimum_image, neighbor_pairs, pair_forces,
                       pair_geometry, run_dpd, weight_d, weight_r, wrap_positions, write_xyz_frame)
from svdpd.errors import ParameterError, SingularConfigurationError
from svdpd.integrators import SchemeSpec, StepperState
from svdpd.noise import NoiseSource, draw_noise

VARIANTS = [SchemeSpec.sv_ab1(), SchemeSpec.gcc(0.5), SchemeSpec.gw(0.65), SchemeSpec.sv_ab4(0.5, 0.5, 0.6),
            SchemeSpec.sv_ab5(0.3, 0.5), SchemeSpec.sv_ab6(0.4, 0.5, 0.3, 0.4), SchemeSpec.sv_ba()]


def two_particles(qi, qj, pi=(0, 0, 0), pj=(0, 0, 0), **kw):
    params = DpdParams(n_particles=2, box=(10.0, 10.0, 10.0), **kw)
    return DpdSystem(params, PhasePoint(np.array([qi, qj], float), np.array([pi, pj], float)))


# --- parameters -------------------------------------------------------------

def test_default_parameters_are_the_desk_setup():
    p = DpdParams()
    assert (p.n_particles, p.box, p.a, p.gamma, p.sigma, p.q_c, p.kT_target) == \
        (375, (5.0, 5.0, 5.0), 25.0, 4.5, 3.0, 1.0, 1.0)
    assert DpdParams.at_density(3000).box == (10.0, 10.0, 10.0)


@pytest.mark.parametrize("kw", [dict(n_particles=0), dict(box=(1.5, 5, 5)), dict(mass=0.0),
                                dict(q_c=-1.0), dict(gamma=-1.0), dict(kT_target=0.0)])
def test_invalid_parameters(kw):
    with pytest.raises(ParameterError):
        DpdParams(**kw)


def test_fluctuation_dissipation_mismatch_only_warns():
    with pytest.warns(UserWarning, match="sigma"):
        DpdParams(sigma=2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        DpdParams(gamma=2.0, sigma=2.0, kT_target=1.0)


# --- weights and geometry ---------------------------------------------------

def test_weights():
    assert weight_r(1.0) == 0.0 and weight_r(0.0) == 1.0
    assert weight_r(0.25) == 0.75 and weight_d(0.25) == 0.5625
    assert np.array_equal(weight_r([0.5, 1.5], q_c=2.0), [0.75, 0.25])
    assert weight_d(3.0) == 0.0


@pytest.mark.parametrize("delta,expected", [(9.5, -0.5), (0.3, 0.3), (-9.8, 0.2), (5.0, -5.0), (-5.0, -5.0)])
def test_minimum_image_examples(delta, expected):
    out = minimum_image(np.array([delta, 0.0, 0.0]), np.array([10.0, 10.0, 10.0]))
    assert out[0] == pytest.approx(expected, abs=1e-12)


@given(d=st.floats(-19.9, 19.9), box=st.floats(2.0, 10.0))
def test_minimum_image_range(d, box):
    out = float(minimum_image(np.array([d]), np.array([box]))[0])
    assert -box / 2 <= out < box / 2
    k = (d - out) / box
    assert abs(k - round(k)) < 1e-9


def test_wrap_positions_into_box():
    box = np.array([5.0, 5.0, 5.0])
    q = np.array([[-1e-17, 5.0, 12.3], [-7.5, 4.999999, 0.0]])
    w = wrap_positions(q, box)
    assert np.all((w >= 0) & (w < box))


# --- pair forces ------------------------------------------------------------

def test_conservative_pair_force_hand_value():
    s = two_particles((0, 0, 0), (0.5, 0, 0))
    f_c, f_d, kick = pair_forces(s, 0, 1)
    assert np.allclose(f_c, [-12.5, 0, 0], atol=1e-14)
    assert not f_d.any() and not kick.any()


def test_dissipative_pair_force_hand_value():
    s = two_particles((0, 0, 0), (0.5, 0, 0), pi=(1, 0, 0), pj=(-1, 0, 0))
    _, f_d, _ = pair_forces(s, 0, 1)
    assert np.allclose(f_d, [-2.25, 0, 0], atol=1e-14)


def test_random_impulse_hand_value_and_reaction():
    s = two_particles((0, 0, 0), (0.5, 0, 0), pi=(0.3, 1, 0), pj=(0, -2, 0.4))
    fi = pair_forces(s, 0, 1, dw=0.1)
    fj = pair_forces(s, 1, 0, dw=0.1)
    assert np.allclose(fi[2], [-0.15, 0, 0], atol=1e-15)
    for a, b in zip(fi, fj):
        assert np.array_equal(a, -b)


def test_perpendicular_velocity_has_no_friction():
    s = two_particles((0, 0, 0), (0.5, 0, 0), pi=(0, 1, 0), pj=(0, -1, 3))
    assert not pair_forces(s, 0, 1)[1].any()


def test_pair_beyond_cutoff_and_through_boundary():
    far = two_particles((0, 0, 0), (1.0, 0, 0))
    assert all(not f.any() for f in pair_forces(far, 0, 1, dw=1.0))
    wrapped = two_particles((0.1, 0, 0), (9.6, 0, 0))
    assert np.allclose(pair_forces(wrapped, 0, 1)[0], [25 * 0.5, 0, 0], atol=1e-12)


def test_coincident_particles_are_a_singular_configuration():
    s = two_particles((1, 1, 1), (1, 1, 1))
    with pytest.raises(SingularConfigurationError) as info:
        pair_forces(s, 0, 1)
    assert info.value.pair == (0, 1)
    with pytest.raises(SingularConfigurationError):
        pair_geometry(s.state.q, s.params.box_array, 1.0, step=7)
    with pytest.raises(ParameterError):
        pair_forces(s, 1, 1)


# --- neighbour search and accumulated forces ----------------------------------

@given(n=st.integers(2, 120), bx=st.floats(2.0, 6.0), by=st.floats(2.0, 6.0), bz=st.floats(2.0, 6.0),
       seed=st.integers(0, 2**32 - 1))
@settings(max_examples=80, deadline=None)
def test_cell_list_enumerates_the_same_pairs_as_brute_force(n, bx, by, bz, seed):
    box = np.array([bx, by, bz])
    q = np.random.default_rng(seed).uniform(size=(n, 3)) * box
    q = wrap_positions(q, box)
    grid = build_cell_grid(q, box, 1.0)
    assert sorted(grid.order.tolist()) == list(range(n))
    assert np.all(grid.cell_size >= 1.0)
    assert sum(len(v) for v in grid.occupancy.values()) == n
    ci, cj = neighbor_pairs(grid, q, box, 1.0)
    bi, bj = brute_force_pairs(q, box, 1.0)
    assert np.array_equal(ci, bi) and np.array_equal(cj, bj)
    assert np.all(ci < cj)


def loop_forces(system, dw_of_pair):
    """Independent O(N^2) double loop over pair_forces."""
    n = system.n
    fc, fd, kick = np.zeros((n, 3)), np.zeros((n, 3)), np.zeros((n, 3))
    for i in range(n):
        for j in range(i + 1, n):
            c, d, k = pair_forces(system, i, j, dw=dw_of_pair.get((i, j), 0.0))
            fc[i] += c; fc[j] -= c
            fd[i] += d; fd[j] -= d
            kick[i] += k; kick[j] -= k
    return fc, fd, kick


def test_accumulated_forces_match_double_loop():
    system = make_dpd_system(50, 2.6, seed=3)
    geo = pair_geometry(system.state.q, system.params.box_array, 1.0)
    dw = draw_noise(1, 0, (geo.i, geo.j), 0.01).full
    ref = loop_forces(system, {(int(a), int(b)): w for a, b, w in zip(geo.i, geo.j, dw)})
    got = accumulate_forces(system, dw=dw)
    for a, b in zip(got, ref):
        assert np.max(np.abs(a - b)) <= 1e-12
    for f in got:
        assert np.max(np.abs(f.sum(axis=0))) < 1e-12


def test_two_isolated_particles_feel_equal_and_opposite_forces():
    s = two_particles((2, 2, 2), (2.3, 2.4, 2.0), pi=(1, 0, 0), pj=(0, 1, 0))
    for f in accumulate_forces(s, dw=np.array([0.3])):
        assert np.array_equal(f[0], -f[1])


def test_no_pairs_within_cutoff_gives_zero_forces():
    params = DpdParams(n_particles=8, box=(4.0, 4.0, 4.0))
    grid = np.array([[x, y, z] for x in (0.5, 2.5) for y in (0.5, 2.5) for z in (0.5, 2.5)])
    s = DpdSystem(params, PhasePoint(grid, np.ones((8, 3))))
    for f in accumulate_forces(s, dw=np.zeros(0)):
        assert not f.any()


def test_translation_invariance():
    system = make_dpd_system(150, 4.0, seed=11)
    box = system.params.box_array
    shifted_q = wrap_positions(system.state.q + np.array([1.37, -2.2, 0.61]), box)
    shifted = DpdSystem(system.params, PhasePoint(shifted_q, system.state.p))
    for a, b in zip(accumulate_forces(system), accumulate_forces(shifted)):
        assert np.max(np.abs(a - b)) <= 1e-12


def test_cutoff_locality():
    system = make_dpd_system(100, 4.0, seed=8)
    q = system.state.q
    box = system.params.box_array
    dist0 = np.linalg.norm(minimum_image(q - q[0], box), axis=1)
    k = int(np.flatnonzero(dist0 > 1.6)[0])
    moved = q.copy()
    moved[k] = wrap_positions(q[k] + np.array([0.2, -0.1, 0.15]), box)
    assert np.linalg.norm(minimum_image(moved[k] - q[0], box)) > 1.0
    other = DpdSystem(system.params, PhasePoint(moved, system.state.p))
    for a, b in zip(accumulate_forces(system), accumulate_forces(other)):
        assert np.array_equal(a[0], b[0])


@pytest.mark.parametrize("seed", range(10))
def test_conservative_force_is_minus_potential_gradient(seed):
    system = make_dpd_system(10, 2.0, seed=seed)
    fc = accumulate_forces(system)[0]
    h = 1e-6
    grad = np.zeros_like(fc)
    for idx in np.ndindex(fc.shape):
        for sign in (1, -1):
            q = system.state.q.copy()
            q[idx] += sign * h
            grad[idx] += sign * potential_energy(DpdSystem(system.params, PhasePoint(q, system.state.p)))
    grad /= 2 * h
    assert np.max(np.abs(-grad - fc)) <= 1e-5 * max(1.0, np.max(np.abs(fc)))


def test_potential_energy_hand_values():
    assert potential_energy(two_particles((0, 0, 0), (0.5, 0, 0))) == pytest.approx(3.125)
    assert potential_energy(two_particles((0, 0, 0), (1.0, 0, 0))) == 0.0


# --- initialisation ------------------------------------------------------------

def test_init_system_properties():
    params = DpdParams()
    s = init_system(params, 5)
    assert np.max(np.abs(s.state.p.sum(axis=0))) <= 1e-12 * params.n_particles
    assert kinetic_temperature(s) == pytest.approx(1.0, abs=1e-12)
    assert np.all((s.state.q >= 0) & (s.state.q < params.box_array))
    again = init_system(params, 5)
    assert np.array_equal(s.state.q, again.state.q) and np.array_equal(s.state.p, again.state.p)
    assert not np.array_equal(s.state.q, init_system(params, 6).state.q)


def test_init_system_hits_other_targets():
    params = DpdParams(kT_target=2.0, gamma=1.0, sigma=2.0, mass=1.0)
    assert kinetic_temperature(init_system(params, 1)) == pytest.approx(2.0, abs=1e-12)


# --- stepping ------------------------------------------------------------------

@pytest.mark.parametrize("spec", VARIANTS, ids=lambda s: s.label)
def test_every_step_conserves_momentum_and_wraps(spec):
    params = DpdParams.at_density(80)
    system = init_system(params, 2)
    stepper, noise = None, NoiseSource(3, spec.noise_mode)
    start = system.state.p.sum(axis=0)
    prev = start
    for _ in range(30):
        system, stepper = dpd_step(system, spec, 0.02, stepper, noise)
        total = system.state.p.sum(axis=0)
        assert np.max(np.abs(total - prev)) <= 1e-10 * params.n_particles
        assert np.all((system.state.q >= 0) & (system.state.q < params.box_array))
        prev = total
    assert system.step_index == 30


def test_reduced_variant_matches_dedicated_variant_after_100_steps():
    params = DpdParams.at_density(50)
    a = b = init_system(params, 4)
    sa = sb = None
    noise = NoiseSource(9)
    for _ in range(100):
        a, sa = dpd_step(a, SchemeSpec.sv_ab4(0.0, 1.0, 0.65), 0.01, sa, noise)
        b, sb = dpd_step(b, SchemeSpec.gw(0.65), 0.01, sb, noise)
    assert np.array_equal(a.state.q, b.state.q) and np.array_equal(a.state.p, b.state.p)


def test_dpd_step_rejects_non_positive_dt():
    with pytest.raises(ParameterError):
        dpd_step(init_system(DpdParams.at_density(20, 2.0), 0), SchemeSpec.gw(0.5), 0.0)


@pytest.mark.filterwarnings("ignore:sigma")
def test_conservative_dynamics_energy_error_shrinks_with_step():
    params = DpdParams.at_density(60, gamma=0.0, sigma=0.0)
    e0 = total_energy(init_system(params, 3))

    def worst(dt):
        energies = []
        run_dpd(params, SchemeSpec.gw(0.65), dt, 10.0, seed=3,
                observe=lambda s: energies.append(total_energy(s)))
        return np.max(np.abs(np.array(energies) - e0)) / e0

    coarse, fine = worst(0.01), worst(0.005)
    assert coarse < 2e-3
    assert fine < coarse / 3


def test_run_dpd_series_and_snapshots():
    params = DpdParams.at_density(30, 2.0)
    buf = io.StringIO()
    run = run_dpd(params, SchemeSpec.gcc(0.5), 0.01, 0.5, seed=1, snapshot_interval=10, xyz=buf)
    assert run.n_steps == 50
    assert np.allclose(run.temperature.times, 0.01 * np.arange(1, 51))
    lines = buf.getvalue().splitlines()
    assert len(lines) == 6 * (30 + 2)
    assert lines[0] == "30" and lines[1].startswith("step=0 time=0")
    assert lines[32 + 1].startswith("step=10 time=0.1")
    assert len(lines[2].split()) == 4


def test_write_xyz_frame_layout():
    s = two_particles((0.1, 0.2, 0.3), (1, 2, 3))
    buf = io.StringIO()
    write_xyz_frame(buf, s, 1.5)
    assert buf.getvalue().splitlines() == [
        "2", "step=0 time=1.5", "A 0.1000000000 0.2000000000 0.3000000000",
        "A 1.0000000000 2.0000000000 3.0000000000"]


def test_state_shape_must_match_particle_count():
    with pytest.raises(ParameterError):
        DpdSystem(DpdParams(n_particles=3), PhasePoint(np.zeros((2, 3)), np.zeros((2, 3))))
