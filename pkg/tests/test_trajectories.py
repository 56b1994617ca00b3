import json
import math

import numpy as np
import pytest
from scipy import stats

from uqme.bases import bloch_map, decoherence_basis, transform_model, v_model_pm_basis
from uqme.master import assemble, evolve_array
from uqme.models import SIGMA_Z, BathSpec, Model, ModelParams, build_two_level, ground_state
from uqme.observables import observables
from uqme.trajectories import (
    ensemble_average,
    jump,
    no_jump_step,
    sample_trajectory,
    sigma_z_correlation,
    simulate_ensemble,
    stream,
    substep_bound,
)

R2 = math.sqrt(2.0)


@pytest.fixture(scope="module")
def alt(two_level):
    basis = decoherence_basis(two_level)
    return basis, transform_model(two_level, basis)


@pytest.fixture(scope="module")
def pm(v_model):
    basis = v_model_pm_basis()
    return basis, transform_model(v_model, basis)


def dephasing_model(gamma=0.02):
    params = ModelParams(delta=0.0, temperature=1.0, coupling_a=gamma, gamma=gamma)
    zero = np.zeros((2, 2), complex)
    return Model("dephasing", zero, (math.sqrt(gamma) * SIGMA_Z,), params, zero, ("0", "1"))


def check_record(rec, tol=1e-8):
    for rho in rec.states:
        assert abs(np.trace(rho) - 1) <= tol
        assert np.linalg.eigvalsh(rho).min() >= -tol
    times = [t for t, _ in rec.jumps]
    assert all(b > a for a, b in zip(times, times[1:]))
    assert all(rec.grid[0] < t <= rec.grid[-1] + 1e-9 for t in times)


# --- single steps ---------------------------------------------------------


def test_no_jump_ground_state_is_stationary(alt):
    _, moved = alt
    rho = ground_state(moved)
    out, p = no_jump_step(rho, moved, 0.1)
    np.testing.assert_allclose(out, rho, atol=1e-14)
    assert p == pytest.approx(moved.params.gamma * 0.1, rel=1e-12)


def test_no_jump_pure_dephasing():
    model = dephasing_model()
    g, dt = model.params.gamma, 0.05
    plus_x = np.full((2, 2), 0.5, dtype=complex)
    # with L^dag L proportional to I the null-measurement drift leaves the state alone
    out, p = no_jump_step(plus_x, model, dt)
    np.testing.assert_allclose(out, plus_x, atol=1e-15)
    assert p == pytest.approx(g * dt)
    # averaged over the jump/no-jump branches the coherence damps by 1 - 2 gamma dt
    jumped = jump(plus_x, model.collapse_ops[0])
    mixed = (1 - p) * out + p * jumped
    np.testing.assert_allclose(np.diag(mixed), [0.5, 0.5], atol=1e-15)
    assert mixed[0, 1].real == pytest.approx(0.5 * (1 - 2 * g * dt), rel=1e-12)


def test_no_jump_zero_step_and_contract(alt):
    _, moved = alt
    rho = ground_state(moved)
    out, p = no_jump_step(rho, moved, 0.0)
    np.testing.assert_array_equal(out, rho)
    assert p == 0.0
    with pytest.raises(ValueError, match=r"dt <= 0\.5"):
        no_jump_step(rho, moved, 1.0)


def test_jump_examples(pm, alt):
    _, vpm = pm
    plus = np.diag([0, 1, 0]).astype(complex)
    np.testing.assert_allclose(jump(plus, vpm.collapse_ops[0]), np.diag([1, 0, 0]), atol=1e-15)
    with pytest.raises(ValueError, match="zero weight"):
        jump(np.diag([0, 0, 1]).astype(complex), vpm.collapse_ops[0])

    _, moved = alt
    (lt,) = moved.collapse_ops
    rng = np.random.default_rng(0)
    for _ in range(20):
        psi = rng.normal(size=2) + 1j * rng.normal(size=2)
        rho = np.outer(psi, psi.conj()) / np.vdot(psi, psi)
        before, after = bloch_map(rho), bloch_map(jump(rho, lt))
        b, a = np.array([before.sx, before.sy, before.sz]), np.array([after.sx, after.sy, after.sz])
        np.testing.assert_array_equal(np.signbit(a), np.signbit(b * [-1, -1, 1]))
        np.testing.assert_allclose(a, b * [-1, -1, 1], rtol=1e-14, atol=1e-15)
        np.testing.assert_allclose(jump(jump(rho, lt), lt), rho, atol=1e-15)


# --- trajectories ---------------------------------------------------------


def test_streams_are_distinct_and_reproducible():
    a, b = stream(7, 0).random(4), stream(7, 1).random(4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, stream(7, 0).random(4))


def test_alternate_basis_start(two_level, alt):
    basis, moved = alt
    grid = np.linspace(0, 200, 51)
    recs = simulate_ensemble(two_level, basis, ground_state(moved), grid, 20, 3)
    for rec in recs:
        assert rec.states[0][1, 0].real == pytest.approx(-1 / (2 * R2), abs=1e-15)
        check_record(rec)


def test_v_model_minus_population_needs_upward_jump(v_model, pm):
    basis, moved = pm
    grid = np.linspace(0, 200, 401)
    rho0 = np.diag([1, 0, 0]).astype(complex)
    recs = simulate_ensemble(v_model, basis, rho0, grid, 40, 11)
    seen_jump = False
    for rec in recs:
        check_record(rec)
        first_up = min((t for t, c in rec.jumps if c == 1), default=math.inf)
        before = grid < first_up
        np.testing.assert_array_equal(rec.states[before, 2, 2].real, 0.0)
        seen_jump |= math.isfinite(first_up)
        if rec.jumps:
            assert rec.jumps[0][1] == 1  # from |1> only the upward channel can fire
    assert seen_jump


def test_no_collapse_operators_gives_rabi_precession(two_level, alt):
    basis, moved = alt
    closed = two_level.with_operators(two_level.hamiltonian, (), two_level.hamiltonian_delta, "eigen", ("0", "1"))
    d = two_level.params.delta
    rho0 = np.diag([1.0, 0.0]).astype(complex)
    grid = np.linspace(0, 2 * math.pi / d, 9)
    rec = sample_trajectory(closed, basis, rho0, grid, seed=1)
    assert rec.jumps == []
    h = transform_model(closed, basis).hamiltonian
    w, v = np.linalg.eigh(h)
    for t, rho in zip(grid, rec.states):
        u = v @ np.diag(np.exp(-1j * w * t)) @ v.conj().T
        np.testing.assert_allclose(rho, u @ rho0 @ u.conj().T, atol=1e-9)
    s = rec.bloch()
    np.testing.assert_allclose(s[-1], s[0], atol=1e-9)  # one full period at angular frequency Delta


def test_record_export(two_level, alt):
    basis, moved = alt
    rec = sample_trajectory(two_level, basis, ground_state(moved), np.linspace(0, 500, 11), seed=5)
    doc = json.loads(rec.to_json())
    assert doc["seed"] == 5 and "Philox" in doc["generator"]
    assert len(doc["jumps"]) == len(rec.jumps)
    flags = rec.jump_flags()
    assert flags[0] == 0 and flags.sum() <= len(rec.jumps)
    assert flags.sum() >= 1


def test_single_member_ensemble_equals_trajectory(two_level, alt):
    basis, moved = alt
    grid = np.linspace(0, 300, 31)
    rec = sample_trajectory(two_level, basis, ground_state(moved), grid, seed=9)
    summary = ensemble_average(two_level, basis, ground_state(moved), grid, 1, 9)
    np.testing.assert_array_equal(summary.mean_state, rec.states)
    assert summary.count == 1
    with pytest.raises(ValueError):
        ensemble_average(two_level, basis, ground_state(moved), grid, 0, 9)


def test_invalid_initial_state(two_level):
    with pytest.raises(ValueError, match="trace"):
        sample_trajectory(two_level, None, np.eye(2), [0, 1], seed=0)


def test_determinism_across_runs_and_workers(v_model, pm):
    basis, moved = pm
    grid = np.linspace(0, 50, 11)
    rho0 = ground_state(moved)
    runs = [simulate_ensemble(v_model, basis, rho0, grid, 2100, 42, workers=w) for w in (1, 3, 1)]
    for other in runs[1:]:
        for a, b in zip(runs[0], other):
            assert a.jumps == b.jumps
            assert a.states.tobytes() == b.states.tobytes()


def test_substeps_respect_probability_bound(v_model):
    dt = substep_bound(v_model)
    rate = sum(np.linalg.norm(l, 2) ** 2 for l in v_model.collapse_ops)
    assert dt * rate == pytest.approx(1e-3)


# --- statistics -----------------------------------------------------------


def test_waiting_times_are_exponential(two_level, alt):
    basis, moved = alt
    recs = simulate_ensemble(two_level, basis, ground_state(moved), [0.0, 1000.0], 2000, 77)
    waits = []
    for rec in recs:
        times = np.array([0.0] + [t for t, _ in rec.jumps])
        waits.extend(np.diff(times)[:5])
    waits = np.array(waits)
    assert waits.size == 10_000
    res = stats.kstest(waits, "expon", args=(0, 1 / two_level.params.gamma))
    assert res.pvalue > 0.01


def test_coherence_at_five_tau2(two_level, alt):
    basis, moved = alt
    g = two_level.params.gamma
    t = 5 / (2 * g)
    summary = ensemble_average(two_level, basis, ground_state(moved), [0.0, t], 2000, 31)
    expected = -math.exp(-2 * g * t) / (2 * R2)
    assert abs(summary.mean["rho_pm_re"][1] - expected) <= 3 * summary.std_error["rho_pm_re"][1]


def test_standard_error_scaling(v_model, pm):
    basis, moved = pm
    grid = np.linspace(0, 200, 21)
    small = ensemble_average(v_model, basis, ground_state(moved), grid, 100, 5)
    large = ensemble_average(v_model, basis, ground_state(moved), grid, 400, 6)
    ratio = small.std_error["rho_11"][1:].mean() / large.std_error["rho_11"][1:].mean()
    assert ratio == pytest.approx(2.0, rel=0.15)


@pytest.mark.parametrize("which", ["two_level", "v_model"])
def test_unbiasedness_slope(which, request):
    model = request.getfixturevalue(which)
    basis = decoherence_basis(model) if which == "two_level" else v_model_pm_basis()
    liou = assemble(model, basis)
    rho0 = ground_state(liou.model)
    grid = np.linspace(0, 200, 41)
    exact = observables(evolve_array(liou, rho0, grid), liou.model.basis_labels)
    counts = (100, 500, 2000)
    errs = []
    for n in counts:
        s = ensemble_average(model, basis, rho0, grid, n, 1000 + n)
        err = max(np.max(np.abs(s.mean[k] - exact[k])) for k in exact)
        errs.append(err)
        # every conditioned state stays a valid density matrix
        assert np.abs(np.trace(s.mean_state, axis1=1, axis2=2) - 1).max() <= 1e-8
    slope = np.polyfit(np.log(counts), np.log(errs), 1)[0]
    assert -0.65 <= slope <= -0.35, (errs, slope)


@pytest.mark.slow
def test_telegraph_pinning(two_level):
    tau1, tau2 = 80000.0, 25.0
    lags, mean, se = sigma_z_correlation(two_level, [tau2, tau1], 400, 2024)
    assert mean[0] >= 0.9
    assert mean[1] <= math.exp(-1) + 0.1


def test_two_level_ensemble_matches_master(two_level, alt):
    _, moved = alt
    grid = np.linspace(0.0, 200.0, 101)
    rho0 = ground_state(moved)
    ens = ensemble_average(moved, None, rho0, grid, 500, 12345)
    exact = observables(evolve_array(assemble(moved), rho0, grid), moved.basis_labels)
    for name in ("rho_mm", "rho_pp", "rho_pm_re"):
        diff = np.abs(ens.mean[name] - exact[name])
        assert np.all(diff <= 3 * ens.std_error[name] + 1e-12), name


@pytest.mark.slow
def test_autocorrelation_matches_regression_theorem():
    # exact <sigma_z(t) sigma_z(0)> = Tr[sigma_z exp(L t)(sigma_z rho_ss)] with rho_ss = I/2
    import scipy.linalg as sla

    from uqme.numkit import unvectorize, vectorize

    delta, gamma = 0.01, 0.02
    model = build_two_level(delta, BathSpec(coupling_a=0.02, temperature=1.0))
    moved = transform_model(model, decoherence_basis(model))
    gen = assemble(moved).matrix
    lags = np.array([200.0, 400.0, 800.0])
    start = vectorize(SIGMA_Z @ np.eye(2) / 2)
    exact = np.array([np.trace(SIGMA_Z @ unvectorize(sla.expm(gen * t) @ start, 2)).real for t in lags])
    _, mean, se = sigma_z_correlation(model, lags, 2000, 7)
    assert np.all(np.abs(mean - exact) <= 3 * se)
    # the leading-order closed form sits measurably below the exact decay at this Delta/gamma
    assert exact[0] - math.exp(-0.25) > 0.02
