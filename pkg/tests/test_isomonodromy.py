import numpy as np
import pytest

from isomon.errors import PoleCollision, StepUnderflow, ValidationError
from isomon.fuchsian import random_system
from isomon.isomonodromy import (
    FlowPath,
    SchlesingerState,
    _rhs,
    apparent_numerator,
    apparent_roots,
    apparent_singularity_trajectory,
    eigenvalue_deviation,
    fingerprint_series,
    integrate_flow,
    schlesinger_rhs,
    shared_basepoint,
    verify_isomonodromy,
)

N1 = np.array([[0, 1], [0, 0]])
N2 = np.array([[0, 0], [1, 0]])


def generic_state(seed=3):
    conn = random_system((0, 1, 2, np.inf), (0.11, 0.23, 0.37, 0.41), seed=seed)
    return SchlesingerState.from_system(conn.system), conn.book


def nilpotent_state():
    return SchlesingerState((0, 1, 2), [N1, N2, -N1 - N2])


# right-hand side

def test_rhs_nilpotent_example():
    d = schlesinger_rhs(nilpotent_state(), 2)
    # [A1, A3] / (t1 - t3) with A3 moving
    assert np.allclose(d[0], np.diag([0.5, -0.5]))
    assert np.allclose(d.sum(axis=0), 0)


def test_rhs_commuting_residues_vanish():
    st = SchlesingerState((0, 1, 2.5), [np.diag([0.1, -0.1]), np.diag([0.3, -0.3]), np.diag([0.2, -0.2])])
    for k in range(3):
        assert np.array_equal(schlesinger_rhs(st, k), np.zeros((3, 2, 2)))


def test_rhs_only_moving_pole_nonzero():
    st = SchlesingerState((0, 1, 2), [np.zeros((2, 2)), np.zeros((2, 2)), N1 + 0.3 * N2])
    assert np.array_equal(schlesinger_rhs(st, 2), np.zeros((3, 2, 2)))


def test_rhs_velocity_superposition():
    st, _ = generic_state()
    v = np.array([0.3, -1.0 + 0.5j, 2.0])
    combined = schlesinger_rhs(st, v)
    parts = sum(v[k] * schlesinger_rhs(st, k) for k in range(3))
    assert np.allclose(combined, parts)
    with pytest.raises(ValidationError):
        schlesinger_rhs(st, 3)


def test_opposite_sign_breaks_isomonodromy():
    # control: flipping the sign of the right-hand side no longer preserves traces
    st, book = generic_state()
    path = FlowPath.move(st.times, 2, 2.5)
    from isomon.integrate import integrate

    v = path.velocity(0.5)
    y = integrate(lambda s, y: -_rhs(path.at(s), y.reshape(3, 2, 2), v).reshape(-1),
                  st.residues.reshape(-1), 0.0, 1.0, 1e-10)
    flipped = SchlesingerState(path.waypoints[-1], y.reshape(3, 2, 2), True)
    assert verify_isomonodromy(st, flipped).drift > 1e-3


# flows

def test_commuting_data_is_fixed():
    a = [np.diag([0.1, -0.1]), np.diag([0.3, -0.3]), np.diag([-0.4, 0.4])]
    st = SchlesingerState((0, 1, 2), a)
    res = integrate_flow(st, FlowPath.move(st.times, 1, 0.5 + 1j))
    assert np.max(np.abs(res.final.residues - np.array(a))) < 1e-12


def test_generic_flow_is_isomonodromic():
    st, book = generic_state()
    res = integrate_flow(st, FlowPath.move(st.times, 2, 2.5), tol=1e-10)
    assert res.max_eig_drift < 1e-8
    assert np.all(np.diff(res.s) > 0) and res.s[0] == 0 and res.s[-1] == 1
    assert np.max(np.abs(res.final.residues.sum(axis=0) - st.residues.sum(axis=0))) < 1e-8
    report = verify_isomonodromy(st, res.final, book=book)
    assert report.drift < 1e-6
    names = [e[0] for e in report.entries]
    assert {"a1", "a2", "a3", "a4", "trM1M2", "trM1M3", "trM2M3"} <= set(names)


def test_frozen_residue_control_drifts():
    st, _ = generic_state()
    frozen = SchlesingerState((0, 1, 2.5), st.residues, True)
    assert verify_isomonodromy(st, frozen).drift > 1e-3


def test_zero_length_flow():
    st, _ = generic_state()
    res = integrate_flow(st, FlowPath(np.array([st.times, st.times])))
    assert np.array_equal(res.final.residues, st.residues)
    assert verify_isomonodromy(st, res.final).drift < 1e-9


def test_forward_then_reverse_recovers_start():
    st, _ = generic_state(seed=8)
    path = FlowPath(np.array([st.times, [0, 1, 2 + 0.5j], [0, 1 + 0.3j, 2.4 + 0.5j]]))
    fwd = integrate_flow(st, path, tol=1e-10)
    back = integrate_flow(fwd.final, path.reversed(), tol=1e-10)
    assert np.max(np.abs(back.final.residues - st.residues)) < 1e-7
    assert np.allclose(back.final.times, st.times)


def test_separate_loops_agree_on_small_flow():
    st, _ = generic_state()
    res = integrate_flow(st, FlowPath.move(st.times, 2, 2.2))
    assert verify_isomonodromy(st, res.final, loops="separate").drift < 1e-6


def test_fingerprint_series_stays_flat():
    st, _ = generic_state()
    res = integrate_flow(st, FlowPath.move(st.times, 2, 2.5), max_samples=5)
    drift = fingerprint_series(res)
    assert len(drift) == len(res.s) <= 5
    assert np.nanmax(drift) < 1e-6


def test_collision_reported_with_parameter():
    st, _ = generic_state()
    with pytest.raises(PoleCollision) as info:
        integrate_flow(st, FlowPath.move(st.times, 2, 0.5))
    # pole 2 moving from 2 to 0.5 meets pole 1 at s = 2/3
    assert info.value.s == pytest.approx(2 / 3, abs=1e-6)
    assert set(info.value.pair) == {1, 2}


def test_bad_paths_rejected():
    st, _ = generic_state()
    with pytest.raises(ValidationError):
        integrate_flow(st, FlowPath(np.array([[0, 1, 3], [0, 1, 4]])))
    with pytest.raises(ValidationError):
        FlowPath(np.array([[0, 1, 2]]))
    with pytest.raises(ValidationError):
        SchlesingerState((0, 0, 1), np.zeros((3, 2, 2)))


def test_flow_path_geometry():
    p = FlowPath(np.array([[0, 1], [0, 2], [1j, 2]]))
    assert p.legs == 2
    assert np.allclose(p.at(0.25), [0, 1.5])
    assert np.allclose(p.at(0.75), [0.5j, 2])
    assert np.allclose(p.velocity(0.25), [0, 2])
    assert np.allclose(p.reversed().at(0.0), [1j, 2])


def test_shared_basepoint_below_all():
    a, _ = generic_state()
    b = SchlesingerState((0, 1, 5j), a.residues, True)
    bp = shared_basepoint(a, b)
    assert all(bp.imag < t.imag for t in np.concatenate([a.times, b.times]))


def test_eigenvalue_deviation():
    a = np.array([np.diag([0.1, -0.1])])
    assert eigenvalue_deviation(a, a[:, ::-1, ::-1]) == 0
    assert eigenvalue_deviation(a, a * 1.5) == pytest.approx(0.05)


# apparent singularity

def test_apparent_numerator_example():
    poly = apparent_numerator((0, 1, 2), (1, 1, -2))
    # (z-1)(z-2) + z(z-2) - 2z(z-1) = -3z + 2
    assert np.allclose(poly, [0, -3, 2])
    roots, ok = apparent_roots((0, 1, 2), (1, 1, -2))
    assert ok and np.allclose(roots, [2 / 3])


def test_apparent_quadratic_roots():
    roots, ok = apparent_roots((0, 1, 2), (1, 2, 3))
    assert ok and len(roots) == 2
    for z in roots:
        assert abs(1 / z + 2 / (z - 1) + 3 / (z - 2)) < 1e-9


def test_apparent_diagonal_flagged():
    a = [np.diag([0.1, -0.1]), np.diag([0.3, -0.3]), np.diag([-0.4, 0.4])]
    st = SchlesingerState((0, 1, 2), a)
    res = integrate_flow(st, FlowPath.move(st.times, 2, 3))
    traj = apparent_singularity_trajectory(res)
    assert traj and not any(p.defined for p in traj)
    assert np.isnan(traj[0].y)


def test_apparent_trajectory_continuity():
    st, _ = generic_state()
    res = integrate_flow(st, FlowPath.move(st.times, 2, 2.5))
    traj = apparent_singularity_trajectory(res)
    ys = np.array([p.y for p in traj])
    ds = np.diff(res.s)
    assert all(p.defined for p in traj)
    assert np.max(np.abs(np.diff(ys)) / ds) < 50


def test_underflow_carries_parameter(monkeypatch):
    import isomon.isomonodromy as iso

    def fail(fun, y, s0, s1, tol, **kw):
        raise StepUnderflow("step too small", s=s0 + 0.3 * (s1 - s0))

    monkeypatch.setattr(iso, "integrate", fail)
    st, _ = generic_state()
    path = FlowPath(np.array([st.times, [0, 1, 2.5], [0, 1, 3]]))
    with pytest.raises(StepUnderflow) as info:
        integrate_flow(st, path)
    assert info.value.s == pytest.approx(0.15)
    assert "0.15" in str(info.value)
