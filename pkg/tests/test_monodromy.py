import cmath
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from isomon.character import invariant_fingerprint
from isomon.errors import MonodromyCheckError, PoleCollision, RadiusUnderflow, ValidationError
from isomon.fuchsian import FuchsianSystem, random_system
from isomon.monodromy import (
    Arc,
    Line,
    Path,
    canonical_loops,
    compute_monodromy,
    lasso,
    riemann_hilbert,
    transport,
    verification_tolerance,
)

from conftest import GENERIC_LAM

# fingerprint of random_system(GENERIC_POINTS, GENERIC_LAM, seed=5), checked
# against an independent scipy transport in test_matches_scipy_transport
FROZEN = {
    "trM1M2": 3.510833841504474 + 0.019886611893549455j,
    "trM1M3": -1.581205802991767 + 0.50902710004745j,
    "trM2M3": 0.8189172985564612 + 1.2302178145666334j,
    "trM1M2M3": -1.6886558512264136 + 0j,
}


def _scipy_transport(system, path):
    t = np.array(system.finite_points)
    res = np.array(system.finite_residues)
    y = np.eye(2, dtype=complex).ravel()
    for seg in path.segments:
        def f(s, v, seg=seg):
            z = seg.point(s)
            a = np.tensordot(1.0 / (z - t), res, axes=1)
            return (a @ v.reshape(2, 2)).ravel() * seg.velocity(s)
        y = solve_ivp(f, (0.0, 1.0), y, method="DOP853", rtol=1e-12, atol=1e-13).y[:, -1]
    return y.reshape(2, 2)


def test_single_pole_matches_matrix_exponential():
    a = np.array([[0.2 + 0.1j, 0.7], [-0.3, -0.2 - 0.1j]])
    rep = compute_monodromy(FuchsianSystem((0, np.inf), [a, -a]))
    assert np.max(np.abs(rep.matrices[0] - expm(2j * math.pi * a))) < 1e-8


def test_diagonal_quarter_gives_i():
    a = np.diag([0.25, -0.25])
    m = transport(FuchsianSystem((0, np.inf), [a, -a]), lasso(-1j, 0, 0.3))
    assert np.max(np.abs(m - np.diag([1j, -1j]))) < 1e-8


def test_close_poles_underflow():
    with pytest.raises(RadiusUnderflow):
        canonical_loops([0, 1e-9])


def test_duplicate_points_rejected():
    with pytest.raises(ValidationError, match="duplicate marked point"):
        canonical_loops([0, 1, 0])


def test_path_through_pole_rejected():
    sysm = FuchsianSystem((0, 1, np.inf), [np.diag([0.1, -0.1])] * 2 + [np.diag([-0.2, 0.2])])
    with pytest.raises(PoleCollision):
        transport(sysm, Path((Line(-1 + 0j, 2 + 0j),)))


def test_loop_words_have_unit_winding():
    loops = canonical_loops([0, 1, 2, -1 + 0.7j, 3j])
    assert np.array_equal(loops.winding_matrix(), np.eye(5, dtype=int))
    for k in range(loops.n):
        path = loops.path(k)
        assert abs(path.start - loops.basepoint) < 1e-14
        assert abs(path.end - loops.basepoint) < 1e-14


def test_homotopic_loops_agree(generic_conn):
    sysm = generic_conn.system
    b = -3j
    small = lasso(b, 1, 0.05)
    # wider circle around the same pole, still enclosing no other pole
    u = (b - 1) / abs(b - 1)
    th = cmath.phase(u)
    tail = Line(b, 1 + 0.4 * u)
    wide = Path((tail, Arc(1, 0.4, th, th + 2 * math.pi), tail.reversed()))
    assert np.max(np.abs(transport(sysm, small) - transport(sysm, wide))) < 1e-8


def test_transport_is_anti_homomorphism(generic_conn):
    sysm = generic_conn.system
    p1 = lasso(-3j, 0, 0.1)
    p2 = lasso(-3j, 2, 0.1)
    lhs = transport(sysm, p1 + p2)
    rhs = transport(sysm, p2) @ transport(sysm, p1)
    assert np.max(np.abs(lhs - rhs)) < 1e-8
    back = transport(sysm, p1.reversed()) @ transport(sysm, p1)
    assert np.max(np.abs(back - np.eye(2))) < 1e-8


def test_product_relation_and_determinants(generic_conn):
    rep = compute_monodromy(generic_conn.system, generic_conn.book)
    prod = np.eye(2)
    for m in rep.matrices:
        prod = prod @ m
    assert np.max(np.abs(prod - np.eye(2))) < 1e-8
    assert np.max(np.abs(np.linalg.det(rep.matrices) - 1)) < 1e-8
    traces = np.trace(rep.matrices, axis1=1, axis2=2)
    assert np.max(np.abs(traces - 2 * np.cos(2 * np.pi * np.array(GENERIC_LAM)))) < 1e-8


def test_trace_checks_on_random_systems():
    rng = np.random.default_rng(11)
    for seed in range(5):
        pts = (0, 1, 2.5 + 0.3j, -1 - 1j)
        lam = rng.uniform(0.05, 0.45, 4) + 1j * rng.uniform(-0.1, 0.1, 4)
        conn = random_system(pts, lam, seed=seed)
        fp = riemann_hilbert(conn)
        assert np.max(np.abs(np.array(fp.singles) - 2 * np.cos(2 * np.pi * lam))) < 1e-6


def test_conjugation_covariance(generic_conn):
    g = np.array([[1.0, 0.5 - 1j], [0.3j, 2.0]])
    gi = np.linalg.inv(g)
    sysm = generic_conn.system
    conj = FuchsianSystem(sysm.points, [g @ a @ gi for a in sysm.residues])
    loops = canonical_loops(sysm.points)
    m1 = compute_monodromy(sysm, loops=loops).matrices
    m2 = compute_monodromy(conj, loops=loops).matrices
    assert np.max(np.abs(m2 - g @ m1 @ gi)) < 1e-7


def test_infinity_last_point():
    lam = [0.1, 0.2, 0.3]
    res = [np.array([[l, 1], [0.5, -l]]) for l in lam]
    sysm = FuchsianSystem((0, 1, 2, np.inf), res + [np.zeros((2, 2))])
    rep = compute_monodromy(sysm)
    prod = rep.matrices[0] @ rep.matrices[1] @ rep.matrices[2] @ rep.matrices[3]
    assert np.max(np.abs(prod - np.eye(2))) < 1e-12
    ainf = sysm.residues[3]
    lam_inf = np.sqrt(-np.linalg.det(ainf))
    assert abs(np.trace(rep.matrices[3]) - 2 * np.cos(2 * np.pi * lam_inf)) < 1e-7


def test_infinity_must_be_last():
    sysm = FuchsianSystem((np.inf, 0, 1), [np.diag([-0.3, 0.3]), np.diag([0.1, -0.1]), np.diag([0.2, -0.2])])
    with pytest.raises(ValidationError):
        compute_monodromy(sysm)


def test_reordering_points_preserves_traces(generic_conn):
    sysm = generic_conn.system
    perm = [2, 0, 3, 1]
    other = FuchsianSystem(tuple(sysm.points[i] for i in perm), sysm.residues[perm])
    t1 = np.trace(compute_monodromy(sysm).matrices, axis1=1, axis2=2)
    t2 = np.trace(compute_monodromy(other).matrices, axis1=1, axis2=2)
    assert np.max(np.abs(t1[perm] - t2)) < 1e-8


def test_parallel_matches_serial(generic_conn):
    a = compute_monodromy(generic_conn.system, jobs=1).matrices
    b = compute_monodromy(generic_conn.system, jobs=4).matrices
    assert np.array_equal(a, b)


def test_matches_scipy_transport(generic_conn):
    sysm = generic_conn.system
    loops = canonical_loops(sysm.points)
    ours = [transport(sysm, las) for las in loops.lassos]
    ref = [_scipy_transport(sysm, las) for las in loops.lassos]
    assert max(np.max(np.abs(x - y)) for x, y in zip(ours, ref)) < 1e-8


def test_frozen_fingerprint(generic_conn):
    fp = dict(invariant_fingerprint(compute_monodromy(generic_conn.system).rep_tuple()).entries())
    for key, value in FROZEN.items():
        assert abs(fp[key] - value) < 1e-7, key
    for k, lam in enumerate(GENERIC_LAM, start=1):
        assert abs(fp[f"a{k}"] - 2 * math.cos(2 * math.pi * lam)) < 1e-7


def test_wrong_exponents_fail_verification(generic_conn):
    book = generic_conn.book.__class__((0.12,) + tuple(GENERIC_LAM[1:]), generic_conn.book.mu,
                                       generic_conn.book.deg_l)
    with pytest.raises(MonodromyCheckError):
        compute_monodromy(generic_conn.system, book)


def test_tolerance_environment(monkeypatch):
    monkeypatch.setenv("ISOMON_TOL", "1e-4")
    assert verification_tolerance() == 1e-4
    monkeypatch.delenv("ISOMON_TOL")
    assert verification_tolerance() == 1e-6
