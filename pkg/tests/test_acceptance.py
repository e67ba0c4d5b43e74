"""Acceptance checks, one per criterion.

Run ``pytest tests/test_acceptance.py -s`` (or execute this file directly)
to see one PASS/FAIL line per criterion.
"""
import itertools
import time
from fractions import Fraction

import numpy as np
from scipy.linalg import expm

from isomon.character import (
    find_fricke_singular_points,
    fiber_residual,
    fricke_eval,
    invariant_fingerprint,
    mu_map,
    multiaffine_check,
    sample_fiber_point,
)
from isomon.fuchsian import (
    FuchsianSystem,
    ParabolicConnection,
    Verdict,
    Weight,
    check_stability,
    classify_lambda,
    random_system,
)
from isomon.isomonodromy import FlowPath, SchlesingerState, integrate_flow, verify_isomonodromy
from isomon.monodromy import canonical_loops, compute_monodromy
from isomon.transformations import (
    ElmMinus,
    ElmPlus,
    Tensor,
    bl_generator,
    elm_bookkeeping,
    schlesinger_transform,
    weyl_generator,
)


def report(number, title, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})")
    return ok


def random_sl2(rng, k):
    m = rng.standard_normal((k, 2, 2)) + 1j * rng.standard_normal((k, 2, 2))
    return m / np.sqrt(np.linalg.det(m))[:, None, None]


def generic_systems(count=20):
    rng = np.random.default_rng(2024)
    out = []
    while len(out) < count:
        lam = rng.uniform(0.05, 0.45, 4)
        if not classify_lambda(lam).is_generic:
            continue
        t = 2.0 + rng.uniform(-0.5, 0.5) + 1j * rng.uniform(-0.5, 0.5)
        out.append(random_system((0, 1, t, np.inf), lam, seed=int(rng.integers(2**31))))
    return out


_MONODROMY_CACHE = {}


def monodromy_of_generic_systems():
    if "reps" not in _MONODROMY_CACHE:
        start = time.perf_counter()
        reps = [(c, compute_monodromy(c.system, tol=1e-10, verify_tol=np.inf)) for c in generic_systems()]
        _MONODROMY_CACHE["reps"] = reps
        _MONODROMY_CACHE["seconds"] = time.perf_counter() - start
    return _MONODROMY_CACHE["reps"], _MONODROMY_CACHE["seconds"]


# ---------------------------------------------------------------------------

def test_criterion_1_fricke_identity():
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        fp = invariant_fingerprint(random_sl2(rng, 3))
        x, a = fp.fricke_x, fp.singles
        rel = abs(fricke_eval(x, a)) / (1 + np.linalg.norm(x) + np.linalg.norm(a))
        worst = max(worst, rel)
    dt = time.perf_counter() - start
    assert report(1, "Fricke identity", worst < 1e-9 and dt < 1.0,
                  f"max relative residual {worst:.2e}, {dt:.2f} s")


def test_criterion_2_local_exponents():
    reps, dt = monodromy_of_generic_systems()
    worst = 0.0
    for conn, rep in reps:
        traces = np.trace(rep.matrices, axis1=1, axis2=2)
        worst = max(worst, float(np.max(np.abs(traces - mu_map(conn.book.lam)))))
    assert report(2, "tr M_i = 2cos(2 pi lam_i)", worst < 1e-6 and dt < 30.0,
                  f"20 systems, max error {worst:.2e}, {dt:.1f} s")


def test_criterion_3_monodromy_structure():
    reps, _ = monodromy_of_generic_systems()
    prod_err = det_err = 0.0
    for _, rep in reps:
        prod = np.linalg.multi_dot(list(rep.matrices))
        prod_err = max(prod_err, float(np.max(np.abs(prod - np.eye(2)))))
        det_err = max(det_err, float(np.max(np.abs(np.linalg.det(rep.matrices) - 1))))
    rng = np.random.default_rng(3)
    exp_err = 0.0
    for _ in range(5):
        lam = rng.uniform(-0.45, 0.45, 3) + 1j * rng.uniform(-0.1, 0.1, 3)
        res = [np.diag([l, -l]) for l in lam] + [np.zeros((2, 2))]
        sysm = FuchsianSystem((0, 1, 2.5 + 0.5j, np.inf), res)
        rep = compute_monodromy(sysm, tol=1e-10)
        for k in range(3):
            exp_err = max(exp_err, float(np.max(np.abs(rep.matrices[k] - expm(2j * np.pi * sysm.residues[k])))))
    ok = prod_err < 1e-6 and det_err < 1e-8 and exp_err < 1e-8
    assert report(3, "monodromy structure", ok,
                  f"|prod - I| {prod_err:.2e}, |det - 1| {det_err:.2e}, diagonal vs expm {exp_err:.2e}")


def test_criterion_4_isomonodromy():
    start = time.perf_counter()
    conn = random_system((0, 1, 2, np.inf), (0.11, 0.23, 0.37, 0.41), seed=3)
    state = SchlesingerState.from_system(conn.system)
    res = integrate_flow(state, FlowPath.move(state.times, 2, 2.5), tol=1e-10)
    rep = verify_isomonodromy(state, res.final, tol=1e-10)
    names = {"a1", "a2", "a3", "a4", "trM2M3", "trM1M3", "trM1M2"}
    drift = max(abs(after - before) for name, before, after in rep.entries if name in names)
    frozen = SchlesingerState(res.final.times, state.residues, True)
    control = verify_isomonodromy(state, frozen, tol=1e-10).drift
    dt = time.perf_counter() - start
    ok = drift < 1e-6 and res.max_eig_drift < 1e-8 and control > 1e-3 and dt < 60.0
    assert report(4, "isomonodromic flow", ok,
                  f"trace drift {drift:.2e}, eigenvalue drift {res.max_eig_drift:.2e}, "
                  f"frozen control {control:.2e}, {dt:.1f} s")


def test_criterion_5_group_relations():
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    lams = [tuple(Fraction(int(rng.integers(-60, 61)), int(rng.integers(1, 13))) for _ in range(5))
            for _ in range(50)]
    s = [weyl_generator(k) for k in range(5)]
    words = [s[k] @ s[k] for k in range(5)]
    words += [(s[0] @ s[k]) ** 3 for k in range(1, 5)]
    words += [(s[j] @ s[k]) ** 2 for j in range(1, 5) for k in range(1, 5) if j != k]
    failures = sum(w(lam[:4]) != lam[:4] for w in words for lam in lams)
    for n in (4, 5):
        for i, j in itertools.combinations(range(1, n + 1), 2):
            tm, ri, rj = (bl_generator(g, n) for g in (f"t-{i},{j}", f"r{i}", f"r{j}"))
            tp1, tp2 = bl_generator(f"t+{i}", n), bl_generator(f"t+{i},{j}", n)
            lhs1, lhs2 = (tm @ ri) ** 2, tm @ ri @ rj
            for lam in lams:
                lam = lam[:n]
                failures += lhs1(lam) != tp1(lam)
                failures += lhs2(lam) != tp2(lam)
    dt = time.perf_counter() - start
    assert report(5, "Coxeter and BL relations", failures == 0 and dt < 1.0,
                  f"{failures} failures over 50 rational points, {dt:.2f} s")


def test_criterion_6_walls_and_singular_points():
    start = time.perf_counter()
    q = Fraction(1, 4)
    a = mu_map([q] * 4)
    pts = find_fricke_singular_points(a)
    expected = [(-2, -2, -2), (-2, 2, 2), (2, -2, 2), (2, 2, -2)]
    found = all(any(np.max(np.abs(p - np.array(e))) < 1e-8 for p in pts) for e in expected)
    subst = max((abs(fricke_eval(e, a)) for e in expected), default=0.0)
    reducible = bool(classify_lambda([q] * 4).reducible)
    generic = find_fricke_singular_points(mu_map([0.11, 0.23, 0.37, 0.41]))
    dt = time.perf_counter() - start
    ok = reducible and len(pts) == 4 and found and subst < 1e-8 and not generic and dt < 5.0
    assert report(6, "walls and singular points", ok,
                  f"{len(pts)} singular points at a=0, {len(generic)} for generic lambda, {dt:.2f} s")


def test_criterion_7_multiaffine():
    rng = np.random.default_rng(7)
    worst_rel, control = 0.0, np.inf
    for n in (4, 5):
        for _ in range(20):
            mats = random_sl2(rng, n - 1)
            norms = np.linalg.norm(mats, axis=(1, 2))
            for i in range(1, n):
                scale = np.prod(norms) / norms[i - 1] * (norms[i - 1] + 1.0)
                worst_rel = max(worst_rel, multiaffine_check(mats, i) / scale)
                control = min(control, multiaffine_check(mats, i, power=2))
    ok = worst_rel < 1e-12 and control > 1e-6
    assert report(7, "multidegree (1,...,1)", ok,
                  f"max second difference / scale {worst_rel:.2e}, min quadratic control {control:.2e}")


def test_criterion_8_fiber_sampling():
    rng = np.random.default_rng(8)
    vectors = [np.zeros(4), np.full(4, 2.0)]
    while len(vectors) < 50:
        n = (4, 5, 6)[len(vectors) % 3]
        vectors.append(rng.uniform(-2.5, 2.5, n) + 1j * rng.uniform(-1, 1, n))
    worst = 0.0
    for k, a in enumerate(vectors):
        rep = sample_fiber_point(a, seed=k)
        det = float(np.max(np.abs(np.linalg.det(rep.matrices) - 1)))
        worst = max(worst, fiber_residual(rep, a), det)
    assert report(8, "fiber sampling", worst < 1e-10,
                  f"50 trace vectors with n in 4..6, max residual {worst:.2e}")


def test_criterion_9_stability_and_schlesinger():
    weight = Weight(tuple(Fraction(k, 10) for k in range(1, 9)))
    lam = [0.1, 0.2, 0.3, -0.6]
    res = [[[l, b], [0, -l]] for l, b in zip(lam, [1, 2, -0.5, -2.5])]
    sysm = FuchsianSystem((0, 1, 2, 3), res)
    aligned = check_stability(ParabolicConnection.build(sysm, lam, lines=[[1, 0]] * 4, weight=weight))
    anti = check_stability(ParabolicConnection.build(sysm, [-l for l in lam], weight=weight))
    ok_stab = (aligned.verdict is Verdict.UNSTABLE and aligned.witness_degree == 2
               and aligned.threshold == Fraction(9, 5) and anti.verdict is Verdict.STABLE)
    worst = 0.0
    for conn in generic_systems(3):
        loops = canonical_loops(conn.system.points)
        before = invariant_fingerprint(compute_monodromy(conn.system, conn.book, loops).rep_tuple())
        for i, j in ((0, 1), (2, 0)):
            out = schlesinger_transform(conn.system, conn.book, conn.lines, i, j)
            after = invariant_fingerprint(compute_monodromy(out.system, out.book, loops).rep_tuple())
            worst = max(worst, before.distance(after))
    assert report(9, "stability and Schlesinger invariance", ok_stab and worst < 1e-6,
                  f"aligned {aligned.verdict.value} {aligned.witness_degree} vs {aligned.threshold}, "
                  f"anti-aligned {anti.verdict.value}, fingerprint drift {worst:.2e}")


def test_criterion_10_bookkeeping_tables():
    lams = [Fraction(k, 4) for k in range(-4, 5)]
    mus = (-1, 0, 1)
    mismatches = 0
    cos_err = 0.0
    for l0, l1, m0, m1 in itertools.product(lams, lams, mus, mus):
        lam, mu, deg = (l0, l1), (m0, m1), -(m0 + m1)
        for i in (0, 1):
            d = elm_bookkeeping(ElmMinus(i), lam, mu, deg)
            mismatches += (d.lam[i], d.mu[i], d.deg_l) != (1 + mu[i] - lam[i], mu[i] + 1, deg - 1)
            e = elm_bookkeeping(ElmPlus(i), lam, mu, deg)
            mismatches += (e.lam[i], e.mu[i], e.deg_l) != (mu[i] - lam[i], mu[i] - 1, deg + 1)
            back = elm_bookkeeping(ElmPlus(i), d.lam, d.mu, d.deg_l)
            mismatches += (back.lam, back.mu, back.deg_l) != (lam, mu, deg)
            for x in (d, e):
                mismatches += x.lam[1 - i] != lam[1 - i] or x.mu[1 - i] != mu[1 - i]
                mismatches += sum(x.mu) != -x.deg_l
                cos_err = max(cos_err, float(np.max(np.abs(mu_map(x.lam) - mu_map(lam)))))
        # the degree-preserving composite Elm-(0), Elm-(1), twist by O(t_1)
        c = elm_bookkeeping(ElmMinus(0), lam, mu, deg)
        c = elm_bookkeeping(ElmMinus(1), c.lam, c.mu, c.deg_l)
        c = elm_bookkeeping(Tensor((0, -1), 1), c.lam, c.mu, c.deg_l)
        mismatches += (c.lam, c.mu, c.deg_l) != ((1 + m0 - l0, m1 - l1), (m0 + 1, m1 - 1), deg)
        t = elm_bookkeeping(Tensor((Fraction(1, 2), Fraction(-1, 2)), 0), lam, mu, deg)
        mismatches += (t.lam, t.mu, t.deg_l) != ((l0 + Fraction(1, 2), l1 - Fraction(1, 2)), (m0 + 1, m1 - 1), deg)
    ok = mismatches == 0 and cos_err < 1e-12
    assert report(10, "bookkeeping tables", ok,
                  f"{mismatches} mismatches over 729 inputs, max |2cos change| {cos_err:.2e}")


if __name__ == "__main__":
    import sys

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
