"""Monodromy of Fuchsian systems by adaptive transport along loops.

Conventions
-----------
``transport(system, path)`` returns ``Y(end)`` for ``dY/dz = A(z) Y`` with
``Y(start) = I``.  Transport is an anti-homomorphism on paths:
``transport(p1 then p2) = transport(p2) @ transport(p1)``.  The loops
built by `canonical_loops` are labelled so that ``M_1 M_2 ... M_n = I``.
Reordering the points changes the generators by a braid, so the
matrices change by Hurwitz moves; trace invariants of the whole tuple
are unaffected only up to that braid action.
"""
from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import MonodromyCheckError, PoleCollision, RadiusUnderflow, ValidationError
from .fuchsian import ExponentBookkeeping, FuchsianSystem, ParabolicConnection, is_infinite
from .integrate import StepStats, integrate

DEFAULT_ODE_TOL = 1e-10
DEFAULT_VERIFY_TOL = 1e-6


def verification_tolerance() -> float:
    """Default verification tolerance, overridable through ``ISOMON_TOL``."""
    env = os.environ.get("ISOMON_TOL")
    return float(env) if env else DEFAULT_VERIFY_TOL


# ---------------------------------------------------------------------------
# paths

@dataclass(frozen=True)
class Line:
    a: complex
    b: complex

    def point(self, s):
        return self.a + (self.b - self.a) * s

    def velocity(self, s):
        return self.b - self.a

    @property
    def start(self):
        return self.a

    @property
    def end(self):
        return self.b

    def reversed(self) -> "Line":
        return Line(self.b, self.a)

    def distance_to(self, p: complex) -> float:
        d = self.b - self.a
        if d == 0:
            return abs(p - self.a)
        s = min(1.0, max(0.0, ((p - self.a) * d.conjugate()).real / abs(d) ** 2))
        return abs(p - self.point(s))


@dataclass(frozen=True)
class Arc:
    center: complex
    radius: float
    theta0: float
    theta1: float

    def point(self, s):
        return self.center + self.radius * np.exp(1j * (self.theta0 + (self.theta1 - self.theta0) * s))

    def velocity(self, s):
        dth = self.theta1 - self.theta0
        return 1j * dth * self.radius * np.exp(1j * (self.theta0 + dth * s))

    @property
    def start(self):
        return complex(self.point(0.0))

    @property
    def end(self):
        return complex(self.point(1.0))

    def reversed(self) -> "Arc":
        return Arc(self.center, self.radius, self.theta1, self.theta0)

    def distance_to(self, p: complex) -> float:
        ang = cmath.phase(p - self.center) if p != self.center else self.theta0
        lo, hi = sorted((self.theta0, self.theta1))
        k = math.ceil((lo - ang) / (2 * math.pi))
        if ang + 2 * math.pi * k <= hi:
            return abs(abs(p - self.center) - self.radius)
        return min(abs(p - self.start), abs(p - self.end))


@dataclass(frozen=True)
class Path:
    segments: tuple

    @property
    def start(self) -> complex:
        return self.segments[0].start

    @property
    def end(self) -> complex:
        return self.segments[-1].end

    def __add__(self, other: "Path") -> "Path":
        """Concatenation: ``self`` first, then ``other``."""
        return Path(self.segments + other.segments)

    def reversed(self) -> "Path":
        return Path(tuple(seg.reversed() for seg in reversed(self.segments)))

    def clearance(self, p: complex) -> float:
        return min(seg.distance_to(p) for seg in self.segments)

    def winding_number(self, p: complex, pieces: int = 64) -> int:
        total = 0.0
        for seg in self.segments:
            zs = seg.point(np.linspace(0.0, 1.0, pieces + 1)) - p
            total += float(np.sum(np.angle(zs[1:] / zs[:-1])))
        return int(round(total / (2 * math.pi)))


def lasso(basepoint: complex, pole: complex, radius: float) -> Path:
    """Straight tail to the circle of given radius, once counterclockwise, back."""
    u = (basepoint - pole) / abs(basepoint - pole)
    entry = pole + radius * u
    th = cmath.phase(u)
    tail = Line(basepoint, entry)
    return Path((tail, Arc(pole, radius, th, th + 2 * math.pi), tail.reversed()))


# ---------------------------------------------------------------------------
# canonical generators

@dataclass(frozen=True)
class LoopBasis:
    """Canonical generators around the finite poles.

    ``lassos[q]`` is the straight lasso around ``points[q]``.  Loop ``k``
    is the word ``words[k]``: a list of ``(q, +-1)`` read as the matrix
    product ``prod N_q^(+-1)`` from left to right, where ``N_q`` is the
    transport around ``lassos[q]``.
    """

    basepoint: complex
    points: tuple
    radius: float
    lassos: tuple
    words: tuple

    @property
    def n(self) -> int:
        return len(self.words)

    def path(self, k: int) -> Path:
        segs: tuple = ()
        # matrix product X Y corresponds to traversing Y first
        for q, e in reversed(self.words[k]):
            p = self.lassos[q] if e > 0 else self.lassos[q].reversed()
            segs = segs + p.segments
        return Path(segs)

    def winding_matrix(self) -> np.ndarray:
        w = np.zeros((self.n, len(self.points)), dtype=int)
        for k, word in enumerate(self.words):
            for q, e in word:
                w[k, q] += e
        return w


def _angular_order(basepoint: complex, pts: Sequence[complex]) -> list[int]:
    """Indices ordered so that the lasso matrices multiply to the identity."""
    ang = np.array([cmath.phase(p - basepoint) for p in pts])
    srt = np.sort(ang)
    gaps = np.diff(np.concatenate([srt, [srt[0] + 2 * math.pi]]))
    cut = srt[int(np.argmax(gaps))] + gaps.max() / 2
    rel = np.mod(ang - cut, 2 * math.pi)
    ccw = [int(k) for k in np.argsort(rel)]
    return ccw[::-1]


def _ray_clearance(b: complex, pts: Sequence[complex], radius: float) -> float:
    worst = math.inf
    for i, p in enumerate(pts):
        u = (b - p) / abs(b - p)
        tail = Line(b, p + radius * u)
        for j, q in enumerate(pts):
            if j != i:
                worst = min(worst, tail.distance_to(q))
    return worst


def auto_basepoint(points: Sequence[complex]) -> complex:
    pts = np.asarray(points, dtype=complex)
    if len(pts) == 1:
        return complex(pts[0] - 2j)
    diam = max(abs(p - q) for p in pts for q in pts)
    radius = 0.1 * min(abs(p - q) for i, p in enumerate(pts) for q in pts[i + 1:])
    y = pts.imag.min() - 2 * diam
    mid = 0.5 * (pts.real.min() + pts.real.max())
    best = None
    for x in mid + diam * np.linspace(-1, 1, 81):
        c = _ray_clearance(complex(x, y), pts, radius)
        if best is None or c > best[0] + 1e-12 * diam:
            best = (c, complex(x, y))
    return best[1]


def canonical_loops(points: Sequence, basepoint: complex | None = None) -> LoopBasis:
    """Canonical generators around the finite points, in the given order.

    An infinite point contributes no loop; its monodromy is recovered from
    the product relation.
    """
    pts = tuple(complex(p) for p in points if not is_infinite(p))
    if not pts:
        raise ValidationError("no finite poles")
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if pts[i] == pts[j]:
                raise ValidationError(f"duplicate marked point: points[{i}] and points[{j}]")
    scale = max([1.0] + [abs(p) for p in pts])
    if len(pts) > 1:
        dmin = min(abs(p - q) for i, p in enumerate(pts) for q in pts[i + 1:])
        radius = 0.1 * dmin
    else:
        radius = 0.5
    if radius < 1e-8 * scale:
        raise RadiusUnderflow(f"poles too close: safety radius {radius:.3g} underflows")
    b = auto_basepoint(pts) if basepoint is None else complex(basepoint)
    if any(abs(b - p) < 2 * radius for p in pts):
        raise ValidationError("basepoint too close to a pole")
    lassos = tuple(lasso(b, p, radius) for p in pts)
    for i, las in enumerate(lassos):
        for j, q in enumerate(pts):
            if j != i and las.clearance(q) < radius * (1 - 1e-9):
                raise ValidationError(
                    f"straight loop to points[{i}] passes within the safety radius of points[{j}]; "
                    "choose another basepoint")
    order = _angular_order(b, pts)
    # tuple of (pole label, word); product of the words in this order is I
    tup = [(q, [(q, 1)]) for q in order]
    # bubble sort into the requested order with Hurwitz moves
    #   (X, Y) -> (X Y X^-1, X)
    changed = True
    while changed:
        changed = False
        for k in range(len(tup) - 1):
            (qx, wx), (qy, wy) = tup[k], tup[k + 1]
            if qx > qy:
                winv = [(q, -e) for q, e in reversed(wx)]
                tup[k] = (qy, _reduce(wx + wy + winv))
                tup[k + 1] = (qx, wx)
                changed = True
    basis = LoopBasis(b, pts, radius, lassos, tuple(tuple(w) for _, w in tup))
    wm = basis.winding_matrix()
    if not np.array_equal(wm, np.eye(len(pts), dtype=int)):
        raise NumericalLoopError("loop winding numbers are inconsistent")
    for i, las in enumerate(lassos):
        for j, q in enumerate(pts):
            if las.winding_number(q) != int(i == j):
                raise NumericalLoopError("lasso winding numbers are inconsistent")
    return basis


class NumericalLoopError(ValidationError):
    pass


def _reduce(word):
    out = []
    for q, e in word:
        if out and out[-1][0] == q and out[-1][1] == -e:
            out.pop()
        else:
            out.append((q, e))
    return out


# ---------------------------------------------------------------------------
# transport

def transport(system: FuchsianSystem, path: Path, tol: float = DEFAULT_ODE_TOL,
              stats: StepStats | None = None) -> np.ndarray:
    """Fundamental matrix at the end of ``path`` for ``dY/dz = A(z) Y``, ``Y(start) = I``."""
    t = system.finite_points
    res = system.finite_residues
    radius_floor = 0.0
    if len(t) > 1:
        radius_floor = 1e-3 * min(abs(p - q) for i, p in enumerate(t) for q in t[i + 1:])
    for p in t:
        if path.clearance(p) <= max(radius_floor, 1e-12):
            raise PoleCollision(f"path passes too close to the pole {p}")
    y = np.eye(2, dtype=complex)
    st = stats if stats is not None else StepStats()
    for seg in path.segments:
        def rhs(s, yv, seg=seg):
            z = seg.point(s)
            a = np.tensordot(1.0 / (z - t), res, axes=1)
            return (a @ yv.reshape(2, 2)).reshape(4) * seg.velocity(s)
        y = integrate(rhs, y.reshape(4), 0.0, 1.0, tol, stats=st).reshape(2, 2)
    return y


# ---------------------------------------------------------------------------
# monodromy representation

@dataclass
class MonodromyRep:
    matrices: np.ndarray          # (n, 2, 2), one per marked point in system order
    basepoint: complex
    error_estimate: float
    loops: LoopBasis | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.matrices)

    def rep_tuple(self) -> list[np.ndarray]:
        """The first ``n - 1`` matrices (the last one is determined)."""
        return [m for m in self.matrices[:-1]]


def _word_matrix(word, lasso_mats) -> np.ndarray:
    m = np.eye(2, dtype=complex)
    for q, e in word:
        x = lasso_mats[q]
        m = m @ (x if e > 0 else _sl2_inverse(x))
    return m


def _sl2_inverse(x: np.ndarray) -> np.ndarray:
    det = x[0, 0] * x[1, 1] - x[0, 1] * x[1, 0]
    return np.array([[x[1, 1], -x[0, 1]], [-x[1, 0], x[0, 0]]]) / det


def compute_monodromy(system: FuchsianSystem, book: ExponentBookkeeping | None = None,
                      loops: LoopBasis | None = None, tol: float = DEFAULT_ODE_TOL,
                      verify_tol: float | None = None, jobs: int = 1) -> MonodromyRep:
    """Monodromy matrices ``M_i`` in the order of ``system.points``.

    The matrix for a point at infinity is ``(M_1 ... M_{n-1})^-1`` taken
    over the other points, which requires infinity to be the last point.
    Raises `MonodromyCheckError` when ``det M_i = 1``, the product
    relation or ``tr M_i = 2 cos(2 pi lam_i)`` fails by more than
    ``verify_tol``.
    """
    verify_tol = verification_tolerance() if verify_tol is None else verify_tol
    inf_i = system.infinity_index
    if inf_i is not None and inf_i != system.n - 1:
        raise ValidationError("a point at infinity must be listed last")
    if book is not None:
        for i, mu in enumerate(book.mu):
            if abs(complex(mu) - round(complex(mu).real)) > 1e-12:
                raise ValidationError(f"mu[{i}] must be an integer")
    if loops is None:
        loops = canonical_loops(system.points)
    fin = system.finite_indices
    fin_pts = tuple(system.points[i] for i in fin)
    if tuple(loops.points) != fin_pts:
        raise ValidationError("loop basis was built for different points")

    stats = [StepStats() for _ in loops.lassos]

    def run(q):
        return transport(system, loops.lassos[q], tol, stats[q])

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            lasso_mats = list(ex.map(run, range(len(loops.lassos))))
    else:
        lasso_mats = [run(q) for q in range(len(loops.lassos))]
    mats = [_word_matrix(w, lasso_mats) for w in loops.words]
    if inf_i is not None:
        prod = np.eye(2, dtype=complex)
        for m in mats:
            prod = prod @ m
        mats.append(_sl2_inverse(prod))
    mats = np.array(mats)
    err = max(s.max_error for s in stats)
    rep = MonodromyRep(mats, loops.basepoint, err, loops)
    _verify(rep, book, verify_tol)
    return rep


def _verify(rep: MonodromyRep, book, verify_tol):
    prod = np.eye(2, dtype=complex)
    for m in rep.matrices:
        prod = prod @ m
    dets = np.array([np.linalg.det(m) for m in rep.matrices])
    rel = float(np.max(np.abs(prod - np.eye(2))))
    det_err = float(np.max(np.abs(dets - 1)))
    rep.diagnostics.update(relation_error=rel, det_error=det_err)
    problems = []
    scale = max(1.0, float(np.max(np.abs(rep.matrices))))
    if det_err > verify_tol:
        problems.append(f"|det M_i - 1| = {det_err:.3g}")
    if rel > verify_tol * scale ** len(rep.matrices):
        problems.append(f"|M_1...M_n - I| = {rel:.3g}")
    if book is not None:
        expected = np.array([2 * cmath.cos(2 * math.pi * complex(l)) for l in book.lam])
        tr_err = float(np.max(np.abs(np.trace(rep.matrices, axis1=1, axis2=2) - expected)))
        rep.diagnostics["trace_error"] = tr_err
        if tr_err > verify_tol * scale:
            problems.append(f"|tr M_i - 2cos(2 pi lam_i)| = {tr_err:.3g}")
    if problems:
        raise MonodromyCheckError("monodromy verification failed: " + "; ".join(problems)
                                  + " (tighten the integration tolerance)")


def riemann_hilbert(conn: ParabolicConnection, tol: float = DEFAULT_ODE_TOL,
                    verify_tol: float | None = None, loops: LoopBasis | None = None):
    """Trace coordinates of the monodromy of ``conn``."""
    from .character import invariant_fingerprint, mu_map

    verify_tol = verification_tolerance() if verify_tol is None else verify_tol
    rep = compute_monodromy(conn.system, conn.book, loops, tol, verify_tol)
    fp = invariant_fingerprint(rep.rep_tuple())
    expected = mu_map(conn.book.lam)
    drift = float(np.max(np.abs(np.asarray(fp.singles) - np.asarray(expected))))
    if drift > verify_tol * max(1.0, float(np.max(np.abs(rep.matrices)))):
        raise MonodromyCheckError(f"single traces deviate from 2cos(2 pi lam) by {drift:.3g}")
    return fp
