"""Rank-2 Fuchsian systems with parabolic structure.

A system is the connection ``d - A(z) dz`` on the trivial rank-2 bundle
over the Riemann sphere, ``A(z) = sum_i A_i / (z - t_i)``; its flat
sections solve ``dY/dz = A(z) Y``.  At most one marked point may sit at
infinity, and its residue is always derived as minus the sum of the
finite ones.

Point indices are 0-based throughout the Python API.
"""
from __future__ import annotations

import cmath
import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .affine import AffineMap
from .errors import ValidationError

INF = math.inf
DEFAULT_TOL = 1e-8


def is_infinite(p) -> bool:
    return cmath.isinf(complex(p))


def _as_point(p):
    if isinstance(p, str) and p.strip().lower() in {"inf", "infinity", "∞"}:
        return INF
    return INF if is_infinite(p) else complex(p)


# ---------------------------------------------------------------------------
# lines in C^2

def normalize_line(v) -> np.ndarray:
    """Canonical representative of the projective point ``[v0 : v1]``.

    The entry of largest modulus is scaled to 1 (ties go to the first).
    """
    v = np.asarray(v, dtype=complex).reshape(2)
    k = int(np.argmax(np.abs(v)))
    if abs(v[k]) == 0:
        raise ValueError("the zero vector does not define a line")
    return v / v[k]


def same_line(u, v, tol: float = DEFAULT_TOL) -> bool:
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    return abs(u[0] * v[1] - u[1] * v[0]) <= tol * np.linalg.norm(u) * np.linalg.norm(v)


def eigenline(a: np.ndarray, rho: complex, tol: float = DEFAULT_TOL) -> np.ndarray | None:
    """Kernel of ``a - rho I`` as a normalized line, or None when it is all of C^2."""
    m = np.asarray(a, dtype=complex) - rho * np.eye(2)
    scale = max(1.0, float(np.max(np.abs(a))), abs(rho))
    r0, r1 = m[0], m[1]
    if max(np.max(np.abs(r0)), np.max(np.abs(r1))) <= tol * scale:
        return None
    row = r0 if np.linalg.norm(r0) >= np.linalg.norm(r1) else r1
    return normalize_line([row[1], -row[0]])


# ---------------------------------------------------------------------------
# data types

@dataclass(frozen=True, eq=False)
class FuchsianSystem:
    points: tuple
    residues: np.ndarray

    def __post_init__(self):
        pts = tuple(_as_point(p) for p in self.points)
        res = np.array(self.residues, dtype=complex).reshape(len(pts), 2, 2)
        fin = [i for i, p in enumerate(pts) if not is_infinite(p)]
        infs = [i for i, p in enumerate(pts) if is_infinite(p)]
        if len(infs) == 1:
            res[infs[0]] = -res[fin].sum(axis=0)
        res.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "residues", res)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def infinity_index(self) -> int | None:
        for i, p in enumerate(self.points):
            if is_infinite(p):
                return i
        return None

    @property
    def finite_indices(self) -> list[int]:
        return [i for i, p in enumerate(self.points) if not is_infinite(p)]

    @property
    def finite_points(self) -> np.ndarray:
        return np.array([self.points[i] for i in self.finite_indices], dtype=complex)

    @property
    def finite_residues(self) -> np.ndarray:
        return self.residues[self.finite_indices]

    def matrix_at(self, z: complex) -> np.ndarray:
        """``A(z) = sum A_i/(z - t_i)`` over the finite poles."""
        t = self.finite_points
        return np.tensordot(1.0 / (z - t), self.finite_residues, axes=1)

    def conjugate(self, g) -> "FuchsianSystem":
        g = np.asarray(g, dtype=complex)
        gi = np.linalg.inv(g)
        return FuchsianSystem(self.points, g @ self.residues @ gi)

    def with_points(self, points) -> "FuchsianSystem":
        return FuchsianSystem(tuple(points), self.residues)

    def __eq__(self, other):
        if not isinstance(other, FuchsianSystem):
            return NotImplemented
        return self.points == other.points and np.array_equal(self.residues, other.residues)

    __hash__ = None


@dataclass(frozen=True)
class ExponentBookkeeping:
    """Marked exponents, determinant residues and determinant degree."""

    lam: tuple
    mu: tuple
    deg_l: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lam", tuple(self.lam))
        object.__setattr__(self, "mu", tuple(self.mu))

    def other(self, i: int):
        return self.mu[i] - self.lam[i]


@dataclass(frozen=True)
class Weight:
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(Fraction(v) if not isinstance(v, float)
                                                 else Fraction(str(v)) for v in self.values))

    def odd(self, i: int) -> Fraction:
        """alpha_{2i-1} for the 0-based point index i."""
        return self.values[2 * i]

    def even(self, i: int) -> Fraction:
        """alpha_{2i} for the 0-based point index i."""
        return self.values[2 * i + 1]

    @classmethod
    def default(cls, n: int) -> "Weight":
        return cls(tuple(Fraction(k, 2 * n + 1) for k in range(1, 2 * n + 1)))


@dataclass(frozen=True, eq=False)
class ParabolicConnection:
    system: FuchsianSystem
    book: ExponentBookkeeping
    lines: tuple
    weight: Weight

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(normalize_line(l) for l in self.lines))

    @property
    def n(self) -> int:
        return self.system.n

    @classmethod
    def build(cls, system: FuchsianSystem, lam: Sequence, mu: Sequence | None = None,
              deg_l: int | None = None, lines: Sequence | None = None,
              weight: Weight | Sequence | None = None, tol: float = DEFAULT_TOL) -> "ParabolicConnection":
        """Fill in defaults: ``mu`` from residue traces, ``deg_l = -sum(mu)``,
        marked eigenlines from the residues and `Weight.default`."""
        if mu is None:
            mu = tuple(int(round(np.trace(a).real)) for a in system.residues)
        if deg_l is None:
            deg_l = -sum(mu)
        if lines is None:
            lines = []
            for a, l in zip(system.residues, lam):
                v = eigenline(a, complex(l), tol=1e-6)
                lines.append(v if v is not None else np.array([1, 0], dtype=complex))
        if weight is None:
            weight = Weight.default(system.n)
        elif not isinstance(weight, Weight):
            weight = Weight(tuple(weight))
        return cls(system, ExponentBookkeeping(tuple(lam), tuple(mu), int(deg_l)), tuple(lines), weight)

    def conjugate(self, g) -> "ParabolicConnection":
        g = np.asarray(g, dtype=complex)
        return ParabolicConnection(self.system.conjugate(g), self.book,
                                   tuple(g @ l for l in self.lines), self.weight)


# ---------------------------------------------------------------------------
# validation and exponents

def _scale(a) -> float:
    return max(1.0, float(np.max(np.abs(a))))


def _is_integer(x, tol: float) -> bool:
    if isinstance(x, (int, Fraction)):
        return Fraction(x).denominator == 1
    z = complex(x)
    return abs(z.imag) <= tol and abs(z.real - round(z.real)) <= tol


def validate_system(system: FuchsianSystem, book: ExponentBookkeeping | None = None,
                    lines: Sequence | None = None, weight: Weight | None = None,
                    tol: float = DEFAULT_TOL) -> list[str]:
    """Every violated invariant as a message; an empty list means valid."""
    report: list[str] = []
    n = system.n
    if n < 3:
        report.append(f"fewer than 3 marked points (got {n})")
    for i, j in itertools.combinations(range(n), 2):
        pi, pj = system.points[i], system.points[j]
        if (is_infinite(pi) and is_infinite(pj)) or (
                not is_infinite(pi) and not is_infinite(pj) and pi == pj):
            report.append(f"duplicate marked point: points[{i}] and points[{j}]")
    if sum(is_infinite(p) for p in system.points) > 1:
        report.append("more than one marked point at infinity")
    if not np.all(np.isfinite(system.residues)):
        report.append("non-finite residue entries")
    if system.infinity_index is None:
        total = system.residues.sum(axis=0)
        if np.max(np.abs(total)) > tol * _scale(system.residues):
            report.append("residues do not sum to zero (hidden singularity at infinity)")

    if book is not None:
        if not (len(book.lam) == len(book.mu) == n):
            report.append(f"exponent data has wrong length (expected {n})")
        else:
            for i, (a, lam, mu) in enumerate(zip(system.residues, book.lam, book.mu)):
                if not _is_integer(mu, tol):
                    report.append(f"mu[{i}] = {mu} is not an integer")
                s = _scale(a) * max(1.0, abs(complex(lam)))
                if abs(np.trace(a) - complex(mu)) > tol * s:
                    report.append(f"exponent not in spectrum at point {i}: trace {np.trace(a):.6g} != mu {mu}")
                elif abs(np.linalg.det(a - complex(lam) * np.eye(2))) > tol * s * s:
                    report.append(f"exponent not in spectrum at point {i}: lambda = {lam}")
            if sum(int(round(complex(m).real)) for m in book.mu) != -book.deg_l:
                report.append(f"Fuchs relation violated: sum(mu) = {sum(book.mu)} but -degL = {-book.deg_l}")

    if lines is not None:
        if len(lines) != n:
            report.append(f"expected {n} parabolic lines, got {len(lines)}")
        elif book is not None and len(book.lam) == n:
            for i, (a, lam, l) in enumerate(zip(system.residues, book.lam, lines)):
                l = np.asarray(l, dtype=complex)
                if np.linalg.norm(l) == 0:
                    report.append(f"parabolic line {i} is the zero vector")
                    continue
                r = (a - complex(lam) * np.eye(2)) @ l
                if np.linalg.norm(r) > tol * _scale(a) * max(1.0, abs(complex(lam))) * np.linalg.norm(l):
                    report.append(f"eigenline condition violated at point {i}")

    if weight is not None:
        vals = weight.values
        if len(vals) != 2 * n:
            report.append(f"weight has {len(vals)} entries, expected {2 * n}")
        if any(not (0 <= v < 1) for v in vals):
            report.append("weight entries outside [0, 1)")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            report.append("weight not strictly increasing")
    return report


def validate_connection(conn: ParabolicConnection, tol: float = DEFAULT_TOL) -> list[str]:
    return validate_system(conn.system, conn.book, conn.lines, conn.weight, tol)


def local_exponents(system: FuchsianSystem, book: ExponentBookkeeping,
                    tol: float = DEFAULT_TOL) -> list[tuple]:
    """Pairs ``(lambda_i, mu_i - lambda_i)``, checked against the residue spectra."""
    out = []
    for i, (a, lam, mu) in enumerate(zip(system.residues, book.lam, book.mu)):
        other = mu - lam
        s = _scale(a) * max(1.0, abs(complex(lam)))
        tr_ok = abs(np.trace(a) - (complex(lam) + complex(other))) <= tol * s
        det_ok = abs(np.linalg.det(a) - complex(lam) * complex(other)) <= tol * s * s
        if not (tr_ok and det_ok):
            raise ValidationError(f"exponent not in spectrum at point {i}")
        out.append((lam, other))
    return out


# ---------------------------------------------------------------------------
# special exponents

@dataclass(frozen=True)
class Wall:
    """A reflection hyperplane ``normal . lam = level`` of the affine Weyl group."""

    normal: tuple
    level: Fraction
    reflection: AffineMap


@dataclass(frozen=True)
class LambdaClass:
    resonant: tuple = ()
    reducible: tuple = ()
    walls: tuple = ()

    @property
    def is_generic(self) -> bool:
        return not self.resonant and not self.reducible

    @property
    def kind(self) -> str:
        if self.is_generic:
            return "generic"
        parts = []
        if self.resonant:
            parts.append("resonant")
        if self.reducible:
            parts.append("reducible")
        return "+".join(parts)


def _nearest_int(x) -> int:
    if isinstance(x, (int, Fraction)):
        return int(Fraction(x))
    return int(round(complex(x).real))


def classify_lambda(lam: Sequence, mu: Sequence | None = None, tol: float = DEFAULT_TOL) -> LambdaClass:
    """Resonance (``2 lam_i`` integral) and reducibility (``sum eps_i lam_i``
    integral for some signs) by exhaustive scan.

    Exact for rational input.  For ``n = 4`` the reflection walls of
    W(D4^(1)) through ``lam`` are attached.
    """
    lam = tuple(lam)
    n = len(lam)
    if mu is not None and not all(_is_integer(m, tol) for m in mu):
        raise ValidationError("determinant residues mu must be integers")
    resonant = tuple(i for i, l in enumerate(lam) if _is_integer(2 * l, tol))
    reducible = []
    for eps in itertools.product((1, -1), repeat=n):
        if _is_integer(sum(e * l for e, l in zip(eps, lam)), tol):
            reducible.append(eps)
    walls = []
    if n == 4:
        for i in resonant:
            k = _nearest_int(2 * lam[i])
            lin = [[(-1 if (r == c == i) else int(r == c)) for c in range(4)] for r in range(4)]
            sh = [k if r == i else 0 for r in range(4)]
            walls.append(Wall(tuple(int(r == i) for r in range(4)), Fraction(k, 2),
                              AffineMap.from_rows(lin, sh)))
        for eps in reducible:
            if eps[0] != 1:
                continue  # -eps gives the same hyperplane
            k = _nearest_int(sum(e * l for e, l in zip(eps, lam)))
            lin = [[int(r == c) - Fraction(eps[r] * eps[c], 2) for c in range(4)] for r in range(4)]
            sh = [Fraction(k * eps[r], 2) for r in range(4)]
            walls.append(Wall(eps, Fraction(k), AffineMap.from_rows(lin, sh)))
    return LambdaClass(resonant, tuple(reducible), tuple(walls))


# ---------------------------------------------------------------------------
# parabolic degrees and invariant subbundles

def parabolic_degree(conn: ParabolicConnection) -> Fraction:
    return Fraction(conn.book.deg_l) + sum(conn.weight.values, Fraction(0))


@dataclass(frozen=True, eq=False)
class InvariantSubbundle:
    """A line subbundle ``O(-m)`` spanned by a polynomial section.

    The section is ``v(z) = sum_k coeffs[k] * ((z - center)/scale)**k``.
    ``exponents[i]`` is the eigenvalue of the residue at point ``i`` on the
    fiber of the subbundle.
    """

    coeffs: np.ndarray
    center: complex
    scale: float
    exponents: tuple
    pattern: tuple

    @property
    def degree(self) -> int:
        return -(len(self.coeffs) - 1)

    def value(self, z: complex) -> np.ndarray:
        w = (z - self.center) / self.scale
        return P.polyval(w, self.coeffs)

    def fiber(self, system: FuchsianSystem, i: int) -> np.ndarray:
        if is_infinite(system.points[i]):
            return normalize_line(self.coeffs[-1])
        return normalize_line(self.value(system.points[i]))

    def wedge_residual(self, system: FuchsianSystem) -> float:
        """Normalized size of ``(T v' - B v) ^ v`` (zero iff invariant)."""
        w_poles = (system.finite_points - self.center) / self.scale
        ops = _section_operator(w_poles, system.finite_residues)
        tv, bv = _apply_operator(ops, self.coeffs)
        lhs = tv - bv
        wedge = P.polysub(P.polymul(lhs[0], self.coeffs[:, 1]), P.polymul(lhs[1], self.coeffs[:, 0]))
        denom = (max(np.max(np.abs(tv)), np.max(np.abs(bv)), 1e-300)
                 * np.max(np.abs(self.coeffs)))
        return float(np.max(np.abs(wedge)) / denom)


def _section_operator(w_poles: np.ndarray, residues: np.ndarray):
    """Polynomials ``T(w) = prod (w - w_j)``, ``B(w) = sum_i A_i prod_{j != i} (w - w_j)``
    and the cofactors ``prod_{j != i}`` used for the scalar part."""
    p = len(w_poles)
    t = P.polyfromroots(w_poles) if p else np.array([1.0 + 0j])
    cof = [P.polyfromroots(np.delete(w_poles, i)) if p > 1 else np.array([1.0 + 0j]) for i in range(p)]
    b = [[np.zeros(1, dtype=complex) for _ in range(2)] for _ in range(2)]
    for i in range(p):
        for r in range(2):
            for c in range(2):
                b[r][c] = P.polyadd(b[r][c], residues[i, r, c] * cof[i])
    return t, b, cof


def _apply_operator(ops, coeffs):
    t, b, _ = ops
    v = [coeffs[:, 0], coeffs[:, 1]]
    dv = [P.polyder(v[0]) if len(v[0]) > 1 else np.zeros(1), P.polyder(v[1]) if len(v[1]) > 1 else np.zeros(1)]
    tv = [P.polymul(t, dv[0]), P.polymul(t, dv[1])]
    bv = [P.polyadd(P.polymul(b[r][0], v[0]), P.polymul(b[r][1], v[1])) for r in range(2)]
    size = max(len(x) for x in tv + bv)
    pad = lambda x: np.pad(np.asarray(x, dtype=complex), (0, size - len(x)))
    return np.array([pad(x) for x in tv]), np.array([pad(x) for x in bv])


def _linear_system(ops, rho_fin, m: int) -> np.ndarray:
    """Matrix of ``v -> T v' - B v + R v`` on coefficient vectors of degree <= m."""
    t, b, cof = ops
    r = np.zeros(1, dtype=complex)
    for rho, c in zip(rho_fin, cof):
        r = P.polyadd(r, rho * c)
    cols = []
    size = len(t) + m
    for k in range(m + 1):
        for comp in range(2):
            coeffs = np.zeros((m + 1, 2), dtype=complex)
            coeffs[k, comp] = 1.0
            tv, bv = _apply_operator(ops, coeffs)
            out = []
            for row in range(2):
                e = P.polyadd(P.polysub(tv[row], bv[row]), P.polymul(r, coeffs[:, row]))
                out.append(np.pad(e, (0, max(0, size - len(e))))[:size])
            cols.append(np.concatenate(out))
    return np.array(cols).T


def _null_space(mat: np.ndarray, tol: float):
    """(basis, ambiguous) for the numerical kernel of ``mat``."""
    norms = np.linalg.norm(mat, axis=0)
    norms[norms == 0] = 1.0
    scaled = mat / norms
    _, s, vh = np.linalg.svd(scaled)
    ncols = mat.shape[1]
    sv = np.zeros(ncols)
    sv[:len(s)] = s
    smax = max(sv.max(), 1.0) if sv.size else 1.0
    null = sv <= tol * smax
    ambiguous = bool(np.any((sv > tol * smax) & (sv < math.sqrt(tol) * smax)))
    basis = vh.conj().T[:, null] / norms[:, None]
    return basis, ambiguous


def _is_saturated(coeffs: np.ndarray, tol: float) -> bool:
    m = len(coeffs) - 1
    if np.linalg.norm(coeffs[-1]) <= math.sqrt(tol) * np.max(np.abs(coeffs)):
        return False
    if m == 0:
        return True
    a, b = coeffs[:, 0], coeffs[:, 1]
    if np.max(np.abs(a)) < np.max(np.abs(b)):
        a, b = b, a
    if np.max(np.abs(b)) <= math.sqrt(tol) * np.max(np.abs(a)):
        return False
    roots = P.polyroots(np.trim_zeros(a, "b")) if len(np.trim_zeros(a, "b")) > 1 else []
    bn = np.max(np.abs(b))
    for r in roots:
        if abs(P.polyval(r, b)) <= math.sqrt(tol) * bn * (1 + abs(r)) ** m:
            return False
    return True


@dataclass
class SubbundleSearch:
    subbundles: list = field(default_factory=list)
    undetermined: bool = False
    notes: list = field(default_factory=list)


def _gain(conn, i) -> Fraction:
    return conn.weight.even(i) - conn.weight.odd(i)


def find_invariant_subbundles(conn: ParabolicConnection, d_max: int = 2,
                              tol: float = DEFAULT_TOL) -> SubbundleSearch:
    """All invariant line subbundles ``O(-m)``, ``0 <= m <= d_max``.

    For each assignment of one residue eigenvalue per point whose sum is
    ``-m`` (residue theorem for the induced connection), the induced
    scalar connection is known exactly and invariance becomes a linear
    equation for the polynomial section, solved by SVD.  When the kernel
    is more than one-dimensional the member through the largest set of
    marked lines is returned.
    """
    system = conn.system
    n = system.n
    fin = system.finite_indices
    inf_i = system.infinity_index
    tpts = system.finite_points
    center = complex(np.mean(tpts)) if len(tpts) else 0j
    spread = float(np.max(np.abs(tpts - center))) if len(tpts) else 1.0
    scale = spread if spread > 0 else 1.0
    w_poles = (tpts - center) / scale
    ops = _section_operator(w_poles, system.finite_residues)
    exps = [(complex(l), complex(o)) for l, o in
            ((conn.book.lam[i], conn.book.other(i)) for i in range(n))]
    result = SubbundleSearch()
    for m in range(d_max + 1):
        seen = set()
        for pattern in itertools.product((0, 1), repeat=n):
            if any(p == 1 and abs(exps[i][0] - exps[i][1]) <= tol for i, p in enumerate(pattern)):
                continue
            rho = tuple(exps[i][p] for i, p in enumerate(pattern))
            if abs(sum(rho) + m) > tol * max(1.0, sum(abs(r) for r in rho)):
                continue
            key = tuple(np.round(np.array(rho), 10))
            if key in seen:
                continue
            seen.add(key)
            mat = _linear_system(ops, [rho[i] for i in fin], m)
            basis, ambiguous = _null_space(mat, tol)
            if ambiguous:
                result.undetermined = True
                result.notes.append(f"ambiguous kernel for degree {-m}, pattern {pattern}")
            if basis.shape[1] == 0:
                continue
            coeffs = _pick_member(conn, basis, m, w_poles, fin, inf_i, tol)
            if coeffs is None:
                continue
            sub = InvariantSubbundle(coeffs, center, scale, rho, pattern)
            if sub.wedge_residual(system) > 10 * tol:
                result.undetermined = True
                result.notes.append(f"unverified candidate for degree {-m}, pattern {pattern}")
                continue
            if not any(_same_subbundle(sub, s) for s in result.subbundles):
                result.subbundles.append(sub)
    return result


def _same_subbundle(a: InvariantSubbundle, b: InvariantSubbundle) -> bool:
    if a.degree != b.degree:
        return False
    probes = [a.center + a.scale * w for w in (0.3 + 0.7j, -1.1 + 0.2j, 0.9 - 1.3j)]
    return all(same_line(a.value(z), b.value(z), 1e-6) for z in probes)


def _pick_member(conn, basis, m, w_poles, fin, inf_i, tol):
    k = basis.shape[1]
    members = [basis[:, 0]] if k == 1 else []
    if k > 1:
        # constrain the fiber to the marked line at as many points as possible
        def rows_for(i):
            l = conn.lines[i]
            row = np.zeros(2 * (m + 1), dtype=complex)
            if i == inf_i:
                row[2 * m] = l[1]
                row[2 * m + 1] = -l[0]
            else:
                w = w_poles[fin.index(i)]
                for d in range(m + 1):
                    row[2 * d] = w ** d * l[1]
                    row[2 * d + 1] = -(w ** d) * l[0]
            return row

        subsets = sorted((s for r in range(conn.n + 1) for s in itertools.combinations(range(conn.n), r)),
                         key=lambda s: (-sum((_gain(conn, i) for i in s), Fraction(0)), -len(s), s))
        rng = np.random.default_rng(0)
        for s in subsets:
            if s:
                c = np.array([rows_for(i) for i in s]) @ basis
                sub_basis, _ = _null_space(c, tol)
                if sub_basis.shape[1] == 0:
                    continue
                vec = basis @ (sub_basis @ (rng.standard_normal(sub_basis.shape[1])
                                           + 1j * rng.standard_normal(sub_basis.shape[1])))
            else:
                vec = basis @ (rng.standard_normal(k) + 1j * rng.standard_normal(k))
            coeffs = vec.reshape(m + 1, 2)
            if _is_saturated(coeffs, tol):
                members = [vec]
                break
    for vec in members:
        coeffs = vec.reshape(m + 1, 2)
        coeffs = coeffs / coeffs.flat[np.argmax(np.abs(coeffs))]
        if _is_saturated(coeffs, tol):
            return coeffs
    return None


def sub_parabolic_degree(conn: ParabolicConnection, sub: InvariantSubbundle,
                         tol: float = DEFAULT_TOL) -> Fraction:
    if sub.wedge_residual(conn.system) > 10 * tol:
        raise ValidationError("subbundle is not invariant under the connection")
    total = Fraction(sub.degree)
    for i in range(conn.n):
        if same_line(sub.fiber(conn.system, i), conn.lines[i], math.sqrt(tol)):
            total += conn.weight.even(i)
        else:
            total += conn.weight.odd(i)
    return total


class Verdict(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    UNDETERMINED = "undetermined"


@dataclass
class StabilityResult:
    verdict: Verdict
    pardeg: Fraction
    threshold: Fraction
    bound: int
    witness: InvariantSubbundle | None = None
    witness_degree: Fraction | None = None
    subbundles: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def completeness_bound(conn: ParabolicConnection) -> int:
    """Smallest ``d >= 0`` with ``-d + sum(alpha_even) < pardeg/2``.

    No invariant subbundle of degree ``<= -d`` can destabilize.
    """
    even = sum((conn.weight.even(i) for i in range(conn.n)), Fraction(0))
    gap = even - parabolic_degree(conn) / 2
    return max(0, math.floor(gap) + 1)


def check_stability(conn: ParabolicConnection, d_max: int = 2,
                    tol: float = DEFAULT_TOL) -> StabilityResult:
    pardeg = parabolic_degree(conn)
    threshold = pardeg / 2
    bound = max(d_max, completeness_bound(conn))
    search = find_invariant_subbundles(conn, bound, tol)
    res = StabilityResult(Verdict.STABLE, pardeg, threshold, bound,
                          subbundles=search.subbundles, notes=list(search.notes))
    best = None
    for sub in search.subbundles:
        spd = sub_parabolic_degree(conn, sub, tol)
        if best is None or spd > best[0]:
            best = (spd, sub)
    if best is not None and best[0] >= threshold:
        res.verdict = Verdict.UNSTABLE
        res.witness_degree, res.witness = best
    elif search.undetermined:
        res.verdict = Verdict.UNDETERMINED
    elif best is not None:
        res.witness_degree, res.witness = best
    return res


# ---------------------------------------------------------------------------
# generators of test data

def _random_conjugator(rng: np.random.Generator) -> np.ndarray:
    while True:
        g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        if np.linalg.cond(g) < 8:
            return g


def random_system(points: Sequence, lam: Sequence, seed=None) -> ParabolicConnection:
    """Traceless residues with spectra ``{lam_i, -lam_i}`` summing to zero.

    All residues but the last two are random conjugates of
    ``diag(lam_i, -lam_i)``; the second-to-last is solved from a quadratic so
    that the closing residue has the right determinant.
    """
    rng = np.random.default_rng(seed)
    pts = tuple(_as_point(p) for p in points)
    n = len(pts)
    if n < 3:
        raise ValueError("need at least three points")
    inf_i = next((i for i, p in enumerate(pts) if is_infinite(p)), None)
    order = [i for i in range(n) if i != inf_i] + ([inf_i] if inf_i is not None else [])
    close, adjust = order[-1], order[-2]
    lam = [complex(l) for l in lam]
    for _ in range(100):
        res = np.zeros((n, 2, 2), dtype=complex)
        for i in order[:-2]:
            g = _random_conjugator(rng)
            res[i] = g @ np.diag([lam[i], -lam[i]]) @ np.linalg.inv(g)
        s = res.sum(axis=0)
        a = complex(rng.standard_normal() + 1j * rng.standard_normal()) * 0.5
        k = lam[adjust] ** 2 - a * a
        c0 = lam[close] ** 2 - (s[0, 0] + a) ** 2
        # (s01 + b)(s10 + k/b) = c0  ->  s10 b^2 + (k + s01 s10 - c0) b + s01 k = 0
        roots = np.roots([s[1, 0], k + s[0, 1] * s[1, 0] - c0, s[0, 1] * k])
        roots = [b for b in roots if abs(b) > 1e-3]
        if not roots:
            continue
        b = roots[int(rng.integers(len(roots)))]
        res[adjust] = [[a, b], [k / b, -a]]
        res[close] = -(s + res[adjust])
        if np.max(np.abs(res)) > 50:
            continue
        system = FuchsianSystem(pts, res)
        lines = [eigenline(res[i], lam[i], 1e-6) for i in range(n)]
        if any(l is None for l in lines):
            continue
        return ParabolicConnection.build(system, lam, mu=[0] * n, deg_l=0, lines=lines)
    raise RuntimeError("could not build a random system with the requested exponents")
