"""Trace coordinates on SL2 tuples, the Fricke cubic and fiber sampling."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import FiberSamplingError, ValidationError

I2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class RepTuple:
    """``(M_1, ..., M_{n-1})`` in SL2; the last matrix is implied by the product."""

    matrices: np.ndarray
    tol: float = 1e-8

    def __post_init__(self):
        m = np.array(self.matrices, dtype=complex)
        if m.ndim != 3 or m.shape[1:] != (2, 2):
            raise ValidationError("a representation tuple is a list of 2x2 matrices")
        dets = np.linalg.det(m) if len(m) else np.zeros(0)
        bad = [k for k, d in enumerate(dets) if abs(d - 1) > self.tol * max(1.0, np.abs(m[k]).max() ** 2)]
        if bad:
            raise ValidationError(f"matrices {bad} do not have determinant 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrices", m)

    @property
    def n(self) -> int:
        """Number of marked points (one more than the number of matrices)."""
        return len(self.matrices) + 1

    def __len__(self):
        return len(self.matrices)

    def __getitem__(self, k):
        return self.matrices[k]

    def product(self) -> np.ndarray:
        return _prod(self.matrices)

    def last(self) -> np.ndarray:
        return sl2_inverse(self.product())

    def conjugate(self, g) -> "RepTuple":
        g = np.asarray(g, dtype=complex)
        gi = np.linalg.inv(g)
        return RepTuple(np.array([g @ m @ gi for m in self.matrices]), self.tol)


def _as_rep(rep) -> np.ndarray:
    if isinstance(rep, RepTuple):
        return rep.matrices
    return np.array(rep, dtype=complex).reshape(-1, 2, 2)


def _prod(mats: Iterable[np.ndarray]) -> np.ndarray:
    out = I2.copy()
    for m in mats:
        out = out @ m
    return out


def sl2_inverse(m: np.ndarray) -> np.ndarray:
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det


# ---------------------------------------------------------------------------
# fingerprints

@dataclass(frozen=True)
class TraceCoordinates:
    """Traces of degree at most three.

    ``singles`` holds ``a_1..a_n`` where ``a_n`` is the trace of the
    inverse product.  ``pairs`` and ``triples`` are keyed by 1-based
    index tuples over the ``n - 1`` generators.
    """

    singles: np.ndarray
    pairs: dict = field(default_factory=dict)
    triples: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.singles)

    @property
    def fricke_x(self) -> np.ndarray:
        """``(x_1, x_2, x_3) = (tr M2M3, tr M3M1, tr M1M2)`` for four points."""
        if self.n != 4:
            raise ValidationError("Fricke coordinates need exactly four points")
        return np.array([self.pairs[(2, 3)], self.pairs[(1, 3)], self.pairs[(1, 2)]])

    def entries(self) -> list[tuple[str, complex]]:
        out = [(f"a{i + 1}", complex(v)) for i, v in enumerate(self.singles)]
        out += [("tr" + "".join(f"M{i}" for i in key), complex(v)) for key, v in sorted(self.pairs.items())]
        out += [("tr" + "".join(f"M{i}" for i in key), complex(v)) for key, v in sorted(self.triples.items())]
        return out

    def vector(self) -> np.ndarray:
        return np.array([v for _, v in self.entries()])

    def distance(self, other: "TraceCoordinates") -> float:
        if self.n != other.n:
            raise ValidationError("fingerprints of different length")
        return float(np.max(np.abs(self.vector() - other.vector())))


def invariant_fingerprint(rep) -> TraceCoordinates:
    mats = _as_rep(rep)
    m = len(mats)
    singles = [np.trace(x) for x in mats] + [np.trace(sl2_inverse(_prod(mats)))]
    pairs = {(i + 1, j + 1): np.trace(mats[i] @ mats[j])
             for i, j in itertools.combinations(range(m), 2)}
    triples = {(i + 1, j + 1, k + 1): np.trace(mats[i] @ mats[j] @ mats[k])
               for i, j, k in itertools.combinations(range(m), 3)}
    return TraceCoordinates(np.array(singles, dtype=complex), pairs, triples)


def jordan_equivalent(rep1, rep2, tol: float = 1e-8) -> bool:
    """Equality of trace coordinates, i.e. of semisimplifications.

    A non-semisimple tuple and its semisimplification compare equal.
    """
    f1, f2 = invariant_fingerprint(rep1), invariant_fingerprint(rep2)
    if f1.n != f2.n:
        return False
    scale = max(1.0, float(np.max(np.abs(f1.vector()))))
    return f1.distance(f2) <= tol * scale


def mu_map(lam: Sequence) -> np.ndarray:
    """``a_i = 2 cos(2 pi lam_i)``."""
    return 2 * np.cos(2 * np.pi * np.asarray([complex(x) for x in lam]))


# ---------------------------------------------------------------------------
# Fricke cubic

def theta_coefficients(a: Sequence) -> tuple:
    a1, a2, a3, a4 = (complex(x) for x in a)
    return (a1 * a4 + a2 * a3,
            a2 * a4 + a3 * a1,
            a3 * a4 + a1 * a2,
            a1 * a2 * a3 * a4 + a1 ** 2 + a2 ** 2 + a3 ** 2 + a4 ** 2 - 4)


@dataclass(frozen=True)
class FrickeData:
    a: tuple

    @property
    def theta(self) -> tuple:
        return theta_coefficients(self.a)

    def __call__(self, x) -> complex:
        return fricke_eval(x, self.a)

    def gradient(self, x) -> np.ndarray:
        return _fricke_grad(np.asarray(x, dtype=complex), np.asarray(self.theta))


def fricke_eval(x: Sequence, a: Sequence) -> complex:
    x1, x2, x3 = (complex(v) for v in x)
    t1, t2, t3, t4 = theta_coefficients(a)
    return x1 * x2 * x3 + x1 ** 2 + x2 ** 2 + x3 ** 2 - t1 * x1 - t2 * x2 - t3 * x3 + t4


def _fricke_grad(x: np.ndarray, th: np.ndarray) -> np.ndarray:
    return np.array([x[1] * x[2] + 2 * x[0] - th[0],
                     x[2] * x[0] + 2 * x[1] - th[1],
                     x[0] * x[1] + 2 * x[2] - th[2]])


def _fricke_hess(x: np.ndarray) -> np.ndarray:
    return np.array([[2, x[2], x[1]], [x[2], 2, x[0]], [x[1], x[0], 2]], dtype=complex)


def _newton_critical(x: np.ndarray, th: np.ndarray, max_iter: int = 200) -> np.ndarray | None:
    for _ in range(max_iter):
        g = _fricke_grad(x, th)
        try:
            dx = np.linalg.lstsq(_fricke_hess(x), g, rcond=None)[0]
        except np.linalg.LinAlgError:
            return None
        x = x - dx
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > 1e6:
            return None
        if np.max(np.abs(dx)) <= 1e-15 * (1 + np.max(np.abs(x))):
            break
    return x


def _seeds(rng: np.random.Generator) -> list[np.ndarray]:
    grid = np.linspace(-3.0, 3.0, 5)
    out = [np.array(p, dtype=complex) for p in itertools.product(grid, grid, grid)]
    for _ in range(25):
        out.append(rng.uniform(-3, 3, 3) + 1j * rng.uniform(-3, 3, 3))
    return out


def find_fricke_singular_points(a: Sequence, tol: float = 1e-8, seed: int = 0) -> list[np.ndarray]:
    """Singular points of the Fricke cubic surface for the given ``a``."""
    th = np.array(theta_coefficients(a))
    scale = 1.0 + float(np.max(np.abs(th)))
    found: list[np.ndarray] = []
    for x0 in _seeds(np.random.default_rng(seed)):
        x = _newton_critical(x0, th)
        if x is None:
            continue
        xs = 1.0 + float(np.max(np.abs(x)))
        if np.max(np.abs(_fricke_grad(x, th))) > tol * xs * scale:
            continue
        if abs(fricke_eval(x, a)) > tol * xs ** 2 * scale:
            continue
        x = np.where(np.abs(x.imag) <= 1e-12 * xs, x.real, x)
        if not any(np.max(np.abs(x - y)) < 1e-6 for y in found):
            found.append(x)
    found.sort(key=lambda p: tuple(np.round(np.concatenate([p.real, p.imag]), 9)))
    return found


# ---------------------------------------------------------------------------
# fiber sampling

def _random_with_trace(a: complex, rng: np.random.Generator) -> np.ndarray:
    while True:
        s = complex(rng.normal(), rng.normal())
        t = complex(rng.normal(), rng.normal())
        if abs(t) > 0.3:
            break
    u = (s * (a - s) - 1) / t
    return np.array([[s, t], [u, a - s]])


def fiber_residual(rep, a: Sequence) -> float:
    """Largest deviation of the single traces of ``rep`` from ``a``."""
    mats = _as_rep(rep)
    a = np.asarray([complex(x) for x in a])
    if len(a) != len(mats) + 1:
        raise ValidationError("need one trace per point")
    got = np.array([np.trace(m) for m in mats] + [np.trace(_prod(mats))])
    want = a.copy()
    # tr(M_1...M_{n-1}) equals tr of its SL2 inverse
    return float(np.max(np.abs(got - want)))


def _solve_first(a1: complex, an: complex, p: np.ndarray, rng: np.random.Generator):
    f1, f2, f3, f4 = p[0, 0], p[0, 1], p[1, 0], p[1, 1]
    c = np.array([f1 - f4, f3, f2])
    d = an - a1 * f4
    piv = int(np.argmax(np.abs(c)))
    if abs(c[piv]) < 1e-12 * max(1.0, float(np.max(np.abs(p)))):
        return None, {"plane": c.tolist(), "rhs": complex(d)}
    others = [k for k in range(3) if k != piv]
    free, var = others if rng.random() < 0.5 else others[::-1]
    v_free = complex(rng.normal(), rng.normal())

    def point(x):
        v = np.zeros(3, dtype=complex)
        v[free] = v_free
        v[var] = x
        v[piv] = (d - c[free] * v_free - c[var] * x) / c[piv]
        return v

    def quad(x):
        s, t, u = point(x)
        return s * (a1 - s) - t * u - 1

    q0, q1, qm = quad(0.0), quad(1.0), quad(-1.0)
    coeffs = np.array([(q1 + qm) / 2 - q0, (q1 - qm) / 2, q0])
    if np.max(np.abs(coeffs[:2])) < 1e-10 * max(1.0, abs(coeffs[2])):
        return None, {"plane": c.tolist(), "rhs": complex(d), "conic": coeffs.tolist()}
    roots = np.roots(coeffs) if abs(coeffs[0]) > 1e-14 * np.max(np.abs(coeffs)) else np.array([-coeffs[2] / coeffs[1]])
    x = roots[rng.integers(len(roots))]
    for _ in range(3):
        h = 1e-6 * max(1.0, abs(x))
        dq = (quad(x + h) - quad(x - h)) / (2 * h)
        if dq == 0:
            break
        x = x - quad(x) / dq
    s, t, u = point(x)
    return np.array([[s, t], [u, a1 - s]]), None


def sample_fiber_point(a: Sequence, seed=None, retries: int = 32, tol: float = 1e-10) -> RepTuple:
    """A tuple ``(M_1, ..., M_{n-1})`` with ``tr M_i = a_i`` and ``tr(M_1...M_{n-1}) = a_n``."""
    a = [complex(x) for x in a]
    n = len(a)
    if n < 3:
        raise ValidationError("fiber sampling needs at least three points")
    rng = np.random.default_rng(seed)
    witness = None
    for _ in range(retries):
        rest = [_random_with_trace(a[k], rng) for k in range(1, n - 1)]
        m1, witness = _solve_first(a[0], a[-1], _prod(rest), rng)
        if m1 is None:
            continue
        mats = np.array([m1] + rest)
        scale = max(1.0, float(np.max(np.abs(mats)))) ** (n - 1)
        if fiber_residual(mats, a) <= tol * scale and abs(np.linalg.det(m1) - 1) <= tol * scale:
            return RepTuple(mats)
        witness = {"residual": fiber_residual(mats, a)}
    raise FiberSamplingError(f"no fiber point found after {retries} draws", witness)


# ---------------------------------------------------------------------------
# multilinearity and braids

def multiaffine_check(rep, i: int, entries: Sequence[tuple[int, int]] | None = None,
                      h: float = 1.0, power: int = 1) -> float:
    """Largest second difference of ``tr(M_1...M_{n-1})**power`` in entries of ``M_i``.

    ``i`` is 1-based.  With ``power=1`` the result vanishes up to roundoff.
    """
    mats = np.array(_as_rep(rep), dtype=complex)
    k = i - 1
    if not 0 <= k < len(mats):
        raise ValidationError("matrix index out of range")
    entries = entries if entries is not None else [(0, 0), (0, 1), (1, 0), (1, 1)]
    worst = 0.0
    for r, c in entries:
        s = mats[k, r, c]

        def g(v):
            m = mats.copy()
            m[k, r, c] = v
            return np.trace(_prod(m)) ** power

        worst = max(worst, abs(g(s + h) - 2 * g(s) + g(s - h)))
    return float(worst)


def braid_act(rep, k: int, inverse: bool = False) -> RepTuple | np.ndarray:
    """Hurwitz move on positions ``k, k+1`` (1-based)."""
    mats = np.array(_as_rep(rep), dtype=complex)
    if not 1 <= k <= len(mats) - 1:
        raise ValidationError("braid generator index out of range")
    x, y = mats[k - 1].copy(), mats[k].copy()
    if inverse:
        mats[k - 1], mats[k] = y, sl2_inverse(y) @ x @ y
    else:
        mats[k - 1], mats[k] = x @ y @ sl2_inverse(x), x
    return RepTuple(mats) if isinstance(rep, RepTuple) else mats
