"""Elementary transformations, Schlesinger gauges and affine symmetry groups.

Group generator labels follow the usual 1-based names (``s0..s4``,
``t+_i``, ``r_k``); point indices in the connection-level functions are
0-based like the rest of the package.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .affine import AffineMap
from .errors import EigenlineIndeterminate, GaugeDegenerate, ValidationError
from .fuchsian import (
    DEFAULT_TOL,
    ExponentBookkeeping,
    FuchsianSystem,
    ParabolicConnection,
    eigenline,
    is_infinite,
    normalize_line,
)

# ---------------------------------------------------------------------------
# bookkeeping


@dataclass(frozen=True)
class ElmPlus:
    i: int


@dataclass(frozen=True)
class ElmMinus:
    i: int


@dataclass(frozen=True)
class Tensor:
    """Twist by a rank-one logarithmic connection of degree ``deg_l1``
    with residue ``nu[i]`` at point ``i``."""

    nu: tuple
    deg_l1: int

    def __post_init__(self):
        object.__setattr__(self, "nu", tuple(self.nu))


@dataclass(frozen=True)
class Swap:
    i: int


TransformKind = Union[ElmPlus, ElmMinus, Tensor, Swap]


@dataclass(frozen=True)
class BookkeepingDelta:
    kind: TransformKind
    lam: tuple
    mu: tuple
    deg_l: int

    def book(self) -> ExponentBookkeeping:
        return ExponentBookkeeping(self.lam, self.mu, self.deg_l)


def _check_index(i: int, n: int):
    if not 0 <= i < n:
        raise ValidationError(f"point index {i} out of range")


def elm_bookkeeping(kind: TransformKind, lam: Sequence, mu: Sequence, deg_l: int) -> BookkeepingDelta:
    lam, mu = list(lam), list(mu)
    n = len(lam)
    if len(mu) != n:
        raise ValidationError("lam and mu must have equal length")
    if isinstance(kind, ElmMinus):
        _check_index(kind.i, n)
        lam[kind.i] = 1 + mu[kind.i] - lam[kind.i]
        mu[kind.i] = mu[kind.i] + 1
        deg_l -= 1
    elif isinstance(kind, ElmPlus):
        _check_index(kind.i, n)
        lam[kind.i] = mu[kind.i] - lam[kind.i]
        mu[kind.i] = mu[kind.i] - 1
        deg_l += 1
    elif isinstance(kind, Tensor):
        if len(kind.nu) != n:
            raise ValidationError("tensor twist needs one residue per point")
        if sum(kind.nu) != -kind.deg_l1:
            raise ValidationError("residues of the twist must sum to minus its degree")
        lam = [l + v for l, v in zip(lam, kind.nu)]
        mu = [m + 2 * v for m, v in zip(mu, kind.nu)]
        deg_l += 2 * kind.deg_l1
    elif isinstance(kind, Swap):
        _check_index(kind.i, n)
        lam[kind.i] = mu[kind.i] - lam[kind.i]
    else:
        raise ValidationError(f"unknown transformation {kind!r}")
    return BookkeepingDelta(kind, tuple(lam), tuple(mu), deg_l)


def swap_parabolic(conn: ParabolicConnection, i: int, tol: float = DEFAULT_TOL) -> ParabolicConnection:
    """Mark the other eigenline at point ``i``; identity when the exponents coincide."""
    _check_index(i, conn.n)
    lam = complex(conn.book.lam[i])
    other = complex(conn.book.other(i))
    if abs(lam - other) <= tol * max(1.0, abs(lam)):
        return conn
    v = eigenline(conn.system.residues[i], other, tol)
    if v is None:
        raise EigenlineIndeterminate(f"residue at point {i} is numerically scalar")
    delta = elm_bookkeeping(Swap(i), conn.book.lam, conn.book.mu, conn.book.deg_l)
    lines = list(conn.lines)
    lines[i] = v
    return ParabolicConnection(conn.system, delta.book(), tuple(lines), conn.weight)


# ---------------------------------------------------------------------------
# Schlesinger transformations


@dataclass(frozen=True)
class GaugeTransformation:
    """``G(z) = N(z) / d(z)``; ``N`` holds polynomial coefficients in
    ascending powers with shape ``(deg + 1, 2, 2)``."""

    numerator: np.ndarray
    denominator: np.ndarray

    def __call__(self, z: complex) -> np.ndarray:
        zs = z ** np.arange(len(self.numerator))
        return np.tensordot(zs, self.numerator, axes=1) / np.polyval(self.denominator[::-1], z)

    def det_ratio(self, z: complex) -> complex:
        return complex(np.linalg.det(self(z)))

    def inverse_at(self, z: complex) -> np.ndarray:
        return np.linalg.inv(self(z))


@dataclass
class SchlesingerResult:
    system: FuchsianSystem
    book: ExponentBookkeeping
    lines: tuple
    gauge: GaugeTransformation

    def connection(self, weight) -> ParabolicConnection:
        return ParabolicConnection(self.system, self.book, self.lines, weight)

    def __iter__(self):
        return iter((self.system, self.book, self.lines, self.gauge))


def _kernel_line(a, rho, fallback, tol):
    v = eigenline(a, rho, tol)
    return normalize_line(fallback) if v is None else v


def schlesinger_transform(system: FuchsianSystem, book: ExponentBookkeeping, lines: Sequence,
                          i: int, j: int, tol: float = DEFAULT_TOL) -> SchlesingerResult:
    """Degree-preserving gauge ``Elm-(i), Elm-(j), twist by O(t_j)``.

    ``G(z) = (I - P) + (z - t_i)/(z - t_j) P`` where ``P`` projects onto the
    ``mu_i - lam_i`` eigenline at ``t_i`` along the ``mu_j - lam_j``
    eigenline at ``t_j``.  The inverse is ``schlesinger_transform(.., j, i)``.
    """
    n = system.n
    _check_index(i, n)
    _check_index(j, n)
    if i == j:
        raise ValidationError("schlesinger_transform needs two distinct points")
    if is_infinite(system.points[i]) or is_infinite(system.points[j]):
        raise ValidationError("schlesinger_transform needs finite points")
    ti, tj = complex(system.points[i]), complex(system.points[j])
    res = system.residues
    rho_i, rho_j = complex(book.other(i)), complex(book.other(j))
    r = eigenline(res[i], rho_i, tol)
    if r is None:
        r = normalize_line(lines[i])
    k = eigenline(res[j], rho_j, tol)
    if k is None:
        k = normalize_line(lines[j])
    s = np.column_stack([r / np.linalg.norm(r), k / np.linalg.norm(k)])
    if abs(np.linalg.det(s)) <= tol:
        raise GaugeDegenerate(f"eigenlines at points {i} and {j} coincide")
    si = np.linalg.inv(s)
    hat = si @ res @ s
    fin = system.finite_indices

    new = np.empty_like(hat)
    for l in fin:
        if l == i:
            low = (ti - tj) * sum(hat[m, 1, 0] / (ti - complex(system.points[m])) for m in fin if m != i)
            new[l] = [[hat[i, 0, 0] + 1, 0], [low, hat[i, 1, 1]]]
        elif l == j:
            up = (tj - ti) * sum(hat[m, 0, 1] / (tj - complex(system.points[m])) for m in fin if m != j)
            new[l] = [[hat[j, 0, 0] - 1, up], [0, hat[j, 1, 1]]]
        else:
            tl = complex(system.points[l])
            f = (tl - ti) / (tl - tj)
            new[l] = [[hat[l, 0, 0], f * hat[l, 0, 1]], [hat[l, 1, 0] / f, hat[l, 1, 1]]]
    inf_i = system.infinity_index
    if inf_i is not None:
        new[inf_i] = hat[inf_i]
    out_res = s @ new @ si
    out_sys = FuchsianSystem(system.points, out_res)

    lam, mu = list(book.lam), list(book.mu)
    lam[i], mu[i] = 1 + mu[i] - lam[i], mu[i] + 1
    lam[j], mu[j] = mu[j] - lam[j], mu[j] - 1
    out_book = ExponentBookkeeping(tuple(lam), tuple(mu), book.deg_l)

    p = np.outer(s[:, 0], si[0, :])
    eye = np.eye(2)
    num = np.array([-(tj * (eye - p) + ti * p), eye], dtype=complex)
    gauge = GaugeTransformation(num, np.array([-tj, 1.0], dtype=complex))

    out_lines = []
    for l in range(n):
        if l == i:
            out_lines.append(_kernel_line(out_res[l], complex(lam[l]), s[:, 0], tol))
        elif l == j:
            out_lines.append(_kernel_line(out_res[l], complex(lam[l]), s[:, 1], tol))
        elif is_infinite(system.points[l]):
            out_lines.append(normalize_line(lines[l]))
        else:
            out_lines.append(normalize_line(gauge(complex(system.points[l])) @ lines[l]))
    return SchlesingerResult(out_sys, out_book, tuple(out_lines), gauge)


# ---------------------------------------------------------------------------
# W(D4^(1)) and BL_n


def weyl_generator(k: int) -> AffineMap:
    """Generator ``s_k`` of W(D4^(1)) acting on four exponents; ``s_0`` is the central node."""
    if k == 0:
        lin = [[int(r == c) - Fraction(1, 2) for c in range(4)] for r in range(4)]
        return AffineMap.from_rows(lin, [Fraction(1, 2)] * 4)
    if 1 <= k <= 4:
        lin = [[(-1 if r == c == k - 1 else int(r == c)) for c in range(4)] for r in range(4)]
        return AffineMap.from_rows(lin, [0] * 4)
    raise ValidationError(f"no Weyl generator s{k}")


DYNKIN_EDGES = frozenset({(0, 1), (0, 2), (0, 3), (0, 4)})


def coxeter_order(j: int, k: int) -> int:
    if j == k:
        return 1
    return 3 if (min(j, k), max(j, k)) in DYNKIN_EDGES else 2


def _parse_weyl_word(word) -> list[int]:
    if isinstance(word, str):
        return [int(x) for x in re.findall(r"s?(\d)", word.replace(" ", ""))]
    return [int(x) for x in word]


def weyl_map(word) -> AffineMap:
    """Affine map of a word; letters act left to right (the first letter acts first)."""
    out = AffineMap.identity(4)
    for k in _parse_weyl_word(word):
        out = weyl_generator(k) @ out
    return out


def weyl_apply(word, lam: Sequence) -> tuple:
    if len(lam) != 4:
        raise ValidationError("the Weyl group acts on four exponents")
    return weyl_map(word)(tuple(lam))


@dataclass(frozen=True)
class BLGenerator:
    """``kind`` is one of ``"t+"``, ``"t+2"`` (``t+_{ij}``), ``"t-"``, ``"r"``;
    indices are 1-based labels."""

    kind: str
    i: int
    j: int | None = None

    def __str__(self):
        if self.kind == "t+2":
            return f"t+{self.i},{self.j}"
        if self.kind == "t-":
            return f"t-{self.i},{self.j}"
        return f"{self.kind}{self.i}"


def parse_bl(text: str) -> BLGenerator:
    m = re.fullmatch(r"\s*(t\+|t-|r)\s*_?\{?(\d+)(?:\s*,\s*(\d+))?\}?\s*", text)
    if not m:
        raise ValidationError(f"cannot parse generator {text!r}")
    kind, i, j = m.group(1), int(m.group(2)), m.group(3)
    if kind == "t+" and j is not None:
        return BLGenerator("t+2", i, int(j))
    if kind == "t-":
        if j is None:
            raise ValidationError("t- needs two indices")
        return BLGenerator("t-", i, int(j))
    if j is not None:
        raise ValidationError(f"{kind} takes one index")
    return BLGenerator(kind, i)


def bl_generator(gen: BLGenerator | str, n: int) -> AffineMap:
    g = parse_bl(gen) if isinstance(gen, str) else gen
    idx = [g.i] + ([g.j] if g.j is not None else [])
    if any(not 1 <= x <= n for x in idx):
        raise ValidationError(f"generator {g} out of range for n={n}")
    if g.j is not None and not g.i < g.j:
        raise ValidationError(f"generator {g} needs i < j")
    lin = [[int(r == c) for c in range(n)] for r in range(n)]
    sh = [Fraction(0)] * n
    a, b = g.i - 1, (g.j - 1 if g.j is not None else None)
    if g.kind == "t+":
        sh[a] = Fraction(1)
    elif g.kind == "t+2":
        sh[a] = sh[b] = Fraction(1, 2)
    elif g.kind == "t-":
        lin[a][a] = lin[b][b] = -1
        sh[a] = Fraction(1, 2)
        sh[b] = Fraction(3, 2) if g.j == n else Fraction(1, 2)
    elif g.kind == "r":
        lin[a][a] = -1
        if g.i == n:
            sh[a] = Fraction(1)
    else:
        raise ValidationError(f"unknown generator kind {g.kind!r}")
    return AffineMap.from_rows(lin, sh)


def bl_apply(gen, lam: Sequence) -> tuple:
    """Apply one generator (or a list of them, first one first)."""
    gens = [gen] if isinstance(gen, (str, BLGenerator)) else list(gen)
    out = tuple(lam)
    for g in gens:
        out = bl_generator(g, len(lam))(out)
    return out
