"""Isomonodromic deformations: the Schlesinger system and its checks.

Moving the finite poles with velocities ``v_k = dt_k/ds`` deforms the
residues by

    dA_i/ds = sum_{k != i} (v_k - v_i) [A_i, A_k] / (t_i - t_k),

which keeps the monodromy of ``dY/dz = A(z) Y`` constant.  A pole at
infinity stays fixed and its residue ``-sum A_i`` is conserved.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .character import TraceCoordinates, invariant_fingerprint
from .errors import PoleCollision, StepUnderflow, ValidationError
from .fuchsian import ExponentBookkeeping, FuchsianSystem
from .integrate import StepStats, integrate
from .monodromy import (
    DEFAULT_ODE_TOL,
    auto_basepoint,
    canonical_loops,
    compute_monodromy,
    verification_tolerance,
)

COLLISION_FACTOR = 1e-3


@dataclass(frozen=True, eq=False)
class SchlesingerState:
    """Finite pole positions and their residues; optionally an extra pole at infinity."""

    times: np.ndarray
    residues: np.ndarray
    with_infinity: bool = False

    def __post_init__(self):
        t = np.array(self.times, dtype=complex).reshape(-1)
        a = np.array(self.residues, dtype=complex).reshape(len(t), 2, 2)
        if not np.all(np.isfinite(t)):
            raise ValidationError("flow states hold finite poles only")
        for i, j in itertools.combinations(range(len(t)), 2):
            if t[i] == t[j]:
                raise ValidationError(f"duplicate marked point: points[{i}] and points[{j}]")
        t.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "residues", a)

    @classmethod
    def from_system(cls, system: FuchsianSystem) -> "SchlesingerState":
        inf_i = system.infinity_index
        if inf_i is not None and inf_i != system.n - 1:
            raise ValidationError("a point at infinity must be listed last")
        return cls(system.finite_points, system.finite_residues, inf_i is not None)

    def system(self) -> FuchsianSystem:
        pts = list(self.times) + ([np.inf] if self.with_infinity else [])
        res = list(self.residues) + ([np.zeros((2, 2))] if self.with_infinity else [])
        return FuchsianSystem(tuple(pts), np.array(res))

    @property
    def min_gap(self) -> float:
        t = self.times
        return min((abs(t[i] - t[j]) for i, j in itertools.combinations(range(len(t)), 2)), default=np.inf)


@dataclass(frozen=True)
class FlowPath:
    """Piecewise-linear curve through ``waypoints`` (rows of finite pole
    positions), traversed with ``s`` in [0, 1], each leg taking equal time."""

    waypoints: np.ndarray

    def __post_init__(self):
        w = np.array(self.waypoints, dtype=complex)
        if w.ndim != 2 or len(w) < 2:
            raise ValidationError("a flow path needs at least two waypoints")
        w.setflags(write=False)
        object.__setattr__(self, "waypoints", w)

    @classmethod
    def move(cls, times: Sequence, k: int, target: complex) -> "FlowPath":
        """Straight motion of pole ``k`` to ``target``; the others stay put."""
        t0 = np.array(times, dtype=complex)
        t1 = t0.copy()
        t1[k] = target
        return cls(np.array([t0, t1]))

    @property
    def legs(self) -> int:
        return len(self.waypoints) - 1

    def knots(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.legs + 1)

    def at(self, s: float) -> np.ndarray:
        m = min(int(s * self.legs), self.legs - 1)
        u = s * self.legs - m
        return self.waypoints[m] + u * (self.waypoints[m + 1] - self.waypoints[m])

    def velocity(self, s: float) -> np.ndarray:
        m = min(int(s * self.legs), self.legs - 1)
        return self.legs * (self.waypoints[m + 1] - self.waypoints[m])

    def reversed(self) -> "FlowPath":
        return FlowPath(self.waypoints[::-1])

    def closest_approach(self) -> tuple[float, float, tuple[int, int]]:
        """``(distance, s, pair)`` for the smallest pole separation along the path."""
        best = (np.inf, 0.0, (0, 0))
        knots = self.knots()
        n = self.waypoints.shape[1]
        for m in range(self.legs):
            a, b = self.waypoints[m], self.waypoints[m + 1]
            for i, j in itertools.combinations(range(n), 2):
                d0 = a[i] - a[j]
                dd = (b[i] - b[j]) - d0
                u = 0.0 if dd == 0 else min(1.0, max(0.0, -(d0 * np.conj(dd)).real / abs(dd) ** 2))
                dist = abs(d0 + u * dd)
                if dist < best[0]:
                    best = (dist, knots[m] + u * (knots[m + 1] - knots[m]), (i, j))
        return best


@dataclass
class FlowResult:
    s: np.ndarray                 # (m,)
    times: np.ndarray             # (m, n)
    residues: np.ndarray          # (m, n, 2, 2)
    eig_drift: np.ndarray         # (m,) largest eigenvalue deviation so far
    final: SchlesingerState
    stats: StepStats
    trace_drift: np.ndarray | None = None
    notes: list = field(default_factory=list)

    @property
    def max_eig_drift(self) -> float:
        return float(np.max(self.eig_drift))


def _commutator(a, b):
    return a @ b - b @ a


def schlesinger_rhs(state: SchlesingerState, direction) -> np.ndarray:
    """``dA_i/ds`` when pole ``direction`` moves with unit speed.

    ``direction`` may also be a full velocity vector for all finite poles.
    """
    t = state.times
    n = len(t)
    if np.ndim(direction) == 0:
        k = int(direction)
        if not 0 <= k < n:
            raise ValidationError(f"pole index {k} out of range")
        v = np.zeros(n, dtype=complex)
        v[k] = 1.0
    else:
        v = np.asarray(direction, dtype=complex)
    return _rhs(t, state.residues, v)


def _rhs(t, a, v) -> np.ndarray:
    n = len(t)
    out = np.zeros_like(a)
    for i, k in itertools.combinations(range(n), 2):
        dv = v[k] - v[i]
        if dv == 0:
            continue
        term = _commutator(a[i], a[k]) * (dv / (t[i] - t[k]))
        # the (k, i) term is [A_k, A_i] (v_i - v_k)/(t_k - t_i) = -term
        out[i] += term
        out[k] -= term
    return out


def eigenvalue_deviation(a0: np.ndarray, a: np.ndarray) -> float:
    """Largest distance between matched eigenvalues of corresponding residues."""
    worst = 0.0
    for x, y in zip(a0, a):
        e0 = np.linalg.eigvals(x)
        e1 = np.linalg.eigvals(y)
        d = min(max(abs(e0[0] - e1[0]), abs(e0[1] - e1[1])), max(abs(e0[0] - e1[1]), abs(e0[1] - e1[0])))
        worst = max(worst, d)
    return worst


def integrate_flow(state: SchlesingerState, path: FlowPath, tol: float = DEFAULT_ODE_TOL,
                   max_samples: int | None = None) -> FlowResult:
    """Carry the residues along ``path`` by the Schlesinger equations."""
    n = len(state.times)
    if path.waypoints.shape[1] != n:
        raise ValidationError("path and state have different numbers of poles")
    if np.max(np.abs(path.waypoints[0] - state.times)) > 1e-12 * max(1.0, float(np.max(np.abs(state.times)))):
        raise ValidationError("path does not start at the state's pole positions")
    radius = COLLISION_FACTOR * state.min_gap
    dist, s_star, pair = path.closest_approach()
    if dist <= radius:
        raise PoleCollision(f"poles {pair[0]} and {pair[1]} come within {dist:.3g} at s={s_star:.6g}",
                            s=s_star, pair=pair)

    a0 = np.array(state.residues)
    samples_s = [0.0]
    samples_a = [a0.copy()]
    stats = StepStats()
    y = a0.reshape(-1)
    knots = path.knots()

    def record(s, yv):
        samples_s.append(s)
        samples_a.append(yv.reshape(n, 2, 2).copy())

    for m in range(path.legs):
        v = path.velocity(0.5 * (knots[m] + knots[m + 1]))

        def fun(s, yv, v=v):
            return _rhs(path.at(s), yv.reshape(n, 2, 2), v).reshape(-1)

        try:
            y = integrate(fun, y, knots[m], knots[m + 1], tol, stats=stats, on_step=record)
        except StepUnderflow as exc:
            raise StepUnderflow(f"flow blew up near s={exc.s:.12g}", s=exc.s) from exc

    s_arr = np.array(samples_s)
    a_arr = np.array(samples_a)
    if max_samples is not None and len(s_arr) > max_samples:
        keep = np.unique(np.linspace(0, len(s_arr) - 1, max_samples).round().astype(int))
        s_arr, a_arr = s_arr[keep], a_arr[keep]
    t_arr = np.array([path.at(s) for s in s_arr])
    drift = np.maximum.accumulate([eigenvalue_deviation(a0, a) for a in a_arr])
    final = SchlesingerState(path.waypoints[-1], a_arr[-1], state.with_infinity)
    return FlowResult(s_arr, t_arr, a_arr, drift, final, stats)


# ---------------------------------------------------------------------------
# verification


@dataclass
class DriftReport:
    drift: float
    entries: list                     # (name, before, after)
    before: TraceCoordinates
    after: TraceCoordinates
    basepoint: complex

    @property
    def worst_entry(self) -> str:
        return max(self.entries, key=lambda e: abs(e[2] - e[1]))[0]


def shared_basepoint(*states: SchlesingerState) -> complex:
    """A basepoint placed below every configuration at once."""
    pts = np.concatenate([s.times for s in states])
    return auto_basepoint(list(dict.fromkeys(pts.tolist())))


def verify_isomonodromy(initial: SchlesingerState, final: SchlesingerState, loops: str = "shared",
                        tol: float = DEFAULT_ODE_TOL, verify_tol: float | None = None,
                        book: ExponentBookkeeping | None = None) -> DriftReport:
    """Largest change of any trace coordinate between two states.

    ``loops="shared"`` builds both loop systems from one basepoint below
    both configurations; ``"separate"`` lets each state choose its own.
    """
    verify_tol = verification_tolerance() if verify_tol is None else verify_tol
    if loops == "shared":
        b = shared_basepoint(initial, final)
        bases = (b, b)
    elif loops == "separate":
        bases = (None, None)
    else:
        raise ValidationError(f"unknown loops policy {loops!r}")
    fps = []
    for st, b in zip((initial, final), bases):
        sysm = st.system()
        lb = canonical_loops(sysm.points, b)
        rep = compute_monodromy(sysm, book, lb, tol, verify_tol)
        fps.append((invariant_fingerprint(rep.rep_tuple()), lb.basepoint))
    (f0, b0), (f1, _) = fps
    entries = [(name, v0, v1) for (name, v0), (_, v1) in zip(f0.entries(), f1.entries())]
    return DriftReport(f0.distance(f1), entries, f0, f1, b0)


def fingerprint_series(result: FlowResult, stride: int = 1, tol: float = DEFAULT_ODE_TOL,
                       verify_tol: float | None = None) -> np.ndarray:
    """Trace drift against the first sample at every ``stride``-th sample (NaN elsewhere)."""
    verify_tol = verification_tolerance() if verify_tol is None else verify_tol
    states = [SchlesingerState(t, a, result.final.with_infinity)
              for t, a in zip(result.times, result.residues)]
    b = shared_basepoint(*states[::stride], states[-1])
    base = None
    out = np.full(len(states), np.nan)
    for k, st in enumerate(states):
        if k % stride and k != len(states) - 1:
            continue
        sysm = st.system()
        rep = compute_monodromy(sysm, None, canonical_loops(sysm.points, b), tol, verify_tol)
        fp = invariant_fingerprint(rep.rep_tuple())
        base = fp if base is None else base
        out[k] = base.distance(fp)
    result.trace_drift = out
    return out


# ---------------------------------------------------------------------------
# apparent singularity


@dataclass(frozen=True)
class ApparentPoint:
    s: float
    roots: np.ndarray
    defined: bool

    @property
    def y(self) -> complex:
        return complex(self.roots[0]) if self.defined and len(self.roots) else complex(np.nan, np.nan)


def apparent_numerator(times: Sequence, b: Sequence) -> np.ndarray:
    """Coefficients (highest first) of ``sum_i b_i prod_{j != i} (z - t_j)``."""
    t = np.asarray(times, dtype=complex)
    out = np.zeros(len(t), dtype=complex)
    for i in range(len(t)):
        out += b[i] * np.poly(np.delete(t, i)) if len(t) > 1 else b[i]
    return out


def apparent_roots(times: Sequence, b: Sequence, tol: float = 1e-12) -> tuple[np.ndarray, bool]:
    poly = apparent_numerator(times, b)
    scale = max(1e-300, float(np.max(np.abs(b))) if len(b) else 0.0)
    nz = np.flatnonzero(np.abs(poly) > tol * scale * max(1.0, float(np.max(np.abs(times))) ** (len(times) - 1)))
    if scale <= tol or len(nz) == 0:
        return np.zeros(0, dtype=complex), False
    return np.roots(poly[nz[0]:]), True


def apparent_singularity_trajectory(result: FlowResult, tol: float = 1e-12) -> list[ApparentPoint]:
    """Zeros of the (1,2) entry of ``A(z)`` along the flow, matched for continuity."""
    out: list[ApparentPoint] = []
    prev = None
    for s, t, a in zip(result.s, result.times, result.residues):
        roots, ok = apparent_roots(t, a[:, 0, 1], tol)
        if ok and prev is not None and len(prev) == len(roots) > 1:
            order = []
            left = list(range(len(roots)))
            for p in prev:
                k = min(left, key=lambda q: abs(roots[q] - p))
                order.append(k)
                left.remove(k)
            roots = roots[order]
        if ok:
            prev = roots
        out.append(ApparentPoint(float(s), roots, ok))
    return out
