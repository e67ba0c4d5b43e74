"""JSON system files and CSV emitters.

A system file looks like::

    {
      "version": 1,
      "points": [[0, 0], [1, 0], [2, 0], "inf"],
      "residues": [M0, M1, M2, null],
      "lambda": [0.25, "1/3", [0.1, 0.2], 0.4],
      "mu": [0, 0, 0, 0],
      "degL": 0,
      "lines": [[[1, 0], [0, 0]], ...],
      "weight": [[1, 9], [2, 9], ...],
      "tolerances": {"integrality": 1e-8, "ode": 1e-10, "verify": 1e-6}
    }

Complex numbers are ``[re, im]`` pairs, matrices are nested row lists of
such pairs, weights are ``[num, den]`` pairs and exact rational
exponents are strings ``"p/q"``.  Everything after ``lambda`` is optional.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .fuchsian import (
    DEFAULT_TOL,
    FuchsianSystem,
    ParabolicConnection,
    Weight,
    is_infinite,
    validate_connection,
)
from .monodromy import DEFAULT_ODE_TOL, verification_tolerance

FORMAT_VERSION = 1


@dataclass(frozen=True)
class Tolerances:
    integrality: float = DEFAULT_TOL
    ode: float = DEFAULT_ODE_TOL
    verify: float = field(default_factory=verification_tolerance)


@dataclass
class SystemFile:
    connection: ParabolicConnection
    tolerances: Tolerances
    digest: str
    defaults: list[str]


class _Path:
    """Field path used in error messages, e.g. ``residues[1][0][1]``."""

    def __init__(self, parts=()):
        self.parts = tuple(parts)

    def __truediv__(self, key):
        return _Path(self.parts + (key,))

    def __str__(self):
        out = ""
        for p in self.parts:
            out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else p)
        return out or "<root>"


def _fail(path: _Path, msg: str):
    raise ValidationError(f"{path}: {msg}", [f"{path}: {msg}"])


def _real(x, path) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        _fail(path, f"expected a number, got {json.dumps(x)}")
    if not math.isfinite(x):
        _fail(path, "non-finite number")
    return float(x)


def _complex(x, path) -> complex:
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return complex(_real(x, path))
    if isinstance(x, list) and len(x) == 2:
        return complex(_real(x[0], path / 0), _real(x[1], path / 1))
    _fail(path, f"expected [re, im], got {json.dumps(x)}")


def _exponent(x, path):
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            _fail(path, f"cannot read {x!r} as a rational number")
    if isinstance(x, int) and not isinstance(x, bool):
        return Fraction(x)
    if isinstance(x, float):
        return _real(x, path)
    c = _complex(x, path)
    return c.real if c.imag == 0 else c


def _integer(x, path) -> int:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or float(x) != int(x):
        _fail(path, f"expected an integer, got {json.dumps(x)}")
    return int(x)


def _matrix(x, path) -> np.ndarray:
    if not (isinstance(x, list) and len(x) == 2 and all(isinstance(r, list) and len(r) == 2 for r in x)):
        _fail(path, "expected a 2x2 matrix of [re, im] entries")
    return np.array([[_complex(x[r][c], path / r / c) for c in range(2)] for r in range(2)])


def _point(x, path):
    if x == "inf":
        return math.inf
    return _complex(x, path)


def _list(doc, key, path, n=None):
    val = doc[key]
    if not isinstance(val, list):
        _fail(path / key, "expected a list")
    if n is not None and len(val) != n:
        _fail(path / key, f"expected {n} entries, got {len(val)}")
    return val


def load_json(text: str, source: str = "<input>") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}",
                              [f"line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from exc


def connection_from_doc(doc: Any, validate: bool = True) -> tuple[ParabolicConnection, Tolerances, list[str]]:
    root = _Path()
    if not isinstance(doc, dict):
        _fail(root, "expected a JSON object")
    if doc.get("version") != FORMAT_VERSION:
        _fail(root / "version", f"unsupported format version {doc.get('version')!r} (expected {FORMAT_VERSION})")
    for key in ("points", "residues", "lambda"):
        if key not in doc:
            _fail(root / key, "missing required field")
    unknown = set(doc) - {"version", "points", "residues", "lambda", "mu", "degL", "lines", "weight", "tolerances"}
    if unknown:
        _fail(root / sorted(unknown)[0], "unknown field")

    points = [_point(p, root / "points" / k) for k, p in enumerate(_list(doc, "points", root))]
    n = len(points)
    if n < 3:
        _fail(root / "points", "at least three marked points are required")
    infs = [k for k, p in enumerate(points) if is_infinite(p)]
    if len(infs) > 1:
        _fail(root / "points" / infs[1], "at most one point may be at infinity")
    dup = [(i, j) for i in range(n) for j in range(i + 1, n) if points[i] == points[j] and not is_infinite(points[i])]
    if dup:
        i, j = dup[0]
        _fail(root / "points", f"duplicate marked point: points[{i}] and points[{j}]")

    raw_res = _list(doc, "residues", root)
    residues = []
    if len(raw_res) == n:
        for k, r in enumerate(raw_res):
            if is_infinite(points[k]):
                if r is not None:
                    _fail(root / "residues" / k, "the residue at infinity is derived; use null")
                residues.append(np.zeros((2, 2)))
            else:
                residues.append(_matrix(r, root / "residues" / k))
    elif len(raw_res) == n - len(infs):
        it = iter(enumerate(raw_res))
        for p in points:
            if is_infinite(p):
                residues.append(np.zeros((2, 2)))
            else:
                k, r = next(it)
                residues.append(_matrix(r, root / "residues" / k))
    else:
        _fail(root / "residues", f"expected {n} entries, got {len(raw_res)}")
    system = FuchsianSystem(tuple(points), np.array(residues))

    lam = [_exponent(x, root / "lambda" / k) for k, x in enumerate(_list(doc, "lambda", root, n))]
    defaults = []
    mu = None
    if "mu" in doc:
        mu = [_integer(x, root / "mu" / k) for k, x in enumerate(_list(doc, "mu", root, n))]
    else:
        defaults.append("mu")
        mu = []
        for k, a in enumerate(system.residues):
            tr = complex(np.trace(a))
            if abs(tr.imag) > 1e-8 or abs(tr.real - round(tr.real)) > 1e-8:
                _fail(root / "residues" / k, "trace is not an integer, so mu cannot be inferred")
            mu.append(int(round(tr.real)))
    if "degL" in doc:
        deg_l = _integer(doc["degL"], root / "degL")
    else:
        defaults.append("degL")
        deg_l = -sum(mu)
    lines = None
    if "lines" in doc:
        raw = _list(doc, "lines", root, n)
        lines = []
        for k, l in enumerate(raw):
            if not (isinstance(l, list) and len(l) == 2):
                _fail(root / "lines" / k, "expected [u, v] with complex entries")
            v = np.array([_complex(l[c], root / "lines" / k / c) for c in range(2)])
            if not np.any(v):
                _fail(root / "lines" / k, "the zero vector is not a line")
            lines.append(v)
    else:
        defaults.append("lines")
    if "weight" in doc:
        vals = []
        for k, w in enumerate(_list(doc, "weight", root, 2 * n)):
            p = root / "weight" / k
            if isinstance(w, list) and len(w) == 2:
                num, den = _integer(w[0], p / 0), _integer(w[1], p / 1)
                if den == 0:
                    _fail(p, "zero denominator")
                vals.append(Fraction(num, den))
            elif isinstance(w, str):
                vals.append(_exponent(w, p))
            else:
                _fail(p, "expected [num, den]")
        weight = Weight(tuple(vals))
    else:
        defaults.append("weight")
        weight = None
    tols = Tolerances()
    if "tolerances" in doc:
        tb = doc["tolerances"]
        if not isinstance(tb, dict):
            _fail(root / "tolerances", "expected an object")
        bad = set(tb) - {"integrality", "ode", "verify"}
        if bad:
            _fail(root / "tolerances" / sorted(bad)[0], "unknown tolerance")
        vals = {k: _real(v, root / "tolerances" / k) for k, v in tb.items()}
        if any(v <= 0 for v in vals.values()):
            _fail(root / "tolerances", "tolerances must be positive")
        tols = Tolerances(**{**tols.__dict__, **vals})
    else:
        defaults.append("tolerances")

    conn = ParabolicConnection.build(system, lam, mu, deg_l, lines, weight, tol=tols.integrality)
    if validate:
        problems = validate_connection(conn, tols.integrality)
        if problems:
            raise ValidationError("; ".join(problems), problems)
    return conn, tols, defaults


def parse_system_text(text: str, source: str = "<input>", validate: bool = True) -> SystemFile:
    doc = load_json(text, source)
    conn, tols, defaults = connection_from_doc(doc, validate)
    return SystemFile(conn, tols, hashlib.sha256(text.encode()).hexdigest(), defaults)


def parse_system_file(path: str | Path, validate: bool = True) -> SystemFile:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"{p}: {exc.strerror}") from exc
    return parse_system_text(text, str(p), validate)


# ---------------------------------------------------------------------------
# canonical serialization


def _num(x: float):
    x = float(x)
    return int(x) if x.is_integer() and abs(x) < 2 ** 53 else x


def _c(z) -> list:
    z = complex(z)
    return [_num(z.real), _num(z.imag)]


def _lam_out(x):
    if isinstance(x, (int, Fraction)):
        f = Fraction(x)
        return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"
    z = complex(x)
    return _num(z.real) if z.imag == 0 else _c(z)


def connection_to_doc(conn: ParabolicConnection, tols: Tolerances | None = None) -> dict:
    sysm = conn.system
    doc = {
        "version": FORMAT_VERSION,
        "points": ["inf" if is_infinite(p) else _c(p) for p in sysm.points],
        "residues": [None if is_infinite(p) else [[_c(a[r, c]) for c in range(2)] for r in range(2)]
                     for p, a in zip(sysm.points, sysm.residues)],
        "lambda": [_lam_out(x) for x in conn.book.lam],
        "mu": [int(m) for m in conn.book.mu],
        "degL": int(conn.book.deg_l),
        "lines": [[_c(v) for v in l] for l in conn.lines],
        "weight": [[w.numerator, w.denominator] for w in conn.weight.values],
    }
    if tols is not None:
        doc["tolerances"] = {"integrality": tols.integrality, "ode": tols.ode, "verify": tols.verify}
    return doc


def dump_connection(conn: ParabolicConnection, tols: Tolerances | None = None) -> str:
    """Canonical JSON text: one top-level field per line, list entries one per line."""
    doc = connection_to_doc(conn, tols)
    parts = []
    for key, val in doc.items():
        if isinstance(val, list):
            body = ",\n    ".join(json.dumps(v) for v in val)
            parts.append(f'  "{key}": [\n    {body}\n  ]')
        else:
            parts.append(f'  "{key}": {json.dumps(val)}')
    return "{\n" + ",\n".join(parts) + "\n}\n"


def same_connection(a: ParabolicConnection, b: ParabolicConnection) -> bool:
    return (a.system == b.system and a.book == b.book and a.weight == b.weight
            and len(a.lines) == len(b.lines)
            and all(np.array_equal(x, y) for x, y in zip(a.lines, b.lines)))


# ---------------------------------------------------------------------------
# CSV


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def csv_bytes(header: Sequence[str], rows: Iterable[Sequence]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating, int, np.integer)) and not isinstance(v, bool)
                    else v for v in row])
    return buf.getvalue().encode("utf-8")


def _split(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def traces_rows(fp) -> tuple[list[str], list[list]]:
    return ["invariant", "re", "im"], [[name] + _split(v) for name, v in fp.entries()]


def singular_rows(points) -> tuple[list[str], list[list]]:
    header = ["x1_re", "x1_im", "x2_re", "x2_im", "x3_re", "x3_im"]
    return header, [sum((_split(v) for v in p), []) for p in points]


def matrix_rows(mats, labels=None) -> tuple[list[str], list[list]]:
    header = ["index", "m11_re", "m11_im", "m12_re", "m12_im", "m21_re", "m21_im", "m22_re", "m22_im"]
    rows = []
    for k, m in enumerate(mats):
        rows.append([labels[k] if labels else str(k + 1)] + sum((_split(v) for v in np.asarray(m).reshape(4)), []))
    return header, rows


def flow_rows(table: dict) -> tuple[list[str], list[list]]:
    """Rows for the flow CSV from a dict of equal-length columns.

    Expected keys: ``s``, ``t_moving``, ``fingerprints`` (list of
    TraceCoordinates), ``y``, ``eig_drift``, ``trace_drift``.
    """
    fps = table["fingerprints"]
    n = fps[0].n
    header = ["s", "t_moving_re", "t_moving_im"]
    header += [f"a{i}_{p}" for i in range(1, n + 1) for p in ("re", "im")]
    if n == 4:
        xnames = ["x1", "x2", "x3"]
    else:
        xnames = [f"x{i}{j}" for (i, j) in sorted(fps[0].pairs)]
    header += [f"{x}_{p}" for x in xnames for p in ("re", "im")]
    header += ["y_re", "y_im", "eig_drift", "trace_drift"]
    rows = []
    for k, fp in enumerate(fps):
        xs = fp.fricke_x if n == 4 else [fp.pairs[key] for key in sorted(fp.pairs)]
        row = [table["s"][k]] + _split(table["t_moving"][k])
        row += sum((_split(a) for a in fp.singles), [])
        row += sum((_split(x) for x in xs), [])
        row += _split(table["y"][k]) + [table["eig_drift"][k], table["trace_drift"][k]]
        rows.append(row)
    return header, rows


def emit_csv(result, kind: str) -> bytes:
    """CSV bytes for ``kind`` in ``traces``, ``singular``, ``monodromy``, ``flow``.

    ``result`` is a TraceCoordinates, a list of singular points, a
    MonodromyRep (or array of matrices) or a flow table respectively.
    """
    if kind == "traces":
        header, rows = traces_rows(result)
    elif kind == "singular":
        header, rows = singular_rows(result)
    elif kind == "monodromy":
        header, rows = matrix_rows(getattr(result, "matrices", result))
    elif kind == "flow":
        header, rows = flow_rows(result)
    else:
        raise ValidationError(f"unknown CSV kind {kind!r}")
    return csv_bytes(header, rows)
