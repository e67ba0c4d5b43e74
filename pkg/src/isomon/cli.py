"""Command line front end.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 undetermined verdict.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .character import (
    find_fricke_singular_points,
    invariant_fingerprint,
    mu_map,
    sample_fiber_point,
)
from .errors import IsomonError, NumericalError, ValidationError
from .fuchsian import Verdict, check_stability, classify_lambda, local_exponents, validate_connection
from .io import (
    SystemFile,
    csv_bytes,
    dump_connection,
    flow_rows,
    matrix_rows,
    parse_system_file,
    singular_rows,
    traces_rows,
)
from .isomonodromy import (
    FlowPath,
    SchlesingerState,
    apparent_roots,
    eigenvalue_deviation,
    integrate_flow,
    shared_basepoint,
)
from .monodromy import canonical_loops, compute_monodromy
from .transformations import (
    ElmMinus,
    ElmPlus,
    Tensor,
    bl_apply,
    elm_bookkeeping,
    schlesinger_transform,
    swap_parabolic,
    weyl_apply,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_UNDETERMINED = 0, 1, 2, 3


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunReport:
    command: str
    input_digest: str | None = None
    seed: int | None = None
    outputs: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    exit_status: int = EXIT_OK

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, np.generic):
        return x.item() if not np.iscomplexobj(x) else [float(x.real), float(x.imag)]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    return str(x)


# ---------------------------------------------------------------------------
# helpers


def _emit(data: bytes | str, args, report: RunReport, kind: str):
    if isinstance(data, str):
        data = data.encode("utf-8")
    if args.out:
        Path(args.out).write_bytes(data)
        report.outputs[kind] = args.out
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        report.outputs[kind] = "stdout"
    report.outputs["sha256"] = hashlib.sha256(data).hexdigest()


def _load(args, report: RunReport) -> SystemFile:
    sf = parse_system_file(args.file)
    report.input_digest = sf.digest
    report.diagnostics["defaults_applied"] = sf.defaults
    return sf


def _complex_arg(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise UsageError(f"cannot read {text!r} as a complex number") from None


def _number_arg(text: str):
    """Exact rational when the text is one (``1/3``, ``0.25``), else complex."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        pass
    z = _complex_arg(text)
    return z.real if z.imag == 0 else z


def _ode_tol(args, sf: SystemFile | None) -> float:
    if args.tol is not None:
        return args.tol
    return sf.tolerances.ode if sf else 1e-10


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args, report):
    sf = parse_system_file(args.file, validate=False)
    report.input_digest = sf.digest
    tol = args.tol if args.tol is not None else sf.tolerances.integrality
    problems = validate_connection(sf.connection, tol)
    report.diagnostics.update(problems=problems, defaults_applied=sf.defaults)
    if problems:
        raise ValidationError("; ".join(problems), problems)
    _emit(dump_connection(sf.connection, sf.tolerances), args, report, "canonical")
    return EXIT_OK


def cmd_exponents(args, report):
    sf = _load(args, report)
    tol = args.tol if args.tol is not None else sf.tolerances.integrality
    pairs = local_exponents(sf.connection.system, sf.connection.book, tol)
    rows = [[str(i)] + [complex(l).real, complex(l).imag, complex(o).real, complex(o).imag]
            for i, (l, o) in enumerate(pairs)]
    _emit(csv_bytes(["point", "lam_re", "lam_im", "other_re", "other_im"], rows), args, report, "csv")
    return EXIT_OK


def _lambda_input(args, report):
    if args.file:
        sf = _load(args, report)
        return sf.connection.book.lam, sf.connection.book.mu, sf.tolerances.integrality
    if not args.lam:
        raise UsageError("give a system file or --lambda values")
    return [_number_arg(x) for x in args.lam], None, 1e-8


def cmd_classify(args, report):
    lam, mu, tol = _lambda_input(args, report)
    tol = args.tol if args.tol is not None else tol
    cls = classify_lambda(lam, mu, tol)
    out = {
        "kind": cls.kind,
        "resonant": list(cls.resonant),
        "reducible": [list(e) for e in cls.reducible],
        "walls": [{"normal": list(w.normal), "level": str(w.level)} for w in cls.walls],
    }
    _emit(json.dumps(out, indent=2) + "\n", args, report, "json")
    return EXIT_OK


def cmd_stability(args, report):
    sf = _load(args, report)
    tol = args.tol if args.tol is not None else sf.tolerances.integrality
    res = check_stability(sf.connection, args.dmax, tol)
    out = {
        "verdict": res.verdict.name,
        "pardeg": str(res.pardeg),
        "threshold": str(res.threshold),
        "bound": res.bound,
        "witness_pardeg": None if res.witness_degree is None else str(res.witness_degree),
        "witness_degree": None if res.witness is None else res.witness.degree,
        "subbundles": len(res.subbundles),
        "notes": res.notes,
    }
    _emit(json.dumps(out, indent=2) + "\n", args, report, "json")
    report.diagnostics["verdict"] = res.verdict.name
    return EXIT_UNDETERMINED if res.verdict is Verdict.UNDETERMINED else EXIT_OK


def _monodromy(sf: SystemFile, args):
    conn = sf.connection
    tol = _ode_tol(args, sf)
    return compute_monodromy(conn.system, conn.book, None, tol, sf.tolerances.verify, jobs=args.jobs)


def cmd_monodromy(args, report):
    sf = _load(args, report)
    rep = _monodromy(sf, args)
    report.diagnostics.update(rep.diagnostics, basepoint=rep.basepoint, error_estimate=rep.error_estimate)
    header, rows = matrix_rows(rep.matrices)
    _emit(csv_bytes(header, rows), args, report, "csv")
    return EXIT_OK


def cmd_traces(args, report):
    sf = _load(args, report)
    rep = _monodromy(sf, args)
    fp = invariant_fingerprint(rep.rep_tuple())
    report.diagnostics.update(rep.diagnostics, basepoint=rep.basepoint)
    header, rows = traces_rows(fp)
    _emit(csv_bytes(header, rows), args, report, "csv")
    return EXIT_OK


def cmd_fricke_singular(args, report):
    if args.a:
        a = [_complex_arg(x) for x in args.a]
    elif args.lam:
        a = list(mu_map([_number_arg(x) for x in args.lam]))
    elif args.file:
        a = list(mu_map(_load(args, report).connection.book.lam))
    else:
        raise UsageError("give --a, --lambda or a system file")
    if len(a) != 4:
        raise UsageError("the Fricke cubic needs four traces")
    tol = args.tol if args.tol is not None else 1e-8
    pts = find_fricke_singular_points(a, tol, seed=args.seed)
    report.seed = args.seed
    report.diagnostics["count"] = len(pts)
    header, rows = singular_rows(pts)
    _emit(csv_bytes(header, rows), args, report, "csv")
    return EXIT_OK


def cmd_sample_rep(args, report):
    a = [_complex_arg(x) for x in args.a]
    report.seed = args.seed
    seeds = [args.seed + k for k in range(args.count)]
    tol = args.tol if args.tol is not None else 1e-10

    def one(s):
        return sample_fiber_point(a, seed=s, tol=tol)

    if args.jobs > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as ex:
            reps = list(ex.map(one, seeds))
    else:
        reps = [one(s) for s in seeds]
    mats, labels = [], []
    for s, rep in zip(seeds, reps):
        for k, m in enumerate(rep.matrices):
            mats.append(m)
            labels.append(f"{s}:{k + 1}")
    header, rows = matrix_rows(mats, labels)
    header[0] = "seed:index"
    _emit(csv_bytes(header, rows), args, report, "csv")
    return EXIT_OK


def cmd_transform(args, report):
    kind = args.kind
    if kind in ("weyl", "bl"):
        lam, _, _ = _lambda_input(args, report)
        if kind == "weyl":
            out = weyl_apply(args.word or "", lam)
        else:
            if not args.word:
                raise UsageError("--word is required for bl, e.g. --word 't-1,2 r1'")
            out = bl_apply(args.word.split(), lam)
        doc = {"lambda": [_jsonable(x) if not isinstance(x, (int, float)) else x for x in out]}
        _emit(json.dumps(doc, indent=2) + "\n", args, report, "json")
        return EXIT_OK
    sf = _load(args, report)
    conn = sf.connection
    tol = args.tol if args.tol is not None else sf.tolerances.integrality
    if kind == "swap":
        _need(args, "i")
        new = swap_parabolic(conn, args.i, tol)
        _emit(dump_connection(new, sf.tolerances), args, report, "canonical")
        return EXIT_OK
    if kind == "schlesinger":
        _need(args, "i", "j")
        res = schlesinger_transform(conn.system, conn.book, conn.lines, args.i, args.j, tol)
        _emit(dump_connection(res.connection(conn.weight), sf.tolerances), args, report, "canonical")
        return EXIT_OK
    if kind in ("elm-plus", "elm-minus"):
        _need(args, "i")
        k = ElmPlus(args.i) if kind == "elm-plus" else ElmMinus(args.i)
    elif kind == "tensor":
        if args.nu is None or args.deg is None:
            raise UsageError("tensor needs --nu and --deg")
        k = Tensor(tuple(_number_arg(x) for x in args.nu), args.deg)
    else:
        raise UsageError(f"unknown transform kind {kind!r}")
    d = elm_bookkeeping(k, conn.book.lam, conn.book.mu, conn.book.deg_l)
    doc = {"kind": kind, "lambda": [_jsonable(x) if not isinstance(x, (int, float)) else x for x in d.lam],
           "mu": list(d.mu), "degL": d.deg_l}
    _emit(json.dumps(doc, indent=2) + "\n", args, report, "json")
    return EXIT_OK


def _need(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"--{name} is required for --kind {args.kind}")


def cmd_flow(args, report):
    sf = _load(args, report)
    conn = sf.connection
    state = SchlesingerState.from_system(conn.system)
    k = args.move
    if not 0 <= k < len(state.times):
        raise UsageError(f"--move must name a finite point index in 0..{len(state.times) - 1}")
    tol = _ode_tol(args, sf)
    target = _complex_arg(args.to)
    path = FlowPath.move(state.times, k, target)
    if target == state.times[k] or args.samples == 1:
        s_grid = np.array([0.0])
    else:
        s_grid = np.linspace(0.0, 1.0, args.samples)
    # integrate leg by leg so samples land exactly on the grid
    states, eig = [state], [0.0]
    current = state
    for s0, s1 in zip(s_grid[:-1], s_grid[1:]):
        leg = FlowPath(np.array([path.at(s0), path.at(s1)]))
        res = integrate_flow(current, leg, tol)
        current = res.final
        states.append(current)
        eig.append(max(eig[-1], eigenvalue_deviation(state.residues, current.residues)))
    b = shared_basepoint(*states)

    def fingerprint(st):
        sysm = st.system()
        rep = compute_monodromy(sysm, conn.book, canonical_loops(sysm.points, b), tol, sf.tolerances.verify)
        return invariant_fingerprint(rep.rep_tuple())

    if args.jobs > 1 and len(states) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as ex:
            fps = list(ex.map(fingerprint, states))
    else:
        fps = [fingerprint(st) for st in states]
    ys = []
    for st in states:
        roots, ok = apparent_roots(st.times, st.residues[:, 0, 1])
        ys.append(complex(roots[0]) if ok and len(roots) else complex(np.nan, np.nan))
    table = {
        "s": s_grid,
        "t_moving": [st.times[k] for st in states],
        "fingerprints": fps,
        "y": ys,
        "eig_drift": eig,
        "trace_drift": [fps[0].distance(fp) for fp in fps],
    }
    report.diagnostics.update(max_eig_drift=max(eig), max_trace_drift=max(table["trace_drift"]),
                              basepoint=b, samples=len(states))
    header, rows = flow_rows(table)
    _emit(csv_bytes(header, rows), args, report, "csv")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "exponents": cmd_exponents,
    "classify": cmd_classify,
    "stability": cmd_stability,
    "monodromy": cmd_monodromy,
    "traces": cmd_traces,
    "fricke-singular": cmd_fricke_singular,
    "sample-rep": cmd_sample_rep,
    "transform": cmd_transform,
    "flow": cmd_flow,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="isomon", description="Rank-2 Fuchsian systems: monodromy, traces, symmetries and flows.")
    p.add_argument("--version", action="version", version=f"isomon {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, file_required=True):
        if file_required:
            sp.add_argument("file", help="system file (JSON)")
        else:
            sp.add_argument("file", nargs="?", help="system file (JSON)")
        sp.add_argument("--tol", type=float, default=None, help="primary tolerance of the command")
        sp.add_argument("--out", help="write the result here instead of stdout")
        sp.add_argument("--report", help="write the run report here instead of stderr")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--jobs", type=int, default=1)
        return sp

    common(sub.add_parser("validate", help="check a system file and print its canonical form"))
    common(sub.add_parser("exponents", help="local exponent pairs"))
    sp = common(sub.add_parser("classify", help="resonance and reducibility of the exponents"), False)
    sp.add_argument("--lambda", dest="lam", nargs="+", help="exponents instead of a file")
    sp = common(sub.add_parser("stability", help="stability verdict"))
    sp.add_argument("--dmax", type=int, default=2)
    common(sub.add_parser("monodromy", help="monodromy matrices along canonical loops"))
    common(sub.add_parser("traces", help="trace coordinates of the monodromy"))
    sp = common(sub.add_parser("fricke-singular", help="singular points of the Fricke cubic"), False)
    sp.add_argument("--a", nargs=4, help="traces a1..a4")
    sp.add_argument("--lambda", dest="lam", nargs=4, help="exponents; a_i = 2cos(2 pi lam_i)")
    sp = common(sub.add_parser("sample-rep", help="random tuple with prescribed traces"), False)
    sp.add_argument("--a", nargs="+", required=True, help="traces a1..an")
    sp.add_argument("--count", type=int, default=1, help="number of tuples (seeds seed..seed+count-1)")
    sp = common(sub.add_parser("transform", help="elementary, Schlesinger, Weyl or BL transformations"), False)
    sp.add_argument("--kind", required=True,
                    choices=["elm-plus", "elm-minus", "tensor", "swap", "schlesinger", "weyl", "bl"])
    sp.add_argument("--i", type=int, help="point index (0-based)")
    sp.add_argument("--j", type=int, help="second point index (0-based)")
    sp.add_argument("--nu", nargs="+", help="tensor twist residues")
    sp.add_argument("--deg", type=int, help="tensor twist degree")
    sp.add_argument("--word", help="Weyl word such as 's0 s1' or BL generators such as 't-1,2 r1'")
    sp.add_argument("--lambda", dest="lam", nargs="+", help="exponents for weyl/bl instead of a file")
    sp = common(sub.add_parser("flow", help="isomonodromic flow moving one pole"))
    sp.add_argument("--move", type=int, required=True, help="index of the moving pole (0-based)")
    sp.add_argument("--to", required=True, help="target position, e.g. 2.5 or 2+0.5j")
    sp.add_argument("--samples", type=int, default=11)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    report = RunReport(command=argv[0] if argv else "")
    args = None
    try:
        args = build_parser().parse_args(argv)
        report.command = args.command
        report.seed = args.seed
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        if getattr(args, "samples", 2) < 1:
            raise UsageError("--samples must be at least 1")
        status = COMMANDS[args.command](args, report)
    except ValidationError as exc:
        status = EXIT_INVALID
        report.diagnostics["error"] = str(exc)
        if exc.problems:
            report.diagnostics["problems"] = exc.problems
        print(f"error: {exc}", file=sys.stderr)
    except NumericalError as exc:
        status = EXIT_NUMERICAL
        report.diagnostics["error"] = f"{type(exc).__name__}: {exc}"
        for key in ("s", "pair", "witness"):
            if getattr(exc, key, None) is not None:
                report.diagnostics[key] = getattr(exc, key)
        print(f"error: {exc}", file=sys.stderr)
    except IsomonError as exc:  # pragma: no cover
        status = EXIT_NUMERICAL
        report.diagnostics["error"] = str(exc)
        print(f"error: {exc}", file=sys.stderr)
    report.exit_status = status
    text = report.to_json()
    if args is not None and getattr(args, "report", None):
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stderr.write(text)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
