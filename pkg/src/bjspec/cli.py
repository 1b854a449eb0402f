"""Command line front end: ``bjspec density | verify | measure``.

Exit codes: 0 success, 2 input or configuration error, 3 numerical
failure, 4 verification failure. Every output embeds the resolved
configuration, the seed, the normalization ledger and the library version.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, averaging, coupling, verification
from .errors import BJSpecError, ValidationError
from .io import dumps, load_family, load_halfline, load_model, matrix_from_json, matrix_to_json

SCHEMA = 1
EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_VERIFY = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _envelope(command, config, seed, result):
    return {"schema": SCHEMA, "version": __version__, "command": command, "config": config,
            "seed": seed, "ledger": averaging.LEDGER.to_dict(), "result": result}


def _config(args):
    skip = {"func", "timings"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _matrix(M):
    return matrix_to_json(np.asarray(M))


def _read_uhat(value, L):
    if value is None:
        return None
    try:
        obj = json.loads(value)
    except json.JSONDecodeError:
        p = Path(value)
        if not p.exists():
            raise ValidationError(f"--uhat: not a JSON matrix and no such file: {value}")
        obj = json.loads(p.read_text(encoding="utf-8"))
    U = matrix_from_json(obj, "--uhat")
    if U.shape != (L, L):
        raise ValidationError(f"--uhat: shape {U.shape} does not match block size {L}")
    from .moebius import check_unitary
    try:
        return check_unitary(U, tol=1e-10)
    except ValidationError as exc:
        raise ValidationError(f"--uhat: {exc}") from exc


def _fmt(x: float) -> str:
    return repr(float(x))


# ------------------------------------------------------------------ density

def cmd_density(args) -> int:
    if args.steps < 1:
        raise ValidationError("--steps must be at least 1")
    if not args.emin < args.emax:
        raise ValidationError("--emin must be smaller than --emax")
    model, bc = load_model(args.model)
    Uhat = _read_uhat(args.uhat, model.L)
    Zhat = None if Uhat is not None else bc.Zhat
    E = np.linspace(args.emin, args.emax, args.steps + 1)
    L = model.L
    cols = ["E"] + [f"{part}_{i + 1}{j + 1}" for i in range(L) for j in range(L)
                    for part in ("re", "im")]
    lines = [",".join(cols)]
    for e in E:
        d = averaging.averaged_density(model, e, Zhat=Zhat, Uhat=Uhat).density
        row = [_fmt(e)]
        for x in d.ravel():
            row += [_fmt(x.real), _fmt(x.imag)]
        lines.append(",".join(row))
    meta = _envelope("density", _config(args), None, {"rows": len(E), "columns": cols})
    csv = "# " + json.dumps(meta, sort_keys=True) + "\n" + "\n".join(lines) + "\n"
    _emit(csv, args.out)
    if args.out:
        Path(str(args.out) + ".json").write_text(dumps(meta), encoding="utf-8")
    return EXIT_OK


# ------------------------------------------------------------------- verify

def cmd_verify(args) -> int:
    names = args.suite or ["all"]
    for n in names:
        if n != "all" and n not in verification.SUITES:
            raise ValidationError(f"unknown suite {n!r}; choose from all, "
                                  + ", ".join(verification.SUITES))
    if args.samples < 100:
        raise ValidationError("--samples must be at least 100")
    report = verification.run_suites(names, seed=args.seed, samples=args.samples)
    _emit(dumps(_envelope("verify", _config(args), args.seed, report.to_dict(args.timings))),
          args.out)
    for c in report.checks:
        print(f"{c.status:10s} {c.name:20s} {c.statistic:.4g} (tolerance {c.tolerance:.3g})",
              file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_VERIFY


# ------------------------------------------------------------------ measure

def _mass_result(m):
    return {"E0": m.E0, "E1": m.E1, "mass": _matrix(m.mass), "error": m.error, "N": m.N}


def cmd_measure_interval(args):
    model, bc = load_model(args.model)
    Uhat = _read_uhat(args.uhat, model.L)
    Zhat = None if Uhat is not None else bc.Zhat
    m = averaging.averaged_interval_measure(model, args.e0, args.e1, Uhat=Uhat, Zhat=Zhat,
                                            tol=args.tol)
    return None, _mass_result(m)


def cmd_measure_carmona(args):
    semi = load_halfline(args.family)
    m = averaging.carmona_limit_measure(semi, args.e0, args.e1, tol=args.tol,
                                        N_max=args.n_max, N_start=args.n_start)
    out = _mass_result(m)
    out["trajectory"] = [{"N": n, "mass": _matrix(v)} for n, v in m.trajectory]
    return None, out


def cmd_measure_double_average(args):
    model, _ = load_model(args.model)
    est = averaging.double_average_density(model, args.energy, args.samples, args.seed)
    target = np.eye(model.L)
    return args.seed, {"mean": _matrix(est.mean), "stderr_re": est.stderr_re.tolist(),
                       "stderr_im": est.stderr_im.tolist(), "samples": est.samples,
                       "skipped": est.skipped, "max_z": est.max_z(target),
                       "identity_within_4sigma": bool(est.agrees(target))}


def cmd_measure_coupling(args):
    fam = load_family(args.family)
    rep = coupling.criteria_report(fam, args.energy, grid_spec=args.nodes)
    window = args.window or [args.energy - 0.3, args.energy + 0.3]
    dens = coupling.coupling_averaged_density(fam, window, args.nodes, args.bins)
    return None, {"criteria": rep.to_dict(),
                  "density": [{"E": float(e), "value": float(v)}
                              for e, v in zip(dens.E, dens.density)],
                  "bounds": dens.bounds.to_dict()}


MEASURES = {"interval": cmd_measure_interval, "carmona": cmd_measure_carmona,
            "double-average": cmd_measure_double_average, "coupling": cmd_measure_coupling}


def cmd_measure(args) -> int:
    if args.kind == "double-average" and args.samples < 100:
        raise ValidationError("--samples must be at least 100")
    if hasattr(args, "e0") and not args.e0 < args.e1:
        raise ValidationError("--e0 must be smaller than --e1")
    seed, result = MEASURES[args.kind](args)
    _emit(dumps(_envelope(f"measure {args.kind}", _config(args), seed, result)), args.out)
    return EXIT_OK


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bjspec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("density", help="averaged density on an energy grid (CSV)")
    d.add_argument("--model", required=True)
    d.add_argument("--emin", type=float, required=True)
    d.add_argument("--emax", type=float, required=True)
    d.add_argument("--steps", type=int, required=True, help="number of grid intervals")
    d.add_argument("--uhat", help="left boundary unitary, JSON matrix or file")
    d.add_argument("--out", help="CSV path (default stdout); metadata goes to OUT.json")
    d.set_defaults(func=cmd_density)

    v = sub.add_parser("verify", help="run built-in verification suites (JSON report)")
    v.add_argument("suite", nargs="*", help="suite names or 'all' (default)")
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--samples", type=int, default=20000)
    v.add_argument("--out")
    v.add_argument("--timings", action="store_true",
                   help="include wall-clock runtimes (output is then not reproducible)")
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("measure", help="spectral measure computations (JSON)")
    ms = m.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    iv = ms.add_parser("interval", help="boundary-averaged mass of an interval")
    iv.add_argument("--model", required=True)
    iv.add_argument("--e0", type=float, required=True)
    iv.add_argument("--e1", type=float, required=True)
    iv.add_argument("--tol", type=float, default=1e-10)
    iv.add_argument("--uhat")
    cm = ms.add_parser("carmona", help="half-line interval mass by truncation")
    cm.add_argument("--family", required=True, help="half-line JSON file")
    cm.add_argument("--e0", type=float, required=True)
    cm.add_argument("--e1", type=float, required=True)
    cm.add_argument("--tol", type=float, default=2e-2)
    cm.add_argument("--n-start", type=int, default=8)
    cm.add_argument("--n-max", type=int, default=4096)
    da = ms.add_parser("double-average", help="double boundary average at one energy")
    da.add_argument("--model", required=True)
    da.add_argument("--energy", type=float, required=True)
    da.add_argument("--samples", type=int, default=20000)
    da.add_argument("--seed", type=int, default=0)
    cp = ms.add_parser("coupling", help="coupling-constant criteria and averaged density")
    cp.add_argument("--family", required=True)
    cp.add_argument("--energy", type=float, required=True)
    cp.add_argument("--window", type=float, nargs=2, metavar=("E0", "E1"))
    cp.add_argument("--nodes", type=int, default=coupling.DEFAULT_NODES)
    cp.add_argument("--bins", type=int, default=12)
    for q in (iv, cm, da, cp):
        q.add_argument("--out")
    m.set_defaults(func=cmd_measure)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"bjspec: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BJSpecError as exc:
        print(f"bjspec: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
