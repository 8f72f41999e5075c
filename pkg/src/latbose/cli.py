"""Command-line interface.

Subcommands: ``scattering``, ``upper-bound``, ``spectra``, ``certify``, ``ed``
and ``sweep-all``.  Sweeps are written as CSV, scalar results as JSON.  Numbers
use 17 significant digits.  CSV files start with ``#`` comment lines holding a
run manifest and the column units; the body after the comments is
deterministic for fixed inputs and seed, at any ``--threads`` value.

Exit codes: 0 success, 1 numerical failure, 2 invalid input (an error JSON is
written to stderr), 64 command-line usage error.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .errors import ComputeError, LatboseError, NegativeCondensate, ValidationError

EXIT_OK, EXIT_COMPUTE, EXIT_VALIDATION, EXIT_USAGE = 0, 1, 2, 64

UNITS = {
    "rho": "particles per site",
    "e_psi": "hopping energy per site",
    "ratio": "dimensionless, e_psi / (4 pi a rho^2)",
    "leading_term": "hopping energy per site, 4 pi a rho^2",
    "rho3_terms": "hopping energy per site, O(rho^3) terms not included in e_psi",
    "e_finite": "hopping energy per site, optimized trial state in the periodic box --finite-L",
    "l": "box size (box has (l+1)^3 sites)",
    "kind": "periodic | neumann | neumann_special",
    "gap": "hopping energy, second smallest eigenvalue",
    "trace_inv": "inverse hopping energy, |Lambda|^-1 sum_{k!=0} 1/lambda_k",
    "min_nonzero": "hopping energy, smallest eigenvalue above 1e-10",
    "n": "particle number",
    "u": "hopping energy, on-site repulsion",
    "bc": "periodic | neumann",
    "dim": "Hilbert space dimension actually diagonalized",
    "e0": "hopping energy, ground-state energy",
    "residual": "hopping energy, ||H v - e0 v||",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- formatting --------------------------------------------------------------------
def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def dumps(obj) -> str:
    """JSON text with floats printed to 17 significant digits (C locale)."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if hasattr(obj, "item"):
        return dumps(obj.item())
    raise TypeError(f"cannot serialize {type(obj)}")


def write_csv(out, columns, rows, manifest):
    out.write(f"# manifest: {dumps(manifest)}\n")
    for c in columns:
        out.write(f"# {c}: {UNITS.get(c, '')}\n")
    out.write(",".join(columns) + "\n")
    for r in rows:
        out.write(",".join(fmt(r[c]) if r.get(c) is not None else "" for c in columns) + "\n")


class _Sink:
    """Output target: a file (plus a sibling manifest JSON) or stdout."""

    def __init__(self, path):
        self.path = Path(path) if path else None

    def emit(self, text: str, manifest: dict | None = None):
        if self.path is None:
            sys.stdout.write(text)
            return
        self.path.write_text(text, encoding="utf-8")
        if manifest is not None:
            self.path.with_name(self.path.name + ".manifest.json").write_text(
                dumps(manifest) + "\n", encoding="utf-8"
            )


def _map(threads: int, fn, items):
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}") from None


# -- subcommands -------------------------------------------------------------------
def _model(args):
    from .lattice import load_config

    model = load_config(args.config)
    if getattr(args, "u", None) is not None:
        model = model.with_U(args.u)
    return model


def cmd_scattering(args, manifest):
    from .scattering import scattering_data

    model = _model(args)
    sd = scattering_data(model)
    return dumps(sd.as_dict()) + "\n"


def cmd_upper_bound(args, manifest):
    from .bogoliubov import TrialStateConfig, fit_power_law, log_grid, trial_energy_finite, trial_energy_thermo
    from .scattering import scattering_data

    import numpy as np

    model = _model(args)
    if not 0 < args.rho_min <= args.rho_max:
        raise ValidationError("need 0 < rho-min <= rho-max")
    if args.points is None:
        rhos = log_grid(args.rho_min, args.rho_max, 8)
    else:
        if args.points < 1:
            raise ValidationError("--points must be positive")
        rhos = np.geomspace(args.rho_min, args.rho_max, args.points)
    scat = scattering_data(model)

    def one(r):
        th = trial_energy_thermo(model, model.U, float(r), scat)
        row = {
            "rho": float(r),
            "e_psi": th.e_psi,
            "ratio": th.ratio,
            "leading_term": th.leading_term,
            "rho3_terms": th.rho3_terms,
        }
        if args.finite_L is not None:
            try:
                row["e_finite"] = trial_energy_finite(model, TrialStateConfig(float(r), args.finite_L), scat).energy_density
            except NegativeCondensate:
                row["e_finite"] = None
        return row

    rows = _map(args.threads, one, rhos)
    cols = ["rho", "e_psi", "ratio", "leading_term", "rho3_terms"]
    if args.finite_L is not None:
        cols.append("e_finite")
    summary = {"fit_exponent": None, "fit_prefactor": None}
    sel = [r for r in rows if r["rho"] <= rows[0]["rho"] * 10 * (1 + 1e-9)]
    if len(sel) < 2:
        sel = rows[:2]
    if len(sel) >= 2:
        k, C = fit_power_law([r["rho"] for r in sel], [r["ratio"] - 1 for r in sel])
        summary = {"fit_exponent": k, "fit_prefactor": C}
    buf = io.StringIO()
    write_csv(buf, cols, rows, manifest)
    return buf.getvalue(), summary


def cmd_spectra(args, manifest):
    from .spectra import spectrum

    model = _model(args)
    ls = _int_list(args.l_list)

    def one(l):
        big = (l + 1) ** 3 > 3375 and args.kind == "neumann"
        sr = spectrum(model, l, args.kind, n_lowest=4 if big else None)
        return {
            "l": l,
            "kind": args.kind,
            "gap": sr.gap,
            "trace_inv": sr.trace_inverse() if sr.complete else None,
            "min_nonzero": sr.min_nonzero,
        }

    rows = _map(args.threads, one, ls)
    buf = io.StringIO()
    write_csv(buf, ["l", "kind", "gap", "trace_inv", "min_nonzero"], rows, manifest)
    return buf.getvalue()


def cmd_certify(args, manifest):
    from .ed import SolverParams, ed_ground_energy
    from .lower_bound import CertificateInput, best_certificate, certificate

    model = _model(args)
    inp = CertificateInput(model, model.U, args.n, args.l, args.mu)
    res = best_certificate(inp) if args.scan else certificate(inp)
    out = {
        "mu_window": list(res.window),
        "mu_used": res.mu,
        "S": res.bogoliubov_sum,
        "lb_energy": res.lb_energy,
        "ed_energy": None,
        "slack": None,
    }
    if args.with_ed:
        e = ed_ground_energy(model, args.l, args.n, "neumann", params=SolverParams(seed=args.seed)).e0
        out["ed_energy"] = e
        out["slack"] = e - res.lb_energy
    return dumps(out) + "\n"


def cmd_ed(args, manifest):
    from .ed import SolverParams, ed_ground_energy

    model = _model(args)
    ls = _int_list(args.sweep_l) if args.sweep_l else [args.l]
    if ls == [None]:
        raise UsageError("ed needs --l or --sweep-l")
    params = SolverParams(seed=args.seed)

    def one(l):
        r = ed_ground_energy(model, l, args.n, args.bc, params=params)
        return {"n": args.n, "l": l, "u": model.U, "bc": args.bc, "dim": r.basis_dim, "e0": r.e0, "residual": r.residual}

    rows = _map(args.threads, one, ls)
    buf = io.StringIO()
    write_csv(buf, ["n", "l", "u", "bc", "dim", "e0", "residual"], rows, manifest)
    return buf.getvalue()


def cmd_sweep_all(args, manifest):
    """Small battery of all computations, written into ``--out-dir``."""
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ns = argparse.Namespace
    base = dict(config=args.config, threads=args.threads, u=args.u, seed=args.seed)
    files = {}
    files["scattering.json"] = cmd_scattering(ns(**base), manifest)
    csv, summary = cmd_upper_bound(ns(**base, rho_min=1e-6, rho_max=1e-3, points=None, finite_L=None), manifest)
    files["upper_bound.csv"] = csv
    files["upper_bound_summary.json"] = dumps(summary) + "\n"
    for kind in ("periodic", "neumann", "neumann_special"):
        files[f"spectra_{kind}.csv"] = cmd_spectra(ns(**base, kind=kind, l_list="2,4,6,8"), manifest)
    files["ed.csv"] = cmd_ed(ns(**base, n=2, l=2, bc="neumann", sweep_l=None), manifest)
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")
    (out / "manifest.json").write_text(dumps(manifest) + "\n", encoding="utf-8")
    return dumps({"written": sorted(files)}) + "\n"


# -- parser ------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    col_help = "\n".join(f"  {k}: {v}" for k, v in UNITS.items())
    p = _Parser(
        prog="latbose",
        description="Dilute lattice Bose gas: scattering length, Bogoliubov bounds, Laplacian spectra, ED.",
        epilog="CSV columns and units:\n" + col_help,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"latbose {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, u=True):
        sp.add_argument("--config", required=True, help="lattice JSON file or bundled name (cubic, orthorhombic, cubic_nnn)")
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads for sweeps")
        sp.add_argument("--output", default=None, help="output file (default: stdout)")
        sp.add_argument("--seed", type=int, default=0, help="seed for randomized start vectors")
        if u:
            sp.add_argument("--u", type=float, default=None, help="override the config's U")

    s = sub.add_parser("scattering", help="gamma, a, phi(0), w(0) as JSON")
    common(s)
    s = sub.add_parser("upper-bound", help="thermodynamic trial energy sweep as CSV")
    common(s)
    s.add_argument("--rho-min", type=float, default=1e-6)
    s.add_argument("--rho-max", type=float, default=1e-2)
    s.add_argument("--points", type=int, default=None, help="number of densities (default: 8 per decade)")
    s.add_argument("--finite-L", type=int, default=None, help="also evaluate the periodic box of this size")
    s.add_argument("--summary", default=None, help="file for the JSON fit summary")
    s = sub.add_parser("spectra", help="Laplacian gaps and traces as CSV")
    common(s, u=False)
    s.add_argument("--kind", choices=["periodic", "neumann", "neumann_special"], default="neumann")
    s.add_argument("--l-list", default="2,4,6,8")
    s = sub.add_parser("certify", help="lower-bound certificate as JSON")
    common(s)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--l", type=int, required=True)
    s.add_argument("--mu", type=float, default=None)
    s.add_argument("--scan", action="store_true", help="scan 16 mu values and keep the best bound")
    s.add_argument("--with-ed", action="store_true", help="also compute the exact Neumann energy")
    s = sub.add_parser("ed", help="exact ground-state energies as CSV")
    common(s)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--l", type=int, default=None)
    s.add_argument("--bc", choices=["periodic", "neumann"], default="neumann")
    s.add_argument("--sweep-l", default=None, help="comma-separated box sizes")
    s = sub.add_parser("sweep-all", help="run a small battery into --out-dir")
    common(s)
    s.add_argument("--out-dir", required=True)
    return p


COMMANDS = {
    "scattering": cmd_scattering,
    "upper-bound": cmd_upper_bound,
    "spectra": cmd_spectra,
    "certify": cmd_certify,
    "ed": cmd_ed,
    "sweep-all": cmd_sweep_all,
}


def _error_json(kind: str, exc: BaseException) -> str:
    return dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}) + "\n"


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
    except UsageError as exc:
        sys.stderr.write(_error_json("UsageError", exc))
        return EXIT_USAGE
    t0 = time.time()
    manifest = {
        "subcommand": args.command,
        "config": str(args.config),
        "parameters": {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "config")},
        "outputs": [args.output] if args.output else ["stdout"],
        "tool_version": __version__,
    }
    try:
        from threadpoolctl import threadpool_limits

        # single-threaded BLAS keeps floating-point reductions reproducible
        with threadpool_limits(limits=1):
            result = COMMANDS[args.command](args, manifest)
    except UsageError as exc:
        sys.stderr.write(_error_json("UsageError", exc))
        return EXIT_USAGE
    except ValidationError as exc:
        sys.stderr.write(_error_json("ValidationError", exc))
        return EXIT_VALIDATION
    except (ComputeError, LatboseError, ArithmeticError, MemoryError) as exc:
        sys.stderr.write(_error_json("ComputeError", exc))
        return EXIT_COMPUTE
    manifest["wall_time_s"] = time.time() - t0
    sink = _Sink(args.output)
    if args.command == "upper-bound":
        text, summary = result
        if args.summary:
            Path(args.summary).write_text(dumps(summary) + "\n", encoding="utf-8")
        sink.emit(text, manifest)
        if args.output and not args.summary:
            sys.stdout.write(dumps(summary) + "\n")
        elif not args.summary:
            sys.stdout.write(f"# summary: {dumps(summary)}\n")
    else:
        sink.emit(result, manifest)
    return EXIT_OK


def main() -> None:
    # keep BLAS single-threaded before numpy spins up its pools
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")
    sys.exit(run())
