"""Command line interface, run configuration and persistence.

Config files are JSON objects with the optional sections ``params``,
``disorder`` and ``ensemble`` plus a top-level ``seed``; unknown keys are
rejected.  Command line flags override the file.  Every run writes its
outputs and a manifest into ``--out-dir`` (default ``$XXZDROPLET_OUT_DIR`` or
the working directory).

Exit status is 0 on success, 1 when a verification fails and 2 for invalid
input.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import subprocess
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import estimators as est
from .correlators import (
    CorrelatorRecord,
    dynamical_sup,
    number_correlator_sum,
    number_observable,
    partition_sup,
    random_observable,
    sector_correlator,
    vanishing_identity_values,
)
from .exceptions import CapacityError, ParameterError, SchemaError
from .operators import (
    DisorderSpec,
    ModelParams,
    build_sector_hamiltonian,
    build_spin_hamiltonian,
    sample_disorder,
)
from .spectral import diagonalize, droplet_band, droplet_window, spectrum_rows

__all__ = [
    "SCHEMAS",
    "RunManifest",
    "write_records",
    "read_records",
    "load_config",
    "code_version",
    "main",
]

SCHEMAS = {
    "decay": ("distance", "mean", "stderr", "n_samples"),
    "correlator": ("seed", "N", "i", "j", "t", "value"),
    "spectrum": ("index", "eigenvalue", "in_window"),
    "samples": ("realization", "distance", "value"),
    "band": ("N", "lower", "upper"),
}

_TYPES = {
    "distance": int, "n_samples": int, "seed": int, "N": int, "i": int, "j": int,
    "index": int, "realization": int, "mean": float, "stderr": float, "t": float,
    "value": float, "eigenvalue": float, "lower": float, "upper": float,
}


def _parse_bool(text: str) -> bool:
    if text in ("True", "true", "1"):
        return True
    if text in ("False", "false", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _cast(column: str, value):
    if column == "in_window":
        return value if isinstance(value, bool) else _parse_bool(str(value))
    kind = _TYPES[column]
    if kind is int:
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ValueError(f"{column} must be an integer")
        return int(value)
    return float(value)


def _as_row(record, columns):
    if isinstance(record, CorrelatorRecord):
        return tuple(getattr(record, c) for c in columns)
    row = tuple(record)
    if len(row) != len(columns):
        raise SchemaError(f"row {row} does not have the {len(columns)} columns {columns}")
    return row


def write_records(records, path, kind: str, fmt: str | None = None) -> Path:
    """Write rows of schema ``kind`` as CSV or JSON (chosen by ``fmt`` or suffix).

    Floats are written with their shortest round-trip representation, so
    :func:`read_records` recovers them exactly.
    """
    if kind not in SCHEMAS:
        raise SchemaError(f"unknown schema {kind!r}")
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".") or "csv"
    cols = SCHEMAS[kind]
    rows = [tuple(_cast(c, v) for c, v in zip(cols, _as_row(r, cols))) for r in records]
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            w.writerows([repr(v) if isinstance(v, float) else v for v in row] for row in rows)
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump({"schema": kind, "columns": list(cols), "rows": rows}, fh)
            fh.write("\n")
    else:
        raise SchemaError(f"unknown format {fmt!r}")
    return path


def read_records(path, kind: str) -> list:
    """Load rows of schema ``kind``; correlator rows come back as :class:`CorrelatorRecord`.

    Raises
    ------
    SchemaError
        On a header or type mismatch anywhere in the file; nothing is
        returned in that case.
    """
    if kind not in SCHEMAS:
        raise SchemaError(f"unknown schema {kind!r}")
    cols = SCHEMAS[kind]
    path = Path(path)
    try:
        if path.suffix == ".json":
            with open(path) as fh:
                doc = json.load(fh)
            if not isinstance(doc, dict) or doc.get("schema") != kind or tuple(doc.get("columns", ())) != cols:
                raise SchemaError(f"{path}: expected a {kind} table with columns {cols}")
            raw = doc["rows"]
        else:
            with open(path, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                if header is None or tuple(header) != cols:
                    raise SchemaError(f"{path}: header {header} does not match {cols}")
                raw = list(reader)
        rows = []
        for n, r in enumerate(raw):
            if len(r) != len(cols):
                raise SchemaError(f"{path}: row {n + 1} has {len(r)} fields, expected {len(cols)}")
            rows.append(tuple(_cast(c, v) for c, v in zip(cols, r)))
    except SchemaError:
        raise
    except (ValueError, TypeError, KeyError, json.JSONDecodeError, UnicodeDecodeError, csv.Error) as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    if kind == "correlator":
        return [CorrelatorRecord(*r) for r in rows]
    return rows


# ---------------------------------------------------------------------------
# configuration


_SECTIONS = {
    "params": {"Delta", "lam", "L", "beta", "delta"},
    "disorder": {"family", "omega_max", "params"},
    "ensemble": {"estimator", "N_list", "distances", "realizations", "s", "epsilon", "N_max",
                 "energy", "anchor"},
}
_DEFAULT_PARAMS = {"Delta": 2.0, "lam": 1.0, "L": 8, "beta": None, "delta": 0.1}


def load_config(path) -> dict:
    """Read and validate a JSON config file."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read config {path}: {exc}") from exc
    return validate_config(cfg)


def validate_config(cfg) -> dict:
    if not isinstance(cfg, dict):
        raise SchemaError("config must be a JSON object")
    unknown = set(cfg) - set(_SECTIONS) - {"seed"}
    if unknown:
        raise SchemaError(f"unknown config keys {sorted(unknown)}")
    for name, allowed in _SECTIONS.items():
        sec = cfg.get(name, {})
        if not isinstance(sec, dict):
            raise SchemaError(f"config section {name!r} must be an object")
        bad = set(sec) - allowed
        if bad:
            raise SchemaError(f"unknown keys {sorted(bad)} in section {name!r}")
    if "seed" in cfg and not isinstance(cfg["seed"], int):
        raise SchemaError("seed must be an integer")
    return cfg


def _model(cfg: dict, args) -> tuple[ModelParams, DisorderSpec]:
    p = dict(_DEFAULT_PARAMS)
    p.update(cfg.get("params", {}))
    for key, flag in (("Delta", "Delta"), ("lam", "lam"), ("L", "L"), ("beta", "beta"),
                      ("delta", "window_delta")):
        v = getattr(args, flag, None)
        if v is not None:
            p[key] = v
    d = {"family": "uniform", "omega_max": 1.0, "params": ()}
    d.update(cfg.get("disorder", {}))
    if getattr(args, "disorder", None):
        d["family"] = args.disorder
    d["params"] = tuple(d.get("params") or ())
    return ModelParams(**p), DisorderSpec(**d)


def _seed(cfg: dict, args) -> int:
    return args.seed if args.seed is not None else int(cfg.get("seed", 0))


def code_version() -> str:
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "unknown"
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                             text=True, cwd=Path(__file__).parent, timeout=10)
        if out.returncode == 0 and out.stdout.strip():
            version += "+" + out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return version


@dataclass
class RunManifest:
    """What was run, with which inputs, and where the outputs went."""

    experiment: str
    config: dict
    master_seed: int
    code_version: str = ""
    argv: list = field(default_factory=list)
    started: str = ""
    finished: str = ""
    outputs: list = field(default_factory=list)

    def save(self, path) -> Path:
        path = Path(path)
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, default=_jsonable)
            fh.write("\n")
        return path

    @classmethod
    def load(cls, path) -> "RunManifest":
        try:
            with open(path) as fh:
                d = json.load(fh)
            return cls(**d)
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise SchemaError(f"invalid manifest {path}: {exc}") from exc


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------------------
# argument parsing


def parse_range(text: str) -> list[int]:
    """``"1..5"`` or ``"1,3,7"`` or ``"2..16:2"`` to a list of integers."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part:
            lo, rest = part.split("..", 1)
            hi, _, step = rest.partition(":")
            out.extend(range(int(lo), int(hi) + 1, int(step or 1)))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return out


def _range_arg(text):
    try:
        return parse_range(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _common(parser):
    g = parser.add_argument_group("run options")
    g.add_argument("--config", help="JSON config file")
    g.add_argument("--seed", type=int, help="master seed (overrides the config)")
    g.add_argument("--out-dir", default=None, help="output directory")
    g.add_argument("--threads", type=int, default=None, help="worker processes")
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    m = parser.add_argument_group("model")
    m.add_argument("--Delta", type=float, help="anisotropy (> 1)")
    m.add_argument("--lam", type=float, help="disorder strength")
    m.add_argument("-L", "--L", type=int, help="half-length of the chain")
    m.add_argument("--beta", type=float, help="boundary field")
    m.add_argument("--window-delta", type=float, help="droplet window parameter in (0, 1)")
    m.add_argument("--disorder", choices=("uniform", "truncated-beta", "piecewise-density"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xxzdroplet", description="Droplet spectrum numerics for the random XXZ chain")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="assemble sector operators and export summaries")
    _common(p)
    p.add_argument("--n", type=_range_arg, default=[1], help="particle numbers, e.g. 1..3")

    p = sub.add_parser("spectrum", help="diagonalize a sector or the spin chain")
    _common(p)
    p.add_argument("--n", type=int, default=None, help="particle number (omit for the spin chain)")
    p.add_argument("--mode", choices=("full", "window"), default="full")

    p = sub.add_parser("band", help="droplet band table")
    p.add_argument("--delta", "--Delta", dest="band_Delta", type=float, required=True,
                   help="anisotropy")
    p.add_argument("--n", type=_range_arg, default=[1, 2, 3, 4, 5])
    p.add_argument("--out-dir", default=None)
    p.add_argument("--format", choices=("csv", "json"), default=None,
                   help="write a file instead of printing")

    p = sub.add_parser("correlate", help="correlators for one realization")
    _common(p)
    p.add_argument("--kind", choices=("sector", "spin"), default="sector")
    p.add_argument("--n", type=_range_arg, default=[1, 2])
    p.add_argument("--i", type=int, default=0)
    p.add_argument("--distances", type=_range_arg, default=[1, 2, 3])

    p = sub.add_parser("ensemble", help="Monte Carlo estimator runs")
    _common(p)
    p.add_argument("--estimator", choices=("fractional-moments", "eigencorrelator"))
    p.add_argument("--realizations", type=int)
    p.add_argument("--n", type=_range_arg, help="particle numbers (fractional moments use the first)")
    p.add_argument("--distances", type=_range_arg)

    p = sub.add_parser("verify", help="deterministic and statistical checks")
    _common(p)
    p.add_argument("suite", choices=("ct", "wegner", "identity", "schur"))
    p.add_argument("--n", type=_range_arg, default=None)
    p.add_argument("--realizations", type=int, default=None)
    p.add_argument("--M", type=int, default=3, help="box half-width (wegner, schur)")

    p = sub.add_parser("fit", help="fit exponential decay to a stored decay table")
    p.add_argument("input", help="decay CSV or JSON")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="json")
    return ap


# ---------------------------------------------------------------------------
# commands


class _Run:
    def __init__(self, args, name):
        self.args = args
        self.cfg = load_config(args.config) if getattr(args, "config", None) else {}
        self.out = Path(args.out_dir or os.environ.get("XXZDROPLET_OUT_DIR", "."))
        self.fmt = getattr(args, "format", None) or "csv"
        threads = getattr(args, "threads", None)
        self.threads = threads if threads is not None else int(os.environ.get("XXZDROPLET_THREADS", "1"))
        self.manifest = RunManifest(name, {}, 0, code_version(), list(sys.argv[1:]), _now())

    def write(self, rows, kind, stem=None) -> Path:
        path = self.out / f"{stem or self.manifest.experiment}_{kind}.{self.fmt}"
        write_records(rows, path, kind, self.fmt)
        self.manifest.outputs.append(str(path))
        return path

    def write_json(self, obj, stem) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / f"{stem}.json"
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2, default=_jsonable)
            fh.write("\n")
        self.manifest.outputs.append(str(path))
        return path

    def finish(self):
        self.manifest.finished = _now()
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest.save(self.out / f"{self.manifest.experiment}_manifest.json")


def _cmd_build(args) -> int:
    run = _Run(args, "build")
    params, disorder = _model(run.cfg, args)
    seed = _seed(run.cfg, args)
    omega = sample_disorder(disorder, params.L, seed)
    summary = []
    for N in args.n:
        op = build_sector_hamiltonian(N, params, omega)
        H = op.matrix
        diag = H.diagonal()
        off = abs(H).sum(axis=1).A1 - abs(diag)
        summary.append(dict(N=N, dim=op.dim, nnz=int(H.nnz), diag_min=float(diag.min()),
                            diag_max=float(diag.max()),
                            gershgorin=[float((diag - off).min()), float((diag + off).max())]))
    run.manifest.config = dict(params=params.to_dict(), disorder=disorder.to_dict(), N=args.n)
    run.manifest.master_seed = seed
    run.write_json({"operators": summary}, "build_summary")
    (run.out / "build_disorder.json").write_text(omega.to_json() + "\n")
    run.manifest.outputs.append(str(run.out / "build_disorder.json"))
    run.finish()
    for s in summary:
        print(f"N={s['N']} dim={s['dim']} nnz={s['nnz']} gershgorin=[{s['gershgorin'][0]:.6g}, {s['gershgorin'][1]:.6g}]")
    return 0


def _cmd_spectrum(args) -> int:
    run = _Run(args, "spectrum")
    params, disorder = _model(run.cfg, args)
    seed = _seed(run.cfg, args)
    omega = sample_disorder(disorder, params.L, seed)
    window = droplet_window(params.Delta, params.delta, 1)
    if args.n is None:
        op = build_spin_hamiltonian(params, omega)
        if args.mode == "window":
            raise ParameterError("window mode needs a particle number")
        data = diagonalize(op, interval=window)
    else:
        op = build_sector_hamiltonian(args.n, params, omega)
        data = diagonalize(op, mode=args.mode, interval=window)
    run.manifest.config = dict(params=params.to_dict(), disorder=disorder.to_dict(), N=args.n,
                               mode=args.mode)
    run.manifest.master_seed = seed
    path = run.write(spectrum_rows(data), "spectrum")
    run.finish()
    print(f"{data.size} eigenvalues ({len(data.window_members)} in window) -> {path}")
    return 0


def _cmd_band(args) -> int:
    rows = [(N, *droplet_band(N, args.band_Delta)) for N in args.n]
    if args.format:
        out = Path(args.out_dir or os.environ.get("XXZDROPLET_OUT_DIR", "."))
        path = write_records(rows, out / f"band.{args.format}", "band", args.format)
        print(path)
    else:
        print("N,lower,upper")
        for N, a, b in rows:
            print(f"{N},{a!r},{b!r}")
    return 0


def _cmd_correlate(args) -> int:
    run = _Run(args, "correlate")
    params, disorder = _model(run.cfg, args)
    seed = _seed(run.cfg, args)
    omega = sample_disorder(disorder, params.L, seed)
    I = droplet_window(params.Delta, params.delta, 1)
    records = []
    js = [args.i + d for d in args.distances]
    if args.kind == "sector":
        for N in args.n:
            data = diagonalize(build_sector_hamiltonian(N, params, omega), mode="window", interval=I)
            for j in js:
                records.append(CorrelatorRecord(seed, N, args.i, j, 0.0,
                                                sector_correlator(N, args.i, j, I, data)))
    else:
        data = diagonalize(build_spin_hamiltonian(params, omega), interval=I)
        X = number_observable(args.i, params.L)
        for j in js:
            Y = number_observable(j, params.L)
            records.append(CorrelatorRecord(seed, 0, args.i, j, 0.0, partition_sup(X, Y, I, data).value))
            dyn = dynamical_sup(X, Y, I, data)
            records.append(CorrelatorRecord(seed, 0, args.i, j, dyn.t_max, dyn.grid_max))
    run.manifest.config = dict(params=params.to_dict(), disorder=disorder.to_dict(),
                               kind=args.kind, N=args.n, i=args.i, j=js)
    run.manifest.master_seed = seed
    path = run.write(records, "correlator")
    run.finish()
    print(f"{len(records)} records -> {path}")
    return 0


def _ensemble_config(run, args) -> tuple[est.EnsembleConfig, str]:
    params, disorder = _model(run.cfg, args)
    e = dict(run.cfg.get("ensemble", {}))
    estimator = args.estimator or e.pop("estimator", "fractional-moments")
    e.pop("estimator", None)
    if args.realizations is not None:
        e["realizations"] = args.realizations
    if args.n is not None:
        e["N_list"] = args.n
    if args.distances is not None:
        e["distances"] = args.distances
    e = {k: tuple(v) if isinstance(v, list) else v for k, v in e.items()}
    return est.EnsembleConfig(params=params, disorder=disorder, master_seed=_seed(run.cfg, args), **e), estimator


def _cmd_ensemble(args) -> int:
    run = _Run(args, "ensemble")
    config, estimator = _ensemble_config(run, args)
    if estimator == "fractional-moments":
        rec = est.fractional_moment_scan(config, threads=run.threads)
    elif estimator == "eigencorrelator":
        rec = est.eigencorrelator_decay(config, threads=run.threads)
    else:
        raise SchemaError(f"unknown estimator {estimator!r}")
    run.manifest.config = dict(config.to_dict(), estimator=estimator)
    run.manifest.master_seed = config.master_seed
    run.write(rec.rows(), "decay")
    raw = [(r, d, float(v)) for r, row in enumerate(rec.samples) for d, v in zip(config.distances, row)]
    run.write(raw, "samples")
    fit = None if rec.fit is None else _fit_dict(rec.fit)
    diag = {k: v for k, v in rec.diagnostics.items()}
    run.write_json({"fit": fit, "diagnostics": diag, "monotone_2sigma": rec.monotone_within()},
                   "ensemble_fit")
    run.finish()
    if fit:
        print(f"m = {fit['m']:.6g}, 95% CI [{fit['ci'][0]:.6g}, {fit['ci'][1]:.6g}], R^2 = {fit['r2']:.4f}")
    return 0


def _fit_dict(f: est.FitResult) -> dict:
    return dict(log_C=f.log_C, m=f.m, ci=[float(c) for c in f.ci], r2=f.r2,
                no_decay=f.no_decay, n_points=f.n_points, d_range=list(f.d_range))


def _cmd_verify(args) -> int:
    run = _Run(args, f"verify_{args.suite}")
    params, disorder = _model(run.cfg, args)
    seed = _seed(run.cfg, args)
    run.manifest.master_seed = seed
    run.manifest.config = dict(params=params.to_dict(), disorder=disorder.to_dict(), suite=args.suite)
    R = args.realizations
    if args.suite == "ct":
        Ns = args.n or [2, 3]
        out, ok = {}, True
        for edge in (False, True):
            s = est.combes_thomas_ensemble(params, disorder, Ns, realizations=R or 100,
                                           master_seed=seed, edge=edge, threads=run.threads)
            out["edge_projection" if edge else "bulk"] = dict(
                checks=s.checks, violations=s.violations, min_margin=s.min_margin,
                log_margin_slope=s.log_margin_slope())
            ok &= s.violations == 0
            print(f"{'edge projection' if edge else 'bulk'}: {s.checks} checks, "
                  f"{s.violations} violations, min margin {s.min_margin:.4g}")
    elif args.suite == "wegner":
        N = (args.n or [2])[0]
        wp = est.WegnerParameters(params.Delta, params.delta)
        length = wp.shrink_length(params.lam, disorder.density_sup, args.M, N)
        hi = droplet_window(params.Delta, params.delta, 1)[1]
        x1 = -(N // 2)
        res = est.wegner_empirical(params, disorder, N, args.M, x1, (hi - length, hi),
                                   R or 2000, seed)
        out = asdict(res)
        ok = res.passed
        print(f"hits {res.hits}/{res.realizations}, Wilson upper {res.wilson_upper:.4g} vs bound {res.bound:.4g}")
    elif args.suite == "schur":
        N = (args.n or [2])[0]
        lo, hi = droplet_window(params.Delta, params.delta, 1)
        r = est.schur_identity_residuals(params, disorder, N, args.M, -(N // 2),
                                         np.linspace(lo, hi, 5), R or 10, seed)
        out = dict(max_residual=float(r.max()), instances=int(r.size))
        ok = bool(r.max() <= 1e-9)
        print(f"max residual {r.max():.3g} over {r.size} instances")
    else:
        out, ok = _verify_identities(params, disorder, seed, R or 10)
    out["passed"] = bool(ok)
    run.write_json(out, f"verify_{args.suite}")
    run.finish()
    return 0 if ok else 1


def _verify_identities(params, disorder, seed, R):
    I = droplet_window(params.Delta, params.delta, 1)
    L = params.L
    worst_sum = worst_vanish = 0.0
    for r in range(R):
        omega = sample_disorder(disorder, L, (seed, r))
        spin = diagonalize(build_spin_hamiltonian(params, omega))
        sectors = {N: diagonalize(build_sector_hamiltonian(N, params, omega))
                   for N in range(1, 2 * L + 2)}
        rng = np.random.default_rng(est.realization_seed(seed, r, 2))
        X = random_observable((-L,), L, rng)
        Y = random_observable((L,), L, rng)
        worst_vanish = max(worst_vanish, *vanishing_identity_values(X, Y, I, float(rng.uniform(0, 10)), spin))
        lhs = sum(sector_correlator(N, -L, L, I, d) for N, d in sectors.items())
        worst_sum = max(worst_sum, abs(lhs - number_correlator_sum(-L, L, I, spin, L)))
    ok = worst_sum <= 1e-8 and worst_vanish <= 1e-10
    print(f"sum identity max error {worst_sum:.3g}, vanishing identities max {worst_vanish:.3g}")
    return dict(sum_identity_max_error=worst_sum, vanishing_max=worst_vanish, seeds=R), ok


def _cmd_fit(args) -> int:
    rows = read_records(args.input, "decay")
    fit = est.fit_exponential([(d, m, e) for d, m, e, _ in rows])
    out = Path(args.out_dir or os.environ.get("XXZDROPLET_OUT_DIR", "."))
    out.mkdir(parents=True, exist_ok=True)
    d = _fit_dict(fit)
    if args.format == "json":
        path = out / "fit.json"
        path.write_text(json.dumps(d, indent=2) + "\n")
    else:
        path = out / "fit.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["log_C", "m", "ci_low", "ci_high", "r2", "no_decay"])
            w.writerow([repr(fit.log_C), repr(fit.m), repr(float(fit.ci[0])), repr(float(fit.ci[1])),
                        repr(fit.r2), fit.no_decay])
    print(f"m = {fit.m:.6g}, 95% CI [{fit.ci[0]:.6g}, {fit.ci[1]:.6g}]{' (no decay)' if fit.no_decay else ''}")
    return 0


_COMMANDS = {
    "build": _cmd_build,
    "spectrum": _cmd_spectrum,
    "band": _cmd_band,
    "correlate": _cmd_correlate,
    "ensemble": _cmd_ensemble,
    "verify": _cmd_verify,
    "fit": _cmd_fit,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (SchemaError, ParameterError, CapacityError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
