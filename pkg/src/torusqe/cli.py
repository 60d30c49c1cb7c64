"""Command-line experiment driver.

Each subcommand reads a flat ``key = value`` config, validates every entry
before computing, writes its CSV files atomically and records a
``manifest.json`` with SHA-256 digests of the outputs.

Exit codes: 0 success, 1 unexpected failure, 2 validation error,
3 budget or tolerance error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import numpy as np

from torusqe import __version__
from torusqe.eigenbasis import BASIS_KINDS, l4_norms, make_basis
from torusqe.errors import (
    BudgetError,
    ConfigError,
    DegenerateFitError,
    DomainError,
    EmptyWindowError,
    ToleranceError,
)
from torusqe.lattice import (
    enumerate_shell,
    shell_rows,
    shells_in_window,
    weyl_count,
    window_from_lambda,
    window_row,
)
from torusqe.symbols import PROFILES, SymbolFamily, TrigPoly, parse_modes, rescaled_bump
from torusqe.variance import (
    DEFAULT_QUAD_BUDGET,
    birkhoff_variance,
    default_centers,
    fit_decay,
    quantum_variance,
    small_ball_report,
    theorem2_bound_report,
)

THREADS_ENV = "TORUSQE_THREADS"


# ---------------------------------------------------------------------------
# typed config

def _int(v: str) -> int:
    return int(v)


def _float(v: str) -> float:
    return float(v)


def _str(v: str) -> str:
    return v.strip()


def _bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _list(item: Callable[[str], Any]) -> Callable[[str], list]:
    def parse(v: str) -> list:
        parts = [p for p in v.replace(";", ",").split(",") if p.strip()]
        return [item(p.strip()) for p in parts]
    return parse


def _choice(*options: str) -> Callable[[str], str]:
    def parse(v: str) -> str:
        v = v.strip()
        if v not in options:
            raise ValueError(f"{v!r} not in {options}")
        return v
    return parse


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any = None
    required: bool = False


_SYMBOL_KEYS = {
    "symbol": Key(_str),
    "symbol_file": Key(_str),
    "symbol_id": Key(_str, "a"),
}

SCHEMAS: dict[str, dict[str, Key]] = {
    "shells": {
        "d": Key(_int, required=True),
        "n": Key(_list(_int), []),
        "lambdas": Key(_list(_float), []),
        "hbar": Key(_float),
        "alpha": Key(_float),
    },
    "qvariance": {
        "d": Key(_int, required=True),
        "lambdas": Key(_list(_float), required=True),
        **_SYMBOL_KEYS,
        "basis": Key(_choice(*BASIS_KINDS), "haar_random"),
        "seeds": Key(_list(_int)),
        "min_shells": Key(_int, 5),
    },
    "birkhoff": {
        "d": Key(_int, required=True),
        "T": Key(_list(_float), required=True),
        **_SYMBOL_KEYS,
        "n_samples": Key(_int, 100_000),
        "quad_budget": Key(_int, DEFAULT_QUAD_BUDGET),
    },
    "smallball": {
        "d": Key(_int, required=True),
        "lambdas": Key(_list(_float), required=True),
        "nu1": Key(_float, 0.1),
        "radius_scale": Key(_float, 0.25),
        "basis": Key(_choice(*BASIS_KINDS), "haar_random"),
        "seeds": Key(_list(_int)),
        "centers_per_axis": Key(_int, 10),
        "corners": Key(_bool, True),
        "band_lo": Key(_float, 0.5),
        "band_hi": Key(_float, 1.5),
    },
    "l4": {
        "d": Key(_int, required=True),
        "n": Key(_list(_int), []),
        "top": Key(_int, 0),
        "n_max": Key(_int, 10_000),
        "basis": Key(_choice(*BASIS_KINDS), "haar_random"),
        "seeds": Key(_list(_int)),
    },
    "weyl": {
        "d": Key(_int, required=True),
        "lambdas": Key(_list(_float), required=True),
        "band_lo": Key(_float, 0.8),
        "band_hi": Key(_float, 1.2),
    },
    "theorem2": {
        "d": Key(_int, required=True),
        "lambdas": Key(_list(_float), required=True),
        "nu0": Key(_float, 0.5),
        "nu1": Key(_float, 0.0),
        "s": Key(_float, required=True),
        "profile": Key(_choice(*PROFILES), "cos8"),
        "base_radius": Key(_float, 0.2),
        "x0": Key(_list(_float)),
        "cutoff": Key(_int, 48),
        "tail_tol": Key(_float, 1e-8),
        "basis": Key(_choice(*BASIS_KINDS), "haar_random"),
        "slack": Key(_float, 10.0),
    },
}

_COMMON = {"seed": Key(_int, 0), "threads": Key(_int, 1)}


def read_config_text(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return dict(parser["config"])


def validate(command: str, raw: dict[str, str]) -> dict[str, Any]:
    """Typed, complete parameter set; rejects unknown or malformed keys."""
    schema = {**SCHEMAS[command], **_COMMON}
    for key in raw:
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r} for command {command!r}")
    out: dict[str, Any] = {}
    for key, spec in schema.items():
        if key in raw:
            try:
                out[key] = spec.parse(raw[key])
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"invalid value for {key!r}: {exc}") from exc
        elif spec.required:
            raise ConfigError(f"missing required config key {key!r}")
        else:
            out[key] = spec.default
    if out["d"] < 2:
        raise ConfigError(f"invalid value for 'd': dimension must be >= 2, got {out['d']}")
    if "seeds" in schema and out.get("seeds") is None:
        out["seeds"] = [out["seed"]]
    if "x0" in schema and out.get("x0") is None:
        out["x0"] = [0.5] * out["d"]
    if "x0" in schema and len(out["x0"]) != out["d"]:
        raise ConfigError(f"invalid value for 'x0': need {out['d']} coordinates")
    if "symbol" in schema:
        if (out["symbol"] is None) == (out["symbol_file"] is None):
            raise ConfigError("exactly one of 'symbol' or 'symbol_file' must be given")
    for key in ("lambdas",):
        if key in out and any(v < 4 for v in out[key]):
            raise ConfigError(f"invalid value for {key!r}: every lambda must be >= 4")
    return out


def _load_symbol(params: dict) -> TrigPoly:
    try:
        if params["symbol_file"] is not None:
            a = TrigPoly.load(params["symbol_file"])
        else:
            a = parse_modes(params["symbol"], params["d"])
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid value for 'symbol_file': {exc}") from exc
    except DomainError as exc:
        raise ConfigError(f"invalid value for 'symbol': {exc}") from exc
    if a.d != params["d"]:
        raise ConfigError(f"symbol dimension {a.d} does not match d={params['d']}")
    return a


# ---------------------------------------------------------------------------
# output

def fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def render_csv(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def verify_manifest(out_dir) -> list[str]:
    """Names of outputs whose digest no longer matches the manifest."""
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text())
    bad = []
    for name, digest in manifest["outputs"].items():
        path = out_dir / name
        if not path.exists() or hashlib.sha256(path.read_bytes()).hexdigest() != digest:
            bad.append(name)
    return bad


# ---------------------------------------------------------------------------
# commands: each returns {filename: csv text}

QVAR_COLS = ["d", "lambda", "hbar", "alpha", "n_states", "shell_count", "basis_kind",
             "seed", "symbol_id", "V"]
BIRKHOFF_COLS = ["d", "symbol_id", "T", "V_modes", "V_mc", "mc_stderr", "bound_ratio"]
SMALLBALL_COLS = ["d", "lambda", "nu1", "basis_kind", "seed", "j", "ratio_min", "ratio_max"]
FIT_COLS = ["experiment_id", "slope", "intercept", "max_residual"]


def cmd_shells(p: dict) -> dict[str, str]:
    out = {}
    if p["n"]:
        out["shells.csv"] = render_csv(["d", "n", "multiplicity"],
                                      shell_rows([enumerate_shell(p["d"], n) for n in p["n"]]))
    wins = [window_from_lambda(p["d"], lam) for lam in p["lambdas"]]
    if p["hbar"] is not None or p["alpha"] is not None:
        if p["hbar"] is None or p["alpha"] is None:
            raise ConfigError("'hbar' and 'alpha' must be given together")
        wins.append(shells_in_window(p["d"], p["hbar"], p["alpha"]))
    if wins:
        out["windows.csv"] = render_csv(
            ["d", "hbar", "alpha", "n_min", "n_max", "shell_count", "n_states"],
            [window_row(w) for w in wins])
    if not out:
        raise ConfigError("give 'n', 'lambdas' or 'hbar'/'alpha'")
    return out


def cmd_qvariance(p: dict) -> dict[str, str]:
    a = _load_symbol(p)
    rows, fits = [], []
    wins = [window_from_lambda(p["d"], lam) for lam in p["lambdas"]]
    for seed in p["seeds"]:
        points = []
        for w in wins:
            row = {"d": p["d"], "lambda": w.lam_value, "hbar": w.hbar, "alpha": w.alpha,
                   "n_states": w.n_states, "shell_count": w.shell_count,
                   "basis_kind": p["basis"], "seed": seed, "symbol_id": p["symbol_id"]}
            try:
                res = quantum_variance(a, w, p["basis"], seed, p["symbol_id"],
                                       n_jobs=p["threads"])
            except EmptyWindowError:
                row["V"] = "skipped"
            else:
                row["V"] = res.V
                if w.shell_count >= p["min_shells"]:
                    points.append((w.lam_value, res.V))
            rows.append(row)
        exp_id = f"qvariance_{p['symbol_id']}_{p['basis']}_seed{seed}"
        try:
            fit = fit_decay(points)
        except DegenerateFitError:
            fits.append({"experiment_id": exp_id, "slope": "degenerate",
                         "intercept": "degenerate", "max_residual": "degenerate"})
        else:
            fits.append({"experiment_id": exp_id, "slope": fit.slope,
                         "intercept": fit.intercept, "max_residual": fit.max_residual})
    return {"qvariance.csv": render_csv(QVAR_COLS, rows), "fit.csv": render_csv(FIT_COLS, fits)}


def cmd_birkhoff(p: dict) -> dict[str, str]:
    a = _load_symbol(p)
    rows = []
    for T in p["T"]:
        if T <= 0:
            raise ConfigError(f"invalid value for 'T': {T} must be positive")
        res = birkhoff_variance(a, T, p["n_samples"], p["seed"], p["quad_budget"],
                                p["symbol_id"])
        rows.append({"d": p["d"], **res.__dict__})
    return {"birkhoff.csv": render_csv(BIRKHOFF_COLS, rows)}


def cmd_smallball(p: dict) -> dict[str, str]:
    centers = default_centers(p["d"], p["centers_per_axis"], p["corners"])
    rows, summary = [], []
    for lam in p["lambdas"]:
        w = window_from_lambda(p["d"], lam)
        for seed in p["seeds"]:
            base = {"d": p["d"], "lambda": w.lam_value, "nu1": p["nu1"],
                    "basis_kind": p["basis"], "seed": seed}
            if w.n_states == 0:
                summary.append({**base, "n_states": 0, "radius": None,
                                "fraction_in_band": "skipped"})
                continue
            rep = small_ball_report(w, p["basis"], seed, p["nu1"], centers,
                                    band=(p["band_lo"], p["band_hi"]),
                                    radius_scale=p["radius_scale"])
            for j, r in enumerate(rep.rows):
                rows.append({**base, "j": j, "ratio_min": r["ratio_min"],
                             "ratio_max": r["ratio_max"]})
            summary.append({**base, "n_states": rep.n_states, "radius": rep.radius,
                            "fraction_in_band": rep.fraction_in_band})
    return {
        "smallball.csv": render_csv(SMALLBALL_COLS, rows),
        "smallball_summary.csv": render_csv(
            ["d", "lambda", "nu1", "basis_kind", "seed", "n_states", "radius",
             "fraction_in_band"], summary),
    }


def largest_shells(d: int, top: int, n_max: int) -> list:
    shells = [enumerate_shell(d, n) for n in range(1, n_max + 1)]
    shells.sort(key=lambda s: (-s.multiplicity, s.n))
    return [s for s in shells[:top] if s.multiplicity]


def cmd_l4(p: dict) -> dict[str, str]:
    shells = [enumerate_shell(p["d"], n) for n in p["n"]]
    if p["top"]:
        shells += largest_shells(p["d"], p["top"], p["n_max"])
    if not shells:
        raise ConfigError("give 'n' or 'top'")
    rows = []
    for shell in shells:
        if not shell.multiplicity:
            continue
        for seed in p["seeds"]:
            values = l4_norms(make_basis(shell, p["basis"], seed))
            for j, v in enumerate(values):
                rows.append({"d": p["d"], "n": shell.n, "multiplicity": shell.multiplicity,
                             "basis_kind": p["basis"], "seed": seed, "j": j, "l4_4": v})
    return {"l4.csv": render_csv(["d", "n", "multiplicity", "basis_kind", "seed", "j", "l4_4"],
                                 rows)}


def cmd_weyl(p: dict) -> dict[str, str]:
    rows = []
    for lam in p["lambdas"]:
        count, predicted, ratio = weyl_count(p["d"], lam)
        rows.append({"d": p["d"], "lambda": lam, "count": count, "predicted": predicted,
                     "ratio": ratio, "in_band": p["band_lo"] <= ratio <= p["band_hi"]})
    return {"weyl.csv": render_csv(["d", "lambda", "count", "predicted", "ratio", "in_band"],
                                   rows)}


def cmd_theorem2(p: dict) -> dict[str, str]:
    if not p["s"] > (p["d"] + 4) / 2:
        raise ConfigError(f"invalid value for 's': must exceed (d+4)/2 = {(p['d'] + 4) / 2}")

    def gen(hbar):
        return rescaled_bump(p["x0"], p["nu1"], hbar, p["profile"], p["cutoff"],
                             p["base_radius"], p["tail_tol"])

    family = SymbolFamily(gen, p["nu1"], name=p["profile"])
    wins = [w for w in (window_from_lambda(p["d"], lam) for lam in p["lambdas"]) if w.n_states]
    if not wins:
        raise ConfigError("every window in 'lambdas' is empty")
    rep = theorem2_bound_report(family, wins, p["nu0"], p["s"], p["basis"], p["seed"],
                                p["slack"])
    cols = ["d", "lambda", "hbar", "n_states", "nu0", "nu1", "s", "V", "term_l2",
            "term_sobolev", "term_remainder", "ratio", "tail", "bounded"]
    rows = [{"d": p["d"], "nu0": p["nu0"], "nu1": p["nu1"], "s": p["s"], **r,
             "bounded": rep.bounded} for r in rep.rows]
    return {"theorem2.csv": render_csv(cols, rows)}


COMMANDS = {
    "shells": cmd_shells,
    "qvariance": cmd_qvariance,
    "birkhoff": cmd_birkhoff,
    "smallball": cmd_smallball,
    "l4": cmd_l4,
    "weyl": cmd_weyl,
    "theorem2": cmd_theorem2,
}


def run(command: str, raw: dict[str, str], out_dir: Path, seed: int | None = None,
        threads: int | None = None) -> dict[str, str]:
    """Validate, compute, then write outputs and manifest; returns the CSV texts."""
    raw = dict(raw)
    if seed is not None:
        raw["seed"] = str(seed)
    if threads is not None:
        raw["threads"] = str(threads)
    env_threads = os.environ.get(THREADS_ENV)
    if env_threads is not None:
        raw["threads"] = env_threads
    params = validate(command, raw)
    started = datetime.now(timezone.utc).isoformat()
    outputs = COMMANDS[command](params)
    finished = datetime.now(timezone.utc).isoformat()
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in outputs.items():
        _atomic_write(out_dir / name, text)
    manifest = {
        "tool": "torusqe",
        "version": __version__,
        "command": command,
        "parameters": params,
        "seed": params["seed"],
        "threads": params["threads"],
        "threads_env": env_threads,
        "started": started,
        "finished": finished,
        "outputs": {name: sha256(text) for name, text in outputs.items()},
    }
    _atomic_write(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
    return outputs


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="torusqe", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="key = value config file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override or add one config entry")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--seed", type=int, help="base seed")
        sp.add_argument("--threads", type=int, help=f"worker threads (env {THREADS_ENV} wins)")
    vp = sub.add_parser("verify", help="check output digests against manifest.json")
    vp.add_argument("--out", type=Path, default=Path("out"))
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            bad = verify_manifest(args.out)
            for name in bad:
                print(f"digest mismatch: {name}", file=sys.stderr)
            return 1 if bad else 0
        raw = read_config_text(args.config.read_text()) if args.config else {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            raw[key.strip()] = value.strip()
        outputs = run(args.command, raw, args.out, args.seed, args.threads)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BudgetError, ToleranceError) as exc:
        print(f"budget: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for name in outputs:
        print(args.out / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
