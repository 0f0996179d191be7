"""gapspec command line: solve / sweep / check driven by a strict JSON config."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import continuation as cont
from . import discretization as disc
from . import solver
from .errors import ConvergenceError, GapSpecError, ValidationError
from .operator_model import DecomposedOperator, GapProfile, from_blocks, gap_profile, read_matrix_file

log = logging.getLogger("gapspec")

COLUMNS = ["side", "k", "channel", "tau", "lambda", "status", "residual", "iterations", "multiplicity"]
COMMANDS = ("solve", "sweep", "check")
MODELS = ("pauli", "dirac", "matrix-file")

_TOP_KEYS = {
    "command", "model", "nu", "l", "kappa", "potential", "matrix", "grid",
    "window", "levels", "tol", "sweep", "output", "format",
}
_MODEL_KEYS = {"pauli": {"nu", "l"}, "dirac": {"kappa", "potential"}, "matrix-file": {"matrix"}}


@dataclass
class SweepBlock:
    tau_values: list[float]
    perturbation: dict
    k_set: list[tuple[str, int]] | None = None


@dataclass
class RunConfig:
    command: str
    model: str
    levels: int = 1
    nu: float = 0.0
    l_values: list[int] = field(default_factory=lambda: [0])
    kappa_values: list[int] = field(default_factory=lambda: [-1])
    potential: disc.PotentialSpec | None = None
    matrix: Path | None = None
    grid: disc.RadialGrid = field(default_factory=disc.RadialGrid)
    b_plus: float | None = None
    b_minus: float | None = None
    tol: float | None = None
    sweep: SweepBlock | None = None
    output: Path | None = None
    format: str = "csv"
    base_dir: Path = Path(".")

    @property
    def window(self) -> tuple[float, float]:
        """(b_plus, b_minus), defaulting to the continuum edges of the model."""
        if self.model == "matrix-file":
            default = (-math.inf, math.inf)
        else:
            shift = self.potential.constant_offset if self.potential is not None else 0.0
            default = (-1.0 + shift, 1.0 + shift)
        bp = default[0] if self.b_plus is None else self.b_plus
        bm = default[1] if self.b_minus is None else self.b_minus
        return bp, bm

    @property
    def tolerance(self) -> float:
        if self.tol is not None:
            return self.tol
        return solver.MATRIX_TOL if self.model == "matrix-file" else solver.PDE_TOL


def _edge(x, name):
    if isinstance(x, str) and x in ("inf", "+inf", "-inf"):
        return float(x)
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return float(x)
    raise ValidationError(f"{name} must be a number or 'inf'/'-inf', got {x!r}")


def _int_list(x, name) -> list[int]:
    if isinstance(x, int) and not isinstance(x, bool):
        x = [x]
    if not isinstance(x, list) or not x or not all(isinstance(v, int) and not isinstance(v, bool) for v in x):
        raise ValidationError(f"{name} must be an integer or a non-empty list of integers, got {x!r}")
    return x


def _strict(d: Any, allowed: set[str], where: str) -> dict:
    if not isinstance(d, dict):
        raise ValidationError(f"{where} must be a JSON object")
    extra = set(d) - allowed
    if extra:
        raise ValidationError(f"unknown keys in {where}: {sorted(extra)}")
    return d


def parse_config(doc: dict, command: str, base_dir: Path = Path(".")) -> RunConfig:
    """Strictly validate a config document; unknown keys and mixed models are errors."""
    _strict(doc, _TOP_KEYS, "config")
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}")
    if "command" in doc and doc["command"] != command:
        raise ValidationError(f"config is for command {doc['command']!r}, invoked as {command!r}")
    model = doc.get("model")
    if model not in MODELS:
        raise ValidationError(f"model must be one of {MODELS}, got {model!r}")
    for other, keys in _MODEL_KEYS.items():
        if other != model and keys & set(doc):
            raise ValidationError(f"keys {sorted(keys & set(doc))} do not belong to model {model!r}")
    cfg = RunConfig(command=command, model=model, base_dir=base_dir)
    levels = doc.get("levels", 1)
    if not isinstance(levels, int) or isinstance(levels, bool) or levels < 1:
        raise ValidationError(f"levels must be an integer >= 1, got {levels!r}")
    cfg.levels = levels
    if model == "pauli":
        cfg.nu = float(doc.get("nu", 0.0))
        cfg.l_values = _int_list(doc.get("l", [0]), "l")
        for l in cfg.l_values:
            disc.ChannelSpec("pauli", nu=cfg.nu, l=l)
    elif model == "dirac":
        cfg.kappa_values = _int_list(doc.get("kappa", [-1]), "kappa")
        for kappa in cfg.kappa_values:
            disc.ChannelSpec("dirac", kappa=kappa)
        if "potential" not in doc:
            raise ValidationError("dirac model needs a 'potential'")
        cfg.potential = disc.PotentialSpec.from_config(doc["potential"], base_dir)
    else:
        if "matrix" not in doc:
            raise ValidationError("matrix-file model needs a 'matrix' path")
        p = Path(doc["matrix"])
        cfg.matrix = p if p.is_absolute() else base_dir / p
        if not cfg.matrix.exists():
            raise ValidationError(f"matrix file not found: {cfg.matrix}")
    if "grid" in doc:
        if model == "matrix-file":
            raise ValidationError("'grid' does not apply to the matrix-file model")
        g = _strict(doc["grid"], {"R", "N"}, "grid")
        cfg.grid = disc.RadialGrid(float(g.get("R", 80.0)), int(g.get("N", 4000)))
    if "window" in doc:
        w = _strict(doc["window"], {"b_plus", "b_minus"}, "window")
        if "b_plus" in w:
            cfg.b_plus = _edge(w["b_plus"], "b_plus")
        if "b_minus" in w:
            cfg.b_minus = _edge(w["b_minus"], "b_minus")
    bp, bm = cfg.window
    if model != "matrix-file" and not (math.isfinite(bp) and math.isfinite(bm)):
        raise ValidationError("the window must be finite for the built-in models")
    if "tol" in doc:
        cfg.tol = float(doc["tol"])
        if not cfg.tol > 0:
            raise ValidationError(f"tol must be positive, got {cfg.tol!r}")
    if "sweep" in doc:
        cfg.sweep = _parse_sweep(doc["sweep"], model)
    elif command == "sweep":
        raise ValidationError("the sweep command needs a 'sweep' block")
    if "output" in doc:
        p = Path(doc["output"])
        cfg.output = p if p.is_absolute() else base_dir / p
    fmt = doc.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ValidationError(f"format must be 'csv' or 'json', got {fmt!r}")
    cfg.format = fmt
    return cfg


def _parse_sweep(d: Any, model: str) -> SweepBlock:
    _strict(d, {"tau", "perturbation", "k_set"}, "sweep")
    if "tau" not in d or "perturbation" not in d:
        raise ValidationError("sweep needs 'tau' and 'perturbation'")
    tau = d["tau"]
    if isinstance(tau, dict):
        _strict(tau, {"start", "stop", "step"}, "sweep.tau")
        start, stop, step = float(tau.get("start", 0.0)), float(tau["stop"]), float(tau["step"])
        if not step > 0:
            raise ValidationError("sweep.tau.step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9))
        taus = [round(start + i * step, 12) for i in range(n + 1)]
    elif isinstance(tau, list):
        taus = [float(t) for t in tau]
    else:
        raise ValidationError("sweep.tau must be a list or a {start, stop, step} object")
    pert = d["perturbation"]
    if model == "matrix-file":
        _strict(pert, {"kind", "values"}, "sweep.perturbation")
        if pert.get("kind") != "diagonal":
            raise ValidationError("matrix-file sweeps take a {'kind': 'diagonal', 'values': [...]} perturbation")
    k_set = None
    if "k_set" in d:
        k_set = []
        for item in d["k_set"]:
            if not (isinstance(item, list) and len(item) == 2 and item[0] in solver.SIDES and isinstance(item[1], int)):
                raise ValidationError(f"k_set entries must be [side, k], got {item!r}")
            k_set.append((item[0], item[1]))
    return SweepBlock(taus, pert, k_set)


def load_config(path: str | Path, command: str) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from None
    return parse_config(doc, command, base_dir=path.parent)


# --- model construction --------------------------------------------------------


@dataclass
class Channel:
    label: str
    multiplicity: int
    op: DecomposedOperator
    perturbation: DecomposedOperator | None = None
    v_sup: float = 0.0


def build_channels(cfg: RunConfig, with_perturbation: bool = False) -> list[Channel]:
    out = []
    pert_doc = cfg.sweep.perturbation if (with_perturbation and cfg.sweep) else None
    if cfg.model == "pauli":
        pert = disc.PotentialSpec.from_config(pert_doc, cfg.base_dir) if pert_doc else None
        for l in cfg.l_values:
            spec = disc.ChannelSpec("pauli", nu=cfg.nu, l=l)
            ch = Channel(spec.label, spec.multiplicity, disc.build_pauli_channel(cfg.nu, l, cfg.grid))
            if pert is not None:
                ch.perturbation = disc.pauli_perturbation(pert, l, cfg.grid)
                ch.v_sup = float(np.max(np.abs(pert.evaluate(cfg.grid.nodes, cfg.grid))))
            out.append(ch)
    elif cfg.model == "dirac":
        pert = disc.PotentialSpec.from_config(pert_doc, cfg.base_dir) if pert_doc else None
        for kappa in cfg.kappa_values:
            spec = disc.ChannelSpec("dirac", kappa=kappa)
            ch = Channel(spec.label, spec.multiplicity, disc.build_dirac_radial(cfg.potential, kappa, cfg.grid))
            if pert is not None:
                ch.perturbation = disc.compress_dirac_potential(pert, kappa, cfg.grid)
                ch.v_sup = pert.sup_norm(cfg.grid)
            out.append(ch)
    else:
        op = read_matrix_file(cfg.matrix)
        ch = Channel("matrix", 1, op)
        if pert_doc is not None:
            vals = np.asarray(pert_doc.get("values", []), dtype=float)
            if vals.size != op.dim:
                raise ValidationError(f"diagonal perturbation needs {op.dim} values, got {vals.size}")
            ch.perturbation = from_blocks(
                np.diag(vals[: op.n_plus]), np.zeros((op.n_plus, op.n_minus)), np.diag(vals[op.n_plus :])
            )
            ch.v_sup = float(np.max(np.abs(vals)))
        out.append(ch)
    return out


# --- tables --------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float) or isinstance(x, np.floating):
        return format(float(x), ".17g")
    return str(x)


def level_row(r: solver.LevelResult, channel: str, multiplicity: int, tau=None) -> dict:
    return {
        "side": r.side,
        "k": r.k,
        "channel": channel,
        "tau": "" if tau is None else float(tau),
        "lambda": float(r.value),
        "status": r.status.value,
        "residual": float(r.residual),
        "iterations": int(r.iterations),
        "multiplicity": multiplicity,
    }


def profile_dict(channel: str, p: GapProfile) -> dict:
    return {
        "channel": channel,
        "a_minus": p.a_minus,
        "a_plus": p.a_plus,
        "b_minus": p.b_minus,
        "b_plus": p.b_plus,
        "k0_plus": p.k0_plus,
        "k0_minus": p.k0_minus,
        "ordering": p.ordering,
        "problems": p.problems(),
    }


def render(payload: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(payload, indent=2, sort_keys=False, default=_json_default) + "\n"
    buf = io.StringIO()
    buf.write(f"# gapspec {payload['command']} model={payload['model']}\n")
    for p in payload.get("profiles", []):
        fields = " ".join(f"{k}={_fmt(v)}" for k, v in p.items() if k not in ("channel", "problems"))
        buf.write(f"# profile channel={p['channel']} {fields}\n")
        for msg in p["problems"]:
            buf.write(f"# warning channel={p['channel']} {msg}\n")
    for key in ("hypotheses",):
        if key in payload:
            for label, rep in payload[key].items():
                buf.write(f"# {key} channel={label} {json.dumps(rep, default=_json_default, sort_keys=True)}\n")
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in payload["levels"]:
        w.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not JSON serializable: {type(x)}")


def read_table(path: str | Path) -> list[dict]:
    """Parse a CSV or JSON level table written by gapspec back into typed rows."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        rows = json.loads(text)["levels"]
    else:
        lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
        rows = list(csv.DictReader(lines))
    out = []
    for r in rows:
        out.append(
            {
                "side": r["side"],
                "k": int(r["k"]),
                "channel": r["channel"],
                "tau": None if r["tau"] in ("", None) else float(r["tau"]),
                "lambda": float(r["lambda"]),
                "status": solver.Status(r["status"]),
                "residual": float(r["residual"]),
                "iterations": int(r["iterations"]),
                "multiplicity": int(r["multiplicity"]),
            }
        )
    return out


# --- commands --------------------------------------------------------------------


def _workers() -> int:
    raw = os.environ.get("GAPSPEC_THREADS", "1")
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"GAPSPEC_THREADS must be an integer, got {raw!r}") from None


def _solve_channels(cfg: RunConfig, channels: list[Channel]):
    bp, bm = cfg.window
    tol = cfg.tolerance
    per_channel = []
    for ch in channels:
        prof = gap_profile(ch.op, bm, bp)
        prof, plus, minus = solver.solve_both_sides(ch.op, prof, cfg.levels, tol, workers=_workers())
        per_channel.append((ch, prof, plus, minus))
        log.info("channel %s: a-=%.6g a+=%.6g", ch.label, prof.a_minus, prof.a_plus)
    return per_channel


def _merge(per_channel):
    glob = solver.merged_profile([p for _, p, _, _ in per_channel])
    merged = {}
    for side in solver.SIDES:
        merged[side] = solver.merge_channels(
            [(ch.label, ch.multiplicity, plus if side == "plus" else minus) for ch, _, plus, minus in per_channel],
            glob,
            side,
        )
    expanded = solver.expand_merged(merged["plus"]) + solver.expand_merged(merged["minus"])
    glob = glob.with_k0(solver.first_admissible(e for e in expanded if e.side == "plus"),
                        solver.first_admissible(e for e in expanded if e.side == "minus"))
    return glob, merged, expanded


def cmd_solve(cfg: RunConfig) -> dict:
    channels = build_channels(cfg)
    per_channel = _solve_channels(cfg, channels)
    profiles, rows = [], []
    for ch, prof, plus, minus in per_channel:
        profiles.append(profile_dict(ch.label, prof))
        rows += [level_row(r, ch.label, ch.multiplicity) for r in plus + minus]
    if len(channels) > 1 or channels[0].multiplicity > 1:
        glob, merged, _ = _merge(per_channel)
        profiles.append(profile_dict("merged", glob))
        for side in solver.SIDES:
            for m in merged[side]:
                r = solver.LevelResult(m.side, m.k, m.value, m.status, m.residual, m.iterations)
                rows.append(level_row(r, f"merged/{m.channel}", m.multiplicity))
    return {"command": "solve", "model": cfg.model, "profiles": profiles, "levels": rows}


def cmd_sweep(cfg: RunConfig) -> dict:
    channels = build_channels(cfg, with_perturbation=True)
    bp, bm = cfg.window
    tol = cfg.tolerance
    sw = cfg.sweep
    profiles, rows, hyp = [], [], {}
    for ch in channels:
        k_set = sw.k_set or [(s, k) for s in solver.SIDES for k in range(1, cfg.levels + 1)]
        config = cont.SweepConfig(tuple(sw.tau_values), tuple(k_set), ch.perturbation, ch.v_sup)
        prof = cont.uniform_profile(ch.op, ch.perturbation, config.tau_values, bm, bp)
        branches = cont.sweep(ch.op, config, prof, tol)
        report = cont.verify_uniform_bounds(branches, prof, v_sup=ch.v_sup, tol=tol)
        profiles.append(profile_dict(ch.label, prof))
        hyp[ch.label] = report.to_dict()
        for br in branches:
            rows += [level_row(r, ch.label, ch.multiplicity, tau) for tau, r in br.points]
    return {"command": "sweep", "model": cfg.model, "profiles": profiles, "hypotheses": hyp, "levels": rows}


def cmd_check(cfg: RunConfig) -> dict:
    channels = build_channels(cfg)
    per_channel = _solve_channels(cfg, channels)
    tol = max(cfg.tolerance, 1e-12) * 10
    reports = {}
    profiles = []
    for ch, prof, plus, minus in per_channel:
        profiles.append(profile_dict(ch.label, prof))
        reports[ch.label] = solver.spectrum_check(ch.op, prof, plus + minus, tol).to_dict()
    payload = {"command": "check", "model": cfg.model, "profiles": profiles, "channels": reports}
    if len(channels) > 1 or channels[0].multiplicity > 1:
        glob, _, expanded = _merge(per_channel)
        profiles.append(profile_dict("merged", glob))
        payload["merged"] = solver.merged_spectrum_check(
            [(ch.op, ch.multiplicity) for ch in channels], glob, expanded, tol
        ).to_dict()
    payload["ok"] = all(r["ok"] for r in reports.values()) and payload.get("merged", {"ok": True})["ok"]
    return payload


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute one configured run; returns (exit status, rendered output)."""
    if cfg.command == "solve":
        payload = cmd_solve(cfg)
        text = render(payload, cfg.format)
    elif cfg.command == "sweep":
        payload = cmd_sweep(cfg)
        text = render(payload, cfg.format)
    else:
        payload = cmd_check(cfg)
        text = json.dumps(payload, indent=2, default=_json_default) + "\n"
    if cfg.output is not None:
        cfg.output.parent.mkdir(parents=True, exist_ok=True)
        cfg.output.write_text(text)
    status = 0
    if cfg.command == "check" and not payload["ok"]:
        status = 1
    return status, text


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="gapspec", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--output", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), help="output format")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, args.command)
        if args.output:
            cfg.output = Path(args.output)
        if args.format:
            cfg.format = args.format
        status, text = run(cfg)
    except ConvergenceError as exc:
        print(f"gapspec: solver did not converge: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, GapSpecError) as exc:
        print(f"gapspec: {exc}", file=sys.stderr)
        return 2
    if cfg.output is None:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
