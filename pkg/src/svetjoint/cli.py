"""Command-line interface.

Every command prints one JSON report (``schema: 1``) on stdout; warnings and
errors go to stderr.  Exit codes: 0 success, 1 usage or configuration error,
2 audit failure.

Experiment configuration is a JSON document::

    {
      "n_parties": 3,
      "state": "ghz+",                     # ghz+ | ghz- | mixed | path to amplitude file
      "settings": [                        # per party: [setting for x=0, setting for x=1]
        [{"direction": [1, 0, 0]}, {"theta": 1.5708, "phi": 0.7854, "sharpness": 1.0}],
        ...
      ],
      "joint": {"eta1": 0.7071, "eta2": 0.7071},   # optional: party 1 measures jointly
      "shots": 100000,
      "seed": 7
    }

Amplitude files hold one complex amplitude per line as ``re im``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import secrets
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .measure import (
    AdmissibilityError,
    JointPovm,
    Setting,
    busch_margin,
    equal_sharpness_max,
    joint_povm,
)
from .optimize import AngleVector, maximize
from .qcore import DensityMatrix, Direction, PreconditionError, make_ghz, maximally_mixed
from .simulate import (
    AuditReport,
    audit_chain_n,
    audit_chain_three,
    audit_no_signaling,
    empirical_correlators,
    empirical_joint_correlators,
    sample_grid,
    sample_joint,
    write_shots_csv,
)
from .svetlichny import SettingsGrid, bounds, correlator_table, svetlichny_joint_value, svetlichny_value

log = logging.getLogger("svetjoint")

SCHEMA = 1
EXIT_OK, EXIT_USAGE, EXIT_AUDIT = 0, 1, 2
UNIT_WARN_TOL = 1e-9
STATE_WARN_TOL = 1e-6


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse exits with 2 by default
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class ExperimentConfig:
    n_parties: int
    state_spec: str
    rho: DensityMatrix
    grid: SettingsGrid
    joint: JointPovm | None
    eta1: float | None
    eta2: float | None
    shots: int | None
    seed: int | None
    raw: dict


def _finite(obj: Any, path: str = "report") -> Any:
    if isinstance(obj, dict):
        return {k: _finite(v, f"{path}.{k}") for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v, f"{path}[{i}]") for i, v in enumerate(obj)]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise ValueError(f"non-finite value at {path}")
        return float(obj)
    return obj


def emit(report: dict) -> None:
    print(json.dumps(_finite(report), indent=2))


def _base_report(command: str, seed: int | None, started: float) -> dict:
    return {
        "schema": SCHEMA,
        "command": command,
        "tool_version": __version__,
        "seed": seed,
        "timing_s": time.perf_counter() - started,
    }


def load_state_file(path: str | Path) -> DensityMatrix:
    amps = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(f"{path}:{lineno}: expected 're im', got {line!r}")
        try:
            amps.append(complex(float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    psi = np.array(amps, dtype=complex)
    n = int(round(math.log2(psi.size))) if psi.size else 0
    if psi.size < 2 or 2**n != psi.size:
        raise ConfigError(f"{path}: amplitude count {psi.size} is not a power of two >= 2")
    norm = float(np.linalg.norm(psi))
    if norm == 0.0:
        raise ConfigError(f"{path}: zero state vector")
    if abs(norm - 1.0) > STATE_WARN_TOL:
        log.warning("state vector in %s has norm %.9g; normalizing", path, norm)
    return DensityMatrix.from_pure(psi / norm)


def make_state(spec: str, n: int) -> DensityMatrix:
    if spec == "ghz+":
        return make_ghz(n, 1)
    if spec == "ghz-":
        return make_ghz(n, -1)
    if spec == "mixed":
        return maximally_mixed(n)
    rho = load_state_file(spec)
    if rho.n_parties != n:
        raise ConfigError(f"state file {spec} describes {rho.n_parties} parties, config says {n}")
    return rho


def _parse_direction(obj: dict, where: str) -> Direction:
    if "direction" in obj:
        vec = obj["direction"]
        if not isinstance(vec, (list, tuple)) or len(vec) != 3:
            raise ConfigError(f"{where}.direction: expected a 3-vector")
        try:
            arr = np.array([float(v) for v in vec])
        except (TypeError, ValueError):
            raise ConfigError(f"{where}.direction: entries must be numbers") from None
        norm = float(np.linalg.norm(arr))
        if norm == 0.0 or not math.isfinite(norm):
            raise ConfigError(f"{where}.direction: zero-length or non-finite vector")
        if abs(norm - 1.0) > UNIT_WARN_TOL:
            log.warning("%s.direction has norm %.9g; normalizing", where, norm)
        return Direction.normalized(arr)
    if "theta" in obj and "phi" in obj:
        try:
            return Direction.from_angles(float(obj["theta"]), float(obj["phi"]))
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: theta/phi must be numbers") from None
    raise ConfigError(f"{where}: need 'direction' or 'theta' and 'phi'")


def _parse_setting(obj: Any, where: str) -> Setting:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    d = _parse_direction(obj, where)
    try:
        eta = float(obj.get("sharpness", 1.0))
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.sharpness: must be a number") from None
    if not 0.0 <= eta <= 1.0:
        raise ConfigError(f"{where}.sharpness: {eta} outside [0, 1]")
    return Setting(d, eta)


def parse_config(doc: dict, overrides: dict | None = None) -> ExperimentConfig:
    doc = dict(doc)
    for k, v in (overrides or {}).items():
        if v is not None:
            doc[k] = v
    try:
        n = int(doc["n_parties"])
    except KeyError:
        raise ConfigError("n_parties: required") from None
    except (TypeError, ValueError):
        raise ConfigError("n_parties: must be an integer") from None
    if not 2 <= n <= 12:
        raise ConfigError(f"n_parties: {n} outside 2..12")
    spec = str(doc.get("state", "ghz+"))
    rho = make_state(spec, n)
    settings = doc.get("settings")
    if not isinstance(settings, list) or len(settings) != n:
        raise ConfigError(f"settings: expected a list of {n} parties")
    parties = []
    for i, pair in enumerate(settings):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"settings[{i}]: expected two settings")
        parties.append(tuple(_parse_setting(s, f"settings[{i}][{j}]") for j, s in enumerate(pair)))
    grid = SettingsGrid(tuple(parties))

    joint = None
    eta1 = eta2 = None
    jdoc = doc.get("joint")
    if jdoc:
        try:
            eta1 = float(jdoc["eta1"])
            eta2 = float(jdoc.get("eta2", eta1))
        except (KeyError, TypeError, ValueError):
            raise ConfigError("joint: need numeric eta1 (and optionally eta2)") from None
        for name, eta in (("eta1", eta1), ("eta2", eta2)):
            if not 0.0 <= eta <= 1.0:
                raise ConfigError(f"joint.{name}: {eta} outside [0, 1]")
        a, a2 = grid.parties[0][0].direction, grid.parties[0][1].direction
        joint = joint_povm(Setting(a, eta1), Setting(a2, eta2))

    shots = doc.get("shots")
    if shots is not None:
        shots = int(shots)
        if shots < 1:
            raise ConfigError("shots: must be >= 1")
    seed = doc.get("seed")
    seed = None if seed is None else int(seed)
    return ExperimentConfig(n, spec, rho, grid, joint, eta1, eta2, shots, seed, doc)


def read_config(path: str) -> dict:
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def grid_to_config(grid: SettingsGrid, angles: AngleVector | None = None) -> list:
    out = []
    for i, (s0, s1) in enumerate(grid.parties):
        pair = []
        for j, s in enumerate((s0, s1)):
            entry: dict[str, Any] = {"sharpness": s.sharpness}
            if angles is not None:
                entry["theta"] = float(angles.values[i, j, 0])
                entry["phi"] = float(angles.values[i, j, 1])
            else:
                entry["direction"] = [s.direction.x, s.direction.y, s.direction.z]
            pair.append(entry)
        out.append(pair)
    return out


def _table_json(values: dict) -> dict:
    return {"".join(map(str, x)): float(v) for x, v in sorted(values.items())}


def _seed(cfg_seed: int | None) -> int:
    return cfg_seed if cfg_seed is not None else secrets.randbits(32)


def _grid_rest(cfg: ExperimentConfig) -> list:
    return list(cfg.grid.parties[1:])


def cmd_bounds(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    if args.n is None or args.n < 2:
        raise ConfigError("bounds needs --n >= 2")
    hybrid, quantum = bounds(args.n)
    report = _base_report("bounds", None, started)
    report.update({"n_parties": args.n, "hybrid_bound": hybrid, "quantum_bound": quantum})
    emit(report)
    return EXIT_OK


def _load(args: argparse.Namespace, **extra: Any) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("--config PATH (or - for stdin) is required")
    overrides = {"state": getattr(args, "state", None), "seed": getattr(args, "seed", None)}
    overrides.update(extra)
    return parse_config(read_config(args.config), overrides)


def cmd_evaluate(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    cfg = _load(args)
    hybrid, quantum = bounds(cfg.n_parties)
    result: dict[str, Any] = {"hybrid_bound": hybrid, "quantum_bound": quantum}
    if cfg.joint is None:
        res = svetlichny_value(correlator_table(cfg.rho, cfg.grid))
        result.update(
            {
                "correlators": _table_json(res.table.values),
                "svetlichny_value": res.value,
                "violates_hybrid": res.violates_hybrid,
            }
        )
    else:
        value = svetlichny_joint_value(cfg.rho, cfg.joint, _grid_rest(cfg))
        sharp = svetlichny_value(correlator_table(cfg.rho, cfg.grid.sharp()))
        result.update(
            {
                "correlators_sharp": _table_json(sharp.table.values),
                "svetlichny_value_sharp": sharp.value,
                "svetlichny_joint_value": value,
                "busch_margin": busch_margin(*cfg.joint.settings),
                "eta1": cfg.eta1,
                "eta2": cfg.eta2,
            }
        )
    report = _base_report("evaluate", cfg.seed, started)
    report.update({"config": cfg.raw, **result})
    emit(report)
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    if args.n is None or args.n < 2:
        raise ConfigError("optimize needs --n >= 2")
    seed = _seed(args.seed)
    state = args.state or "ghz+"
    rho = make_state(state, args.n)
    out = maximize(rho, restarts=args.restarts, seed=seed, tol=args.tol)
    grid = out.best_angles.to_grid()
    hybrid, quantum = bounds(args.n)
    report = _base_report("optimize", seed, started)
    report.update(
        {
            "n_parties": args.n,
            "state": state,
            "best_value": out.best_value,
            "hybrid_bound": hybrid,
            "quantum_bound": quantum,
            "restarts_used": out.restarts_used,
            "evaluations": out.evaluations,
            "converged": out.converged,
            "best_angles": out.best_angles.values.tolist(),
            "trace": [
                {"restart": t.index, "value": t.value, "evaluations": t.evaluations, "converged": t.converged}
                for t in out.trace
            ],
            "config": {
                "n_parties": args.n,
                "state": state,
                "settings": grid_to_config(grid, out.best_angles),
                "seed": seed,
            },
        }
    )
    emit(report)
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    cfg = _load(args, shots=args.shots)
    shots = cfg.shots if cfg.shots is not None else 10_000
    seed = _seed(cfg.seed)
    report = _base_report("sample", seed, started)
    if cfg.joint is None:
        samples = sample_grid(cfg.rho, cfg.grid, shots, seed)
        emp = empirical_correlators(samples)
        est, se = emp.svetlichny_estimate()
        exact = svetlichny_value(correlator_table(cfg.rho, cfg.grid)).value
        body = {
            "correlators": _table_json(emp.table.values),
            "standard_errors": _table_json(emp.stderr),
            "svetlichny_estimate": est,
        }
        records = [r for x in sorted(samples) for r in samples[x]]
        joint_party = None
    else:
        samples = sample_joint(cfg.rho, cfg.joint, _grid_rest(cfg), shots, seed)
        emp = empirical_joint_correlators(samples)
        est, se = emp.svetlichny_estimate()
        exact = svetlichny_joint_value(cfg.rho, cfg.joint, _grid_rest(cfg))
        body = {
            "joint_first_correlators": _table_json(emp.first),
            "joint_second_correlators": _table_json(emp.second),
            "standard_errors_first": _table_json(emp.first_se),
            "standard_errors_second": _table_json(emp.second_se),
            "svetlichny_joint_estimate": est,
        }
        records = [r for x in sorted(samples) for r in samples[x]]
        joint_party = 1
    if args.csv:
        write_shots_csv(records, args.csv, joint_party=joint_party)
    hybrid, quantum = bounds(cfg.n_parties)
    body.update(
        {
            "shots_per_setting": shots,
            "standard_error": se,
            "exact_value": exact,
            "deviation_sigmas": abs(est - exact) / se if se > 0 else 0.0,
            "hybrid_bound": hybrid,
            "quantum_bound": quantum,
        }
    )
    report.update({"config": cfg.raw, **body})
    emit(report)
    return EXIT_OK


def run_audits(cfg: ExperimentConfig, shots: int | None, seed: int) -> tuple[JointPovm, dict[str, AuditReport]]:
    joint = cfg.joint
    if joint is None:
        a, a2 = cfg.grid.parties[0][0].direction, cfg.grid.parties[0][1].direction
        eta = equal_sharpness_max(a, a2)
        joint = joint_povm(Setting(a, eta), Setting(a2, eta))
    audits = {"no_signaling": audit_no_signaling(cfg.rho, joint, _grid_rest(cfg), shots=shots, seed=seed)}
    if cfg.n_parties == 3:
        audits["chain_three"] = audit_chain_three(cfg.rho, cfg.grid, joint)
    if cfg.n_parties >= 3:
        audits["chain_n"] = audit_chain_n(cfg.rho, cfg.grid, joint)
    return joint, audits


def cmd_audit(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    cfg = _load(args, shots=args.shots)
    seed = _seed(cfg.seed)
    joint, audits = run_audits(cfg, cfg.shots, seed)
    overall = all(a.overall for a in audits.values())
    s1, s2 = joint.settings
    report = _base_report("audit", seed, started)
    report.update(
        {
            "config": cfg.raw,
            "eta1": s1.sharpness,
            "eta2": s2.sharpness,
            "svetlichny_joint_value": svetlichny_joint_value(cfg.rho, joint, _grid_rest(cfg)),
            "audits": {name: a.as_dict() for name, a in audits.items()},
            "overall": overall,
        }
    )
    emit(report)
    return EXIT_OK if overall else EXIT_AUDIT


def _vector_arg(text: str, name: str) -> Direction:
    try:
        vals = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{name}: expected three numbers, got {text!r}") from None
    if len(vals) != 3:
        raise ConfigError(f"{name}: expected three numbers, got {text!r}")
    norm = math.sqrt(sum(v * v for v in vals))
    if norm == 0.0:
        raise ConfigError(f"{name}: zero-length direction")
    if abs(norm - 1.0) > UNIT_WARN_TOL:
        log.warning("%s has norm %.9g; normalizing", name, norm)
    return Direction.normalized(vals)


def cmd_sharpness(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    a = _vector_arg(args.a, "--a")
    a2 = _vector_arg(args.a2, "--a2")
    report = _base_report("sharpness", None, started)
    eta_max = equal_sharpness_max(a, a2)
    report.update(
        {
            "a": [a.x, a.y, a.z],
            "a2": [a2.x, a2.y, a2.z],
            "angle_rad": math.acos(max(-1.0, min(1.0, a.dot(a2)))),
            "equal_sharpness_max": eta_max,
        }
    )
    if args.eta1 is not None:
        eta2 = args.eta2 if args.eta2 is not None else args.eta1
        for name, eta in (("--eta1", args.eta1), ("--eta2", eta2)):
            if not 0.0 <= eta <= 1.0:
                raise ConfigError(f"{name}: {eta} outside [0, 1]")
        margin = busch_margin(Setting(a, args.eta1), Setting(a2, eta2))
        report.update({"eta1": args.eta1, "eta2": eta2, "busch_margin": margin, "jointly_measurable": margin >= 0})
    emit(report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="svetjoint", description="Svetlichny functional, joint measurements and audits.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp: argparse.ArgumentParser, config: bool = True) -> None:
        if config:
            sp.add_argument("--config", metavar="PATH|-", help="JSON experiment config, '-' for stdin")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--json", action="store_true", default=True, help="JSON output (always on)")

    sp = sub.add_parser("bounds", help="hybrid and quantum bounds for N parties")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--json", action="store_true", default=True)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("evaluate", help="exact correlators and Svetlichny value")
    common(sp)
    sp.add_argument("--state", help="ghz+ | ghz- | mixed | FILE")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("optimize", help="maximize the Svetlichny value over directions")
    common(sp, config=False)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--state", default="ghz+", help="ghz+ | ghz- | mixed | FILE")
    sp.add_argument("--restarts", type=int)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("sample", help="Monte Carlo estimate of the Svetlichny value")
    common(sp)
    sp.add_argument("--state", help="ghz+ | ghz- | mixed | FILE")
    sp.add_argument("--shots", type=int)
    sp.add_argument("--csv", metavar="PATH", help="write per-shot records")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("audit", help="no-signaling and derivation-chain audits")
    common(sp)
    sp.add_argument("--state", help="ghz+ | ghz- | mixed | FILE")
    sp.add_argument("--shots", type=int, help="also run the sampled no-signaling check")
    sp.set_defaults(func=cmd_audit)

    sp = sub.add_parser("sharpness", help="Busch margin and equal-sharpness maximum")
    sp.add_argument("--a", required=True, metavar="X,Y,Z")
    sp.add_argument("--a2", required=True, metavar="X,Y,Z")
    sp.add_argument("--eta1", type=float)
    sp.add_argument("--eta2", type=float)
    sp.add_argument("--json", action="store_true", default=True)
    sp.set_defaults(func=cmd_sharpness)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AdmissibilityError as exc:
        print(f"error: {exc} (busch_margin={exc.margin:.12g})", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
