"""Reproducible experiment runner and command line interface.

Experiments are declared in JSON configs (schema ``eqlab-config/v1``) and
produce report bundles: a machine-readable ``report.json`` (schema
``eqlab-report/v1``) whose payload re-validates on load, a human-readable
``summary.txt`` whose every number is printed exactly as stored in the
payload, and CSV tables with 17-significant-digit values.  All writes go
through a temp file and ``os.replace``, so a bundle is never half-written.

A bundle embeds its config, which makes replay self-contained: ``replay``
reruns the recorded experiment with the recorded seed and compares every
payload number bit-exactly, reporting the first divergence.  Exit codes:
0 success, 2 configuration error, 3 check failure, 4 replay mismatch.
The full config and report schemas are documented in ``docs/formats.md``.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from eqlab.mechanism import (
    ContractorScenario,
    Mechanism,
    OutcomeSet,
    StrategyTable,
    build_indifference_mechanism,
    check_incentive_compat,
    contractor_equilibrium,
    expected_row_utilities,
    security_value,
    tie_frequency_experiment,
    undominated_actions,
)
from eqlab.monitoring import (
    MONITORING_KINDS,
    NoiseFamily,
    SignalStructure,
    classify_structure,
    conditional_independence_suite,
    mean_correctness_suite,
    permutation_invariance_suite,
    support_suite,
)
from eqlab.prefs import OutcomeSpace, PrevalentFamily, UtilityFn
from eqlab.rng import stream_generator
from eqlab.strategies import (
    GameParams,
    atonement_machines,
    belief_based_machines,
    constant_machines,
    grim_machines,
    proportional_response_machines,
    public_proportional_machines,
    simulate,
)
from eqlab.verifier import (
    ValueQuery,
    belief_mixing_report,
    classify_all,
    classify_ppe,
    discount_threshold_check,
    fragility_experiment,
    verify_equilibrium,
)

__all__ = [
    "CONFIG_SCHEMA",
    "REPORT_SCHEMA",
    "ConfigError",
    "ReportBundle",
    "load_config",
    "validate_config",
    "run",
    "write_bundle",
    "load_bundle",
    "replay",
    "main",
]

CONFIG_SCHEMA = "eqlab-config/v1"
REPORT_SCHEMA = "eqlab-report/v1"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK = 3
EXIT_REPLAY = 4

KINDS = ("mech", "simulate", "verify", "classify", "fragility", "sweep")

STRATEGY_NAMES = (
    "grim",
    "proportional_response",
    "public_proportional",
    "atonement",
    "belief_based",
    "constant",
)


class ConfigError(ValueError):
    """Invalid or unresolvable experiment configuration."""


# ---------------------------------------------------------------------------
# config loading and validation (all failures raised before any computation)


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _require(cfg: dict, key: str, where: str):
    if key not in cfg:
        raise ConfigError(f"{where}: missing required field '{key}'")
    return cfg[key]


def _check_number(value, where, lo=None, hi=None, open_lo=False, open_hi=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    v = float(value)
    if lo is not None and (v <= lo if open_lo else v < lo):
        raise ConfigError(f"{where}: {v} out of range")
    if hi is not None and (v >= hi if open_hi else v > hi):
        raise ConfigError(f"{where}: {v} out of range")
    return v


def _check_int(value, where, lo=None, hi=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(f"{where}: {value} below minimum {lo}")
    if hi is not None and value > hi:
        raise ConfigError(f"{where}: {value} above maximum {hi}")
    return value


def _check_table(value, where) -> np.ndarray:
    try:
        table = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: not a numeric table ({exc})") from exc
    return table


def _check_game(block, where="game") -> dict:
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected an object")
    n = _check_int(_require(block, "n_agents", where), f"{where}.n_agents", lo=2)
    delta = _check_number(_require(block, "delta", where), f"{where}.delta", 0.0, 1.0, True, True)
    kappa = _require(block, "kappa", where)
    if isinstance(kappa, list):
        if len(kappa) != n:
            raise ConfigError(f"{where}.kappa: need {n} entries")
        kappa = [_check_number(k, f"{where}.kappa[{i}]", 0.5, 1.0, True, True) for i, k in enumerate(kappa)]
    else:
        kappa = _check_number(kappa, f"{where}.kappa", 0.5, 1.0, True, True)
    return {"n_agents": n, "delta": delta, "kappa": kappa}


def _check_monitoring(block, where="monitoring") -> dict:
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected an object")
    kind = _require(block, "kind", where)
    if kind not in MONITORING_KINDS:
        raise ConfigError(f"{where}.kind: unknown monitoring kind {kind!r}")
    out = {"kind": kind}
    for eps in ("eps0", "eps1"):
        if eps in block:
            out[eps] = _check_number(block[eps], f"{where}.{eps}", lo=0.0)
    if "noise" in block:
        noise = block["noise"]
        if not isinstance(noise, dict) or noise.get("shape") not in ("triangular", "truncated_gaussian"):
            raise ConfigError(f"{where}.noise: expected shape triangular or truncated_gaussian")
        out["noise"] = {"shape": noise["shape"]}
        if "sigma" in noise:
            out["noise"]["sigma"] = _check_number(noise["sigma"], f"{where}.noise.sigma", lo=0.0, open_lo=True)
    if "neighbor" in block:
        out["neighbor"] = [_check_int(v, f"{where}.neighbor[]", lo=0) for v in block["neighbor"]]
    return out


def _check_strategy(block, where="strategy") -> dict:
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected an object")
    name = _require(block, "name", where)
    if name not in STRATEGY_NAMES:
        raise ConfigError(f"{where}.name: unknown strategy {name!r}")
    out = {"name": name}
    if name in ("proportional_response", "public_proportional"):
        x = _require(block, "x", where)
        if isinstance(x, list):
            out["x"] = [_check_number(v, f"{where}.x[{i}]", 0.0, 1.0) for i, v in enumerate(x)]
        else:
            out["x"] = _check_number(x, f"{where}.x", 0.0, 1.0)
    if name == "belief_based":
        out["rho"] = _check_number(_require(block, "rho", where), f"{where}.rho", 0.0, 1.0, open_hi=True)
    if name == "constant":
        out["level"] = _check_number(block.get("level", 0.0), f"{where}.level", 0.0, 1.0)
    if "clip" in block:
        if not isinstance(block["clip"], bool):
            raise ConfigError(f"{where}.clip: expected a boolean")
        out["clip"] = block["clip"]
    return out


def _check_grid(axis, where) -> list:
    if isinstance(axis, list):
        vals = [_check_number(v, f"{where}[]") for v in axis]
    elif isinstance(axis, dict):
        lo = _check_number(_require(axis, "lo", where), f"{where}.lo")
        hi = _check_number(_require(axis, "hi", where), f"{where}.hi")
        num = _check_int(_require(axis, "num", where), f"{where}.num", lo=1)
        vals = [float(v) for v in np.linspace(lo, hi, num)]
    else:
        raise ConfigError(f"{where}: expected a list of values or {{lo, hi, num}}")
    if not vals:
        raise ConfigError(f"{where}: empty grid")
    return vals


def _check_fkappa(value, where="f_kappa") -> list:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where}: expected ['point', k] or ['uniform', lo, hi]")
    kind = value[0]
    if kind == "point":
        if len(value) != 2:
            raise ConfigError(f"{where}: point form is ['point', k]")
        return ["point", _check_number(value[1], f"{where}[1]", 0.5, 1.0, True, True)]
    if kind == "uniform":
        if len(value) != 3:
            raise ConfigError(f"{where}: uniform form is ['uniform', lo, hi]")
        lo = _check_number(value[1], f"{where}[1]", 0.5, 1.0, True, True)
        hi = _check_number(value[2], f"{where}[2]", 0.5, 1.0, True, True)
        if not hi > lo:
            raise ConfigError(f"{where}: need hi > lo")
        return ["uniform", lo, hi]
    raise ConfigError(f"{where}: unknown distribution kind {kind!r}")


def _validate_mech(cfg: dict):
    task = cfg.get("task", "indifference")
    if task not in ("indifference", "tie_frequency", "contractor"):
        raise ConfigError(f"mech.task: unknown task {task!r}")
    cfg["task"] = task
    if task == "indifference":
        if "payoffs" not in cfg and "random_instances" not in cfg:
            raise ConfigError("mech: need 'payoffs' and/or 'random_instances'")
        if "payoffs" in cfg:
            table = _check_table(cfg["payoffs"], "mech.payoffs")
            if table.ndim != 2 or table.size == 0:
                raise ConfigError("mech.payoffs: expected a non-empty 2D table")
        if "random_instances" in cfg:
            blk = cfg["random_instances"]
            _check_int(_require(blk, "count", "mech.random_instances"), "mech.random_instances.count", lo=1)
            _check_int(blk.get("max_actions", 8), "mech.random_instances.max_actions", lo=1)
            _check_int(blk.get("max_consequences", 8), "mech.random_instances.max_consequences", lo=1)
    elif task == "tie_frequency":
        fam = _require(cfg, "family", "mech")
        _check_int(_require(fam, "size", "mech.family"), "mech.family.size", lo=1)
        density = _require(fam, "density", "mech.family")
        if not isinstance(density, list) or density[0] not in ("uniform", "gaussian"):
            raise ConfigError("mech.family.density: expected ['uniform', lo, hi] or ['gaussian', mu, sd]")
        _check_int(_require(cfg, "n_samples", "mech"), "mech.n_samples", lo=1)
        cases = _require(cfg, "cases", "mech")
        if not isinstance(cases, list) or not cases:
            raise ConfigError("mech.cases: expected a non-empty list")
        for i, case in enumerate(cases):
            rows = _check_table(
                _require(case, "mechanism_rows", f"mech.cases[{i}]"), f"mech.cases[{i}].mechanism_rows"
            )
            if rows.ndim != 2 or rows.shape[0] * rows.shape[1] != fam["size"]:
                raise ConfigError(f"mech.cases[{i}].mechanism_rows: table cells must match family size")
            if "action_lotteries" in case:
                lots = _check_table(case["action_lotteries"], f"mech.cases[{i}].action_lotteries")
                if lots.ndim != 2 or lots.shape[1] != rows.shape[0]:
                    raise ConfigError(
                        f"mech.cases[{i}].action_lotteries: need one weight per mechanism action"
                    )
    else:
        sc = _require(cfg, "scenario", "mech")
        for key in ("profits", "customer_values", "prior", "effort_grid"):
            _require(sc, key, "mech.scenario")
        try:
            ContractorScenario(
                profits=sc["profits"],
                customer_values=sc["customer_values"],
                prior=sc["prior"],
                effort_grid=sc["effort_grid"],
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"mech.scenario: {exc}") from exc
        cases = _require(cfg, "cases", "mech")
        for i, case in enumerate(cases):
            target = _check_table(_require(case, "target", f"mech.cases[{i}]"), f"mech.cases[{i}].target")
            if target.ndim != 1:
                raise ConfigError(f"mech.cases[{i}].target: expected one contract index per state")
            expect = case.get("expect", "accepted")
            if expect not in ("accepted", "rejected"):
                raise ConfigError(f"mech.cases[{i}].expect: expected 'accepted' or 'rejected'")
            case["expect"] = expect


def _validate_simulate(cfg: dict):
    cfg["game"] = _check_game(_require(cfg, "game", "simulate"))
    cfg["monitoring"] = _check_monitoring(_require(cfg, "monitoring", "simulate"))
    cfg["strategy"] = _check_strategy(_require(cfg, "strategy", "simulate"))
    _check_int(_require(cfg, "horizon", "simulate"), "simulate.horizon", lo=1)
    for i, dev in enumerate(cfg.get("deviations", [])):
        _check_int(_require(dev, "t", f"deviations[{i}]"), f"deviations[{i}].t", lo=0)
        _check_int(_require(dev, "agent", f"deviations[{i}]"), f"deviations[{i}].agent", lo=0)
        _check_number(_require(dev, "action", f"deviations[{i}]"), f"deviations[{i}].action", 0.0, 1.0)


def _validate_verify(cfg: dict):
    cfg["game"] = _check_game(_require(cfg, "game", "verify"))
    cfg["monitoring"] = _check_monitoring(_require(cfg, "monitoring", "verify"))
    cfg["strategy"] = _check_strategy(_require(cfg, "strategy", "verify"))
    scope = cfg.get("scope", "full")
    if scope not in ("full", "mixing"):
        raise ConfigError("verify.scope: expected 'full' or 'mixing'")
    cfg["scope"] = scope
    if scope == "mixing" and cfg["strategy"]["name"] != "belief_based":
        raise ConfigError("verify.scope 'mixing' applies to the belief_based strategy only")
    if "tol" in cfg:
        _check_number(cfg["tol"], "verify.tol", lo=0.0, open_lo=True)
    if "n_reps" in cfg:
        _check_int(cfg["n_reps"], "verify.n_reps", lo=2)
    if "horizon" in cfg:
        _check_int(cfg["horizon"], "verify.horizon", lo=1)


def _validate_classify(cfg: dict):
    profiles = cfg.get("profiles", [])
    structures = cfg.get("structures", [])
    if not profiles and not structures:
        raise ConfigError("classify: need 'profiles' and/or 'structures'")
    for i, prof in enumerate(profiles):
        where = f"classify.profiles[{i}]"
        _require(prof, "name", where)
        prof["game"] = _check_game(_require(prof, "game", where), f"{where}.game")
        prof["monitoring"] = _check_monitoring(_require(prof, "monitoring", where), f"{where}.monitoring")
        prof["strategy"] = _check_strategy(_require(prof, "strategy", where), f"{where}.strategy")
        if "depth" in prof:
            _check_int(prof["depth"], f"{where}.depth", lo=1)
        expect = prof.get("expect", {})
        known = ("ppe", "info_subset", "belief_free", "atonement", "reneg_proof", "stage_nash")
        for key, val in expect.items():
            if key not in known:
                raise ConfigError(f"{where}.expect: unknown classifier flag {key!r}")
            if not isinstance(val, bool) and val is not None:
                raise ConfigError(f"{where}.expect.{key}: expected true/false/null")
    for i, st in enumerate(structures):
        where = f"classify.structures[{i}]"
        _require(st, "name", where)
        st["monitoring"] = _check_monitoring(_require(st, "monitoring", where), f"{where}.monitoring")
        _check_int(_require(st, "n_agents", where), f"{where}.n_agents", lo=2)
    if "ppe_atonement_exclusion" in cfg and not isinstance(cfg["ppe_atonement_exclusion"], bool):
        raise ConfigError("classify.ppe_atonement_exclusion: expected a boolean")


def _validate_fragility(cfg: dict):
    cfg["game"] = _check_game(_require(cfg, "game", "fragility"))
    cfg["f_kappa"] = _check_fkappa(_require(cfg, "f_kappa", "fragility"))
    _check_int(_require(cfg, "n_draws", "fragility"), "fragility.n_draws", lo=1)
    if "x_own" in cfg:
        _check_number(cfg["x_own"], "fragility.x_own", 0.0, 1.0)
    if "tolerance" in cfg:
        _check_number(cfg["tolerance"], "fragility.tolerance", lo=0.0, open_lo=True)


def _validate_sweep(cfg: dict):
    game = _require(cfg, "game", "sweep")
    grid = _require(cfg, "grid", "sweep")
    if not isinstance(grid, dict) or not grid:
        raise ConfigError("sweep.grid: expected an object with 'kappa' and/or 'delta' axes")
    for axis in grid:
        if axis not in ("kappa", "delta"):
            raise ConfigError(f"sweep.grid: unknown axis {axis!r}")
    norm_game = {"n_agents": _check_int(_require(game, "n_agents", "sweep.game"), "sweep.game.n_agents", lo=2)}
    if "kappa" in grid:
        if "kappa" in game:
            raise ConfigError("sweep: kappa appears in both game and grid")
        cfg.setdefault("_kappa_axis", _check_grid(grid["kappa"], "sweep.grid.kappa"))
    else:
        norm_game["kappa"] = _check_number(_require(game, "kappa", "sweep.game"), "sweep.game.kappa", 0.5, 1.0, True, True)
    if "delta" in grid:
        if "delta" in game:
            raise ConfigError("sweep: delta appears in both game and grid")
        cfg.setdefault("_delta_axis", _check_grid(grid["delta"], "sweep.grid.delta"))
    else:
        norm_game["delta"] = _check_number(_require(game, "delta", "sweep.game"), "sweep.game.delta", 0.0, 1.0, True, True)
    cfg["game"] = norm_game
    cfg["monitoring"] = _check_monitoring(_require(cfg, "monitoring", "sweep"))
    if "strategies" in cfg:
        specs = cfg["strategies"]
        if not isinstance(specs, list) or not specs:
            raise ConfigError("sweep.strategies: expected a non-empty list")
    elif "strategy" in cfg:
        specs = [cfg["strategy"]]
    else:
        raise ConfigError("sweep: need 'strategy' or 'strategies'")
    cfg["strategies"] = [_check_strategy(s, f"sweep.strategies[{i}]") for i, s in enumerate(specs)]
    cfg.pop("strategy", None)
    mode = cfg.get("feasibility", "verify")
    if mode not in ("verify", "construction"):
        raise ConfigError("sweep.feasibility: expected 'verify' or 'construction'")
    cfg["feasibility"] = mode
    if mode == "construction":
        for strat in cfg["strategies"]:
            if strat["name"] not in ("grim", "atonement", "public_proportional"):
                raise ConfigError(
                    "sweep.feasibility 'construction' requires grim, atonement, or public_proportional"
                )


_KIND_VALIDATORS = {
    "mech": _validate_mech,
    "simulate": _validate_simulate,
    "verify": _validate_verify,
    "classify": _validate_classify,
    "fragility": _validate_fragility,
    "sweep": _validate_sweep,
}


def validate_config(cfg: dict) -> dict:
    """Normalize and fully validate a config; raises ConfigError early."""
    cfg = copy.deepcopy(cfg)
    schema = cfg.get("schema")
    if schema != CONFIG_SCHEMA:
        raise ConfigError(f"config schema must be {CONFIG_SCHEMA!r}, got {schema!r}")
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"config kind must be one of {KINDS}, got {kind!r}")
    if "seed" not in cfg:
        raise ConfigError("config: a seed is required (no wall-clock defaults)")
    seed = cfg["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"config.seed: expected an integer in [0, 2^64), got {seed!r}")
    if "name" in cfg and not isinstance(cfg["name"], str):
        raise ConfigError("config.name: expected a string")
    _KIND_VALIDATORS[kind](cfg)
    return cfg


# ---------------------------------------------------------------------------
# builders from validated config blocks


def _game(block) -> GameParams:
    return GameParams(block["n_agents"], block["delta"], block["kappa"])


def _structure(block, n_agents: int) -> SignalStructure:
    kwargs = {"kind": block["kind"], "n_agents": n_agents}
    for eps in ("eps0", "eps1"):
        if eps in block:
            kwargs[eps] = block[eps]
    if "noise" in block:
        kwargs["noise"] = NoiseFamily(**block["noise"])
    if "neighbor" in block:
        kwargs["neighbor"] = tuple(block["neighbor"])
    try:
        return SignalStructure(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"monitoring: {exc}") from exc


def _broadcast_x(x, n: int) -> list:
    return [float(x)] * n if not isinstance(x, list) else [float(v) for v in x]


def _machines(strat, params: GameParams, ss: SignalStructure):
    """Build one machine per agent; construction infeasibility raises ValueError."""
    name = strat["name"]
    if name == "grim":
        return grim_machines(params)
    if name == "proportional_response":
        x = _broadcast_x(strat["x"], params.n_agents)
        return proportional_response_machines(params, x, ss, enforce_bounds=not strat.get("clip", False))
    if name == "public_proportional":
        x = _broadcast_x(strat["x"], params.n_agents)
        return public_proportional_machines(params, x, ss, enforce_bounds=not strat.get("clip", False))
    if name == "atonement":
        return atonement_machines(params)
    if name == "belief_based":
        return belief_based_machines(params, strat["rho"])
    return constant_machines(params, strat["level"])


def _strategy_label(strat) -> str:
    name = strat["name"]
    if "x" in strat and not isinstance(strat["x"], list):
        return f"{name}[x={strat['x']:g}]"
    if "rho" in strat:
        return f"{name}[rho={strat['rho']:g}]"
    if "level" in strat:
        return f"{name}[level={strat['level']:g}]"
    return name


# ---------------------------------------------------------------------------
# payload hygiene: everything JSON-serializable, no NaN/Infinity


def _jsonify(obj):
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not np.isfinite(v):
            raise ValueError(f"non-finite value {v} in payload; use null instead")
        return v
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__} into a payload")


def _fmt(v) -> str:
    """Format a payload value for summaries and CSV: floats at 17 digits."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _csv_text(columns, rows) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# payload schemas (structural re-validation on write and on replay load)

_PAYLOAD_FIELDS = {
    "mech": {"task": str},
    "simulate": {"horizon": int, "kinds": list, "values": list, "actions": list},
    "verify": {"feasible": bool, "scope": str, "method": str},
    "classify": {"profiles": list, "structures": list},
    "fragility": {
        "n_draws": int,
        "interior_br_frequency": float,
        "br_state_dependence_frequency": float,
        "mean_ic_violation": float,
        "analytic_mean_violation": float,
    },
    "sweep": {"feasibility": str, "rows": list},
}

_SWEEP_COLUMNS = ("kappa", "delta", "N", "strategy", "feasible", "worst_gain", "residual")


def validate_payload(kind: str, payload: dict) -> None:
    if kind not in _PAYLOAD_FIELDS:
        raise ConfigError(f"unknown report kind {kind!r}")
    if not isinstance(payload, dict):
        raise ConfigError("report payload must be an object")
    for name, typ in _PAYLOAD_FIELDS[kind].items():
        if name not in payload:
            raise ConfigError(f"report payload missing field '{name}' for kind {kind!r}")
        if not isinstance(payload[name], typ) or isinstance(payload[name], bool) and typ is not bool:
            raise ConfigError(f"report payload field '{name}' has wrong type for kind {kind!r}")
    if kind == "sweep":
        for i, row in enumerate(payload["rows"]):
            for col in ("kappa", "delta", "N", "strategy", "feasible"):
                if col not in row:
                    raise ConfigError(f"sweep row {i} missing column '{col}'")


# ---------------------------------------------------------------------------
# bundles


@dataclass
class ReportBundle:
    """One experiment's outputs: config, payload, summary, CSV tables."""

    config: dict
    payload: dict
    summary: str
    tables: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK

    @property
    def kind(self) -> str:
        return self.config["kind"]


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_bundle(bundle: ReportBundle, out_dir) -> str:
    """Write report.json, summary.txt, and CSV tables; returns the directory."""
    os.makedirs(out_dir, exist_ok=True)
    doc = {
        "schema": REPORT_SCHEMA,
        "kind": bundle.kind,
        "name": bundle.config.get("name", bundle.kind),
        "exit_code": bundle.exit_code,
        "config": bundle.config,
        "payload": bundle.payload,
        "tables": {name: f"{name}.csv" for name in bundle.tables},
    }
    _atomic_write(os.path.join(out_dir, "report.json"), json.dumps(doc, indent=2, allow_nan=False) + "\n")
    _atomic_write(os.path.join(out_dir, "summary.txt"), bundle.summary)
    for name, text in bundle.tables.items():
        _atomic_write(os.path.join(out_dir, f"{name}.csv"), text)
    return str(out_dir)


def load_bundle(path) -> dict:
    """Read a report.json (or a bundle directory) and re-validate its payload."""
    if os.path.isdir(path):
        path = os.path.join(path, "report.json")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read bundle: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bundle is not valid JSON: {exc}") from exc
    if doc.get("schema") != REPORT_SCHEMA:
        raise ConfigError(
            f"incompatible bundle: schema {doc.get('schema')!r}, this build reads {REPORT_SCHEMA!r}"
        )
    validate_payload(doc.get("kind"), doc.get("payload", {}))
    return doc


# ---------------------------------------------------------------------------
# mech experiments


def _mech_worked(table: np.ndarray, tol: float) -> dict:
    mech = build_indifference_mechanism(table)
    u_star = security_value(table)
    undom = undominated_actions(table)
    utilities = expected_row_utilities(mech, table)
    probs = np.zeros((1, 1, table.shape[0]))
    probs[0, 0, undom] = 1.0 / undom.size
    ic = check_incentive_compat(StrategyTable(probs), mech, table, tol=tol)
    gap = float(np.abs(utilities[undom] - u_star).max())
    return {
        "security_value": float(u_star),
        "undominated": [int(a) for a in undom],
        "mechanism_rows": mech.rows,
        "action_utilities": utilities,
        "max_indifference_gap": gap,
        "ic_feasible": bool(ic.feasible),
        "ic_worst_gap": float(ic.worst_gap),
        "ok": gap <= tol and ic.feasible,
    }


def _mech_instances(blk: dict, seed: int, tol: float) -> dict:
    count = blk["count"]
    max_a = blk.get("max_actions", 8)
    max_c = blk.get("max_consequences", 8)
    lo, hi = blk.get("coeff_range", [-2.0, 2.0])
    rng = stream_generator(seed, 0)
    worst = 0.0
    for _ in range(count):
        a = int(rng.integers(1, max_a + 1))
        c = int(rng.integers(1, max_c + 1))
        table = rng.uniform(lo, hi, size=(a, c))
        mech = build_indifference_mechanism(table)
        u_star = security_value(table)
        undom = undominated_actions(table)
        utilities = expected_row_utilities(mech, table)
        worst = max(worst, float(np.abs(utilities[undom] - u_star).max()))
    return {
        "count": count,
        "max_actions": max_a,
        "max_consequences": max_c,
        "max_abs_gap": worst,
        "ok": worst <= tol,
    }


def _mech_tie(cfg: dict) -> dict:
    fam_blk = cfg["family"]
    size = fam_blk["size"]
    density = tuple(fam_blk["density"])
    base = fam_blk.get("base_table", [0.0] * size)
    space = OutcomeSpace(labels=tuple(f"x{k}" for k in range(size)))
    family = PrevalentFamily(
        space=space,
        base=UtilityFn(space=space, table=tuple(float(v) for v in base)),
        lambda_density=density,
        dim=size,
    )
    tie_tol = cfg.get("tie_tol", 1e-12)
    out_cases = []
    for case in cfg["cases"]:
        mech = Mechanism(np.asarray(case["mechanism_rows"], dtype=float))
        lotteries = case.get("action_lotteries")
        outcomes = OutcomeSet.from_mechanism(
            mech, None if lotteries is None else np.asarray(lotteries, dtype=float)
        )
        freq = tie_frequency_experiment(
            family, outcomes, cfg["n_samples"], tie_tol=tie_tol, seed=cfg["seed"], stream=0
        )
        expected = case.get("expect_frequency")
        ok = True if expected is None else freq == float(expected)
        out_cases.append(
            {"name": case["name"], "frequency": freq, "expect_frequency": expected, "ok": ok}
        )
    return {"n_samples": cfg["n_samples"], "tie_tol": tie_tol, "cases": out_cases}


def _mech_contractor(cfg: dict) -> dict:
    sc_blk = cfg["scenario"]
    try:
        scenario = ContractorScenario(
            profits=sc_blk["profits"],
            customer_values=sc_blk["customer_values"],
            prior=sc_blk["prior"],
            effort_grid=sc_blk["effort_grid"],
        )
    except ValueError as exc:
        raise ConfigError(f"mech.scenario: {exc}") from exc
    out_cases = []
    for case in cfg["cases"]:
        entry = {"name": case.get("name", "case"), "expect": case["expect"]}
        try:
            rep = contractor_equilibrium(scenario, np.asarray(case["target"], dtype=int))
        except ValueError as exc:
            entry.update({"accepted": False, "reason": str(exc)})
        else:
            entry.update(
                {
                    "accepted": True,
                    "sender_payoffs_equal": bool(rep.sender_payoffs_equal),
                    "sender_payoff_spread": float(rep.sender_payoff_spread),
                    "customer_value": float(rep.customer_value),
                    "reservation_utility": float(rep.reservation_utility),
                    "message_strategy": [[c, p] for c, p in rep.message_strategy],
                }
            )
        ok = entry["accepted"] == (case["expect"] == "accepted")
        if ok and entry["accepted"]:
            ok = entry["sender_payoffs_equal"]
            if "expect_customer_value" in case:
                ok = ok and abs(entry["customer_value"] - case["expect_customer_value"]) <= 1e-12
        entry["ok"] = ok
        out_cases.append(entry)
    return {"reservation_utility": float(scenario.reservation_utility), "cases": out_cases}


def _run_mech(cfg: dict) -> ReportBundle:
    task = cfg["task"]
    tol = cfg.get("tol", 1e-9)
    payload = {"task": task}
    lines = [f"mech experiment: task {task}, seed {cfg['seed']}"]
    ok = True
    if task == "indifference":
        payload["tol"] = tol
        if "payoffs" in cfg:
            worked = _mech_worked(np.asarray(cfg["payoffs"], dtype=float), tol)
            payload["worked"] = worked
            ok = ok and worked["ok"]
            lines.append(f"  worked instance: security value {_fmt(worked['security_value'])}")
            lines.append(
                "  per-action expected utilities: "
                + " ".join(_fmt(float(v)) for v in worked["action_utilities"])
            )
            lines.append(f"  max indifference gap {_fmt(worked['max_indifference_gap'])}")
            lines.append(f"  incentive compatibility worst gap {_fmt(worked['ic_worst_gap'])}")
        if "random_instances" in cfg:
            inst = _mech_instances(cfg["random_instances"], cfg["seed"], tol)
            payload["instances"] = inst
            ok = ok and inst["ok"]
            lines.append(
                f"  {inst['count']} random instances (<= {inst['max_actions']} actions, "
                f"<= {inst['max_consequences']} consequences): max |EU - u*| = {_fmt(inst['max_abs_gap'])}"
            )
    elif task == "tie_frequency":
        payload.update(_mech_tie(cfg))
        for case in payload["cases"]:
            ok = ok and case["ok"]
            lines.append(f"  {case['name']}: multiplicity frequency {_fmt(case['frequency'])}")
    else:
        payload.update(_mech_contractor(cfg))
        lines.append(f"  reservation utility {_fmt(payload['reservation_utility'])}")
        for case in payload["cases"]:
            ok = ok and case["ok"]
            if case["accepted"]:
                lines.append(
                    f"  {case['name']}: accepted, customer value {_fmt(case['customer_value'])}, "
                    f"sender payoff spread {_fmt(case['sender_payoff_spread'])}"
                )
            else:
                lines.append(f"  {case['name']}: rejected ({case['reason']})")
    payload["ok"] = ok
    lines.append("result: PASS" if ok else "result: FAIL")
    return ReportBundle(
        config=cfg,
        payload=_jsonify(payload),
        summary="\n".join(lines) + "\n",
        exit_code=EXIT_OK if ok else EXIT_CHECK,
    )


# ---------------------------------------------------------------------------
# simulate


def _state_to_list(state):
    if state is None:
        return None
    return [_jsonify(v) for v in state]


def _run_simulate(cfg: dict) -> ReportBundle:
    params = _game(cfg["game"])
    ss = _structure(cfg["monitoring"], params.n_agents)
    try:
        machines = _machines(cfg["strategy"], params, ss)
    except ValueError as exc:
        raise ConfigError(f"strategy: {exc}") from exc
    deviations = {(d["t"], d["agent"]): d["action"] for d in cfg.get("deviations", [])}
    for (t, agent) in deviations:
        if agent >= params.n_agents:
            raise ConfigError(f"deviations: agent {agent} out of range")
        if t >= cfg["horizon"]:
            raise ConfigError(f"deviations: period {t} beyond horizon {cfg['horizon']}")
    trace = simulate(
        params, machines, ss, cfg["horizon"], cfg["seed"], deviations=deviations or None
    )
    values = trace.discounted_values()
    payload = {
        "horizon": trace.horizon,
        "kinds": list(trace.kinds),
        "values": values,
        "actions": trace.actions,
        "stage_payoffs": trace.payoffs,
        "states": [[_state_to_list(st) for st in period] for period in trace.states],
    }
    tmp = tempfile.NamedTemporaryFile("r", suffix=".csv", delete=False)
    try:
        trace.to_csv(tmp.name)
        with open(tmp.name) as fh:
            trace_csv = fh.read()
    finally:
        os.unlink(tmp.name)
    lines = [
        f"simulation: {', '.join(trace.kinds)} over {trace.horizon} periods, seed {cfg['seed']}",
        "discounted values: " + " ".join(_fmt(float(v)) for v in values),
    ]
    if deviations:
        devs = ", ".join(f"(t={t}, agent={i})" for t, i in sorted(deviations))
        lines.append(f"injected deviations: {devs}")
    return ReportBundle(
        config=cfg,
        payload=_jsonify(payload),
        summary="\n".join(lines) + "\n",
        tables={"trace": trace_csv},
    )


# ---------------------------------------------------------------------------
# verify


def _run_verify(cfg: dict) -> ReportBundle:
    params = _game(cfg["game"])
    ss = _structure(cfg["monitoring"], params.n_agents)
    try:
        machines = _machines(cfg["strategy"], params, ss)
    except ValueError as exc:
        raise ConfigError(f"strategy: {exc}") from exc
    tol = cfg.get("tol", 1e-9)
    label = _strategy_label(cfg["strategy"])
    lines = [f"verification: {label}, N={params.n_agents}, seed {cfg['seed']}"]
    payload = {"strategy": label, "scope": cfg["scope"], "tol": tol}

    if cfg["scope"] == "mixing":
        try:
            rep = belief_mixing_report(machines, params, tol=max(tol, 1e-9))
        except ValueError as exc:
            raise ConfigError(f"verify.scope 'mixing': {exc}") from exc
        payload.update(rep)
        payload["feasible"] = rep["feasible"]
        payload["method"] = "belief_markov"
        for row in rep["mixing_states"]:
            lines.append(
                f"  agent {row['agent']} at state {row['state']}: "
                f"U(1) - U(0) = {_fmt(row['gap_one_vs_zero'])}"
            )
        feasible = rep["feasible"]
    else:
        query = ValueQuery(
            tuple(machines),
            params,
            ss,
            horizon=cfg.get("horizon"),
            n_reps=cfg.get("n_reps", 10_000),
            seed=cfg["seed"],
        )
        rep = verify_equilibrium(query, tol=tol, grid_size=cfg.get("grid_size", 21))
        payload.update(
            {
                "feasible": rep.feasible,
                "worst_gain": rep.worst_gain,
                "indifference_residual": rep.indifference_residual,
                "values": rep.values,
                "method": rep.method,
                "horizon": rep.horizon,
                "truncation_bound": rep.truncation_bound,
                "mc_standard_error": rep.mc_standard_error,
            }
        )
        lines.append(f"  method {rep.method}, worst one-shot deviation gain {_fmt(rep.worst_gain)}")
        feasible = rep.feasible
        if cfg.get("threshold_check", False):
            name = cfg["strategy"]["name"]
            x = cfg["strategy"].get("x")
            thr = discount_threshold_check(
                name, params, ss, x=None if x is None else _broadcast_x(x, params.n_agents)
            )
            payload["threshold"] = {
                "printed_threshold": thr.printed_threshold,
                "delta": thr.delta,
                "feasible": thr.feasible,
                "measured_threshold": thr.measured_threshold,
                "worst_gain": thr.worst_gain,
                "bound_violation": thr.bound_violation,
                "note": thr.note,
            }
            lines.append(
                f"  printed threshold {_fmt(thr.printed_threshold)}, delta {_fmt(thr.delta)}, "
                f"construction feasible: {'yes' if thr.feasible else 'no'}"
            )
    lines.append("result: PASS" if feasible else "result: FAIL")
    return ReportBundle(
        config=cfg,
        payload=_jsonify(payload),
        summary="\n".join(lines) + "\n",
        exit_code=EXIT_OK if feasible else EXIT_CHECK,
    )


# ---------------------------------------------------------------------------
# classify


def _run_classify(cfg: dict) -> ReportBundle:
    lines = [f"classification, seed {cfg['seed']}"]
    profiles_out = []
    ok = True
    for prof in cfg.get("profiles", []):
        params = _game(prof["game"])
        ss = _structure(prof["monitoring"], params.n_agents)
        try:
            machines = _machines(prof["strategy"], params, ss)
        except ValueError as exc:
            raise ConfigError(f"classify profile {prof['name']}: {exc}") from exc
        flags = classify_all(machines, ss, params, depth=prof.get("depth", 3))
        entry = {"name": prof["name"], "flags": flags}
        expect = prof.get("expect", {})
        mismatches = {k: flags[k] for k, v in expect.items() if flags[k] is not v}
        if mismatches:
            entry["mismatches"] = mismatches
            ok = False
        if cfg.get("ppe_atonement_exclusion", False):
            strict_ppe = classify_ppe(machines, ss, depth=prof.get("depth", 3), filtration="public-path")
            atone = flags.get("atonement")
            entry["ppe_public_path"] = strict_ppe
            entry["exclusion_ok"] = not (strict_ppe and atone is True)
            ok = ok and entry["exclusion_ok"]
        profiles_out.append(entry)
        shown = {k: v for k, v in flags.items() if v is not None}
        lines.append(f"  {prof['name']}: " + ", ".join(f"{k}={v}" for k, v in shown.items()))
    structures_out = []
    for st in cfg.get("structures", []):
        ss = _structure(st["monitoring"], st["n_agents"])
        suites = {
            "mean_correctness": mean_correctness_suite(ss, seed=cfg["seed"]),
            "support": support_suite(ss, seed=cfg["seed"]),
            "conditional_independence": conditional_independence_suite(ss, seed=cfg["seed"]),
            "permutation_invariance": permutation_invariance_suite(ss),
        }
        labels = classify_structure(ss)
        suite_ok = all(s["ok"] for s in suites.values())
        ok = ok and suite_ok
        structures_out.append({"name": st["name"], "labels": labels, "suites": suites, "ok": suite_ok})
        lines.append(
            f"  {st['name']}: "
            + ", ".join(k for k, v in labels.items() if v)
            + f"; suites {'pass' if suite_ok else 'FAIL'}"
        )
    payload = {"profiles": profiles_out, "structures": structures_out, "ok": ok}
    lines.append("result: PASS" if ok else "result: FAIL")
    return ReportBundle(
        config=cfg,
        payload=_jsonify(payload),
        summary="\n".join(lines) + "\n",
        exit_code=EXIT_OK if ok else EXIT_CHECK,
    )


# ---------------------------------------------------------------------------
# fragility


def _run_fragility(cfg: dict) -> ReportBundle:
    params = _game(cfg["game"])
    rep = fragility_experiment(
        params,
        tuple(cfg["f_kappa"]),
        cfg["n_draws"],
        cfg["seed"],
        x_own=cfg.get("x_own", 1.0),
    )
    kap_bar = params.kappa_scalar()
    analytic = float((1 - params.delta) * np.abs(rep.kappas / kap_bar - 1.0).mean())
    diff = abs(rep.mean_ic_violation - analytic)
    tolerance = cfg.get("tolerance", 1e-6)
    expect = cfg.get("expect", {})
    ok = diff <= tolerance
    for key in ("interior_br_frequency", "br_state_dependence_frequency"):
        if key in expect:
            ok = ok and getattr(rep, key) == float(expect[key])
    payload = {
        "n_draws": rep.n_draws,
        "interior_br_frequency": rep.interior_br_frequency,
        "br_state_dependence_frequency": rep.br_state_dependence_frequency,
        "mean_ic_violation": rep.mean_ic_violation,
        "analytic_mean_violation": analytic,
        "abs_difference": diff,
        "tolerance": tolerance,
        "ok": ok,
    }
    lines = [
        f"fragility study: {cfg['f_kappa']}, {rep.n_draws} draws, seed {cfg['seed']}",
        f"  interior best-response frequency {_fmt(rep.interior_br_frequency)}",
        f"  state-dependence frequency {_fmt(rep.br_state_dependence_frequency)}",
        f"  mean IC violation {_fmt(rep.mean_ic_violation)}",
        f"  analytic slope mean {_fmt(analytic)} (difference {_fmt(diff)})",
        "result: PASS" if ok else "result: FAIL",
    ]
    return ReportBundle(
        config=cfg,
        payload=_jsonify(payload),
        summary="\n".join(lines) + "\n",
        exit_code=EXIT_OK if ok else EXIT_CHECK,
    )


# ---------------------------------------------------------------------------
# sweep (worker functions at module scope so a process pool can pickle them)


def _sweep_cell(args) -> dict:
    strat, game, monitoring, kappa, delta, mode, tol, n_reps, seed = args
    params = GameParams(game["n_agents"], delta, kappa)
    row = {
        "kappa": float(kappa),
        "delta": float(delta),
        "N": game["n_agents"],
        "strategy": _strategy_label(strat),
        "feasible": False,
        "worst_gain": None,
        "residual": None,
    }
    ss = _structure(monitoring, params.n_agents)
    if mode == "construction":
        x = strat.get("x")
        thr = discount_threshold_check(
            strat["name"], params, ss, x=None if x is None else _broadcast_x(x, params.n_agents)
        )
        row["feasible"] = thr.feasible
        row["worst_gain"] = thr.worst_gain
        if thr.bound_violation:
            row["error"] = thr.bound_violation
        return row
    try:
        machines = _machines(strat, params, ss)
    except ValueError as exc:
        row["error"] = str(exc)
        return row
    rep = verify_equilibrium(
        ValueQuery(tuple(machines), params, ss, n_reps=n_reps, seed=seed), tol=tol
    )
    row["feasible"] = rep.feasible
    row["worst_gain"] = rep.worst_gain
    row["residual"] = rep.indifference_residual
    return row


def _run_sweep(cfg: dict, jobs: int = 1) -> ReportBundle:
    kappas = cfg.get("_kappa_axis", [cfg["game"].get("kappa")])
    deltas = cfg.get("_delta_axis", [cfg["game"].get("delta")])
    tol = cfg.get("tol", 1e-9)
    n_reps = cfg.get("n_reps", 10_000)
    cells = [
        (strat, cfg["game"], cfg["monitoring"], kappa, delta, cfg["feasibility"], tol, n_reps, cfg["seed"])
        for strat in cfg["strategies"]
        for kappa in kappas
        for delta in deltas
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]
    payload = {"feasibility": cfg["feasibility"], "rows": rows}
    csv = _csv_text(_SWEEP_COLUMNS, rows)
    n_feas = sum(1 for r in rows if r["feasible"])
    lines = [
        f"sweep: {len(rows)} cells ({cfg['feasibility']} feasibility), seed {cfg['seed']}",
        f"  feasible cells: {n_feas} of {len(rows)}",
    ]
    for row in rows:
        lines.append(
            f"  kappa={_fmt(row['kappa'])} delta={_fmt(row['delta'])} {row['strategy']}: "
            f"{'feasible' if row['feasible'] else 'infeasible'}"
            + (f", worst gain {_fmt(row['worst_gain'])}" if row["worst_gain"] is not None else "")
        )
    return ReportBundle(
        config=cfg,
        payload=_jsonify(payload),
        summary="\n".join(lines) + "\n",
        tables={"sweep": csv},
    )


# ---------------------------------------------------------------------------
# run / replay


def run(config: dict, out_dir=None, jobs: int = 1) -> ReportBundle:
    """Validate, execute, and (if out_dir given) atomically write a bundle."""
    cfg = validate_config(config)
    kind = cfg["kind"]
    if kind == "mech":
        bundle = _run_mech(cfg)
    elif kind == "simulate":
        bundle = _run_simulate(cfg)
    elif kind == "verify":
        bundle = _run_verify(cfg)
    elif kind == "classify":
        bundle = _run_classify(cfg)
    elif kind == "fragility":
        bundle = _run_fragility(cfg)
    else:
        bundle = _run_sweep(cfg, jobs=jobs)
    validate_payload(kind, bundle.payload)
    if out_dir is not None:
        write_bundle(bundle, out_dir)
    return bundle


def _first_divergence(old, new, path="payload"):
    if type(old) is not type(new):
        return f"{path}: type {type(old).__name__} became {type(new).__name__}"
    if isinstance(old, dict):
        for key in old:
            if key not in new:
                return f"{path}.{key}: missing on rerun"
            div = _first_divergence(old[key], new[key], f"{path}.{key}")
            if div:
                return div
        extra = [k for k in new if k not in old]
        if extra:
            return f"{path}.{extra[0]}: new field on rerun"
        return None
    if isinstance(old, list):
        if len(old) != len(new):
            return f"{path}: length {len(old)} became {len(new)}"
        for i, (a, b) in enumerate(zip(old, new)):
            div = _first_divergence(a, b, f"{path}[{i}]")
            if div:
                return div
        return None
    if old != new:
        return f"{path}: {old!r} became {new!r}"
    return None


def replay(bundle: dict, config: dict | None = None, jobs: int = 1):
    """Rerun a bundle's experiment and compare payloads bit-exactly.

    Returns (ok, first_divergence).  ``config`` defaults to the one recorded
    in the bundle; passing a modified config (different seed, n_reps, ...)
    demonstrates divergence detection.
    """
    cfg = config if config is not None else bundle["config"]
    fresh = run(cfg, out_dir=None, jobs=jobs)
    div = _first_divergence(bundle["payload"], fresh.payload)
    return div is None, div


# ---------------------------------------------------------------------------
# command line


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eqlab",
        description="Reproducible indifference-mechanism and repeated-game experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="path to an experiment config (JSON)")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", default=None, help="output directory for the report bundle")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    for kind in KINDS:
        sub.add_parser(kind, parents=[common], help=f"run a {kind} experiment config")
    rep = sub.add_parser("replay", help="rerun a bundle and compare payloads bit-exactly")
    rep.add_argument("bundle", help="bundle directory or report.json path")
    rep.add_argument("--config", default=None, help="override the recorded config")
    rep.add_argument("--seed", type=int, default=None, help="override the replayed seed")
    rep.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            bundle = load_bundle(args.bundle)
            cfg = load_config(args.config) if args.config else None
            if args.seed is not None:
                cfg = copy.deepcopy(cfg if cfg is not None else bundle["config"])
                cfg["seed"] = args.seed
            ok, div = replay(bundle, cfg, jobs=args.jobs)
            if ok:
                print(f"replay ok: {args.bundle} reproduces bit-exactly")
                return EXIT_OK
            print(f"replay mismatch: {div}", file=sys.stderr)
            return EXIT_REPLAY
        cfg = load_config(args.config)
        if cfg.get("kind") != args.command:
            raise ConfigError(
                f"config kind {cfg.get('kind')!r} does not match subcommand {args.command!r}"
            )
        if args.seed is not None:
            cfg["seed"] = args.seed
        out_dir = args.out or cfg.get("out") or os.path.join("runs", cfg.get("name", args.command))
        bundle = run(cfg, out_dir=out_dir, jobs=args.jobs)
        sys.stdout.write(bundle.summary)
        print(f"bundle written to {out_dir}")
        return bundle.exit_code
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
