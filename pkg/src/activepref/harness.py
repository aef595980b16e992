"""Run orchestration: configuration, seeding, per-round logs and summaries.

All randomness flows from one integer seed through named sub-streams, so the
instance, the context sequence, the expert's labels and the learner's own
sampling never perturb one another.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .aurora import Aurora, AuroraParams, InvariantChecker
from .envs import CBInstance, ContextSchedule, GeneratorConfig, gap, generate_instance, \
    regret_increment, context_gap_counts
from .links import get_link

log = logging.getLogger(__name__)

STREAMS = {"instance": 0, "contexts": 1, "feedback": 2, "algorithm": 3, "env": 4}


class ConfigError(ValueError):
    """Invalid run configuration (CLI exit code 2)."""


class InvariantViolation(RuntimeError):
    """A per-round guarantee failed while ``check_invariants`` was on (exit code 3)."""

    def __init__(self, round_no: int, names: list[str], where: str = ""):
        msg = f"invariant violation at round {round_no}{where}: {', '.join(names)}"
        super().__init__(msg)
        self.round = round_no
        self.names = names


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named component of a run."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(STREAMS[name],)))


CB_DEFAULTS: dict[str, Any] = {
    "T": 1000,
    "seed": 0,
    "link": "square",
    "delta": 0.05,
    "oracle_constant": None,
    "eta": None,
    "igw_support": "full",
    "check_invariants": False,
    "instance": {},
    "instance_file": None,
    "schedule": None,
    "gap_epsilon": None,
    "instance_seed": None,
}


def load_config(path: str | Path | None, overrides: dict | None = None,
                defaults: dict | None = None) -> dict:
    """Read a JSON config, apply CLI overrides and fill defaults."""
    cfg = copy.deepcopy(defaults or {})
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        cfg.update(doc)
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg[k] = v
    return cfg


def _check_fields(cfg: dict, allowed: dict, what: str) -> None:
    unknown = set(cfg) - set(allowed)
    if unknown:
        raise ConfigError(f"{what}: unknown field(s) {sorted(unknown)}")


def _require_int(cfg, key, lo=0):
    v = cfg.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < lo:
        raise ConfigError(f"field '{key}': expected integer >= {lo}, got {v!r}")
    return v


def _validate_common(cfg: dict) -> None:
    _require_int(cfg, "T", 0)
    _require_int(cfg, "seed", 0)
    try:
        get_link(cfg["link"])
    except ValueError as e:
        raise ConfigError(f"field 'link': {e}") from e
    d = cfg.get("delta")
    if not isinstance(d, (int, float)) or not 0 < d < 1:
        raise ConfigError(f"field 'delta': expected a number in (0, 1), got {d!r}")
    if cfg.get("igw_support") not in ("full", "candidates"):
        raise ConfigError("field 'igw_support': expected 'full' or 'candidates'")


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".9g")


def to_csv(rows: list, cls) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f.name for f in fields(cls)])
    for r in rows:
        w.writerow([fmt(v) for v in astuple(r)])
    return buf.getvalue()


@dataclass
class RoundRecord:
    t: int
    Z_t: int
    lambda_t: int
    w_t: float
    a_t: int
    b_t: int
    regret_increment: float
    cum_regret: float
    cum_queries: int
    oracle_cum_loss: float
    version_space_size: int


@dataclass
class RunResult:
    records: list
    summary: dict
    extra: dict = field(default_factory=dict)

    def csv(self) -> str:
        cls = type(self.records[0]) if self.records else self.extra.get("record_cls", RoundRecord)
        return to_csv(self.records, cls)

    def summary_json(self) -> str:
        return json.dumps(self.summary, indent=2, sort_keys=True, default=_jsonable)


def _jsonable(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def instance_seed(cfg: dict) -> int:
    """Seed of the instance stream; ``instance_seed`` pins one instance across run seeds."""
    v = cfg.get("instance_seed")
    if v is None:
        return cfg["seed"]
    return _require_int(cfg, "instance_seed", 0)


def build_cb_instance(cfg: dict) -> CBInstance:
    """Instance from ``instance_file`` or from the generator fields in ``instance``."""
    link = get_link(cfg["link"])
    if cfg.get("instance_file"):
        try:
            inst = CBInstance.from_json(cfg["instance_file"])
        except (OSError, ValueError, KeyError) as e:
            raise ConfigError(f"field 'instance_file': {e}") from e
        inst.link = link if "link" in cfg else inst.link
    else:
        try:
            gen = GeneratorConfig.from_dict(cfg.get("instance") or {})
            inst = generate_instance(gen, stream(instance_seed(cfg), "instance"), cfg["T"], link)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"field 'instance': {e}") from e
    sched = cfg.get("schedule")
    if sched:
        if isinstance(sched, list):
            sched = {"kind": "explicit", "sequence": sched}
        if "file" in sched:
            try:
                seq = json.loads(Path(sched["file"]).read_text())
            except (OSError, ValueError) as e:
                raise ConfigError(f"field 'schedule.file': {e}") from e
            sched = {"kind": "explicit", "sequence": seq}
        try:
            inst.schedule = ContextSchedule(sched.get("kind", "iid"), inst.num_contexts,
                                            sched.get("sequence"), sched.get("probs"))
        except ValueError as e:
            raise ConfigError(f"field 'schedule': {e}") from e
        if inst.schedule.sequence and max(inst.schedule.sequence) >= inst.num_contexts:
            raise ConfigError("field 'schedule': context index out of range")
    inst.T = cfg["T"]
    return inst


def run_cb(config: dict, instance: CBInstance | None = None, schedule_callback=None) -> RunResult:
    """Run the bandit learner end to end.

    Deterministic given the config (including its seed). Returns the per-round
    records and a summary. With ``check_invariants`` set, any violated lemma
    raises :class:`InvariantViolation`.
    """
    cfg = load_config(None, config, CB_DEFAULTS)
    _check_fields(cfg, CB_DEFAULTS, "cb config")
    _validate_common(cfg)
    inst = instance if instance is not None else build_cb_instance(cfg)
    if schedule_callback is not None:
        inst.schedule = ContextSchedule("adaptive", inst.num_contexts, callback=schedule_callback)
    T, seed = cfg["T"], cfg["seed"]
    link = get_link(cfg["link"])
    inst.link = link
    params = AuroraParams.for_class(T, inst.fclass, link, cfg["delta"], cfg["oracle_constant"])
    learner = Aurora(inst.fclass, params, link, stream(seed, "algorithm"), cfg["eta"],
                     cfg["igw_support"])
    ctx_rng, fb_rng = stream(seed, "contexts"), stream(seed, "feedback")
    delta_gap = gap(inst)
    checker = InvariantChecker(inst.truth_index, inst.fclass, delta_gap) \
        if cfg["check_invariants"] else None

    records = []
    contexts = []
    public = []
    cum_regret, cum_q = 0.0, 0
    realizable = True
    switch_round = None
    lam_rounds = 0
    for t in range(T):
        x = inst.schedule.next(t, ctx_rng, public)
        contexts.append(x)
        d = learner.act(x)
        realizable &= bool(np.any(d.version == inst.truth_index))
        if checker is not None:
            bad = checker.check(learner, d)
            if bad:
                raise InvariantViolation(t + 1, bad)
        if d.queried:
            y = inst.feedback(fb_rng, x, d.a, d.b)
            learner.observe(x, d, y)
            cum_q += 1
            if d.lam:
                lam_rounds += 1
                if switch_round is None:
                    switch_round = t + 1
        else:
            y = None
            learner.advance()
        public.append((x, d.a, d.b, d.Z, y))
        inc = regret_increment(inst, x, d.a, d.b)
        cum_regret += inc
        records.append(RoundRecord(t + 1, d.Z, d.lam, d.width, d.a, d.b, inc, cum_regret,
                                   cum_q, learner.oracle.cumulative_loss, int(d.version.size)))

    summary = {
        "config": cfg,
        "seed": seed,
        "T": T,
        "beta": params.beta,
        "gamma": params.gamma,
        "gap": delta_gap,
        "cum_regret": cum_regret,
        "cum_queries": cum_q,
        "realizability_held": realizable,
        "truth_in_final_version": bool(np.any(learner.version() == inst.truth_index)),
        "final_version_size": int(learner.version().size),
        "lambda_switch_round": switch_round,
        "lambda1_query_fraction": lam_rounds / cum_q if cum_q else 0.0,
        "oracle_regret": learner.oracle.regret(),
        "invariants": checker.report.as_dict() if checker else None,
    }
    if cfg.get("gap_epsilon") is not None:
        summary["T_eps"] = context_gap_counts(inst, cfg["gap_epsilon"], contexts)
    return RunResult(records, summary, {"instance": inst, "learner": learner,
                                        "contexts": contexts})


# --------------------------------------------------------------------------
# Sweeps
# --------------------------------------------------------------------------

@dataclass
class SweepRow:
    T: int
    seed: int
    cum_regret: float
    cum_queries: int
    realizability_held: int


def _sweep_cell(args):
    kind, base, T, seed = args
    cfg = dict(base, T=T, seed=seed)
    if kind == "il":
        from .aurorae import run_il
        s = run_il(cfg).summary
        return SweepRow(T, seed, s["il_regret"], s["cum_queries"], int(s["realizability_held"]))
    s = run_cb(cfg).summary
    return SweepRow(T, seed, s["cum_regret"], s["cum_queries"], int(s["realizability_held"]))


def sweep(config: dict, workers: int = 1) -> RunResult:
    """Run every (T, seed) cell and aggregate medians per T.

    ``config`` holds a run config plus ``T_grid`` and ``seeds`` lists and an
    optional ``kind`` (``"cb"`` or ``"il"``). The instance is regenerated from
    each cell's seed unless the base config pins an ``instance_seed``.
    """
    cfg = dict(config)
    grid = cfg.pop("T_grid", None)
    seeds = cfg.pop("seeds", None)
    kind = cfg.pop("kind", "cb")
    workers = int(cfg.pop("workers", workers))
    if not grid:
        raise ConfigError("field 'T_grid': expected a non-empty list of horizons")
    if not seeds:
        raise ConfigError("field 'seeds': expected a non-empty list of seeds")
    if kind not in ("cb", "il"):
        raise ConfigError("field 'kind': expected 'cb' or 'il'")
    cells = [(kind, cfg, int(T), int(s)) for T in grid for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]
    agg = {}
    for T in grid:
        sub = [r for r in rows if r.T == T]
        agg[int(T)] = {
            "median_cum_regret": statistics.median(r.cum_regret for r in sub),
            "median_cum_queries": statistics.median(r.cum_queries for r in sub),
            "realizability_rate": sum(r.realizability_held for r in sub) / len(sub),
        }
    Ts = sorted(agg)
    ratios = {f"{b}/{a}": {
        "queries": agg[b]["median_cum_queries"] / agg[a]["median_cum_queries"]
        if agg[a]["median_cum_queries"] else None,
        "regret": agg[b]["median_cum_regret"] / agg[a]["median_cum_regret"]
        if agg[a]["median_cum_regret"] else None,
    } for a, b in zip(Ts, Ts[1:])}
    summary = {"config": config, "aggregate": agg, "growth_ratios": ratios}
    return RunResult(rows, summary, {"record_cls": SweepRow})
