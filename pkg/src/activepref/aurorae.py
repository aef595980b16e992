"""Imitation learning from expert preferences: one bandit learner per step.

A finite-horizon tabular MDP is treated as ``H`` stacked contextual dueling
bandits. The learner at step ``h`` sees the current state as its context and,
when it queries, receives a comparison label drawn from the link applied to
the expert's Q-value difference (divided by ``H`` so margins stay in [-1, 1]).
It then executes one of its two proposed actions uniformly at random.

Regret is evaluated exactly: before every episode the current policy of all
``H`` learners is tabulated and evaluated by dynamic programming.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aurora import Aurora, AuroraParams, InvariantChecker
from .envs import GeneratorConfig, make_decoys
from .funcspace import FunctionClass
from .harness import (
    ConfigError,
    InvariantViolation,
    RunResult,
    _check_fields,
    _validate_common,
    instance_seed,
    load_config,
    stream,
    to_csv,
)
from .links import LinkSpec, get_link, sample_feedback


@dataclass
class TabularMDP:
    """Finite-horizon MDP with time-indexed transitions.

    ``transitions[h, x, a]`` is the next-state distribution, ``rewards[x, a]``
    lies in [0, 1] and ``initial`` is the distribution of the first state.
    """

    transitions: np.ndarray
    rewards: np.ndarray
    horizon: int
    initial: np.ndarray

    def __post_init__(self):
        self.rewards = np.asarray(self.rewards, dtype=float)
        S, A = self.rewards.shape
        P = np.asarray(self.transitions, dtype=float)
        if P.shape == (S, A, S):
            P = np.broadcast_to(P, (self.horizon, S, A, S)).copy()
        if P.shape != (self.horizon, S, A, S):
            raise ValueError(f"transitions must have shape (H, S, A, S), got {P.shape}")
        if not np.allclose(P.sum(axis=-1), 1.0, atol=1e-9, rtol=0) or np.any(P < 0):
            raise ValueError("every transition row must be a distribution")
        if np.any(self.rewards < 0) or np.any(self.rewards > 1):
            raise ValueError("rewards must lie in [0, 1]")
        init = np.asarray(self.initial, dtype=float)
        if init.ndim == 0:
            k = int(init)
            init = np.zeros(S)
            init[k] = 1.0
        if init.shape != (S,) or not np.isclose(init.sum(), 1.0, atol=1e-9):
            raise ValueError("initial must be a state index or a distribution over states")
        self.transitions = P
        self.initial = init

    @property
    def num_states(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_actions(self) -> int:
        return self.rewards.shape[1]


@dataclass
class ExpertModel:
    policy: np.ndarray      # (H, S, A)
    q: np.ndarray           # (H, S, A)
    v: np.ndarray           # (H + 1, S); v[H] == 0

    @property
    def advantage(self) -> np.ndarray:
        return self.q - self.v[:-1, :, None]

    @property
    def horizon(self) -> int:
        return self.q.shape[0]


def _check_policy(mdp: TabularMDP, policy: np.ndarray) -> np.ndarray:
    pi = np.asarray(policy, dtype=float)
    shape = (mdp.horizon, mdp.num_states, mdp.num_actions)
    if pi.shape == shape[1:]:
        pi = np.broadcast_to(pi, shape).copy()
    if pi.shape != shape:
        raise ValueError(f"policy must have shape {shape}, got {pi.shape}")
    if np.any(pi < -1e-12) or not np.allclose(pi.sum(axis=-1), 1.0, atol=1e-9):
        raise ValueError("malformed policy: rows must be distributions")
    return pi


def evaluate_policy(mdp: TabularMDP, policy) -> tuple[np.ndarray, np.ndarray]:
    """Exact ``(V, Q)`` of a time-indexed policy by backward induction."""
    pi = _check_policy(mdp, policy)
    H, S, A = pi.shape
    V = np.zeros((H + 1, S))
    Q = np.zeros((H, S, A))
    for h in range(H - 1, -1, -1):
        Q[h] = mdp.rewards + mdp.transitions[h] @ V[h + 1]
        V[h] = np.sum(pi[h] * Q[h], axis=1)
    return V, Q


def expert_q(mdp: TabularMDP, policy) -> ExpertModel:
    """Q, V and advantage tables of the expert policy."""
    pi = _check_policy(mdp, policy)
    V, Q = evaluate_policy(mdp, pi)
    return ExpertModel(pi, Q, V)


def soft_greedy_expert(mdp: TabularMDP, greedy_prob: float = 0.7) -> np.ndarray:
    """Expert that takes the argmax of its own Q with probability ``greedy_prob``.

    The remaining mass is split evenly over the other actions. Built backwards
    so that step ``h`` is greedy with respect to the expert's own ``Q_h``.
    """
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    pi = np.zeros((H, S, A))
    V = np.zeros(S)
    for h in range(H - 1, -1, -1):
        Qh = mdp.rewards + mdp.transitions[h] @ V
        best = np.argmax(Qh, axis=1)
        pi[h] = (1.0 - greedy_prob) / (A - 1)
        pi[h, np.arange(S), best] = greedy_prob
        V = np.sum(pi[h] * Qh, axis=1)
    return pi


def occupancy(mdp: TabularMDP, policy, x0: int) -> np.ndarray:
    """State distribution ``d[h, x]`` of the policy started from ``x0``."""
    pi = _check_policy(mdp, policy)
    H, S, _ = pi.shape
    d = np.zeros((H, S))
    d[0, x0] = 1.0
    for h in range(H - 1):
        sa = d[h][:, None] * pi[h]
        d[h + 1] = np.einsum("xa,xay->y", sa, mdp.transitions[h])
    return d


def preference_margin(model: ExpertModel, h: int, x: int, a: int, b: int,
                      scale: float | None = None) -> float:
    """``(Q_h(x, a) - Q_h(x, b)) / scale`` with ``scale`` defaulting to ``H``."""
    scale = model.horizon if scale is None else scale
    return float((model.q[h, x, a] - model.q[h, x, b]) / scale)


def il_regret_and_adv(mdp: TabularMDP, model: ExpertModel, snapshot, x0: int):
    """Exact regret increment against the expert and the expert-advantage term."""
    V, _ = evaluate_policy(mdp, snapshot)
    d = occupancy(mdp, snapshot, x0)
    max_adv = model.advantage.max(axis=2)
    return float(model.v[0, x0] - V[0, x0]), float(np.sum(d * max_adv))


def chain_mdp(num_states: int = 6, num_actions: int = 3, horizon: int = 4,
              slip: float = 0.1, initial: int = 0) -> TabularMDP:
    """A chain where moving right pays off later and moving left pays now.

    Action 0 advances one state (staying put with probability ``slip``),
    action 1 stays, action 2 retreats; any further actions stay. The reward
    grows along the chain and retreating carries an immediate bonus.
    """
    S, A = num_states, num_actions
    P = np.zeros((S, A, S))
    r = np.zeros((S, A))
    for x in range(S):
        pos = 0.8 * x / max(S - 1, 1)
        P[x, 0, min(x + 1, S - 1)] += 1.0 - slip
        P[x, 0, x] += slip
        r[x, 0] = pos
        for a in range(1, A):
            if a == 2:
                P[x, a, max(x - 1, 0)] = 1.0
                r[x, a] = min(1.0, pos + 0.15)
            else:
                P[x, a, x] = 1.0
                r[x, a] = min(1.0, pos + 0.05 * a)
    return TabularMDP(P, r, horizon, initial)


# --------------------------------------------------------------------------
# Learner stack
# --------------------------------------------------------------------------

def step_classes(model: ExpertModel, cfg: GeneratorConfig, rng: np.random.Generator):
    """Per-step classes containing the scaled expert Q table plus decoys.

    Returns the classes and the index of the truth in each.
    """
    H = model.horizon
    classes, truth_idx = [], []
    for h in range(H):
        truth = model.q[h] / H
        decoys = make_decoys(truth, cfg, rng, cfg.class_size - 1)
        k = int(rng.integers(cfg.class_size))
        classes.append(FunctionClass(decoys[:k] + [truth] + decoys[k:]))
        truth_idx.append(k)
    return classes, truth_idx


class PolicyCache:
    """Memoised per-step policy tables; a learner's policy only moves when it observes."""

    def __init__(self, instances: list[Aurora], num_states: int):
        self.instances = instances
        self.S = num_states
        self._tables = [None] * len(instances)
        self._stamp = [-1] * len(instances)

    def table(self, h: int) -> np.ndarray:
        inst = self.instances[h]
        stamp = len(inst.history)
        if self._stamp[h] != stamp:
            self._tables[h] = np.stack([inst.policy_distribution(x) for x in range(self.S)])
            self._stamp[h] = stamp
        return self._tables[h]

    def snapshot(self) -> np.ndarray:
        return np.stack([self.table(h) for h in range(len(self.instances))])


def snapshot_policy(instances: list[Aurora], mdp: TabularMDP) -> np.ndarray:
    """Action distribution every learner would induce right now, as ``(H, S, A)``."""
    return PolicyCache(instances, mdp.num_states).snapshot()


@dataclass
class StepRecord:
    t: int
    h: int
    x: int
    Z: int
    lam: int
    w: float
    a: int
    b: int
    executed: int
    version_space_size: int
    oracle_cum_loss: float


@dataclass
class EpisodeRecord:
    t: int
    x0: int
    regret_increment: float
    cum_regret: float
    queries: int
    cum_queries: int
    adv_increment: float
    cum_adv: float


@dataclass
class EpisodeLog:
    steps: list = field(default_factory=list)
    queries: int = 0


def run_episode(instances: list[Aurora], mdp: TabularMDP, model: ExpertModel, x0: int,
                link: LinkSpec, fb_rng: np.random.Generator, env_rng: np.random.Generator,
                t: int = 1, checkers=None) -> EpisodeLog:
    """Play one episode, querying the expert wherever a learner asks to."""
    H = mdp.horizon
    log = EpisodeLog()
    x = x0
    for h in range(H):
        inst = instances[h]
        d = inst.act(x)
        if checkers is not None:
            bad = checkers[h].check(inst, d)
            if bad:
                raise InvariantViolation(t, bad, where=f", step {h}")
        if d.queried:
            y = sample_feedback(fb_rng, link, preference_margin(model, h, x, d.a, d.b, H))
            inst.observe(x, d, y)
            log.queries += 1
        else:
            inst.advance()
        pick = int(env_rng.integers(2))
        act = d.a if pick == 0 else d.b
        log.steps.append(StepRecord(t, h, x, d.Z, d.lam, d.width, d.a, d.b, act,
                                    int(d.version.size), inst.oracle.cumulative_loss))
        x_next = int(env_rng.choice(mdp.num_states, p=mdp.transitions[h, x, act]))
        x = x_next
    return log


IL_DEFAULTS = {
    "T": 100,
    "seed": 0,
    "link": "square",
    "delta": 0.05,
    "oracle_constant": None,
    "eta": None,
    "igw_support": "full",
    "check_invariants": False,
    "mdp": {},
    "mdp_file": None,
    "classes": {},
    "instance_seed": None,
}

IL_CLASS_DEFAULTS = {"class_size": 8, "decoy_kind": "one_hot"}

CHAIN_FIELDS = {"num_states", "num_actions", "horizon", "slip", "initial", "greedy_prob"}


def mdp_from_dict(doc: dict) -> tuple[TabularMDP, np.ndarray]:
    """MDP and expert policy from the JSON schema.

    Keys: ``H``, ``num_states``, ``num_actions``, ``transitions``, ``rewards``,
    ``expert_policy`` and optionally ``initial`` (state index or distribution,
    uniform when absent).
    """
    S, A = int(doc["num_states"]), int(doc["num_actions"])
    init = doc.get("initial", (np.ones(S) / S).tolist())
    mdp = TabularMDP(np.asarray(doc["transitions"]), np.asarray(doc["rewards"]),
                     int(doc["H"]), np.asarray(init))
    if mdp.num_actions != A:
        raise ValueError("num_actions does not match the reward table")
    return mdp, _check_policy(mdp, np.asarray(doc["expert_policy"]))


def mdp_to_dict(mdp: TabularMDP, expert_policy) -> dict:
    return {
        "H": mdp.horizon,
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "transitions": mdp.transitions.tolist(),
        "rewards": mdp.rewards.tolist(),
        "expert_policy": np.asarray(expert_policy).tolist(),
        "initial": mdp.initial.tolist(),
    }


def build_il_problem(cfg: dict) -> tuple[TabularMDP, np.ndarray]:
    if cfg.get("mdp_file"):
        try:
            return mdp_from_dict(json.loads(Path(cfg["mdp_file"]).read_text()))
        except (OSError, ValueError, KeyError) as e:
            raise ConfigError(f"field 'mdp_file': {e}") from e
    spec = dict(cfg.get("mdp") or {})
    unknown = set(spec) - CHAIN_FIELDS
    if unknown:
        raise ConfigError(f"field 'mdp': unknown field(s) {sorted(unknown)}")
    greedy_prob = spec.pop("greedy_prob", 0.7)
    try:
        mdp = chain_mdp(**spec)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"field 'mdp': {e}") from e
    return mdp, soft_greedy_expert(mdp, greedy_prob)


def run_il(config: dict, problem: tuple[TabularMDP, np.ndarray] | None = None,
           classes: tuple[list[FunctionClass], list[int]] | None = None) -> RunResult:
    """Run the stacked learner for ``T`` episodes and evaluate it exactly.

    Returns per-episode records; per-step records are in ``extra["steps"]``.
    """
    cfg = load_config(None, config, IL_DEFAULTS)
    _check_fields(cfg, IL_DEFAULTS, "il config")
    _validate_common(cfg)
    T, seed = cfg["T"], cfg["seed"]
    link = get_link(cfg["link"])
    mdp, pi_e = problem if problem is not None else build_il_problem(cfg)
    model = expert_q(mdp, pi_e)
    H, S = mdp.horizon, mdp.num_states
    if classes is None:
        try:
            gen = GeneratorConfig.from_dict({**IL_CLASS_DEFAULTS, **(cfg.get("classes") or {})})
            gen.validate()
            classes = step_classes(model, gen, stream(instance_seed(cfg), "instance"))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"field 'classes': {e}") from e
    fclasses, truth_idx = classes
    alg_rng = stream(seed, "algorithm")
    delta_h = cfg["delta"] / H
    instances = []
    for h in range(H):
        params = AuroraParams.for_class(T, fclasses[h], link, delta_h, cfg["oracle_constant"])
        instances.append(Aurora(fclasses[h], params, link, alg_rng, cfg["eta"],
                                cfg["igw_support"]))
    gaps = []
    for h in range(H):
        srt = np.sort(model.q[h] / H, axis=1)
        gaps.append(float((srt[:, -1] - srt[:, -2]).min()))
    checkers = [InvariantChecker(truth_idx[h], fclasses[h], gaps[h]) for h in range(H)] \
        if cfg["check_invariants"] else None

    ctx_rng, fb_rng, env_rng = stream(seed, "contexts"), stream(seed, "feedback"), \
        stream(seed, "env")
    cache = PolicyCache(instances, S)
    uniform_init = np.allclose(mdp.initial, 1.0 / S)
    episodes, steps = [], []
    cum_regret = cum_adv = 0.0
    cum_q = 0
    per_step_q = [0] * H
    realizable = True
    for t in range(1, T + 1):
        if uniform_init:
            x0 = int(ctx_rng.integers(S))
        else:
            x0 = int(ctx_rng.choice(S, p=mdp.initial))
        snap = cache.snapshot()
        reg, adv = il_regret_and_adv(mdp, model, snap, x0)
        ep = run_episode(instances, mdp, model, x0, link, fb_rng, env_rng, t, checkers)
        for rec in ep.steps:
            per_step_q[rec.h] += rec.Z
        realizable &= all(np.any(inst.version() == truth_idx[h])
                          for h, inst in enumerate(instances))
        cum_regret += reg
        cum_adv += adv
        cum_q += ep.queries
        steps.extend(ep.steps)
        episodes.append(EpisodeRecord(t, x0, reg, cum_regret, ep.queries, cum_q, adv, cum_adv))

    final = cache.snapshot()
    V_final, _ = evaluate_policy(mdp, final)
    greedy = np.argmax(model.q, axis=2)
    unqueried = final.max(axis=2) == 1.0
    point = np.argmax(final, axis=2)
    mismatches = int(np.sum(unqueried & (point != greedy)))
    x_ref = int(np.argmax(mdp.initial))
    summary = {
        "config": cfg,
        "seed": seed,
        "T": T,
        "H": H,
        "il_regret": cum_regret,
        "adv_T": cum_adv,
        "cum_queries": cum_q,
        "per_step_queries": per_step_q,
        "realizability_held": bool(realizable),
        "betas": [inst.params.beta for inst in instances],
        "scaled_gaps": gaps,
        "expert_value_x0": float(model.v[0, x_ref]),
        "final_policy_value_x0": float(V_final[0, x_ref]),
        "reference_state": x_ref,
        "final_unqueried_states": int(unqueried.sum()),
        "final_unqueried_greedy_mismatches": mismatches,
        "invariants": [c.report.as_dict() for c in checkers] if checkers else None,
    }
    return RunResult(episodes, summary, {"steps": steps, "instances": instances,
                                         "model": model, "mdp": mdp, "classes": fclasses,
                                         "truth_index": truth_idx, "final_policy": final,
                                         "record_cls": EpisodeRecord})


def single_step_problem(instance) -> tuple[TabularMDP, np.ndarray]:
    """Horizon-1 MDP whose rewards are a bandit instance's true reward table.

    States are the contexts, drawn uniformly; transitions are irrelevant and
    set to stay put. With this problem and the instance's own class,
    ``run_il`` makes exactly the draws ``run_cb`` makes on the instance.
    """
    r = instance.truth.rewards
    X, A = r.shape
    P = np.zeros((X, A, X))
    P[np.arange(X), :, np.arange(X)] = 1.0
    mdp = TabularMDP(P, r, 1, np.full(X, 1.0 / X))
    expert = np.zeros((1, X, A))
    expert[0, np.arange(X), np.argmax(r, axis=1)] = 1.0
    return mdp, expert


def steps_csv(result: RunResult) -> str:
    return to_csv(result.extra["steps"], StepRecord)
