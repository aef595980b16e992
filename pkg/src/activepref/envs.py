"""Contextual dueling bandit instances with a planted true preference function."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .funcspace import FunctionClass, RewardPreferenceFunction
from .links import LinkSpec, get_link, link_value, sample_feedback


class ContextSchedule:
    """Source of the context index for each round.

    ``kind`` is one of ``"iid"`` (uniform over the context set, optionally
    weighted), ``"round_robin"``, ``"explicit"`` (a user-supplied index list,
    cycled if shorter than the horizon) or ``"adaptive"`` (a callback receiving
    the round number and the public history so far).
    """

    def __init__(self, kind: str = "iid", num_contexts: int | None = None,
                 sequence: Sequence[int] | None = None, probs: Sequence[float] | None = None,
                 callback: Callable | None = None):
        if kind not in ("iid", "round_robin", "explicit", "adaptive"):
            raise ValueError(f"unknown schedule kind {kind!r}")
        if kind == "explicit" and not sequence:
            raise ValueError("explicit schedule needs a non-empty sequence")
        if kind == "adaptive" and callback is None:
            raise ValueError("adaptive schedule needs a callback")
        self.kind = kind
        self.num_contexts = num_contexts
        self.sequence = list(sequence) if sequence is not None else None
        self.probs = np.asarray(probs, dtype=float) if probs is not None else None
        self.callback = callback

    def next(self, t: int, rng: np.random.Generator, history=None) -> int:
        if self.kind == "iid":
            if self.probs is not None:
                return int(rng.choice(self.num_contexts, p=self.probs))
            return int(rng.integers(self.num_contexts))
        if self.kind == "round_robin":
            return t % self.num_contexts
        if self.kind == "explicit":
            return int(self.sequence[t % len(self.sequence)])
        return int(self.callback(t, history))

    def materialize(self, T: int, rng: np.random.Generator) -> list[int]:
        """Context list for a whole run (not available for adaptive schedules)."""
        if self.kind == "adaptive":
            raise ValueError("adaptive schedules cannot be materialized in advance")
        return [self.next(t, rng) for t in range(T)]

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.sequence is not None:
            d["sequence"] = self.sequence
        if self.probs is not None:
            d["probs"] = self.probs.tolist()
        return d


@dataclass
class CBInstance:
    """A planted contextual dueling bandit problem."""

    fclass: FunctionClass
    truth_index: int
    link: LinkSpec
    schedule: ContextSchedule
    T: int = 0

    def __post_init__(self):
        if not 0 <= self.truth_index < len(self.fclass):
            raise ValueError("truth_index is not a member of the class")
        if self.schedule.num_contexts is None:
            self.schedule.num_contexts = self.fclass.num_contexts

    @property
    def truth(self) -> RewardPreferenceFunction:
        return self.fclass[self.truth_index]

    @property
    def num_contexts(self) -> int:
        return self.fclass.num_contexts

    @property
    def num_actions(self) -> int:
        return self.fclass.num_actions

    def margin(self, x: int, a: int, b: int) -> float:
        return self.truth(x, a, b)

    def feedback(self, rng: np.random.Generator, x: int, a: int, b: int) -> int:
        return sample_feedback(rng, self.link, self.margin(x, a, b))

    def preference_probability(self, x: int, a: int, b: int) -> float:
        return link_value(self.link, self.margin(x, a, b))

    def to_dict(self) -> dict:
        doc = self.fclass.to_dict()
        doc.update(truth_index=self.truth_index, link=self.link.name,
                   schedule=self.schedule.to_dict(), T=self.T)
        return doc

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict())
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_dict(cls, doc: dict) -> "CBInstance":
        fc = FunctionClass.from_dict(doc)
        sched = doc.get("schedule", {"kind": "iid"})
        if isinstance(sched, list):
            sched = {"kind": "explicit", "sequence": sched}
        schedule = ContextSchedule(sched.get("kind", "iid"), fc.num_contexts,
                                   sched.get("sequence"), sched.get("probs"))
        return cls(fc, int(doc["truth_index"]), get_link(doc.get("link", "square")),
                   schedule, int(doc.get("T", 0)))

    @classmethod
    def from_json(cls, source: str | Path) -> "CBInstance":
        p = Path(source)
        text = p.read_text() if p.exists() else str(source)
        return cls.from_dict(json.loads(text))


def context_gaps(instance: CBInstance) -> np.ndarray:
    """Margin of the best arm over the runner-up at every context (0 on ties)."""
    r = np.sort(instance.truth.rewards, axis=1)
    return r[:, -1] - r[:, -2]


def gap(instance: CBInstance) -> float:
    """Uniform gap: smallest margin of the optimal arm over any other arm."""
    return float(context_gaps(instance).min())


def context_gap_counts(instance: CBInstance, epsilon: float, contexts: Sequence[int]) -> int:
    """Number of scheduled rounds whose context gap is at most ``epsilon``."""
    g = context_gaps(instance)
    return int(np.sum(g[np.asarray(contexts, dtype=int)] <= epsilon))


def regret_increment(instance: CBInstance, x: int, a: int, b: int) -> float:
    """``f*(x, pi*(x), a) + f*(x, pi*(x), b)`` for the planted truth."""
    r = instance.truth.rewards[x]
    top = r.max()
    return float((top - r[a]) + (top - r[b]))


@dataclass
class GeneratorConfig:
    """Knobs for :func:`generate_instance`.

    ``gap`` is the planted uniform gap; with ``tie_contexts > 0`` that many
    contexts get two tied optimal arms (so the uniform gap is 0).
    ``decoy_noise`` bounds the uniform perturbation applied to the truth's
    table to build each decoy. ``decoy_argmax`` is ``"any"``, ``"differ"``
    (each decoy's greedy arm differs from the truth's at some context) or
    ``"share"`` (same greedy arm as the truth everywhere).
    ``min_separation`` rejects "differ" decoys whose preference for their own
    greedy arm over the truth's, relative to the truth, is below this value.
    ``decoy_kind="one_hot"`` replaces the noise model: every row of a decoy is
    a unit vector on a random arm other than the truth's greedy arm, which
    makes decoys as easy to refute as possible.
    ``spread`` lets the arms below the runner-up fall up to that far below it.
    """

    num_contexts: int = 5
    num_actions: int = 4
    class_size: int = 16
    gap: float = 0.25
    tie_contexts: int = 0
    spread: float = 0.0
    decoy_noise: float = 2.0
    decoy_argmax: str = "any"
    decoy_kind: str = "noise"
    min_separation: float = 0.0
    schedule: str = "iid"
    max_tries: int = 10000

    def validate(self) -> None:
        if not 0.0 <= self.gap <= 1.0:
            raise ValueError(f"infeasible gap {self.gap}: must lie in [0, 1]")
        if self.num_actions < 2 or self.num_contexts < 1 or self.class_size < 1:
            raise ValueError("need >= 2 actions, >= 1 context and a non-empty class")
        if not 0 <= self.tie_contexts <= self.num_contexts:
            raise ValueError("tie_contexts must lie in [0, num_contexts]")
        if self.schedule not in ("iid", "round_robin"):
            raise ValueError("generated instances use an 'iid' or 'round_robin' schedule")
        if self.decoy_kind not in ("noise", "one_hot"):
            raise ValueError(f"unknown decoy_kind {self.decoy_kind!r}")
        if self.decoy_argmax not in ("any", "differ", "share"):
            raise ValueError(f"unknown decoy_argmax {self.decoy_argmax!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "GeneratorConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown generator fields: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        return asdict(self)


def plant_truth(cfg: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    """Reward table whose uniform gap is exactly ``cfg.gap``.

    On gapped contexts the optimal arm gets ``base + gap`` and the runner-up
    exactly ``base``; on tie contexts two arms share the top value.
    """
    X, A = cfg.num_contexts, cfg.num_actions
    # dyadic base keeps top - base == gap exact in floating point
    base = np.floor((1.0 - cfg.gap) / 2.0 * 2.0 ** 20) / 2.0 ** 20
    top = base + cfg.gap
    r = np.empty((X, A))
    ties = set(rng.choice(X, size=cfg.tie_contexts, replace=False).tolist())
    for x in range(X):
        order = rng.permutation(A)
        row = np.empty(A)
        row[order[0]] = top
        row[order[1]] = top if x in ties else base
        lo = max(0.0, base - cfg.spread)
        row[order[2:]] = rng.uniform(lo, base, size=A - 2)
        r[x] = row
    return r


def _decoy_ok(cfg: GeneratorConfig, truth: np.ndarray, cand: np.ndarray) -> bool:
    t_arm = np.argmax(truth, axis=1)
    c_arm = np.argmax(cand, axis=1)
    if np.array_equal(cand, truth):
        return False
    if cfg.decoy_argmax == "share":
        return bool(np.all(t_arm == c_arm))
    if cfg.decoy_argmax == "differ":
        diff = np.flatnonzero(t_arm != c_arm)
        if diff.size == 0:
            return False
        rows = np.arange(truth.shape[0])[diff]
        sep = (cand[rows, c_arm[diff]] - cand[rows, t_arm[diff]]) \
            - (truth[rows, c_arm[diff]] - truth[rows, t_arm[diff]])
        return bool(np.all(sep >= cfg.min_separation))
    return True


def _one_hot_decoy(truth: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    X, A = truth.shape
    best = np.argmax(truth, axis=1)
    shift = rng.integers(1, A, size=X)
    cand = np.zeros((X, A))
    cand[np.arange(X), (best + shift) % A] = 1.0
    return cand


def make_decoys(truth: np.ndarray, cfg: GeneratorConfig, rng: np.random.Generator,
                count: int) -> list[np.ndarray]:
    """``count`` perturbed copies of ``truth`` satisfying the decoy constraints."""
    decoys = []
    tries = 0
    while len(decoys) < count:
        tries += 1
        if tries > cfg.max_tries:
            raise ValueError("could not generate enough decoys; relax the decoy constraints")
        if cfg.decoy_kind == "one_hot":
            cand = _one_hot_decoy(truth, rng)
            if not any(np.array_equal(cand, d) for d in decoys):
                decoys.append(cand)
            continue
        noise = rng.uniform(-cfg.decoy_noise, cfg.decoy_noise, size=truth.shape)
        cand = np.clip(truth + noise, 0.0, 1.0)
        if _decoy_ok(cfg, truth, cand):
            decoys.append(cand)
    return decoys


def generate_instance(cfg: GeneratorConfig, rng: np.random.Generator, T: int = 0,
                      link: LinkSpec | str = "square") -> CBInstance:
    """Plant a truth with the requested gap and surround it with decoys.

    The truth sits at a random position in the class.
    """
    cfg.validate()
    truth = plant_truth(cfg, rng)
    decoys = make_decoys(truth, cfg, rng, cfg.class_size - 1)
    k = int(rng.integers(cfg.class_size))
    members = decoys[:k] + [truth] + decoys[k:]
    schedule = ContextSchedule(cfg.schedule, cfg.num_contexts)
    return CBInstance(FunctionClass(members), k, get_link(link), schedule, T)
