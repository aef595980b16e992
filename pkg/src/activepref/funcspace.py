"""Finite preference-function classes in reward-difference form.

Every member is a reward table ``r[x, a]`` with values in [0, 1] and induces
the preference function ``f(x, a, b) = r[x, a] - r[x, b]``. Anti-symmetry and
transitivity therefore hold by construction.

The module also provides the set-valued quantities the bandit learner needs
(version space, candidate arms, width) and an exhaustive eluder-dimension
calculator for small classes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class RealizabilityError(RuntimeError):
    """The version space became empty, so the true function was eliminated."""


class EluderCapError(ValueError):
    """The class domain is too large for exhaustive eluder search."""


@dataclass(frozen=True, eq=False)
class RewardPreferenceFunction:
    """A reward table ``rewards[x, a]`` and the preferences it induces."""

    rewards: np.ndarray

    def __post_init__(self):
        r = np.array(self.rewards, dtype=float)
        if r.ndim != 2:
            raise ValueError("rewards must be a (num_contexts, num_actions) table")
        if np.any(r < 0.0) or np.any(r > 1.0) or np.any(np.isnan(r)):
            raise ValueError("rewards must lie in [0, 1]")
        r.setflags(write=False)
        object.__setattr__(self, "rewards", r)

    @property
    def num_contexts(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_actions(self) -> int:
        return self.rewards.shape[1]

    def __call__(self, x: int, a: int, b: int) -> float:
        return float(self.rewards[x, a] - self.rewards[x, b])

    def best_arm(self, x: int) -> int:
        return best_arm(self, x)

    def __eq__(self, other):
        if not isinstance(other, RewardPreferenceFunction):
            return NotImplemented
        return np.array_equal(self.rewards, other.rewards)

    __hash__ = None


def best_arm(f: RewardPreferenceFunction, x: int) -> int:
    """Greedy arm of ``f`` at context ``x``; ties go to the lowest index."""
    if not 0 <= x < f.num_contexts:
        raise IndexError(f"context index {x} out of range")
    # np.argmax returns the first maximiser
    return int(np.argmax(f.rewards[x]))


class FunctionClass:
    """An ordered, non-empty list of reward-difference functions.

    Member order is identity: version spaces are returned as sorted index
    arrays into ``members``.
    """

    def __init__(self, members: Sequence[RewardPreferenceFunction | np.ndarray]):
        members = [
            m if isinstance(m, RewardPreferenceFunction) else RewardPreferenceFunction(m)
            for m in members
        ]
        if not members:
            raise ValueError("function class must be non-empty")
        shape = members[0].rewards.shape
        if any(m.rewards.shape != shape for m in members):
            raise ValueError("all members must share context and action dimensions")
        self.members = tuple(members)
        self.tables = np.stack([m.rewards for m in members])
        self.tables.setflags(write=False)

    def __len__(self):
        return len(self.members)

    def __getitem__(self, i):
        return self.members[i]

    def __iter__(self):
        return iter(self.members)

    @property
    def num_contexts(self) -> int:
        return self.tables.shape[1]

    @property
    def num_actions(self) -> int:
        return self.tables.shape[2]

    @cached_property
    def greedy_arms(self) -> np.ndarray:
        """``greedy_arms[i, x]`` is the best arm of member ``i`` at ``x``."""
        return np.argmax(self.tables, axis=2)

    def values(self, x: int, a: int, b: int) -> np.ndarray:
        """Vector of ``f(x, a, b)`` over all members."""
        return self.tables[:, x, a] - self.tables[:, x, b]

    def index_of(self, f: RewardPreferenceFunction) -> int:
        for i, m in enumerate(self.members):
            if m == f:
                return i
        raise ValueError("function is not a member of the class")

    def __contains__(self, f) -> bool:
        try:
            self.index_of(f)
        except ValueError:
            return False
        return True

    # JSON document: {"num_contexts", "num_actions", "members": [[[r...]...]...]}
    def to_dict(self) -> dict:
        return {
            "num_contexts": self.num_contexts,
            "num_actions": self.num_actions,
            "members": [m.rewards.tolist() for m in self.members],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FunctionClass":
        fc = cls([np.asarray(m, dtype=float) for m in doc["members"]])
        if "num_contexts" in doc and doc["num_contexts"] != fc.num_contexts:
            raise ValueError("num_contexts does not match member tables")
        if "num_actions" in doc and doc["num_actions"] != fc.num_actions:
            raise ValueError("num_actions does not match member tables")
        return fc

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict())
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, source: str | Path) -> "FunctionClass":
        p = Path(source)
        text = p.read_text() if p.exists() else str(source)
        return cls.from_dict(json.loads(text))


class QueryRecord(NamedTuple):
    x: int
    a: int
    b: int
    prediction: float
    y: int


@dataclass
class QueryHistory:
    """Append-only log of queried rounds and the oracle's prediction at the time."""

    records: list[QueryRecord] = field(default_factory=list)

    def append(self, x: int, a: int, b: int, prediction: float, y: int) -> None:
        self.records.append(QueryRecord(int(x), int(a), int(b), float(prediction), int(y)))

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def squared_deviations(fclass: FunctionClass, history: QueryHistory) -> np.ndarray:
    """Per-member sum of ``(f(z_s) - f_s(z_s))^2`` over the stored queries."""
    total = np.zeros(len(fclass))
    for rec in history:
        total += (fclass.values(rec.x, rec.a, rec.b) - rec.prediction) ** 2
    return total


def version_space(fclass: FunctionClass, history: QueryHistory, beta: float) -> np.ndarray:
    """Sorted indices of members whose squared deviation is at most ``beta``."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    return np.flatnonzero(squared_deviations(fclass, history) <= beta)


def candidate_arms(fclass: FunctionClass, version: Iterable[int], x: int) -> np.ndarray:
    """Sorted set of greedy arms at ``x`` over the members in ``version``."""
    version = np.asarray(list(version) if not isinstance(version, np.ndarray) else version,
                         dtype=int)
    if version.size == 0:
        raise RealizabilityError("empty version space: realizability was violated")
    return np.unique(fclass.greedy_arms[version, x])


def width(fclass: FunctionClass, version: Iterable[int], arms: Iterable[int], x: int) -> float:
    """Largest disagreement ``f(x,a,b) - f'(x,a,b)`` over arm pairs and member pairs."""
    version = np.asarray(version, dtype=int)
    arms = np.asarray(arms, dtype=int)
    r = fclass.tables[version][:, x, :][:, arms]          # (members, arms)
    diffs = r[:, :, None] - r[:, None, :]                 # f(x, a, b) per member
    return float(np.max(diffs.max(axis=0) - diffs.min(axis=0)))


# --------------------------------------------------------------------------
# Eluder dimension
# --------------------------------------------------------------------------

def class_domain_values(fclass: FunctionClass) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    """Tabulate every member on the domain X x A x A.

    Returns the ``(members, points)`` value matrix and the point labels.
    """
    points = list(product(range(fclass.num_contexts),
                          range(fclass.num_actions),
                          range(fclass.num_actions)))
    vals = np.array([[m(x, a, b) for (x, a, b) in points] for m in fclass.members])
    return vals, points


def eluder_dimension_values(values: np.ndarray, epsilon: float) -> int:
    """Eluder dimension of a finite function class given as a value matrix.

    ``values[i, z]`` is member ``i`` evaluated at domain point ``z``. A point
    ``z`` is eps'-independent of a set ``S`` when some ordered pair
    ``(g, g')`` has ``sum_{s in S} (g(s) - g'(s))^2 <= eps'^2`` and
    ``g(z) - g'(z) > eps'``.

    For a fixed sequence the set of admissible eps' is a finite union of
    half-open intervals whose right ends are achievable differences
    ``g(z) - g'(z)``. It is therefore enough to test eps' just below each
    achievable difference ``R > epsilon``, where the conditions become
    ``sum < R^2`` and ``g(z) - g'(z) >= R``. For each such ``R`` the longest
    sequence depends only on the set already chosen, so a memoised search
    over bitmasks is exact.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    values = np.asarray(values, dtype=float)
    n_funcs, n_points = values.shape
    if n_funcs < 2 or n_points == 0:
        return 0
    ii, jj = np.where(~np.eye(n_funcs, dtype=bool))
    diffs = values[ii] - values[jj]                     # (pairs, points)
    sq = diffs ** 2
    levels = np.unique(diffs[diffs > epsilon])
    best = 0
    for R in levels:
        R2 = R * R
        reach = diffs >= R                                # (pairs, points)
        useful = reach.any(axis=0)
        if int(useful.sum()) <= best:
            continue
        memo: dict[int, int] = {}

        def longest(mask: int, sums: np.ndarray) -> int:
            if mask in memo:
                return memo[mask]
            open_pairs = sums < R2
            ok = (reach & open_pairs[:, None]).any(axis=0)
            out = 0
            for z in np.flatnonzero(ok):
                bit = 1 << int(z)
                if mask & bit:
                    continue
                out = max(out, 1 + longest(mask | bit, sums + sq[:, z]))
            memo[mask] = out
            return out

        best = max(best, longest(0, np.zeros(len(diffs))))
    return best


def eluder_dimension(fclass: FunctionClass, epsilon: float, cap: int = 12) -> int:
    """Exact eps-eluder dimension of ``fclass`` over its X x A x A domain.

    Raises :class:`EluderCapError` when the domain has more than ``cap``
    points, since the search is exhaustive.
    """
    n_points = fclass.num_contexts * fclass.num_actions ** 2
    if n_points > cap:
        raise EluderCapError(
            f"domain has {n_points} points, above the exhaustive-search cap {cap}"
        )
    vals, _ = class_domain_values(fclass)
    return eluder_dimension_values(vals, epsilon)
