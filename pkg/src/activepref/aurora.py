"""Active-query contextual dueling bandit learner.

Per round the learner forms a version space of members consistent with the
oracle's past predictions, collects the greedy arms of those members, and
queries the expert only if more than one candidate arm remains. While the
accumulated width of queried rounds stays under ``sqrt(A T / beta)`` the pair
is drawn uniformly from the candidates; afterwards it is drawn from an
inverse-gap-weighted distribution built from the oracle's mean rewards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .funcspace import (
    FunctionClass,
    QueryHistory,
    RealizabilityError,
    RewardPreferenceFunction,
)
from .links import LinkSpec
from .oracle import OracleState, upsilon_bound

TOL = 1e-9


class IGWInfeasibleError(ValueError):
    """A candidate arm has zero probability, so the IGW constraint is undefined."""

    def __init__(self, arm: int):
        super().__init__(f"candidate arm {arm} has zero probability")
        self.arm = arm


def beta_and_gamma(upsilon: float, alpha: float, delta: float, T: float, A: int):
    """Confidence radius and IGW rate.

    ``beta = 4 upsilon / alpha + (16 + 24 alpha) / alpha^2 * ln(4 ln(T) / delta)``
    and ``gamma = sqrt(A T / beta)``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if T < 3:
        raise ValueError("T must be at least 3")
    beta = 4.0 * upsilon / alpha + (16.0 + 24.0 * alpha) / alpha ** 2 * math.log(
        4.0 * math.log(T) / delta
    )
    return beta, math.sqrt(A * T / beta)


def igw_probabilities(rewards: np.ndarray, gamma: float) -> np.ndarray:
    """Inverse-gap-weighted distribution for a single reward row.

    Every non-greedy arm gets ``1 / (A + gamma * gap)``; the greedy arm (lowest
    index among maximisers) takes the remaining mass, which is at least 1/A.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    r = np.asarray(rewards, dtype=float)
    A = r.size
    top = int(np.argmax(r))
    p = 1.0 / (A + gamma * (r[top] - r))
    p[top] = 0.0
    p[top] = 1.0 - p.sum()
    return p


def igw_distribution(f_hat: RewardPreferenceFunction, x: int, gamma: float, A: int | None = None):
    """IGW distribution of a reward-difference predictor at context ``x``."""
    if A is not None and A != f_hat.num_actions:
        raise ValueError("A does not match the predictor's action count")
    return igw_probabilities(f_hat.rewards[x], gamma)


def igw_constraint_check(p, f_hat, x: int, gamma: float, A: int, arms) -> bool:
    """Check ``sum_b f(x,a,b) p(b) + 2 / (gamma p(a)) <= 5 A / gamma`` on ``arms``.

    ``f_hat`` is a :class:`RewardPreferenceFunction`, a reward table, or a
    single reward row (in which case ``x`` is ignored).
    """
    p = np.asarray(p, dtype=float)
    if isinstance(f_hat, RewardPreferenceFunction):
        r = f_hat.rewards[x]
    else:
        r = np.asarray(f_hat, dtype=float)
        r = r[x] if r.ndim == 2 else r
    expected_r = float(p @ r)
    for a in arms:
        if p[a] <= 0.0:
            raise IGWInfeasibleError(int(a))
        lhs = (r[a] - expected_r) + 2.0 / (gamma * p[a])
        if lhs > 5.0 * A / gamma + TOL:
            return False
    return True


@dataclass(frozen=True)
class AuroraParams:
    """Horizon, action count and confidence radius of one learner."""

    T: int
    A: int
    beta: float
    delta: float = 0.05

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.A < 2:
            raise ValueError("need at least two actions")

    @property
    def gamma(self) -> float:
        return math.sqrt(self.A * self.T / self.beta)

    @property
    def lambda_threshold(self) -> float:
        return math.sqrt(self.A * self.T / self.beta)

    @classmethod
    def for_class(cls, T: int, fclass: FunctionClass, link: LinkSpec, delta: float,
                  oracle_constant: float | None = None) -> "AuroraParams":
        """Parameters with beta set from the oracle's regret bound.

        Horizons below 3 use ``T = 3`` inside the logarithm.
        """
        ups = upsilon_bound(len(fclass), link, oracle_constant)
        beta, _ = beta_and_gamma(ups, link.alpha, delta, max(T, 3), fclass.num_actions)
        return cls(T=max(T, 1), A=fclass.num_actions, beta=beta, delta=delta)


@dataclass
class RoundDecision:
    x: int
    a: int
    b: int
    queried: bool
    lam: int
    width: float
    candidate_arms: np.ndarray
    version: np.ndarray
    distribution: np.ndarray | None = None
    prediction: float | None = None

    @property
    def Z(self) -> int:
        return int(self.queried)


@dataclass
class _Branch:
    version: np.ndarray
    arms: np.ndarray
    queried: bool
    width: float = 0.0
    lam: int = 0
    distribution: np.ndarray | None = None


class Aurora:
    """One bandit learner (the state the algorithm carries between rounds).

    Parameters
    ----------
    fclass : FunctionClass
        Finite class assumed to contain the true preference function.
    params : AuroraParams
        Horizon, action count and confidence radius.
    link : LinkSpec
        Link used by the oracle's loss.
    rng : numpy.random.Generator
        Source of the learner's own sampling randomness.
    igw_support : {"full", "candidates"}
        Whether the inverse-gap-weighted distribution spans every action or
        only the current candidate arms.
    """

    def __init__(self, fclass: FunctionClass, params: AuroraParams, link: LinkSpec,
                 rng: np.random.Generator, eta: float | None = None,
                 igw_support: str = "full"):
        if params.A != fclass.num_actions:
            raise ValueError("params.A does not match the class")
        if igw_support not in ("full", "candidates"):
            raise ValueError("igw_support must be 'full' or 'candidates'")
        self.fclass = fclass
        self.params = params
        self.link = link
        self.rng = rng
        self.igw_support = igw_support
        self.oracle = OracleState(fclass, link, eta)
        self.history = QueryHistory()
        self.zw_sum = 0.0
        self.round = 0
        # running per-member sum of (f(z_s) - f_s(z_s))^2, kept in history order
        self._sq_dev = np.zeros(len(fclass))

    @property
    def squared_deviation(self) -> np.ndarray:
        return self._sq_dev

    def version(self) -> np.ndarray:
        return np.flatnonzero(self._sq_dev <= self.params.beta + TOL)

    def _branch(self, x: int) -> _Branch:
        version = self.version()
        if version.size == 0:
            raise RealizabilityError(f"empty version space at round {self.round}")
        arms = np.unique(self.fclass.greedy_arms[version, x])
        if arms.size == 1:
            return _Branch(version, arms, queried=False)
        r = self.fclass.tables[version][:, x, :][:, arms]
        diffs = r[:, :, None] - r[:, None, :]
        w = float(np.max(diffs.max(axis=0) - diffs.min(axis=0)))
        lam = int(self.zw_sum >= self.params.lambda_threshold - TOL)
        A = self.params.A
        if lam == 0:
            p = np.zeros(A)
            p[arms] = 1.0 / arms.size
        elif self.igw_support == "full":
            p = igw_probabilities(self.oracle.mean_rewards(x), self.params.gamma)
        else:
            p = np.zeros(A)
            p[arms] = igw_probabilities(self.oracle.mean_rewards(x)[arms], self.params.gamma)
        return _Branch(version, arms, True, w, lam, p)

    def act(self, x: int) -> RoundDecision:
        """Choose the action pair for context ``x``; only the rng is advanced."""
        if self.round >= self.params.T:
            raise RuntimeError("horizon exhausted")
        br = self._branch(x)
        if not br.queried:
            a = b = int(br.arms[0])
            return RoundDecision(x, a, b, False, 0, 0.0, br.arms, br.version)
        a, b = (int(v) for v in self.rng.choice(self.params.A, size=2, p=br.distribution))
        pred = self.oracle.predict((x, a, b))
        return RoundDecision(x, a, b, True, br.lam, br.width, br.arms, br.version,
                             br.distribution, pred)

    def policy_distribution(self, x: int) -> np.ndarray:
        """Distribution of one uniformly picked action of the pair ``act`` would draw."""
        br = self._branch(x)
        if not br.queried:
            q = np.zeros(self.params.A)
            q[br.arms[0]] = 1.0
            return q
        # a, b drawn i.i.d. from p, then one of them uniformly: marginal is p
        return br.distribution.copy()

    def observe(self, x: int, decision: RoundDecision, y: int) -> None:
        """Feed the expert's label for a queried round to the oracle."""
        if not decision.queried:
            raise ValueError("observe called on an unqueried round; use advance()")
        z = (x, decision.a, decision.b)
        pred = decision.prediction if decision.prediction is not None else self.oracle.predict(z)
        self.history.append(x, decision.a, decision.b, pred, y)
        self._sq_dev += (self.fclass.values(*z) - pred) ** 2
        self.zw_sum += decision.width
        self.oracle.update(z, y)
        self.round += 1

    def advance(self) -> None:
        """Close an unqueried round; the oracle is left untouched."""
        self.round += 1

    def step(self, x: int, label_fn) -> RoundDecision:
        """Run one full round; ``label_fn(x, a, b)`` supplies the expert's label."""
        d = self.act(x)
        if d.queried:
            self.observe(x, d, label_fn(x, d.a, d.b))
        else:
            self.advance()
        return d


AuroraState = Aurora


@dataclass
class InvariantReport:
    """Per-round lemma checks against a planted true function."""

    width_domination: int = 0
    gap_implies_width: int = 0
    igw_inequality: int = 0
    igw_feasibility: int = 0
    lambda_monotone: int = 0
    gating: int = 0
    checked_rounds: int = 0
    feasibility_checked: int = 0
    igw_rounds: int = 0
    violations: list = field(default_factory=list)

    ABORTING = ("width_domination", "gap_implies_width", "igw_inequality",
                "lambda_monotone", "gating")

    def as_dict(self) -> dict:
        keys = ("width_domination", "gap_implies_width", "igw_inequality",
                "igw_feasibility", "lambda_monotone", "gating", "checked_rounds",
                "feasibility_checked", "igw_rounds")
        return {k: getattr(self, k) for k in keys}


class InvariantChecker:
    """Checks the per-round guarantees of the learner against ground truth.

    ``truth`` is the planted reward table and ``gap`` the instance's uniform
    gap. Feasibility of the closed-form IGW distribution for the convex
    program is counted but does not count as a hard violation: the closed form
    is only guaranteed to satisfy those constraints for ``gamma`` close to
    ``2A``.
    """

    def __init__(self, truth_index: int, fclass: FunctionClass, gap: float):
        self.truth_index = truth_index
        self.truth = fclass.tables[truth_index]
        self.gap = gap
        self.report = InvariantReport()
        self._last_lam = 0
        self._realizable_so_far = True

    def check(self, state: Aurora, d: RoundDecision) -> list[str]:
        rep = self.report
        rep.checked_rounds += 1
        x = d.x
        r_star = self.truth[x]
        best = int(np.argmax(r_star))
        in_version = bool(np.any(d.version == self.truth_index))
        self._realizable_so_far &= in_version
        out = []
        if d.queried:
            if in_version:
                regrets = r_star[best] - r_star[d.candidate_arms]
                if np.any(regrets > d.width + TOL):
                    rep.width_domination += 1
                    out.append("width_domination")
                if self.gap > 0 and d.width < self.gap - TOL:
                    rep.gap_implies_width += 1
                    out.append("gap_implies_width")
            if d.lam < self._last_lam:
                rep.lambda_monotone += 1
                out.append("lambda_monotone")
            self._last_lam = max(self._last_lam, d.lam)
            if d.lam == 1:
                rep.igw_rounds += 1
                p = d.distribution
                gamma, A = state.params.gamma, state.params.A
                lhs = float(p @ (r_star[best] - r_star))
                r_hat = state.oracle.mean_rewards(x)
                err = (r_hat[:, None] - r_hat[None, :]) - (r_star[:, None] - r_star[None, :])
                rhs = gamma * float(p @ (err ** 2) @ p) + A / gamma
                if lhs > rhs + TOL:
                    rep.igw_inequality += 1
                    out.append("igw_inequality")
                if gamma >= 2 * A:
                    rep.feasibility_checked += 1
                    if not _feasible(p, r_hat, gamma, A, d.candidate_arms):
                        rep.igw_feasibility += 1
        elif self._realizable_so_far and d.a != best:
            rep.gating += 1
            out.append("gating")
        hard = [v for v in out if v in InvariantReport.ABORTING]
        for v in hard:
            rep.violations.append((state.round, v))
        return hard


def _feasible(p, r_hat, gamma, A, arms) -> bool:
    try:
        return igw_constraint_check(p, r_hat, 0, gamma, A, arms)
    except IGWInfeasibleError:
        return False
