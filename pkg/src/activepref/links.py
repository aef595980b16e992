"""Link functions mapping a preference margin to a comparison probability.

Two links are supported:

* ``square``:   phi(d) = (d + 1) / 2,          Phi(d) = d^2/4 + d/2 + 1/4
* ``logistic``: phi(d) = 1 / (1 + exp(-d)),    Phi(d) = log(1 + exp(d))

``phi`` is the derivative of the convex potential ``Phi`` and the loss used by
the regression oracle is ``Phi(d) - d (y + 1) / 2`` (up to a constant that does
not depend on ``d``).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

DOMAIN_TOL = 1e-9


class DomainError(ValueError):
    """Raised when a margin or label falls outside its domain."""


class LinkKind(str, Enum):
    SQUARE = "square"
    LOGISTIC = "logistic"


def _sigmoid(d):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(d, dtype=float)))


@dataclass(frozen=True)
class LinkSpec:
    """A link function together with its strong-convexity constant.

    Attributes
    ----------
    kind : LinkKind
        Which link.
    alpha : float
        Strong-convexity constant of the potential on [-1, 1]. For ``square``
        this is 1/4; for ``logistic`` it is ``phi(1) * (1 - phi(1))``, the
        minimum of the potential's second derivative on the interval.
    """

    kind: LinkKind
    alpha: float

    @property
    def name(self) -> str:
        return self.kind.value


SQUARE = LinkSpec(LinkKind.SQUARE, 0.25)
LOGISTIC = LinkSpec(
    LinkKind.LOGISTIC, float(_sigmoid(1.0) * (1.0 - _sigmoid(1.0)))
)


def get_link(name: str | LinkSpec) -> LinkSpec:
    """Look up a link by its config name (``"square"`` or ``"logistic"``)."""
    if isinstance(name, LinkSpec):
        return name
    try:
        kind = LinkKind(str(name).lower())
    except ValueError:
        raise DomainError(f"unknown link {name!r}; expected 'square' or 'logistic'")
    return SQUARE if kind is LinkKind.SQUARE else LOGISTIC


def _check_margin(d):
    d = np.asarray(d, dtype=float)
    if np.any(np.abs(d) > 1.0 + DOMAIN_TOL) or np.any(np.isnan(d)):
        raise DomainError(f"margin outside [-1, 1]: {d}")
    return d


def _check_label(y):
    y = np.asarray(y)
    if not np.all((y == 1) | (y == -1)):
        raise DomainError(f"label must be -1 or +1, got {y}")
    return y.astype(float)


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def link_value(spec: LinkSpec, d):
    """Return phi(d), the probability that the first action is preferred."""
    d = _check_margin(d)
    if spec.kind is LinkKind.SQUARE:
        return _out((d + 1.0) / 2.0)
    return _out(_sigmoid(d))


def potential(spec: LinkSpec, d):
    """Return Phi(d), the convex potential whose derivative is the link."""
    d = _check_margin(d)
    if spec.kind is LinkKind.SQUARE:
        return _out(d * d / 4.0 + d / 2.0 + 0.25)
    # logaddexp(0, d) = log(1 + e^d) without overflow
    return _out(np.logaddexp(0.0, d))


def loss_value(spec: LinkSpec, d, y):
    """Oracle loss of predicting margin ``d`` when label ``y`` is observed.

    Square returns ``(d - y)^2 / 4``; logistic returns ``log(1 + exp(-y d))``.
    Both broadcast over array inputs.
    """
    d = _check_margin(d)
    y = _check_label(y)
    if spec.kind is LinkKind.SQUARE:
        return _out((d - y) ** 2 / 4.0)
    return _out(np.logaddexp(0.0, -y * d))


def sample_feedback(rng: np.random.Generator, spec: LinkSpec, d: float) -> int:
    """Draw a comparison label: +1 with probability phi(d), else -1."""
    p = link_value(spec, d)
    return 1 if rng.random() < p else -1
