"""Online regression oracle over a finite preference-function class.

Exponentially weighted average forecaster: every member keeps a log-weight
``-eta * (cumulative loss)`` and the prediction is the weight-averaged member
value. The prediction need not be a member of the class.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

from .funcspace import FunctionClass
from .links import LinkKind, LinkSpec, _check_label, loss_value

# Exp-concavity constants of the two losses on margins in [-1, 1].
# Square: (d - y)^2 / 4 is 1/2-exp-concave. Logistic: log(1 + e^{-yd}) is
# eta-exp-concave iff eta <= exp(yd) for all |yd| <= 1, i.e. eta <= 1/e.
DEFAULT_ETA = {LinkKind.SQUARE: 0.5, LinkKind.LOGISTIC: math.exp(-1.0)}


def upsilon_bound(class_size: int, link: LinkSpec, constant: float | None = None) -> float:
    """Regret bound ``c * ln|F|`` of the averaged forecaster.

    ``constant`` defaults to ``1 / eta`` for the link's default learning rate
    (2 for square, e for logistic).
    """
    if class_size < 1:
        raise ValueError("class_size must be at least 1")
    c = 1.0 / DEFAULT_ETA[link.kind] if constant is None else float(constant)
    return c * math.log(class_size)


class OracleState:
    """Mutable state of the exponential-weights regression oracle."""

    def __init__(self, fclass: FunctionClass, link: LinkSpec, eta: float | None = None):
        self.fclass = fclass
        self.link = link
        self.eta = DEFAULT_ETA[link.kind] if eta is None else float(eta)
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        self.log_weights = np.zeros(len(fclass))
        self.cumulative_loss = 0.0
        self.per_member_loss = np.zeros(len(fclass))
        self.num_updates = 0
        self._weights = np.full(len(fclass), 1.0 / len(fclass))

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    def predict(self, z) -> float:
        x, a, b = z
        v = float(self._weights @ self.fclass.values(x, a, b))
        return min(1.0, max(-1.0, v))

    def mean_rewards(self, x: int) -> np.ndarray:
        """Weight-averaged reward row at ``x``; its differences equal ``predict``."""
        return self._weights @ self.fclass.tables[:, x, :]

    def update(self, z, y: int) -> None:
        _check_label(y)
        x, a, b = z
        pred = self.predict(z)
        member_loss = loss_value(self.link, self.fclass.values(x, a, b), y)
        self.cumulative_loss += loss_value(self.link, pred, y)
        self.per_member_loss += member_loss
        self.log_weights -= self.eta * member_loss
        self._weights = np.exp(self.log_weights - logsumexp(self.log_weights))
        self.num_updates += 1

    def regret(self) -> float:
        return self.cumulative_loss - float(self.per_member_loss.min())

    def dump_weights(self) -> list[float]:
        return self._weights.tolist()


def oracle_regret(state: OracleState) -> float:
    """Cumulative loss minus the best member's cumulative loss."""
    return state.regret()
