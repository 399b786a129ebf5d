"""Open-loop state observer for the SEIR plant.

The observer is a copy of the plant dynamics run with the estimated rate
constants and fed the same vaccination input as the plant.  There is no
output-injection correction: estimation quality rests entirely on the
stability properties of the controlled estimate, which is what the analysis
module certifies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import PopulationState

__all__ = [
    "ObserverParams",
    "ObserverState",
    "validate_observer_params",
    "observer_derivative",
    "observation_error",
]


@dataclass(frozen=True)
class ObserverParams:
    """Estimated rate constants used by the observer.

    Same meaning as the plant parameters, except every rate is an estimate.
    ``mu_hat`` must be strictly positive because the vaccination laws divide
    by it.
    """

    mu_hat: float
    omega_hat: float
    beta_hat: float
    sigma_hat: float
    gamma_hat: float
    n_total: float

    @property
    def beta1_hat(self) -> float:
        """Estimated per-capita transmission coefficient β̂/N."""
        return self.beta_hat / self.n_total


@dataclass(frozen=True)
class ObserverState:
    """Estimated compartment populations (Ŝ, Ê, Î, R̂)."""

    s: float
    e: float
    i: float
    r: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.e, self.i, self.r], dtype=float)

    @staticmethod
    def from_array(x: np.ndarray) -> "ObserverState":
        return ObserverState(float(x[0]), float(x[1]), float(x[2]), float(x[3]))

    def total(self) -> float:
        return self.s + self.e + self.i + self.r


def validate_observer_params(q: ObserverParams) -> list[str]:
    """Validation report for observer parameters; empty list means valid."""
    out: list[str] = []
    for name in ("mu_hat", "omega_hat", "beta_hat", "sigma_hat", "gamma_hat", "n_total"):
        value = getattr(q, name)
        if not math.isfinite(value):
            out.append(f"{name} must be finite, got {value!r}")
        elif name == "mu_hat":
            if value <= 0.0:
                out.append(f"mu_hat must be > 0, got {value!r}")
        elif name == "n_total":
            if value <= 0.0:
                out.append(f"n_total must be > 0, got {value!r}")
        elif value < 0.0:
            out.append(f"{name} must be >= 0, got {value!r}")
    return out


def observer_derivative(q: ObserverParams, xh: ObserverState, v: float) -> np.ndarray:
    """Time derivative of the observer state.

    Structurally identical to the plant derivative with every rate replaced
    by its estimate; the shared total N and the shared input v couple the two
    systems.  The estimate sum therefore obeys the same conservation law
    (Ŝ+Ê+Î+R̂)' = μ̂(N - (Ŝ+Ê+Î+R̂)).
    """
    incidence = q.beta1_hat * xh.s * xh.i
    births = q.mu_hat * q.n_total
    ds = -q.mu_hat * xh.s + q.omega_hat * xh.r - incidence + births * (1.0 - v)
    de = incidence - (q.mu_hat + q.sigma_hat) * xh.e
    di = -(q.mu_hat + q.gamma_hat) * xh.i + q.sigma_hat * xh.e
    dr = -(q.mu_hat + q.omega_hat) * xh.r + q.gamma_hat * xh.i + births * v
    return np.array([ds, de, di, dr])


def observation_error(x: PopulationState, xh: ObserverState) -> tuple[np.ndarray, float]:
    """Estimation error x - x̂ and its Euclidean norm."""
    err = x.as_array() - xh.as_array()
    return err, float(np.sqrt(np.dot(err, err)))
