"""SEIR plant model with demographic turnover and a vaccination input.

The population splits into susceptible (S), exposed (E), infectious (I) and
recovered (R) compartments of constant total size N.  Transmission follows a
true mass-action law β·S·I/N, newborns arrive susceptible at rate μ·N unless
vaccinated at birth, and recovered individuals lose immunity at rate ω.  The
vaccination input v rescales the newborn flow: a fraction v·μ·N enters R
directly instead of S.

All rates are per day; populations are real-valued (fractional individuals
are fine for the mean-field model).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EpidemicParams",
    "PopulationState",
    "validate_params",
    "seir_derivative",
    "forced_equilibrium",
]


@dataclass(frozen=True)
class EpidemicParams:
    """Rate constants of the SEIR plant.

    Attributes:
        mu: birth rate, which equals the death rate so N stays constant (1/day).
        omega: immunity loss rate R -> S (1/day).
        beta: transmission rate of the mass-action incidence (1/day).
        sigma: latent progression rate E -> I (1/day).
        gamma: recovery rate I -> R (1/day).
        n_total: constant total population.
    """

    mu: float
    omega: float
    beta: float
    sigma: float
    gamma: float
    n_total: float

    @property
    def beta1(self) -> float:
        """Per-capita transmission coefficient β/N."""
        return self.beta / self.n_total


@dataclass(frozen=True)
class PopulationState:
    """Compartment populations (S, E, I, R)."""

    s: float
    e: float
    i: float
    r: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.e, self.i, self.r], dtype=float)

    @staticmethod
    def from_array(x: np.ndarray) -> "PopulationState":
        return PopulationState(float(x[0]), float(x[1]), float(x[2]), float(x[3]))

    def total(self) -> float:
        return self.s + self.e + self.i + self.r


def validate_params(p: EpidemicParams) -> list[str]:
    """Check parameter sanity and return a list of violation messages.

    An empty list means the parameter set is valid: all rates finite and
    nonnegative, and the total population strictly positive.
    """
    out: list[str] = []
    for name in ("mu", "omega", "beta", "sigma", "gamma", "n_total"):
        value = getattr(p, name)
        if not math.isfinite(value):
            out.append(f"{name} must be finite, got {value!r}")
        elif name == "n_total":
            if value <= 0.0:
                out.append(f"n_total must be > 0, got {value!r}")
        elif value < 0.0:
            out.append(f"{name} must be >= 0, got {value!r}")
    return out


def seir_derivative(p: EpidemicParams, x: PopulationState, v: float) -> np.ndarray:
    """Time derivative of the plant state under vaccination input v.

    The flows are
        S' = -μS + ωR - βSI/N + μN(1-v)
        E' =  βSI/N - (μ+σ)E
        I' = -(μ+γ)I + σE
        R' = -(μ+ω)R + γI + μNv
    so the compartment sum obeys (S+E+I+R)' = μ(N - (S+E+I+R)): the total
    population is conserved once it equals N, for every input v.  The input
    is used exactly as given; it is the caller's business whether v stays in
    [0, 1].

    Args:
        p: plant rate constants.
        x: current compartment populations.
        v: vaccination fraction applied to the newborn flow.

    Returns:
        Array (S', E', I', R') in individuals per day.
    """
    incidence = p.beta1 * x.s * x.i
    births = p.mu * p.n_total
    ds = -p.mu * x.s + p.omega * x.r - incidence + births * (1.0 - v)
    de = incidence - (p.mu + p.sigma) * x.e
    di = -(p.mu + p.gamma) * x.i + p.sigma * x.e
    dr = -(p.mu + p.omega) * x.r + p.gamma * x.i + births * v
    return np.array([ds, de, di, dr])


def forced_equilibrium(p: EpidemicParams, v_const: float) -> PopulationState:
    """Disease-free equilibrium under a constant vaccination fraction.

    With E = I = 0 the dynamics reduce to the S and R compartments; setting
    both derivatives to zero gives R* = μNv/(μ+ω) and S* = N - R*.

    Raises:
        ValueError: if μ + ω = 0 while v_const is nonzero (the recovered
            compartment then has no outflow to balance the vaccination
            inflow, so no equilibrium exists).
    """
    if p.mu + p.omega == 0.0:
        if v_const != 0.0:
            raise ValueError(
                "no disease-free equilibrium: mu + omega = 0 with nonzero vaccination"
            )
        return PopulationState(p.n_total, 0.0, 0.0, 0.0)
    r_eq = p.mu * p.n_total * v_const / (p.mu + p.omega)
    return PopulationState(p.n_total - r_eq, 0.0, 0.0, r_eq)
