"""Closed-form leading-order solutions for a ground-state start.

These are perturbative in Delta and serve as reference curves.  Imaginary
coherence parts are not available from the perturbative method and are
deliberately absent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .models import TWO_LEVEL, V_MODEL, Model, partition_functions

SQRT2 = math.sqrt(2.0)


def two_level_tau(delta: float, gamma: float) -> tuple[float, float]:
    return 4.0 * gamma / delta**2, 1.0 / (2.0 * gamma)


def v_model_partition(nu: float, beta: float) -> tuple[float, float, float]:
    b = math.exp(-beta * nu)
    return 1.0 + 2.0 * b, 1.0 + b, b


def v_model_tau(nu: float, delta: float, gamma: float, beta: float) -> tuple[float, float]:
    z, zi, _ = v_model_partition(nu, beta)
    return (zi / z) * gamma / delta**2, 1.0 / (zi * gamma)


def two_level_eigenbasis(t, delta: float, gamma: float) -> dict[str, np.ndarray]:
    t = np.asarray(t, dtype=float)
    slow = np.exp(-(delta**2 / (4.0 * gamma)) * t)
    fast = np.exp(-2.0 * gamma * t)
    return {"rho_11": 0.5 - 0.25 * (slow + fast), "rho_10_re": 0.25 * (slow - fast)}


def two_level_alternate(t, delta: float, gamma: float) -> dict[str, np.ndarray]:
    """Decoherence-basis populations and coherence; rho_pm is <psi_+|rho|psi_->."""
    t = np.asarray(t, dtype=float)
    slow = np.exp(-(delta**2 / (4.0 * gamma)) * t)
    fast = np.exp(-2.0 * gamma * t)
    rho_mm = 0.5 - slow / (2.0 * SQRT2)
    return {"rho_mm": rho_mm, "rho_pp": 1.0 - rho_mm, "rho_pm_re": -fast / (2.0 * SQRT2)}


def sigma_z_autocorrelation(t, delta: float, gamma: float):
    return np.exp(-(delta**2 / (4.0 * gamma)) * np.asarray(t, dtype=float))


def v_model_eigenbasis(t, nu: float, delta: float, gamma: float, beta: float) -> dict[str, np.ndarray]:
    """Ground population and Re rho_32 for the V model started in |1>.

    The coherence prefactor is e^{-beta nu} / (2 Z_I): in the intermediate
    state rho_++ = e^{-beta nu}/Z_I and rho_32 = rho_++/2.
    """
    t = np.asarray(t, dtype=float)
    z, zi, b = v_model_partition(nu, beta)
    tau1, tau2 = v_model_tau(nu, delta, gamma, beta)
    slow, fast = np.exp(-t / tau1), np.exp(-t / tau2)
    rho11 = 1.0 / z + (b / zi) * (slow / z + fast)
    excited = 0.5 * (1.0 - rho11)
    return {
        "rho_11": rho11,
        "rho_22": excited,
        "rho_33": excited.copy(),
        "rho_32_re": (b / (2.0 * zi)) * (slow - fast),
    }


def v_model_pm(t, nu: float, delta: float, gamma: float, beta: float) -> dict[str, np.ndarray]:
    t = np.asarray(t, dtype=float)
    z, zi, b = v_model_partition(nu, beta)
    tau1, tau2 = v_model_tau(nu, delta, gamma, beta)
    slow, fast = np.exp(-t / tau1), np.exp(-t / tau2)
    rho_pp = b / z + (b / zi) * (b * slow / z - fast)
    rho_mm = (b / z) * (1.0 - slow)
    return {"rho_11": 1.0 - rho_pp - rho_mm, "rho_pp": rho_pp, "rho_mm": rho_mm}


@dataclass(frozen=True)
class AnalyticSolution:
    model_label: str
    basis: str
    observables: dict[str, Callable]
    tau1: float
    tau2: float
    validity_note: str = "leading order in Delta; ground-state initial condition"

    def evaluate(self, grid) -> dict[str, np.ndarray]:
        grid = np.asarray(grid, dtype=float)
        return {name: np.asarray(f(grid), dtype=float) for name, f in self.observables.items()}


def _pick(func, key, *args):
    return lambda t: func(t, *args)[key]


def solution_for(model: Model, basis: str = "eigen") -> AnalyticSolution | None:
    """Reference solution matching ``model`` in the named basis, or None if none is known."""
    p = model.params
    if model.label == TWO_LEVEL:
        tau1, tau2 = two_level_tau(p.delta, p.gamma)
        funcs = {"eigen": two_level_eigenbasis, "decoherence": two_level_alternate}
        args = (p.delta, p.gamma)
    elif model.label == V_MODEL:
        tau1, tau2 = v_model_tau(p.nu, p.delta, p.gamma, p.beta)
        funcs = {"eigen": v_model_eigenbasis, "pm": v_model_pm}
        args = (p.nu, p.delta, p.gamma, p.beta)
    else:
        return None
    func = funcs.get(basis)
    if func is None:
        return None
    keys = func(0.0, *args).keys()
    obs = {k: _pick(func, k, *args) for k in keys}
    return AnalyticSolution(model.label, basis, obs, tau1, tau2)


def intermediate_populations(model: Model) -> tuple[float, float]:
    """Two-level Boltzmann plateau (rho_11, rho_++) reached for tau2 << t << tau1."""
    _, zi = partition_functions(model.params)
    return 1.0 / zi, model.params.boltzmann / zi
