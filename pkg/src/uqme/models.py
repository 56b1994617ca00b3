"""The two concrete systems: a near-degenerate spin and the V model.

Units: hbar = k_B = 1.  Rates come from an Ohmic bosonic bath,
J(w) = a*w, evaluated at the averaged transition frequency.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .numkit import ComplexMatrix, adjoint

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

TWO_LEVEL = "two_level"
V_MODEL = "v_model"


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class BathSpec:
    coupling_a: float
    temperature: float
    kind: str = "ohmic"

    def __post_init__(self):
        if self.kind != "ohmic":
            raise ModelError(f"unsupported bath kind {self.kind!r}; only 'ohmic' is built")
        if not self.coupling_a > 0:
            raise ModelError(f"coupling_a must be positive, got {self.coupling_a}")
        if not self.temperature > 0:
            raise ModelError(f"temperature must be positive, got {self.temperature}")

    @property
    def beta(self) -> float:
        return 1.0 / self.temperature


@dataclass(frozen=True)
class ModelParams:
    delta: float
    temperature: float
    coupling_a: float
    gamma: float
    nu: float | None = None

    @property
    def beta(self) -> float:
        return 1.0 / self.temperature

    @property
    def boltzmann(self) -> float:
        """exp(-beta*nu) for the V model, 1 otherwise."""
        return math.exp(-self.nu / self.temperature) if self.nu is not None else 1.0


@dataclass(frozen=True, eq=False)
class Model:
    """Hamiltonian, collapse operators and parameters of one system.

    ``hamiltonian_delta`` is the part of ``hamiltonian`` that is linear in the
    small splitting Delta; the remainder is the unperturbed Hamiltonian used by
    the perturbative slow-eigenvalue scheme.  ``basis_labels`` name the basis
    states in storage order and ``basis`` names the representation.
    """

    label: str
    hamiltonian: ComplexMatrix
    collapse_ops: tuple[ComplexMatrix, ...]
    params: ModelParams
    hamiltonian_delta: ComplexMatrix
    basis_labels: tuple[str, ...]
    basis: str = "eigen"
    channel_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        h = np.asarray(self.hamiltonian)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ModelError(f"hamiltonian must be square, got {h.shape}")
        if np.max(np.abs(h - adjoint(h)), initial=0.0) > 1e-12 * max(1.0, np.abs(h).max()):
            raise ModelError("hamiltonian is not Hermitian")
        for op in self.collapse_ops:
            if np.shape(op) != h.shape or not np.all(np.isfinite(op)):
                raise ModelError("collapse operators must be finite and match the Hamiltonian shape")
        if len(self.basis_labels) != h.shape[0]:
            raise ModelError("one basis label per state is required")
        if self.params.gamma < 0:
            raise ModelError("rates must be non-negative")

    @property
    def dimension(self) -> int:
        return self.hamiltonian.shape[0]

    def with_operators(self, hamiltonian, collapse_ops, hamiltonian_delta, basis, basis_labels) -> "Model":
        return replace(
            self,
            hamiltonian=hamiltonian,
            collapse_ops=tuple(collapse_ops),
            hamiltonian_delta=hamiltonian_delta,
            basis=basis,
            basis_labels=tuple(basis_labels),
        )

    def to_config(self) -> dict:
        p = self.params
        cfg = {"kind": self.label, "delta": p.delta, "temperature": p.temperature, "coupling": p.coupling_a}
        if p.nu is not None:
            cfg["nu"] = p.nu
        return cfg


def bose_einstein(omega: float, beta: float) -> float:
    """Bose-Einstein occupation ``1/(exp(beta*omega) - 1)``."""
    if omega == 0:
        raise ValueError(
            "n(omega) diverges at omega = 0; use the analytic Ohmic limit "
            "lim n(w)*a*w = a*T instead"
        )
    with np.errstate(over="ignore"):
        return float(1.0 / np.expm1(beta * omega))


def ohmic_zero_frequency_rate(bath: BathSpec) -> float:
    # lim_{w->0} n(w) a w = a T, taken analytically
    return bath.coupling_a * bath.temperature


def ohmic_emission_rate(omega: float, bath: BathSpec) -> float:
    """Downward rate a*w*(n(w) + 1) at transition frequency ``omega``."""
    return bath.coupling_a * omega * (bose_einstein(omega, bath.beta) + 1.0)


def build_two_level(delta: float, bath: BathSpec) -> Model:
    """Nearly degenerate spin with coupling S = (sigma_x + sigma_z)/sqrt(2)."""
    if not delta > 0:
        raise ModelError(f"delta must be positive, got {delta}")
    if delta / bath.temperature > 0.1:
        warnings.warn(
            f"delta/T = {delta / bath.temperature:.3g} > 0.1: the near-degenerate "
            "rate approximation is poor (generator is still valid GKLS)",
            stacklevel=2,
        )
    gamma = ohmic_zero_frequency_rate(bath)
    h = 0.5 * delta * np.diag([-1.0, 1.0]).astype(complex)
    s = (SIGMA_X + SIGMA_Z) / math.sqrt(2.0)
    params = ModelParams(delta=delta, temperature=bath.temperature, coupling_a=bath.coupling_a, gamma=gamma)
    return Model(
        label=TWO_LEVEL,
        hamiltonian=h,
        collapse_ops=(math.sqrt(gamma) * s,),
        params=params,
        hamiltonian_delta=h.copy(),
        basis_labels=("0", "1"),
        channel_names=("L",),
    )


def build_v_model(nu: float, delta: float, bath: BathSpec) -> Model:
    """Ground state |1> plus near-degenerate excited pair |2>, |3>."""
    if not delta > 0:
        raise ModelError(f"delta must be positive, got {delta}")
    if not delta < nu:
        raise ModelError(f"delta ({delta}) must be smaller than nu ({nu}): near-degeneracy is required")
    gamma = ohmic_emission_rate(nu, bath)
    boltz = math.exp(-bath.beta * nu)

    h = np.diag([0.0, nu - delta, nu]).astype(complex)
    # centred split: unperturbed excited pair at nu - delta/2
    h_delta = 0.5 * delta * np.diag([0.0, -1.0, 1.0]).astype(complex)

    down = np.zeros((3, 3), dtype=complex)
    down[0, 1] = down[0, 2] = 1.0
    l_down = math.sqrt(gamma / 2.0) * down
    l_up = math.sqrt(boltz * gamma / 2.0) * down.T

    params = ModelParams(delta=delta, temperature=bath.temperature, coupling_a=bath.coupling_a, gamma=gamma, nu=nu)
    return Model(
        label=V_MODEL,
        hamiltonian=h,
        collapse_ops=(l_down, l_up),
        params=params,
        hamiltonian_delta=h_delta,
        basis_labels=("1", "2", "3"),
        channel_names=("down", "up"),
    )


def partition_functions(params: ModelParams) -> tuple[float, float]:
    """(Z, Z_I) = (1 + 2 e^{-beta nu}, 1 + e^{-beta nu}) to zeroth order in beta*Delta."""
    b = params.boltzmann
    return 1.0 + 2.0 * b, 1.0 + b


def thermal_state(model: Model) -> ComplexMatrix:
    """Gibbs state with the order-Delta splittings neglected, in the energy basis."""
    if model.label == TWO_LEVEL:
        return 0.5 * IDENTITY_2
    if model.label == V_MODEL:
        z, _ = partition_functions(model.params)
        b = model.params.boltzmann
        return np.diag([1.0, b, b]).astype(complex) / z
    raise ModelError(f"unknown model {model.label!r}")


def ground_state(model: Model) -> ComplexMatrix:
    """Projector on the lowest eigenvector of the model Hamiltonian (in its current basis)."""
    w, v = np.linalg.eigh(model.hamiltonian)
    psi = v[:, 0]
    return np.outer(psi, psi.conj())


def from_config(cfg: dict) -> Model:
    """Build a model from a ``[model]`` config table."""
    kind = cfg.get("kind")
    bath = BathSpec(coupling_a=float(cfg["coupling"]), temperature=float(cfg["temperature"]))
    if kind == TWO_LEVEL:
        return build_two_level(float(cfg["delta"]), bath)
    if kind == V_MODEL:
        return build_v_model(float(cfg["nu"]), float(cfg["delta"]), bath)
    raise ModelError(f"unknown model kind {kind!r}")
