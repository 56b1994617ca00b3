"""Basis changes: the decoherence basis, the V-model |+-> basis, Bloch vectors."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .models import TWO_LEVEL, V_MODEL, Model, ModelError
from .numkit import ComplexMatrix, adjoint, as_matrix, kron

NORMAL_TOL = 1e-10
UNITARY_TOL = 1e-10


class NoDecoherenceBasisError(ValueError):
    """The collapse operator(s) cannot be jointly diagonalized by a unitary."""


@dataclass(frozen=True, eq=False)
class BasisTransform:
    """Unitary ``matrix`` whose columns are the new basis states in old coordinates."""

    matrix: ComplexMatrix
    from_label: str
    to_label: str
    state_labels: tuple[str, ...]

    def __post_init__(self):
        v = as_matrix(self.matrix)
        err = np.linalg.norm(adjoint(v) @ v - np.eye(v.shape[0]))
        if err > UNITARY_TOL:
            raise ValueError(f"basis transform is not unitary (||V^dag V - I|| = {err:.3g})")
        if len(self.state_labels) != v.shape[0]:
            raise ValueError("one label per basis state is required")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def superoperator(self) -> ComplexMatrix:
        """U with vec(V^dag X V) = U vec(X)."""
        v = self.matrix
        return kron(v.T, adjoint(v))


def _fix_phases(v: ComplexMatrix) -> ComplexMatrix:
    # largest-magnitude entry of each column made real-positive
    v = v.copy()
    for j in range(v.shape[1]):
        k = int(np.argmax(np.abs(v[:, j]) - 1e-12 * np.arange(v.shape[0])))
        v[:, j] *= np.conj(v[k, j]) / abs(v[k, j])
    return v


def _is_normal(m: ComplexMatrix) -> bool:
    scale = max(1.0, float(np.abs(m).max(initial=0.0))) ** 2
    return np.linalg.norm(m @ adjoint(m) - adjoint(m) @ m) <= NORMAL_TOL * scale


def diagonalize_lindblad(
    ops: ComplexMatrix | Sequence[ComplexMatrix],
) -> tuple[BasisTransform, ComplexMatrix]:
    """Unitary V and diagonal L~ = V^-1 L V for a normal collapse operator.

    Several operators are accepted only if they are normal and mutually
    commuting; otherwise no basis exists in which dissipation is pure
    decoherence.  Diagonal entries are ordered by ascending real part; an
    operator that is already diagonal is returned with V = I.
    """
    if isinstance(ops, np.ndarray) and ops.ndim == 2:
        ops = [ops]
    mats = [as_matrix(o) for o in ops]
    if not mats:
        raise ValueError("at least one operator is required")
    for m in mats:
        if not _is_normal(m):
            raise NoDecoherenceBasisError(
                "collapse operator is not normal: it describes jumps between states and "
                "cannot be interpreted as pure decoherence in any basis"
            )
    for i, a in enumerate(mats):
        for b in mats[i + 1 :]:
            if np.linalg.norm(a @ b - b @ a) > NORMAL_TOL or np.linalg.norm(a @ adjoint(b) - adjoint(b) @ a) > NORMAL_TOL:
                raise NoDecoherenceBasisError(
                    "collapse operators do not commute and cannot be simultaneously diagonalized"
                )

    dim = mats[0].shape[0]
    labels = tuple(f"d{k}" for k in range(dim))
    if all(np.allclose(m, np.diag(np.diag(m)), rtol=0, atol=1e-14) for m in mats):
        eye = BasisTransform(np.eye(dim, dtype=complex), "eigen", "decoherence", labels)
        return eye, mats[0].copy()

    # a generic combination separates all joint eigenspaces of a commuting normal family
    rng = np.random.default_rng(0)
    weights = rng.normal(size=len(mats)) + 1j * rng.normal(size=len(mats)) if len(mats) > 1 else [1.0]
    combo = sum(w * m for w, m in zip(weights, mats))
    t, z = sla.schur(combo, output="complex")
    lead = mats[0]
    diag = np.diag(adjoint(z) @ lead @ z)
    order = np.lexsort((diag.imag, diag.real))
    v = _fix_phases(z[:, order])
    transform = BasisTransform(v, "eigen", "decoherence", labels)
    ltilde = adjoint(v) @ lead @ v
    return transform, ltilde


def decoherence_basis(model: Model) -> BasisTransform:
    """Decoherence basis of a model with one Hermitian-proportional collapse operator."""
    transform, _ = diagonalize_lindblad(list(model.collapse_ops))
    labels = ("m", "p") if model.label == TWO_LEVEL else transform.state_labels
    return BasisTransform(transform.matrix, model.basis, "decoherence", labels)


def v_model_pm_basis() -> BasisTransform:
    """{|1>, |+>, |->} with |+> = (|2>+|3>)/sqrt2 and |-> = (|3>-|2>)/sqrt2.

    The sign of |-> is chosen so that the transformed Hamiltonian has the
    tunnelling element +Delta/2 between |+> and |->.
    """
    r = 1.0 / math.sqrt(2.0)
    v = np.array([[1, 0, 0], [0, r, -r], [0, r, r]], dtype=complex)
    return BasisTransform(v, "eigen", "pm", ("1", "p", "m"))


def basis_by_name(model: Model, name: str) -> BasisTransform | None:
    if name == "eigen":
        return None
    if name == "decoherence":
        return decoherence_basis(model)
    if name == "pm":
        if model.label != V_MODEL:
            raise ModelError("the pm basis is defined for the V model only")
        return v_model_pm_basis()
    raise ModelError(f"unknown basis {name!r}")


def transform_state(rho: ComplexMatrix, transform: BasisTransform, direction: str = "forward") -> ComplexMatrix:
    """V^-1 rho V (forward) or V rho V^-1 (backward); V is unitary."""
    rho = as_matrix(rho)
    v = transform.matrix
    if rho.shape != v.shape:
        raise ValueError(f"state shape {rho.shape} does not match transform {v.shape}")
    if direction == "forward":
        return adjoint(v) @ rho @ v
    if direction == "backward":
        return v @ rho @ adjoint(v)
    raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")


transform_operator = transform_state


def transform_generator(matrix: ComplexMatrix, transform: BasisTransform) -> ComplexMatrix:
    """Conjugate a vectorized generator into the new basis."""
    u = transform.superoperator
    return u @ matrix @ adjoint(u)


def transform_model(model: Model, transform: BasisTransform | None) -> Model:
    if transform is None:
        return model
    if transform.dim != model.dimension:
        raise ValueError("transform dimension does not match the model")
    t = lambda a: transform_operator(a, transform)  # noqa: E731
    return model.with_operators(
        hamiltonian=t(model.hamiltonian),
        collapse_ops=[t(op) for op in model.collapse_ops],
        hamiltonian_delta=t(model.hamiltonian_delta),
        basis=transform.to_label,
        basis_labels=transform.state_labels,
    )


@dataclass(frozen=True)
class BlochVector:
    sx: float
    sy: float
    sz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.sx, self.sy, self.sz])

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.as_array()))


def bloch_map(rho_c: ComplexMatrix) -> BlochVector:
    """Bloch components of a 2x2 state stored as (|psi_->, |psi_+>).

    sx = 2 Re rho_{+-}, sy = 2 Im rho_{+-}, sz = rho_{--} - rho_{++},
    where rho_{+-} = <psi_+|rho|psi_-> is the lower-left entry.
    """
    rho_c = as_matrix(rho_c)
    if rho_c.shape != (2, 2):
        raise ValueError("Bloch vectors are defined for 2x2 states only")
    coh = rho_c[1, 0]
    return BlochVector(2.0 * coh.real, 2.0 * coh.imag, float((rho_c[0, 0] - rho_c[1, 1]).real))


def bloch_map_batch(states: np.ndarray) -> np.ndarray:
    coh = states[..., 1, 0]
    return np.stack([2 * coh.real, 2 * coh.imag, (states[..., 0, 0] - states[..., 1, 1]).real], axis=-1)


def drive_vector(model: Model) -> np.ndarray:
    """Omega with H = Omega . sigma / 2 in the model's current basis."""
    if model.dimension != 2:
        raise ValueError("drive vector is defined for two-level models only")
    h = model.hamiltonian
    return np.array([2 * h[0, 1].real, -2 * h[0, 1].imag, (h[0, 0] - h[1, 1]).real])


def bloch_coherent_derivative(s: BlochVector, model: Model) -> BlochVector:
    """Rabi precession ds/dt = Omega x s (right-handed cross product)."""
    omega = drive_vector(model)
    ds = np.cross(omega, s.as_array())
    return BlochVector(float(ds[0]), float(ds[1]), float(ds[2]))
