"""Unified-QME generator assembly, spectral propagation and timescale extraction."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .bases import BasisTransform, transform_model
from .models import Model, ground_state
from .numkit import (
    ComplexMatrix,
    SpectralDecomposition,
    adjoint,
    as_matrix,
    eig_general,
    hermitize,
    rk4_propagate,
    unvectorize,
    vectorize,
)

ZERO_TOL = 1e-8  # relative to gamma
GAP_RATIO = 10.0


class NumericalError(RuntimeError):
    """Propagation failed on both the spectral and the Runge-Kutta route."""


class DegenerateSteadyStateError(RuntimeError):
    def __init__(self, null_dim: int):
        super().__init__(f"steady state is not unique: null space of dimension {null_dim}")
        self.null_dim = null_dim


def dissipator(l: ComplexMatrix, rho: ComplexMatrix) -> ComplexMatrix:
    """L rho L^dag - {L^dag L, rho}/2."""
    l, rho = as_matrix(l), as_matrix(rho)
    if l.shape != rho.shape:
        raise ValueError(f"operator {l.shape} and state {rho.shape} dimensions differ")
    ld = adjoint(l)
    ll = ld @ l
    return l @ rho @ ld - 0.5 * (ll @ rho + rho @ ll)


def hamiltonian_superop(h: ComplexMatrix) -> ComplexMatrix:
    """-i[H, .] in column-stacked form."""
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(eye, h) - np.kron(h.T, eye))


def dissipator_superop(l: ComplexMatrix) -> ComplexMatrix:
    eye = np.eye(l.shape[0])
    ll = adjoint(l) @ l
    return np.kron(l.conj(), l) - 0.5 * np.kron(eye, ll) - 0.5 * np.kron(ll.T, eye)


def generator_matrix(hamiltonian: ComplexMatrix, collapse_ops: Sequence[ComplexMatrix]) -> ComplexMatrix:
    out = hamiltonian_superop(as_matrix(hamiltonian))
    for l in collapse_ops:
        out = out + dissipator_superop(as_matrix(l))
    return out


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Vectorized generator together with the (basis-transformed) model it came from."""

    matrix: ComplexMatrix
    model: Model
    basis_label: str

    @property
    def dim(self) -> int:
        return self.model.dimension

    @property
    def rate_scale(self) -> float:
        g = self.model.params.gamma
        return g if g > 0 else float(np.linalg.norm(self.matrix, 2))

    @cached_property
    def spectrum(self) -> SpectralDecomposition:
        return eig_general(self.matrix)

    def apply(self, rho: ComplexMatrix) -> ComplexMatrix:
        return unvectorize(self.matrix @ vectorize(rho), self.dim)

    def null_indices(self) -> np.ndarray:
        w = self.spectrum.eigenvalues
        return np.flatnonzero(np.abs(w) <= ZERO_TOL * self.rate_scale)


def assemble(model: Model, basis: BasisTransform | None = None) -> Liouvillian:
    """Build the generator -i[H, .] + sum_k D[L_k] in the requested basis."""
    m = transform_model(model, basis)
    return Liouvillian(generator_matrix(m.hamiltonian, m.collapse_ops), m, m.basis)


def _check_state(rho: ComplexMatrix, dim: int) -> ComplexMatrix:
    rho = as_matrix(rho)
    if rho.shape != (dim, dim):
        raise ValueError(f"initial state must be {dim}x{dim}, got {rho.shape}")
    if np.abs(rho - adjoint(rho)).max() > 1e-10:
        raise ValueError("initial state is not Hermitian")
    if abs(np.trace(rho) - 1) > 1e-10:
        raise ValueError(f"initial state has trace {np.trace(rho).real:.12g}, expected 1")
    if np.linalg.eigvalsh(hermitize(rho)).min() < -1e-10:
        raise ValueError("initial state is not positive semidefinite")
    return rho


def propagate_vectors(liouvillian: Liouvillian, v0: np.ndarray, grid) -> np.ndarray:
    """exp(L t) v0 for each t in ``grid``; rows are time points."""
    grid = np.asarray(grid, dtype=float)
    spec = liouvillian.spectrum
    if not spec.defective:
        coeff = spec.left @ v0
        phases = np.exp(np.outer(spec.eigenvalues, grid))  # (n_eig, n_t)
        return (spec.right @ (coeff[:, None] * phases)).T
    out = rk4_propagate(liouvillian.matrix, v0, grid)
    if not np.all(np.isfinite(out)):
        raise NumericalError("defective spectrum and the Runge-Kutta fallback diverged")
    return out


def evolve(liouvillian: Liouvillian, rho0: ComplexMatrix, grid) -> list[ComplexMatrix]:
    """Density matrices rho(t) = exp(L t) rho0 on an ascending time grid."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(grid < 0) or np.any(np.diff(grid) < 0):
        raise ValueError("time grid must be a non-negative ascending sequence")
    rho0 = _check_state(rho0, liouvillian.dim)
    vecs = propagate_vectors(liouvillian, vectorize(rho0), grid)
    out = []
    for t, v in zip(grid, vecs):
        out.append(rho0.copy() if t == 0 else hermitize(unvectorize(v, liouvillian.dim)))
    return out


def evolve_array(liouvillian: Liouvillian, rho0: ComplexMatrix, grid) -> np.ndarray:
    return np.array(evolve(liouvillian, rho0, grid))


def steady_state(liouvillian: Liouvillian) -> ComplexMatrix:
    idx = liouvillian.null_indices()
    if idx.size != 1:
        raise DegenerateSteadyStateError(int(idx.size))
    r = unvectorize(liouvillian.spectrum.right[:, idx[0]], liouvillian.dim)
    r = r / np.trace(r)
    return hermitize(r)


@dataclass(frozen=True)
class TimescaleReport:
    eigenvalues: np.ndarray  # ascending |Re|
    tau1: float
    tau2: float
    metastable_window: tuple[float, float] | None
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        def num(x):
            return None if not math.isfinite(x) else float(x)

        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "tau1": num(self.tau1),
            "tau2": num(self.tau2),
            "window": None if self.metastable_window is None else [num(x) for x in self.metastable_window],
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def timescales(liouvillian: Liouvillian, rho0: ComplexMatrix | None = None) -> TimescaleReport:
    """tau1 from the slowest nonzero rate, tau2 from the fastest rate the initial deviation excites.

    ``rho0`` defaults to the ground state of the model Hamiltonian.
    """
    spec = liouvillian.spectrum
    w = spec.eigenvalues
    order = np.argsort(np.abs(w.real), kind="stable")
    null = set(liouvillian.null_indices().tolist())
    notes = []

    nonzero = [i for i in order if i not in null]
    if len(null) > 1:
        tau1 = math.inf
        notes.append(f"{len(null)} stationary modes: slow timescale diverges")
    elif nonzero:
        tau1 = 1.0 / abs(w[nonzero[0]].real)
    else:
        tau1 = math.inf

    if rho0 is None:
        rho0 = ground_state(liouvillian.model)
    v0 = vectorize(rho0)
    coeff = spec.left @ v0
    weight = np.abs(coeff) * np.linalg.norm(spec.right, axis=0)
    excited = [i for i in nonzero if weight[i] > 1e-8 * max(weight.max(), 1e-300)]
    if not excited:
        excited = nonzero
    tau2 = 1.0 / max(abs(w[i].real) for i in excited) if excited else math.inf

    window = None
    if math.isfinite(tau1) and tau1 / tau2 >= GAP_RATIO:
        window = (5.0 * tau2, tau1 / 5.0)
    elif math.isfinite(tau1):
        notes.append("no spectral gap: rate ratio below 10")
    return TimescaleReport(w[order], tau1, tau2, window, tuple(notes))


class SlowEigenvalue(NamedTuple):
    first_order: complex
    second_order: complex
    value: complex


def _split(model: Model) -> tuple[np.ndarray, np.ndarray]:
    h0 = model.hamiltonian - model.hamiltonian_delta
    l0 = generator_matrix(h0, model.collapse_ops)
    ldelta = hamiltonian_superop(model.hamiltonian_delta)
    return l0, ldelta


def slow_eigenvalue_terms(model: Model) -> SlowEigenvalue:
    """Perturbative estimate of the eigenvalue that vanishes as Delta -> 0.

    The generator is split into L0 (Delta = 0) and the Delta-dependent part.
    L0 has a two-dimensional null space: the physical stationary mode and the
    slow mode.  The effective generator on that space is built to first order
    and, where the first order vanishes, to second order; the eigenvalue that
    is not the conserved-trace zero is returned.
    """
    l0, ld = _split(model)
    spec = eig_general(l0)
    gamma = model.params.gamma
    w = spec.eigenvalues
    null = np.flatnonzero(np.abs(w) <= ZERO_TOL * gamma)
    if null.size != 2:
        raise RuntimeError(
            f"unperturbed generator has a {null.size}-dimensional null space; "
            "expected the stationary mode plus exactly one slow mode"
        )
    rest = np.setdiff1d(np.arange(w.size), null)
    lrow, rcol = spec.left[null], spec.right[:, null]

    m1 = lrow @ ld @ rcol
    couple_out = lrow @ ld @ spec.right[:, rest]
    couple_in = spec.left[rest] @ ld @ rcol
    m2 = couple_out @ np.diag(1.0 / (-w[rest])) @ couple_in

    def slow(m):
        ev = np.linalg.eigvals(m)
        return ev[np.argmax(np.abs(ev))]  # the other one is the conserved-trace zero

    first = slow(m1)
    if abs(first) > 1e-12 * gamma:
        return SlowEigenvalue(first, 0j, first)
    total = slow(m1 + m2)
    return SlowEigenvalue(first, total - first, total)


def perturbative_slow_eigenvalue(model: Model) -> complex:
    return slow_eigenvalue_terms(model).value
