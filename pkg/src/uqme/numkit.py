"""Dense complex linear algebra used throughout the package.

Operators, density matrices and superoperators are plain ``complex128``
numpy arrays.  Vectorization is column-stacking, so that

    vec(A @ X @ B) == kron(B.T, A) @ vec(X)

which is the identity the Liouvillian assembly relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

ComplexMatrix = np.ndarray

DEFECTIVE_THRESHOLD = 1e8
CLUSTER_TOL = 1e-10
MAX_EIG_DIM = 256


class SolverError(RuntimeError):
    """Eigensolver failure; ``residual`` is the best residual seen (or nan)."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class DefectiveSpectrumError(RuntimeError):
    """Raised when a spectral function is requested on a near-defective decomposition."""


def as_matrix(m) -> ComplexMatrix:
    a = np.array(m, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def adjoint(m: ComplexMatrix) -> ComplexMatrix:
    return np.conj(m).T


def kron(a: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    return np.kron(as_matrix(a), as_matrix(b))


def vectorize(m: ComplexMatrix) -> np.ndarray:
    """Column-stack a square matrix: ``v[i + dim*j] = m[i, j]``."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"vectorize expects a square matrix, got {m.shape}")
    return m.reshape(-1, order="F").copy()


def unvectorize(v, dim: int) -> ComplexMatrix:
    v = np.asarray(v, dtype=complex).ravel()
    if v.size != dim * dim:
        raise ValueError(f"cannot unvectorize length {v.size} into {dim}x{dim}")
    return v.reshape((dim, dim), order="F").copy()


def hermitize(m: ComplexMatrix) -> ComplexMatrix:
    return 0.5 * (m + adjoint(m))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues with right (columns) and biorthogonal left (rows) eigenvectors.

    ``condition_estimate`` is the 2-norm condition number of the right
    eigenvector matrix; values above ``DEFECTIVE_THRESHOLD`` mark a
    numerically defective matrix.  ``degenerate`` is set when two eigenvalues
    fall within ``CLUSTER_TOL * norm`` of each other.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    condition_estimate: float
    norm: float
    degenerate: bool

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @property
    def defective(self) -> bool:
        return not self.condition_estimate < DEFECTIVE_THRESHOLD

    def clusters(self, tol: float = CLUSTER_TOL) -> list[list[int]]:
        """Group eigenvalue indices whose mutual distance is below ``tol * norm``."""
        return _cluster(self.eigenvalues, tol * self.norm)


def _cluster(values: np.ndarray, atol: float) -> list[list[int]]:
    groups: list[list[int]] = []
    for i, lam in enumerate(values):
        for g in groups:
            if any(abs(lam - values[j]) <= atol for j in g):
                g.append(i)
                break
        else:
            groups.append([i])
    return groups


def eig_general(m: ComplexMatrix) -> SpectralDecomposition:
    """Full eigendecomposition of a dense (non-Hermitian) matrix.

    Left vectors are the rows of the inverse of the right-vector matrix, so
    ``left @ right == I`` by construction whenever the matrix is diagonalizable.
    """
    m = as_matrix(m)
    n, k = m.shape
    if n != k:
        raise ValueError(f"eig_general expects a square matrix, got {m.shape}")
    if n > MAX_EIG_DIM:
        raise ValueError(f"dimension {n} exceeds the dense limit {MAX_EIG_DIM}")
    if not np.all(np.isfinite(m)):
        raise SolverError("matrix has non-finite entries")
    norm = float(np.linalg.norm(m, 2)) if n else 0.0
    try:
        w, vr = sla.eig(m, right=True, left=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"eigensolver did not converge: {exc}") from exc

    # normalize columns; keeps the condition number meaningful
    vr = vr / np.linalg.norm(vr, axis=0, keepdims=True)
    cond = float(np.linalg.cond(vr))
    if np.isfinite(cond) and cond < 1.0 / np.finfo(float).eps:
        left = np.linalg.inv(vr)
    else:
        cond = float("inf")
        left = np.linalg.pinv(vr)

    residual = np.linalg.norm(m @ vr - vr * w) if n else 0.0
    if not np.isfinite(residual) or residual > 1e-6 * max(norm, 1.0):
        raise SolverError("eigendecomposition residual too large", float(residual))

    degenerate = any(len(g) > 1 for g in _cluster(w, CLUSTER_TOL * norm))
    return SpectralDecomposition(
        eigenvalues=w,
        right=vr,
        left=left,
        condition_estimate=cond,
        norm=norm,
        degenerate=degenerate,
    )


def _apply_scalar(f: Callable, values: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(f(values), dtype=complex)
        if out.shape == values.shape:
            return out
    except TypeError:
        pass
    return np.array([complex(f(complex(v))) for v in values])


def matrix_function_via_spectrum(d: SpectralDecomposition, f: Callable) -> ComplexMatrix:
    """Return ``sum_k f(lam_k) |r_k><l_k|``.

    With ``f = lambda lam: np.exp(lam * t)`` this is the propagator
    ``exp(M t)``.
    """
    if d.defective:
        raise DefectiveSpectrumError(
            f"spectrum is numerically defective (condition {d.condition_estimate:.3g}); "
            "use the Runge-Kutta fallback (rk4_propagate) instead"
        )
    fv = _apply_scalar(f, d.eigenvalues)
    return (d.right * fv) @ d.left


def spectral_radius(m: ComplexMatrix) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(m)))) if m.size else 0.0


def rk4_propagate(m: ComplexMatrix, v0: np.ndarray, times, max_step: float | None = None) -> np.ndarray:
    """Integrate ``dv/dt = m v`` with classical fixed-step RK4.

    Steps never exceed ``0.05 / spectral_radius(m)`` unless ``max_step`` is
    smaller.  Returns an array with one row per requested time.
    """
    m = as_matrix(m)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be ascending")
    rho = spectral_radius(m)
    h_max = 0.05 / rho if rho > 0 else np.inf
    if max_step is not None:
        h_max = min(h_max, max_step)

    out = np.empty((times.size, m.shape[0]), dtype=complex)
    v = np.asarray(v0, dtype=complex).copy()
    t = 0.0
    for i, target in enumerate(times):
        span = target - t
        if span > 0:
            n = int(np.ceil(span / h_max)) if np.isfinite(h_max) else 1
            h = span / n
            for _ in range(n):
                k1 = m @ v
                k2 = m @ (v + 0.5 * h * k1)
                k3 = m @ (v + 0.5 * h * k2)
                k4 = m @ (v + h * k3)
                v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t = target
        out[i] = v
    return out
