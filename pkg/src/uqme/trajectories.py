"""Jump unraveling of the master equation on conditioned density matrices.

Each substep either fires a jump (probability ``dt * sum_k Tr[L_k rho L_k^dag]``)
or applies the null-measurement drift.  The drift is integrated exactly over
the substep: for a time-independent A = iH + sum_k L_k^dag L_k / 2 the flow of
``d rho = -(A rho + rho A^dag - Tr[A rho + rho A^dag] rho) dt`` is
``K rho K^dag / Tr[K rho K^dag]`` with ``K = exp(-A dt)``.

Randomness: trajectory ``i`` of an ensemble seeded with ``base_seed`` draws
from its own Philox stream keyed by ``SeedSequence(base_seed, spawn_key=(i,))``
and consumes exactly two uniforms per substep (jump decision, channel choice).
Trajectories are simulated in fixed-size batches of consecutive indices, so
results do not depend on how batches are spread over worker processes.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .bases import BasisTransform, bloch_map_batch, decoherence_basis, transform_model
from .master import _check_state
from .models import Model
from .numkit import ComplexMatrix, adjoint, as_matrix, vectorize
from .observables import observables

GENERATOR_NAME = "numpy.random.Philox (4x64-10); key = SeedSequence(entropy=base_seed, spawn_key=(index,))"
MAX_STEP_PROBABILITY = 1e-3
STEP_CONTRACT = 0.01
BATCH_SIZE = 2048
RNG_BLOCK = 2048


def stream(base_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(base_seed, spawn_key=(index,))))


def _effective_generator(model: Model) -> ComplexMatrix:
    decay = sum(adjoint(l) @ l for l in model.collapse_ops) if model.collapse_ops else 0
    return 1j * model.hamiltonian + 0.5 * decay


def jump_weights(rho_c: ComplexMatrix, model: Model) -> np.ndarray:
    """Tr[L_k rho L_k^dag] for each channel."""
    return np.array([np.trace(l @ rho_c @ adjoint(l)).real for l in model.collapse_ops])


def no_jump_step(rho_c: ComplexMatrix, model: Model, dt: float) -> tuple[ComplexMatrix, float]:
    """Null-measurement drift over ``dt``; returns (new state, dt * sum_k Tr[L_k rho L_k^dag])."""
    rho_c = as_matrix(rho_c)
    if dt < 0:
        raise ValueError("dt must be non-negative")
    total = float(jump_weights(rho_c, model).sum()) if model.collapse_ops else 0.0
    p_jump = dt * total
    if p_jump > STEP_CONTRACT:
        raise ValueError(
            f"step too large: dt*sum Tr[L rho L^dag] = {p_jump:.3g} > {STEP_CONTRACT}; "
            f"use dt <= {STEP_CONTRACT / total:.6g}"
        )
    if dt == 0:
        return rho_c.copy(), 0.0
    k = sla.expm(-_effective_generator(model) * dt)
    out = k @ rho_c @ adjoint(k)
    out = out / np.trace(out).real
    return 0.5 * (out + adjoint(out)), p_jump


def jump(rho_c: ComplexMatrix, l: ComplexMatrix) -> ComplexMatrix:
    """Post-jump state L rho L^dag / Tr[L rho L^dag]."""
    rho_c, l = as_matrix(rho_c), as_matrix(l)
    out = l @ rho_c @ adjoint(l)
    weight = np.trace(out).real
    # weights at rounding level relative to |L|^2 count as zero
    if not weight > 1e-14 * float(np.linalg.norm(l, 2)) ** 2:
        raise ValueError("jump channel has zero weight in this state and cannot fire")
    return out / weight


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    grid: np.ndarray
    states: np.ndarray  # (n_times, d, d)
    jumps: list[tuple[float, int]]
    seed: int
    index: int = 0
    generator: str = GENERATOR_NAME
    basis_labels: tuple[str, ...] = ()
    channel_names: tuple[str, ...] = ()

    def jump_flags(self) -> np.ndarray:
        """1 where at least one jump happened in (t_{g-1}, t_g]."""
        flags = np.zeros(self.grid.size, dtype=int)
        if self.jumps:
            times = np.array([t for t, _ in self.jumps])
            pos = np.searchsorted(self.grid, times, side="left")
            flags[np.clip(pos, 0, self.grid.size - 1)] = 1
        return flags

    def observables(self) -> dict[str, np.ndarray]:
        return observables(self.states, self.basis_labels)

    def bloch(self) -> np.ndarray:
        return bloch_map_batch(self.states)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "index": self.index,
            "generator": self.generator,
            "channels": list(self.channel_names),
            "jumps": [{"t": float(t), "channel": int(c)} for t, c in self.jumps],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True, eq=False)
class EnsembleSummary:
    grid: np.ndarray
    mean_state: np.ndarray  # (n_times, d, d)
    mean: dict[str, np.ndarray]
    std_error: dict[str, np.ndarray]
    count: int
    base_seed: int
    basis_labels: tuple[str, ...]
    jump_counts: np.ndarray = field(default=None)
    generator: str = GENERATOR_NAME


def substep_bound(model: Model) -> float:
    """Largest substep keeping the total jump probability per substep below 1e-3."""
    rate = sum(np.linalg.norm(l, 2) ** 2 for l in model.collapse_ops)
    return MAX_STEP_PROBABILITY / rate if rate > 0 else math.inf


def _superop(a: ComplexMatrix) -> ComplexMatrix:
    # vec(a X a^dag) = kron(conj(a), a) vec(X); transposed for row-vector batches
    return np.kron(a.conj(), a).T.copy()


def _realify(a: np.ndarray) -> np.ndarray:
    """Real block form of a complex right-multiplier: [xr, xi] @ R == [Re(x @ a), Im(x @ a)]."""
    return np.block([[a.real, a.imag], [-a.imag, a.real]])


def _real_functional(c: np.ndarray) -> np.ndarray:
    """Rows f with f @ [xr, xi] == Re(x @ c) for each column of ``c``."""
    c = c.reshape(c.shape[0], -1)
    return np.concatenate([c.real, -c.imag]).T


def _run_batch(args) -> tuple[np.ndarray, list[list[tuple[float, int]]]]:
    model, rho0, grid, base_seed, indices = args
    d = model.dimension
    dd = d * d
    n = len(indices)
    ops = model.collapse_ops
    n_ch = len(ops)
    heff = _effective_generator(model)
    dt_max = substep_bound(model)
    weights_t = np.array([vectorize((adjoint(l) @ l).T) for l in ops]).T if n_ch else np.zeros((dd, 0))
    trace_vec = vectorize(np.eye(d))
    # complex matmuls on these small shapes are slow, so states are carried as [Re x, Im x]
    jump_r = [_realify(_superop(l)).T for l in ops]
    trace_r = _real_functional(trace_vec)[0]

    gens = [stream(base_seed, int(i)) for i in indices]
    # draws for a block of substeps, laid out so each substep reads a contiguous (2, n) slab
    uniforms = np.empty((RNG_BLOCK, 2, n))
    pos = RNG_BLOCK

    # trajectories run along the last axis so that every row slice below is contiguous
    x0 = vectorize(rho0)
    x = np.tile(np.concatenate([x0.real, x0.imag])[:, None], (1, n))
    states = np.empty((grid.size, 2 * dd, n))
    states[0] = x
    jumps: list[list[tuple[float, int]]] = [[] for _ in range(n)]
    prop_cache: dict[float, np.ndarray] = {}

    for g in range(1, grid.size):
        span = grid[g] - grid[g - 1]
        n_sub = max(1, math.ceil(span / dt_max * (1 - 1e-12))) if span > 0 else 0
        dt = span / n_sub if n_sub else 0.0
        if n_sub and dt not in prop_cache:
            kt = _superop(sla.expm(-heff * dt))
            # one product yields the propagated state, the trace after the step and the jump weights
            # rows: Re and Im of the new state, its trace, then dt * weight per channel
            prop_cache[dt] = np.concatenate(
                [_realify(kt).T, _real_functional(kt @ trace_vec), _real_functional(weights_t * dt)]
            )
        step = prop_cache.get(dt)
        for s in range(n_sub):
            if pos == RNG_BLOCK:
                for j, gen in enumerate(gens):
                    uniforms[:, :, j] = gen.random((RNG_BLOCK, 2))
                pos = 0
            u = uniforms[pos]
            pos += 1
            y = step @ x
            x_old = x
            x = y[: 2 * dd] / y[2 * dd]
            if not n_ch:
                continue
            w = y[2 * dd + 1 :]
            p = w.sum(axis=0) if n_ch > 1 else w[0]
            idx = np.flatnonzero(u[0] < p)
            if idx.size:
                if n_ch == 1:
                    chan = np.zeros(idx.size, dtype=int)
                else:
                    cum = np.cumsum(w[:, idx], axis=0)
                    chan = np.minimum((cum <= u[1, idx] * p[idx]).sum(axis=0), n_ch - 1)
                t_jump = float(grid[g - 1] + (s + 1) * dt)
                for r, c in zip(idx.tolist(), chan.tolist()):
                    z = jump_r[c] @ x_old[:, r]
                    x[:, r] = z / (trace_r @ z)
                    jumps[r].append((t_jump, c))
        # hermitize to keep rounding drift out of the stored states
        m = (x[:dd] + 1j * x[dd:]).T.reshape(n, d, d)
        m = 0.5 * (m + np.conj(np.swapaxes(m, 1, 2)))
        m = m.reshape(n, dd).T
        x = np.concatenate([m.real, m.imag], axis=0)
        states[g] = x
    states = states.transpose(2, 0, 1)
    return states[:, :, :dd] + 1j * states[:, :, dd:], jumps


def _prepare(model: Model, basis: BasisTransform | None, rho0, grid):
    work = transform_model(model, basis)
    rho0 = _check_state(rho0, work.dimension)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) < 0) or grid[0] < 0:
        raise ValueError("time grid must be a non-negative ascending sequence")
    return work, rho0, grid


def _simulate(work: Model, rho0, grid, base_seed: int, indices, workers: int = 1):
    indices = list(indices)
    batches = [indices[k : k + BATCH_SIZE] for k in range(0, len(indices), BATCH_SIZE)]
    tasks = [(work, rho0, grid, base_seed, b) for b in batches]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_batch, tasks))
    else:
        results = [_run_batch(t) for t in tasks]
    d = work.dimension
    states = np.concatenate([r[0] for r in results], axis=0) if results else np.empty((0, grid.size, d * d))
    # column-stacked vectors -> matrices: m[i, j] = v[i + d*j]
    states = states.reshape(states.shape[0], grid.size, d, d).swapaxes(2, 3)
    jumps = [j for r in results for j in r[1]]
    return states, jumps


def simulate_ensemble(
    model: Model,
    basis: BasisTransform | None,
    rho0: ComplexMatrix,
    grid,
    count: int,
    base_seed: int,
    workers: int = 1,
    first_index: int = 0,
) -> list[TrajectoryRecord]:
    """All trajectories of an ensemble as individual records (index order)."""
    if count < 1:
        raise ValueError("count must be at least 1")
    work, rho0, grid = _prepare(model, basis, rho0, grid)
    idx = range(first_index, first_index + count)
    states, jumps = _simulate(work, rho0, grid, base_seed, idx, workers)
    return [
        TrajectoryRecord(grid, states[k], jumps[k], base_seed, i, GENERATOR_NAME, work.basis_labels, work.channel_names)
        for k, i in enumerate(idx)
    ]


def sample_trajectory(
    model: Model,
    basis: BasisTransform | None,
    rho0: ComplexMatrix,
    grid,
    seed: int,
    index: int = 0,
) -> TrajectoryRecord:
    """One stochastic realization; ``rho0`` is given in the target basis."""
    return simulate_ensemble(model, basis, rho0, grid, 1, seed, 1, first_index=index)[0]


def _summarize(states: np.ndarray, grid, base_seed, labels, jumps) -> EnsembleSummary:
    n = states.shape[0]
    obs = observables(states, labels)
    mean = {k: v.mean(axis=0) for k, v in obs.items()}
    if n > 1:
        se = {k: v.std(axis=0, ddof=1) / math.sqrt(n) for k, v in obs.items()}
    else:
        se = {k: np.zeros_like(v[0]) for k, v in obs.items()}
    counts = np.array([len(j) for j in jumps])
    return EnsembleSummary(grid, states.mean(axis=0), mean, se, n, base_seed, tuple(labels), counts)


def ensemble_average(
    model: Model,
    basis: BasisTransform | None,
    rho0: ComplexMatrix,
    grid,
    count: int,
    base_seed: int,
    workers: int = 1,
) -> EnsembleSummary:
    if count < 1:
        raise ValueError("count must be at least 1")
    work, rho0, grid = _prepare(model, basis, rho0, grid)
    states, jumps = _simulate(work, rho0, grid, base_seed, range(count), workers)
    return _summarize(states, grid, base_seed, work.basis_labels, jumps)


def sigma_z_correlation(
    model: Model,
    lags,
    count: int,
    base_seed: int,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Trajectory estimate of <sigma_z(t) sigma_z(0)> in the stationary state.

    Works in the decoherence basis, where sigma_z eigenstates are unaffected
    by jumps.  The maximally mixed steady state is sampled as an equal mixture
    of the two eigenstates; the per-trajectory estimator is s_z(t) s_z(0).
    Returns (lags, mean, standard error).
    """
    basis = decoherence_basis(model)
    lags = np.asarray(lags, dtype=float)
    grid = np.concatenate([[0.0], lags]) if lags.size == 0 or lags[0] > 0 else lags
    half = count // 2
    work = transform_model(model, basis)
    est = []
    for start, size, sign in ((0, half, 1.0), (half, count - half, -1.0)):
        rho0 = np.diag([1.0, 0.0] if sign > 0 else [0.0, 1.0]).astype(complex)
        states, _ = _simulate(work, rho0, grid, base_seed, range(start, start + size), workers)
        sz = (states[:, :, 0, 0] - states[:, :, 1, 1]).real
        est.append(sign * sz)
    est = np.concatenate(est, axis=0)
    if grid is not lags:
        est = est[:, 1:]
    mean = est.mean(axis=0)
    se = est.std(axis=0, ddof=1) / math.sqrt(est.shape[0])
    return lags, mean, se
