"""Statevector QAOA over diagonal Ising cost operators.

The cost operator is diagonal in the computational basis, so a state is a
vector of 2^n complex amplitudes and a phase layer is an elementwise
multiply. Bit order is LSB-first throughout: bit i of a basis index z is the
binary value of variable i (bit 0 -> x_0), and spin sigma_i = 2*bit_i - 1.

Angle optimization is derivative-free under a hard query budget: Nelder-Mead
runs with random restarts until the budget is exhausted, every expectation
evaluation is recorded, and the best parameters seen are returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .ising import IsingModel

SIMULATOR_LIMIT = 22


@dataclass(frozen=True)
class QaoaParams:
    gammas: np.ndarray
    betas: np.ndarray

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gammas, dtype=float))
        b = np.atleast_1d(np.asarray(self.betas, dtype=float))
        if g.ndim != 1 or g.shape != b.shape or g.size < 1:
            raise ValueError("gammas and betas must be equal-length vectors, p >= 1")
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "betas", b)

    @property
    def p(self) -> int:
        return self.gammas.size

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.gammas, self.betas])

    @staticmethod
    def from_vector(v: np.ndarray) -> "QaoaParams":
        v = np.asarray(v, dtype=float)
        p = v.size // 2
        return QaoaParams(gammas=v[:p], betas=v[p:])


@dataclass(frozen=True)
class SampleSet:
    """Distinct measured bitstrings (rows) with counts summing to the shots."""

    bitstrings: np.ndarray
    counts: np.ndarray
    shots: int

    def __post_init__(self):
        if self.bitstrings.ndim != 2:
            raise ValueError("bitstrings must be a 2-d array of rows")
        if self.counts.shape != (self.bitstrings.shape[0],):
            raise ValueError("one count per bitstring required")
        if np.any(self.counts <= 0):
            raise ValueError("counts must be positive")
        if int(self.counts.sum()) != self.shots:
            raise ValueError("counts must sum to the number of shots")

    @property
    def n_distinct(self) -> int:
        return self.bitstrings.shape[0]


@dataclass(frozen=True)
class OptimizerTrace:
    """Expectation value of every optimizer query, in query order."""

    entries: tuple[tuple[int, float], ...]

    def __post_init__(self):
        indices = [q for q, _ in self.entries]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("query indices must be strictly increasing")

    @property
    def n_queries(self) -> int:
        return len(self.entries)

    @property
    def best_value(self) -> float:
        return min(v for _, v in self.entries)


def spin_table(n_spins: int) -> np.ndarray:
    """(2^n, n) matrix of spins; row z, column i is sigma_i of basis state z."""
    z = np.arange(1 << n_spins, dtype=np.int64)
    bits = (z[:, None] >> np.arange(n_spins)) & 1
    return 2.0 * bits - 1.0


def build_diagonal(
    model: IsingModel, include_constant: bool = True, limit: int = SIMULATOR_LIMIT
) -> np.ndarray:
    """Energy of every basis state, indexed LSB-first by spin configuration."""
    n = model.n_spins
    if n > limit:
        raise ValueError(f"{n} spins exceeds the simulator limit of {limit}")
    size = 1 << n
    diag = np.zeros(size)
    if include_constant:
        diag += model.constant
    z = np.arange(size, dtype=np.int64)
    spins = [2.0 * ((z >> i) & 1) - 1.0 for i in range(n)]
    for i in range(n):
        f = model.fields[i]
        if f != 0.0:
            diag += f * spins[i]
    for (i, j), w in model.couplings.items():
        diag += w * (spins[i] * spins[j])
    return diag


def _apply_mixer(state: np.ndarray, beta: float, n_spins: int) -> np.ndarray:
    """exp(-i*beta*X) on every spin."""
    c = np.cos(beta)
    s = -1j * np.sin(beta)
    rot = np.array([[c, s], [s, c]])
    psi = state.reshape((2,) * n_spins)
    for axis in range(n_spins):
        psi = np.moveaxis(np.tensordot(rot, psi, axes=([1], [axis])), 0, axis)
    return psi.reshape(-1)


def qaoa_state(diag: np.ndarray, params: QaoaParams) -> np.ndarray:
    """Alternating phase/mixer circuit applied to the uniform superposition."""
    size = diag.size
    n_spins = int(size).bit_length() - 1
    if 1 << n_spins != size:
        raise ValueError("diagonal length must be a power of two")
    state = np.full(size, 1.0 / np.sqrt(size), dtype=complex)
    for gamma, beta in zip(params.gammas, params.betas):
        state = state * np.exp(-1j * gamma * diag)
        if n_spins:
            state = _apply_mixer(state, beta, n_spins)
    return state


def expectation(state: np.ndarray, diag: np.ndarray) -> float:
    """<psi| diag |psi> = sum_z |amp_z|^2 diag_z."""
    if state.shape != diag.shape:
        raise ValueError("state and diagonal dimensions differ")
    return float(np.real(np.vdot(state, state * diag)))


def sample(state: np.ndarray, q: int, rng: np.random.Generator) -> SampleSet:
    """q independent measurements, aggregated into distinct bitstrings."""
    if q < 1:
        raise ValueError("need at least one shot")
    probs = np.abs(state) ** 2
    probs = probs / probs.sum()
    n_spins = int(state.size).bit_length() - 1
    draws = rng.choice(state.size, size=q, p=probs)
    values, counts = np.unique(draws, return_counts=True)
    bitstrings = ((values[:, None] >> np.arange(max(n_spins, 1))) & 1)[:, :n_spins]
    return SampleSet(bitstrings=bitstrings.astype(np.int8), counts=counts, shots=q)


class _BudgetExhausted(Exception):
    pass


def optimize_angles(
    diag: np.ndarray,
    p: int,
    max_queries: int,
    rng: np.random.Generator,
    init: QaoaParams | None = None,
) -> tuple[QaoaParams, OptimizerTrace]:
    """Minimize the state expectation over 2p angles under a query budget.

    Nelder-Mead from a random start (or ``init`` when warm-starting), with
    fresh random restarts while budget remains. Never evaluates more than
    ``max_queries`` times; returns the best parameters seen.
    """
    if max_queries < 1:
        raise ValueError("max_queries must be at least 1")
    entries: list[tuple[int, float]] = []
    best_x: np.ndarray | None = None
    best_f = np.inf

    def objective(x: np.ndarray) -> float:
        nonlocal best_x, best_f
        if len(entries) >= max_queries:
            raise _BudgetExhausted
        value = expectation(qaoa_state(diag, QaoaParams.from_vector(x)), diag)
        entries.append((len(entries) + 1, value))
        if value < best_f:
            best_f = value
            best_x = x.copy()
        return value

    x0 = init.as_vector() if init is not None else rng.uniform(0.0, np.pi, size=2 * p)
    try:
        while len(entries) < max_queries:
            minimize(
                objective,
                x0,
                method="Nelder-Mead",
                options={"maxfev": max_queries - len(entries), "xatol": 1e-4, "fatol": 1e-8},
            )
            x0 = rng.uniform(0.0, np.pi, size=2 * p)
    except _BudgetExhausted:
        pass
    assert best_x is not None
    return QaoaParams.from_vector(best_x), OptimizerTrace(entries=tuple(entries))
