"""Exact Ising encoding of penalized binary linear programs.

The penalized objective ``c^T x + M ||Ax - b||^2`` maps, via x = (sigma+1)/2,
to an energy over spins sigma in {-1,1}^n:

    E(sigma) = sum_{i<j} w_ij sigma_i sigma_j + sum_i f_i sigma_i + C

with w = (M/2) * offdiag(A^T A), f = (c - 2M A^T b + M (A^T A) 1) / 2, and the
diagonal quadratic contribution (M/4) * trace(A^T A) folded into the constant
C together with the transformation constant. The encoding is exact: the
energy of every spin image equals the penalized cost of the corresponding
binary assignment, which the tests enforce bit-for-bit.

The constant carries a two-part ledger: the transformation part and the
accumulated objective of fixed variables, so subproblem energies stay in the
master problem's frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blp import BlpInstance

# Couplings below this fraction of M are float noise, not structure.
COUPLING_DROP_TOL = 1e-12


@dataclass(frozen=True)
class ConstantLedger:
    transform_part: float = 0.0
    objective_part: float = 0.0

    @property
    def total(self) -> float:
        return self.transform_part + self.objective_part


@dataclass(frozen=True)
class IsingModel:
    """Pairwise spin model; stored weight w on (i, j) contributes w*s_i*s_j."""

    n_spins: int
    couplings: dict[tuple[int, int], float]
    fields: np.ndarray
    ledger: ConstantLedger
    M: float

    def __post_init__(self):
        f = np.asarray(self.fields, dtype=float)
        if f.shape != (self.n_spins,):
            raise ValueError(f"fields have shape {f.shape}, expected ({self.n_spins},)")
        f.setflags(write=False)
        object.__setattr__(self, "fields", f)
        for (i, j), w in self.couplings.items():
            if not (0 <= i < j < self.n_spins):
                raise ValueError(f"coupling key ({i}, {j}) not strictly upper-triangular")
            if w == 0.0:
                raise ValueError(f"explicit zero coupling stored at ({i}, {j})")

    @property
    def constant(self) -> float:
        return self.ledger.total


def sigma_of_x(x: np.ndarray) -> np.ndarray:
    """Map binary values {0,1} to spins {-1,+1}."""
    x = np.asarray(x)
    if x.size and not np.isin(x, (0, 1)).all():
        raise ValueError("binary vector entries must be 0 or 1")
    return 2 * x.astype(int) - 1


def x_of_sigma(sigma: np.ndarray) -> np.ndarray:
    """Map spins {-1,+1} to binary values {0,1}."""
    sigma = np.asarray(sigma)
    if sigma.size and not np.isin(sigma, (-1, 1)).all():
        raise ValueError("spin entries must be -1 or +1")
    return (sigma.astype(int) + 1) // 2


def energy(model: IsingModel, sigma: np.ndarray) -> float:
    """Energy of a spin configuration, constant included."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (model.n_spins,):
        raise ValueError(f"sigma has shape {sigma.shape}, expected ({model.n_spins},)")
    if sigma.size and not np.isin(sigma, (-1.0, 1.0)).all():
        raise ValueError("spin entries must be -1 or +1")
    e = model.constant + float(model.fields @ sigma)
    for (i, j), w in model.couplings.items():
        e += w * sigma[i] * sigma[j]
    return e


def many_body_count(model: IsingModel) -> int:
    """Number of stored nonzero pairwise couplings."""
    return len(model.couplings)


def _encode_arrays(
    A: np.ndarray, b: np.ndarray, c: np.ndarray, M: float, objective_part: float
) -> IsingModel:
    n = A.shape[1]
    G = A.T @ A
    g = A.T @ b
    h = c - 2.0 * M * g + M * (G @ np.ones(n))
    fields = 0.5 * h
    transform = (
        0.25 * M * float(G.sum())
        + 0.5 * float(c.sum())
        - M * float(g.sum())
        + M * float(b @ b)
        + 0.25 * M * float(np.trace(G))
    )
    drop = COUPLING_DROP_TOL * M
    couplings: dict[tuple[int, int], float] = {}
    for i in range(n):
        row = G[i]
        for j in range(i + 1, n):
            w = 0.5 * M * float(row[j])
            if abs(w) > drop:
                couplings[(i, j)] = w
    return IsingModel(
        n_spins=n,
        couplings=couplings,
        fields=fields,
        ledger=ConstantLedger(transform_part=transform, objective_part=objective_part),
        M=M,
    )


def encode(instance: BlpInstance, M: float) -> IsingModel:
    """Encode the penalized instance; energies match penalized costs exactly."""
    if not M > 0:
        raise ValueError("penalty M must be positive")
    return _encode_arrays(instance.A, instance.b, instance.c, M, objective_part=0.0)


@dataclass(frozen=True)
class ReducedProblem:
    """Subproblem after removing fixed columns.

    ``index_map[i]`` is the original variable index of reduced variable i.
    The model energy of any completion of the free variables equals the
    penalized master cost of the merged full assignment.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    model: IsingModel
    index_map: np.ndarray
    fixings: dict[int, int]

    @property
    def n_free(self) -> int:
        return self.A.shape[1]

    def merge(self, x_free: np.ndarray) -> np.ndarray:
        """Full assignment from fixed values plus a free-variable completion."""
        x_free = np.asarray(x_free)
        n = len(self.fixings) + self.n_free
        full = np.zeros(n, dtype=float)
        for idx, val in self.fixings.items():
            full[idx] = val
        full[self.index_map] = x_free
        return full


def reduce(
    instance: BlpInstance,
    M: float,
    fixings: dict[int, int],
    objective_base: float = 0.0,
) -> ReducedProblem:
    """Remove fixed columns, fold their contribution into b and the ledger.

    b_new = b - sum_k A[:, k] x_k over fixed k; A and c lose the fixed
    columns; the fixed objective sum_k c_k x_k accumulates on top of
    ``objective_base`` in the ledger's objective part.
    """
    if not M > 0:
        raise ValueError("penalty M must be positive")
    n = instance.n
    fixed = {}
    for idx, val in fixings.items():
        if not 0 <= idx < n:
            raise ValueError(f"fixed index {idx} out of range")
        if val not in (0, 1):
            raise ValueError(f"fixed value for x_{idx} must be 0 or 1")
        fixed[idx] = int(val)

    free = np.array([i for i in range(n) if i not in fixed], dtype=int)
    x_fixed = np.zeros(n)
    for idx, val in fixed.items():
        x_fixed[idx] = val
    b_new = instance.b - instance.A @ x_fixed
    A_new = instance.A[:, free]
    c_new = instance.c[free]
    objective = objective_base + float(instance.c @ x_fixed)
    model = _encode_arrays(A_new, b_new, c_new, M, objective_part=objective)
    return ReducedProblem(
        A=A_new, b=b_new, c=c_new, model=model, index_map=free, fixings=fixed
    )
