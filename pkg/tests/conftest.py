"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from scipy.linalg import expm

from qcbb.blp import BlpInstance
from qcbb.bound import WeightedGraph
from qcbb.ising import ConstantLedger, IsingModel
from qcbb.vqa import QaoaParams


@pytest.fixture
def three_var_instance() -> BlpInstance:
    # optimum 1 at x = (0, 1, 0)
    return BlpInstance(c=[1.0, 1.0, 1.0], A=[[1, 1, 0], [0, 1, 1]], b=[1, 1])


def random_model(
    rng: np.random.Generator,
    n_min: int = 2,
    n_max: int = 10,
    density: float = 0.6,
    field_density: float = 0.7,
) -> IsingModel:
    """Random mixed-sign pairwise model."""
    n = int(rng.integers(n_min, n_max + 1))
    couplings = {}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                w = float(rng.normal())
                if w != 0.0:
                    couplings[(i, j)] = w
    fields = rng.normal(size=n) * (rng.random(size=n) < field_density)
    return IsingModel(
        n_spins=n, couplings=couplings, fields=fields, ledger=ConstantLedger(), M=1.0
    )


def exhaustive_energies(model: IsingModel) -> np.ndarray:
    """Energy table computed from scratch (independent of the library paths).

    Index z holds the energy of the configuration whose spin i is +1 iff bit
    i of z is set.
    """
    n = model.n_spins
    z = np.arange(1 << n, dtype=np.int64)
    spins = 2.0 * ((z[:, None] >> np.arange(n)) & 1) - 1.0
    table = np.full(1 << n, model.constant)
    table += spins @ model.fields
    for (i, j), w in model.couplings.items():
        table += w * spins[:, i] * spins[:, j]
    return table


def exhaustive_min_energy(model: IsingModel) -> float:
    return float(exhaustive_energies(model).min())


def exhaustive_max_cut(graph: WeightedGraph) -> float:
    """Maximum cut by enumerating bipartitions with vertex 0 pinned."""
    best = 0.0
    rest = graph.n_vertices - 1
    for bits in itertools.product((1, -1), repeat=rest):
        side = np.array((1,) + bits)
        best = max(best, graph.cut_value(side))
    return best


def dense_qaoa_expectation(diag: np.ndarray, params: QaoaParams) -> float:
    """Reference expectation via explicit matrix exponentials.

    Builds the mixer exp(-i beta sum_i X_i) as a dense operator with numpy
    kron products (variable i on bit i, LSB-first) and applies dense
    matrix-vector products layer by layer.
    """
    size = diag.size
    n = int(size).bit_length() - 1
    pauli_x = np.array([[0.0, 1.0], [1.0, 0.0]])
    x_sum = np.zeros((size, size))
    for i in range(n):
        op = np.kron(
            np.eye(1 << (n - 1 - i)), np.kron(pauli_x, np.eye(1 << i))
        )
        x_sum += op
    psi = np.full(size, 1.0 / np.sqrt(size), dtype=complex)
    for gamma, beta in zip(params.gammas, params.betas):
        psi = np.exp(-1j * gamma * diag) * psi
        psi = expm(-1j * beta * x_sum) @ psi
    return float(np.real(np.vdot(psi, diag * psi)))


def random_dense_instance(rng: np.random.Generator, n_max: int = 8) -> BlpInstance:
    """Mixed-sign dense instance (not set-partitioning shaped)."""
    n = int(rng.integers(2, n_max + 1))
    m = int(rng.integers(1, max(2, n // 2) + 1))
    A = np.round(rng.normal(size=(m, n)) * 2.0, 1)
    A[np.abs(A) < 0.2] = 1.0  # keep rows active
    b = np.round(rng.normal(size=m) * 2.0, 1)
    c = np.round(rng.normal(size=n) * 5.0, 1)
    return BlpInstance(c=c, A=A, b=b)


def odd_cycle_instance(
    extra_rows: int = 0, rng: np.random.Generator | None = None
) -> BlpInstance:
    """Infeasible 3-cycle core (x_i + x_j = 1 around a triangle) plus
    optional disjoint satisfiable rows; propagation alone cannot refute the
    cycle, the bound has to."""
    if rng is None:
        rng = np.random.default_rng(0)
    n = 3 + 2 * extra_rows
    m = 3 + extra_rows
    A = np.zeros((m, n))
    A[0, 0] = A[0, 1] = 1.0
    A[1, 1] = A[1, 2] = 1.0
    A[2, 0] = A[2, 2] = 1.0
    for k in range(extra_rows):
        A[3 + k, 3 + 2 * k] = 1.0
        A[3 + k, 4 + 2 * k] = 1.0
    c = rng.integers(1, 10, size=n).astype(float)
    return BlpInstance(c=c, A=A, b=np.ones(m))
