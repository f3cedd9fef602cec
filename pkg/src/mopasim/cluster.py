"""Continuous-variable cluster states built from squeezed spatial modes.

Node quadratures follow from the squeezed ones by the orthogonal map
U = [[a, -b], [b, a]] with a = (1 + A^2)^{-1/2} and b = A a.  The nullifier
delta_i = (P_i - sum_j A_ij X_j) / sqrt(1 + h_i) then depends on p-quadratures
only, with coefficients c = a + A b = (1 + A^2)^{1/2}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import PhysicsError
from .grids import ModeFunction2D, superpose

CANCEL_TOL = 1e-10


def _validate_adjacency(A) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 2:
        raise ValueError("adjacency must be a square matrix with at least two nodes")
    if not np.all((A == 0) | (A == 1)):
        raise ValueError("adjacency entries must be 0 or 1")
    if not np.array_equal(A, A.T):
        raise ValueError("adjacency must be symmetric")
    if np.any(np.diag(A) != 0):
        raise ValueError("adjacency must have a zero diagonal")
    return A.astype(float)


@dataclass(frozen=True, eq=False)
class ClusterTopology:
    adjacency: np.ndarray
    node_mode_map: tuple = ()
    name: str = ""

    def __post_init__(self):
        A = _validate_adjacency(self.adjacency)
        A.flags.writeable = False
        object.__setattr__(self, "adjacency", A)
        nm = tuple(tuple(m) for m in self.node_mode_map)
        if nm and len(nm) != A.shape[0]:
            raise ValueError("node_mode_map must list one mode per node")
        object.__setattr__(self, "node_mode_map", nm)

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def neighbors(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @classmethod
    def from_edges(cls, n_nodes: int, edges: Sequence[tuple[int, int]], node_mode_map=(), name=""):
        A = np.zeros((n_nodes, n_nodes), dtype=int)
        for i, j in edges:
            if i == j:
                raise ValueError("self-loops are not allowed")
            A[i, j] = A[j, i] = 1
        return cls(A, node_mode_map, name)

    def permuted(self, perm: Sequence[int]) -> "ClusterTopology":
        p = np.asarray(perm)
        nm = tuple(self.node_mode_map[i] for i in p) if self.node_mode_map else ()
        return ClusterTopology(self.adjacency[np.ix_(p, p)], nm, self.name)


def _sym_function(M: np.ndarray, fn) -> np.ndarray:
    vals, vecs = np.linalg.eigh(M)
    return (vecs * fn(vals)) @ vecs.T


def transform_matrices(A) -> tuple[np.ndarray, np.ndarray]:
    """a = (1 + A^2)^{-1/2}, b = A a, via eigendecomposition of the SPD 1 + A^2."""
    A = _validate_adjacency(A)
    M = np.eye(len(A)) + A @ A
    a = _sym_function(M, lambda v: v**-0.5)
    a = 0.5 * (a + a.T)
    b = A @ a
    b = 0.5 * (b + b.T)  # A commutes with (1 + A^2)^{-1/2}, so A a is symmetric
    return a, b


def quadrature_unitary(A) -> np.ndarray:
    a, b = transform_matrices(A)
    return np.block([[a, -b], [b, a]])


def node_quadratures(A, squeezed_quadratures) -> np.ndarray:
    """Q = U q with q = (x_1..x_n, p_1..p_n) along axis 0."""
    U = quadrature_unitary(A)
    q = np.asarray(squeezed_quadratures)
    if q.shape[0] != U.shape[0]:
        raise ValueError(f"expected {U.shape[0]} quadratures, got {q.shape[0]}")
    return U @ q


def nullifier_coefficients(A) -> tuple[np.ndarray, np.ndarray]:
    """(x, p) coefficient rows of the normalized nullifiers in squeezed quadratures.

    Raises PhysicsError if the x-contribution does not cancel.
    """
    A = _validate_adjacency(A)
    a, b = transform_matrices(A)
    norm = 1.0 / np.sqrt(1.0 + A.sum(axis=1))[:, None]
    cx = (b - A @ a) * norm
    cp = (a + A @ b) * norm
    if np.abs(cx).max() > CANCEL_TOL:
        raise PhysicsError(
            f"nullifier x-quadrature terms do not cancel (max {np.abs(cx).max():.2e}) for this topology"
        )
    return cx, cp


@dataclass(frozen=True)
class NullifierSet:
    weights: np.ndarray
    neighbors: np.ndarray
    variances: np.ndarray
    weight_sums: np.ndarray = field(repr=False, default=None)

    @property
    def variances_db(self) -> np.ndarray:
        return 10 * np.log10(self.variances)


def nullifier_weights(A) -> np.ndarray:
    """w_ij such that Var(delta_i) = sum_j w_ij Var(p_j) for independent squeezed modes."""
    _, cp = nullifier_coefficients(A)
    return cp**2


def nullifier_variances(topology: ClusterTopology, p_variances) -> NullifierSet:
    """Nullifier variances in shot-noise units from per-node p-variances."""
    v = np.asarray(p_variances, dtype=float)
    if v.shape != (topology.n_nodes,):
        raise ValueError(f"need {topology.n_nodes} p-variances")
    if np.any(v <= 0):
        raise ValueError("p-variances must be positive")
    w = nullifier_weights(topology.adjacency)
    sums = w.sum(axis=1)
    if np.any(w < -1e-15) or np.abs(sums - 1).max() > 1e-9:
        raise PhysicsError(f"nullifier weights are not convex: row sums {sums}")
    return NullifierSet(w, topology.neighbors, w @ v, sums)


def two_node_witness(var1, var2, threshold: float = 2.0):
    """W = Var(delta_1) + Var(delta_2) and whether it falls below ``threshold``."""
    W = np.asarray(var1, dtype=float) + np.asarray(var2, dtype=float)
    flag = W < threshold
    if W.ndim == 0:
        return float(W), bool(flag)
    return W, flag


def _resolve(modes: Mapping, ids) -> list[ModeFunction2D]:
    out = []
    for mid in ids:
        if tuple(mid) not in modes:
            raise KeyError(f"mode {tuple(mid)} not available")
        out.append(modes[tuple(mid)])
    return out


def node_mode_shapes(topology: ClusterTopology, modes: Mapping) -> list[ModeFunction2D]:
    """Cluster node modes v_k = sum_j (a - i b)_kj u_j."""
    basis = _resolve(modes, topology.node_mode_map)
    a, b = transform_matrices(topology.adjacency)
    coeff = a - 1j * b
    return [superpose(basis, coeff[k]) for k in range(topology.n_nodes)]


def nullifier_mode_shapes(topology: ClusterTopology, modes: Mapping) -> list[ModeFunction2D]:
    """Spatial modes whose p-quadrature is the normalized nullifier of each node."""
    basis = _resolve(modes, topology.node_mode_map)
    _, cp = nullifier_coefficients(topology.adjacency)
    return [superpose(basis, cp[i]) for i in range(topology.n_nodes)]


A2 = np.array([[0, 1], [1, 0]])
A3 = np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]])
A4 = np.array([[0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0]])
A5 = np.array(
    [
        [0, 1, 1, 1, 1],
        [1, 0, 1, 0, 1],
        [1, 1, 0, 1, 0],
        [1, 0, 1, 0, 1],
        [1, 1, 0, 1, 0],
    ]
)

PRESETS = {
    "three-node": ClusterTopology(A3, ((0, 0), (0, 1), (1, 0)), "three-node"),
    "four-node": ClusterTopology(A4, ((0, 0), (0, 1), (1, 0), (1, 1)), "four-node"),
    "five-node": ClusterTopology(A5, ((0, 0), (0, 1), (1, 0), (1, 1), (0, 2)), "five-node"),
}

TWO_NODE_PRESETS = {
    "lg-01-10": ClusterTopology(A2, ((0, 1), (1, 0)), "lg-01-10"),
    "11-00": ClusterTopology(A2, ((1, 1), (0, 0)), "11-00"),
    "22-11": ClusterTopology(A2, ((2, 2), (1, 1)), "22-11"),
}


def parse_edge_list(text: str) -> list[tuple[int, int]]:
    """One 'i j' pair per line; blank lines and '#' comments ignored."""
    edges = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"bad edge line: {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return edges
