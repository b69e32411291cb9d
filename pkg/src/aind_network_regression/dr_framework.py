"""
Generic in-network Douglas-Rachford splitting over node costs g_i and edge
costs g_ij. The global variable z is kept in its edge partition, one vector
z_ij per directed edge, and regrouped into node variables z_i (rows ordered
by ascending neighbor label) when a node prox is applied.
"""

import logging
from abc import ABC, abstractmethod
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from aind_network_regression.topology import Edge, Network

logger = logging.getLogger(__name__)

EdgeState = Dict[Edge, np.ndarray]


class CostOracle(ABC):
    """
    Access to the costs of a network problem through their proximal
    operators only. A node prox sees nothing but its own node variable.
    """

    @property
    @abstractmethod
    def dimension(self) -> int:
        """Dimension of every per-edge vector z_ij."""

    @abstractmethod
    def edge_prox(
        self, edge: Edge, lam: float, z_ij: np.ndarray, z_ji: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        """prox of lam * g_ij at (z_ij, z_ji), for the edge (i, j), i < j."""

    @abstractmethod
    def node_prox(self, node: int, lam: float, v: np.ndarray) -> np.ndarray:
        """
        prox of lam * g_i at v, where v stacks one row per neighbor of the
        node in ascending label order.
        """


class DRResult(NamedTuple):
    """Outcome of a Douglas-Rachford run."""

    iterates: List[Dict[int, np.ndarray]]
    state: EdgeState
    step_norms: List[float]
    iterations: int
    converged: bool


def check_parameters(lam: float, rho: float) -> None:
    """lam > 0 and 0 < rho < 2."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if not 0 < rho < 2:
        raise ValueError(f"rho must lie in (0, 2), got {rho}")


def init_state(
    net: Network, dim: int, rng_seed: Optional[int] = None
) -> EdgeState:
    """
    Initial edge state: all zeros, or standard normal entries drawn from a
    seeded generator in directed-edge order.
    """
    rng = None if rng_seed is None else np.random.default_rng(rng_seed)
    state = {}
    for edge in net.directed_edges:
        state[edge] = (
            np.zeros(dim) if rng is None else rng.standard_normal(dim)
        )
    return state


def node_vector(state: EdgeState, net: Network, node: int) -> np.ndarray:
    """Node variable z_i = (z_ij) over neighbors j, one row each."""
    return np.vstack([state[(node, j)] for j in net.neighbors(node)])


def state_norm(state: EdgeState) -> float:
    """Euclidean norm of the full edge state."""
    return float(np.sqrt(sum(np.dot(z, z) for z in state.values())))


def check_state(net: Network, oracle: CostOracle, state: EdgeState) -> None:
    """The state holds one vector of the oracle's dimension per direction."""
    expected = set(net.directed_edges)
    if set(state) != expected:
        missing = sorted(expected - set(state))
        extra = sorted(set(state) - expected)
        raise ValueError(
            f"State does not match the network: missing {missing}, "
            f"extra {extra}"
        )
    for edge, z in state.items():
        if np.shape(z) != (oracle.dimension,):
            raise ValueError(
                f"z_{edge} has shape {np.shape(z)}, expected "
                f"({oracle.dimension},)"
            )


def dr_round(
    net: Network,
    oracle: CostOracle,
    lam: float,
    rho: float,
    state: EdgeState,
) -> Tuple[EdgeState, Dict[int, np.ndarray]]:
    """
    One synchronous round at every node:

    1. gather z_ji from each neighbor;
    2. (z~_ij, z~_ji) = prox_{lam g_ij}(z_ij, z_ji), once per edge;
    3. z^_i = prox_{lam g_i}(2 z~_i - z_i);
    4. z_i <- z_i + rho (z^_i - z~_i).

    Parameters
    ----------
    net : Network
    oracle : CostOracle
    lam : float
      Positive prox scale.
    rho : float
      Relaxation in (0, 2).
    state : EdgeState
      z at iteration k, one vector per directed edge. Not modified.

    Returns
    -------
    Tuple[EdgeState, Dict[int, np.ndarray]]
      z at iteration k+1 and the node iterates z^_{i,k+1}.

    """
    check_parameters(lam, rho)
    check_state(net, oracle, state)

    tilde: EdgeState = {}
    for i, j in net.edges:
        tilde[(i, j)], tilde[(j, i)] = oracle.edge_prox(
            (i, j), lam, state[(i, j)], state[(j, i)]
        )

    new_state: EdgeState = {}
    hats = {}
    for i in net.nodes:
        z_i = node_vector(state, net, i)
        tilde_i = node_vector(tilde, net, i)
        hats[i] = oracle.node_prox(i, lam, 2.0 * tilde_i - z_i)
        updated = z_i + rho * (hats[i] - tilde_i)
        for row, j in enumerate(net.neighbors(i)):
            new_state[(i, j)] = updated[row]
    return new_state, hats


def run(
    net: Network,
    oracle: CostOracle,
    lam: float,
    rho: float,
    init: EdgeState,
    max_iter: int,
    stop_tol: float = 0.0,
) -> DRResult:
    """
    Iterate dr_round until max_iter rounds or until
    ||z_{k+1} - z_k|| <= stop_tol * (1 + ||z_k||).

    Returns
    -------
    DRResult
      Node iterates of every round, the final state, the step norms and
      whether the stopping rule fired.

    """
    if max_iter < 1:
        raise ValueError(f"max_iter must be at least 1, got {max_iter}")
    if stop_tol < 0:
        raise ValueError(f"stop_tol must be nonnegative, got {stop_tol}")
    state = {edge: np.array(z, dtype=float) for edge, z in init.items()}
    iterates = []
    step_norms = []
    converged = False
    for k in range(1, max_iter + 1):
        new_state, hats = dr_round(net, oracle, lam, rho, state)
        step = state_norm(
            {edge: new_state[edge] - state[edge] for edge in state}
        )
        iterates.append(hats)
        step_norms.append(step)
        threshold = stop_tol * (1.0 + state_norm(state))
        state = new_state
        if step <= threshold:
            converged = True
            break
    logger.debug(
        f"Douglas-Rachford stopped after {k} rounds, last step {step:.3e}"
    )
    return DRResult(iterates, state, step_norms, k, converged)
