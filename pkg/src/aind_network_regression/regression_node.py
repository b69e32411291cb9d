"""
The regression instance of the in-network Douglas-Rachford method. Each
directed edge carries z_ij = (a_ij, b_ij) with a_ij in R^n (a share of the
node's residual offset alpha_i) and b_ij in R^p (a copy of beta). The edge
cost forces a_ij = -a_ji and b_ij = b_ji = beta and charges f(beta); the node
cost is the indicator of ||X_i beta - y_i + sum_j a_ij|| <= eps / m.

Per-neighbor quantities are passed as 2D arrays with one row per neighbor,
in ascending neighbor order.
"""

import logging
from typing import Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from aind_network_regression.datasplit import DataSummand
from aind_network_regression.dr_framework import CostOracle
from aind_network_regression.proxlib import Regularizer, f_lambda
from aind_network_regression.residual_ball import ResidualBallProjector
from aind_network_regression.topology import Edge, Network

logger = logging.getLogger(__name__)


class NodeSolution(NamedTuple):
    """Minimizer of a node subproblem."""

    a_hat: np.ndarray
    beta: np.ndarray
    alpha: np.ndarray


class NodeLocal:
    """
    Private state of one agent: its data summand, the shared constants and
    its latest estimates.
    """

    def __init__(
        self,
        summand: DataSummand,
        m: int,
        eps: float,
        neighbors: Tuple[int, ...],
    ):
        """
        Parameters
        ----------
        summand : DataSummand
          The agent's (X_i, y_i).
        m : int
          Number of agents in the network.
        eps : float
          Residual bound of the global problem; the node radius is eps / m.
        neighbors : Tuple[int, ...]
          Neighbor labels in ascending order.
        """
        if not eps > 0:
            raise ValueError(f"eps must be positive, got {eps}")
        if len(neighbors) < 1:
            raise ValueError(f"Agent {summand.agent} has no neighbors")
        self.node = summand.agent
        self.summand = summand
        self.m = m
        self.eps = eps
        self.radius = eps / m
        self.neighbors = tuple(neighbors)
        self.projector = ResidualBallProjector(summand.X, summand.y)
        self.beta_hat = np.zeros(self.p)
        self.alpha_hat = np.zeros(self.n)

    @property
    def n(self) -> int:
        """Number of examples."""
        return self.summand.X.shape[0]

    @property
    def p(self) -> int:
        """Number of features."""
        return self.summand.X.shape[1]

    @property
    def degree(self) -> int:
        """Number of neighbors."""
        return len(self.neighbors)

    def project(self, va: np.ndarray, vb: np.ndarray) -> NodeSolution:
        """
        Projection onto the node constraint set: minimize
        sum_j ||a_j - va_j||^2 + ||beta - vb_j||^2 subject to
        ||X_i beta - y_i + sum_j a_j|| <= eps / m.

        For fixed alpha = sum_j a_j the best shares are
        a_j = va_j + (alpha - c) / d with c = sum_j va_j, which leaves the
        weighted projection of (mean_j vb_j, c) with weights (d, 1/d).
        """
        d = self.degree
        c = va.sum(axis=0)
        target = vb.mean(axis=0)
        projection = self.projector.project(
            target,
            self.radius,
            alpha0=c,
            weight_alpha=1.0 / d,
            weight_beta=float(d),
        )
        a_hat = va + (projection.alpha - c) / d
        return NodeSolution(a_hat, projection.beta, projection.alpha)


def edge_prox_regression(
    f: Regularizer,
    lam: float,
    a_ij: np.ndarray,
    b_ij: np.ndarray,
    a_ji: np.ndarray,
    b_ji: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Closed-form prox of lam * g_ij: antisymmetrize the a part and average
    then shrink the b part.

    Returns
    -------
    Tuple
      (a~_ij, b~_ij, a~_ji, b~_ji) with a~_ji = -a~_ij and
      b~_ij = b~_ji = F_lam(b_ij + b_ji) / 2.

    """
    a_tilde = (a_ij - a_ji) / 2.0
    b_tilde = 0.5 * f_lambda(f, lam, b_ij + b_ji)
    return a_tilde, b_tilde, -a_tilde, b_tilde.copy()


def shrunk_sums(
    f: Regularizer, lam: float, b_out: np.ndarray, b_in: np.ndarray
) -> np.ndarray:
    """F_lam(b_ij + b_ji) for each neighbor row."""
    return np.vstack(
        [f_lambda(f, lam, b_out[row] + b_in[row]) for row in range(len(b_out))]
    )


def node_subproblem(
    local: NodeLocal,
    a_in: np.ndarray,
    b_out: np.ndarray,
    b_in: np.ndarray,
    f: Regularizer,
    lam: float,
    shrunk: Optional[np.ndarray] = None,
) -> NodeSolution:
    """
    Solve the node step of the regression algorithm: find shares (a_ij)
    adding up to alpha_i and beta minimizing

        sum_j ||a_ij + a_ji||^2 + ||beta + b_ij - F_lam(b_ij + b_ji)||^2

    subject to ||X_i beta - y_i + alpha_i|| <= eps / m. The estimates stored
    on ``local`` are updated.

    Parameters
    ----------
    local : NodeLocal
    a_in : np.ndarray
      a_ji from each neighbor, degree x n.
    b_out : np.ndarray
      The node's own b_ij, degree x p.
    b_in : np.ndarray
      b_ji from each neighbor, degree x p.
    f : Regularizer
    lam : float
    shrunk : Optional[np.ndarray]
      Precomputed F_lam(b_ij + b_ji), degree x p.

    Returns
    -------
    NodeSolution

    """
    if shrunk is None:
        shrunk = shrunk_sums(f, lam, b_out, b_in)
    solution = local.project(-a_in, shrunk - b_out)
    local.beta_hat = solution.beta
    local.alpha_hat = solution.alpha
    return solution


def dr_update_regression(
    rho: float,
    a_out: np.ndarray,
    a_in: np.ndarray,
    b_out: np.ndarray,
    shrunk: np.ndarray,
    a_hat: np.ndarray,
    beta_hat: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Relaxed update of a node's edge variables:

        a_ij <- a_ij - (rho/2)(a_ij - a_ji) + rho a^_ij
        b_ij <- b_ij - (rho/2) F_lam(b_ij + b_ji) + rho beta^
    """
    if not 0 < rho < 2:
        raise ValueError(f"rho must lie in (0, 2), got {rho}")
    a_next = a_out - (rho / 2.0) * (a_out - a_in) + rho * a_hat
    b_next = b_out - (rho / 2.0) * shrunk + rho * beta_hat
    return a_next, b_next


class RegressionOracle(CostOracle):
    """Edge and node proxes of the regression problem for dr_framework."""

    def __init__(
        self,
        locals_: Dict[int, NodeLocal],
        f: Regularizer,
        net: Network,
    ):
        """
        Parameters
        ----------
        locals_ : Dict[int, NodeLocal]
          Node state keyed by agent label.
        f : Regularizer
        net : Network
        """
        self.locals = locals_
        self.f = f
        self.net = net
        self.n = next(iter(locals_.values())).n
        self.p = next(iter(locals_.values())).p

    @property
    def dimension(self) -> int:
        """n + p"""
        return self.n + self.p

    def edge_prox(
        self, edge: Edge, lam: float, z_ij: np.ndarray, z_ji: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Split (a, b), apply the closed form and reassemble."""
        n = self.n
        a_ij, b_ij, a_ji, b_ji = edge_prox_regression(
            self.f, lam, z_ij[:n], z_ij[n:], z_ji[:n], z_ji[n:]
        )
        return np.concatenate([a_ij, b_ij]), np.concatenate([a_ji, b_ji])

    def node_prox(self, node: int, lam: float, v: np.ndarray) -> np.ndarray:
        """
        Projection onto the node constraint set; independent of lam since
        the node cost is an indicator.
        """
        local = self.locals[node]
        solution = local.project(v[:, : self.n], v[:, self.n :])
        local.beta_hat = solution.beta
        local.alpha_hat = solution.alpha
        betas = np.broadcast_to(solution.beta, (local.degree, self.p))
        return np.hstack([solution.a_hat, betas])


def build_node_locals(
    net: Network, summands: Sequence[DataSummand], eps: float
) -> Dict[int, NodeLocal]:
    """One NodeLocal per agent, keyed by label."""
    by_agent = {summand.agent: summand for summand in summands}
    if sorted(by_agent) != list(net.nodes):
        raise ValueError(
            f"Summands for agents {sorted(by_agent)} do not match nodes "
            f"1..{net.m}"
        )
    return {
        i: NodeLocal(by_agent[i], net.m, eps, net.neighbors(i))
        for i in net.nodes
    }


def build_regression_oracle(
    locals_: Dict[int, NodeLocal], f: Regularizer, net: Network
) -> RegressionOracle:
    """
    Package the regression proxes as a CostOracle.

    Raises
    ------
    ValueError
      If the node states disagree on shapes or do not match the network.

    """
    if sorted(locals_) != list(net.nodes):
        raise ValueError(
            f"Node states for {sorted(locals_)} do not match nodes "
            f"1..{net.m}"
        )
    shapes = {local.summand.X.shape for local in locals_.values()}
    if len(shapes) != 1:
        raise ValueError(f"Summands have inconsistent shapes {shapes}")
    for i, local in locals_.items():
        if local.neighbors != net.neighbors(i):
            raise ValueError(f"Node {i} disagrees with the network's edges")
    return RegressionOracle(locals_, f, net)
