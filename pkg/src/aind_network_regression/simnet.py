"""
Synchronous message-passing simulation of the regression algorithm. Agents
keep their data summands private and only ever send their edge variables
(a_ij, b_ij) to neighbors; every message goes through a ledger that can be
audited afterwards. Metrics needing the global data are computed by the
harness, outside the agents.
"""

import csv
import itertools
import logging
from collections import Counter
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from aind_network_regression.central_oracle import CentralSolution
from aind_network_regression.datasplit import DataSummand
from aind_network_regression.dr_framework import check_parameters
from aind_network_regression.proxlib import Regularizer
from aind_network_regression.regression_node import (
    NodeLocal,
    build_node_locals,
    dr_update_regression,
    node_subproblem,
    shrunk_sums,
)
from aind_network_regression.topology import Network

logger = logging.getLogger(__name__)

TRACE_HEADER = [
    "iter",
    "rel_error",
    "consensus_gap",
    "feasibility_gap",
    "step_norm",
]


class Message(BaseModel):
    """Edge variables (a_ij, b_ij) sent from one agent to a neighbor."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    round: int = Field(ge=0)
    sender: int
    receiver: int
    payload_size: int = Field(ge=0)
    payload: Optional[np.ndarray] = Field(
        default=None,
        description=(
            "Concatenated (a_ij, b_ij). None for messages read back from a "
            "ledger file."
        ),
    )

    @model_validator(mode="after")
    def check_payload_size(self) -> "Message":
        """payload_size agrees with the payload when one is kept."""
        if self.payload is not None and self.payload.size != self.payload_size:
            raise ValueError(
                f"payload has {self.payload.size} entries, "
                f"payload_size says {self.payload_size}"
            )
        return self


class LedgerAudit(BaseModel):
    """Outcome of a ledger audit."""

    violations: List[str] = Field(default_factory=list)
    message_count: int
    expected_count: int
    rounds: int

    @property
    def ok(self) -> bool:
        """True when no violations were found."""
        return not self.violations


class RunTrace(BaseModel):
    """Per-iteration metrics recorded by the harness."""

    iterations: List[int] = Field(default_factory=list)
    rel_error: List[float] = Field(default_factory=list)
    consensus_gap: List[float] = Field(default_factory=list)
    feasibility_gap: List[float] = Field(default_factory=list)
    step_norm: List[float] = Field(default_factory=list)
    relative: bool = Field(
        default=True,
        description=(
            "False when the reference estimate is zero and rel_error holds "
            "absolute errors instead."
        ),
    )

    def append(
        self,
        k: int,
        rel_error: float,
        consensus_gap: float,
        feasibility_gap: float,
        step_norm: float,
    ) -> None:
        """Record one iteration."""
        self.iterations.append(k)
        self.rel_error.append(rel_error)
        self.consensus_gap.append(consensus_gap)
        self.feasibility_gap.append(feasibility_gap)
        self.step_norm.append(step_norm)

    def rows(self) -> List[Tuple[int, float, float, float, float]]:
        """One tuple per recorded iteration, in CSV column order."""
        return list(
            zip(
                self.iterations,
                self.rel_error,
                self.consensus_gap,
                self.feasibility_gap,
                self.step_norm,
            )
        )

    def to_csv(self, path: Union[str, Path]) -> None:
        """Write the trace with the iter,rel_error,... header."""
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(TRACE_HEADER)
            for k, *values in self.rows():
                writer.writerow([k] + [repr(float(v)) for v in values])


class SimulationResult(BaseModel):
    """Trace, final estimates and message ledger of a simulation."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    trace: RunTrace
    estimates: Dict[int, np.ndarray]
    ledger: List[Message]
    rounds: int
    converged: bool
    payload_size: int


class Agent:
    """
    One simulated agent. The data summand stays inside; the outside world
    sees only the outgoing messages and the current estimate.
    """

    def __init__(
        self,
        local: NodeLocal,
        a_init: np.ndarray,
        b_init: np.ndarray,
    ):
        """
        Parameters
        ----------
        local : NodeLocal
        a_init : np.ndarray
          Initial a_ij, degree x n.
        b_init : np.ndarray
          Initial b_ij, degree x p.
        """
        self._local = local
        self.label = local.node
        self.neighbors = local.neighbors
        self.a = np.array(a_init, dtype=float)
        self.b = np.array(b_init, dtype=float)

    @property
    def estimate(self) -> np.ndarray:
        """Current beta estimate."""
        return self._local.beta_hat

    def outbox(self, k: int) -> List[Message]:
        """Messages carrying (a_ij, b_ij) to every neighbor j."""
        messages = []
        for row, j in enumerate(self.neighbors):
            payload = np.concatenate([self.a[row], self.b[row]])
            messages.append(
                Message(
                    round=k,
                    sender=self.label,
                    receiver=j,
                    payload_size=payload.size,
                    payload=payload,
                )
            )
        return messages

    def step(
        self,
        inbox: Dict[int, Message],
        f: Regularizer,
        lam: float,
        rho: float,
    ) -> float:
        """
        Solve the node subproblem against the neighbors' variables and
        apply the relaxed update. Returns the squared change of the
        agent's edge variables.
        """
        n = self._local.n
        received = np.vstack([inbox[j].payload for j in self.neighbors])
        a_in, b_in = received[:, :n], received[:, n:]
        shrunk = shrunk_sums(f, lam, self.b, b_in)
        solution = node_subproblem(
            self._local, a_in, self.b, b_in, f, lam, shrunk=shrunk
        )
        a_next, b_next = dr_update_regression(
            rho, self.a, a_in, self.b, shrunk, solution.a_hat, solution.beta
        )
        change = float(
            np.sum((a_next - self.a) ** 2) + np.sum((b_next - self.b) ** 2)
        )
        self.a, self.b = a_next, b_next
        return change

    def state_norm_sq(self) -> float:
        """Squared norm of the agent's edge variables."""
        return float(np.sum(self.a**2) + np.sum(self.b**2))


class SimulatedNetwork:
    """Agents on a network exchanging messages in synchronous rounds."""

    def __init__(
        self,
        net: Network,
        summands: Sequence[DataSummand],
        f: Regularizer,
        eps: float,
        lam: float,
        rho: float,
        rng_seed: Optional[int] = None,
        keep_payloads: bool = False,
    ):
        """
        Parameters
        ----------
        net : Network
        summands : Sequence[DataSummand]
          One per agent 1..m.
        f : Regularizer
        eps : float
        lam : float
          Positive prox scale.
        rho : float
          Relaxation in (0, 2).
        rng_seed : Optional[int]
          None starts every edge variable at zero; otherwise standard
          normal initial values are drawn in agent order.
        keep_payloads : bool
          Keep each message's payload array in the ledger. Default is
          False, which records only the round, endpoints and size.
        """
        check_parameters(lam, rho)
        self.net = net
        self.f = f
        self.lam = lam
        self.rho = rho
        locals_ = build_node_locals(net, summands, eps)
        n, p = summands[0].X.shape
        self.payload_size = n + p
        rng = None if rng_seed is None else np.random.default_rng(rng_seed)
        self.agents: Dict[int, Agent] = {}
        for i in net.nodes:
            d = len(net.neighbors(i))
            if rng is None:
                a_init, b_init = np.zeros((d, n)), np.zeros((d, p))
            else:
                a_init = rng.standard_normal((d, n))
                b_init = rng.standard_normal((d, p))
            self.agents[i] = Agent(locals_[i], a_init, b_init)
        self.keep_payloads = keep_payloads
        self.ledger: List[Message] = []
        self.rounds = 0

    def state_norm(self) -> float:
        """Norm of all edge variables in the network."""
        return float(
            np.sqrt(sum(a.state_norm_sq() for a in self.agents.values()))
        )

    def run_round(self) -> float:
        """
        Exchange messages, then let every agent update. Returns the norm of
        the change of all edge variables.
        """
        k = self.rounds
        inboxes: Dict[int, Dict[int, Message]] = {
            i: {} for i in self.net.nodes
        }
        for agent in self.agents.values():
            for message in agent.outbox(k):
                if self.keep_payloads:
                    self.ledger.append(message)
                else:
                    self.ledger.append(
                        message.model_copy(update={"payload": None})
                    )
                inboxes[message.receiver][message.sender] = message
        change_sq = 0.0
        for i, agent in self.agents.items():
            change_sq += agent.step(inboxes[i], self.f, self.lam, self.rho)
        self.rounds += 1
        return float(np.sqrt(change_sq))

    def estimates(self) -> Dict[int, np.ndarray]:
        """Current estimate of every agent."""
        return {i: agent.estimate.copy() for i, agent in self.agents.items()}


def consensus_gap(estimates: Dict[int, np.ndarray]) -> float:
    """Largest pairwise distance between agents' estimates."""
    gap = 0.0
    for u, v in itertools.combinations(estimates.values(), 2):
        gap = max(gap, float(np.linalg.norm(u - v)))
    return gap


def simulate(
    net: Network,
    summands: Sequence[DataSummand],
    f: Regularizer,
    eps: float,
    lam: float,
    rho: float,
    max_iter: int,
    reference: CentralSolution,
    probe_agent: int = 1,
    rng_seed: Optional[int] = None,
    stop_tol: float = 0.0,
    stride: int = 1,
    keep_payloads: bool = False,
) -> SimulationResult:
    """
    Run the regression algorithm on simulated agents and record metrics.

    Parameters
    ----------
    net : Network
    summands : Sequence[DataSummand]
      One per agent.
    f : Regularizer
    eps : float
      Global residual bound.
    lam : float
    rho : float
    max_iter : int
      Maximum number of rounds.
    reference : CentralSolution
      Centralized estimate used for the relative error.
    probe_agent : int
      Agent whose relative error is traced. Default is 1.
    rng_seed : Optional[int]
      Initialization seed, None for all-zero initial variables.
    stop_tol : float
      Stop once the step norm is at most stop_tol * (1 + state norm).
      Default is 0, which only stops at an exact fixed point.
    stride : int
      Record iterations 1, 1 + stride, 1 + 2 stride, ... Default is 1.
    keep_payloads : bool
      Keep payload arrays in the returned ledger so audit_ledger can check
      them for aliasing. Default is False.

    Returns
    -------
    SimulationResult

    """
    if max_iter < 1:
        raise ValueError(f"max_iter must be at least 1, got {max_iter}")
    if stride < 1:
        raise ValueError(f"stride must be at least 1, got {stride}")
    if probe_agent not in net.nodes:
        raise ValueError(f"probe agent {probe_agent} is not in the network")
    if len(summands) != net.m:
        raise ValueError(
            f"Got {len(summands)} summands for a network of {net.m} agents"
        )
    sim = SimulatedNetwork(
        net, summands, f, eps, lam, rho, rng_seed, keep_payloads
    )

    # Harness-side view of the global data.
    X = np.sum([s.X for s in summands], axis=0)
    y = np.sum([s.y for s in summands], axis=0)
    ref_norm = float(np.linalg.norm(reference.beta))
    trace = RunTrace(relative=ref_norm > 0)
    if ref_norm == 0:
        logger.warning(
            "Reference estimate is zero; tracing absolute errors instead"
        )
    denominator = ref_norm if ref_norm > 0 else 1.0

    logger.info(
        f"Simulating {net.m} agents on {len(net.edges)} edges "
        f"for up to {max_iter} rounds"
    )
    converged = False
    for k in range(1, max_iter + 1):
        previous_norm = sim.state_norm()
        step = sim.run_round()
        if (k - 1) % stride == 0:
            estimates = sim.estimates()
            rel_error = (
                float(np.linalg.norm(estimates[probe_agent] - reference.beta))
                / denominator
            )
            feasibility = max(
                max(0.0, float(np.linalg.norm(X @ beta - y)) - eps)
                for beta in estimates.values()
            )
            trace.append(
                k, rel_error, consensus_gap(estimates), feasibility, step
            )
        if k % 500 == 0:
            logger.debug(f"Round {k}: step norm {step:.3e}")
        if step <= stop_tol * (1.0 + previous_norm):
            converged = True
            break

    estimates = sim.estimates()
    logger.info(
        f"Simulation finished after {sim.rounds} rounds with "
        f"{len(sim.ledger)} messages"
    )
    return SimulationResult(
        trace=trace,
        estimates=estimates,
        ledger=sim.ledger,
        rounds=sim.rounds,
        converged=converged,
        payload_size=sim.payload_size,
    )


def audit_ledger(
    ledger: Sequence[Message],
    net: Network,
    payload_size: int,
    rounds: Optional[int] = None,
    summands: Optional[Sequence[DataSummand]] = None,
) -> LedgerAudit:
    """
    Check that every message travels along an edge and carries exactly
    payload_size (= n + p) numbers, and that each round 0..rounds-1 has
    exactly one message per edge direction. Duplicated directions, missing
    directions and messages stamped after the last round are all reported.

    Parameters
    ----------
    ledger : Sequence[Message]
    net : Network
    payload_size : int
    rounds : Optional[int]
      Number of rounds run. Defaults to one past the latest round stamped
      in the ledger.
    summands : Optional[Sequence[DataSummand]]
      If given, kept payloads are also checked not to share memory with
      any summand.

    Returns
    -------
    LedgerAudit

    """
    edges = set(net.edges)
    violations = []
    tally = Counter()
    for message in ledger:
        pair = (
            min(message.sender, message.receiver),
            max(message.sender, message.receiver),
        )
        label = (
            f"round {message.round}: {message.sender} -> {message.receiver}"
        )
        tally[(message.round, message.sender, message.receiver)] += 1
        if message.sender == message.receiver or pair not in edges:
            violations.append(f"{label} is not along an edge")
        if message.payload_size != payload_size:
            violations.append(
                f"{label} carries {message.payload_size} numbers, "
                f"expected {payload_size}"
            )
        if summands is not None and message.payload is not None:
            for summand in summands:
                if np.shares_memory(
                    message.payload, summand.X
                ) or np.shares_memory(message.payload, summand.y):
                    violations.append(
                        f"{label} aliases the data of agent {summand.agent}"
                    )
    if rounds is None:
        rounds = 1 + max((message.round for message in ledger), default=-1)
    for (k, sender, receiver), count in sorted(tally.items()):
        if count > 1:
            violations.append(
                f"round {k}: {sender} -> {receiver} sent {count} times"
            )
        if k >= rounds:
            violations.append(
                f"round {k}: {sender} -> {receiver} is after the last "
                f"round {rounds - 1}"
            )
    for k in range(rounds):
        for sender, receiver in net.directed_edges:
            if (k, sender, receiver) not in tally:
                violations.append(
                    f"round {k}: {sender} -> {receiver} is missing"
                )
    expected = 2 * len(net.edges) * rounds
    for violation in violations:
        logger.warning(f"Ledger violation: {violation}")
    return LedgerAudit(
        violations=violations,
        message_count=len(ledger),
        expected_count=expected,
        rounds=rounds,
    )


def write_ledger(
    path: Union[str, Path],
    ledger: Sequence[Message],
    net: Network,
    payload_size: int,
) -> None:
    """
    Write the network, the payload size and one
    "message <round> <sender> <receiver> <size>" line per message.
    """
    lines = [net.to_text().rstrip("\n"), f"payload_size {payload_size}"]
    lines.extend(
        f"message {msg.round} {msg.sender} {msg.receiver} {msg.payload_size}"
        for msg in ledger
    )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_ledger(
    path: Union[str, Path],
) -> Tuple[Network, int, List[Message]]:
    """
    Read a ledger file written by write_ledger.

    Returns
    -------
    Tuple[Network, int, List[Message]]
      The network, the expected payload size and the messages (without
      payload values).

    """
    network_lines = []
    payload_size = None
    ledger = []
    text = Path(path).read_text(encoding="utf-8")
    for line_number, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if not tokens:
            continue
        try:
            if tokens[0] in ("m", "edge"):
                network_lines.append(raw)
            elif tokens[0] == "payload_size" and len(tokens) == 2:
                payload_size = int(tokens[1])
            elif tokens[0] == "message" and len(tokens) == 5:
                k, sender, receiver, size = (int(t) for t in tokens[1:])
                ledger.append(
                    Message(
                        round=k,
                        sender=sender,
                        receiver=receiver,
                        payload_size=size,
                    )
                )
            else:
                raise ValueError(raw)
        except ValueError:
            raise ValueError(f"Malformed ledger line {line_number}: {raw!r}")
    if payload_size is None:
        raise ValueError(f"Ledger {path} has no payload_size line")
    net = Network.from_text("\n".join(network_lines))
    return net, payload_size, ledger
