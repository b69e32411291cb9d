"""Agent networks: construction, connectivity and random-walk generation."""

import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


class NetworkError(ValueError):
    """Raised when a node count and edge list do not form a valid network."""


class Network(BaseModel):
    """
    Connected undirected graph on agents labeled 1..m. Edges are stored as
    canonical (i, j) pairs with i < j, sorted.
    """

    model_config = ConfigDict(frozen=True)

    m: int = Field(ge=2, description="Number of agents.")
    edges: Tuple[Edge, ...] = Field(
        description="Canonical (i, j) pairs with i < j, sorted."
    )

    _neighbors: Dict[int, Tuple[int, ...]] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def check_edges(self) -> "Network":
        """Validate edge labels, canonical order and connectivity."""
        if list(self.edges) != sorted(set(self.edges)):
            raise ValueError("edges must be sorted and free of duplicates")
        for i, j in self.edges:
            if not 1 <= i < j <= self.m:
                raise ValueError(
                    f"edge ({i}, {j}) is not canonical within 1..{self.m}"
                )
        if not is_connected(self):
            raise ValueError(f"network on {self.m} nodes is not connected")
        return self

    def model_post_init(self, __context) -> None:
        """Build the neighbor map once."""
        neighbors: Dict[int, List[int]] = {i: [] for i in self.nodes}
        for i, j in self.edges:
            neighbors.setdefault(i, []).append(j)
            neighbors.setdefault(j, []).append(i)
        self._neighbors = {
            i: tuple(sorted(nbrs)) for i, nbrs in neighbors.items()
        }

    @property
    def nodes(self) -> range:
        """Node labels 1..m."""
        return range(1, self.m + 1)

    @property
    def directed_edges(self) -> List[Edge]:
        """Both orientations of every edge, (i, j) before (j, i)."""
        directed = []
        for i, j in self.edges:
            directed.extend([(i, j), (j, i)])
        return directed

    def neighbors(self, i: int) -> Tuple[int, ...]:
        """Neighbors of node i in ascending label order."""
        return self._neighbors[i]

    def to_text(self) -> str:
        """Serialize to the "m <count>" / "edge <i> <j>" line format."""
        lines = [f"m {self.m}"]
        lines.extend(f"edge {i} {j}" for i, j in self.edges)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Network":
        """
        Parse the line-oriented network format.

        Parameters
        ----------
        text : str
          First meaningful line "m <count>", then one "edge <i> <j>" per
          edge. Blank lines and "#" comments are ignored.

        Returns
        -------
        Network

        """
        m = None
        edge_list = []
        for line_number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                if tokens[0] == "m" and len(tokens) == 2 and m is None:
                    m = int(tokens[1])
                elif tokens[0] == "edge" and len(tokens) == 3:
                    edge_list.append((int(tokens[1]), int(tokens[2])))
                else:
                    raise ValueError(raw)
            except ValueError:
                raise NetworkError(
                    f"Malformed network line {line_number}: {raw!r}"
                )
        if m is None:
            raise NetworkError("Network text is missing the 'm <count>' line")
        return build_network(m, edge_list)


def is_connected(net: Network) -> bool:
    """True iff a traversal from node 1 reaches all m nodes."""
    graph = nx.Graph()
    graph.add_nodes_from(range(1, net.m + 1))
    graph.add_edges_from(net.edges)
    return nx.is_connected(graph)


def build_network(m: int, edge_list: Iterable[Sequence[int]]) -> Network:
    """
    Build a network from an edge list, collapsing duplicate and reversed
    pairs into one canonical edge.

    Parameters
    ----------
    m : int
      Number of nodes, at least 2.
    edge_list : Iterable[Sequence[int]]
      Pairs of node labels in 1..m.

    Returns
    -------
    Network

    Raises
    ------
    NetworkError
      On m < 2, self-loops, out-of-range labels or a disconnected graph.

    """
    if m < 2:
        raise NetworkError(f"A network needs at least 2 nodes, got {m}")
    edges = set()
    for pair in edge_list:
        i, j = (int(v) for v in pair)
        if i == j:
            raise NetworkError(f"Self-loop at node {i}")
        if not (1 <= i <= m and 1 <= j <= m):
            raise NetworkError(f"Edge ({i}, {j}) has a label outside 1..{m}")
        edges.add((min(i, j), max(i, j)))
    candidate = Network.model_construct(m=m, edges=tuple(sorted(edges)))
    if not is_connected(candidate):
        raise NetworkError(
            f"Edges {sorted(edges)} do not connect all {m} nodes"
        )
    return Network(m=m, edges=tuple(sorted(edges)))


def draw_cap(m: int) -> int:
    """Safety cap on the number of random-walk draws."""
    return int(10 * m * math.log(m) + 1000)


def network_from_draws(m: int, draws: Iterable[int]) -> Network:
    """
    Apply the random-walk rule to a sequence of drawn nodes: consecutive
    distinct draws become neighbors, and drawing stops as soon as every node
    has been seen. Draws beyond that point are ignored.
    """
    seen = set()
    edges = []
    previous = None
    for node in draws:
        node = int(node)
        if previous is not None and node != previous:
            edges.append((previous, node))
        seen.add(node)
        previous = node
        if len(seen) == m:
            return build_network(m, edges)
    raise NetworkError(
        f"Draw sequence ended after visiting {len(seen)} of {m} nodes"
    )


def random_walk_network(m: int, rng_seed: int) -> Network:
    """
    Generate a connected network by drawing nodes uniformly with
    replacement until every node has been drawn.

    Parameters
    ----------
    m : int
      Number of nodes, at least 2.
    rng_seed : int
      Seed for numpy's default generator.

    Returns
    -------
    Network

    Raises
    ------
    NetworkError
      If the draw cap 10*m*ln(m)+1000 is exhausted first.

    """
    if m < 2:
        raise NetworkError(f"A network needs at least 2 nodes, got {m}")
    rng = np.random.default_rng(rng_seed)
    cap = draw_cap(m)
    seen = set()
    draws = []
    while len(seen) < m:
        if len(draws) >= cap:
            raise NetworkError(
                f"Random walk did not cover {m} nodes within {cap} draws"
            )
        node = int(rng.integers(1, m + 1))
        draws.append(node)
        seen.add(node)
    net = network_from_draws(m, draws)
    logger.debug(
        f"Random walk on {m} nodes used {len(draws)} draws, "
        f"{len(net.edges)} edges"
    )
    return net


def read_network(path: Union[str, Path]) -> Network:
    """Read a network from a text file."""
    return Network.from_text(Path(path).read_text(encoding="utf-8"))


def write_network(
    net: Network, path: Optional[Union[str, Path]] = None
) -> str:
    """Write a network to a text file and return the text."""
    text = net.to_text()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
