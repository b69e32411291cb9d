"""
Additive summand decompositions of the regression data. Each agent's share
is a full-size matrix and label vector; entries held by k agents are split
equally, so the summands add back up to the global data.
"""

import logging
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_validator,
    model_validator,
)

logger = logging.getLogger(__name__)


class CoverageError(ValueError):
    """Raised when some entry of X or y is held by no agent."""


class SplitScheme(str, Enum):
    """Preset ways of splitting X among agents"""

    COLUMNS = "columns"
    ROWS = "rows"
    BLOCKS = "blocks"
    ARBITRARY_OVERLAPPING = "arbitrary-overlapping"


class GlobalData(BaseModel):
    """The full regression data: X is n x p, y has length n."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    X: np.ndarray
    y: np.ndarray

    @field_validator("X", "y", mode="before")
    @classmethod
    def as_float_array(cls, value):
        """Coerce to a float array and require finite entries."""
        array = np.array(value, dtype=float)
        if not np.all(np.isfinite(array)):
            raise ValueError("data must be finite")
        return array

    @model_validator(mode="after")
    def check_shapes(self) -> "GlobalData":
        """X must be a nonempty matrix with one label per row."""
        if self.X.ndim != 2 or min(self.X.shape) < 1:
            raise ValueError(
                f"X must be a nonempty matrix, got shape {self.X.shape}"
            )
        if self.y.shape != (self.X.shape[0],):
            raise ValueError(
                f"y has shape {self.y.shape}, expected ({self.X.shape[0]},)"
            )
        return self

    @property
    def n(self) -> int:
        """Number of examples."""
        return self.X.shape[0]

    @property
    def p(self) -> int:
        """Number of features."""
        return self.X.shape[1]


class AgentMask(BaseModel):
    """
    The part of (X, y) an agent holds, as boolean indicator arrays: cells
    marks entries of X (n x p) and label_rows marks entries of y (n).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    agent: int = Field(ge=1, description="Agent label, 1-based.")
    cells: np.ndarray
    label_rows: np.ndarray

    @field_validator("cells", "label_rows", mode="before")
    @classmethod
    def as_bool_array(cls, value):
        """Coerce to a boolean array."""
        return np.array(value, dtype=bool)

    @model_validator(mode="after")
    def check_shapes(self) -> "AgentMask":
        """cells is a matrix and label_rows matches its row count."""
        if self.cells.ndim != 2:
            raise ValueError("cells must be a boolean matrix")
        if self.label_rows.shape != (self.cells.shape[0],):
            raise ValueError("label_rows must have one entry per row of X")
        return self

    @classmethod
    def from_indices(
        cls,
        agent: int,
        n: int,
        p: int,
        cells: Sequence[Tuple[int, int]] = (),
        label_rows: Sequence[int] = (),
    ) -> "AgentMask":
        """
        Build a mask from 0-based (row, col) cells and label rows.

        Raises
        ------
        IndexError
          If an index lies outside the n x p data.

        """
        cell_array = np.zeros((n, p), dtype=bool)
        label_array = np.zeros(n, dtype=bool)
        for row, col in cells:
            if not (0 <= row < n and 0 <= col < p):
                raise IndexError(
                    f"Agent {agent}: cell ({row}, {col}) outside {n} x {p}"
                )
            cell_array[row, col] = True
        for row in label_rows:
            if not 0 <= row < n:
                raise IndexError(f"Agent {agent}: label row {row} outside {n}")
            label_array[row] = True
        return cls(agent=agent, cells=cell_array, label_rows=label_array)


class DataSummand(BaseModel):
    """One agent's additive share (X_i, y_i), same shape as the global data."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    agent: int = Field(ge=1)
    X: np.ndarray
    y: np.ndarray


def generate_global_data(n: int, p: int, seed: int) -> GlobalData:
    """X and y with independent standard normal entries."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    return GlobalData(X=X, y=y)


def load_global_data(
    x_path: Union[str, Path], y_path: Union[str, Path]
) -> GlobalData:
    """
    Load X from a CSV of matrix rows and y from a single-column CSV.

    Raises
    ------
    FileNotFoundError
      If either file is missing.
    ValueError
      If the files do not parse into consistent, finite data.

    """
    for path in (x_path, y_path):
        if not Path(path).is_file():
            raise FileNotFoundError(f"Unable to find: {path}")
    X = np.loadtxt(x_path, delimiter=",", ndmin=2)
    y = np.loadtxt(y_path, delimiter=",", ndmin=1)
    return GlobalData(X=X, y=y)


def multiplicity(
    masks: Sequence[AgentMask],
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-entry count of agents holding each cell of X and row of y."""
    cell_counts = np.sum([mask.cells for mask in masks], axis=0, dtype=int)
    label_counts = np.sum(
        [mask.label_rows for mask in masks], axis=0, dtype=int
    )
    return cell_counts, label_counts


def split_from_masks(
    data: GlobalData, masks: Sequence[AgentMask]
) -> List[DataSummand]:
    """
    Split the global data into one summand per mask. An entry held by k
    agents contributes value/k to each of them and 0 to every other agent.

    Parameters
    ----------
    data : GlobalData
    masks : Sequence[AgentMask]
      One mask per agent; together they must cover every entry.

    Returns
    -------
    List[DataSummand]
      Ordered by agent label, whatever the order of the masks.

    Raises
    ------
    CoverageError
      Naming the first uncovered entry of X (or y).
    ValueError
      On shape mismatches or repeated agent labels.

    """
    agents = [mask.agent for mask in masks]
    if len(set(agents)) != len(agents):
        raise ValueError(f"Each agent needs exactly one mask, got {agents}")
    for mask in masks:
        if mask.cells.shape != data.X.shape:
            raise ValueError(
                f"Mask of agent {mask.agent} has shape {mask.cells.shape}, "
                f"data has shape {data.X.shape}"
            )
    cell_counts, label_counts = multiplicity(masks)
    uncovered = np.argwhere(cell_counts == 0)
    if len(uncovered):
        row, col = uncovered[0]
        raise CoverageError(f"X[{row}, {col}] is held by no agent")
    uncovered = np.flatnonzero(label_counts == 0)
    if len(uncovered):
        raise CoverageError(f"y[{uncovered[0]}] is held by no agent")

    X_share = data.X / cell_counts
    y_share = data.y / label_counts
    summands = [
        DataSummand(
            agent=mask.agent,
            X=np.where(mask.cells, X_share, 0.0),
            y=np.where(mask.label_rows, y_share, 0.0),
        )
        for mask in sorted(masks, key=lambda mask: mask.agent)
    ]
    logger.debug(
        f"Split {data.n} x {data.p} data among {len(summands)} agents, "
        f"{int(np.sum(cell_counts > 1))} shared cells"
    )
    return summands


def _grid_shape(m: int, n: int, p: int) -> Tuple[int, int]:
    """Most square (row bands, column bands) grid with m blocks."""
    for rows in range(int(np.sqrt(m)), 0, -1):
        if m % rows == 0:
            cols = m // rows
            if rows <= n and cols <= p:
                return rows, cols
            if cols <= n and rows <= p:
                return cols, rows
    raise ValueError(f"Cannot tile {n} x {p} data into {m} blocks")


def _columns_masks(n: int, p: int, m: int) -> List[AgentMask]:
    """Contiguous column bands; all labels go to agent 1."""
    if m > p:
        raise ValueError(f"columns split needs m <= p, got m={m}, p={p}")
    masks = []
    for agent, cols in enumerate(np.array_split(np.arange(p), m), start=1):
        cells = np.zeros((n, p), dtype=bool)
        cells[:, cols] = True
        label_rows = np.full(n, agent == 1)
        masks.append(
            AgentMask(agent=agent, cells=cells, label_rows=label_rows)
        )
    return masks


def _rows_masks(n: int, p: int, m: int) -> List[AgentMask]:
    """Contiguous row bands with their labels."""
    if m > n:
        raise ValueError(f"rows split needs m <= n, got m={m}, n={n}")
    masks = []
    for agent, rows in enumerate(np.array_split(np.arange(n), m), start=1):
        cells = np.zeros((n, p), dtype=bool)
        cells[rows, :] = True
        label_rows = np.zeros(n, dtype=bool)
        label_rows[rows] = True
        masks.append(
            AgentMask(agent=agent, cells=cells, label_rows=label_rows)
        )
    return masks


def _blocks_masks(n: int, p: int, m: int) -> List[AgentMask]:
    """Grid of row and column bands; labels go to the first block column."""
    n_bands, p_bands = _grid_shape(m, n, p)
    row_bands = np.array_split(np.arange(n), n_bands)
    col_bands = np.array_split(np.arange(p), p_bands)
    masks = []
    agent = 1
    for rows in row_bands:
        for band, cols in enumerate(col_bands):
            cells = np.zeros((n, p), dtype=bool)
            cells[np.ix_(rows, cols)] = True
            label_rows = np.zeros(n, dtype=bool)
            if band == 0:
                label_rows[rows] = True
            masks.append(
                AgentMask(agent=agent, cells=cells, label_rows=label_rows)
            )
            agent += 1
    return masks


def _overlapping_masks(
    n: int, p: int, m: int, rng_seed: int, overlap_fraction: float
) -> List[AgentMask]:
    """
    Non-rectangular regions from a weighted nearest-seed assignment of the
    cells, after which a fraction of cells (and of label rows) is handed to a
    second agent as well.
    """
    if m > n * p:
        raise ValueError(f"Cannot give {m} agents a cell each of {n} x {p}")
    if not 0.0 <= overlap_fraction <= 1.0:
        raise ValueError(
            f"overlap_fraction must be in [0, 1], got {overlap_fraction}"
        )
    rng = np.random.default_rng(rng_seed)
    seeds = rng.choice(n * p, size=m, replace=False)
    seed_rows, seed_cols = np.unravel_index(seeds, (n, p))
    weights = rng.uniform(0.5, 2.0, size=(m, 2))
    rows, cols = np.indices((n, p))
    distance = weights[:, 0, None, None] * np.abs(
        rows[None] - seed_rows[:, None, None]
    ) + weights[:, 1, None, None] * np.abs(
        cols[None] - seed_cols[:, None, None]
    )
    owner = np.argmin(distance, axis=0)
    cells = owner[None] == np.arange(m)[:, None, None]
    label_rows = np.zeros((m, n), dtype=bool)
    label_rows[owner[:, 0], np.arange(n)] = True

    if m > 1:
        n_shared = max(1, int(round(overlap_fraction * n * p)))
        if overlap_fraction == 0.0:
            n_shared = 0
        for flat in rng.choice(n * p, size=n_shared, replace=False):
            row, col = divmod(int(flat), p)
            other = rng.integers(m - 1)
            other += other >= owner[row, col]
            cells[other, row, col] = True
        n_shared_labels = int(round(overlap_fraction * n))
        for row in rng.choice(n, size=n_shared_labels, replace=False):
            other = rng.integers(m - 1)
            other += other >= owner[row, 0]
            label_rows[other, row] = True

    return [
        AgentMask(
            agent=agent + 1, cells=cells[agent], label_rows=label_rows[agent]
        )
        for agent in range(m)
    ]


def preset_masks(
    scheme: Union[SplitScheme, str],
    n: int,
    p: int,
    m: int,
    rng_seed: int = 0,
    overlap_fraction: float = 0.1,
) -> List[AgentMask]:
    """
    Masks for one of the preset splitting schemes.

    Parameters
    ----------
    scheme : Union[SplitScheme, str]
      columns, rows, blocks or arbitrary-overlapping.
    n, p : int
      Shape of X.
    m : int
      Number of agents.
    rng_seed : int
      Seed for the arbitrary-overlapping scheme. Default is 0.
    overlap_fraction : float
      Fraction of cells held by two agents in the arbitrary-overlapping
      scheme. Default is 0.1.

    Returns
    -------
    List[AgentMask]
      Masks for agents 1..m jointly covering every entry.

    Raises
    ------
    ValueError
      If the scheme cannot split an n x p matrix among m agents.

    """
    scheme = SplitScheme(scheme)
    if scheme == SplitScheme.COLUMNS:
        return _columns_masks(n, p, m)
    if scheme == SplitScheme.ROWS:
        return _rows_masks(n, p, m)
    if scheme == SplitScheme.BLOCKS:
        return _blocks_masks(n, p, m)
    return _overlapping_masks(n, p, m, rng_seed, overlap_fraction)


def write_masks(
    masks: Sequence[AgentMask], path: Optional[Union[str, Path]] = None
) -> str:
    """
    Write masks as "agent <i> cell <row> <col>" and "agent <i> label <row>"
    lines with 0-based rows and columns. Returns the text.
    """
    lines = []
    for mask in sorted(masks, key=lambda mask: mask.agent):
        for row, col in np.argwhere(mask.cells):
            lines.append(f"agent {mask.agent} cell {row} {col}")
        for row in np.flatnonzero(mask.label_rows):
            lines.append(f"agent {mask.agent} label {row}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_masks(
    path: Union[str, Path], n: int, p: int, m: Optional[int] = None
) -> List[AgentMask]:
    """
    Read a mask file for n x p data.

    Parameters
    ----------
    path : Union[str, Path]
    n, p : int
      Shape of X.
    m : Optional[int]
      If given, agents 1..m all receive a mask, empty if the file never
      names them.

    Returns
    -------
    List[AgentMask]

    """
    cells: Dict[int, List[Tuple[int, int]]] = {}
    labels: Dict[int, List[int]] = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            if tokens[0] != "agent":
                raise ValueError(raw)
            agent = int(tokens[1])
            if tokens[2] == "cell" and len(tokens) == 5:
                cells.setdefault(agent, []).append(
                    (int(tokens[3]), int(tokens[4]))
                )
            elif tokens[2] == "label" and len(tokens) == 4:
                labels.setdefault(agent, []).append(int(tokens[3]))
            else:
                raise ValueError(raw)
        except (ValueError, IndexError):
            raise ValueError(f"Malformed mask line {line_number}: {raw!r}")
    agents = set(cells) | set(labels)
    if m is not None:
        extra = sorted(a for a in agents if not 1 <= a <= m)
        if extra:
            raise ValueError(f"Mask file names agents {extra} outside 1..{m}")
        agents = set(range(1, m + 1))
    return [
        AgentMask.from_indices(
            agent, n, p, cells.get(agent, ()), labels.get(agent, ())
        )
        for agent in sorted(agents)
    ]
