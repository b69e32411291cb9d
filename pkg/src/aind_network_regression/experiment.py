"""
Experiment configuration and the job that runs one experiment end to end:
data, split, network, centralized reference, simulation and outputs.
"""

import logging
from enum import Enum
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    model_validator,
)

from aind_network_regression.central_oracle import (
    CentralSolution,
    solve_central,
)
from aind_network_regression.datasplit import (
    DataSummand,
    GlobalData,
    SplitScheme,
    generate_global_data,
    load_global_data,
    preset_masks,
    read_masks,
    split_from_masks,
)
from aind_network_regression.proxlib import get_regularizer
from aind_network_regression.simnet import (
    SimulationResult,
    audit_ledger,
    simulate,
    write_ledger,
)
from aind_network_regression.topology import (
    Network,
    random_walk_network,
    read_network,
)

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Raised for unreadable or invalid experiment configurations."""


class DataError(ValueError):
    """Raised when the data, masks or network files cannot be used."""


class ReferenceNotConvergedError(RuntimeError):
    """Raised when the centralized reference solver does not converge."""


class DataSource(str, Enum):
    """Where X and y come from"""

    GENERATE = "generate"
    FILES = "files"


class NetworkSource(str, Enum):
    """Where the network comes from"""

    RANDOM_WALK = "random_walk"
    FILE = "file"


class ExperimentConfig(BaseModel):
    """
    Settings of one experiment. Keys match the config file; "lambda" is
    stored as ``lam``.
    """

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    data: DataSource = Field(description="generate or files.")
    n: Optional[int] = Field(
        default=None, ge=1, description="Rows of generated X."
    )
    p: Optional[int] = Field(
        default=None, ge=1, description="Columns of generated X."
    )
    data_seed: int = Field(default=0, description="Seed for generated data.")
    x_path: Optional[Path] = Field(
        default=None, description="CSV of X rows (data = files)."
    )
    y_path: Optional[Path] = Field(
        default=None, description="Single-column CSV of y (data = files)."
    )
    split: Union[SplitScheme, Literal["file"]] = Field(
        description=(
            "columns, rows, blocks, arbitrary-overlapping, or file to read "
            "mask_path."
        )
    )
    split_seed: int = Field(default=0, description="Seed for preset masks.")
    overlap_fraction: float = Field(
        default=0.1,
        ge=0.0,
        le=1.0,
        description="Fraction of cells held by two agents.",
    )
    mask_path: Optional[Path] = Field(
        default=None, description="Mask file (split = file)."
    )
    network: NetworkSource = Field(description="random_walk or file.")
    m: int = Field(ge=2, description="Number of agents.")
    network_seed: int = Field(
        default=0, description="Seed for the random-walk network."
    )
    edge_path: Optional[Path] = Field(
        default=None, description="Network text file (network = file)."
    )
    f: Literal["l1", "zero", "sq_l2"] = Field(description="Regularizer.")
    eps: float = Field(gt=0, description="Residual bound.")
    lam: float = Field(alias="lambda", gt=0, description="Prox scale.")
    rho: float = Field(gt=0, lt=2, description="Relaxation in (0, 2).")
    max_iter: int = Field(ge=1, description="Maximum number of rounds.")
    stop_tol: float = Field(
        default=0.0, ge=0, description="Relative step stopping tolerance."
    )
    probe: int = Field(default=1, ge=1, description="Probe agent.")
    stride: int = Field(default=1, ge=1, description="Trace stride.")
    output_dir: Path = Field(description="Directory for output files.")
    central_lambda: float = Field(
        default=1.0, gt=0, description="Prox scale of the reference solver."
    )
    central_rho: float = Field(
        default=1.0,
        gt=0,
        lt=2,
        description="Relaxation of the reference solver.",
    )
    central_max_iter: int = Field(
        default=1_000_000, ge=1, description="Reference iteration cap."
    )
    central_tol: float = Field(
        default=1e-12, ge=0, description="Reference stopping tolerance."
    )

    @model_validator(mode="after")
    def check_sources(self) -> "ExperimentConfig":
        """Each source needs its own keys."""
        if self.data == DataSource.GENERATE:
            required = ("n", "p")
        else:
            required = ("x_path", "y_path")
        missing = [key for key in required if getattr(self, key) is None]
        if self.split == "file" and self.mask_path is None:
            missing.append("mask_path")
        if self.network == NetworkSource.FILE and self.edge_path is None:
            missing.append("edge_path")
        if missing:
            raise ValueError(f"missing required keys {missing}")
        if self.probe > self.m:
            raise ValueError(f"probe {self.probe} exceeds m = {self.m}")
        return self

    def resolve_paths(self, base_dir: Path) -> "ExperimentConfig":
        """Copy with relative paths anchored at base_dir."""
        updates = {}
        keys = ("x_path", "y_path", "mask_path", "edge_path", "output_dir")
        for key in keys:
            path = getattr(self, key)
            if path is not None and not path.is_absolute():
                updates[key] = base_dir / path
        return self.model_copy(update=updates)


def parse_config_text(text: str) -> Tuple[Dict[str, str], Dict[str, int]]:
    """
    Parse "key = value" lines with "#" comments.

    Returns
    -------
    Tuple[Dict[str, str], Dict[str, int]]
      The values and the line number of each key.

    """
    values: Dict[str, str] = {}
    line_numbers: Dict[str, int] = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                f"line {line_number}: expected 'key = value', got {raw!r}"
            )
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(
                f"line {line_number}: {key!r} already set on line "
                f"{line_numbers[key]}"
            )
        values[key] = value
        line_numbers[key] = line_number
    return values, line_numbers


def _describe_errors(
    error: ValidationError, line_numbers: Dict[str, int]
) -> List[str]:
    """One message per validation error, naming key and line."""
    messages = []
    missing = [
        str(err["loc"][0])
        for err in error.errors()
        if err["type"] == "missing"
    ]
    if missing:
        messages.append(f"missing required keys: {', '.join(missing)}")
    for err in error.errors():
        if err["type"] == "missing":
            continue
        key = str(err["loc"][0]) if err["loc"] else None
        if key in line_numbers:
            messages.append(
                f"{key} (line {line_numbers[key]}): {err['msg']}"
            )
        elif key:
            messages.append(f"{key}: {err['msg']}")
        else:
            messages.append(err["msg"])
    return messages


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Load and validate an experiment config file.

    Parameters
    ----------
    path : Union[str, Path]

    Returns
    -------
    ExperimentConfig
      With relative paths resolved against the file's directory.

    Raises
    ------
    ConfigError
      Naming each offending key and its line number.

    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Unable to read config {path}: {e}")
    values, line_numbers = parse_config_text(text)
    try:
        config = ExperimentConfig.model_validate(values)
    except ValidationError as e:
        raise ConfigError(
            f"Invalid config {path}:\n  "
            + "\n  ".join(_describe_errors(e, line_numbers))
        )
    return config.resolve_paths(path.parent)


class ExperimentSummary(BaseModel):
    """Headline numbers of a finished experiment."""

    final_rel_error: float
    rounds: int
    messages: int
    ledger_ok: bool

    def line(self) -> str:
        """One-line summary."""
        return (
            f"final_rel_error={self.final_rel_error!r} "
            f"iterations={self.rounds} messages={self.messages} "
            f"ledger={'ok' if self.ledger_ok else 'VIOLATIONS'}"
        )


class Experiment:
    """Runs one configured experiment and writes its outputs."""

    TRACE_FILE = "trace.csv"
    ESTIMATES_FILE = "agent_estimates.csv"
    CENTRAL_FILE = "central_beta.csv"
    LEDGER_FILE = "ledger.txt"
    SUMMARY_FILE = "summary.txt"

    def __init__(self, config: ExperimentConfig):
        """
        The Experiment constructor
        """
        self.config = config.model_copy(deep=True)
        self.regularizer = get_regularizer(self.config.f)

    def load_data(self) -> GlobalData:
        """Generate or read X and y."""
        cfg = self.config
        if cfg.data == DataSource.GENERATE:
            return generate_global_data(cfg.n, cfg.p, cfg.data_seed)
        try:
            return load_global_data(cfg.x_path, cfg.y_path)
        except (OSError, ValueError) as e:
            raise DataError(f"Unable to load data: {e}")

    def build_network(self) -> Network:
        """Random-walk network or one read from file."""
        cfg = self.config
        if cfg.network == NetworkSource.RANDOM_WALK:
            return random_walk_network(cfg.m, cfg.network_seed)
        try:
            net = read_network(cfg.edge_path)
        except (OSError, ValueError) as e:
            raise DataError(f"Unable to load network: {e}")
        if net.m != cfg.m:
            raise DataError(
                f"Network file has {net.m} agents, config says m = {cfg.m}"
            )
        return net

    def split_data(self, data: GlobalData) -> List[DataSummand]:
        """Masks from the preset scheme or mask file, then summands."""
        cfg = self.config
        try:
            if cfg.split == "file":
                masks = read_masks(cfg.mask_path, data.n, data.p, cfg.m)
            else:
                masks = preset_masks(
                    cfg.split,
                    data.n,
                    data.p,
                    cfg.m,
                    cfg.split_seed,
                    cfg.overlap_fraction,
                )
            return split_from_masks(data, masks)
        except (OSError, ValueError, IndexError) as e:
            raise DataError(f"Unable to split data: {e}")

    def solve_reference(self, data: GlobalData) -> CentralSolution:
        """Centralized estimate; raises if it does not converge."""
        cfg = self.config
        try:
            reference = solve_central(
                data,
                self.regularizer,
                cfg.eps,
                lam=cfg.central_lambda,
                max_iter=cfg.central_max_iter,
                tol=cfg.central_tol,
                rho=cfg.central_rho,
            )
        except ValueError as e:
            raise DataError(f"Centralized problem cannot be solved: {e}")
        if not reference.converged:
            raise ReferenceNotConvergedError(
                f"Central solver did not converge within "
                f"{cfg.central_max_iter} iterations"
            )
        return reference

    def run_central(self) -> CentralSolution:
        """Solve only the centralized problem and write its estimate."""
        data = self.load_data()
        reference = self.solve_reference(data)
        self.config.output_dir.mkdir(parents=True, exist_ok=True)
        write_vector_csv(
            self.config.output_dir / self.CENTRAL_FILE, reference.beta
        )
        return reference

    def run_experiment(self) -> ExperimentSummary:
        """Run every step and write the outputs."""
        cfg = self.config
        data = self.load_data()
        summands = self.split_data(data)
        net = self.build_network()
        logger.info(
            f"Data {data.n} x {data.p}, {net.m} agents, "
            f"edges {list(net.edges)}"
        )
        reference = self.solve_reference(data)
        result = simulate(
            net,
            summands,
            self.regularizer,
            cfg.eps,
            cfg.lam,
            cfg.rho,
            cfg.max_iter,
            reference,
            probe_agent=cfg.probe,
            stop_tol=cfg.stop_tol,
            stride=cfg.stride,
        )
        audit = audit_ledger(
            result.ledger,
            net,
            result.payload_size,
            rounds=result.rounds,
        )
        error = float(
            np.linalg.norm(result.estimates[cfg.probe] - reference.beta)
        )
        if result.trace.relative:
            error /= float(np.linalg.norm(reference.beta))
        summary = ExperimentSummary(
            final_rel_error=error,
            rounds=result.rounds,
            messages=audit.message_count,
            ledger_ok=audit.ok,
        )
        self.write_outputs(net, reference, result, summary)
        logger.info(summary.line())
        return summary

    def write_outputs(
        self,
        net: Network,
        reference: CentralSolution,
        result: SimulationResult,
        summary: ExperimentSummary,
    ) -> None:
        """Trace, per-agent and central estimates, ledger and summary."""
        out = self.config.output_dir
        out.mkdir(parents=True, exist_ok=True)
        result.trace.to_csv(out / self.TRACE_FILE)
        write_estimates_csv(out / self.ESTIMATES_FILE, result.estimates)
        write_vector_csv(out / self.CENTRAL_FILE, reference.beta)
        write_ledger(
            out / self.LEDGER_FILE, result.ledger, net, result.payload_size
        )
        (out / self.SUMMARY_FILE).write_text(
            summary.line() + "\n", encoding="utf-8"
        )


def write_vector_csv(path: Path, vector: np.ndarray) -> None:
    """Single-column CSV with exact float representations."""
    path.write_text(
        "".join(f"{float(v)!r}\n" for v in vector), encoding="utf-8"
    )


def write_estimates_csv(
    path: Path, estimates: Dict[int, np.ndarray]
) -> None:
    """One row per agent: the label, then its estimate."""
    rows = [
        ",".join([str(agent)] + [repr(float(v)) for v in beta])
        for agent, beta in sorted(estimates.items())
    ]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
