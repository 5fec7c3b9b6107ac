"""
Experiment harness.

Generates random instances, runs the sensitivity and online-learning protocols,
computes baselines and empirical competitive ratios, and writes CSV results.
"""

from __future__ import annotations

import re
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import Config
from services.algorithms import (
    PolicySpec,
    SolverError,
    build_policy,
    parse_policy_name,
    run_minincrease,
)
from services.errors import ErrorReport, ell1, eta_r, eta_s, nu, reference_prediction
from services.learn import (
    NoiseMode,
    SampleSet,
    erm_learn,
    perturb_lengths,
    predict_permutation,
)
from services.model import (
    EnvKind,
    Instance,
    LengthPrediction,
    MachineEnvironment,
    PermutationPrediction,
    SingleOrder,
    objective,
    perfect_order,
    sequence_objective,
)
from services.simulator import InfeasibleRatesError, NoProgressError, priority_schedule, simulate
from utils.formatters import format_error_record
from utils.logger import log_cell_result, log_error, setup_logger
from utils.validators import validate_experiment_config

logger = setup_logger("services.experiments")

EXPERIMENTS = ("sensitivity", "online")
DISTRIBUTIONS = ("pareto", "exponential", "weibull")
CSV_COLUMNS = [
    "experiment",
    "distribution",
    "n",
    "m",
    "algorithm",
    "lambda",
    "x",
    "run",
    "seed",
    "objective",
    "baseline",
    "ratio",
    "eta_s",
    "ell1",
]

# Default PTS pair per environment: (prediction-clairvoyant, non-clairvoyant)
DEFAULT_PTS_PAIRS = {
    EnvKind.SINGLE: ("wspt", "wrr"),
    EnvKind.IDENTICAL: ("pwspt", "wdeq"),
    EnvKind.UNRELATED: ("minincrease", "pf"),
}

# RNG stream purposes
_INSTANCE, _NOISE, _ROUND_ZERO = 0, 1, 2

_CELL_ERRORS = (InfeasibleRatesError, NoProgressError, SolverError, ValueError)


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one sensitivity or online-learning experiment."""

    experiment: str = "sensitivity"
    distribution: str = "pareto"
    n: int = Config.DEFAULT_N
    m: int = 1
    env: str = "single"
    algorithms: Tuple[str, ...] = ("rr", "pts")
    lambdas: Tuple[float, ...] = tuple(Config.DEFAULT_LAMBDAS)
    omegas: Tuple[float, ...] = tuple(Config.DEFAULT_OMEGAS)
    gamma: float = Config.DEFAULT_GAMMA
    rounds: int = Config.DEFAULT_ROUNDS
    runs: int = Config.DEFAULT_RUNS
    seed: int = Config.DEFAULT_SEED
    weighted: Optional[bool] = None
    releases: Optional[bool] = None
    out: Optional[Path] = None

    @property
    def env_kind(self) -> EnvKind:
        return EnvKind(self.env)

    @property
    def is_weighted(self) -> bool:
        """Weights default to Pareto(2, 1) everywhere except the single machine."""
        if self.weighted is not None:
            return self.weighted
        return self.env_kind is not EnvKind.SINGLE

    @property
    def has_releases(self) -> bool:
        if self.releases is not None:
            return self.releases
        return self.env_kind is not EnvKind.SINGLE

    @property
    def x_values(self) -> List[float]:
        """ω grid for sensitivity, round indices for online learning."""
        if self.experiment == "online":
            return list(range(self.rounds))
        return list(self.omegas)

    def policy_specs(self) -> List[PolicySpec]:
        """
        Parse the algorithm list; a bare ``pts`` expands to the environment's default
        pair for every λ.

        Raises:
            ValueError: On an unknown policy name
        """
        specs: List[PolicySpec] = []
        for name in self.algorithms:
            if name.strip().lower() == "pts":
                clairvoyant, non_clairvoyant = DEFAULT_PTS_PAIRS[self.env_kind]
                specs.extend(
                    PolicySpec("pts", float(lam), clairvoyant, non_clairvoyant)
                    for lam in self.lambdas
                )
            else:
                specs.append(parse_policy_name(name))
        return specs

    def validate(self) -> None:
        """
        Raises:
            ValueError: If the configuration is inconsistent
        """
        is_valid, error = validate_experiment_config(self)
        if not is_valid:
            raise ValueError(error)
        self.policy_specs()

    @classmethod
    def from_file(cls, path: Path, **overrides: Any) -> "ExperimentConfig":
        """
        Load a ``key = value`` config file; keyword overrides win over file values.

        Raises:
            ValueError: On unknown keys or malformed values
            OSError: If the file cannot be read
        """
        values: Dict[str, Any] = {}
        for number, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{number}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(cls, values: Dict[str, Any]) -> "ExperimentConfig":
        """Build a config from CLI-style keys (``dist``, ``algos``, ...), parsing strings."""
        kwargs: Dict[str, Any] = {}
        for key, value in values.items():
            if value is None:
                continue
            name = _KEY_ALIASES.get(key, key)
            if name not in _PARSERS:
                raise ValueError(f"Unknown config key: {key}")
            kwargs[name] = _PARSERS[name](value) if isinstance(value, str) else _coerce(name, value)
        return cls(**kwargs)


def _split_list(raw: str) -> List[str]:
    # commas inside pts(...) do not separate items
    return [item for item in re.split(r"[\s,]+(?![^()]*\))", raw.strip()) if item]


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"Invalid boolean: {raw!r}")


_PARSERS = {
    "experiment": str.strip,
    "distribution": str.strip,
    "n": int,
    "m": int,
    "env": str.strip,
    "algorithms": lambda raw: tuple(_split_list(raw)),
    "lambdas": lambda raw: tuple(float(item) for item in _split_list(raw)),
    "omegas": lambda raw: tuple(float(item) for item in _split_list(raw)),
    "gamma": float,
    "rounds": int,
    "runs": int,
    "seed": int,
    "weighted": _parse_bool,
    "releases": _parse_bool,
    "out": Path,
}

_KEY_ALIASES = {"dist": "distribution", "algos": "algorithms"}


def _coerce(name: str, value: Any) -> Any:
    if name in ("algorithms", "lambdas", "omegas"):
        return tuple(value)
    if name == "out":
        return Path(value)
    return value


@dataclass(frozen=True)
class ExperimentRecord:
    """One CSV row: an algorithm evaluated on one instance at one x value."""

    experiment: str
    distribution: str
    n: int
    m: int
    algorithm: str
    lam: Optional[float]
    x: float
    run: int
    seed: int
    objective: Optional[float]
    baseline: float
    ratio: Optional[float]
    eta_s: Optional[float]
    ell1: Optional[float]

    def as_row(self) -> Dict[str, Any]:
        row = asdict(self)
        row["lambda"] = row.pop("lam")
        return {column: row[column] for column in CSV_COLUMNS}


# ---------------------------------------------------------------------------
# Instances and baselines
# ---------------------------------------------------------------------------


def stream(seed: int, run: int, index: int, purpose: int) -> np.random.Generator:
    """Independent generator keyed by (master seed, run, x index, purpose)."""
    return np.random.default_rng(np.random.SeedSequence([seed, run, index, purpose]))


def pareto(rng: np.random.Generator, shape: float, scale: float, size: int) -> np.ndarray:
    """Pareto samples with support [scale, ∞)."""
    return scale * (1.0 + rng.pareto(shape, size))


def sample_lengths(distribution: str, rng: np.random.Generator, size: int) -> np.ndarray:
    """
    Draw processing requirements.

    Raises:
        ValueError: On an unknown distribution name
    """
    if distribution == "pareto":
        return pareto(rng, 1.1, 1.0, size)
    if distribution == "exponential":
        return rng.exponential(1.0, size)
    if distribution == "weibull":
        return 2.0 * rng.weibull(0.5, size)
    raise ValueError(f"Unknown distribution: {distribution}")


def generate_instance(cfg: ExperimentConfig, rng: np.random.Generator) -> Instance:
    """
    Draw a random instance for the configured environment.

    Args:
        cfg: Experiment configuration
        rng: Generator owning this instance's randomness

    Returns:
        Instance with lengths from ``cfg.distribution``; weights and releases from
        Pareto(2, 1) when enabled; ℓ_ij ~ U[1, 4] on unrelated machines
    """
    processing = sample_lengths(cfg.distribution, rng, cfg.n)
    # zero-probability events still have to yield a valid instance
    processing = np.maximum(processing, Config.LENGTH_FLOOR)
    weights = pareto(rng, 2.0, 1.0, cfg.n) if cfg.is_weighted else np.ones(cfg.n)
    releases = pareto(rng, 2.0, 1.0, cfg.n) if cfg.has_releases else np.zeros(cfg.n)

    if cfg.env_kind is EnvKind.SINGLE:
        env = MachineEnvironment.single()
    elif cfg.env_kind is EnvKind.IDENTICAL:
        env = MachineEnvironment.identical(cfg.m)
    else:
        env = MachineEnvironment.unrelated(rng.uniform(1.0, 4.0, (cfg.m, cfg.n)))
    return Instance.from_arrays(weights, processing, releases, env)


def baseline_objective(instance: Instance) -> float:
    """
    Objective of the reference schedule a ratio is measured against.

    One machine without releases: WSPT (optimal). Unrelated machines: clairvoyant
    MinIncrease P-WSPT. Otherwise: clairvoyant P-WSPT.
    """
    if instance.env.kind is EnvKind.UNRELATED:
        return objective(run_minincrease(instance, record=False).schedule, instance.jobs)
    order = perfect_order(instance)
    if instance.m == 1 and not instance.has_releases:
        return sequence_objective(order.order, instance.weights, instance.processing)
    return objective(priority_schedule(instance, order, record=False), instance.jobs)


# ---------------------------------------------------------------------------
# Cells
# ---------------------------------------------------------------------------


def prediction_error(
    instance: Instance,
    prediction: PermutationPrediction,
    lengths: Sequence[float],
    reference: Optional[PermutationPrediction] = None,
) -> ErrorReport:
    """
    Error measures of a prediction built from predicted ``lengths``.

    η^S for SingleOrder predictions, η^R against the reference otherwise; ℓ1 always;
    ν only for a single machine with unit weights and no release dates.
    """
    if isinstance(prediction, SingleOrder):
        report = eta_s(instance, prediction, collect_pairs=False)
    else:
        report = eta_r(instance, prediction, reference)
    unit = (
        instance.env.kind is EnvKind.SINGLE
        and not instance.has_releases
        and bool(np.all(instance.weights == 1.0))
    )
    return replace(
        report,
        ell1=ell1(instance.processing, lengths),
        nu=nu(instance.processing, lengths) if unit else None,
    )


def _headline(report: ErrorReport) -> float:
    return report.eta_s if report.eta_s is not None else report.eta_r


def evaluate_policy(
    instance: Instance, spec: PolicySpec, prediction: PermutationPrediction, cell: str
) -> Optional[float]:
    """
    Objective of one policy on one instance; None when the simulation fails.
    """
    started = time.perf_counter()
    try:
        schedule = simulate(instance, build_policy(spec, prediction), record=False)
        value = objective(schedule, instance.jobs)
    except _CELL_ERRORS as e:
        log_error(logger, e, context=cell)
        log_cell_result(logger, cell, time.perf_counter() - started, success=False)
        return None
    log_cell_result(logger, cell, time.perf_counter() - started)
    return value


def _record(
    cfg: ExperimentConfig,
    instance: Instance,
    spec: PolicySpec,
    x: float,
    run: int,
    value: Optional[float],
    baseline: float,
    error: Optional[float],
    length_error: Optional[float],
) -> ExperimentRecord:
    return ExperimentRecord(
        experiment=cfg.experiment,
        distribution=cfg.distribution,
        n=instance.n,
        m=instance.m,
        algorithm=str(spec),
        lam=spec.lam,
        x=x,
        run=run,
        seed=cfg.seed,
        objective=value,
        baseline=baseline,
        ratio=None if value is None else value / baseline,
        eta_s=error,
        ell1=length_error,
    )


def run_sensitivity(cfg: ExperimentConfig) -> List[ExperimentRecord]:
    """
    Sensitivity experiment: fixed instance per run, increasing Gaussian noise ω.

    Emits one record per (ω, algorithm, run). Prediction-oblivious policies are
    simulated once per run and reported for every ω.
    """
    cfg.validate()
    specs = cfg.policy_specs()
    records: List[ExperimentRecord] = []

    for run in range(cfg.runs):
        instance = generate_instance(cfg, stream(cfg.seed, run, 0, _INSTANCE))
        baseline = baseline_objective(instance)
        reference = reference_prediction(instance) if cfg.env_kind is EnvKind.UNRELATED else None
        oblivious: Dict[str, Optional[float]] = {}
        logger.info(f"Sensitivity run {run + 1}/{cfg.runs}: n={instance.n}, baseline={baseline:.6g}")

        for index, omega in enumerate(cfg.omegas):
            y = perturb_lengths(
                instance.processing, NoiseMode.FIXED, omega, stream(cfg.seed, run, index, _NOISE)
            )
            prediction = predict_permutation(instance, y)
            report = prediction_error(instance, prediction, y.as_array(), reference)
            error, length_error = _headline(report), report.ell1
            logger.debug(f"ω={omega:g} run={run}: {format_error_record(report.as_record())}")

            for spec in specs:
                cell = f"sensitivity/{spec}/omega={omega:g}/run={run}"
                if spec.uses_prediction:
                    value = evaluate_policy(instance, spec, prediction, cell)
                else:
                    key = str(spec)
                    if key not in oblivious:
                        oblivious[key] = evaluate_policy(instance, spec, prediction, cell)
                    value = oblivious[key]
                records.append(
                    _record(cfg, instance, spec, omega, run, value, baseline, error, length_error)
                )
    return records


def run_online_learning(cfg: ExperimentConfig) -> List[ExperimentRecord]:
    """
    Online-learning experiment.

    Round t draws J_t by adding noise with deviation γ·√p_j to a base instance. Round
    0 predicts from an independent random instance; round t ≥ 1 uses ERM over
    J_0..J_{t-1}. The ``eta_s`` column holds the prediction's error on the base
    instance; ``ell1`` the ℓ1 distance of the lengths the prediction was built from.
    """
    cfg.validate()
    specs = cfg.policy_specs()
    records: List[ExperimentRecord] = []

    for run in range(cfg.runs):
        base = generate_instance(cfg, stream(cfg.seed, run, 0, _INSTANCE))
        unrelated = base.env.kind is EnvKind.UNRELATED
        reference = reference_prediction(base) if unrelated else None
        # round 0 lengths come from an unrelated draw of the same family
        unseen = generate_instance(cfg, stream(cfg.seed, run, 0, _ROUND_ZERO))
        history: List[Instance] = []
        logger.info(f"Online-learning repetition {run + 1}/{cfg.runs}: n={base.n}")

        for round_index in range(cfg.rounds):
            noisy = perturb_lengths(
                base.processing, NoiseMode.SCALED, cfg.gamma, stream(cfg.seed, run, round_index, _NOISE)
            )
            current = base.with_processing(noisy.as_array())

            if history:
                samples = SampleSet(tuple(history))
                prediction = erm_learn(samples)
                learned_lengths = samples.average_instance().processing
            else:
                learned_lengths = unseen.processing
                prediction = predict_permutation(
                    current, LengthPrediction(tuple(learned_lengths.tolist()))
                )

            report = prediction_error(base, prediction, learned_lengths, reference)
            error, length_error = _headline(report), report.ell1
            logger.debug(f"round={round_index} run={run}: {format_error_record(report.as_record())}")
            baseline = baseline_objective(current)

            for spec in specs:
                cell = f"online/{spec}/round={round_index}/run={run}"
                value = evaluate_policy(current, spec, prediction, cell)
                records.append(
                    _record(cfg, current, spec, round_index, run, value, baseline, error, length_error)
                )
            history.append(current)
    return records


def run_experiment(cfg: ExperimentConfig) -> List[ExperimentRecord]:
    """Dispatch on ``cfg.experiment``."""
    if cfg.experiment == "online":
        return run_online_learning(cfg)
    return run_sensitivity(cfg)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def records_frame(records: Iterable[ExperimentRecord]) -> pd.DataFrame:
    """Records as a DataFrame with the CSV columns, sorted by cell coordinates."""
    frame = pd.DataFrame([record.as_row() for record in records], columns=CSV_COLUMNS)
    return frame.sort_values(
        ["experiment", "algorithm", "lambda", "x", "run"], kind="mergesort", na_position="first"
    ).reset_index(drop=True)


def emit_csv(records: Sequence[ExperimentRecord], path: Path) -> Path:
    """
    Write records as CSV.

    Raises:
        ValueError: If there are no records
        OSError: If the path is not writable
    """
    if not records:
        raise ValueError("No records to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records_frame(records).to_csv(path, index=False, lineterminator="\n")
    logger.info(f"Wrote {len(records)} records to {path}")
    return path


def summarize(records: Any) -> pd.DataFrame:
    """
    Per (experiment, algorithm, λ, x) statistics of the ratio over runs.

    Args:
        records: ExperimentRecords or a DataFrame with the CSV columns

    Returns:
        DataFrame with count, mean, median, stderr, ci_low, ci_high and the median
        prediction error per cell; failed cells are ignored
    """
    frame = records if isinstance(records, pd.DataFrame) else records_frame(records)
    frame = frame.dropna(subset=["ratio"])
    grouped = frame.groupby(["experiment", "algorithm", "lambda", "x"], dropna=False)
    summary = grouped.agg(
        count=("ratio", "size"),
        mean=("ratio", "mean"),
        median=("ratio", "median"),
        std=("ratio", "std"),
        eta_s=("eta_s", "median"),
    ).reset_index()
    summary["stderr"] = (summary["std"] / np.sqrt(summary["count"])).fillna(0.0)
    summary["ci_low"] = summary["mean"] - 1.96 * summary["stderr"]
    summary["ci_high"] = summary["mean"] + 1.96 * summary["stderr"]
    return summary.drop(columns="std")
