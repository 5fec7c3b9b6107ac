"""
Text formatting utilities for predsched.

Provides the instance file codec, the schedule dump used by golden tests, the
prediction codec and console summaries.
"""

import re
from typing import Dict, Iterable, List, Optional

from services.model import (
    Assigned,
    EnvKind,
    Instance,
    MachineEnvironment,
    PermutationPrediction,
    Schedule,
    SingleOrder,
)


def _number(value: float) -> str:
    # repr round-trips floats exactly
    return repr(float(value))


def format_instance(instance: Instance) -> str:
    """
    Format an instance as text.

    Header line ``n m env``, one line ``id weight processing release`` per job and,
    for unrelated machines, m lines of n rates ℓ_ij.

    Args:
        instance: Instance to format

    Returns:
        Instance text ending with a newline
    """
    lines = [f"{instance.n} {instance.m} {instance.env.kind.value}"]
    for job in instance.jobs:
        lines.append(
            f"{job.id} {_number(job.weight)} {_number(job.processing)} {_number(job.release)}"
        )
    if instance.env.kind is EnvKind.UNRELATED:
        for row in instance.env.rates:
            lines.append(" ".join(_number(value) for value in row))
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> Instance:
    """
    Parse the output of :func:`format_instance`; ``#`` starts a comment.

    Raises:
        ValueError: If the text is malformed
    """
    lines = [line.split("#", 1)[0].strip() for line in text.splitlines()]
    lines = [line for line in lines if line]
    if not lines:
        raise ValueError("Empty instance file")

    header = lines[0].split()
    if len(header) != 3:
        raise ValueError("Header must be 'n m env'")
    n, m, kind = int(header[0]), int(header[1]), EnvKind(header[2])

    weights: List[float] = []
    processing: List[float] = []
    releases: List[float] = []
    for index, line in enumerate(lines[1 : n + 1], 1):
        fields = line.split()
        if len(fields) != 4 or int(fields[0]) != index:
            raise ValueError(f"Job line {index} must be '{index} weight processing release'")
        weights.append(float(fields[1]))
        processing.append(float(fields[2]))
        releases.append(float(fields[3]))
    if len(weights) != n:
        raise ValueError(f"Expected {n} job lines, found {len(weights)}")

    rest = lines[n + 1 :]
    if kind is EnvKind.UNRELATED:
        rows = [[float(value) for value in row.split()] for row in rest]
        if len(rows) != m or any(len(row) != n for row in rows):
            raise ValueError(f"Unrelated instance needs {m} rate lines of {n} values")
        env = MachineEnvironment.unrelated(rows)
    else:
        if rest:
            raise ValueError("Unexpected trailing lines")
        env = MachineEnvironment.single() if kind is EnvKind.SINGLE else MachineEnvironment.identical(m)

    return Instance.from_arrays(weights, processing, releases, env)


def format_schedule(schedule: Schedule) -> str:
    """
    Dump a schedule for golden comparisons.

    One line ``t_start t_end machine job rate`` per non-zero rate (1-based ids, sorted
    lexicographically by value), then ``C job time`` per job.
    """
    entries = []
    for segment in schedule.segments:
        for machine, job, rate in zip(segment.machines, segment.jobs, segment.rates):
            entries.append((segment.start, segment.end, int(machine) + 1, int(job) + 1, float(rate)))
    lines = [
        f"{start:.12g} {end:.12g} {machine} {job} {rate:.12g}"
        for start, end, machine, job, rate in sorted(entries)
    ]
    lines.extend(
        f"C {job_id} {completion:.12g}"
        for job_id, completion in enumerate(schedule.completions, 1)
    )
    return "\n".join(lines) + "\n"


def format_prediction(prediction: PermutationPrediction) -> str:
    """
    Format a permutation prediction.

    SingleOrder: one whitespace-separated id list. Assigned: one ``machine <i>: ids``
    line per machine (1-based machine numbers).
    """
    if isinstance(prediction, SingleOrder):
        return " ".join(str(job_id) for job_id in prediction.order) + "\n"
    return "".join(
        f"machine {machine}: {' '.join(str(job_id) for job_id in order)}".rstrip() + "\n"
        for machine, order in enumerate(prediction.orders, 1)
    )


_MACHINE_LINE = re.compile(r"^machine\s+(\d+)\s*:(.*)$")


def parse_prediction(text: str) -> PermutationPrediction:
    """
    Parse the output of :func:`format_prediction`.

    Raises:
        ValueError: If machine lines are missing, out of order or contain non-integers
    """
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines:
        raise ValueError("Empty prediction")

    if not lines[0].startswith("machine"):
        if len(lines) != 1:
            raise ValueError("A single order must be one line")
        return SingleOrder(tuple(int(token) for token in lines[0].split()))

    orders = []
    for expected, line in enumerate(lines, 1):
        match = _MACHINE_LINE.match(line)
        if not match or int(match.group(1)) != expected:
            raise ValueError(f"Expected 'machine {expected}: ...', got {line!r}")
        orders.append(tuple(int(token) for token in match.group(2).split()))
    return Assigned(tuple(orders))


def format_error_record(record: Dict[str, Optional[float]]) -> str:
    """Format an ``eta_s eta_r ell1 nu`` record as one line; unset values print as '-'."""
    return " ".join(
        f"{key}={'-' if record.get(key) is None else format(record[key], '.6g')}"
        for key in ("eta_s", "eta_r", "ell1", "nu")
    )


def format_check_table(results: Iterable) -> str:
    """
    Format verification results as an aligned text table.

    Args:
        results: CheckResult objects

    Returns:
        Table with one row per check
    """
    rows = [("suite", "check", "trials", "failed", "first seed", "detail")]
    for result in results:
        rows.append(
            (
                result.suite,
                result.name,
                str(result.trials),
                str(result.failures),
                "-" if result.first_failure_seed is None else str(result.first_failure_seed),
                result.detail,
            )
        )
    widths = [max(len(row[column]) for row in rows) for column in range(5)]
    return "\n".join(
        "  ".join(cell.ljust(width) for cell, width in zip(row[:5], widths)) + ("  " + row[5] if row[5] else "")
        for row in rows
    ).rstrip() + "\n"
