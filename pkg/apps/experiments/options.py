"""
Command-line options shared by the `run` and `sweep` management commands.

Every option defaults to None so an experiment file can fill it in; the value
parsers below are reused for config-file values, so `--tasks 100:500:100` and a
`tasks=100:500:100` line mean the same thing.
"""

from argparse import ArgumentParser

from apps.engine.config import parse_crash
from apps.protocol.messages import Method
from core.exceptions import InvalidParameterError


def int_list(value: str) -> list[int]:
    """
    Parse `100,200` or an inclusive `start:stop:step` range (items may be mixed).

    Raises:
        InvalidParameterError: On an empty list, a non-integer or a non-positive step.
    """
    values: list[int] = []
    for item in value.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        try:
            if len(parts) == 1:
                values.append(int(parts[0]))
                continue
            if len(parts) != 3:
                raise ValueError
            start, stop, step = (int(p) for p in parts)
        except ValueError:
            raise InvalidParameterError(f"Expected an integer or start:stop:step, got '{item}'.") from None
        if step <= 0:
            raise InvalidParameterError(f"Range step must be positive in '{item}'.")
        values.extend(range(start, stop + 1, step))
    if not values:
        raise InvalidParameterError(f"Empty integer list '{value}'.")
    return values


def method_list(value: str) -> list[Method]:
    methods = [Method.parse(item.strip()) for item in value.split(",") if item.strip()]
    if not methods:
        raise InvalidParameterError(f"Empty method list '{value}'.")
    return list(dict.fromkeys(methods))


def crash_list(value: str) -> list[tuple[float, int]]:
    return [parse_crash(item.strip()) for item in value.split(",") if item.strip()]


def positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise InvalidParameterError(f"Expected an integer, got '{value}'.") from None
    if number < 1:
        raise InvalidParameterError(f"Expected a positive integer, got {number}.")
    return number


def flag(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise InvalidParameterError(f"Expected a boolean, got '{value}'.")


# Config-file key -> parser. Keys are the flag names with dashes as underscores.
FILE_PARSERS = {
    "method": Method.parse,
    "methods": method_list,
    "nodes": int_list,
    "tasks": int_list,
    "reps": positive_int,
    "seed": int,
    "cr": float,
    "mr": float,
    "timeout": float,
    "topology": str,
    "mu": float,
    "sigma": float,
    "crash": crash_list,
    "max_time": float,
    "claim_grace": float,
    "no_propagation": flag,
    "out": str,
    "label": str,
}


def add_experiment_arguments(parser: ArgumentParser) -> None:
    """Options common to every command that runs simulations."""
    parser.add_argument("--nodes", type=int_list, help="Node counts, e.g. 100 or 100,200 or 100:400:100")
    parser.add_argument("--tasks", type=int_list, help="Task counts, same syntax as --nodes")
    parser.add_argument("--reps", type=positive_int, help="Repetitions per cell (seeds seed..seed+reps-1)")
    parser.add_argument("--seed", type=int, help="Base seed (default: GRIDWALK_SEED or 1)")
    parser.add_argument("--cr", type=float, help="Refresh coefficient c_r (default 1000)")
    parser.add_argument("--mr", type=float, help="Minimal refresh m_r (default 1500)")
    parser.add_argument("--timeout", type=float, help="Feedback timeout (default 2*n hops)")
    parser.add_argument("--topology", help="ring | complete | path | random:<p> | file:<path>")
    parser.add_argument("--mu", type=float, help="Log-normal mean of task lengths")
    parser.add_argument("--sigma", type=float, help="Log-normal sigma of task lengths")
    parser.add_argument(
        "--crash",
        type=parse_crash,
        action="append",
        metavar="TIME@NODE",
        help="Crash NODE at TIME (repeatable)",
    )
    parser.add_argument("--max-time", type=float, help="Simulated-time cap")
    parser.add_argument("--claim-grace", type=float, help="Enable stale-claim reclaim with this grace")
    parser.add_argument(
        "--no-propagation",
        action="store_const",
        const=True,
        help="Stop at the last completion instead of measuring t_propagate",
    )
    parser.add_argument("--config", help="Experiment file of key=value lines; flags win")
    parser.add_argument("--out", help="CSV output path (default: stdout)")
    parser.add_argument("--save", action="store_true", help="Also store every run in the database")
    parser.add_argument("--label", help="Label stored with --save")
