"""
Utility functions: environment variable replacement, path resolution,
content fingerprints, float formatting, seeding and the thread budget.
"""

import hashlib
import json
import logging
import os
from pathlib import Path

import numpy as np

from globalctl.constants import ENV_THREADS, FLOAT_DIGITS

logger = logging.getLogger(__name__)


def replace_env_vars(input: str | None) -> str | None:
    """
    Replaces %VARNAME% placeholders with values from the OS environment.

    Matching ignores case, so ``%home%`` and ``%HOME%`` both expand.

    Args:
        input: String that may contain placeholders

    Returns:
        String with placeholders replaced, or None if input is None
    """
    if input is None:
        return None
    output = input
    output_uc = input.upper()
    for key, value in os.environ.items():
        placeholder = f"%{key.upper()}%"
        while placeholder in output_uc:
            start = output_uc.find(placeholder)
            output = output[:start] + value + output[start + len(placeholder) :]
            output_uc = output.upper()
    return output


def resolve_path(path: str | None) -> str | None:
    """
    Resolve a path: expand %VAR% placeholders and ~, then make it absolute.

    Args:
        path: Path string, possibly relative or containing placeholders

    Returns:
        Absolute path string, or None if input is None
    """
    if path is None:
        return None

    resolved = replace_env_vars(path)
    if resolved is None:
        return None

    resolved = os.path.expanduser(resolved)
    return str(Path(resolved).resolve())


def format_float(value: float) -> str:
    """
    Format a float with 17 significant digits, which round-trips bit-exactly.

    Args:
        value: Float to format

    Returns:
        Decimal representation; always contains a '.', 'e', 'inf' or 'nan'
    """
    text = format(float(value), f".{FLOAT_DIGITS}g")
    if not any(marker in text for marker in (".", "e", "n")):
        text += ".0"
    return text


def to_json_text(obj) -> str:
    """
    Compact JSON rendering with floats written at full precision.

    The standard encoder writes the shortest repr; the pulse-program format
    fixes 17 significant digits, so floats are rendered here.

    Args:
        obj: JSON-compatible structure of dict, list, str, int, float, bool, None

    Returns:
        JSON text on one line
    """
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k))}: {to_json_text(v)}" for k, v in obj.items())
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(to_json_text(v) for v in obj) + "]"
    raise TypeError(f"Cannot render {type(obj).__name__} as JSON")


def content_hash(document: dict) -> str:
    """
    Stable SHA-256 hex digest of a JSON-compatible document.

    Keys are sorted so that dict ordering never changes the digest.

    Args:
        document: JSON-compatible dict

    Returns:
        Hex digest string
    """
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def derive_seed(master_seed: int, index: int) -> int:
    """
    Derive a per-trial seed from a master seed and a trial index.

    The pair is fed to numpy's SeedSequence as entropy and the first 64-bit
    word of its generated state is the trial seed. Distinct (master, index)
    pairs give statistically independent streams.

    Args:
        master_seed: Non-negative master seed
        index: Non-negative trial index

    Returns:
        Non-negative integer seed
    """
    sequence = np.random.SeedSequence([int(master_seed), int(index)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int | None) -> np.random.Generator:
    """Create the PCG64 generator used by every simulator entry point."""
    return np.random.default_rng(0 if seed is None else int(seed))


def thread_budget() -> int:
    """
    Number of worker threads allowed by GLOBALCTL_THREADS.

    Returns:
        Positive thread count; 1 when unset or invalid
    """
    raw = os.environ.get(ENV_THREADS)
    if raw is None or raw == "":
        return 1
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {ENV_THREADS}={raw!r}")
        return 1
    if value < 1:
        logger.warning(f"Ignoring non-positive {ENV_THREADS}={raw!r}")
        return 1
    return value
