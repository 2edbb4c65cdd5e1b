"""
Utility functions for the geodesic lab

Filesystem and formatting helpers shared by the integrator, the entropy lab
and the run orchestrator.
"""

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Optional, Union

import aiofiles
import aiofiles.os
import numpy as np

OUTPUT_DIR_ENV = "GEODESIC_LAB_OUTPUT_DIR"


def ensure_directory(path: Union[str, Path]) -> Path:
    """
    Ensure a directory exists, creating it if necessary.

    Args:
        path: Directory path to ensure exists

    Returns:
        Path object of the ensured directory
    """
    path_obj = Path(path).expanduser().resolve()
    path_obj.mkdir(parents=True, exist_ok=True)
    return path_obj


def resolve_output_dir(configured: Optional[Union[str, Path]] = None) -> Path:
    """
    Output directory: the environment override wins over the configured one.

    Args:
        configured: directory named in the run config (default ``./runs``)

    Returns:
        Existing directory path
    """
    override = os.environ.get(OUTPUT_DIR_ENV)
    return ensure_directory(override or configured or "runs")


def atomic_write_text(path: Union[str, Path], text: str) -> Path:
    """Write-then-rename so readers never see a partial file."""
    target = Path(path)
    ensure_directory(target.parent)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return target


async def atomic_write_text_async(path: Union[str, Path], text: str) -> Path:
    """Async variant of ``atomic_write_text`` for the run orchestrator."""
    target = Path(path)
    ensure_directory(target.parent)
    tmp = target.with_name(f".{target.name}.tmp")
    async with aiofiles.open(tmp, "w", encoding="utf-8", newline="") as fh:
        await fh.write(text)
    await aiofiles.os.replace(tmp, target)
    return target


def to_jsonable(value: Any) -> Any:
    """Convert numpy containers and scalars to plain JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if np.isfinite(v) else repr(v)
    return value


def dumps_deterministic(data: Any) -> str:
    """Stable JSON text (sorted keys, fixed indentation, trailing newline)."""
    return json.dumps(to_jsonable(data), indent=2, sort_keys=True) + "\n"


def format_verdict(passed: bool, label: str, measured: float, threshold: float) -> str:
    mark = "✅" if passed else "❌"
    return f"{mark} {label}: {measured:.3e} (threshold {threshold:.1e})"
