"""File formats: mono WAV audio, JSON documents, and CSV reports.

All text output is deterministic: JSON uses two-space indentation and
insertion-ordered keys, floats are serialised with ``repr`` (shortest
round-trip), and every file uses LF line endings.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import ConfigError
from .signal import Rir

_INT_SCALES = {np.dtype(np.int16): 32768.0, np.dtype(np.int32): 2147483648.0}


def read_wav(path, position_id: str | None = None) -> Rir:
    """Read a mono WAV file (16-bit PCM, 32-bit PCM, or float)."""
    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise ValueError(f"{path}: only mono WAV files are supported")
    if data.dtype in _INT_SCALES:
        data = data.astype(np.float64) / _INT_SCALES[data.dtype]
    else:
        data = data.astype(np.float64)
    return Rir(data, int(rate), position_id=position_id)


def write_wav(path, rir: Rir):
    """Write a RIR as a 32-bit float mono WAV file."""
    wavfile.write(path, rir.sample_rate, rir.samples.astype(np.float32))


def _pyify(obj):
    """Convert numpy scalars/arrays to plain Python types for JSON."""
    if isinstance(obj, dict):
        return {k: _pyify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_pyify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_pyify(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def write_json(path, document: dict):
    """Serialise a JSON document deterministically (LF, indent 2)."""
    text = json.dumps(_pyify(document), indent=2, ensure_ascii=False)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def format_cell(value) -> str:
    """One CSV cell: floats via repr, everything else via str."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows):
    """Write a CSV report with a header row and LF line endings."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_cell(v) for v in row) + "\n")


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise ConfigError(f"{path}: {message}")


def validate_simulation_config(cfg: dict) -> dict:
    """Validate a simulation config, raising ``ConfigError`` with the field path.

    Required shape::

        {"sample_rate": int > 0, "length": int > 0, "seed": int,
         "positions": [{"id": str, "decay_rates": [float > 0, ...]}, ...]}
    """
    _require(isinstance(cfg, dict), "$", "config must be a JSON object")
    for key in ("sample_rate", "length", "seed", "positions"):
        _require(key in cfg, key, "missing required field")
    _require(
        isinstance(cfg["sample_rate"], int) and cfg["sample_rate"] > 0,
        "sample_rate", "must be a positive integer",
    )
    _require(
        isinstance(cfg["length"], int) and cfg["length"] > 0,
        "length", "must be a positive integer",
    )
    _require(isinstance(cfg["seed"], int), "seed", "must be an integer")
    _require(isinstance(cfg["positions"], list), "positions", "must be a list")
    seen = set()
    for i, pos in enumerate(cfg["positions"]):
        where = f"positions[{i}]"
        _require(isinstance(pos, dict), where, "must be an object")
        _require("id" in pos, f"{where}.id", "missing required field")
        _require(
            isinstance(pos["id"], str) and pos["id"], f"{where}.id",
            "must be a non-empty string",
        )
        _require(pos["id"] not in seen, f"{where}.id", f"duplicate id {pos['id']!r}")
        seen.add(pos["id"])
        _require("decay_rates" in pos, f"{where}.decay_rates", "missing required field")
        rates = pos["decay_rates"]
        _require(
            isinstance(rates, list) and len(rates) > 0,
            f"{where}.decay_rates", "must be a non-empty list",
        )
        for j, rate in enumerate(rates):
            _require(
                isinstance(rate, (int, float)) and rate > 0,
                f"{where}.decay_rates[{j}]", "must be a positive number",
            )
    return cfg


def position_seed(master_seed: int, index: int) -> int:
    """Deterministic per-position chain seed derived from the master seed."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def dataset_path(dataset_dir, position_id: str) -> Path:
    return Path(dataset_dir) / f"{position_id}.wav"
