"""Deterministic on-disk formats: CSV, JSON, and timestamp-free NPZ.

Re-running any command with the same inputs must reproduce output files
byte-for-byte, so every writer here avoids wall-clock state (NPZ normally
embeds zip member timestamps) and uses explicit float formatting.
"""
from __future__ import annotations

import io
import json
import os
import zipfile

import numpy as np

_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if np.isnan(f):
            return "nan"
        if np.isinf(f):
            return "inf" if f > 0 else "-inf"
        return repr(f)
    return str(v)


def write_csv(path, header, rows):
    """Write rows (iterables matching header) with deterministic formatting."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    _write_text(path, "\n".join(lines) + "\n")


def write_json(path, payload):
    _write_text(path, json.dumps(_plainify(payload), sort_keys=True, indent=2) + "\n")


def _plainify(obj):
    if isinstance(obj, dict):
        return {str(k): _plainify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plainify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plainify(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_text(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def savez_deterministic(path, **arrays):
    """NPZ (np.load-compatible) with fixed zip timestamps and no compression."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asarray(arrays[name]), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_EPOCH)
            zf.writestr(info, buf.getvalue())


def load_npz(path) -> dict:
    out = {}
    with np.load(path, allow_pickle=False) as data:
        for name in data.files:
            out[name] = np.array(data[name])
    return out
