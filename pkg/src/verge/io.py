"""File formats: data CSVs, flat YAML/JSON config files and JSON-lines traces."""

import csv
import json
import re

import numpy as np
import yaml

from .model import EmptyTraceError, KernelParams, Trace, TraceRecord, ValidationError

_COLUMN = re.compile(r"^([xz])(\d+)$")


def read_dataset_csv(path):
    """Read a CSV with header ``y, x1..xP, z1..zK``; ``y`` may be absent.

    Returns ``(y, X, Z)`` with ``y`` set to ``None`` when the column is missing.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric entry ({exc})") from None
    if data.shape[1] != len(header):
        raise ValidationError(f"{path}: rows do not match the header width")

    cols = {"x": {}, "z": {}}
    y = None
    for i, name in enumerate(header):
        if name == "y":
            y = data[:, i]
            continue
        m = _COLUMN.match(name)
        if not m:
            raise ValidationError(f"{path}: unexpected column {name!r}")
        cols[m.group(1)][int(m.group(2))] = i
    for kind in ("x", "z"):
        idx = sorted(cols[kind])
        if not idx or idx != list(range(1, len(idx) + 1)):
            raise ValidationError(f"{path}: {kind} columns must be numbered 1..N without gaps")
    X = data[:, [cols["x"][i] for i in sorted(cols["x"])]]
    Z = data[:, [cols["z"][i] for i in sorted(cols["z"])]]
    return y, X, Z


def write_dataset_csv(path, y, X, Z):
    X = np.asarray(X)
    Z = np.asarray(Z)
    header = ([] if y is None else ["y"]) + [f"x{j + 1}" for j in range(X.shape[1])] \
        + [f"z{k + 1}" for k in range(Z.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(X.shape[0]):
            row = ([] if y is None else [repr(float(y[i]))]) \
                + [repr(float(v)) for v in X[i]] + [repr(float(v)) for v in Z[i]]
            w.writerow(row)


def load_config(path):
    """Flat key/value mapping from a YAML (or JSON) file."""
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: config must be a mapping of keys to values")
    for k, v in data.items():
        if isinstance(v, (dict, list)) and k not in ("run", "hyper"):
            raise ValidationError(f"{path}: key {k!r} must hold a scalar")
    return data


def _record_to_json(rec):
    return {
        "gamma": rec.gamma.astype(int).tolist(),
        "gamma_tilde": rec.gamma_tilde.astype(int).tolist(),
        "edges": [list(e) for e in rec.edges],
        "tau2": float(rec.tau2),
        "beta": {str(j): b.tolist() for j, b in sorted(rec.beta.items())},
        "params": {str(j): {"rho": p.rho.tolist(), "lambda_a": p.lambda_a,
                            "lambda_z": p.lambda_z, "r": p.r}
                   for j, p in sorted(rec.params.items())},
    }


def _record_from_json(d):
    gamma_tilde = np.array(d["gamma_tilde"], dtype=np.int8)
    params = {
        int(j): KernelParams(gamma_tilde[int(j)].copy(), np.array(p["rho"], dtype=float),
                             float(p["lambda_a"]), float(p["lambda_z"]), float(p["r"]))
        for j, p in d["params"].items()
    }
    return TraceRecord(
        gamma=np.array(d["gamma"], dtype=np.int8),
        gamma_tilde=gamma_tilde,
        edges=[tuple(e) for e in d["edges"]],
        tau2=float(d["tau2"]),
        beta={int(j): np.array(b, dtype=float) for j, b in d["beta"].items()},
        params=params,
    )


def write_trace(path, trace):
    """JSON lines: a ``{"meta": ...}`` header followed by one object per record."""
    with open(path, "w") as fh:
        fh.write(json.dumps({"meta": trace.meta}, sort_keys=True) + "\n")
        for rec in trace.records:
            fh.write(json.dumps(_record_to_json(rec), sort_keys=True) + "\n")


def read_trace(path):
    with open(path) as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise EmptyTraceError(f"{path}: empty trace file")
    try:
        head = json.loads(lines[0])
        meta = head["meta"]
        records = [_record_from_json(json.loads(line)) for line in lines[1:]]
    except (KeyError, ValueError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed trace ({exc})") from None
    return Trace(records=records, meta=meta)
