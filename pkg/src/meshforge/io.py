"""JSON / CSV interchange formats.

* matrix:  {"n": N, "re": [[...]], "im": [[...]]}
* model:   {"n_modes": N, "n_mixers": L, "basis": [matrix, ...]}
* dataset: {"device_meta": {...}, "alpha": a, "pairs": [{"phases": [[...]], "unitary": matrix}, ...]}
* trace:   CSV with header epoch,j_train,j_test

Floats are written with Python's shortest round-trip repr, so parsing a
written file reproduces every double exactly.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .learn import ConvergenceTrace, Dataset
from .matcore import TOL_UNITARY, ShapeError, check_unitary
from .mesh import MeshModel, wrap_phases


class FormatError(ValueError):
    """File content does not match the expected schema."""


def matrix_to_dict(a) -> dict:
    a = np.asarray(a, dtype=np.complex128)
    return {"n": int(a.shape[0]), "re": a.real.tolist(), "im": a.imag.tolist()}


def matrix_from_dict(d) -> np.ndarray:
    try:
        n = int(d["n"])
        re = np.asarray(d["re"], dtype=float)
        im = np.asarray(d["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed matrix object: {exc}") from exc
    if re.shape != (n, n) or im.shape != (n, n):
        raise FormatError(f"matrix of size n={n} has re {re.shape} and im {im.shape}")
    a = re + 1j * im
    if not np.all(np.isfinite(a)):
        raise FormatError("matrix has non-finite entries")
    return a


def model_to_dict(model: MeshModel) -> dict:
    return {
        "n_modes": model.n_modes,
        "n_mixers": model.n_mixers,
        "basis": [matrix_to_dict(u) for u in model.basis],
    }


def model_from_dict(d, tol: float = TOL_UNITARY) -> MeshModel:
    try:
        n, L, basis = int(d["n_modes"]), int(d["n_mixers"]), d["basis"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed model object: {exc}") from exc
    if len(basis) != L or L < 1:
        raise FormatError(f"model declares {L} mixers but lists {len(basis)} basis matrices")
    mats = [matrix_from_dict(b) for b in basis]
    for i, u in enumerate(mats):
        if u.shape != (n, n):
            raise FormatError(f"basis matrix {i} has shape {u.shape}, expected ({n}, {n})")
        try:
            check_unitary(u, tol, name=f"basis matrix {i}")
        except ValueError as exc:
            raise FormatError(str(exc)) from exc
    return MeshModel(np.stack(mats))


def dataset_to_dict(data: Dataset, device_meta: dict | None = None) -> dict:
    meta = dict(device_meta or {})
    meta.setdefault("n_modes", data.n_modes)
    meta.setdefault("n_mixers", data.phase_shape[0] - 1)
    return {
        "device_meta": meta,
        "alpha": float(data.provenance.get("alpha", 0.0)),
        "pairs": [
            {"phases": wrap_phases(p).tolist(), "unitary": matrix_to_dict(u)}
            for p, u in zip(data.phases, data.unitaries)
        ],
    }


def dataset_from_dict(d) -> Dataset:
    try:
        pairs = d["pairs"]
        alpha = float(d.get("alpha", 0.0))
        meta = dict(d.get("device_meta", {}))
        phases = [np.asarray(p["phases"], dtype=float) for p in pairs]
        mats = [matrix_from_dict(p["unitary"]) for p in pairs]
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise FormatError(f"malformed dataset object: {exc}") from exc
    if not pairs:
        raise FormatError("dataset has no pairs")
    if len({p.shape for p in phases}) != 1 or len({u.shape for u in mats}) != 1:
        raise FormatError("dataset pairs have inconsistent shapes")
    for i, u in enumerate(mats):
        try:
            check_unitary(u, name=f"pair {i} unitary")
        except ValueError as exc:
            raise FormatError(str(exc)) from exc
    try:
        return Dataset(np.stack(phases), np.stack(mats), {"alpha": alpha, "device_meta": meta})
    except ShapeError as exc:
        raise FormatError(str(exc)) from exc


def dumps(obj) -> str:
    return json.dumps(obj, indent=1) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def save_matrix(path, a):
    write_json(path, matrix_to_dict(a))


def load_matrix(path) -> np.ndarray:
    return matrix_from_dict(read_json(path))


def save_model(path, model: MeshModel):
    write_json(path, model_to_dict(model))


def load_model(path) -> MeshModel:
    return model_from_dict(read_json(path))


def save_dataset(path, data: Dataset, device_meta: dict | None = None):
    write_json(path, dataset_to_dict(data, device_meta))


def load_dataset(path) -> Dataset:
    return dataset_from_dict(read_json(path))


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows([[repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row] for row in rows])
    return buf.getvalue()


def trace_to_csv(trace: ConvergenceTrace) -> str:
    return rows_to_csv(["epoch", "j_train", "j_test"], zip(trace.epochs, trace.j_train, trace.j_test))


def trace_from_csv(text: str) -> ConvergenceTrace:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != ["epoch", "j_train", "j_test"]:
        raise FormatError(f"unexpected trace header {reader.fieldnames}")
    trace = ConvergenceTrace()
    for row in reader:
        trace.record(int(row["epoch"]), float(row["j_train"]), float(row["j_test"]))
    return trace
