"""File formats: mixture/tree/centers JSON, dataset CSV, report JSON.

All JSON artifacts carry ``format_version: 1`` and are written with a fixed
key order and two-space indentation, so identical inputs produce
byte-identical files.  Dataset CSV uses a ``x1..xd[,label]`` header with '.'
decimals; labels are 0-based component indices.
"""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .kernel import KernelTree
from .mixture import LabeledDataset, MixtureModel
from .tree import AxisTree


def dumps_json(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc


def _parse_json(text: str, path) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}") from exc


def save_json(path, payload: dict) -> None:
    Path(path).write_text(dumps_json(payload), encoding="utf-8")


def load_mixture(path) -> MixtureModel:
    data = _parse_json(_read_text(path), path)
    try:
        return MixtureModel.from_dict(data)
    except KeyError as exc:
        raise FormatError(f"{path}: missing field {exc}") from exc


def save_mixture(path, model: MixtureModel) -> None:
    save_json(path, model.to_dict())


def load_tree(path) -> AxisTree | KernelTree:
    data = _parse_json(_read_text(path), path)
    kind = data.get("kind")
    try:
        if kind == "axis":
            return AxisTree.from_dict(data)
        if kind == "kernel":
            return KernelTree.from_dict(data)
    except KeyError as exc:
        raise FormatError(f"{path}: missing field {exc}") from exc
    raise FormatError(f"{path}: unknown tree kind {kind!r}")


def save_tree(path, tree: AxisTree | KernelTree) -> None:
    save_json(path, tree.to_dict())


def load_centers(path) -> np.ndarray:
    data = _parse_json(_read_text(path), path)
    try:
        centers = np.asarray(data["centers"], dtype=float)
    except KeyError as exc:
        raise FormatError(f"{path}: missing field {exc}") from exc
    if centers.ndim != 2:
        raise FormatError(f"{path}: centers must be a 2-D array")
    return centers


def save_centers(path, centers: np.ndarray) -> None:
    save_json(path, {"format_version": 1, "centers": np.asarray(centers, dtype=float).tolist()})


def dataset_to_csv(data: LabeledDataset) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = [f"x{j + 1}" for j in range(data.dim)]
    if data.labels is not None:
        header.append("label")
    writer.writerow(header)
    for i in range(data.n):
        row = [repr(float(v)) for v in data.points[i]]
        if data.labels is not None:
            row.append(str(int(data.labels[i])))
        writer.writerow(row)
    return buf.getvalue()


def save_dataset(path, data: LabeledDataset) -> None:
    Path(path).write_text(dataset_to_csv(data), encoding="utf-8")


def load_dataset(path) -> LabeledDataset:
    text = _read_text(path)
    reader = csv.reader(_io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError(f"{path}: empty CSV") from None
    header = [h.strip() for h in header]
    has_label = bool(header) and header[-1] == "label"
    dim = len(header) - (1 if has_label else 0)
    if dim < 1 or [h for h in header[:dim]] != [f"x{j + 1}" for j in range(dim)]:
        raise FormatError(f"{path}: expected header x1..xd[,label], got {header}")
    points, labels = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"{path}: line {lineno} has {len(row)} fields, expected {len(header)}")
        try:
            points.append([float(v) for v in row[:dim]])
            if has_label:
                labels.append(int(row[dim]))
        except ValueError as exc:
            raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    try:
        return LabeledDataset(
            points=np.array(points, dtype=float),
            labels=np.array(labels, dtype=int) if has_label else None,
        )
    except ValidationError as exc:
        raise FormatError(f"{path}: {exc}") from exc
