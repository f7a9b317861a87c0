"""Dataset ingestion, schema validation and report serialization.

Datasets are plain CSV (comma separator, header row required) accompanied by
a JSON schema: a list of column descriptors ``{"name": ..., "type": ...}``
with ``type`` one of ``continuous``, ``truncated``, ``ordinal``, ``binary``
and an additional ``"levels"`` count for ordinal columns.  Empty cells and
the literal ``NA`` are missing values; missing cells never coerce to 0.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bridge import BINARY, CONTINUOUS, ORDINAL, TRUNCATED
from .exceptions import (IoError, ParseError, SchemaMismatchError,
                         ValidationError)

COLUMN_TYPES = (CONTINUOUS, TRUNCATED, ORDINAL, BINARY)


@dataclass
class ColumnSpec:
    name: str
    type: str
    levels: int | None = None
    # original ordinal codes in sorted order, recorded when remapped to 0..l-1
    code_map: list | None = None

    def __post_init__(self):
        if self.type not in COLUMN_TYPES:
            raise ValidationError("column-type", f"unknown column type {self.type!r}")
        if self.type == ORDINAL:
            if self.levels is None or int(self.levels) < 2:
                raise ValidationError(
                    "ordinal-levels", f"ordinal column {self.name!r} needs levels >= 2")
            self.levels = int(self.levels)
        elif self.levels is not None:
            raise ValidationError(
                "levels-placement", f"column {self.name!r}: only ordinal columns take levels")


@dataclass
class MixedDataset:
    """n x p observed values (NaN marks missing) plus per-column metadata."""

    values: np.ndarray
    schema: list[ColumnSpec] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValidationError("shape", "values must be a 2-d array")
        if len(self.schema) != self.values.shape[1]:
            raise ValidationError(
                "schema-width",
                f"schema has {len(self.schema)} columns, data has {self.values.shape[1]}")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    @property
    def names(self):
        return [c.name for c in self.schema]

    @property
    def types(self):
        return [c.type for c in self.schema]

    def column(self, j):
        return self.values[:, j]

    def index_of(self, name):
        for j, c in enumerate(self.schema):
            if c.name == name:
                return j
        raise ValidationError("unknown-column", f"no column named {name!r}")


def load_schema(path):
    """Read a schema JSON file into ColumnSpec objects."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaMismatchError(f"cannot read schema {path!r}: {exc}")
    if not isinstance(raw, list) or not raw:
        raise SchemaMismatchError("schema must be a non-empty JSON array of columns")
    specs = []
    for item in raw:
        if not isinstance(item, dict) or "name" not in item or "type" not in item:
            raise SchemaMismatchError(f"bad column descriptor: {item!r}")
        specs.append(ColumnSpec(name=str(item["name"]), type=str(item["type"]),
                                levels=item.get("levels")))
    return specs


def _parse_cell(text, row, col_name):
    text = text.strip()
    if text == "" or text == "NA":
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise ParseError(row, col_name, f"cannot parse {text!r} as a number")


def validate_dataset(dataset):
    """Enforce the per-type value rules; remaps ordinal codes to 0..levels-1.

    Binary columns must be {0, 1}; truncated columns nonnegative; continuous
    columns finite; ordinal columns integer-coded, either already 0..l-1 or
    carrying exactly ``levels`` distinct codes which are remapped by rank
    (the mapping is recorded on the column spec).
    """
    vals = dataset.values
    for j, col in enumerate(dataset.schema):
        x = vals[:, j]
        obs = x[~np.isnan(x)]
        if col.type == CONTINUOUS:
            if obs.size and not np.all(np.isfinite(obs)):
                raise ValidationError(
                    "continuous-finite", f"column {col.name!r} has non-finite values")
        elif col.type == BINARY:
            bad = obs[(obs != 0.0) & (obs != 1.0)]
            if bad.size:
                row = int(np.flatnonzero(~np.isnan(x) & (x != 0) & (x != 1))[0])
                raise ValidationError(
                    "binary-domain",
                    f"column {col.name!r}, row {row}: value {bad[0]!r} outside {{0, 1}}")
        elif col.type == TRUNCATED:
            if obs.size and np.any(obs < 0):
                row = int(np.flatnonzero(~np.isnan(x) & (x < 0))[0])
                raise ValidationError(
                    "truncated-nonnegative",
                    f"column {col.name!r}, row {row}: negative value in truncated column")
        else:
            if obs.size and np.any(obs != np.round(obs)):
                raise ValidationError(
                    "ordinal-integer", f"column {col.name!r} has non-integer codes")
            codes = np.unique(obs).astype(int)
            if codes.size and (codes.min() < 0 or codes.max() > col.levels - 1):
                if codes.size != col.levels:
                    raise ValidationError(
                        "ordinal-codes",
                        f"column {col.name!r}: codes {codes.tolist()} are neither "
                        f"0..{col.levels - 1} nor {col.levels} distinct values to remap")
                remap = {c: r for r, c in enumerate(codes.tolist())}
                col.code_map = codes.tolist()
                nonmiss = ~np.isnan(x)
                vals[nonmiss, j] = [remap[int(v)] for v in x[nonmiss]]
    return dataset


def load_csv(path, schema_path):
    """Load and validate a CSV dataset against its schema."""
    schema = load_schema(schema_path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaMismatchError(f"{path!r} is empty")
            header = [h.strip() for h in header]
            if header != [c.name for c in schema]:
                raise SchemaMismatchError(
                    f"header {header!r} does not match schema columns "
                    f"{[c.name for c in schema]!r}")
            rows = []
            for i, row in enumerate(reader):
                if len(row) != len(schema):
                    raise ParseError(i, "<row>", f"expected {len(schema)} fields, got {len(row)}")
                rows.append([_parse_cell(cell, i, schema[j].name)
                             for j, cell in enumerate(row)])
    except OSError as exc:
        raise IoError(f"cannot read {path!r}: {exc}")
    values = np.array(rows, dtype=float).reshape(len(rows), len(schema))
    return validate_dataset(MixedDataset(values=values, schema=schema))


def _round12(obj):
    """Recursively round floats to 12 significant digits for stable output."""
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round12(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return _round12(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def correlation_report(latent, names=None, meta=None):
    """JSON-ready dict for a latent correlation estimate."""
    doc = {
        "sigma": latent.sigma,
        "projected": bool(latent.projected),
        "saturated_pairs": [[int(j), int(k)] for j, k in latent.saturated_pairs],
    }
    if names is not None:
        doc["columns"] = list(names)
    if meta:
        doc["meta"] = meta
    return _round12(doc)


def regression_report(fit, names, n, confidence, meta=None):
    """JSON-ready dict for a regression fit."""
    beta = {names[j]: float(b) for j, b in zip(fit.predictors, fit.beta)}
    doc = {
        "outcome": names[fit.outcome],
        "beta": beta,
        "ci": {names[j]: [float(lo), float(hi)]
               for j, (lo, hi) in zip(fit.predictors, fit.ci)} if fit.ci is not None else None,
        "r2_latent": float(fit.r2_latent),
        "n": int(n),
        "confidence": float(confidence),
    }
    if meta:
        doc["meta"] = meta
    return _round12(doc)


def write_report(doc, path, fmt="json"):
    """Serialize a report dict (or matrix) to JSON or CSV with 12 significant digits."""
    try:
        if fmt == "json":
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(_round12(doc), fh, indent=2, sort_keys=False)
                fh.write("\n")
        elif fmt == "csv":
            _write_csv(doc, path)
        else:
            raise IoError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise IoError(f"cannot write {path!r}: {exc}")


def _write_csv(doc, path):
    if isinstance(doc, dict) and "sigma" in doc:
        matrix = np.asarray(doc["sigma"], dtype=float)
        names = doc.get("columns") or [f"c{i}" for i in range(matrix.shape[0])]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for row in matrix:
                w.writerow([f"{v:.12g}" for v in row])
    elif isinstance(doc, np.ndarray) or (isinstance(doc, list) and doc
                                         and isinstance(doc[0], (list, np.ndarray))):
        matrix = np.asarray(doc, dtype=float)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            for row in matrix:
                w.writerow([f"{v:.12g}" for v in row])
    else:
        raise IoError("csv format supports matrix-like reports only")


def read_report(path):
    """Read back a JSON report (round-trip counterpart of write_report)."""
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IoError(f"cannot read report {path!r}: {exc}")


def write_dataset_csv(dataset, path, digits=12):
    """Write a dataset's values as CSV with the schema's column names."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(dataset.names)
        for row in dataset.values:
            out = []
            for col, v in zip(dataset.schema, row):
                if math.isnan(v):
                    out.append("NA")
                elif col.type in (BINARY, ORDINAL):
                    out.append(str(int(v)))
                else:
                    out.append(f"{v:.{digits}g}")
            w.writerow(out)


def write_schema(schema, path):
    """Write ColumnSpec objects back to schema JSON."""
    doc = []
    for c in schema:
        item = {"name": c.name, "type": c.type}
        if c.type == ORDINAL:
            item["levels"] = c.levels
        doc.append(item)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
