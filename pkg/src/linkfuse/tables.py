"""Aligned per-pair feature tables and their CSV round-trip."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass
class FeatureTable:
    """One modality's features for a fixed pair list.

    ``values`` has one row per pair (zeros where unavailable) and ``available``
    marks the rows that actually carry this modality.
    """

    modality: str
    names: tuple[str, ...]
    values: np.ndarray  # (n_pairs, dim) float64
    available: np.ndarray  # (n_pairs,) bool

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.available = np.asarray(self.available, dtype=bool)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.names):
            raise DataError("feature table shape does not match its column names")
        if self.available.shape != (self.values.shape[0],):
            raise DataError("availability mask misaligned with feature rows")

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def write_features_csv(table: FeatureTable, pairs, path) -> None:
    """Dump available rows as ``u,v,<feature columns>`` with a header."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("u", "v") + table.names)
        for i, p in enumerate(pairs):
            if table.available[i]:
                writer.writerow([p.u, p.v] + [repr(float(x)) for x in table.values[i]])


def read_features_csv(path, pairs, modality: str) -> FeatureTable:
    """Rebuild a table aligned to ``pairs`` from a dump written by write_features_csv."""
    index = {(p.u, p.v): i for i, p in enumerate(pairs)}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["u", "v"]:
            raise DataError(f"{path}: missing feature CSV header")
        names = tuple(header[2:])
        values = np.zeros((len(pairs), len(names)), dtype=np.float64)
        available = np.zeros(len(pairs), dtype=bool)
        for row in reader:
            key = (int(row[0]), int(row[1]))
            if key not in index:
                raise DataError(f"{path}: row for unknown pair {key}")
            i = index[key]
            values[i] = [float(x) for x in row[2:]]
            available[i] = True
    return FeatureTable(modality=modality, names=names, values=values, available=available)
