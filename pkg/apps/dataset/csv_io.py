# apps/dataset/csv_io.py
"""
CSV matrices: comma separated, UTF-8, optional single header line.
"""

import csv
import logging
import math
from pathlib import Path

import numpy as np

from apps.core.exceptions import CellParseError, DataError, RaggedRowError
from .matrices import LabelVector, as_dense_matrix

logger = logging.getLogger('compressive_mbn.dataset')


def _read_rows(path, has_header):
    """Parse a rectangular numeric CSV into (line_number, cells, values) triples"""
    rows = []
    width = None
    try:
        handle = Path(path).open(newline='', encoding='utf-8')
    except OSError as exc:
        raise DataError(f"Cannot read CSV file {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        for line_number, cells in enumerate(reader, start=1):
            if has_header and line_number == 1:
                continue
            if not cells:
                continue
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise RaggedRowError(line_number, width, len(cells))
            values = []
            for cell in cells:
                try:
                    value = float(cell)
                except ValueError:
                    raise CellParseError(line_number, cell) from None
                if not math.isfinite(value):
                    raise CellParseError(line_number, cell)
                values.append(value)
            rows.append((line_number, cells, values))
    return rows, width


def load_csv(path, has_header=False):
    """Load a rectangular numeric CSV as a DenseMatrix, one row per line."""
    rows, width = _read_rows(path, has_header)
    if not rows:
        return np.zeros((0, 0), dtype=np.float64)
    logger.debug(f"Loaded {len(rows)}x{width} matrix from {path}")
    return as_dense_matrix([values for _, _, values in rows], str(path))


def load_labels_csv(path, num_classes=None, has_header=False):
    """
    Load a single-column CSV of non-negative integer labels.

    Raises:
        DataError: more than one column, or a label outside [0, num_classes)
        CellParseError: a cell that is not an integer
    """
    rows, width = _read_rows(path, has_header)
    if width is not None and width != 1:
        raise DataError(f"{path}: label files have one column, found {width}")
    labels = []
    for line_number, cells, (value,) in rows:
        if value != math.floor(value):
            raise CellParseError(line_number, cells[0])
        if value < 0:
            raise DataError(f"{path}: negative label {cells[0]!r} at line {line_number}")
        if num_classes is not None and value >= num_classes:
            raise DataError(
                f"{path}: label {cells[0]!r} at line {line_number} is outside [0, {num_classes})"
            )
        labels.append(int(value))
    return LabelVector.from_values(np.array(labels, dtype=np.int64), num_classes)


def save_csv(path, matrix, header=None):
    """Write a matrix with round-trip precision"""
    matrix = as_dense_matrix(matrix)
    with Path(path).open('w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        if header:
            writer.writerow(header)
        for row in matrix:
            writer.writerow([repr(float(value)) for value in row])


def save_labels_csv(path, labels):
    """Write labels as a single-column CSV"""
    with Path(path).open('w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        for label in labels.labels:
            writer.writerow([int(label)])


def save_int_csv(path, rows):
    """Write an integer matrix, such as per-clustering active unit indices"""
    with Path(path).open('w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        for row in np.asarray(rows, dtype=np.int64):
            writer.writerow([int(value) for value in row])
