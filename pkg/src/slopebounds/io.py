"""File formats: plain CSV matrices and vectors, atomic CSV/JSON writes."""
import csv
import io
import json
import math
import os
import tempfile

import numpy as np


def fmt_float(x):
    """17 significant digits, enough to round-trip a double."""
    return format(float(x), ".17g")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    return obj


def atomic_write_text(path, text):
    """Write ``text`` to a temporary sibling file, then rename it over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(rows, fieldnames=None):
    """CSV text for a list of dict rows; columns in first-seen order."""
    if fieldnames is None:
        fieldnames = []
        for r in rows:
            for k in r:
                if k not in fieldnames:
                    fieldnames.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fieldnames)
    for r in rows:
        w.writerow([_cell(r.get(k)) for k in fieldnames])
    return buf.getvalue()


def json_text(obj):
    # repr floats already round-trip exactly
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n"


def write_csv(path, rows, fieldnames=None):
    atomic_write_text(path, csv_text(rows, fieldnames))


def write_json(path, obj):
    atomic_write_text(path, json_text(obj))


def read_matrix(path):
    """Comma-separated rows, no header."""
    X = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    if X.size == 0:
        raise ValueError(f"{path}: empty matrix")
    return X


def read_vector(path):
    """One value per line."""
    v = np.loadtxt(path, dtype=float, ndmin=1)
    if v.size == 0:
        raise ValueError(f"{path}: empty vector")
    return v


def matrix_text(X):
    return "".join(",".join(fmt_float(x) for x in row) + "\n" for row in np.atleast_2d(X))


def vector_text(v):
    return "".join(fmt_float(x) + "\n" for x in np.ravel(v))
