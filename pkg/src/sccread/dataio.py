"""Reading and writing the package's file formats.

Delimited files are plain CSV with a block of ``#``-prefixed header
lines carrying metadata and units, so every file is self-describing.
Floats are written with ``repr`` so that parsing a written file
reproduces the original values bit for bit.  Structured results
(histograms, fit results) also exist as JSON documents.

All parse failures raise :class:`DataFormatError` naming the file and,
where meaningful, the line and column of the offending token.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .estimators import CountHistogram, FitResult

__all__ = [
    "write_histogram_csv",
    "read_histogram_csv",
    "write_histogram_json",
    "read_histogram_json",
    "write_fit_result_json",
    "read_fit_result_json",
    "write_table_csv",
    "read_table_csv",
]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _meta_lines(meta: dict) -> list[str]:
    return [f"# {k} = {_fmt(v)}" for k, v in meta.items()]


def _parse_header(lines, path):
    """Split leading '#' lines into a metadata dict; values are parsed
    as int, then float, then kept as strings."""
    meta = {}
    body_start = 0
    for i, line in enumerate(lines):
        if not line.startswith("#"):
            body_start = i
            break
        body_start = i + 1
        text = line.lstrip("#").strip()
        if "=" not in text:
            continue  # free-form comment
        key, _, value = text.partition("=")
        key, value = key.strip(), value.strip()
        for cast in (int, float):
            try:
                meta[key] = cast(value)
                break
            except ValueError:
                continue
        else:
            meta[key] = value
    return meta, body_start


def write_histogram_csv(path, hist: CountHistogram) -> None:
    """Write a photon-count histogram with its metadata header.

    Every bin from 0 to the last occupied one is written, including
    zero-occupancy bins, so files diff cleanly.
    """
    path = Path(path)
    lines = ["# photon count histogram",
             f"# t_R_s = {repr(float(hist.t_R))}",
             f"# n_windows = {hist.n_windows}"]
    lines += _meta_lines(hist.meta)
    lines.append("n,occurrences")
    lines += [f"{n},{c}" for n, c in enumerate(hist.counts)]
    path.write_text("\n".join(lines) + "\n")


def read_histogram_csv(path) -> CountHistogram:
    """Parse a histogram written by :func:`write_histogram_csv`.

    Bins may appear in any order and zero bins may be omitted; missing
    bins are reconstructed as zeros.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    meta, body = _parse_header(lines, path)
    if "t_R_s" not in meta:
        raise DataFormatError("missing 't_R_s' header", path=path)
    t_R = meta.pop("t_R_s")
    declared = meta.pop("n_windows", None)
    if body >= len(lines):
        raise DataFormatError("no data rows", path=path)
    header = [h.strip() for h in lines[body].split(",")]
    if header != ["n", "occurrences"]:
        raise DataFormatError(f"expected header 'n,occurrences', got {lines[body]!r}",
                              path=path, line=body + 1)
    mapping = {}
    for i, line in enumerate(lines[body + 1:], start=body + 2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != 2:
            raise DataFormatError(f"expected 2 columns, got {len(cells)}", path=path, line=i)
        try:
            n = int(cells[0])
        except ValueError:
            raise DataFormatError(f"bad count bin {cells[0]!r}", path=path, line=i, column=1) from None
        try:
            occ = int(cells[1])
        except ValueError:
            raise DataFormatError(f"bad occurrence count {cells[1]!r}", path=path, line=i, column=2) from None
        if n in mapping:
            raise DataFormatError(f"duplicate bin {n}", path=path, line=i)
        mapping[n] = occ
    try:
        hist = CountHistogram.from_mapping(mapping, t_R=float(t_R), meta=meta)
    except ValueError as e:
        raise DataFormatError(str(e), path=path) from None
    if declared is not None and hist.n_windows != declared:
        raise DataFormatError(
            f"n_windows header says {declared} but bins sum to {hist.n_windows}", path=path)
    return hist


def write_histogram_json(path, hist: CountHistogram) -> None:
    doc = {"t_R_s": float(hist.t_R), "n_windows": hist.n_windows,
           "meta": dict(hist.meta),
           "counts": {str(n): int(c) for n, c in enumerate(hist.counts) if c}}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def read_histogram_json(path) -> CountHistogram:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise DataFormatError(f"invalid JSON: {e.msg}", path=path, line=e.lineno,
                              column=e.colno) from None
    try:
        hist = CountHistogram.from_mapping(doc["counts"], t_R=float(doc["t_R_s"]),
                                           meta=doc.get("meta", {}))
    except (KeyError, TypeError, ValueError) as e:
        raise DataFormatError(f"bad histogram document: {e}", path=path) from None
    declared = doc.get("n_windows")
    if declared is not None and hist.n_windows != declared:
        raise DataFormatError(
            f"n_windows field says {declared} but bins sum to {hist.n_windows}", path=path)
    return hist


def write_fit_result_json(path, result: FitResult) -> None:
    doc = {"parameters": result.parameters,
           "standard_errors": result.standard_errors,
           "converged": result.converged,
           "n_evals": result.n_evals,
           "log_likelihood": result.log_likelihood,
           "rss": result.rss,
           "diagnostics": _jsonable(result.diagnostics)}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def read_fit_result_json(path) -> FitResult:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise DataFormatError(f"invalid JSON: {e.msg}", path=path, line=e.lineno,
                              column=e.colno) from None
    try:
        return FitResult(parameters=doc["parameters"],
                         standard_errors=doc.get("standard_errors", {}),
                         converged=bool(doc["converged"]),
                         n_evals=int(doc.get("n_evals", 0)),
                         log_likelihood=doc.get("log_likelihood"),
                         rss=doc.get("rss"),
                         diagnostics=doc.get("diagnostics", {}))
    except (KeyError, TypeError, ValueError) as e:
        raise DataFormatError(f"bad fit-result document: {e}", path=path) from None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)  # JSON has no nan/inf
    return obj


def write_table_csv(path, columns: dict, meta: dict | None = None) -> None:
    """Write named columns as CSV under a '#' metadata header.

    ``columns`` maps column name (by convention carrying its unit, e.g.
    ``tau_s``) to a sequence of values.
    """
    path = Path(path)
    names = list(columns)
    arrays = [list(columns[nm]) for nm in names]
    if len({len(a) for a in arrays}) > 1:
        raise ValueError("columns differ in length")
    buf = io.StringIO()
    for line in _meta_lines(meta or {}):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in zip(*arrays):
        writer.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def read_table_csv(path, required: tuple[str, ...] = ()) -> tuple[dict, dict]:
    """Parse a '#'-headed CSV into ``(columns, meta)``.

    Columns come back as float arrays.  Any column named in ``required``
    must be present.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    meta, body = _parse_header(lines, path)
    if body >= len(lines):
        raise DataFormatError("no data rows", path=path)
    names = [h.strip() for h in lines[body].split(",")]
    if len(set(names)) != len(names):
        raise DataFormatError("duplicate column names", path=path, line=body + 1)
    data: dict[str, list[float]] = {nm: [] for nm in names}
    for i, line in enumerate(lines[body + 1:], start=body + 2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(names):
            raise DataFormatError(f"expected {len(names)} columns, got {len(cells)}",
                                  path=path, line=i)
        for j, (nm, cell) in enumerate(zip(names, cells), start=1):
            try:
                data[nm].append(float(cell))
            except ValueError:
                raise DataFormatError(f"bad number {cell.strip()!r} in column {nm!r}",
                                      path=path, line=i, column=j) from None
    for nm in required:
        if nm not in data:
            raise DataFormatError(f"missing required column {nm!r} (have {names})", path=path)
    if any(len(v) == 0 for v in data.values()):
        raise DataFormatError("no data rows", path=path)
    return {nm: np.array(v) for nm, v in data.items()}, meta
