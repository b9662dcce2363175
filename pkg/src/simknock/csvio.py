"""Reading and writing the CSV and config files used by the command line."""
from __future__ import annotations

import csv
import io
import itertools
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .knockoffs import DesignMatrix, GaussianModel
from .stats import Experiment, Family


def fmt(value) -> str:
    """17 significant digits, enough to round-trip any double."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _data_lines(path) -> list[tuple[int, str]]:
    """Non-empty, non-comment lines with their 1-based line numbers."""
    with open(path, newline="") as fh:
        return [(i, line) for i, line in enumerate(fh, start=1)
                if line.strip() and not line.lstrip().startswith("#")]


def _parse_row(line: str) -> list[str]:
    return next(csv.reader([line]))


def _floats(fields: Sequence[str], lineno: int, path) -> list[float]:
    out = []
    for col, text in enumerate(fields, start=1):
        try:
            val = float(text)
        except ValueError:
            raise ValidationError(
                f"{path}: line {lineno}, column {col}: cannot parse {text.strip()!r} as a number"
            ) from None
        if not np.isfinite(val):
            raise ValidationError(f"{path}: line {lineno}, column {col}: non-finite value")
        out.append(val)
    return out


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Header and numeric body of a CSV file, skipping ``#`` comment lines."""
    lines = _data_lines(path)
    if not lines:
        raise ValidationError(f"{path}: file is empty")
    header = [h.strip() for h in _parse_row(lines[0][1])]
    rows = []
    for lineno, line in lines[1:]:
        fields = _parse_row(line)
        if len(fields) != len(header):
            raise ValidationError(
                f"{path}: line {lineno}: expected {len(header)} fields, found {len(fields)}")
        rows.append(_floats(fields, lineno, path))
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return header, np.array(rows)


def read_dataset(path, family="gaussian") -> Experiment:
    """Response in the first column, features in the remaining columns."""
    header, body = read_table(path)
    if len(header) < 2:
        raise ValidationError(f"{path}: need a response column and at least one feature")
    family = Family.parse(family)
    y = body[:, 0]
    if family is Family.BINOMIAL:
        bad = np.flatnonzero((y != 0) & (y != 1))
        if bad.size:
            raise ValidationError(
                f"{path}: binomial response must be 0/1 (first bad data row {bad[0] + 1})")
    try:
        return Experiment(y, DesignMatrix(body[:, 1:], header[1:]), family)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def write_dataset(path, exp: Experiment, response_name: str = "y") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([response_name, *exp.x.column_names])
        for yi, row in zip(exp.y, exp.x.values):
            w.writerow([fmt(yi), *(fmt(v) for v in row)])


def read_model(path) -> GaussianModel:
    """Gaussian model file: first row the mean, next p rows the covariance."""
    lines = _data_lines(path)
    if not lines:
        raise ValidationError(f"{path}: empty model file")
    rows = [_floats(_parse_row(line), i, path) for i, line in lines]
    mean = np.array(rows[0])
    p = mean.size
    if len(rows) != p + 1 or any(len(r) != p for r in rows[1:]):
        raise ValidationError(
            f"{path}: expected a mean row and a {p}x{p} covariance, got {len(rows) - 1} rows")
    cov = np.array(rows[1:])
    asym = np.max(np.abs(cov - cov.T))
    if asym > 1e-8:
        raise ValidationError(f"{path}: covariance not symmetric (max asymmetry {asym:.3g})")
    try:
        return GaussianModel(mean, (cov + cov.T) / 2)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def write_model(path, model: GaussianModel) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([fmt(v) for v in model.mean])
        for row in model.covariance:
            w.writerow([fmt(v) for v in row])


def config_header(config: dict) -> list[str]:
    return [f"# {key}={_fmt_value(val)}" for key, val in config.items()]


def _fmt_value(val) -> str:
    if isinstance(val, (list, tuple)):
        return ";".join(_fmt_value(v) for v in val)
    if isinstance(val, float):
        return repr(val)
    if hasattr(val, "value"):
        return str(val.value)
    return str(val)


def write_knockoffs(path_or_buf, names: Sequence[str], xtilde: np.ndarray, s: np.ndarray,
                    config: dict) -> None:
    """Knockoff matrix with ``ko_``-prefixed headers and an ``# s=`` sidecar line."""
    lines = config_header(config)
    lines.append("# s=" + ",".join(fmt(v) for v in s))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"ko_{n}" for n in names])
    for row in xtilde:
        w.writerow([fmt(v) for v in row])
    text = "\n".join(lines) + "\n" + buf.getvalue()
    _emit(path_or_buf, text)


def read_knockoffs(path) -> tuple[list[str], np.ndarray, np.ndarray | None]:
    """Inverse of :func:`write_knockoffs`: ``(names, xtilde, s)``."""
    header, body = read_table(path)
    names = [h[3:] if h.startswith("ko_") else h for h in header]
    s = None
    with open(path) as fh:
        for line in fh:
            if line.startswith("# s="):
                s = np.array([float(v) for v in line[4:].strip().split(",")])
                break
    return names, body, s


def _emit(path_or_buf, text: str) -> None:
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        Path(path_or_buf).write_text(text)


def write_rows(path_or_buf, header: Sequence[str], rows: Iterable[Sequence],
               comments: Sequence[str] = (), footer: Sequence[str] = ()) -> None:
    buf = io.StringIO()
    for c in comments:
        buf.write(c + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    for c in footer:
        buf.write(c + "\n")
    _emit(path_or_buf, buf.getvalue())


# --------------------------------------------------------------------------
# simulation config files

def parse_config(text: str, source: str = "<config>") -> dict[str, list[str]]:
    """Flat ``key = value`` lines; comma-separated values form a grid axis."""
    out: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{source}: line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ValidationError(f"{source}: line {lineno}: empty key or value")
        if key in out:
            raise ValidationError(f"{source}: line {lineno}: duplicate key {key!r}")
        out[key] = [v.strip() for v in value.split(",") if v.strip()]
    return out


def expand_grid(axes: dict[str, list]) -> list[dict]:
    """Cartesian product of the per-key value lists, in key order."""
    keys = list(axes)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(axes[k] for k in keys))]
