"""FRED-MD-style CSV ingestion: parsing, stationarity transforms, windowing.

Input layout: a header row of series names (first column is the date), a
second row carrying per-series transformation codes, then one row per
month. Empty cells are missing data, never zero.

Transformation codes follow the usual seven-code convention:
1 level, 2 first difference, 3 second difference, 4 log, 5 log first
difference, 6 log second difference, 7 first difference of the growth rate.
"""

from __future__ import annotations

import csv
import difflib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DomainError, FormatError

# differencing order (leading observations lost) per transformation code
TCODE_ORDER = {1: 0, 2: 1, 3: 2, 4: 0, 5: 1, 6: 2, 7: 2}
LOG_TCODES = (4, 5, 6)
MIN_COMPLETE_ROWS = 10


def parse_month(text: str) -> tuple[int, int]:
    """Parse a month stamp: 'M/D/YYYY' (FRED-MD), 'YYYY-MM', or 'YYYY.MM'."""
    s = text.strip()
    for sep in ("-", "."):
        parts = s.split(sep)
        if len(parts) == 2 and all(x.isdigit() for x in parts):
            year, month = int(parts[0]), int(parts[1])
            if 1 <= month <= 12:
                return year, month
    parts = s.split("/")
    if len(parts) == 3 and all(x.isdigit() for x in parts):
        month, _, year = (int(x) for x in parts)
        if 1 <= month <= 12:
            return year, month
    raise FormatError(f"cannot parse date {text!r} (use M/D/YYYY, YYYY-MM, or YYYY.MM)")


def month_str(ym: tuple[int, int]) -> str:
    return f"{ym[0]:04d}-{ym[1]:02d}"


@dataclass(frozen=True)
class MacroDataset:
    """A parsed monthly panel: dates x series, with per-series transform codes."""

    dates: list[str]        # "YYYY-MM", strictly increasing
    names: list[str]
    tcodes: list[int]
    values: np.ndarray      # (T, N), NaN for missing

    @property
    def n_months(self) -> int:
        return self.values.shape[0]

    @property
    def n_series(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class AnalysisProblem:
    """Covariates and response ready for factor estimation: transformed,
    windowed, complete, and mean-centered."""

    X: np.ndarray
    Y: np.ndarray
    response_name: str
    covariate_names: list[str]
    dates: list[str]
    dropped_series: list[dict] = field(default_factory=list)
    column_means: np.ndarray | None = None
    response_mean: float = 0.0

    def save(self, directory) -> None:
        """Audit bundle: X.csv and Y.csv with headers plus manifest.json."""
        import pathlib

        d = pathlib.Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "X.csv", "w") as fh:
            fh.write(",".join(["date"] + self.covariate_names) + "\n")
            for i, date in enumerate(self.dates):
                row = ",".join(format(v, ".12g") for v in self.X[i])
                fh.write(f"{date},{row}\n")
        with open(d / "Y.csv", "w") as fh:
            fh.write(f"date,{self.response_name}\n")
            for date, v in zip(self.dates, self.Y):
                fh.write(f"{date},{format(v, '.12g')}\n")
        manifest = {
            "response": self.response_name,
            "n": int(self.Y.shape[0]),
            "p": int(self.X.shape[1]),
            "window": [self.dates[0], self.dates[-1]],
            "covariates": self.covariate_names,
            "dropped_series": self.dropped_series,
            "column_means": [float(m) for m in self.column_means]
            if self.column_means is not None else None,
            "response_mean": self.response_mean,
        }
        with open(d / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)


def parse_fredmd(text: str) -> MacroDataset:
    """Parse FRED-MD CSV text into a MacroDataset.

    Raises FormatError for a missing transform row or any unparseable
    date/number, naming the offending row and column (1-based).
    """
    rows = [row for row in csv.reader(io.StringIO(text))]
    rows = [row for row in rows if any(cell.strip() for cell in row)]
    if len(rows) < 3:
        raise FormatError("need a header row, a transform row, and at least one data row")

    header = rows[0]
    names = [c.strip() for c in header[1:]]
    while names and not names[-1]:
        names.pop()
    if not names:
        raise FormatError("header row names no series")

    trow = rows[1]
    label = trow[0].strip().lower().rstrip(":")
    if label != "transform":
        raise FormatError(
            f"second row must carry transform codes (first cell 'transform:'), got {trow[0]!r}"
        )
    tcodes = []
    for j, cell in enumerate(trow[1 : len(names) + 1], start=2):
        try:
            code = int(float(cell))
        except ValueError:
            raise FormatError(f"row 2, column {j}: bad transform code {cell!r}") from None
        if code not in TCODE_ORDER:
            raise FormatError(f"row 2, column {j}: transform code must be 1..7, got {code}")
        tcodes.append(code)
    if len(tcodes) != len(names):
        raise FormatError(
            f"{len(names)} series named but {len(tcodes)} transform codes given"
        )

    dates: list[str] = []
    values = np.full((len(rows) - 2, len(names)), np.nan)
    prev: tuple[int, int] | None = None
    for i, row in enumerate(rows[2:], start=3):
        try:
            ym = parse_month(row[0])
        except FormatError as exc:
            raise FormatError(f"row {i}, column 1: {exc}") from None
        if prev is not None and ym <= prev:
            raise FormatError(f"row {i}: dates must be strictly increasing")
        prev = ym
        dates.append(month_str(ym))
        for j in range(len(names)):
            cell = row[j + 1].strip() if j + 1 < len(row) else ""
            if not cell:
                continue
            try:
                values[i - 3, j] = float(cell)
            except ValueError:
                raise FormatError(f"row {i}, column {j + 2}: bad number {cell!r}") from None
    return MacroDataset(dates=dates, names=names, tcodes=tcodes, values=values)


def load_fredmd(path) -> MacroDataset:
    with open(path, "r", encoding="utf-8-sig") as fh:
        return parse_fredmd(fh.read())


def apply_tcode(series, code: int, name: str = "series",
                dates: list[str] | None = None) -> np.ndarray:
    """Transform one series by its code; leading entries become missing
    according to the differencing order.

    Log-based codes require strictly positive observed values and raise
    DataError naming the series and date otherwise.
    """
    x = np.asarray(series, dtype=np.float64)
    if code not in TCODE_ORDER:
        raise DomainError(f"transform code must be 1..7, got {code}")
    if code in LOG_TCODES or code == 7:
        observed = ~np.isnan(x)
        bad = observed & (x <= 0.0)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            when = dates[i] if dates is not None else f"index {i}"
            raise DataError(
                f"series {name!r}: non-positive value {x[i]!r} at {when} "
                f"under transform code {code}"
            )
    y = np.full_like(x, np.nan)
    if code == 1:
        y = x.copy()
    elif code == 2:
        y[1:] = x[1:] - x[:-1]
    elif code == 3:
        y[2:] = x[2:] - 2.0 * x[1:-1] + x[:-2]
    elif code == 4:
        y = np.log(x)
    elif code == 5:
        lx = np.log(x)
        y[1:] = lx[1:] - lx[:-1]
    elif code == 6:
        lx = np.log(x)
        y[2:] = lx[2:] - 2.0 * lx[1:-1] + lx[:-2]
    elif code == 7:
        r = x[1:] / x[:-1] - 1.0
        y[2:] = r[1:] - r[:-1]
    return y


def transform_dataset(ds: MacroDataset) -> np.ndarray:
    """Apply each series' transform code; returns the (T, N) transformed panel."""
    out = np.empty_like(ds.values)
    for j, (name, code) in enumerate(zip(ds.names, ds.tcodes)):
        out[:, j] = apply_tcode(ds.values[:, j], code, name=name, dates=ds.dates)
    return out


def build_problem(ds: MacroDataset, response: str,
                  start: str | None = None, end: str | None = None) -> AnalysisProblem:
    """Assemble a centered (X, Y) problem for one response over a date window.

    Pipeline order is fixed: transform every series on the full sample
    (so differences can use pre-window observations), trim the leading
    rows lost to the highest differencing order, restrict to the window,
    drop covariate series with missing values in the window (logged), and
    mean-center everything. The response is never dropped: missing
    response values in the window raise DataError.
    """
    if response not in ds.names:
        close = difflib.get_close_matches(response, ds.names, n=5, cutoff=0.3)
        hint = f"; close matches: {', '.join(close)}" if close else ""
        raise DomainError(
            f"response {response!r} not among the {len(ds.names)} series{hint}"
        )

    transformed = transform_dataset(ds)
    head = max(TCODE_ORDER[c] for c in ds.tcodes)
    transformed = transformed[head:]
    dates = ds.dates[head:]

    lo = month_str(parse_month(start)) if start else None
    hi = month_str(parse_month(end)) if end else None
    keep = [
        i for i, d in enumerate(dates)
        if (lo is None or d >= lo) and (hi is None or d <= hi)
    ]
    if not keep:
        raise DomainError(
            f"window [{start}, {end}] selects no rows "
            f"(data covers {dates[0]}..{dates[-1]} after transformation)"
        )
    window = transformed[keep]
    dates = [dates[i] for i in keep]

    r = ds.names.index(response)
    y = window[:, r]
    if np.isnan(y).any():
        i = int(np.flatnonzero(np.isnan(y))[0])
        raise DataError(f"response {response!r} is missing at {dates[i]} inside the window")

    cols, names, dropped = [], [], []
    for j, name in enumerate(ds.names):
        if j == r:
            continue
        col = window[:, j]
        if np.isnan(col).any():
            dropped.append({"name": name, "reason": "missing in window"})
            continue
        cols.append(col)
        names.append(name)
    if not cols:
        raise DomainError("no covariate series survive the window")
    if window.shape[0] < MIN_COMPLETE_ROWS:
        raise DomainError(
            f"only {window.shape[0]} complete rows in window; need >= {MIN_COMPLETE_ROWS}"
        )

    X = np.column_stack(cols)
    means = X.mean(axis=0)
    y_mean = float(y.mean())
    return AnalysisProblem(
        X=X - means,
        Y=y - y_mean,
        response_name=response,
        covariate_names=names,
        dates=dates,
        dropped_series=dropped,
        column_means=means,
        response_mean=y_mean,
    )
