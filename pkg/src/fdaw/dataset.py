"""Canonical data model for discretely observed functional data.

Curves live on a shared grid; sparse observation is represented by an
explicit boolean mask, never by sentinel numbers.  CSV ingestion supports a
long layout (one row per observed cell) and a wide layout (one row per
curve).  Datasets are immutable after construction.
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .numerics import quadrature_weights

__all__ = [
    "DataError",
    "Grid",
    "Covariate",
    "FunctionalDataset",
    "ValidationReport",
    "load_csv",
    "write_csv",
    "validate",
]

MISSING_TOKENS = {"", "NA", "NaN", "nan"}


class DataError(ValueError):
    """Rejection of malformed input data."""


def _fmt(x: float) -> str:
    """Shortest round-trip decimal representation."""
    return repr(float(x))


@dataclass(frozen=True)
class Grid:
    """Ordered abscissae with quadrature weights for discrete inner products."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise DataError("grid needs at least 2 points")
        if np.any(np.diff(pts) <= 0):
            raise DataError("grid points must be strictly increasing")
        if w.shape != pts.shape:
            raise DataError("weights must match points")
        if np.any(w <= 0):
            raise DataError("quadrature weights must be strictly positive")
        pts.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_points(cls, points) -> "Grid":
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 1 or pts.size < 2 or np.any(np.diff(pts) <= 0):
            raise DataError("grid points must be strictly increasing, with at least 2 of them")
        return cls(points=pts, weights=quadrature_weights(pts))

    @property
    def n_points(self) -> int:
        return self.points.size

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.points[0]), float(self.points[-1])


@dataclass(frozen=True)
class Covariate:
    """Per-row scalar covariate, continuous or categorical with level list."""

    name: str
    kind: str  # "continuous" | "categorical"
    values: np.ndarray  # float array (nan missing) or object array (None missing)
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise DataError(f"unknown covariate kind {self.kind!r}")
        if self.kind == "categorical":
            observed = {v for v in self.values if v is not None}
            if not observed.issubset(self.levels):
                raise DataError(f"covariate {self.name!r} has values outside its level list")

    def is_missing(self) -> np.ndarray:
        if self.kind == "continuous":
            return np.isnan(self.values)
        return np.array([v is None for v in self.values], dtype=bool)


@dataclass(frozen=True)
class FunctionalDataset:
    """Curves on a shared grid with subject/visit structure and covariates.

    ``values`` holds nan at masked-out cells; ``mask`` is authoritative
    (True = observed).  One row per (subject_id, visit_index) pair.
    """

    grid: Grid
    values: np.ndarray  # (n_curves, D)
    mask: np.ndarray  # (n_curves, D) bool
    subject_ids: np.ndarray  # (n_curves,) str
    visit_indices: np.ndarray  # (n_curves,) int
    visit_times: Optional[np.ndarray] = None  # (n_curves,) float
    covariates: dict[str, Covariate] = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        n, d = values.shape
        if d != self.grid.n_points:
            raise DataError("values width must match grid size")
        if mask.shape != values.shape:
            raise DataError("mask must match values shape")
        sids = np.asarray(self.subject_ids, dtype=object)
        visits = np.asarray(self.visit_indices, dtype=int)
        if sids.shape != (n,) or visits.shape != (n,):
            raise DataError("subject_ids and visit_indices must have one entry per curve")
        values = np.where(mask, values, np.nan)
        times = self.visit_times
        if times is not None:
            times = np.asarray(times, dtype=float)
            if times.shape != (n,):
                raise DataError("visit_times must have one entry per curve")
        for cov in self.covariates.values():
            if len(cov.values) != n:
                raise DataError(f"covariate {cov.name!r} must have one entry per curve")
        for arr in (values, mask, sids, visits):
            arr.flags.writeable = False
        if times is not None:
            times.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "subject_ids", sids)
        object.__setattr__(self, "visit_indices", visits)
        object.__setattr__(self, "visit_times", times)

    @property
    def n_curves(self) -> int:
        return self.values.shape[0]

    @property
    def n_points(self) -> int:
        return self.grid.n_points

    def subjects(self) -> list[str]:
        """Unique subject ids in order of first appearance."""
        seen: dict[str, None] = {}
        for s in self.subject_ids:
            seen.setdefault(s, None)
        return list(seen)

    def rows_for_subject(self, subject: str) -> np.ndarray:
        return np.flatnonzero(self.subject_ids == subject)

    def check(self) -> None:
        """Raise DataError on the first violated dataset invariant."""
        report = validate(self)
        for chk in report.checks:
            if not chk.passed:
                raise DataError(f"{chk.name}: {chk.detail}")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...]
    missing_fraction: float
    n_curves: int
    n_points: int
    n_subjects: int
    visit_counts: dict[str, int]
    median_visits: float

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)


def validate(ds: FunctionalDataset) -> ValidationReport:
    """Report per-invariant pass/fail plus dataset summary statistics."""
    checks = []

    pairs = list(zip(ds.subject_ids, ds.visit_indices))
    dupes = sorted({p for p in pairs if pairs.count(p) > 1}) if len(set(pairs)) < len(pairs) else []
    checks.append(
        CheckResult(
            "unique_subject_visit",
            not dupes,
            "" if not dupes else f"duplicate (subject, visit) pairs: {dupes}",
        )
    )

    obs_per_row = ds.mask.sum(axis=1)
    bad = np.flatnonzero(obs_per_row < 2)
    detail = ""
    if bad.size:
        rows = ", ".join(
            f"subject {ds.subject_ids[i]!r} visit {ds.visit_indices[i]}" for i in bad[:5]
        )
        detail = f"rows with fewer than 2 observed values: {rows}"
    checks.append(CheckResult("min_two_observed", bad.size == 0, detail))

    checks.append(
        CheckResult(
            "positive_visit_index",
            bool(np.all(ds.visit_indices >= 1)),
            "" if np.all(ds.visit_indices >= 1) else "visit indices must be positive",
        )
    )

    if ds.visit_times is not None:
        missing_t = np.flatnonzero(np.isnan(ds.visit_times))
        checks.append(
            CheckResult(
                "visit_time_complete",
                missing_t.size == 0,
                "" if missing_t.size == 0 else f"missing visit_time on rows {missing_t[:5].tolist()}",
            )
        )

    counts: dict[str, int] = {}
    for s in ds.subject_ids:
        counts[s] = counts.get(s, 0) + 1
    return ValidationReport(
        checks=tuple(checks),
        missing_fraction=float(1.0 - ds.mask.mean()) if ds.mask.size else 0.0,
        n_curves=ds.n_curves,
        n_points=ds.n_points,
        n_subjects=len(counts),
        visit_counts=counts,
        median_visits=float(statistics.median(counts.values())) if counts else 0.0,
    )


# ---------------------------------------------------------------------------
# CSV ingestion


_LONG_KEYS = ("subject", "visit", "visit_time", "t", "y")


def _open_text(source) -> io.TextIOBase:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return io.StringIO(data)
    raise DataError(f"unsupported CSV source {type(source).__name__}")


def _parse_float(token: str, line: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise DataError(f"non-numeric {what} {token!r} on line {line}") from None


def _parse_cell(token: str, line: int, what: str) -> float:
    token = token.strip()
    if token in MISSING_TOKENS:
        return np.nan
    return _parse_float(token, line, what)


def _infer_covariates(names, raw_columns, n_rows) -> dict[str, Covariate]:
    covariates = {}
    for name in names:
        raw = raw_columns[name]
        present = [v for v in raw if v.strip() not in MISSING_TOKENS]
        numeric = True
        for v in present:
            try:
                float(v)
            except ValueError:
                numeric = False
                break
        if numeric:
            vals = np.array(
                [float(v) if v.strip() not in MISSING_TOKENS else np.nan for v in raw], dtype=float
            )
            covariates[name] = Covariate(name=name, kind="continuous", values=vals)
        else:
            vals = np.array(
                [v.strip() if v.strip() not in MISSING_TOKENS else None for v in raw], dtype=object
            )
            levels = tuple(sorted({v for v in vals if v is not None}))
            covariates[name] = Covariate(name=name, kind="categorical", values=vals, levels=levels)
    return covariates


def load_csv(source, layout: str, schema: Optional[dict[str, str]] = None) -> FunctionalDataset:
    """Load a validated dataset from CSV.

    ``layout`` is "long" (columns subject, visit, [visit_time], t, y,
    covariates...) or "wide" (one row per curve with ``t=<value>`` columns).
    ``schema`` maps the canonical column names to the file's header names.
    Missing cells are empty fields or ``NA``.

    Raises
    ------
    DataError
        On duplicate cells (with row numbers), non-numeric measurements, or
        curves with fewer than 2 observed values.
    """
    if layout not in ("long", "wide"):
        raise DataError(f"unknown layout {layout!r}")
    schema = schema or {}
    colname = {key: schema.get(key, key) for key in _LONG_KEYS}

    with _open_text(source) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty CSV") from None
        header = [h.strip() for h in header]
        rows = [(line, [c for c in row]) for line, row in enumerate(reader, start=2) if row]

    if layout == "long":
        return _load_long(header, rows, colname)
    return _load_wide(header, rows, colname)


def _load_long(header, rows, colname) -> FunctionalDataset:
    idx = {name: i for i, name in enumerate(header)}
    for key in ("subject", "visit", "t", "y"):
        if colname[key] not in idx:
            raise DataError(f"long layout requires column {colname[key]!r}")
    has_time = colname["visit_time"] in idx
    known = {colname[k] for k in _LONG_KEYS if colname[k] in idx}
    cov_names = [h for h in header if h not in known]

    cells: dict[tuple[str, int], dict[float, float]] = {}
    cell_lines: dict[tuple[str, int, float], list[int]] = {}
    times: dict[tuple[str, int], float] = {}
    cov_raw: dict[tuple[str, int], dict[str, str]] = {}
    order: list[tuple[str, int]] = []

    for line, row in rows:
        if len(row) != len(header):
            raise DataError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        subject = row[idx[colname["subject"]]].strip()
        try:
            visit = int(row[idx[colname["visit"]]])
        except ValueError:
            raise DataError(f"line {line}: non-integer visit {row[idx[colname['visit']]]!r}") from None
        t = _parse_float(row[idx[colname["t"]]].strip(), line, "t")
        y = _parse_cell(row[idx[colname["y"]]], line, "y")

        key = (subject, visit)
        if key not in cells:
            cells[key] = {}
            order.append(key)
            cov_raw[key] = {name: row[idx[name]] for name in cov_names}
        else:
            for name in cov_names:
                if row[idx[name]] != cov_raw[key][name]:
                    raise DataError(
                        f"line {line}: inconsistent covariate {name!r} within subject "
                        f"{subject!r} visit {visit}"
                    )
        cell_lines.setdefault((subject, visit, t), []).append(line)
        if len(cell_lines[(subject, visit, t)]) > 1:
            raise DataError(
                f"duplicate cell (subject {subject!r}, visit {visit}, t={t!r}) on lines "
                f"{cell_lines[(subject, visit, t)]}"
            )
        if not np.isnan(y):
            cells[key][t] = y
        else:
            cells[key].setdefault(t, np.nan)
        if has_time:
            raw_t = row[idx[colname["visit_time"]]].strip()
            if raw_t in MISSING_TOKENS:
                raise DataError(f"line {line}: missing visit_time")
            tv = _parse_float(raw_t, line, "visit_time")
            if key in times and times[key] != tv:
                raise DataError(
                    f"line {line}: visit_time differs within subject {subject!r} visit {visit}"
                )
            times[key] = tv

    grid_points = np.array(sorted({t for c in cells.values() for t in c}), dtype=float)
    if grid_points.size < 2:
        raise DataError("long CSV yields a grid with fewer than 2 points")
    grid = Grid.from_points(grid_points)
    col_of = {t: i for i, t in enumerate(grid_points)}

    n = len(order)
    values = np.full((n, grid_points.size), np.nan)
    mask = np.zeros((n, grid_points.size), dtype=bool)
    for r, key in enumerate(order):
        for t, y in cells[key].items():
            if not np.isnan(y):
                values[r, col_of[t]] = y
                mask[r, col_of[t]] = True
        if mask[r].sum() < 2:
            raise DataError(
                f"fewer than 2 non-missing points for subject {key[0]!r} visit {key[1]}"
            )

    cov_columns = {name: [cov_raw[key][name] for key in order] for name in cov_names}
    ds = FunctionalDataset(
        grid=grid,
        values=values,
        mask=mask,
        subject_ids=np.array([k[0] for k in order], dtype=object),
        visit_indices=np.array([k[1] for k in order], dtype=int),
        visit_times=np.array([times[k] for k in order]) if has_time else None,
        covariates=_infer_covariates(cov_names, cov_columns, n),
    )
    ds.check()
    return ds


def _load_wide(header, rows, colname) -> FunctionalDataset:
    idx = {name: i for i, name in enumerate(header)}
    for key in ("subject", "visit"):
        if colname[key] not in idx:
            raise DataError(f"wide layout requires column {colname[key]!r}")
    has_time = colname["visit_time"] in idx

    t_cols = [(i, h) for i, h in enumerate(header) if h.startswith("t=")]
    if len(t_cols) < 2:
        raise DataError("wide layout requires at least 2 't=<value>' columns")
    parsed = []
    for i, h in enumerate(header):
        if h.startswith("t="):
            try:
                parsed.append((float(h[2:]), i))
            except ValueError:
                raise DataError(f"bad grid column header {h!r}") from None
    t_values = [t for t, _ in parsed]
    if len(set(t_values)) != len(t_values):
        raise DataError("duplicate grid values in wide header")
    parsed.sort()
    grid = Grid.from_points(np.array([t for t, _ in parsed]))
    value_cols = [i for _, i in parsed]

    reserved = {colname["subject"], colname["visit"]}
    if has_time:
        reserved.add(colname["visit_time"])
    cov_names = [h for h in header if h not in reserved and not h.startswith("t=")]

    n = len(rows)
    values = np.full((n, grid.n_points), np.nan)
    mask = np.zeros((n, grid.n_points), dtype=bool)
    subjects, visits, tlist = [], [], []
    cov_columns: dict[str, list[str]] = {name: [] for name in cov_names}
    seen: dict[tuple[str, int], int] = {}

    for r, (line, row) in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        subject = row[idx[colname["subject"]]].strip()
        try:
            visit = int(row[idx[colname["visit"]]])
        except ValueError:
            raise DataError(f"line {line}: non-integer visit {row[idx[colname['visit']]]!r}") from None
        key = (subject, visit)
        if key in seen:
            raise DataError(
                f"duplicate cell (subject {subject!r}, visit {visit}) on lines "
                f"[{seen[key]}, {line}]"
            )
        seen[key] = line
        subjects.append(subject)
        visits.append(visit)
        if has_time:
            raw_t = row[idx[colname["visit_time"]]].strip()
            if raw_t in MISSING_TOKENS:
                raise DataError(f"line {line}: missing visit_time")
            tlist.append(_parse_float(raw_t, line, "visit_time"))
        for j, col in enumerate(value_cols):
            y = _parse_cell(row[col], line, "y")
            if not np.isnan(y):
                values[r, j] = y
                mask[r, j] = True
        if mask[r].sum() < 2:
            raise DataError(f"fewer than 2 non-missing points for subject {subject!r} visit {visit}")
        for name in cov_names:
            cov_columns[name].append(row[idx[name]])

    ds = FunctionalDataset(
        grid=grid,
        values=values,
        mask=mask,
        subject_ids=np.array(subjects, dtype=object),
        visit_indices=np.array(visits, dtype=int),
        visit_times=np.array(tlist) if has_time else None,
        covariates=_infer_covariates(cov_names, cov_columns, n),
    )
    ds.check()
    return ds


def write_csv(ds: FunctionalDataset, layout: str = "wide", path=None) -> str:
    """Serialize a dataset to CSV text (and optionally to ``path``).

    Inverse of :func:`load_csv`: both layouts round-trip values, mask, ids,
    visit times, and covariates exactly.
    """
    if layout not in ("long", "wide"):
        raise DataError(f"unknown layout {layout!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cov_names = list(ds.covariates)
    has_time = ds.visit_times is not None

    def cov_cell(name: str, row: int) -> str:
        cov = ds.covariates[name]
        v = cov.values[row]
        if cov.kind == "continuous":
            return "" if np.isnan(v) else _fmt(v)
        return "" if v is None else str(v)

    if layout == "wide":
        header = ["subject", "visit"]
        if has_time:
            header.append("visit_time")
        header += cov_names
        header += [f"t={_fmt(t)}" for t in ds.grid.points]
        writer.writerow(header)
        for r in range(ds.n_curves):
            row = [str(ds.subject_ids[r]), str(int(ds.visit_indices[r]))]
            if has_time:
                row.append(_fmt(ds.visit_times[r]))
            row += [cov_cell(name, r) for name in cov_names]
            row += ["" if not ds.mask[r, j] else _fmt(ds.values[r, j]) for j in range(ds.n_points)]
            writer.writerow(row)
    else:
        header = ["subject", "visit"]
        if has_time:
            header.append("visit_time")
        header += ["t", "y"] + cov_names
        writer.writerow(header)
        for r in range(ds.n_curves):
            base = [str(ds.subject_ids[r]), str(int(ds.visit_indices[r]))]
            if has_time:
                base.append(_fmt(ds.visit_times[r]))
            covs = [cov_cell(name, r) for name in cov_names]
            for j in range(ds.n_points):
                y = "" if not ds.mask[r, j] else _fmt(ds.values[r, j])
                writer.writerow(base + [_fmt(ds.grid.points[j]), y] + covs)

    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
