"""Dataset container and file ingestion.

Stations file (CSV, header required):
    id,x_km,y_km,elevation_m,relative_elevation_m,ocean_proximity,lake_cover

Minima file (CSV, header required):
    winter,station,minimum,occ_days
with one row per (winter, station); a blank minimum marks a missing value
and occ_days is a semicolon-joined list of day indices (1 = Dec 1 of the
winter window).  Winters are labeled by the calendar year containing
January-March, so winter 1975 spans Dec 1974 - Mar 1975.

The time covariate is the occurrence day expressed in years from
2000-01-01; records with multiple occurrence days get one day resolved
uniformly at random (seeded) at load time.
"""

import csv
import datetime
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, SchemaError
from .gaussian import SiteSet

STATION_COLUMNS = (
    "id", "x_km", "y_km", "elevation_m", "relative_elevation_m",
    "ocean_proximity", "lake_cover",
)
MINIMA_COLUMNS = ("winter", "station", "minimum", "occ_days")

_EPOCH = datetime.date(2000, 1, 1)
_DAYS_PER_YEAR = 365.25

# day index used for the time covariate when occurrence days are absent
# (mid-January, the middle of the winter window)
_FALLBACK_DAY = 46


@dataclass(frozen=True)
class StationTable:
    """Station geometry plus the six location-surface covariates."""

    sites: SiteSet
    covariates: np.ndarray

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.covariates, dtype=float))
        if cov.shape != (self.sites.n_sites, 6):
            raise ValueError(f"covariates must be (D, 6), got {cov.shape}")
        object.__setattr__(self, "covariates", cov)

    @property
    def X(self):
        """Design matrix: intercept plus the six covariates, (D, 7)."""
        return np.column_stack([np.ones(self.sites.n_sites), self.covariates])


@dataclass(frozen=True)
class Dataset:
    """Winter minima at the stations with missing mask and occurrence days."""

    years: tuple
    sites: SiteSet
    minima: np.ndarray          # (N, D), NaN = missing
    occ_days: tuple             # per year, per site: tuple of day indices
    X: np.ndarray               # (D, 7) design matrix
    t: np.ndarray               # (N, D) years from 2000-01-01, NaN = missing
    resolved_days: np.ndarray = None

    def __post_init__(self):
        years = tuple(int(y) for y in self.years)
        minima = np.atleast_2d(np.asarray(self.minima, dtype=float))
        n, d = len(years), self.sites.n_sites
        if minima.shape != (n, d):
            raise ValueError(f"minima must be ({n}, {d}), got {minima.shape}")
        t = np.atleast_2d(np.asarray(self.t, dtype=float))
        if t.shape != (n, d):
            raise ValueError(f"time covariate must be ({n}, {d})")
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if X.shape[0] != d:
            raise ValueError("design matrix rows must match the sites")
        obs = np.isfinite(minima)
        if n and not np.all(obs.sum(axis=1) >= 1):
            bad = [years[i] for i in np.flatnonzero(obs.sum(axis=1) == 0)]
            raise ValueError(f"winters with no observed site: {bad}")
        if n and not np.all(obs.sum(axis=0) >= 1):
            bad = [self.sites.ids[j] for j in np.flatnonzero(obs.sum(axis=0) == 0)]
            raise ValueError(f"stations with no observed winter: {bad}")
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "minima", minima)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "X", X)
        if self.resolved_days is None:
            object.__setattr__(self, "resolved_days", np.full((n, d), np.nan))

    @property
    def n_years(self):
        return len(self.years)

    @property
    def observed_mask(self):
        return np.isfinite(self.minima)

    def observed_sites(self, year_index):
        return tuple(int(j) for j in np.flatnonzero(self.observed_mask[year_index]))


@dataclass
class ValidationReport:
    """Counts gathered while loading a dataset."""

    per_year: dict = field(default_factory=dict)
    per_station: dict = field(default_factory=dict)
    n_missing: int = 0

    def summary(self):
        lines = [
            f"{len(self.per_year)} winters, {len(self.per_station)} stations, "
            f"{self.n_missing} missing values",
            "observed per winter: "
            + ", ".join(f"{y}:{c}" for y, c in sorted(self.per_year.items())),
            "observed per station: "
            + ", ".join(f"{s}:{c}" for s, c in self.per_station.items()),
        ]
        return "\n".join(lines)


def _winter_day_to_t(winter, day):
    """Years from 2000-01-01 of day index `day` (1 = Dec 1) in the winter."""
    date = datetime.date(int(winter) - 1, 12, 1) + datetime.timedelta(days=int(day) - 1)
    return (date - _EPOCH).days / _DAYS_PER_YEAR


def _read_rows(path, required):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise SchemaError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        header = [h.strip() for h in header]
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        col = {c: header.index(c) for c in required}
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) < len(header):
                raise ParseError(f"{path}: expected {len(header)} fields", line=lineno)
            rows.append((lineno, row))
        return col, rows


def load_stations(path):
    col, rows = _read_rows(path, STATION_COLUMNS)
    if not rows:
        raise SchemaError(f"{path}: no station rows")
    ids, coords, covs = [], [], []
    for lineno, row in rows:
        try:
            ids.append(row[col["id"]].strip())
            x = float(row[col["x_km"]])
            y = float(row[col["y_km"]])
            coords.append((x, y))
            covs.append(
                [x, y]
                + [
                    float(row[col[c]])
                    for c in (
                        "elevation_m", "relative_elevation_m",
                        "ocean_proximity", "lake_cover",
                    )
                ]
            )
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}", line=lineno) from exc
    if len(set(ids)) != len(ids):
        raise SchemaError(f"{path}: duplicate station ids")
    return StationTable(SiteSet(np.array(coords), tuple(ids)), np.array(covs))


def load_dataset(stations_path, minima_path, tie_seed=0):
    """Load stations and minima files into a Dataset.

    Returns (dataset, report).  Blank minima become missing values; ties in
    the occurrence days are resolved with draws keyed by
    (tie_seed, winter position, site).
    """
    stations = load_stations(stations_path)
    col, rows = _read_rows(minima_path, MINIMA_COLUMNS)
    if not rows:
        raise SchemaError(f"{minima_path}: no data rows")
    site_index = {sid: j for j, sid in enumerate(stations.sites.ids)}
    records = {}
    years = set()
    for lineno, row in rows:
        sid = row[col["station"]].strip()
        if sid not in site_index:
            raise ParseError(f"{minima_path}: unknown station id {sid!r}", line=lineno)
        try:
            winter = int(row[col["winter"]])
            raw_min = row[col["minimum"]].strip()
            value = float(raw_min) if raw_min else np.nan
            raw_days = row[col["occ_days"]].strip()
            days = tuple(int(tok) for tok in raw_days.split(";") if tok.strip()) if raw_days else ()
        except ValueError as exc:
            raise ParseError(f"{minima_path}: {exc}", line=lineno) from exc
        key = (winter, site_index[sid])
        if key in records:
            raise ParseError(
                f"{minima_path}: duplicate row for winter {winter}, station {sid}",
                line=lineno,
            )
        records[key] = (value, days)
        years.add(winter)

    years = tuple(sorted(years))
    n, d = len(years), stations.sites.n_sites
    minima = np.full((n, d), np.nan)
    t = np.full((n, d), np.nan)
    resolved = np.full((n, d), np.nan)
    occ = [[() for _ in range(d)] for _ in range(n)]
    report = ValidationReport()
    for (winter, j), (value, days) in records.items():
        yi = years.index(winter)
        minima[yi, j] = value
        occ[yi][j] = days
        if np.isfinite(value):
            if days:
                if len(days) > 1:
                    rng = np.random.default_rng([int(tie_seed), yi, j])
                    day = int(days[rng.integers(len(days))])
                else:
                    day = days[0]
            else:
                day = _FALLBACK_DAY
            resolved[yi, j] = day
            t[yi, j] = _winter_day_to_t(winter, day)
            report.per_year[winter] = report.per_year.get(winter, 0) + 1
            sid = stations.sites.ids[j]
            report.per_station[sid] = report.per_station.get(sid, 0) + 1
        else:
            report.n_missing += 1

    dataset = Dataset(
        years=years,
        sites=stations.sites,
        minima=minima,
        occ_days=tuple(tuple(tuple(ds) for ds in row) for row in occ),
        X=stations.X,
        t=t,
        resolved_days=resolved,
    )
    return dataset, report


def save_stations(table: StationTable, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STATION_COLUMNS)
        for j, sid in enumerate(table.sites.ids):
            writer.writerow(
                [sid]
                + [repr(float(v)) for v in table.sites.coords[j]]
                + [repr(float(v)) for v in table.covariates[j, 2:]]
            )


def save_minima(data: Dataset, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MINIMA_COLUMNS)
        for yi, year in enumerate(data.years):
            for j, sid in enumerate(data.sites.ids):
                value = data.minima[yi, j]
                days = data.occ_days[yi][j]
                if not np.isfinite(value) and not days:
                    continue
                writer.writerow(
                    [
                        year,
                        sid,
                        repr(float(value)) if np.isfinite(value) else "",
                        ";".join(str(int(dd)) for dd in days),
                    ]
                )


def save_dataset(data: Dataset, stations_path, minima_path):
    """Write a dataset back to its two CSV files (repr floats round-trip)."""
    table = StationTable(data.sites, data.X[:, 1:])
    save_stations(table, stations_path)
    save_minima(data, minima_path)
