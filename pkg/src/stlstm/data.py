"""Multi-location daily series: ingestion, windowing, and synthetic data.

CSV format (one file per location): header ``date,<var1>,...,<varm>``
with ISO-8601 dates. Manifest format: one ``location_name,path`` line
per location in canonical order (paths relative to the manifest file),
then ``target=<location>:<variable>`` and optionally
``test_start=<date>,test_end=<date>`` (inclusive dates).

The manifest's location order is THE order: input vectors concatenate
location blocks in it, and the spatio-temporal model slices them back
out by it.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CsvFormatError,
    DataError,
    DateAlignmentError,
    ManifestError,
    MissingValueError,
    ShapeError,
)

_MISSING_TOKENS = {"", "na", "nan", "null"}


@dataclass
class Manifest:
    locations: list[tuple[str, Path]]  # (name, csv path) in canonical order
    target: tuple[str, str]            # (location, variable)
    test_range: tuple[dt.date, dt.date] | None = None  # inclusive

    def validate(self) -> None:
        if not self.locations:
            raise ManifestError("manifest lists no locations")
        names = [name for name, _ in self.locations]
        if len(set(names)) != len(names):
            raise ManifestError(f"duplicate location names in manifest: {names}")
        if self.target[0] not in names:
            raise ManifestError(
                f"target location {self.target[0]!r} is not in the manifest ({names})"
            )
        if self.test_range is not None and self.test_range[0] > self.test_range[1]:
            raise ManifestError(
                f"test_start {self.test_range[0]} is after test_end {self.test_range[1]}"
            )


def _parse_date(text: str, where: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError as exc:
        raise CsvFormatError(f"{where}: bad ISO date {text!r}") from exc


def load_manifest(path) -> Manifest:
    path = Path(path)
    locations: list[tuple[str, Path]] = []
    target = None
    test_start = test_end = None
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("target="):
            value = line[len("target="):]
            if ":" not in value:
                raise ManifestError(f"{path}:{lineno}: target must be <location>:<variable>")
            loc, var = value.split(":", 1)
            target = (loc.strip(), var.strip())
        elif line.startswith("test_start="):
            parts = dict(p.split("=", 1) for p in line.split(",") if "=" in p)
            if "test_start" not in parts or "test_end" not in parts:
                raise ManifestError(
                    f"{path}:{lineno}: expected test_start=<date>,test_end=<date>"
                )
            test_start = _parse_date(parts["test_start"], f"{path}:{lineno}")
            test_end = _parse_date(parts["test_end"], f"{path}:{lineno}")
        else:
            if "," not in line:
                raise ManifestError(f"{path}:{lineno}: expected 'location_name,path'")
            name, rel = line.split(",", 1)
            locations.append((name.strip(), (path.parent / rel.strip()).resolve()))
    if target is None:
        raise ManifestError(f"{path}: manifest declares no target")
    test_range = (test_start, test_end) if test_start is not None else None
    manifest = Manifest(locations=locations, target=target, test_range=test_range)
    manifest.validate()
    return manifest


@dataclass
class Dataset:
    """Aligned multi-location series plus train-range normalization stats.

    ``values`` has shape (L, c, m) in raw units; column stats are taken
    from rows strictly before the test range so test data can never
    leak into them.
    """

    dates: list[dt.date]
    values: np.ndarray
    locations: list[str]
    variables: list[str]
    target_loc: int
    target_var: int
    test_start_idx: int | None  # first test row
    test_end_idx: int | None    # one past the last test row
    norm_mean: np.ndarray       # (c*m,)
    norm_std: np.ndarray        # (c*m,)

    @property
    def n_days(self) -> int:
        return len(self.dates)

    @property
    def input_dim(self) -> int:
        return self.values.shape[1] * self.values.shape[2]

    def flat(self) -> np.ndarray:
        """(L, c*m) view: location blocks side by side in manifest order."""
        return self.values.reshape(self.n_days, -1)

    def target_column(self) -> int:
        return self.target_loc * len(self.variables) + self.target_var

    def normalized(self) -> np.ndarray:
        """Z-scored inputs; zero-variance columns map to zero."""
        return normalize(self)


def _read_location_csv(path: Path, missing_policy: str) -> tuple[list[dt.date], list[str], np.ndarray]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise CsvFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "date":
        raise CsvFormatError(f"{path}: header must be 'date,<var1>,...', got {header}")
    variables = header[1:]
    dates: list[dt.date] = []
    data = np.empty((len(rows) - 1, len(variables)))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise CsvFormatError(f"{path}:{r}: expected {len(header)} cells, got {len(row)}")
        dates.append(_parse_date(row[0], f"{path}:{r}"))
        for j, cell in enumerate(row[1:]):
            text = cell.strip()
            if text.lower() in _MISSING_TOKENS:
                if missing_policy == "ffill":
                    if r == 2:
                        raise MissingValueError(
                            f"{path}:{r}: leading missing value in {variables[j]!r} "
                            "cannot be forward-filled"
                        )
                    data[r - 2, j] = data[r - 3, j]
                else:
                    raise MissingValueError(
                        f"{path}:{r}: missing value in {variables[j]!r} "
                        "(missing_policy='error')"
                    )
            else:
                try:
                    data[r - 2, j] = float(text)
                except ValueError as exc:
                    raise CsvFormatError(
                        f"{path}:{r}: unparseable cell {cell!r} in {variables[j]!r}"
                    ) from exc
    return dates, variables, data


def _check_date_axis(dates: list[dt.date], path: Path) -> None:
    for a, b in zip(dates, dates[1:]):
        if b != a + dt.timedelta(days=1):
            raise DateAlignmentError(
                f"{path}: date axis must advance one day at a time, "
                f"found {a} followed by {b}"
            )


def load_dataset(manifest: Manifest, missing_policy: str = "error") -> Dataset:
    """Load and align every location file named by the manifest.

    ``missing_policy`` is 'error' (default) or 'ffill' (copy the
    previous day's value; a missing first row is always an error).
    """
    if missing_policy not in ("error", "ffill"):
        raise DataError(f"unknown missing_policy {missing_policy!r}")
    manifest.validate()
    dates0: list[dt.date] | None = None
    variables0: list[str] | None = None
    per_loc = []
    for name, path in manifest.locations:
        dates, variables, data = _read_location_csv(path, missing_policy)
        _check_date_axis(dates, path)
        if variables0 is None:
            dates0, variables0 = dates, variables
        else:
            if variables != variables0:
                raise CsvFormatError(
                    f"{path}: variable columns {variables} differ from "
                    f"{manifest.locations[0][1]}'s {variables0}"
                )
            if dates != dates0:
                lo = max(dates[0], dates0[0])
                hi = min(dates[-1], dates0[-1])
                raise DateAlignmentError(
                    f"{path}: date axis differs from {manifest.locations[0][1]} "
                    f"(spans {dates[0]}..{dates[-1]} vs {dates0[0]}..{dates0[-1]}, "
                    f"overlap {lo}..{hi if lo <= hi else 'none'})"
                )
        per_loc.append(data)
    assert dates0 is not None and variables0 is not None

    target_loc_name, target_var_name = manifest.target
    loc_names = [name for name, _ in manifest.locations]
    if target_var_name not in variables0:
        raise DataError(
            f"unknown target variable {target_var_name!r}; files declare {variables0}"
        )
    values = np.stack(per_loc, axis=1)  # (L, c, m)

    test_start_idx = test_end_idx = None
    if manifest.test_range is not None:
        start, end = manifest.test_range
        date_index = {d: i for i, d in enumerate(dates0)}
        if start not in date_index or end not in date_index:
            raise DateAlignmentError(
                f"test range {start}..{end} not covered by the data "
                f"({dates0[0]}..{dates0[-1]})"
            )
        test_start_idx = date_index[start]
        test_end_idx = date_index[end] + 1

    flat = values.reshape(len(dates0), -1)
    train_rows = flat[:test_start_idx] if test_start_idx is not None else flat
    if train_rows.shape[0] == 0:
        raise DataError("no rows before the test range to compute normalization stats")
    norm_mean = train_rows.mean(axis=0)
    norm_std = train_rows.std(axis=0)

    return Dataset(dates=dates0, values=values, locations=loc_names,
                   variables=variables0,
                   target_loc=loc_names.index(target_loc_name),
                   target_var=variables0.index(target_var_name),
                   test_start_idx=test_start_idx, test_end_idx=test_end_idx,
                   norm_mean=norm_mean, norm_std=norm_std)


def normalize(ds: Dataset) -> np.ndarray:
    """Per-column z-score with train-range stats; constant columns become 0."""
    flat = ds.flat()
    safe = np.where(ds.norm_std > 0.0, ds.norm_std, 1.0)
    z = (flat - ds.norm_mean) / safe
    return np.where(ds.norm_std > 0.0, z, 0.0)


def denormalize_target(ds: Dataset, z_value):
    """Inverse z-score for the target column.

    Window targets are emitted in raw units and never need this; it is
    the inverse transform for anyone who normalizes targets themselves.
    """
    col = ds.target_column()
    std = ds.norm_std[col] if ds.norm_std[col] > 0.0 else 1.0
    return np.asarray(z_value) * std + ds.norm_mean[col]


@dataclass
class Window:
    """One (input sequence, target) sample.

    ``inputs`` is (T, c*m) and normalized; ``target`` is the raw-scale
    value of the target variable q days after the last input day.
    ``window_id`` is the absolute row index of the first input day.
    """

    inputs: np.ndarray
    target: float
    window_id: int
    target_date: dt.date


def make_windows(ds: Dataset, seq_len: int, horizon: int,
                 start: int = 0, stop: int | None = None) -> list[Window]:
    """All windows fully contained in rows [start, stop).

    A window starting at row d spans input rows d..d+T-1 and targets row
    d+T-1+q. A range shorter than T+q yields an empty list.
    """
    if seq_len < 1 or horizon < 1:
        raise ShapeError(f"seq_len and horizon must be >= 1, got {seq_len}, {horizon}")
    L = ds.n_days
    stop = L if stop is None else stop
    if start < 0 or stop > L or start > stop:
        raise ShapeError(f"window range [{start}, {stop}) outside dataset of {L} rows")
    norm = ds.normalized()
    col = ds.target_column()
    raw = ds.flat()[:, col]
    span = seq_len + horizon  # first input day through target day, inclusive
    windows = []
    for d in range(start, stop - span + 1):
        tgt = d + seq_len - 1 + horizon
        windows.append(Window(inputs=norm[d:d + seq_len].copy(),
                              target=float(raw[tgt]),
                              window_id=d,
                              target_date=ds.dates[tgt]))
    return windows


def train_windows(ds: Dataset, seq_len: int, horizon: int) -> list[Window]:
    """Windows whose target day lies strictly before the test range."""
    stop = ds.test_start_idx if ds.test_start_idx is not None else ds.n_days
    return make_windows(ds, seq_len, horizon, 0, stop)


def test_windows(ds: Dataset, seq_len: int, horizon: int) -> list[Window]:
    """Windows whose target day lies inside the test range.

    Inputs may reach back before the range (forecasts use history), so
    the underlying row range starts T+q-1 days before it.
    """
    if ds.test_start_idx is None or ds.test_end_idx is None:
        raise DataError("dataset has no test range (manifest declared none)")
    start = ds.test_start_idx - (seq_len - 1 + horizon)
    if start < 0:
        raise DataError(
            f"not enough history before the test range: need {seq_len - 1 + horizon} "
            f"rows, have {ds.test_start_idx}"
        )
    return make_windows(ds, seq_len, horizon, start, ds.test_end_idx)


test_windows.__test__ = False  # keep pytest from collecting the imported name


def windows_to_arrays(windows: list[Window]) -> tuple[np.ndarray, np.ndarray]:
    """Stack windows into (N, T, c*m) inputs and (N,) raw targets."""
    if not windows:
        raise ShapeError("no windows to stack")
    X = np.stack([w.inputs for w in windows])
    y = np.array([w.target for w in windows])
    return X, y


# ---------------------------------------------------------------------------
# Synthetic coupled series

def synthetic_series(locations: int, vars_per_location: int, days: int,
                     coupling: float, seed: int, ar_coef: float = 0.7,
                     noise_std: float = 0.3
                     ) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Latent AR system with lagged cross-location coupling, plus readouts.

    Each location k carries a latent s_k following

        s_k(t+1) = ar_coef * ((1 - kappa) * s_k(t)
                   + kappa * mean_{j != k} s_j(t - delta_jk)) + eps

    with eps ~ N(0, noise_std) and per-pair lags delta_jk in {1, 2}
    fixed by the seed. The convex mix keeps the system stationary for
    every coupling in [0, 1] and reduces to an uncoupled AR(1) at
    kappa = 0. Observed variables are fixed linear readouts of the
    local latent plus a shared seasonal term sin(2*pi*t/365) and
    observation noise; variable 1 of every location is 'temperature',
    scaled to look like degrees Celsius.

    Returns (latents (days, c), values (days, c, m), variable names).
    """
    if locations < 1 or vars_per_location < 1:
        raise DataError("need at least one location and one variable")
    if not 0.0 <= coupling <= 1.0:
        raise DataError(f"coupling must be in [0, 1], got {coupling}")
    c, m = locations, vars_per_location
    rng = np.random.default_rng(seed)

    lags = rng.integers(1, 3, size=(c, c))  # delta_jk in {1, 2}
    temp_gain = 3.0
    temp_season = 8.0
    temp_offset = 10.0
    gains = rng.uniform(-2.0, 2.0, size=(c, m))
    seasonals = rng.uniform(-2.0, 2.0, size=(c, m))
    offsets = rng.uniform(-1.0, 1.0, size=(c, m))
    gains[:, 0] = temp_gain
    seasonals[:, 0] = temp_season
    offsets[:, 0] = temp_offset

    eps = rng.normal(0.0, noise_std, size=(days, c))
    obs_noise = rng.normal(0.0, noise_std, size=(days, c, m))

    latents = np.zeros((days, c))
    latents[0] = eps[0]
    for t in range(days - 1):
        for k in range(c):
            if c > 1 and coupling > 0.0:
                cross = 0.0
                for j in range(c):
                    if j == k:
                        continue
                    tj = t - int(lags[j, k])
                    cross += latents[tj, j] if tj >= 0 else 0.0
                cross /= c - 1
            else:
                cross = 0.0
            latents[t + 1, k] = (ar_coef * ((1.0 - coupling) * latents[t, k]
                                            + coupling * cross) + eps[t + 1, k])

    season = np.sin(2.0 * np.pi * np.arange(days) / 365.0)
    values = (offsets[None, :, :]
              + gains[None, :, :] * latents[:, :, None]
              + seasonals[None, :, :] * season[:, None, None]
              + obs_noise)
    variables = ["temperature"] + [f"var{v}" for v in range(2, m + 1)]
    return latents, values, variables


def gen_synthetic(out_dir, locations: int, vars_per_location: int, days: int,
                  coupling: float, seed: int, ar_coef: float = 0.7,
                  noise_std: float = 0.3, test_days: int | None = None,
                  start_date: dt.date = dt.date(2007, 1, 1)) -> Path:
    """Write per-location CSVs plus a manifest; byte-identical per seed.

    The last ``test_days`` days (default days // 10) become the declared
    test range. Returns the manifest path.
    """
    if days < 50:
        raise DataError(f"synthetic generator needs days >= 50, got {days}")
    _, values, variables = synthetic_series(locations, vars_per_location, days,
                                            coupling, seed, ar_coef, noise_std)
    if test_days is None:
        test_days = days // 10
    if not 0 < test_days < days:
        raise DataError(f"test_days must be in (0, days), got {test_days}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dates = [start_date + dt.timedelta(days=t) for t in range(days)]
    loc_names = [f"loc{k}" for k in range(1, locations + 1)]
    for k, name in enumerate(loc_names):
        lines = ["date," + ",".join(variables)]
        for t, date in enumerate(dates):
            lines.append(date.isoformat() + ","
                         + ",".join(repr(float(v)) for v in values[t, k]))
        (out_dir / f"{name}.csv").write_text("\n".join(lines) + "\n")

    manifest_lines = [f"{name},{name}.csv" for name in loc_names]
    manifest_lines.append(f"target={loc_names[0]}:temperature")
    manifest_lines.append(
        f"test_start={dates[days - test_days].isoformat()},"
        f"test_end={dates[-1].isoformat()}"
    )
    manifest_path = out_dir / "manifest.txt"
    manifest_path.write_text("\n".join(manifest_lines) + "\n")
    return manifest_path
