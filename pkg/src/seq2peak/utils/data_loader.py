"""Hourly time-series ingestion: CSV parsing and cached dataset downloads."""

import hashlib
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import requests
from tqdm import tqdm

from .validators import (
    FetchError,
    IntegrityError,
    MalformedInputError,
    ShapeError,
    UsageError,
    validate_frame,
)

logger = logging.getLogger(__name__)

DATE_COLUMN = "date"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
MISSING_POLICIES = ("forward-fill", "reject-row")
MISSING_TOKENS = {"", "nan", "na", "null"}

# Hourly benchmark sources
DATASETS = {
    "ETTh1": "https://raw.githubusercontent.com/zhouhaoyi/ETDataset/main/ETT-small/ETTh1.csv",
    "ETTh2": "https://raw.githubusercontent.com/zhouhaoyi/ETDataset/main/ETT-small/ETTh2.csv",
    "electricity": (
        "https://raw.githubusercontent.com/wayne155/multivariate_timeseries_datasets/"
        "main/electricity/electricity.csv"
    ),
}


@dataclass(frozen=True)
class TimeSeriesFrame:
    """
    Timestamped multivariate hourly series.

    ``values`` is an (L, c) float64 array, copied and made read-only on
    construction; ``timestamps`` has one entry per row.
    """

    timestamps: pd.DatetimeIndex
    values: np.ndarray
    channel_names: tuple

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ShapeError(f"values must be 2-D (length x channels), got {values.shape}")
        values.flags.writeable = False

        timestamps = pd.DatetimeIndex(self.timestamps)
        names = tuple(str(c) for c in self.channel_names)
        if len(timestamps) != values.shape[0]:
            raise ShapeError(
                f"{len(timestamps)} timestamps for {values.shape[0]} rows"
            )
        if len(names) != values.shape[1]:
            raise ShapeError(f"{len(names)} channel names for {values.shape[1]} channels")

        object.__setattr__(self, "values", values)
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "channel_names", names)

    def __len__(self):
        return self.values.shape[0]

    @property
    def n_channels(self):
        return self.values.shape[1]

    @property
    def hours(self):
        """Hour-of-day of every row."""
        return np.asarray(self.timestamps.hour, dtype=np.int64)

    def slice(self, start, stop):
        """Contiguous row range [start, stop)."""
        return TimeSeriesFrame(
            self.timestamps[start:stop], self.values[start:stop], self.channel_names
        )

    def with_values(self, values):
        """Same timestamps and channels, new values."""
        return TimeSeriesFrame(self.timestamps, values, self.channel_names)

    def channel_index(self, name):
        try:
            return self.channel_names.index(name)
        except ValueError:
            raise UsageError(
                f"Unknown channel '{name}'. Available: {list(self.channel_names)}"
            ) from None

    def select(self, names):
        """Frame restricted to the named channels, in the given order."""
        idx = [self.channel_index(n) for n in names]
        return TimeSeriesFrame(self.timestamps, self.values[:, idx], tuple(names))

    def to_dataframe(self):
        df = pd.DataFrame(self.values, columns=list(self.channel_names))
        df.insert(0, DATE_COLUMN, self.timestamps.strftime(DATE_FORMAT))
        return df

    def to_csv(self, path):
        self.to_dataframe().to_csv(path, index=False)


def load_csv(path, policy="forward-fill"):
    """
    Load an hourly CSV with a leading ``date`` column.

    Args:
        path: CSV file; header row, ``date`` as YYYY-MM-DD HH:MM:SS, numeric channels
        policy: Missing-value policy, 'forward-fill' or 'reject-row'

    Returns:
        TimeSeriesFrame with one channel per non-date column

    Raises:
        MalformedInputError: Unparseable cell (row and column named), missing
            value under 'reject-row', or a channel with no values at all.
        SpacingError: Timestamps that do not advance by exactly one hour.
    """
    if policy not in MISSING_POLICIES:
        raise UsageError(f"Unknown missing-value policy '{policy}'. Use one of {MISSING_POLICIES}")

    path = Path(path)
    if not path.exists():
        raise UsageError(f"File not found: {path}")

    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")

    if len(df.columns) < 2 or df.columns[0] != DATE_COLUMN:
        raise MalformedInputError(
            f"{path}: expected header '{DATE_COLUMN}' followed by at least one channel, "
            f"got {list(df.columns)}"
        )

    # Row numbers in messages are file line numbers (header is line 1)
    timestamps = pd.to_datetime(df[DATE_COLUMN].str.strip(), format=DATE_FORMAT, errors="coerce")
    if timestamps.isna().any():
        row = int(np.argmax(timestamps.isna().to_numpy()))
        raise MalformedInputError(
            f"{path}: row {row + 2}, column '{DATE_COLUMN}': "
            f"cannot parse '{df[DATE_COLUMN].iloc[row]}' as {DATE_FORMAT}"
        )

    channels = list(df.columns[1:])
    values = np.empty((len(df), len(channels)))
    for j, col in enumerate(channels):
        raw = df[col].str.strip()
        missing = raw.str.lower().isin(MISSING_TOKENS).to_numpy()
        parsed = pd.to_numeric(raw.where(~missing), errors="coerce").to_numpy(dtype=float)

        bad = (np.isnan(parsed) & ~missing) | np.isinf(parsed)
        if bad.any():
            row = int(np.argmax(bad))
            raise MalformedInputError(
                f"{path}: row {row + 2}, column '{col}': non-numeric value '{raw.iloc[row]}'"
            )
        if missing.all():
            raise MalformedInputError(f"{path}: channel '{col}' has no values")
        if missing.any() and policy == "reject-row":
            row = int(np.argmax(missing))
            raise MalformedInputError(f"{path}: row {row + 2}, column '{col}': missing value")

        values[:, j] = parsed

    gaps = np.isnan(values)
    if gaps.any():
        filled = pd.DataFrame(values).ffill().to_numpy()
        # Leading gaps have nothing to carry forward
        first_complete = int(np.argmax(~np.isnan(filled).any(axis=1)))
        warnings.warn(
            f"{path}: forward-filled {int(gaps.sum())} missing value(s)"
            + (f", dropped {first_complete} leading row(s)" if first_complete else ""),
            UserWarning
        )
        values = filled[first_complete:]
        timestamps = timestamps.iloc[first_complete:]

    frame = TimeSeriesFrame(pd.DatetimeIndex(timestamps), values, tuple(channels))
    validate_frame(frame)
    logger.debug("Loaded %s: %d rows x %d channels", path, len(frame), frame.n_channels)
    return frame


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def fetch_dataset(name, url=None, cache_dir="data/raw", sha256=None, timeout=60):
    """
    Download a dataset CSV once and verify it against a recorded checksum.

    The cache holds ``<cache_dir>/<name>.csv`` and a ``<name>.sha256`` sidecar
    written on first download. Later calls re-verify the cached file and never
    touch the network.

    Args:
        name: Dataset id (a key of DATASETS, or any name when ``url`` is given)
        url: HTTP source overriding the registry
        cache_dir: Cache directory
        sha256: Optional expected digest
        timeout: Request timeout in seconds

    Returns:
        Path to the cached CSV

    Raises:
        UsageError: Unknown name and no url.
        FetchError: Network failure with no cached copy.
        IntegrityError: Truncated download or checksum mismatch.
    """
    url = url or DATASETS.get(name)
    if url is None:
        raise UsageError(
            f"Unknown dataset '{name}' and no url given. Known: {sorted(DATASETS)}"
        )

    cache_dir = Path(cache_dir)
    csv_path = cache_dir / f"{name}.csv"
    sidecar = cache_dir / f"{name}.sha256"

    if csv_path.exists():
        digest = sha256_file(csv_path)
        recorded = sidecar.read_text().strip() if sidecar.exists() else None
        for expected in (recorded, sha256):
            if expected is not None and digest != expected:
                raise IntegrityError(
                    f"{csv_path}: checksum {digest} does not match recorded {expected}"
                )
        if recorded is None:
            sidecar.write_text(digest + "\n")
        logger.debug("Cache hit for %s at %s", name, csv_path)
        return csv_path

    cache_dir.mkdir(parents=True, exist_ok=True)
    part = csv_path.with_suffix(".csv.part")
    logger.info("Downloading %s from %s", name, url)

    try:
        with requests.get(url, stream=True, timeout=timeout) as response:
            response.raise_for_status()
            expected_size = response.headers.get("Content-Length")
            received = 0
            with open(part, "wb") as f, tqdm(
                total=int(expected_size) if expected_size else None,
                unit="B", unit_scale=True, desc=f"  {name}", disable=None
            ) as bar:
                for chunk in response.iter_content(chunk_size=1 << 16):
                    f.write(chunk)
                    received += len(chunk)
                    bar.update(len(chunk))
    except requests.RequestException as e:
        part.unlink(missing_ok=True)
        raise FetchError(f"Could not download {name} from {url}: {e}") from e

    if expected_size is not None and received != int(expected_size):
        part.unlink(missing_ok=True)
        raise IntegrityError(
            f"Truncated download of {name}: {received} of {expected_size} bytes"
        )

    digest = sha256_file(part)
    if sha256 is not None and digest != sha256:
        part.unlink(missing_ok=True)
        raise IntegrityError(f"{name}: checksum {digest} does not match expected {sha256}")

    part.replace(csv_path)
    sidecar.write_text(digest + "\n")
    return csv_path
