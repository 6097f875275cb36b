# ABOUTME: CSV ingestion for tabular datasets and daily price series using pandas.
# ABOUTME: Validates headers and values and reports problems with row and column diagnostics.

import logging
from pathlib import Path

import pandas as pd
from pydantic import ValidationError

from mvpreg.data.manifests import ColumnManifest
from mvpreg.errors import DataError
from mvpreg.experiments.backtest import PriceSeries
from mvpreg.experiments.evaluation import Dataset

logger = logging.getLogger(__name__)

PRICE_COLUMNS = ["date", "open", "close", "adj_close"]
_MAX_DIAGNOSTICS = 5


def _read_frame(path: str | Path) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"CSV file not found: {path}")
    try:
        frame = pd.read_csv(path)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise DataError(f"Cannot parse {path}: {e}") from e
    frame.columns = [str(c).strip() for c in frame.columns]
    return frame


def _require_columns(frame: pd.DataFrame, columns: list[str], path: str | Path) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}; available columns: {list(frame.columns)}")


def _cells(mask: pd.DataFrame) -> list[str]:
    # File line = data row index + 2 (header is line 1)
    found = []
    for col in mask.columns:
        for idx in mask.index[mask[col].to_numpy()]:
            found.append(f"line {idx + 2}, column '{col}'")
    return found


def _to_hours(values: pd.Series) -> pd.Series:
    text = values.astype(str).str.strip().str.replace(".", ":", regex=False)
    return pd.to_timedelta(text, errors="coerce").dt.total_seconds() / 3600.0


def read_dataset(path: str | Path, manifest: ColumnManifest, drop_incomplete: bool = False) -> Dataset:
    """Load the manifest's input and output columns from a CSV file.

    Args:
        path: CSV file with a header row, comma-delimited, decimal point.
        manifest: Columns to select and preprocessing to apply.
        drop_incomplete: Drop rows with missing values instead of failing.

    Returns:
        Dataset with the selected columns in manifest order.

    Raises:
        DataError: If the file is unreadable, a column is missing, a value is
            not numeric, or a value is missing and ``drop_incomplete`` is False.
    """
    frame = _read_frame(path)
    selected = manifest.inputs + manifest.outputs
    _require_columns(frame, selected + list(manifest.filters), path)
    frame = frame.reset_index(drop=True)

    values = pd.DataFrame(index=frame.index)
    for col in selected:
        raw = frame[col]
        parsed = _to_hours(raw) if col in manifest.time_columns else pd.to_numeric(raw, errors="coerce")
        bad = parsed.isna() & raw.notna() & (raw.astype(str).str.strip() != "")
        if bad.any():
            cells = _cells(pd.DataFrame({col: bad}))
            raise DataError(f"{path}: non-numeric values at " + "; ".join(cells[:_MAX_DIAGNOSTICS]))
        values[col] = parsed
    if manifest.na_values:
        values = values.mask(values.isin(manifest.na_values))

    keep = pd.Series(True, index=frame.index)
    for col, target in manifest.filters.items():
        keep &= pd.to_numeric(frame[col], errors="coerce") == target
    values = values[keep]

    missing = values.isna()
    if missing.to_numpy().any():
        if not drop_incomplete:
            cells = _cells(missing)
            raise DataError(
                f"{path}: {int(missing.to_numpy().sum())} missing values, first at "
                + "; ".join(cells[:_MAX_DIAGNOSTICS])
                + " (use --drop-incomplete to delete incomplete rows)"
            )
        before = len(values)
        values = values.dropna()
        logger.info("Dropped %d incomplete rows from %s", before - len(values), path)

    if manifest.max_rows is not None:
        values = values.head(manifest.max_rows)
    if values.empty:
        raise DataError(f"{path}: no usable rows")

    return Dataset(
        X=values[manifest.inputs].to_numpy(dtype=float),
        Y=values[manifest.outputs].to_numpy(dtype=float),
        input_names=list(manifest.inputs),
        output_names=list(manifest.outputs),
    )


def read_inputs(path: str | Path, inputs: list[str], drop_incomplete: bool = False) -> pd.DataFrame:
    """Load the named input columns of a CSV for prediction.

    Raises:
        DataError: On missing columns or values.
    """
    frame = _read_frame(path)
    _require_columns(frame, inputs, path)
    values = frame[inputs].apply(pd.to_numeric, errors="coerce")
    missing = values.isna()
    if missing.to_numpy().any():
        if not drop_incomplete:
            cells = _cells(missing)
            raise DataError(f"{path}: missing or non-numeric inputs at " + "; ".join(cells[:_MAX_DIAGNOSTICS]))
        values = values.dropna()
        logger.info("Dropped %d incomplete rows from %s", len(frame) - len(values), path)
    return values


def read_price_series(path: str | Path, name: str | None = None) -> PriceSeries:
    """Load a ``date,open,close,adj_close`` CSV as a PriceSeries named after the file stem.

    Raises:
        DataError: On missing columns, unparsable values or invalid prices.
    """
    frame = _read_frame(path)
    _require_columns(frame, PRICE_COLUMNS, path)
    dates = pd.to_datetime(frame["date"], errors="coerce")
    if dates.isna().any():
        cells = _cells(pd.DataFrame({"date": dates.isna()}))
        raise DataError(f"{path}: unparsable dates at " + "; ".join(cells[:_MAX_DIAGNOSTICS]))
    prices = frame[PRICE_COLUMNS[1:]].apply(pd.to_numeric, errors="coerce")
    if prices.isna().to_numpy().any():
        raise DataError(f"{path}: missing prices at " + "; ".join(_cells(prices.isna())[:_MAX_DIAGNOSTICS]))
    try:
        return PriceSeries(
            name=name or Path(path).stem,
            dates=[d.strftime("%Y-%m-%d") for d in dates],
            open=prices["open"].to_numpy(),
            close=prices["close"].to_numpy(),
            adj_close=prices["adj_close"].to_numpy(),
        )
    except ValidationError as e:
        raise DataError(f"{path}: {e.errors()[0]['msg']}") from e
