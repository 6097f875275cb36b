# ABOUTME: Named column selections for the air-quality and bike-rental cross-validation studies.
# ABOUTME: A manifest picks inputs and outputs, marks sentinel missing values and limits the rows used.

from pydantic import BaseModel, ConfigDict, Field

from mvpreg.errors import ConfigError


class ColumnManifest(BaseModel):
    """Column selection and preprocessing for one tabular dataset.

    Attributes:
        name: Manifest name.
        inputs: Input column names, in model order.
        outputs: Output column names, in model order.
        folds: Default number of cross-validation blocks.
        time_columns: Columns holding clock times (``HH:MM:SS`` or ``HH.MM.SS``), converted to hours.
        na_values: Sentinel values treated as missing.
        filters: Keep only rows where each column equals the given value.
        max_rows: Keep the first ``max_rows`` complete rows.
    """

    model_config = ConfigDict(frozen=True)

    name: str
    inputs: list[str]
    outputs: list[str]
    folds: int = Field(ge=2)
    time_columns: list[str] = Field(default_factory=list)
    na_values: list[float] = Field(default_factory=list)
    filters: dict[str, float] = Field(default_factory=dict)
    max_rows: int | None = None


MANIFESTS: dict[str, ColumnManifest] = {
    "air": ColumnManifest(
        name="air",
        inputs=["Time", "CO(GT)", "NMHC(GT)", "C6H6(GT)", "NOx(GT)", "NO2(GT)", "AH", "T", "RH"],
        outputs=["PT08.S1(CO)", "PT08.S2(NMHC)", "PT08.S3(NOx)", "PT08.S4(NO2)", "PT08.S5(O3)"],
        folds=9,
        time_columns=["Time"],
        na_values=[-200.0],
        max_rows=864,
    ),
    "bike": ColumnManifest(
        name="bike",
        inputs=["temp", "atemp", "hum", "windspeed", "holiday", "weekday", "workingday", "weathersit"],
        outputs=["casual", "registered"],
        folds=8,
        filters={"season": 3},
        max_rows=168,
    ),
}


def get_manifest(name: str) -> ColumnManifest:
    """Look up a manifest by name.

    Raises:
        ConfigError: If no manifest has that name.
    """
    try:
        return MANIFESTS[name]
    except KeyError:
        raise ConfigError(f"Unknown manifest '{name}'; available: {', '.join(sorted(MANIFESTS))}") from None


def adhoc_manifest(inputs: list[str], outputs: list[str], folds: int) -> ColumnManifest:
    """Manifest built from explicit column lists.

    Raises:
        ConfigError: If either list is empty.
    """
    if not inputs or not outputs:
        raise ConfigError("Both input and output columns must be given (or a manifest name)")
    return ColumnManifest(name="custom", inputs=inputs, outputs=outputs, folds=folds)
