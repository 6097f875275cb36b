# ABOUTME: Plain-text storage for fitted models using key = value lines and matrix blocks.
# ABOUTME: Floats are written in hexadecimal so a saved model reloads bit-for-bit.

from pathlib import Path
from typing import Any, TextIO

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from mvpreg.errors import DataError
from mvpreg.experiments.evaluation import NormalizationState
from mvpreg.models.families import FittedFamily
from mvpreg.models.kernels import KernelSpec
from mvpreg.models.mvgp import TrainedModel
from mvpreg.models.params import HyperParams, RowCovParams

FORMAT_VERSION = "1"
MATRIX_KEYS = {"X", "Y"}


class StoredModel(BaseModel):
    """A fitted family together with the column names and scaling it was trained with."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    fitted: FittedFamily
    inputs: list[str]
    outputs: list[str]
    x_state: NormalizationState | None = None
    y_state: NormalizationState | None = None


def _hex(values) -> str:
    return " ".join(float(v).hex() for v in np.ravel(values))


def _unhex(text: str) -> np.ndarray:
    return np.array([float.fromhex(tok) for tok in text.split()], dtype=float)


class ModelFile:
    """Line-oriented model file with context manager support."""

    def __init__(self, path: str | Path, mode: str = "r"):
        """Prepare a model file for reading or writing.

        Args:
            path: File location.
            mode: ``"r"`` to read or ``"w"`` to write.
        """
        if mode not in ("r", "w"):
            raise ValueError(f"Unsupported mode '{mode}'")
        self.path = Path(path)
        self.mode = mode
        self._fh: TextIO | None = None

    def __enter__(self) -> "ModelFile":
        """Open the file when entering the context."""
        try:
            self._fh = open(self.path, self.mode, encoding="utf-8")  # noqa: SIM115
        except OSError as e:
            raise DataError(f"Cannot open model file {self.path}: {e}") from e
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        """Close the file when exiting the context."""
        if self._fh:
            self._fh.close()
            self._fh = None

    def _handle(self) -> TextIO:
        if not self._fh:
            raise RuntimeError("Model file not opened. Use 'with' statement.")
        return self._fh

    def write_comment(self, text: str) -> None:
        self._handle().write(f"# {text}\n")

    def write_value(self, key: str, value: str) -> None:
        self._handle().write(f"{key} = {value}\n")

    def write_floats(self, key: str, values) -> None:
        self.write_value(key, _hex(values))

    def write_matrix(self, key: str, M: np.ndarray) -> None:
        """Write a ``key = rows cols`` line followed by one line per row."""
        M = np.atleast_2d(M)
        self.write_value(key, f"{M.shape[0]} {M.shape[1]}")
        for row in M:
            self._handle().write(_hex(row) + "\n")

    def records(self) -> list[tuple[str, Any]]:
        """Parse the file into ``(key, value)`` pairs; matrix values come back as arrays.

        Raises:
            DataError: On malformed lines or truncated matrix blocks.
        """
        lines = [line.rstrip("\n") for line in self._handle()]
        out: list[tuple[str, Any]] = []
        i = 0
        while i < len(lines):
            line = lines[i]
            i += 1
            if not line.strip() or line.startswith("#"):
                continue
            key, sep, value = line.partition(" = ")
            if not sep:
                key, sep, value = line.partition(" =")
            if not sep:
                raise DataError(f"{self.path}: line {i} is not 'key = value'")
            if key in MATRIX_KEYS:
                rows, cols = (int(t) for t in value.split())
                if i + rows > len(lines):
                    raise DataError(f"{self.path}: matrix '{key}' truncated")
                M = np.array([_unhex(lines[i + r]) for r in range(rows)]).reshape(rows, cols)
                i += rows
                out.append((key, M))
            else:
                out.append((key, value.strip()))
        return out


def save_model(path: str | Path, stored: StoredModel) -> None:
    """Write a StoredModel to ``path``."""
    fitted = stored.fitted
    with ModelFile(path, "w") as f:
        f.write_comment("mvpreg model file")
        f.write_value("format", FORMAT_VERSION)
        f.write_value("family", fitted.family)
        f.write_value("inputs", ",".join(stored.inputs))
        f.write_value("outputs", ",".join(stored.outputs))
        for prefix, state in (("x", stored.x_state), ("y", stored.y_state)):
            if state is not None:
                f.write_floats(f"{prefix}_mu", state.mu)
                f.write_floats(f"{prefix}_sigma", state.sigma)
        f.write_value("components", str(len(fitted.models)))
        for k, model in enumerate(fitted.models):
            p = model.params
            f.write_value("component", str(k))
            f.write_value("kernel_family", p.kernel.family)
            f.write_floats("log_lengthscales", p.kernel.log_lengthscales)
            f.write_floats("log_signal_variance", [p.kernel.log_signal_variance])
            f.write_floats("log_noise_variance", [p.kernel.log_noise_variance])
            f.write_floats("phi_lower", p.rowcov.phi_lower)
            f.write_floats("varphi_diag", p.rowcov.varphi_diag)
            f.write_value("lognu_minus2", "none" if p.lognu_minus2 is None else float(p.lognu_minus2).hex())
            f.write_value("nlml_at_fit", float(model.nlml_at_fit).hex())
            f.write_value("converged", "true" if model.converged else "false")
            f.write_matrix("X", model.X)
            f.write_matrix("Y", model.Y)


def _component(fields: dict[str, Any], family: str) -> TrainedModel:
    nu = fields["lognu_minus2"]
    params = HyperParams(
        kernel=KernelSpec(
            family=fields["kernel_family"],
            log_lengthscales=_unhex(fields["log_lengthscales"]),
            log_signal_variance=float(_unhex(fields["log_signal_variance"])[0]),
            log_noise_variance=float(_unhex(fields["log_noise_variance"])[0]),
        ),
        rowcov=RowCovParams(phi_lower=_unhex(fields["phi_lower"]), varphi_diag=_unhex(fields["varphi_diag"])),
        lognu_minus2=None if nu == "none" else float.fromhex(nu),
    )
    return TrainedModel(
        X=fields["X"],
        Y=fields["Y"],
        params=params,
        family="tp" if family in ("mvtp", "tp") else "gp",
        nlml_at_fit=float.fromhex(fields["nlml_at_fit"]),
        converged=fields["converged"] == "true",
    )


def load_model(path: str | Path) -> StoredModel:
    """Read a StoredModel written by ``save_model``.

    Raises:
        DataError: If the file is missing or malformed.
    """
    with ModelFile(path, "r") as f:
        records = f.records()

    header: dict[str, Any] = {}
    components: list[dict[str, Any]] = []
    for key, value in records:
        if key == "component":
            components.append({})
        elif components:
            components[-1][key] = value
        else:
            header[key] = value

    if header.get("format") != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model format '{header.get('format')}'")
    try:
        family = header["family"]
        models = [_component(c, family) for c in components]
        states = {}
        for prefix in ("x", "y"):
            if f"{prefix}_mu" in header:
                states[prefix] = NormalizationState(
                    mu=_unhex(header[f"{prefix}_mu"]), sigma=_unhex(header[f"{prefix}_sigma"])
                )
        return StoredModel(
            fitted=FittedFamily(family=family, models=models),
            inputs=[c for c in header["inputs"].split(",") if c],
            outputs=[c for c in header["outputs"].split(",") if c],
            x_state=states.get("x"),
            y_state=states.get("y"),
        )
    except (KeyError, ValueError, ValidationError) as e:
        raise DataError(f"{path}: malformed model file ({e})") from e
