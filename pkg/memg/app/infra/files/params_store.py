"""Versioned JSON persistence of fitted parameters."""

from collections.abc import Sequence
from pathlib import Path

from app.echo.models import FitResult
from app.infra.files._documents import load_document, write_document
from app.infra.mapper.params_mapper import fit_doc_to_result, fits_to_doc
from app.infra.model.params_model import PARAMS_SCHEMA_VERSION, ParamsDoc


def params_json(fits: Sequence[FitResult]) -> str:
    return fits_to_doc(list(fits)).model_dump_json(indent=2) + "\n"


def write_params(fits: Sequence[FitResult], path: Path) -> Path:
    return write_document(Path(path), fits_to_doc(list(fits)))


def read_params(path: Path, schema_version: int = PARAMS_SCHEMA_VERSION) -> list[FitResult]:
    """Load fits written by ``write_params``.

    Raises:
        SchemaVersionError: The document was written under another version.
    """
    doc = load_document(Path(path), ParamsDoc, schema_version)
    return [fit_doc_to_result(frame) for frame in doc.frames]
