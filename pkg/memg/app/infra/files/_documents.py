import json
from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel, ValidationError

from app.shared.exceptions import FormatError, SchemaVersionError

DocT = TypeVar("DocT", bound=BaseModel)


def read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror or exc}") from exc


def write_text(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror or exc}") from exc
    return path


def write_document(path: Path, doc: BaseModel) -> Path:
    return write_text(path, doc.model_dump_json(indent=2) + "\n")


def load_document(path: Path, model: type[DocT], schema_version: int) -> DocT:
    """Parse a versioned JSON document, checking the version before the body.

    Args:
        path: Document path.
        model: Pydantic model of the document.
        schema_version: Version the caller understands.

    Returns:
        DocT: The validated document.
    """
    try:
        raw = json.loads(read_text(path))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict) or "schema_version" not in raw:
        raise FormatError(f"{path}: missing schema_version")
    if raw["schema_version"] != schema_version:
        raise SchemaVersionError(
            f"{path}: schema version {raw['schema_version']!r}, expected {schema_version}"
        )
    try:
        return model.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]["msg"]
        raise FormatError(f"{path}: {exc.error_count()} invalid fields: {first}") from exc
