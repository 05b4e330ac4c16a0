"""
JSON Schema validation for run configurations and model files.
"""

import json
from pathlib import Path
from typing import Any

try:
    from jsonschema import Draft202012Validator, ValidationError

    HAS_JSONSCHEMA = True
except ImportError:
    HAS_JSONSCHEMA = False
    ValidationError = Exception  # type: ignore


SCHEMAS_DIR = Path(__file__).parent.parent / "schemas"
RUN_CONFIG_SCHEMA = "run_config.schema.json"
MODEL_SCHEMA = "model.schema.json"


def load_schema(name: str) -> dict[str, Any]:
    """Load a JSON schema from the schemas/ directory."""
    schema_path = SCHEMAS_DIR / name
    if not schema_path.exists():
        raise FileNotFoundError(f"Schema file not found: {schema_path}")

    with open(schema_path) as f:
        return json.load(f)


def validate_document(
    document: dict[str, Any], schema_name: str, raise_on_error: bool = True
) -> list[str]:
    """
    Validate a document against one of the packaged schemas.

    Args:
        document: Parsed YAML/JSON document
        schema_name: File name under schemas/
        raise_on_error: If True, raise ValidationError on first error.
                       If False, return list of all error messages.

    Returns:
        List of error messages (empty if valid)

    Raises:
        ValidationError: If raise_on_error is True and validation fails
        ImportError: If jsonschema is not installed
    """
    if not HAS_JSONSCHEMA:
        raise ImportError(
            "jsonschema package is required for validation. "
            "Install it with: pip install jsonschema"
        )

    validator = Draft202012Validator(load_schema(schema_name))

    errors: list[str] = []
    for error in sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path)):
        error_path = (
            " -> ".join(str(p) for p in error.absolute_path)
            if error.absolute_path
            else "root"
        )
        error_msg = f"[{error_path}] {error.message}"
        errors.append(error_msg)

        if raise_on_error:
            raise ValidationError(error_msg)

    return errors
