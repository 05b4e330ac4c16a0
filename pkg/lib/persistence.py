"""
Model files: versioned JSON documents holding a fitted expansion by value.

Layout:
    {format_version, kernel{family, params, d}, alpha, n_full, m_full, mode,
     weighting, p_centers[[...]], q_centers[[...]], c[...], c_prime_scalar}

All c' entries are equal, so only the scalar 1/(alpha M) is stored. Floats are
written by json with repr(), the shortest decimal string that round-trips to
the same double, so a loaded model evaluates bitwise like the saved one on any
platform.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .errors import ModelFormatError
from .estimator import RatioModel
from .kernels import KernelSpec
from .schema import MODEL_SCHEMA, validate_document

FORMAT_VERSION = 1


def model_to_dict(model: RatioModel) -> dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "kernel": model.kernel.to_dict(),
        "alpha": float(model.alpha),
        "n_full": int(model.n_full),
        "m_full": int(model.m_full),
        "mode": model.mode,
        "weighting": model.weighting,
        "p_centers": model.p_centers.tolist(),
        "q_centers": model.q_centers.tolist(),
        "c": model.c.tolist(),
        "c_prime_scalar": model.c_prime_scalar,
    }


def model_from_dict(data: dict[str, Any]) -> RatioModel:
    """
    Rebuild a model from its document.

    Raises:
        ModelFormatError: On schema violations or a format_version mismatch
    """
    errors = validate_document(data, MODEL_SCHEMA, raise_on_error=False)
    if errors:
        raise ModelFormatError("Invalid model document:\n" + "\n".join(errors))
    if data["format_version"] != FORMAT_VERSION:
        raise ModelFormatError(
            f"Unsupported model format_version {data['format_version']} "
            f"(this is rnd v{__version__}, format {FORMAT_VERSION})"
        )

    kernel = KernelSpec.from_dict(data["kernel"])
    d = kernel.dim
    p_centers = np.array(data["p_centers"], dtype=np.float64).reshape(-1, d)
    q_centers = np.array(data["q_centers"], dtype=np.float64).reshape(-1, d)
    return RatioModel(
        kernel=kernel,
        alpha=float(data["alpha"]),
        p_centers=p_centers,
        q_centers=q_centers,
        c=np.array(data["c"], dtype=np.float64),
        c_prime=np.full(q_centers.shape[0], float(data["c_prime_scalar"])),
        n_full=int(data["n_full"]),
        m_full=int(data["m_full"]),
        mode=data["mode"],
        weighting=data.get("weighting", "sample"),
    )


def save_model(path: Path, model: RatioModel) -> None:
    """Write the model document, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    content = json.dumps(model_to_dict(model), indent=1)
    path.write_text(content + "\n")


def load_model(path: Path) -> RatioModel:
    """
    Load a model document.

    Raises:
        FileNotFoundError: If the file does not exist
        ModelFormatError: If the JSON is unreadable or invalid
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Model file not found: {path}")

    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path}: not valid JSON ({e})")
    return model_from_dict(data)
