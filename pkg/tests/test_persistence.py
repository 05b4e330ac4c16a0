"""Tests for saving and loading fitted models."""

import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from lib.errors import ModelFormatError
from lib.estimator import evaluate, fit_full, fit_nystrom, subsample_plan
from lib.kernels import KernelSpec
from lib.persistence import (
    FORMAT_VERSION,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
)


@pytest.fixture
def model(gaussian, small_samples):
    xp, xq = small_samples
    return fit_nystrom(gaussian, xp, xq, 0.1, subsample_plan(xp.n, xq.n, 8, seed=5))


class TestSaveLoad:
    """Tests for the model file round trip."""

    def test_evaluates_bitwise_equal(self, tmp_path, model, rng):
        """A loaded model evaluates bitwise equal to the saved one."""
        path = tmp_path / "model.json"
        save_model(path, model)
        loaded = load_model(path)
        queries = rng.standard_normal((50, 1))
        assert np.array_equal(evaluate(loaded, queries), evaluate(model, queries))

    def test_fields_preserved(self, tmp_path, model):
        """Kernel, alpha, sizes, mode, weighting and coefficients survive the round trip."""
        path = tmp_path / "nested" / "model.json"
        save_model(path, model)
        loaded = load_model(path)
        assert loaded.kernel == model.kernel
        assert loaded.alpha == model.alpha
        assert (loaded.n_full, loaded.m_full) == (model.n_full, model.m_full)
        assert loaded.mode == "nystrom"
        assert loaded.weighting == "sample"
        assert np.array_equal(loaded.c, model.c)
        assert np.array_equal(loaded.c_prime, model.c_prime)

    def test_two_dimensional(self, tmp_path, rng):
        """Two-dimensional laplacian models round-trip."""
        spec = KernelSpec(family="laplacian", bandwidth=0.5, dim=2)
        original = fit_full(spec, rng.standard_normal((6, 2)), rng.standard_normal((4, 2)), 0.2)
        save_model(tmp_path / "m.json", original)
        loaded = load_model(tmp_path / "m.json")
        assert loaded.p_centers.shape == (6, 2)
        assert np.array_equal(loaded.q_centers, original.q_centers)

    def test_document_layout(self, model):
        """The document carries version, kernel layout and the c' scalar."""
        doc = model_to_dict(model)
        assert doc["format_version"] == FORMAT_VERSION
        assert doc["kernel"] == {"family": "gaussian", "params": {"bandwidth": 1.0}, "d": 1}
        assert doc["c_prime_scalar"] == 1.0 / (0.1 * 30)
        assert len(doc["p_centers"]) == 8


class TestLoadErrors:
    """Tests for malformed model files."""

    def test_missing_file(self, tmp_path):
        """A missing file raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            load_model(tmp_path / "missing.json")

    def test_not_json(self, tmp_path):
        """Malformed JSON raises ModelFormatError."""
        path = tmp_path / "model.json"
        path.write_text("{not json")
        with pytest.raises(ModelFormatError, match="not valid JSON"):
            load_model(path)

    def test_version_mismatch(self, model):
        """A newer format version is refused."""
        doc = model_to_dict(model)
        doc["format_version"] = FORMAT_VERSION + 1
        with pytest.raises(ModelFormatError, match="format_version"):
            model_from_dict(doc)

    def test_missing_field(self, model):
        """Required fields are enforced by the schema."""
        doc = model_to_dict(model)
        del doc["c"]
        with pytest.raises(ModelFormatError, match="'c' is a required property"):
            model_from_dict(doc)

    def test_unknown_field(self, model, tmp_path):
        """Unknown fields are refused."""
        doc = model_to_dict(model)
        doc["extra"] = 1
        path = tmp_path / "model.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ModelFormatError, match="Additional properties"):
            load_model(path)

    def test_bad_kernel_family(self, model):
        """Unknown kernel families are refused with the field path."""
        doc = model_to_dict(model)
        doc["kernel"]["family"] = "sigmoid"
        with pytest.raises(ModelFormatError, match="kernel -> family"):
            model_from_dict(doc)
