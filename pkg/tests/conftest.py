"""Shared pytest fixtures for all tests.

Provides:
- Seeded random generators
- Standard 3-forms and volume forms
- Reference points of the constraint variety N
- Homogeneous model jets
- Output directories and settings overrides
"""

import math

import numpy as np
import pytest

from nearly_kahler.algebra.forms6 import KForm, basis_form, volume_form
from nearly_kahler.config import settings
from nearly_kahler.models.homogeneous import BASE_POINT, ModelId, model_jet2

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
SQRT6 = math.sqrt(6.0)


# =============================================================================
# Random Fixtures
# =============================================================================


@pytest.fixture
def rng():
    """Seeded numpy Generator."""
    return np.random.default_rng(20240611)


# =============================================================================
# Exterior Algebra Fixtures
# =============================================================================


@pytest.fixture
def standard_form() -> KForm:
    """Re((e0 + i e1)(e2 + i e3)(e4 + i e5)), a stable 3-form with P = -4."""
    return (
        basis_form((0, 2, 4))
        - basis_form((0, 3, 5))
        - basis_form((1, 2, 5))
        - basis_form((1, 3, 4))
    )


@pytest.fixture
def split_form() -> KForm:
    """e012 + e345, on the positive orbit."""
    return basis_form((0, 1, 2)) + basis_form((3, 4, 5))


@pytest.fixture
def vol() -> KForm:
    return volume_form()


# =============================================================================
# Constraint Variety Fixtures
# =============================================================================


@pytest.fixture
def x_o() -> np.ndarray:
    """The S3xS3 base point of N with mu = 2 as (a2, a3, a4, b1, b2, b3, b4)."""
    return (
        np.array(
            [SQRT3, SQRT3, SQRT6, 4.0, 0.0, 0.0, -2 * SQRT2]
        )
        / 36.0
    )


@pytest.fixture
def mu() -> float:
    return 2.0


# =============================================================================
# Model Fixtures
# =============================================================================


@pytest.fixture
def s3xs3_jet():
    """Jet and second derivatives of S3xS3 at its base point."""
    return model_jet2(ModelId.S3XS3, BASE_POINT[ModelId.S3XS3])


@pytest.fixture(params=list(ModelId), ids=lambda m: m.value)
def model_id(request) -> ModelId:
    return request.param


# =============================================================================
# Output Fixtures
# =============================================================================


@pytest.fixture
def out_dir(tmp_path):
    """Fresh output directory for runs."""
    path = tmp_path / "runs"
    path.mkdir()
    return path


@pytest.fixture
def loose_settings(monkeypatch):
    """Relax the series defaults for quick singular solves."""
    monkeypatch.setattr(settings, "series_order", 12)
    return settings
