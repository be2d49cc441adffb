"""Shared test fixtures."""

import pytest

from helpers_fedalign import build_dataset


@pytest.fixture
def small_ds():
    return build_dataset()
