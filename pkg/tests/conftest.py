"""Shared fixtures: tiny CSV writers and the prepared housing data."""

from __future__ import annotations

import csv

import pytest

from pdrtest import Dataset, load_boston


@pytest.fixture(scope="session")
def boston() -> Dataset:
    return load_boston()


@pytest.fixture
def write_csv(tmp_path):
    """Writer returning the path of a small CSV built from rows of strings."""

    def _write(name: str, header: list[str], rows: list[list]) -> str:
        path = tmp_path / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        return str(path)

    return _write
