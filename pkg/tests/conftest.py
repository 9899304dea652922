import numpy as np
import pytest

from hypoflow import (Band, Cross, Disk, FullTorus, GridSpec, SupportRegion,
                      build_sigma)


@pytest.fixture(scope="session")
def grid16():
    return GridSpec(16, 16)


@pytest.fixture(scope="session")
def grid32():
    return GridSpec(32, 32)


@pytest.fixture(scope="session")
def cross_region():
    return SupportRegion([Cross(0.5, 0.5, 1.0 / 3.0)])


@pytest.fixture(scope="session")
def band_region():
    return SupportRegion([Band(1, 0.5, 1.0 / 3.0)])


@pytest.fixture(scope="session")
def cross_field32(grid32, cross_region):
    return build_sigma(cross_region, 0.05, 1.0, grid32)


@pytest.fixture(scope="session")
def band_field32(grid32, band_region):
    return build_sigma(band_region, 0.05, 1.0, grid32)


@pytest.fixture(scope="session")
def uniform_field32(grid32):
    return build_sigma(SupportRegion([FullTorus()]), 0.05, 1.0, grid32)


@pytest.fixture(scope="session")
def two_disk_region():
    return SupportRegion([Disk(0.25, 0.25, 0.45), Disk(0.75, 0.75, 0.12)])
