# -*- coding: utf-8 -*-
import numpy as np
import pytest

from src.dynamics import attractor_orbit, henon
from src.renorm_1d import accumulation_param
from src.renorm_2d import boundary_map, boundary_of_chaos_param


@pytest.fixture(scope="session")
def a_star_1d():
    return accumulation_param(10)


@pytest.fixture(scope="session")
def boundary_point():
    """a_*(0.1) from cycle continuation."""
    return boundary_of_chaos_param(0.1, max_level=6)


@pytest.fixture(scope="session")
def boundary_henon(boundary_point):
    return henon(boundary_point.a_star, 0.1)


@pytest.fixture(scope="session")
def attractor(boundary_henon):
    return attractor_orbit(boundary_henon, 20000)


@pytest.fixture(scope="session")
def critical(boundary_henon):
    from src.critical import find_critical_orbit
    sample = attractor_orbit(boundary_henon, 16384)
    return find_critical_orbit(boundary_henon, sample, forward=4096)


@pytest.fixture(scope="session")
def degenerate_henon():
    """F_{a_*(0), 0}, the 1D map embedded in the plane."""
    return boundary_map(0.0, max_level=8)


@pytest.fixture(scope="session")
def degenerate_critical(degenerate_henon):
    from src.critical import find_critical_orbit
    sample = attractor_orbit(degenerate_henon, 16384)
    return find_critical_orbit(degenerate_henon, sample, forward=16384)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def isolated_dirs(tmp_path, monkeypatch):
    """Point output and cache at a temporary directory."""
    monkeypatch.setattr("src.settings.OUTPUT_DIR", tmp_path / "runs")
    monkeypatch.setattr("src.settings.CACHE_DIR", tmp_path / "cache")
    monkeypatch.setattr("src.run_manager.CACHE_DIR", tmp_path / "cache")
    return tmp_path
