"""Shared fixtures: one flat and one curved desk-scale setup, built once."""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np
import pytest

from uclab.fem import Coefficients
from uclab.geometry import DomainSpec, InterfaceGraph, Rect
from uclab.meshing import build_fitted_mesh

SUITE_START = time.monotonic()
ROOT = Path(__file__).resolve().parents[1]


def pytest_collection_modifyitems(items):
    # acceptance gates run last so their suite-time budget covers everything
    items.sort(key=lambda it: it.fspath.basename == "test_acceptance.py")


@pytest.fixture(scope="session")
def flat_spec() -> DomainSpec:
    return DomainSpec(omega=Rect(0.0, 1.0, 0.0, 1.0), interface=InterfaceGraph.flat(0.5), h=0.05)


@pytest.fixture(scope="session")
def flat_mesh(flat_spec):
    return build_fitted_mesh(flat_spec, 0.05)


@pytest.fixture(scope="session")
def curved_spec() -> DomainSpec:
    iface = InterfaceGraph.parabola(0.5, 0.4, 0.5)
    return DomainSpec(omega=Rect(0.0, 1.0, 0.0, 1.0), interface=iface, h=0.05)


@pytest.fixture(scope="session")
def curved_mesh(curved_spec):
    return build_fitted_mesh(curved_spec, 0.05)


@pytest.fixture(scope="session")
def coeffs21() -> Coefficients:
    return Coefficients(a_plus=2.0, a_minus=1.0)


@pytest.fixture(scope="session")
def configs_dir() -> Path:
    return ROOT / "configs"


@pytest.fixture()
def rng():
    return np.random.default_rng(20260815)
