from __future__ import annotations

import numpy as np
import pytest

from ldpchain.kernels.zoo import PHI_SHAPES, IidUniform, PerturbedSystem, PiecewiseLinearMap
from ldpchain.models import Box, CompactFrame, Interval, TauTable
from ldpchain.services.classes_service import discover_classes_1d


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def iid_model() -> IidUniform:
    return IidUniform(0.0, 1.0)


@pytest.fixture
def two_class_model() -> PerturbedSystem:
    return PerturbedSystem(PiecewiseLinearMap.two_class(), PHI_SHAPES["epanechnikov"])


@pytest.fixture
def two_class_structure(two_class_model):
    return discover_classes_1d(two_class_model.f, (-1.0, 4.0), 1e-3)


@pytest.fixture
def one_class_frame() -> CompactFrame:
    """K = [0.05, 0.95] inside the class (0, 1) of the two-class system."""
    return CompactFrame(
        slices=[Box(lo=(0.05,), hi=(0.95,))],
        class_regions=[Interval(0.0, 1.0)],
        class_labels=["C1"],
        tau=TauTable.constant(1, 1),
        tau_K=1,
        c_K=1.0,
    )


@pytest.fixture
def two_class_frame() -> CompactFrame:
    """(2, 3) leads to (0, 1); frame classes follow that order."""
    return CompactFrame(
        slices=[Box(lo=(2.05,), hi=(2.95,)), Box(lo=(0.05,), hi=(0.95,))],
        class_regions=[Interval(2.0, 3.0), Interval(0.0, 1.0)],
        class_labels=["C2", "C1"],
        tau=TauTable.constant(1, 1),
        tau_K=1,
        c_K=1.0,
    )
