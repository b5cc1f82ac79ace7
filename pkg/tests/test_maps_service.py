from __future__ import annotations

import numpy as np
import pytest

from ldpchain.models import PASS, Interval
from ldpchain.schemas import MAP_KINDS
from ldpchain.services.maps_service import geographic_sweep, synthetic_frame


class TestSyntheticFrame:
    def test_layout(self, rng):
        frame = synthetic_frame(3, 2, rng)
        assert frame.r == 3
        assert frame.class_regions[2] == Interval(6.0, 8.0)
        assert frame.slices[1].lo == (3.5,) and frame.slices[1].hi == (4.5,)
        np.testing.assert_array_equal(frame.class_of(np.array([[0.7], [2.5], [7.0]])), [1, 0, 3])
        assert set(np.unique(frame.tau.table)) <= {1, 2}


class TestGeographicSweep:
    @pytest.mark.parametrize("kind", MAP_KINDS)
    def test_no_violations(self, kind):
        report = geographic_sweep(kind, 60, seed=3)
        assert report.verdict == PASS, report.counterexamples[:1]
        assert report.checked > 0

    @pytest.mark.slow
    @pytest.mark.parametrize("kind", MAP_KINDS)
    def test_no_violations_at_scale(self, kind):
        report = geographic_sweep(kind, 1000, seed=11)
        assert report.violations == 0, report.counterexamples[:1]

    def test_deterministic(self):
        a = geographic_sweep("coupling", 30, seed=5)
        b = geographic_sweep("coupling", 30, seed=5)
        assert a.to_row() == b.to_row()

    def test_against_a_supplied_frame(self, two_class_frame):
        report = geographic_sweep("stitching", 30, seed=1, frame=two_class_frame)
        assert report.verdict == PASS
        assert report.checked > 0

    def test_unknown_kind(self):
        with pytest.raises(RuntimeError, match="Unknown map check"):
            geographic_sweep("gluing", 1, seed=0)
