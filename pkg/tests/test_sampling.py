from __future__ import annotations

import numpy as np
import pytest

from ldpchain.services.sampling_service import (
    chunk_sizes,
    chunk_streams,
    clopper_pearson,
    count_grid,
    estimate_probability,
)
from ldpchain.services.zoo_service import Occupation


class TestClopperPearson:
    def test_edges(self):
        assert clopper_pearson(0, 50)[0] == 0.0
        assert clopper_pearson(50, 50)[1] == 1.0

    def test_zero_hits_upper_limit(self):
        _, hi = clopper_pearson(0, 100, level=0.99)
        assert hi == pytest.approx(1.0 - 0.005 ** (1 / 100), rel=1e-9)

    def test_covers_the_estimate(self):
        lo, hi = clopper_pearson(5, 10)
        assert lo < 0.5 < hi

    def test_no_samples(self):
        assert clopper_pearson(0, 0) == (0.0, 1.0)


class TestChunks:
    def test_sizes(self):
        assert chunk_sizes(10, 4) == [4, 4, 2]
        assert chunk_sizes(8, 4) == [4, 4]

    def test_streams_are_reproducible(self):
        a = [s.generate_state(2).tolist() for s in chunk_streams(9, 3)]
        b = [s.generate_state(2).tolist() for s in chunk_streams(9, 3)]
        assert a == b
        assert len({tuple(x) for x in a}) == 3


class TestCounting:
    def test_counts_do_not_depend_on_workers(self, iid_model):
        event = Occupation(0.0, 0.5, 0.6)
        one = count_grid(iid_model, 10, event, 3000, 42, workers=1, chunk_size=500)
        two = count_grid(iid_model, 10, event, 3000, 42, workers=2, chunk_size=500)
        assert int(one) == int(two)
        assert 0 < int(one) < 3000

    def test_sure_event(self, iid_model):
        hits, p_hat, lo, hi = estimate_probability(iid_model, 5, Occupation(-1.0, 2.0, 1.0), 200, 1)
        assert hits == 200 and p_hat == 1.0 and hi == 1.0

    def test_copies_share_one_mask_row(self, iid_model):
        def first_above(tuples: np.ndarray) -> np.ndarray:
            assert tuples.shape[1:] == (3, 4, 1)
            return np.all(tuples[:, :, 0, 0] > 0.0, axis=1)

        assert int(count_grid(iid_model, 4, first_above, 100, 0, copies=3)) == 100
