from __future__ import annotations

import math

import numpy as np
import pytest

from ldpchain.errors import PreconditionError
from ldpchain.measures import empirical_measure, empirical_of_list, lp_distance
from ldpchain.trajectory_ops import (
    couple,
    coupling_count,
    decouple,
    decoupling_lengths,
    fine_coupling_bound,
    fine_coupling_violations,
    fine_decoupling_violations,
    log_coupling_constant,
    random_fillers,
    reorder,
    slice_word,
    slicing_bound,
    stitch_template,
    stitchable,
    stitching_bound,
    template_contains,
    template_member,
)


def _word(*letters):
    return np.asarray(letters, dtype=float).reshape(-1, 1)


class TestSlicing:
    def test_keeps_first_to_last_visit(self, one_class_frame):
        sliced = slice_word(_word(1.5, 0.3, 1.2, 0.6, 2.0), one_class_frame)
        np.testing.assert_array_equal(sliced.subwords[0], _word(0.3, 1.2, 0.6))
        assert sliced.positions == ((1, 4),)
        assert sliced.source_length == 5

    def test_unvisited_class_gives_empty_word(self, two_class_frame):
        sliced = slice_word(_word(0.3, 0.6), two_class_frame)
        assert sliced.subwords[0].shape == (0, 1)
        assert sliced.positions[0] is None
        assert sliced.total_length == 2

    def test_ordered_word(self, two_class_frame):
        sliced = slice_word(_word(2.5, 1.5, 0.5), two_class_frame)
        assert [w.shape[0] for w in sliced.subwords] == [1, 1]

    def test_letters_split_between_classes(self, two_class_frame):
        sliced = slice_word(_word(1.5, 2.5, 2.6, 1.5, 0.5, 1.5), two_class_frame)
        np.testing.assert_array_equal(sliced.subwords[0], _word(2.5, 2.6))
        np.testing.assert_array_equal(sliced.subwords[1], _word(0.5))
        assert sliced.positions == ((1, 3), (4, 5))
        assert sliced.class_ordered

    def test_word_against_the_order_is_still_sliced(self, two_class_frame):
        sliced = slice_word(_word(0.5, 2.5, 0.6), two_class_frame)
        np.testing.assert_array_equal(sliced.subwords[0], _word(2.5))
        np.testing.assert_array_equal(sliced.subwords[1], _word(0.5, 2.5, 0.6))
        assert not sliced.class_ordered

    def test_word_outside_k_slices_to_empty_words(self, two_class_frame):
        sliced = slice_word(_word(1.5, 3.5), two_class_frame)
        assert sliced.is_empty()
        assert sliced.positions == (None, None)

    def test_slicing_bound(self, one_class_frame):
        word = _word(1.5, 0.3, 1.2, 0.6, 2.0)
        sliced = slice_word(word, one_class_frame)
        d = lp_distance(empirical_measure(word), empirical_measure(sliced.subwords[0]))
        assert d <= slicing_bound(5, 3) + 1e-9
        assert slicing_bound(5, 0) == math.inf


class TestStitching:
    def test_template_shape(self, one_class_frame):
        t = stitch_template([_word(0.3, 0.4)], 10, one_class_frame)
        assert t.free_lengths == (1, 7)
        assert t.total_length == 10

    def test_empty_words_get_no_gap(self, two_class_frame):
        t = stitch_template([np.zeros((0, 1)), _word(0.5)], 6, two_class_frame)
        assert t.free_lengths == (0, 1, 4)

    def test_budget(self, one_class_frame):
        with pytest.raises(PreconditionError, match="tau_K"):
            stitch_template([_word(*[0.3] * 5)], 5, one_class_frame)

    def test_not_stitchable(self, one_class_frame):
        assert stitchable([_word(1.5)], one_class_frame) == (False, [])
        with pytest.raises(PreconditionError):
            stitch_template([_word(1.5)], 10, one_class_frame)

    def test_members_and_containment(self, one_class_frame, rng):
        t = stitch_template([_word(0.3, 0.4), _word(0.5)], 12, one_class_frame)
        member = template_member(t, random_fillers(t, rng, -1.0, 4.0))
        assert member.shape == (12, 1)
        assert template_contains(t, member)
        broken = member.copy()
        broken[1, 0] += 0.01
        assert not template_contains(t, broken)
        assert not template_contains(t, member[:-1])

    def test_stitching_bound_holds_for_arbitrary_fillers(self, one_class_frame, rng):
        vs = [_word(*rng.uniform(0.1, 0.9, size=20)), _word(*rng.uniform(0.1, 0.9, size=20))]
        t = stitch_template(vs, 44, one_class_frame)
        centre = empirical_of_list(vs)
        bound = stitching_bound(40, 44)
        for _ in range(25):
            member = template_member(t, random_fillers(t, rng, -5.0, 5.0))
            assert lp_distance(empirical_measure(member), centre) <= bound + 1e-9

    def test_records(self, one_class_frame):
        t = stitch_template([_word(0.3)], 4, one_class_frame)
        lines, table = t.to_records()
        assert lines == ["free 1", "fixed w0", "free 2"]
        assert table == {"w0": [[0.3]]}


class TestCoupling:
    def test_reorders_slices_by_class(self, two_class_frame):
        u1, u2 = _word(2.5, 0.5), _word(2.6, 0.6)
        sliced = [slice_word(u, two_class_frame) for u in (u1, u2)]
        order = [float(w[0, 0]) for w in reorder(sliced)]
        assert order == [2.5, 2.6, 0.5, 0.6]

    def test_coupled_template(self, one_class_frame, rng):
        u1, u2 = _word(0.3, 0.4, 1.5, 0.5), _word(0.6, 0.7, 0.8, 2.0)
        t = couple([u1, u2], 12, one_class_frame)
        assert t.free_lengths == (1, 1, 3)
        assert t.total_length == 12
        assert template_contains(t, template_member(t, random_fillers(t, rng, 0.0, 1.0)))

    def test_length_condition(self, one_class_frame):
        with pytest.raises(PreconditionError, match="T >= N\\*n"):
            couple([_word(0.3, 0.4), _word(0.5, 0.6)], 5, one_class_frame)

    def test_words_share_a_length(self, one_class_frame):
        with pytest.raises(ValueError):
            couple([_word(0.3), _word(0.5, 0.6)], 20, one_class_frame)


class TestDecoupling:
    def test_routes_classes_to_sides(self, two_class_frame):
        word = _word(*([2.5] * 5 + [0.5] * 5))
        assert decoupling_lengths(10, two_class_frame, {1: 1, 2: 2}, 0.2, (0.5, 0.5)) == (8, 8)
        t1, t2 = decouple(word, two_class_frame, {1: 1, 2: 2}, 0.2, (0.5, 0.5))
        np.testing.assert_array_equal(t1.fixed[0], _word(*[2.5] * 5))
        np.testing.assert_array_equal(t2.fixed[0], _word(*[0.5] * 5))
        assert (t1.total_length, t2.total_length) == (8, 8)

    def test_side_count_condition(self, two_class_frame):
        with pytest.raises(PreconditionError, match="lambda_1"):
            decouple(_word(*[2.5] * 10), two_class_frame, {1: 1, 2: 2}, 0.2, (0.5, 0.5))

    def test_partition_covers_every_class(self, two_class_frame):
        with pytest.raises(ValueError, match="partition"):
            decoupling_lengths(10, two_class_frame, {1: 1}, 0.2, (0.5, 0.5))


class TestBounds:
    def test_fine_coupling_bound_at_zero(self):
        assert fine_coupling_bound(0.0, 0.0, 3) == 0.0

    def test_log_coupling_constant(self):
        assert log_coupling_constant(1.0, 1, 1, 1) == pytest.approx(4 * math.log(2))
        assert log_coupling_constant(2.0, 1, 2, 3, N=2) == pytest.approx(2 * (2 * math.log(2) + 2 * math.log(2) + 5 * math.log(4)))

    def test_coupling_count(self):
        assert coupling_count(10, 80, 2, 1) == 6

    def test_fine_coupling_side_conditions(self):
        assert fine_coupling_violations(10, 80, 0.1, 0.2, 2, 1) == []
        problems = fine_coupling_violations(10, 40, 0.1, 0.2, 2, 1)
        assert len(problems) == 1 and "T*delta" in problems[0]

    def test_fine_decoupling_side_conditions(self):
        assert fine_decoupling_violations(40, 0.1, (0.5, 0.5), 2, 1) == []
        assert fine_decoupling_violations(40, 0.3, (0.5, 0.5), 2, 1)
