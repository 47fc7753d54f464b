import numpy as np
import pytest

from cfseg import (
    DimensionMismatch,
    Image,
    NonContiguousLabels,
    SegmentIdOutOfRange,
    SegmentMap,
    predicted_class,
    segment_pixel_mask,
    segment_set,
    validate_pair,
)
from cfseg.core import validate_scores


class TestImage:
    def test_accepts_2d_as_grayscale(self):
        img = Image(np.zeros((3, 4)))
        assert img.pixels.shape == (3, 4, 1)
        assert img.height == 3 and img.width == 4 and img.channels == 1

    def test_rgb_shape(self):
        img = Image(np.zeros((2, 2, 3)))
        assert img.channels == 3

    def test_rejects_bad_channel_count(self):
        with pytest.raises(DimensionMismatch):
            Image(np.zeros((2, 2, 4)))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            Image(np.full((2, 2, 1), 1.5))
        with pytest.raises(ValueError):
            Image(np.full((2, 2, 1), -0.1))

    def test_rejects_nan(self):
        bad = np.zeros((2, 2, 1))
        bad[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            Image(bad)

    def test_rejects_empty(self):
        with pytest.raises((ValueError, DimensionMismatch)):
            Image(np.zeros((0, 2, 1)))

    def test_pixels_are_read_only(self):
        img = Image(np.zeros((2, 2, 1)))
        with pytest.raises(ValueError):
            img.pixels[0, 0, 0] = 1.0

    def test_input_array_not_aliased(self):
        arr = np.zeros((2, 2, 1))
        img = Image(arr)
        arr[0, 0, 0] = 1.0
        assert img.pixels[0, 0, 0] == 0.0


class TestSegmentSet:
    def test_sorts_and_dedups(self):
        assert segment_set([3, 1, 3, 2]) == (1, 2, 3)

    def test_empty_ok(self):
        assert segment_set([]) == ()

    def test_rejects_negative(self):
        with pytest.raises(SegmentIdOutOfRange):
            segment_set([0, -1])


class TestPredictedClass:
    def test_unique_maximum(self):
        assert predicted_class(np.array([0.1, 0.7, 0.2])) == 1

    def test_tie_breaks_to_lowest_index(self):
        assert predicted_class(np.array([0.5, 0.5])) == 0

    def test_permutation_covariant(self):
        # permuting the entries moves the argmax with them, modulo the
        # lowest-index rule on ties
        rng = np.random.default_rng(7)
        for _ in range(200):
            scores = rng.normal(size=5)
            perm = rng.permutation(5)
            c = predicted_class(scores)
            c_perm = predicted_class(scores[perm])
            assert scores[perm][c_perm] == scores[c]

    def test_linear_fixture_class_by_hand(self, four_segment_problem):
        image, _, handle, _ = four_segment_problem
        scores = handle.score([image])[0]
        # w0 sums to 1.2, w1 to 0.9 on the all-ones image
        assert scores == pytest.approx([1.2, 0.9])
        assert predicted_class(scores) == 0


class TestValidateScores:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            validate_scores(np.array([1.0, np.nan]))

    def test_rejects_single_class(self):
        with pytest.raises(ValueError):
            validate_scores(np.array([1.0]))

    def test_rejects_wrong_k(self):
        with pytest.raises(ValueError):
            validate_scores(np.array([1.0, 2.0]), k=3)


class TestValidatePair:
    def test_matching_pair_ok(self):
        img = Image(np.zeros((4, 4, 1)))
        labels = np.zeros((4, 4), dtype=np.int64)
        labels[:, 2:] = 1
        validate_pair(img, SegmentMap(labels, 2))

    def test_dimension_mismatch(self):
        img = Image(np.zeros((4, 4, 1)))
        small = SegmentMap(np.zeros((2, 2), dtype=np.int64), 1)
        with pytest.raises(DimensionMismatch):
            validate_pair(img, small)

    def test_gap_reports_first_missing_id(self):
        img = Image(np.zeros((2, 2, 1)))
        labels = np.array([[0, 0], [2, 2]])
        segmap = SegmentMap(labels, 3)
        with pytest.raises(NonContiguousLabels) as exc_info:
            validate_pair(img, segmap)
        assert exc_info.value.missing_id == 1


class TestSegmentMap:
    def test_rejects_label_out_of_range(self):
        with pytest.raises(SegmentIdOutOfRange):
            SegmentMap(np.array([[0, 3]]), 2)

    def test_rejects_negative_label(self):
        with pytest.raises(SegmentIdOutOfRange):
            SegmentMap(np.array([[0, -1]]), 2)

    def test_rejects_zero_segments(self):
        with pytest.raises(ValueError):
            SegmentMap(np.zeros((2, 2), dtype=np.int64), 0)


class TestSegmentPixelMask:
    def test_marks_exactly_the_listed_segments(self):
        labels = np.array([[0, 1], [2, 3]])
        segmap = SegmentMap(labels, 4)
        mask = segment_pixel_mask(segmap, (1, 2))
        assert mask.tolist() == [[False, True], [True, False]]

    def test_empty_set_is_all_false(self):
        segmap = SegmentMap(np.zeros((2, 2), dtype=np.int64), 1)
        assert not segment_pixel_mask(segmap, ()).any()

    def test_out_of_range_id(self):
        segmap = SegmentMap(np.zeros((2, 2), dtype=np.int64), 1)
        with pytest.raises(SegmentIdOutOfRange):
            segment_pixel_mask(segmap, (1,))
