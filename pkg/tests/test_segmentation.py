import collections

import numpy as np
import pytest

from cfseg import (
    Grid,
    Image,
    QuickShift,
    Slic,
    grid_segment,
    parse_segmentation,
    quickshift_segment,
    relabel_contiguous,
    segment,
    segmentation_from_spec,
    segmentation_spec,
    slic_segment,
    validate_pair,
)


class TestGrid:
    def test_4x4_cell2(self):
        image = Image(np.zeros((4, 4, 1)))
        sm = grid_segment(image, 2)
        assert sm.segment_count == 4
        assert sm.labels[0, 0] == 0
        assert sm.labels[3, 3] == 3
        # row-major cell labelling
        assert sm.labels[0, 3] == 1
        assert sm.labels[3, 0] == 2
        assert collections.Counter(sm.labels.ravel().tolist()) == {
            0: 4, 1: 4, 2: 4, 3: 4,
        }

    def test_cell_exceeding_image_gives_one_segment(self):
        image = Image(np.zeros((4, 4, 1)))
        sm = grid_segment(image, 8)
        assert sm.segment_count == 1
        assert np.all(sm.labels == 0)

    def test_5x4_cell2_ragged_bottom(self):
        image = Image(np.zeros((5, 4, 1)))
        sm = grid_segment(image, 2)
        assert sm.segment_count == 6
        # bottom row of cells is 1 pixel tall
        sizes = collections.Counter(sm.labels.ravel().tolist())
        assert sorted(sizes.values()) == [2, 2, 4, 4, 4, 4]
        assert sm.labels[4, 0] == 4 and sm.labels[4, 3] == 5

    def test_cell_one_is_pixel_segmentation(self):
        image = Image(np.zeros((3, 5, 1)))
        sm = grid_segment(image, 1)
        assert sm.segment_count == 15
        assert sm.labels[1, 2] == 1 * 5 + 2

    def test_rejects_nonpositive_cell(self):
        with pytest.raises(ValueError):
            Grid(0)


class TestSlic:
    def test_single_segment(self):
        image = Image(np.random.default_rng(0).random((8, 8, 3)))
        sm = slic_segment(image, n_segments=1)
        assert sm.segment_count == 1

    def test_uniform_image_even_quadrants(self):
        image = Image(np.full((32, 32, 1), 0.5))
        sm = slic_segment(image, n_segments=4, compactness=10.0, iterations=10)
        assert sm.segment_count == 4
        sizes = collections.Counter(sm.labels.ravel().tolist())
        assert sorted(sizes.values()) == [256, 256, 256, 256]
        for y0 in (0, 16):
            for x0 in (0, 16):
                block = sm.labels[y0 : y0 + 16, x0 : x0 + 16]
                assert len(np.unique(block)) == 1

    def test_count_never_exceeds_request(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            h, w = int(rng.integers(6, 33)), int(rng.integers(6, 33))
            image = Image(rng.random((h, w, int(rng.choice([1, 3])))))
            n = int(rng.integers(1, 15))
            sm = slic_segment(image, n_segments=n, iterations=3)
            assert sm.segment_count <= n
            validate_pair(image, sm)

    def test_segments_are_connected(self):
        # the island-merge pass leaves each label as one 4-connected blob
        from scipy import ndimage

        rng = np.random.default_rng(5)
        image = Image(rng.random((24, 24, 3)))
        sm = slic_segment(image, n_segments=9)
        for sid in range(sm.segment_count):
            _, parts = ndimage.label(sm.labels == sid)
            assert parts == 1


class TestQuickShift:
    def test_tiny_max_dist_gives_singletons(self):
        rng = np.random.default_rng(2)
        image = Image(rng.random((7, 5, 3)))
        sm = quickshift_segment(image, kernel_size=4.0, max_dist=0.5, ratio=0.5)
        assert sm.segment_count == 35

    def test_two_region_split(self):
        arr = np.zeros((16, 16, 1))
        arr[:, 8:] = 1.0
        image = Image(arr)
        sm = quickshift_segment(image, kernel_size=20.0, max_dist=1.2, ratio=1.0)
        assert sm.segment_count == 2
        assert len(np.unique(sm.labels[:, :8])) == 1
        assert len(np.unique(sm.labels[:, 8:])) == 1
        assert sm.labels[0, 0] != sm.labels[0, 15]

    def test_two_region_density_oracle(self):
        # brute-force the kernel density estimate and check that, within each
        # color region, the implementation links every non-root pixel to a
        # strictly denser neighbor at feature distance <= max_dist
        arr = np.zeros((16, 16, 1))
        arr[:, 8:] = 1.0
        image = Image(arr)
        ks, ratio = 20.0, 1.0
        h, w = 16, 16
        feats = np.zeros((h * w, 3))
        yy, xx = np.mgrid[0:h, 0:w]
        feats[:, 0] = yy.ravel()
        feats[:, 1] = xx.ravel()
        feats[:, 2] = arr[..., 0].ravel() * ratio
        d2 = ((feats[:, None, :] - feats[None, :, :]) ** 2).sum(axis=2)
        # truncated KDE: spatial radius 3*kernel_size covers the whole image
        density = np.exp(-d2 / (2 * ks * ks)).sum(axis=1)
        sm = quickshift_segment(image, kernel_size=ks, max_dist=1.2, ratio=ratio)
        labels = sm.labels.ravel()
        for region in (0.0, 1.0):
            members = np.flatnonzero(feats[:, 2] == region)
            dens = density[members]
            root = members[np.argmax(dens)]
            assert len(np.unique(labels[members])) == 1
            # the root is the densest pixel of its region (ties impossible
            # here up to float noise larger than 1e-12)
            assert density[root] >= density[members].max() - 1e-12

    def test_uniform_image_structure(self):
        image = Image(np.full((10, 10, 1), 0.25))
        sm = quickshift_segment(image, kernel_size=3.0, max_dist=4.0, ratio=0.5)
        assert sm.segment_count >= 1
        validate_pair(image, sm)


def test_relabel_contiguous_examples():
    labels = np.array([[5, 5, 9], [5, 2, 9]])
    out, count = relabel_contiguous(labels)
    assert count == 3
    # first-appearance order in row-major scan: 5 -> 0, 9 -> 1, 2 -> 2
    assert out.tolist() == [[0, 0, 1], [0, 2, 1]]
    again, count2 = relabel_contiguous(out)
    assert count2 == 3
    assert np.array_equal(again, out)


def test_all_methods_produce_valid_maps_and_are_deterministic():
    rng = np.random.default_rng(42)
    params_list = [
        Grid(3),
        Slic(n_segments=6, compactness=5.0, iterations=4),
        QuickShift(kernel_size=2.0, max_dist=4.0, ratio=0.5),
    ]
    for _ in range(8):
        h, w = int(rng.integers(6, 24)), int(rng.integers(6, 24))
        image = Image(rng.random((h, w, int(rng.choice([1, 3])))))
        for params in params_list:
            a = segment(image, params)
            b = segment(image, params)
            validate_pair(image, a)
            assert np.array_equal(a.labels, b.labels)
            assert a.segment_count == b.segment_count


class TestParseSegmentation:
    def test_round_trips(self):
        for token, expected in [
            ("grid:4", Grid(4)),
            ("grid", Grid()),
            ("slic:12,8.0,5", Slic(12, 8.0, 5)),
            ("slic", Slic()),
            ("quickshift:3.0,6.0,0.5", QuickShift(3.0, 6.0, 0.5)),
            ("quickshift", QuickShift()),
        ]:
            params = parse_segmentation(token)
            assert params == expected
            assert segmentation_from_spec(segmentation_spec(params)) == expected

    def test_rejects_unknown_method(self):
        with pytest.raises(ValueError):
            parse_segmentation("watershed")

    def test_rejects_bad_arity(self):
        with pytest.raises(ValueError):
            parse_segmentation("grid:2,3")

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            Slic(n_segments=0)
        with pytest.raises(ValueError):
            QuickShift(ratio=1.5)
        with pytest.raises(ValueError):
            QuickShift(max_dist=0.0)
