import numpy as np
import pytest

from cfseg import (
    BuiltinLinear,
    ConstantColor,
    Image,
    LinearModel,
    SearchConfig,
    SegmentMap,
)


def ones_image(height, width, channels=1):
    return Image(np.ones((height, width, channels)))


def pixel_segmap(height, width):
    """Every pixel its own segment, raster order."""
    return SegmentMap(np.arange(height * width).reshape(height, width), height * width)


def column_segmap(height, width):
    """Every column its own segment."""
    labels = np.tile(np.arange(width), (height, 1))
    return SegmentMap(labels, width)


def complementary_model(w0, b0):
    """Two-class linear model with mirrored scores (p1 = -p0)."""
    w0 = np.asarray(w0, dtype=np.float64)
    return LinearModel(np.stack([w0, -w0]), np.array([b0, -b0]))


@pytest.fixture
def four_segment_problem():
    """2x2 all-ones image, one segment per pixel, and a 2-class linear model
    where zeroing pixel 2 (and only pixel 2) flips the argmax from 0 to 1.
    Brute force over all 14 nonempty proper subsets confirms {2} is the
    unique singleton flip; searched with constant-black replacement."""
    image = ones_image(2, 2)
    segmap = pixel_segmap(2, 2)
    w0 = np.array([[0.2, 0.2], [0.6, 0.2]]).reshape(1, 2, 2, 1)
    w1 = np.array([[0.3, 0.3], [0.0, 0.3]]).reshape(1, 2, 2, 1)
    model = LinearModel(np.concatenate([w0, w1]), np.zeros(2))
    handle = BuiltinLinear(model)
    config = SearchConfig(replacement=ConstantColor((0.0,)))
    return image, segmap, handle, config


def stripe_problem(n_specials):
    """4x37 all-ones image, one segment per column. The first `n_specials`
    columns each contribute 1.0 to the class-0 score; the argmax flips to
    class 1 exactly when all of them are removed (blacked out). Built so
    the best-first chain is forced: evaluations = 37 + 36 + ... down to
    (37 - n_specials + 1)."""
    image = ones_image(4, 37)
    segmap = column_segmap(4, 37)
    w0 = np.zeros((4, 37))
    w0[:, :n_specials] = 0.25  # column sums to 1
    model = complementary_model(w0.reshape(4, 37, 1), -0.5)
    handle = BuiltinLinear(model)
    config = SearchConfig(replacement=ConstantColor((0.0,)))
    return image, segmap, handle, config
