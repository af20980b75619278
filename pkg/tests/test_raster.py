import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cycleprompt.errors import DataIOError, ShapeError, ValidationError
from cycleprompt.raster import (
    bounding_box,
    hflip,
    hflip_mask,
    iou,
    load_mask,
    load_raster,
    miou,
    response_rate,
    resize_nearest,
    resize_nearest_mask,
    save_mask,
    save_raster,
)
from cycleprompt.selfcheck import naive_counts, naive_iou

from conftest import rows_mask


@st.composite
def mask_pairs(draw, max_side=12):
    h = draw(st.integers(1, max_side))
    w = draw(st.integers(1, max_side))
    a = draw(arrays(bool, (h, w)))
    b = draw(arrays(bool, (h, w)))
    return a, b


# --- worked examples --------------------------------------------------------

def test_iou_identical_nonempty():
    m = np.zeros((5, 5), bool)
    m[1:3, 2:4] = True
    assert iou(m, m) == 1.0


def test_iou_disjoint():
    a = rows_mask((4, 4), [0])
    b = rows_mask((4, 4), [3])
    assert iou(a, b) == 0.0


def test_iou_overlapping_rows_matches_enumeration():
    a = rows_mask((4, 4), [0, 1])
    b = rows_mask((4, 4), [1, 2])
    inter, union = naive_counts(a, b)
    assert (inter, union) == (4, 12)
    assert iou(a, b) == pytest.approx(1 / 3, abs=1e-15)


def test_iou_empty_pair_is_one():
    z = np.zeros((3, 3), bool)
    assert iou(z, z) == 1.0


def test_iou_shape_mismatch_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(3, 2\)"):
        iou(np.zeros((2, 3), bool), np.zeros((3, 2), bool))


def test_miou_modes_on_rows_example():
    a = rows_mask((4, 4), [0, 1])
    b = rows_mask((4, 4), [1, 2])
    # background of a: rows 2-3, of b: rows 0,3 -> inter 4, union 12
    assert naive_counts(~a, ~b) == (4, 12)
    assert miou(a, b) == pytest.approx(1 / 3, abs=1e-15)
    assert miou(a, b, "two-class-mean") == pytest.approx(1 / 3, abs=1e-15)
    assert miou(a, a, "two-class-mean") == 1.0


def test_miou_unknown_mode():
    with pytest.raises(ValidationError):
        miou(np.ones((2, 2)), np.ones((2, 2)), "weighted")


def test_response_rate_examples():
    assert response_rate(np.zeros((4, 5), bool)) == 0.0
    assert response_rate(np.ones((4, 5), bool)) == 1.0
    m = np.zeros((10, 10), bool)
    m.flat[[0, 5, 17, 33, 50, 71, 99]] = True
    assert response_rate(m) == pytest.approx(0.07, abs=1e-15)


def test_resize_identity_800():
    r = np.random.default_rng(0).integers(0, 256, (800, 800), dtype=np.uint8)
    assert np.array_equal(resize_nearest(r, 800, 800), r)


def test_resize_mask_upsample_2_to_4():
    m = np.array([[1, 0], [0, 0]], bool)
    out = resize_nearest_mask(m, 4, 4)
    want = np.zeros((4, 4), bool)
    want[:2, :2] = True
    assert np.array_equal(out, want)


def test_resize_downsample_picks_even_indices():
    r = np.arange(16, dtype=np.uint8).reshape(4, 4)
    out = resize_nearest(r, 2, 2)
    assert np.array_equal(out, r[np.ix_([0, 2], [0, 2])])


def test_resize_rejects_zero():
    with pytest.raises(ValidationError):
        resize_nearest(np.zeros((2, 2), np.uint8), 0, 3)


def test_resize_rgb_keeps_channels():
    r = np.zeros((3, 5, 3), np.uint8)
    assert resize_nearest(r, 7, 2).shape == (2, 7, 3)


def test_hflip_examples():
    row = np.array([[10, 20, 30]], np.uint8)
    assert hflip(row).tolist() == [[30, 20, 10]]
    sym = np.array([[1, 2, 1], [5, 9, 5]], np.uint8)
    assert np.array_equal(hflip(sym), sym)


def test_bounding_box():
    m = np.zeros((6, 7), bool)
    m[2, 3] = m[4, 5] = True
    assert bounding_box(m) == (2, 3, 5, 6)
    assert bounding_box(np.zeros((2, 2), bool)) is None


# --- properties against the per-pixel oracle ------------------------------

@given(mask_pairs())
def test_iou_matches_oracle(pair):
    a, b = pair
    assert iou(a, b) == naive_iou(a, b)
    assert miou(a, b) == iou(a, b)


@given(mask_pairs())
def test_iou_symmetric_and_bounded(pair):
    a, b = pair
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0
    assert iou(a, a) == 1.0
    if v == 1.0:
        assert np.array_equal(a, b)


@given(arrays(bool, st.tuples(st.integers(1, 10), st.integers(1, 10))))
def test_response_rate_zero_iff_null(m):
    assert (response_rate(m) == 0.0) == (not m.any())


@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9), st.just(3))))
def test_hflip_involution_and_same_size_resize(r):
    assert np.array_equal(hflip(hflip(r)), r)
    assert np.array_equal(resize_nearest(r, r.shape[1], r.shape[0]), r)


@given(arrays(bool, st.tuples(st.integers(1, 9), st.integers(1, 9))))
def test_hflip_mask_involution(m):
    assert np.array_equal(hflip_mask(hflip_mask(m)), m)
    assert np.array_equal(hflip_mask(m), m[:, ::-1])


# --- file formats ---------------------------------------------------------

@pytest.mark.parametrize("suffix,channels", [(".png", 1), (".png", 3), (".pgm", 1), (".ppm", 3)])
def test_raster_roundtrip(tmp_path, suffix, channels):
    shape = (7, 5) if channels == 1 else (7, 5, 3)
    r = np.random.default_rng(1).integers(0, 256, shape, dtype=np.uint8)
    path = tmp_path / f"img{suffix}"
    save_raster(path, r)
    assert np.array_equal(load_raster(path), r)


def test_mask_roundtrip_and_encoding(tmp_path):
    m = np.random.default_rng(2).random((9, 11)) < 0.4
    save_mask(tmp_path / "m.png", m)
    assert np.array_equal(load_mask(tmp_path / "m.png"), m)
    assert set(np.unique(load_raster(tmp_path / "m.png")).tolist()) <= {0, 255}


def test_mask_decodes_threshold_128(tmp_path):
    save_raster(tmp_path / "g.png", np.array([[0, 127, 128, 255]], np.uint8))
    assert load_mask(tmp_path / "g.png").tolist() == [[False, False, True, True]]


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(DataIOError):
        load_raster(tmp_path / "nope.png")
