import numpy as np
import pytest

from texsyn import (
    ConsistencyError,
    LayoutError,
    SegmentSource,
    TextureGrid,
    ValueDomain,
    assemble,
    binary_grid,
    extract_segments,
    plan_layout,
    sample_ti_segments,
    whole_image_layout,
)
from texsyn.segmentation import (
    SegmentBatch,
    extract_segment_arrays,
    scatter_segment_gradients,
)


def random_grid(rng, dims):
    return binary_grid(rng.integers(0, 2, size=dims))


# --- plan_layout ---------------------------------------------------------------

def test_plan_layout_strebelle_case():
    layout = plan_layout([256, 256], [130, 130], [4, 4])
    assert layout.counts == (2, 2)
    assert layout.n == 4


def test_plan_layout_large_2d_case():
    layout = plan_layout([528, 1040], [144, 144], [16, 16])
    assert layout.counts == (4, 8)
    assert layout.n == 32


def test_plan_layout_whole_image():
    layout = plan_layout([64, 64], [64, 64], [0, 0])
    assert layout.counts == (1, 1)
    assert layout.n == 1
    assert layout == whole_image_layout((64, 64))


def test_plan_layout_infeasible_reports_nearest():
    # 4*67 - 3*3 = 259, so 256 is not tileable with 67/3
    with pytest.raises(LayoutError) as err:
        plan_layout([256, 256, 256], [67, 67, 67], [3, 3, 3])
    msg = str(err.value)
    assert "195" in msg and "259" in msg


def test_plan_layout_overlap_bounds():
    with pytest.raises(LayoutError):
        plan_layout([64, 64], [32, 32], [32, 32])
    with pytest.raises(LayoutError):
        plan_layout([64, 64], [32, 32], [-1, 0])


# --- extract_segments ------------------------------------------------------------

def test_extract_origins_strebelle():
    rng = np.random.default_rng(0)
    g = random_grid(rng, (256, 256))
    layout = plan_layout([256, 256], [130, 130], [4, 4])
    batch = extract_segments(g, layout)
    assert batch.origins == ((0, 0), (0, 126), (126, 0), (126, 126))
    assert batch.source is SegmentSource.FromGenerator
    # shared columns of adjacent segments equal the source region
    left, right = batch.segments[0], batch.segments[1]
    assert np.array_equal(left.data[:, 126:130], right.data[:, 0:4])
    assert np.array_equal(left.data[:, 126:130], g.data[0:130, 126:130])


def test_extract_whole_image_is_identity():
    rng = np.random.default_rng(1)
    g = random_grid(rng, (12, 18))
    batch = extract_segments(g, whole_image_layout(g.dims))
    assert len(batch) == 1
    assert batch.segments[0] == g


def test_extract_dims_mismatch():
    g = binary_grid(np.zeros((8, 8), dtype=np.uint8))
    with pytest.raises(LayoutError):
        extract_segments(g, plan_layout([12, 12], [6, 6], [0, 0]))


# --- assemble ---------------------------------------------------------------------

def test_extract_assemble_identity_random():
    rng = np.random.default_rng(2)
    cases = [
        ((16, 16), (10, 10), (4, 4)),
        ((24, 30), (12, 12), (0, 3)),
        ((8, 8, 8), (5, 5, 5), (2, 2, 2)),
    ]
    for out, seg, ov in cases:
        layout = plan_layout(out, seg, ov)
        g = random_grid(rng, out)
        assert assemble(extract_segments(g, layout), layout) == g


def test_assemble_detects_overlap_disagreement():
    rng = np.random.default_rng(3)
    layout = plan_layout([16, 16], [10, 10], [4, 4])
    g = random_grid(rng, (16, 16))
    batch = extract_segments(g, layout)
    bad = batch.segments[1].data.copy()
    bad[:, 0] = 1 - bad[:, 0]  # poison a column inside the overlap band
    segments = list(batch.segments)
    segments[1] = TextureGrid(bad, ValueDomain.Binary01)
    poisoned = SegmentBatch(segments, batch.origins, batch.source)
    with pytest.raises(ConsistencyError):
        assemble(poisoned, layout)


def test_assemble_single_segment():
    rng = np.random.default_rng(4)
    g = random_grid(rng, (9, 9))
    layout = whole_image_layout(g.dims)
    assert assemble(extract_segments(g, layout), layout) == g


def test_footprint_coverage_and_overlap_bands():
    layout = plan_layout([16, 16], [10, 10], [4, 4])
    cover = np.zeros(layout.output_dims, dtype=int)
    for origin in layout.origins():
        sl = tuple(slice(o, o + s) for o, s in zip(origin, layout.segment_dims))
        cover[sl] += 1
    assert (cover >= 1).all()
    # per-axis 1D coverage: multiply-covered band has width exactly `overlap`
    for axis in range(2):
        line = np.zeros(layout.output_dims[axis], dtype=int)
        for i in range(layout.counts[axis]):
            start = i * layout.strides[axis]
            line[start : start + layout.segment_dims[axis]] += 1
        assert np.where(line > 1)[0].tolist() == [6, 7, 8, 9]


# --- sample_ti_segments --------------------------------------------------------------

def test_sample_ti_segments_deterministic():
    rng = np.random.default_rng(5)
    ti = random_grid(rng, (256, 256))
    a = sample_ti_segments([ti], [130, 130], 4, rng_seed := 99)
    b = sample_ti_segments([ti], [130, 130], 4, rng_seed)
    assert a.origins == b.origins
    assert all(x == y for x, y in zip(a.segments, b.segments))
    assert a.source is SegmentSource.FromTrainingImage
    for origin in a.origins:
        assert all(0 <= o <= 126 for o in origin)


def test_sample_ti_segments_full_ti_when_equal_dims():
    rng = np.random.default_rng(6)
    ti = random_grid(rng, (17, 17))
    batch = sample_ti_segments([ti], [17, 17], 3, 1)
    assert all(seg == ti for seg in batch.segments)
    assert all(origin == (0, 0) for origin in batch.origins)


def test_sample_ti_segments_too_large():
    ti = binary_grid(np.zeros((8, 8), dtype=np.uint8))
    with pytest.raises(LayoutError):
        sample_ti_segments([ti], [9, 8], 1, 0)


def test_sample_origin_uniformity():
    # TI 6x6 with 5x5 segments -> origins in {0,1}^2, four equally likely bins
    rng = np.random.default_rng(7)
    ti = random_grid(rng, (6, 6))
    n = 10_000
    batch = sample_ti_segments([ti], [5, 5], n, 2024)
    counts = np.zeros((2, 2))
    for origin in batch.origins:
        counts[origin] += 1
    expected = n / 4
    sigma = np.sqrt(n * 0.25 * 0.75)
    assert np.all(np.abs(counts - expected) < 3 * sigma)


# --- array twins -----------------------------------------------------------------------

def test_extract_arrays_matches_grid_extraction():
    rng = np.random.default_rng(8)
    layout = plan_layout([16, 16], [10, 10], [4, 4])
    g = random_grid(rng, (16, 16))
    batch = extract_segments(g, layout)
    arrays = extract_segment_arrays(g.data[None, ..., None].astype(np.float32), layout)
    assert arrays.shape == (4, 10, 10, 1)
    for i, seg in enumerate(batch.segments):
        assert np.array_equal(arrays[i, ..., 0], seg.data)


def test_scatter_is_adjoint_of_extract():
    # <extract(x), y> must equal <x, scatter(y)> for random x, y
    rng = np.random.default_rng(9)
    layout = plan_layout([12, 15], [8, 9], [4, 3])
    x = rng.standard_normal((2, 12, 15, 1))
    y = rng.standard_normal((2 * layout.n, 8, 9, 1))
    ex = extract_segment_arrays(x, layout)
    sc = scatter_segment_gradients(y, layout, 2)
    assert np.isclose(float((ex * y).sum()), float((x * sc).sum()), rtol=1e-12)
