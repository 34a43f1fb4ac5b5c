"""Segment geometry: planning, extraction, sampling and reassembly.

A generated grid is covered by overlapping rectangular segments that tile
it exactly: along each axis ``counts * segment - (counts - 1) * overlap``
must equal the output size.  Segments are what the discriminator scores;
the union of segments reconstitutes the full grid.
"""

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .errors import ConsistencyError, LayoutError
from .grids import TextureGrid


class SegmentSource(enum.Enum):
    FromGenerator = "generator"
    FromTrainingImage = "training_image"


@dataclass(frozen=True)
class SegmentLayout:
    output_dims: tuple
    segment_dims: tuple
    overlap: tuple
    counts: tuple

    def __post_init__(self):
        object.__setattr__(self, "output_dims", tuple(int(v) for v in self.output_dims))
        object.__setattr__(self, "segment_dims", tuple(int(v) for v in self.segment_dims))
        object.__setattr__(self, "overlap", tuple(int(v) for v in self.overlap))
        object.__setattr__(self, "counts", tuple(int(v) for v in self.counts))
        ndim = len(self.output_dims)
        if not (len(self.segment_dims) == len(self.overlap) == len(self.counts) == ndim):
            raise LayoutError("layout fields must share one length per axis")
        for out, seg, ov, cnt in zip(
            self.output_dims, self.segment_dims, self.overlap, self.counts
        ):
            if out <= 0 or seg <= 0 or cnt <= 0:
                raise LayoutError("output, segment and counts must be positive")
            if ov < 0:
                raise LayoutError("overlap must be non-negative")
            if ov >= seg:
                raise LayoutError(f"overlap {ov} must be smaller than segment {seg}")
            if cnt * seg - (cnt - 1) * ov != out:
                raise LayoutError(
                    f"tiling equation violated: {cnt}*{seg} - {cnt - 1}*{ov} != {out}"
                )

    @property
    def n(self):
        return int(np.prod(self.counts))

    @property
    def strides(self):
        """Origin spacing per axis (segment minus overlap)."""
        return tuple(s - o for s, o in zip(self.segment_dims, self.overlap))

    def origins(self):
        """All segment origins in row-major order over the counts grid."""
        axes = [
            [i * stride for i in range(cnt)]
            for cnt, stride in zip(self.counts, self.strides)
        ]
        return [tuple(o) for o in itertools.product(*axes)]


@dataclass(frozen=True)
class SegmentBatch:
    segments: tuple
    origins: tuple
    source: SegmentSource

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "origins", tuple(tuple(o) for o in self.origins))
        if len(self.segments) != len(self.origins):
            raise ConsistencyError("segments and origins must pair one to one")
        if self.segments:
            dims = self.segments[0].dims
            if any(seg.dims != dims for seg in self.segments):
                raise ConsistencyError("all segments must share identical dims")

    @property
    def segment_dims(self):
        return self.segments[0].dims if self.segments else ()

    def __len__(self):
        return len(self.segments)


def plan_layout(output_dims, segment_dims, overlap):
    """Solve per-axis segment counts for an exact tiling.

    Raises :class:`LayoutError` naming the nearest feasible output sizes
    when no integer count works on some axis.
    """
    output_dims = tuple(int(v) for v in output_dims)
    segment_dims = tuple(int(v) for v in segment_dims)
    overlap = tuple(int(v) for v in overlap)
    if not (len(output_dims) == len(segment_dims) == len(overlap)):
        raise LayoutError("output, segment and overlap must share one length")
    counts = []
    for axis, (out, seg, ov) in enumerate(zip(output_dims, segment_dims, overlap)):
        if out <= 0 or seg <= 0:
            raise LayoutError(f"axis {axis}: sizes must be positive")
        if ov < 0 or ov >= seg:
            raise LayoutError(f"axis {axis}: overlap must satisfy 0 <= overlap < segment")
        stride = seg - ov
        if (out - ov) % stride == 0 and (out - ov) // stride >= 1:
            counts.append((out - ov) // stride)
            continue
        c_lo = max(1, (out - ov) // stride)
        lo = c_lo * seg - (c_lo - 1) * ov
        hi = (c_lo + 1) * seg - c_lo * ov
        raise LayoutError(
            f"axis {axis}: no count c solves c*{seg} - (c-1)*{ov} == {out}; "
            f"nearest feasible outputs are {lo} and {hi}"
        )
    return SegmentLayout(output_dims, segment_dims, overlap, tuple(counts))


def whole_image_layout(dims):
    """The degenerate n=1 layout covering the full grid."""
    dims = tuple(int(v) for v in dims)
    return SegmentLayout(dims, dims, (0,) * len(dims), (1,) * len(dims))


def _segment_view(array, origin, segment_dims):
    slices = tuple(slice(o, o + s) for o, s in zip(origin, segment_dims))
    return array[slices]


def extract_segments(grid, layout):
    """Cut a grid into the layout's segments, row-major origin order."""
    if grid.dims != layout.output_dims:
        raise LayoutError(
            f"grid dims {grid.dims} do not match layout output {layout.output_dims}"
        )
    origins = layout.origins()
    segments = [
        TextureGrid(
            _segment_view(grid.data, origin, layout.segment_dims).copy(),
            grid.value_domain,
            grid.foreground,
        )
        for origin in origins
    ]
    return SegmentBatch(segments, origins, SegmentSource.FromGenerator)


def sample_ti_segments(tis, segment_dims, n, rng):
    """Draw ``n`` random equal-size crops from the training images.

    Each crop takes a uniformly chosen TI and a uniformly chosen valid
    origin.  ``rng`` is an integer seed or a ``numpy.random.Generator``;
    results are deterministic given the seed.
    """
    segment_dims = tuple(int(v) for v in segment_dims)
    if n < 1:
        raise LayoutError("n must be at least 1")
    tis = list(tis)
    if not tis:
        raise LayoutError("at least one training image is required")
    for ti in tis:
        if len(ti.dims) != len(segment_dims):
            raise LayoutError(
                f"TI dims {ti.dims} and segment dims {segment_dims} differ in rank"
            )
        if any(t < s for t, s in zip(ti.dims, segment_dims)):
            raise LayoutError(
                f"segment {segment_dims} larger than training image {ti.dims}"
            )
    gen = rngmod.as_generator(rng, rngmod.TEXTURE)
    segments, origins = [], []
    for _ in range(int(n)):
        ti = tis[int(gen.integers(len(tis)))]
        origin = tuple(
            int(gen.integers(t - s + 1)) for t, s in zip(ti.dims, segment_dims)
        )
        segments.append(
            TextureGrid(
                _segment_view(ti.data, origin, segment_dims).copy(),
                ti.value_domain,
                ti.foreground,
            )
        )
        origins.append(origin)
    return SegmentBatch(segments, origins, SegmentSource.FromTrainingImage)


def assemble(batch, layout):
    """Reassemble segments into the full grid (inverse of extraction).

    Overlapped regions must agree across segments; disagreement raises
    :class:`ConsistencyError` because such a batch cannot have come from a
    single source grid.
    """
    if len(batch) != layout.n:
        raise ConsistencyError(f"expected {layout.n} segments, got {len(batch)}")
    if batch.segment_dims != layout.segment_dims:
        raise ConsistencyError(
            f"segment dims {batch.segment_dims} do not match layout "
            f"{layout.segment_dims}"
        )
    first = batch.segments[0]
    out = np.zeros(layout.output_dims, dtype=first.data.dtype)
    written = np.zeros(layout.output_dims, dtype=bool)
    for segment, origin in zip(batch.segments, batch.origins):
        slices = tuple(
            slice(o, o + s) for o, s in zip(origin, layout.segment_dims)
        )
        region_written = written[slices]
        if region_written.any():
            if not np.array_equal(
                out[slices][region_written], segment.data[region_written]
            ):
                raise ConsistencyError(
                    f"segment at origin {origin} disagrees with previously "
                    "written overlap region"
                )
        out[slices] = segment.data
        written[slices] = True
    if not written.all():
        raise ConsistencyError("segment footprints do not cover the output grid")
    return TextureGrid(out, first.value_domain, first.foreground)


# array-level twins used by the training loop -------------------------------

def extract_segment_arrays(images, layout):
    """Segment a batch of raw arrays (B, *dims, ...) -> (B * n, *segment_dims, ...).

    Spatial axes follow the batch axis; trailing axes (e.g. channels) pass
    through.  Segment order is image-major then row-major over origins,
    matching :func:`extract_segments` per image.
    """
    origins = layout.origins()
    pieces = [
        images[
            (slice(None),)
            + tuple(slice(o, o + s) for o, s in zip(origin, layout.segment_dims))
        ]
        for origin in origins
    ]
    stacked = np.stack(pieces, axis=1)  # (B, n, *seg, ...)
    return stacked.reshape((-1,) + pieces[0].shape[1:])


def scatter_segment_gradients(segment_grads, layout, batch_size):
    """Adjoint of :func:`extract_segment_arrays`.

    Gradients of overlapping segments accumulate by summation in the
    overlap bands, which is the exact transpose of value duplication.
    """
    origins = layout.origins()
    n = layout.n
    trailing = segment_grads.shape[1 + len(layout.segment_dims):]
    grads = segment_grads.reshape((batch_size, n) + layout.segment_dims + trailing)
    out = np.zeros(
        (batch_size,) + layout.output_dims + trailing, dtype=segment_grads.dtype
    )
    for i, origin in enumerate(origins):
        slices = (slice(None),) + tuple(
            slice(o, o + s) for o, s in zip(origin, layout.segment_dims)
        )
        out[slices] += grads[:, i]
    return out
