"""Drawing realizations from a trained generator, and seam diagnostics.

Output size is free: the latent lattice is resized to output_dims divided
by stride**depth per axis and the trained convolutional body runs on the
larger lattice.  Each realization gets its own derived random stream, so a
request is reproducible as a whole and realizations stay independent.

``seam_scan`` checks an assembled or generated grid for statistical
discontinuities at segment boundaries: it compares two-point correlations
measured across each boundary plane with the same statistic at interior
planes and reports a z-score per boundary.
"""

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .errors import SpecError
from .grids import TextureGrid, ValueDomain, binarize
from .metrics import _indicator
from .nets import (
    assign_tensors,
    build_generator,
    generator_spec_from_dict,
    load_checkpoint,
)


@dataclass(frozen=True)
class SynthesisRequest:
    checkpoint: str
    output_dims: tuple
    count: int = 1
    rng_seed: int = 0
    binarize_threshold: float = 0.0
    raw: bool = False

    def __post_init__(self):
        object.__setattr__(self, "output_dims", tuple(int(v) for v in self.output_dims))
        if self.count < 1:
            raise SpecError("count must be at least 1")
        if not (-1.0 < self.binarize_threshold < 1.0):
            raise SpecError("binarize_threshold must lie in (-1, 1)")


def load_generator(checkpoint_path):
    """Rebuild just the generator from a training checkpoint."""
    header, tensors = load_checkpoint(checkpoint_path)
    spec = generator_spec_from_dict(header["generator_spec"])
    generator = build_generator(spec, 0)
    assign_tensors(generator, tensors, "g")
    return generator, header


def generate(request, generator=None):
    """Draw ``count`` realizations at the requested output size.

    Returns Binary01 grids (ModelRange when ``raw``).  Deterministic given
    ``rng_seed``; realization i uses the (seed, i) stream.
    """
    if generator is None:
        generator, _ = load_generator(request.checkpoint)
    spec = generator.spec
    lattice = spec.lattice_for_output(request.output_dims)
    grids = []
    for i in range(request.count):
        rng = rngmod.stream(request.rng_seed, rngmod.SYNTHESIS, i)
        z = generator.sample_latent(rng, 1, lattice_dims=lattice)
        out = generator.forward(z, train=False)[0, ..., 0]
        grid = TextureGrid(out.astype(np.float32), ValueDomain.ModelRange)
        if not request.raw:
            grid = binarize(grid, request.binarize_threshold)
        grids.append(grid)
    return grids


# ---------------------------------------------------------------------------
# seam detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundarySeam:
    axis: int
    position: int
    discrepancy: float
    z_score: float


@dataclass(frozen=True)
class SeamScanReport:
    boundaries: tuple
    max_lag: int

    @property
    def max_abs_z(self):
        return max((abs(b.z_score) for b in self.boundaries), default=0.0)


def _cross_plane_means(ind, axis, max_lag):
    """m_r(x) = mean over off-axis cells of ind[x]*ind[x+r] along ``axis``."""
    n = ind.shape[axis]
    other = tuple(a for a in range(ind.ndim) if a != axis)
    means = {}
    for r in range(1, max_lag + 1):
        lead = tuple(
            slice(0, n - r) if a == axis else slice(None) for a in range(ind.ndim)
        )
        lag = tuple(
            slice(r, n) if a == axis else slice(None) for a in range(ind.ndim)
        )
        prod = ind[lead] * ind[lag]
        means[r] = prod.mean(axis=other) if other else prod
    return means


def _plane_statistic(means, p, max_lag, reference):
    """Mean |S2 across plane p - reference S2| over lags 1..max_lag."""
    total = 0.0
    for r in range(1, max_lag + 1):
        m = means[r]
        start = p - r
        cross = float(m[start:p].mean())
        total += abs(cross - reference[r])
    return total / max_lag


def seam_scan(grid, layout, max_lag=8):
    """Score each segment boundary for a two-point statistics discontinuity.

    For every boundary plane, the across-plane S2 discrepancy (against the
    grid-wide directional S2) is compared to the same statistic at interior
    planes; the report carries one z-score per boundary.  A stationary grid
    stays within |z| < 3; a hard concatenation of unrelated textures does
    not.
    """
    if grid.dims != layout.output_dims:
        raise SpecError(
            f"grid dims {grid.dims} do not match layout output {layout.output_dims}"
        )
    if 2 * max_lag > min(layout.segment_dims):
        raise SpecError(
            f"scan window 2*{max_lag} exceeds smallest segment "
            f"{min(layout.segment_dims)}"
        )
    ind = _indicator(grid)
    boundaries = []
    for axis in range(ind.ndim):
        count = layout.counts[axis]
        if count < 2:
            continue
        n = ind.shape[axis]
        stride = layout.strides[axis]
        overlap = layout.overlap[axis]
        positions = [j * stride + overlap // 2 for j in range(1, count)]
        means = _cross_plane_means(ind, axis, max_lag)
        reference = {
            r: float(means[r].mean()) for r in range(1, max_lag + 1)
        }
        exclusion = max(max_lag, overlap)
        interior = [
            p
            for p in range(max_lag, n - max_lag + 1)
            if all(abs(p - b) > exclusion for b in positions)
        ]
        if not interior:
            raise SpecError(f"axis {axis}: no interior planes left to compare against")
        interior_t = np.array(
            [_plane_statistic(means, p, max_lag, reference) for p in interior]
        )
        mu = float(interior_t.mean())
        sigma = float(interior_t.std())
        for p in positions:
            t = _plane_statistic(means, p, max_lag, reference)
            z = 0.0 if sigma == 0.0 else (t - mu) / sigma
            boundaries.append(
                BoundarySeam(axis=axis, position=p, discrepancy=t, z_score=z)
            )
    return SeamScanReport(boundaries=tuple(boundaries), max_lag=max_lag)
