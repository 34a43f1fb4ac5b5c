"""Spatial statistics for binary textures.

The two-point probability function S2(r) is the chance that two points at
lag r both fall in the foreground phase; it decays from the porosity at
r=0 toward porosity squared at large lags.  The two-point cluster function
C2(r) additionally requires both points to lie in the same connected
cluster, so 0 <= C2 <= S2 <= porosity pointwise.

Boundary handling is either 'truncated' (only in-grid pairs counted,
the default for non-periodic samples) or 'periodic' (lags wrap, and for
C2 the cluster labeling wraps too).
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

from .errors import DomainError, SpecError
from .grids import ValueDomain

DIRECTIONAL_AVERAGING = ("directional_x", "directional_y", "directional_z")
RADIAL = "radial"


@dataclass(frozen=True)
class MetricCurve:
    lags: tuple
    values: tuple
    porosity: float
    kind: str  # "S2" | "C2"
    averaging: str

    def __post_init__(self):
        object.__setattr__(self, "lags", tuple(float(l) for l in self.lags))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.lags) != len(self.values):
            raise SpecError("lags and values must align")


@dataclass(frozen=True)
class LabelGrid:
    labels: np.ndarray
    cluster_count: int

    @property
    def dims(self):
        return tuple(self.labels.shape)


@dataclass(frozen=True)
class EnsembleStats:
    lags: tuple
    mean: tuple
    low: tuple
    high: tuple
    porosity_mean: float
    porosity_std: float
    kind: str
    averaging: str


def _indicator(grid):
    if grid.value_domain is not ValueDomain.Binary01:
        raise DomainError("metrics require a Binary01 grid")
    return (grid.data == grid.foreground).astype(np.float64)


def porosity(grid):
    """Foreground volume fraction."""
    return float(_indicator(grid).mean())


# ---------------------------------------------------------------------------
# S2
# ---------------------------------------------------------------------------

def _axis_index(grid_ndim, averaging):
    try:
        axis = DIRECTIONAL_AVERAGING.index(averaging)
    except ValueError:
        raise SpecError(f"unknown averaging {averaging!r}")
    if axis >= grid_ndim:
        raise SpecError(f"{averaging} undefined for a {grid_ndim}D grid")
    return axis


def s2_directional(grid, axis, max_lag, boundary="truncated"):
    """S2 along one array axis for integer lags 0..max_lag."""
    ind = _indicator(grid)
    if axis < 0 or axis >= ind.ndim:
        raise SpecError(f"axis {axis} invalid for {ind.ndim}D grid")
    n = ind.shape[axis]
    if max_lag >= n:
        raise SpecError(f"max_lag {max_lag} must be below axis size {n}")
    if boundary not in ("truncated", "periodic"):
        raise SpecError(f"boundary must be truncated or periodic, got {boundary!r}")
    phi = ind.mean()
    values = []
    for r in range(max_lag + 1):
        if boundary == "periodic":
            values.append(float((ind * np.roll(ind, -r, axis=axis)).mean()))
        else:
            lead = tuple(
                slice(0, n - r) if a == axis else slice(None)
                for a in range(ind.ndim)
            )
            lag = tuple(
                slice(r, n) if a == axis else slice(None) for a in range(ind.ndim)
            )
            values.append(float((ind[lead] * ind[lag]).mean()))
    return MetricCurve(
        lags=tuple(range(max_lag + 1)),
        values=values,
        porosity=float(phi),
        kind="S2",
        averaging=DIRECTIONAL_AVERAGING[axis],
    )


def _autocorrelation(ind, max_lag, boundary):
    """Per-lag-vector S2 lookup: a function offset tuple -> probability."""
    dims = ind.shape
    if boundary == "periodic":
        spect = sfft.fftn(ind)
        corr = sfft.ifftn(spect * np.conj(spect)).real
        total = ind.size

        def lookup(offset):
            idx = tuple(o % d for o, d in zip(offset, dims))
            return corr[idx] / total

        return lookup
    # truncated: linear autocorrelation via zero-padded FFT, exact pair counts
    padded = [sfft.next_fast_len(d + max_lag + 1) for d in dims]
    spect = sfft.fftn(ind, s=padded)
    corr = sfft.ifftn(spect * np.conj(spect)).real

    def lookup(offset):
        count = 1
        for o, d in zip(offset, dims):
            count *= d - abs(o)
        if count <= 0:
            return 0.0
        idx = tuple(o % p for o, p in zip(offset, padded))
        return corr[idx] / count

    return lookup


def _radial_offsets(ndim, max_lag):
    """All integer lag vectors with |r| <= max_lag + 0.5, grouped by bin."""
    rng = range(-max_lag, max_lag + 1)
    bins = [[] for _ in range(max_lag + 1)]
    for offset in itertools.product(*([rng] * ndim)):
        radius = float(np.sqrt(sum(o * o for o in offset)))
        k = int(round(radius))
        if k <= max_lag and abs(radius - k) <= 0.5:
            bins[k].append(offset)
    return bins


def s2_radial(grid, max_lag, boundary="truncated", normalize=False):
    """Isotropic S2: per-vector values binned by |r| into unit-width bins."""
    ind = _indicator(grid)
    if any(max_lag >= d for d in ind.shape):
        raise SpecError(f"max_lag {max_lag} must be below every dim {ind.shape}")
    if boundary not in ("truncated", "periodic"):
        raise SpecError(f"boundary must be truncated or periodic, got {boundary!r}")
    phi = float(ind.mean())
    lookup = _autocorrelation(ind, max_lag, boundary)
    values = []
    for offsets in _radial_offsets(ind.ndim, max_lag):
        # clamp away FFT round-off: probabilities lie in [0, porosity]
        values.append(
            float(min(max(np.mean([lookup(o) for o in offsets]), 0.0), phi))
        )
    values[0] = phi  # bin 0 holds only the zero lag, exactly the porosity
    if normalize:
        denom = phi - phi * phi
        if denom <= 0:
            raise DomainError("normalized S2 undefined for constant grids")
        values = [(v - phi * phi) / denom for v in values]
    return MetricCurve(
        lags=tuple(range(max_lag + 1)),
        values=values,
        porosity=phi,
        kind="S2",
        averaging=RADIAL,
    )


# ---------------------------------------------------------------------------
# cluster labeling and C2
# ---------------------------------------------------------------------------

def _structure(ndim, connectivity):
    if connectivity == "face":
        return ndimage.generate_binary_structure(ndim, 1)
    if connectivity == "full":
        return ndimage.generate_binary_structure(ndim, ndim)
    raise SpecError(f"connectivity must be 'face' or 'full', got {connectivity!r}")


def _first_visit_relabel(labels):
    """Renumber labels 1..k in row-major first-visit order."""
    flat = labels.ravel()
    uniq, first = np.unique(flat, return_index=True)
    order = [int(u) for _, u in sorted(zip(first, uniq)) if u != 0]
    remap = np.zeros(int(flat.max()) + 1, dtype=labels.dtype)
    for new, old in enumerate(order, start=1):
        remap[old] = new
    return remap[labels], len(order)


def _merge_periodic(labels, fg, structure):
    """Union labels adjacent across periodic boundaries."""
    ndim = labels.ndim
    offsets = []
    center = (1,) * ndim
    for idx in np.argwhere(structure):
        off = tuple(int(i) - 1 for i in idx)
        if off == (0,) * ndim or off < (0,) * ndim:
            continue  # half-stencil; the mirror offset gives the same pairs
        offsets.append(off)
    nmax = int(labels.max())
    parent = np.arange(nmax + 1)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for off in offsets:
        rolled = np.roll(labels, shift=tuple(-o for o in off),
                         axis=tuple(range(ndim)))
        crossing = np.zeros(labels.shape, dtype=bool)
        for a, o in enumerate(off):
            if o == 0:
                continue
            sl = [slice(None)] * ndim
            sl[a] = slice(labels.shape[a] - o, None) if o > 0 else slice(0, -o)
            crossing[tuple(sl)] = True
        mask = crossing & (labels > 0) & (rolled > 0)
        if not mask.any():
            continue
        pairs = np.unique(
            np.stack([labels[mask], rolled[mask]], axis=1), axis=0
        )
        for a, b in pairs:
            ra, rb = find(int(a)), find(int(b))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(nmax + 1)])
    return roots[labels]


def label_clusters(grid, connectivity="face", boundary="truncated"):
    """Connected-component labels of the foreground.

    Label ids are contiguous from 1 in row-major first-visit order; 0 is
    background.  With periodic boundary, clusters touching across opposite
    faces merge.
    """
    fg = _indicator(grid) > 0
    structure = _structure(fg.ndim, connectivity)
    labels, _ = ndimage.label(fg, structure=structure)
    if boundary == "periodic":
        labels = _merge_periodic(labels, fg, structure)
    elif boundary != "truncated":
        raise SpecError(f"boundary must be truncated or periodic, got {boundary!r}")
    labels, count = _first_visit_relabel(labels)
    return LabelGrid(labels=labels, cluster_count=count)


def _c2_offset_value(labels, offset, boundary):
    """P(two points at this lag are foreground and share a cluster)."""
    ndim = labels.ndim
    if boundary == "periodic":
        rolled = np.roll(labels, shift=tuple(-o for o in offset),
                         axis=tuple(range(ndim)))
        same = (labels > 0) & (labels == rolled)
        return float(same.mean())
    lead, lag = [], []
    for a, o in enumerate(offset):
        n = labels.shape[a]
        if abs(o) >= n:
            return 0.0
        if o >= 0:
            lead.append(slice(0, n - o))
            lag.append(slice(o, n))
        else:
            lead.append(slice(-o, n))
            lag.append(slice(0, n + o))
    la = labels[tuple(lead)]
    lb = labels[tuple(lag)]
    same = (la > 0) & (la == lb)
    return float(same.mean())


def c2(grid, connectivity="face", max_lag=None, averaging=RADIAL,
       boundary="truncated"):
    """Two-point cluster function with the same binning options as S2."""
    ind = _indicator(grid)
    if max_lag is None:
        max_lag = min(ind.shape) // 2
    if averaging in DIRECTIONAL_AVERAGING:
        axis = _axis_index(ind.ndim, averaging)
        if max_lag >= ind.shape[axis]:
            raise SpecError(
                f"max_lag {max_lag} must be below axis size {ind.shape[axis]}"
            )
    elif any(max_lag >= d for d in ind.shape):
        raise SpecError(f"max_lag {max_lag} must be below every dim {ind.shape}")
    labeled = label_clusters(grid, connectivity, boundary)
    labels = labeled.labels
    phi = float(ind.mean())
    if averaging in DIRECTIONAL_AVERAGING:
        axis = _axis_index(ind.ndim, averaging)
        values = []
        for r in range(max_lag + 1):
            offset = tuple(r if a == axis else 0 for a in range(ind.ndim))
            values.append(_c2_offset_value(labels, offset, boundary))
    elif averaging == RADIAL:
        values = []
        cache = {}
        for offsets in _radial_offsets(ind.ndim, max_lag):
            vals = []
            for off in offsets:
                key = tuple(-o for o in off) if off < (0,) * ind.ndim else off
                if key not in cache:
                    cache[key] = _c2_offset_value(labels, key, boundary)
                vals.append(cache[key])
            values.append(float(np.mean(vals)))
    else:
        raise SpecError(f"unknown averaging {averaging!r}")
    return MetricCurve(
        lags=tuple(range(max_lag + 1)),
        values=values,
        porosity=phi,
        kind="C2",
        averaging=averaging
        if averaging == RADIAL
        else DIRECTIONAL_AVERAGING[_axis_index(ind.ndim, averaging)],
    )


def s2(grid, max_lag=None, averaging=RADIAL, boundary="truncated"):
    """Convenience dispatcher matching c2's signature."""
    if max_lag is None:
        max_lag = min(grid.dims) // 2
    if averaging == RADIAL:
        return s2_radial(grid, max_lag, boundary)
    axis = _axis_index(grid.ndim, averaging)
    return s2_directional(grid, axis, max_lag, boundary)


# ---------------------------------------------------------------------------
# ensembles and CSV
# ---------------------------------------------------------------------------

def ensemble_stats(curves):
    """Pointwise mean and min/max band over equal-lag curves."""
    curves = list(curves)
    if not curves:
        raise SpecError("ensemble_stats needs at least one curve")
    first = curves[0]
    for c in curves[1:]:
        if c.lags != first.lags:
            raise SpecError("curves must share the same lag grid")
        if c.kind != first.kind or c.averaging != first.averaging:
            raise SpecError("curves must share kind and averaging")
    values = np.array([c.values for c in curves])
    poro = np.array([c.porosity for c in curves])
    return EnsembleStats(
        lags=first.lags,
        mean=tuple(values.mean(axis=0).tolist()),
        low=tuple(values.min(axis=0).tolist()),
        high=tuple(values.max(axis=0).tolist()),
        porosity_mean=float(poro.mean()),
        porosity_std=float(poro.std()),
        kind=first.kind,
        averaging=first.averaging,
    )


def write_metric_csv(path, stats):
    """CSV with comment lines for kind and porosity, then the band rows."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# kind={stats.kind}\n")
        fh.write(f"# porosity_mean={stats.porosity_mean!r}\n")
        fh.write(f"# porosity_std={stats.porosity_std!r}\n")
        fh.write("r,value_mean,value_min,value_max\n")
        for lag, mean, low, high in zip(stats.lags, stats.mean, stats.low, stats.high):
            fh.write(f"{lag!r},{mean!r},{low!r},{high!r}\n")


def read_metric_csv(path):
    kind = None
    poro_mean = poro_std = 0.0
    lags, means, lows, highs = [], [], [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key == "kind":
                    kind = value
                elif key == "porosity_mean":
                    poro_mean = float(value)
                elif key == "porosity_std":
                    poro_std = float(value)
                continue
            if line.startswith("r,"):
                continue
            parts = line.split(",")
            lags.append(float(parts[0]))
            means.append(float(parts[1]))
            lows.append(float(parts[2]))
            highs.append(float(parts[3]))
    return EnsembleStats(
        lags=tuple(lags),
        mean=tuple(means),
        low=tuple(lows),
        high=tuple(highs),
        porosity_mean=poro_mean,
        porosity_std=poro_std,
        kind=kind or "S2",
        averaging=RADIAL,
    )
