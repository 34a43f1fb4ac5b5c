"""Procedural binary training textures.

These give the test suite and the demo scripts self-contained, statistically
stationary inputs: meandering channel fields (long-range connected pore
phase, in the spirit of classic channelized TIs) and non-overlapping bead
packs.  Both wrap around the grid so crops from anywhere are exchangeable.
"""

import numpy as np

from . import rng as rngmod
from .grids import TextureGrid, ValueDomain


def channel_texture(dims, seed, n_channels=6, thickness=3.0, amplitude=4.0,
                    wavelength=None):
    """Sinuous horizontal channels on a vertically periodic 2D grid.

    Foreground (1) is the channel/pore phase; porosity is roughly
    ``n_channels * thickness / height``.
    """
    height, width = (int(d) for d in dims)
    rng = rngmod.as_generator(seed, rngmod.TEXTURE)
    if wavelength is None:
        wavelength = width / 2.0
    spacing = height / n_channels
    x = np.arange(width)
    rows = np.arange(height)[:, None]
    fg = np.zeros((height, width), dtype=bool)
    for k in range(n_channels):
        base = (k + 0.5) * spacing + rng.uniform(-0.3, 0.3) * spacing
        phase = rng.uniform(0.0, 2.0 * np.pi)
        wl = wavelength * rng.uniform(0.75, 1.25)
        amp = amplitude * rng.uniform(0.7, 1.3)
        center = base + amp * np.sin(2.0 * np.pi * x / wl + phase)
        dist = np.abs((rows - center + height / 2.0) % height - height / 2.0)
        fg |= dist < thickness / 2.0
    return TextureGrid(fg.astype(np.uint8), ValueDomain.Binary01)


def beadpack_texture(dims, seed, radius=(3.0, 6.0), target_porosity=0.35,
                     max_tries=20000):
    """Random non-overlapping spheres (beads) in 2D or 3D; beads are foreground."""
    dims = tuple(int(d) for d in dims)
    rng = rngmod.as_generator(seed, rngmod.TEXTURE)
    centers, radii = [], []
    fg = np.zeros(dims, dtype=bool)
    grids = np.meshgrid(*[np.arange(d) for d in dims], indexing="ij")
    total = float(np.prod(dims))
    placed_volume = 0.0
    for _ in range(max_tries):
        if placed_volume / total >= target_porosity:
            break
        r = rng.uniform(*radius)
        pos = [rng.uniform(0, d) for d in dims]
        # periodic center distance check
        ok = True
        for cc, cr in zip(centers, radii):
            d2 = 0.0
            for a in range(len(dims)):
                delta = abs(pos[a] - cc[a])
                delta = min(delta, dims[a] - delta)
                d2 += delta * delta
            if d2 < (r + cr) ** 2:
                ok = False
                break
        if not ok:
            continue
        centers.append(pos)
        radii.append(r)
        d2 = np.zeros(dims)
        for a in range(len(dims)):
            delta = np.abs(grids[a] - pos[a])
            delta = np.minimum(delta, dims[a] - delta)
            d2 = d2 + delta * delta
        ball = d2 < r * r
        fg |= ball
        placed_volume += float(ball.sum())
    return TextureGrid(fg.astype(np.uint8), ValueDomain.Binary01)
