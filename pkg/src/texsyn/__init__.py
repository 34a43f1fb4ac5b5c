"""Stochastic earth-texture synthesis with segment-assembled GANs.

The package trains a convolutional generator against a discriminator that
scores rectangular segments rather than whole images, which decouples the
discriminator from the generated size, allows arbitrary-size synthesis by
enlarging the latent lattice, and makes diverse realizations possible from
a single training image.  Evaluation uses two-point probability and
cluster statistics.
"""

from .errors import (
    ConfigError,
    ConsistencyError,
    DomainError,
    FormatError,
    LayoutError,
    SpecError,
    TexsynError,
    TrainingDivergedError,
)
from .grids import (
    TextureGrid,
    ValueDomain,
    binarize,
    binary_grid,
    load_texture,
    model_grid,
    save_texture,
    to_model_range,
)
from .metrics import (
    LabelGrid,
    MetricCurve,
    c2,
    ensemble_stats,
    label_clusters,
    porosity,
    s2,
    s2_directional,
    s2_radial,
    write_metric_csv,
)
from .nets import (
    DiscriminatorSpec,
    GeneratorSpec,
    build_discriminator,
    build_generator,
    forward_discriminator,
    forward_generator,
    projective_field,
)
from .segmentation import (
    SegmentBatch,
    SegmentLayout,
    SegmentSource,
    assemble,
    extract_segments,
    plan_layout,
    sample_ti_segments,
    whole_image_layout,
)
from .synthesis import SynthesisRequest, generate, seam_scan
from .training import LossReport, TrainConfig, d_loss, g_loss, train
from .textures import beadpack_texture, channel_texture

__version__ = "0.1.0"

__all__ = [
    "TextureGrid", "ValueDomain", "load_texture", "save_texture",
    "to_model_range", "binarize", "binary_grid", "model_grid",
    "SegmentLayout", "SegmentBatch", "SegmentSource", "plan_layout",
    "extract_segments", "sample_ti_segments", "assemble", "whole_image_layout",
    "GeneratorSpec", "DiscriminatorSpec", "build_generator",
    "build_discriminator", "projective_field", "forward_generator",
    "forward_discriminator",
    "TrainConfig", "LossReport", "train", "d_loss", "g_loss",
    "SynthesisRequest", "generate", "seam_scan",
    "MetricCurve", "LabelGrid", "porosity", "s2", "s2_directional",
    "s2_radial", "label_clusters", "c2", "ensemble_stats", "write_metric_csv",
    "channel_texture", "beadpack_texture",
    "TexsynError", "FormatError", "DomainError", "LayoutError",
    "ConsistencyError", "SpecError", "ConfigError", "TrainingDivergedError",
]
