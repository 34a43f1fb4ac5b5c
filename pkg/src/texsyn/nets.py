"""Generator and discriminator construction.

The generator maps a latent lattice z' (spatial tensor of noise columns)
through a stack of stride-s transposed convolutions, so output size is
lattice size times stride**depth per axis.  Because the convolutional body
is size-agnostic, enlarging the lattice at synthesis time enlarges the
output without touching trained weights.

Two latent modes exist: ``fc`` draws a flat z vector and maps it onto the
lattice through a fully connected head (columns correlated by
construction); ``direct`` samples the lattice i.i.d. per column and is the
mode that generalizes across output sizes.

The discriminator is a plain strided-conv stack with LeakyReLU and
dropout, flattened into a single sigmoid unit, sized by its own input
dims, independent of the generator.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .errors import FormatError, SpecError
from .grids import TextureGrid, ValueDomain
from .layers import (
    BatchNorm,
    Conv,
    ConvTranspose,
    Dense,
    Dropout,
    Flatten,
    LeakyRelu,
    Relu,
    Reshape,
    Sequential,
    Sigmoid,
    Tanh,
    same_out_size,
)

WEIGHT_STD = 0.02  # zero-mean Gaussian init, the usual DCGAN choice

CHECKPOINT_MAGIC = b"TSCK"
CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------------------
# specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorSpec:
    lattice_dims: tuple
    filters: tuple
    latent_dim: int = 100
    lattice_channels: int = 0  # 0 means "use first filter count"
    kernel: int = 5
    stride: int = 2
    use_batchnorm: bool = True
    batchnorm_momentum: float = 0.8
    latent_mode: str = "direct"

    def __post_init__(self):
        object.__setattr__(self, "lattice_dims", tuple(int(v) for v in self.lattice_dims))
        object.__setattr__(self, "filters", tuple(int(v) for v in self.filters))
        if not self.filters:
            raise SpecError("generator needs at least one filter layer")
        if any(f <= 0 for f in self.filters):
            raise SpecError("filter counts must be positive")
        if len(self.lattice_dims) not in (2, 3) or any(d <= 0 for d in self.lattice_dims):
            raise SpecError("lattice_dims must be 2 or 3 positive integers")
        if self.stride < 1:
            raise SpecError("stride must be >= 1")
        if self.kernel < self.stride:
            raise SpecError("kernel must be >= stride")
        if self.latent_dim <= 0:
            raise SpecError("latent_dim must be positive")
        if self.latent_mode not in ("fc", "direct"):
            raise SpecError(f"latent_mode must be 'fc' or 'direct', got {self.latent_mode!r}")
        if not (0.0 <= self.batchnorm_momentum < 1.0):
            raise SpecError("batchnorm_momentum must be in [0, 1)")

    @property
    def channels(self):
        """Latent lattice channel count d (defaults to the first filter count)."""
        return self.lattice_channels if self.lattice_channels > 0 else self.filters[0]

    @property
    def depth(self):
        return len(self.filters)

    def output_dims(self, lattice_dims=None):
        lattice = self.lattice_dims if lattice_dims is None else tuple(lattice_dims)
        scale = self.stride ** self.depth
        return tuple(int(d) * scale for d in lattice)

    def lattice_for_output(self, output_dims):
        """Invert the size law; raises SpecError listing nearest valid sizes."""
        scale = self.stride ** self.depth
        lattice = []
        for axis, out in enumerate(tuple(int(v) for v in output_dims)):
            if out % scale == 0 and out >= scale:
                lattice.append(out // scale)
            else:
                lo = max(scale, (out // scale) * scale)
                hi = lo + scale
                raise SpecError(
                    f"axis {axis}: output {out} is not a multiple of stride**depth "
                    f"({scale}); nearest valid sizes are {lo} and {hi}"
                )
        return tuple(lattice)


@dataclass(frozen=True)
class DiscriminatorSpec:
    input_dims: tuple
    filters: tuple
    kernel: int = 5
    stride: int = 2
    dropout_rate: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "input_dims", tuple(int(v) for v in self.input_dims))
        object.__setattr__(self, "filters", tuple(int(v) for v in self.filters))
        if not self.filters or any(f <= 0 for f in self.filters):
            raise SpecError("discriminator needs positive filter counts")
        if len(self.input_dims) not in (2, 3) or any(d <= 0 for d in self.input_dims):
            raise SpecError("input_dims must be 2 or 3 positive integers")
        if self.stride < 1:
            raise SpecError("stride must be >= 1")
        if self.kernel < self.stride:
            raise SpecError("kernel must be >= stride")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise SpecError("dropout_rate must be in [0, 1)")

    def feature_map_dims(self):
        """Spatial dims after each conv layer (ceil division per stride)."""
        dims = self.input_dims
        maps = []
        for _ in self.filters:
            dims = tuple(same_out_size(d, self.stride) for d in dims)
            maps.append(dims)
        return maps


def spec_to_dict(spec):
    if isinstance(spec, GeneratorSpec):
        return {
            "lattice_dims": list(spec.lattice_dims),
            "filters": list(spec.filters),
            "latent_dim": spec.latent_dim,
            "lattice_channels": spec.lattice_channels,
            "kernel": spec.kernel,
            "stride": spec.stride,
            "use_batchnorm": spec.use_batchnorm,
            "batchnorm_momentum": spec.batchnorm_momentum,
            "latent_mode": spec.latent_mode,
        }
    if isinstance(spec, DiscriminatorSpec):
        return {
            "input_dims": list(spec.input_dims),
            "filters": list(spec.filters),
            "kernel": spec.kernel,
            "stride": spec.stride,
            "dropout_rate": spec.dropout_rate,
        }
    raise TypeError(f"not a spec: {type(spec)!r}")


def generator_spec_from_dict(d):
    return GeneratorSpec(
        lattice_dims=tuple(d["lattice_dims"]),
        filters=tuple(d["filters"]),
        latent_dim=int(d.get("latent_dim", 100)),
        lattice_channels=int(d.get("lattice_channels", 0)),
        kernel=int(d.get("kernel", 5)),
        stride=int(d.get("stride", 2)),
        use_batchnorm=bool(d.get("use_batchnorm", True)),
        batchnorm_momentum=float(d.get("batchnorm_momentum", 0.8)),
        latent_mode=str(d.get("latent_mode", "direct")),
    )


def discriminator_spec_from_dict(d):
    return DiscriminatorSpec(
        input_dims=tuple(d["input_dims"]),
        filters=tuple(d["filters"]),
        kernel=int(d.get("kernel", 5)),
        stride=int(d.get("stride", 2)),
        dropout_rate=float(d.get("dropout_rate", 0.25)),
    )


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

class Generator:
    def __init__(self, spec, net, dtype):
        self.spec = spec
        self.net = net
        self.dtype = dtype

    def sample_latent(self, rng, batch, lattice_dims=None):
        """Draw latent input: flat z in fc mode, lattice z' in direct mode."""
        rng = rngmod.as_generator(rng)
        spec = self.spec
        if spec.latent_mode == "fc":
            if lattice_dims is not None and tuple(lattice_dims) != spec.lattice_dims:
                return rng.standard_normal(
                    (batch,) + tuple(lattice_dims) + (spec.channels,)
                ).astype(self.dtype)
            return rng.standard_normal((batch, spec.latent_dim)).astype(self.dtype)
        lattice = spec.lattice_dims if lattice_dims is None else tuple(lattice_dims)
        return rng.standard_normal((batch,) + lattice + (spec.channels,)).astype(
            self.dtype
        )

    def forward(self, z, train=False):
        """Run z (or a z' lattice) through the stack; output (B, *out, 1)."""
        spec = self.spec
        if z.ndim == 2:
            if spec.latent_mode != "fc":
                raise SpecError("flat z input requires latent_mode='fc'")
            if z.shape[1] != spec.latent_dim:
                raise SpecError(
                    f"z length {z.shape[1]} != latent_dim {spec.latent_dim}"
                )
            self._last_net = self.net
            return self.net.forward(z.astype(self.dtype, copy=False), train=train)
        expected_rank = 2 + len(spec.lattice_dims)
        if z.ndim != expected_rank or z.shape[-1] != spec.channels:
            raise SpecError(
                f"z' must be (batch, *lattice, {spec.channels}), got {z.shape}"
            )
        body = self.body_net() if spec.latent_mode == "fc" else self.net
        self._last_net = body
        return body.forward(z.astype(self.dtype, copy=False), train=train)

    def backward(self, dy):
        return self._last_net.backward(dy)

    def body_net(self):
        """The convolutional body without the fc head (for direct z' input)."""
        if self.spec.latent_mode != "fc":
            return self.net
        names = {"fc", "fc_act", "reshape"}
        return Sequential(
            [(n, l) for n, l in self.net.named_layers if n not in names]
        )

    def params(self):
        return self.net.params()

    def tensors(self):
        return self.net.tensors()

    def grads(self):
        return self.net.grads()


class Discriminator:
    def __init__(self, spec, net, dtype):
        self.spec = spec
        self.net = net
        self.dtype = dtype

    def forward(self, x, train=False, rng=None):
        """Score a batch (B, *input_dims[, 1]) -> probabilities (B,)."""
        if x.ndim == 1 + len(self.spec.input_dims):
            x = x[..., None]
        if x.shape[1:-1] != self.spec.input_dims or x.shape[-1] != 1:
            raise SpecError(
                f"discriminator input {x.shape[1:]} != spec {self.spec.input_dims}"
            )
        out = self.net.forward(x.astype(self.dtype, copy=False), train=train, rng=rng)
        return out[:, 0]

    def backward(self, dscores):
        return self.net.backward(dscores[:, None])

    def params(self):
        return self.net.params()

    def tensors(self):
        return self.net.tensors()

    def grads(self):
        return self.net.grads()


def _init_weight(rng, shape, dtype):
    return (rng.standard_normal(shape) * WEIGHT_STD).astype(dtype)


def build_generator(spec, rng_seed, dtype=np.float32):
    """Instantiate generator parameters; deterministic under rng_seed."""
    rng = rngmod.as_generator(rng_seed, rngmod.INIT_GENERATOR)
    ndim = len(spec.lattice_dims)
    ksize = spec.kernel ** ndim
    layers = []
    if spec.latent_mode == "fc":
        fan_out = int(np.prod(spec.lattice_dims)) * spec.channels
        layers.append(
            (
                "fc",
                Dense(
                    _init_weight(rng, (spec.latent_dim, fan_out), dtype),
                    np.zeros(fan_out, dtype=dtype),
                ),
            )
        )
        layers.append(("fc_act", Relu()))
        layers.append(("reshape", Reshape(spec.lattice_dims + (spec.channels,))))
    cin = spec.channels
    for i, cout in enumerate(spec.filters):
        layers.append(
            (
                f"up{i}",
                ConvTranspose(
                    _init_weight(rng, (ksize, cout, cin), dtype),
                    np.zeros(cout, dtype=dtype),
                    (spec.kernel,) * ndim,
                    spec.stride,
                ),
            )
        )
        if spec.use_batchnorm:
            layers.append((f"bn{i}", BatchNorm(cout, spec.batchnorm_momentum, dtype)))
        layers.append((f"act{i}", Relu()))
        cin = cout
    layers.append(
        (
            "out",
            Conv(
                _init_weight(rng, (ksize, cin, 1), dtype),
                np.zeros(1, dtype=dtype),
                (spec.kernel,) * ndim,
                1,
            ),
        )
    )
    layers.append(("out_act", Tanh()))
    return Generator(spec, Sequential(layers), dtype)


def build_discriminator(spec, rng_seed, dtype=np.float32):
    """Instantiate discriminator parameters; deterministic under rng_seed."""
    rng = rngmod.as_generator(rng_seed, rngmod.INIT_DISCRIMINATOR)
    ndim = len(spec.input_dims)
    ksize = spec.kernel ** ndim
    layers = []
    cin = 1
    for i, cout in enumerate(spec.filters):
        layers.append(
            (
                f"conv{i}",
                Conv(
                    _init_weight(rng, (ksize, cin, cout), dtype),
                    np.zeros(cout, dtype=dtype),
                    (spec.kernel,) * ndim,
                    spec.stride,
                ),
            )
        )
        layers.append((f"act{i}", LeakyRelu(0.2)))
        layers.append((f"drop{i}", Dropout(spec.dropout_rate)))
        cin = cout
    layers.append(("flatten", Flatten()))
    final_map = spec.feature_map_dims()[-1]
    fan_in = int(np.prod(final_map)) * spec.filters[-1]
    layers.append(
        (
            "head",
            Dense(
                _init_weight(rng, (fan_in, 1), dtype),
                np.zeros(1, dtype=dtype),
            ),
        )
    )
    layers.append(("head_act", Sigmoid()))
    return Discriminator(spec, Sequential(layers), dtype)


# ---------------------------------------------------------------------------
# projective field
# ---------------------------------------------------------------------------

def projective_field(spec):
    """Output extent influenced by one latent-lattice column, per axis.

    Recurrence across the transposed-conv stack (the final stride-1 output
    convolution included): pf_0 = 1, pf_i = (pf_{i-1} - 1) * stride + kernel.
    """
    pf = 1
    for _ in spec.filters:
        pf = (pf - 1) * spec.stride + spec.kernel
    pf = (pf - 1) * 1 + spec.kernel  # final 1-channel conv, stride 1
    return (pf,) * len(spec.lattice_dims)


def segment_field_warnings(g_spec, segment_dims):
    """Warn when segments are too small to hold multiple projective fields."""
    pf = projective_field(g_spec)
    warnings = []
    for axis, (seg, p) in enumerate(zip(segment_dims, pf)):
        if seg < 2 * p:
            warnings.append(
                f"axis {axis}: segment size {seg} is below twice the projective "
                f"field {p}; segments should contain multiple projective fields"
            )
    return warnings


# ---------------------------------------------------------------------------
# spec-surface wrappers
# ---------------------------------------------------------------------------

def forward_generator(generator, z_batch):
    """Inference-mode forward returning ModelRange grids."""
    out = generator.forward(np.asarray(z_batch), train=False)
    return [
        TextureGrid(out[i, ..., 0].astype(np.float32), ValueDomain.ModelRange)
        for i in range(out.shape[0])
    ]


def forward_discriminator(discriminator, grids):
    """Inference-mode scores in [0, 1] for a batch of grids."""
    arrays = []
    for g in grids:
        data = g.data if isinstance(g, TextureGrid) else np.asarray(g)
        if isinstance(g, TextureGrid) and g.value_domain is ValueDomain.Binary01:
            data = data.astype(np.float32) * 2.0 - 1.0
        arrays.append(np.asarray(data, dtype=np.float32))
    x = np.stack(arrays, axis=0)
    return discriminator.forward(x, train=False)


# ---------------------------------------------------------------------------
# checkpoint container
# ---------------------------------------------------------------------------

def save_checkpoint(path, header, tensors):
    """Write the versioned container: JSON header + named float32 tensors.

    Tensors are serialized little-endian float32 with shape headers, in
    dict insertion order; the round trip is bit-exact.
    """
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<B", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            arr = np.ascontiguousarray(arr, dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes(order="C"))


def load_checkpoint(path):
    """Read a container written by :func:`save_checkpoint`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a texsyn checkpoint")
    version = raw[4]
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    pos = 5
    (hlen,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    header = json.loads(raw[pos : pos + hlen].decode("utf-8"))
    pos += hlen
    (count,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", raw, pos)
        pos += 2
        name = raw[pos : pos + nlen].decode("utf-8")
        pos += nlen
        ndim = raw[pos]
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, pos)
        pos += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(raw, dtype="<f4", count=size, offset=pos).reshape(shape)
        pos += 4 * size
        tensors[name] = arr.copy()
    if pos != len(raw):
        raise FormatError(f"{path}: trailing bytes after tensor payload")
    return header, tensors


def assign_tensors(net_like, tensors, prefix):
    """Load ``prefix``-named tensors into a model's layers."""
    want = prefix + "."
    seen = 0
    for key, value in tensors.items():
        if key.startswith(want):
            net_like.net.set_tensor(key[len(want):], value)
            seen += 1
    expected = len(net_like.tensors())
    if seen != expected:
        raise FormatError(
            f"checkpoint holds {seen} tensors for prefix {prefix!r}, expected {expected}"
        )
