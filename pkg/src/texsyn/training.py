"""Adversarial training: standard whole-image mode and assembled segment mode.

Both modes run the same loop; the only difference is the segment layout.
Whole-image training (DCGAN mode) is the degenerate n=1 layout, so the two
objectives coincide exactly there.  In segment mode (SAGAN), the
discriminator scores segments cut from generated grids against equal-size
crops drawn fresh from the training images every step, and the generator
loss aggregates the log of the product of per-segment probabilities.

``batch_size`` counts discriminator inputs per side and per update in both
modes.  A segment-mode step therefore generates ``batch_size // n`` full
grids and cuts them into ``batch_size`` segments, which is where the
training-cost advantage over whole-image mode comes from: the generator
renders fewer full-size grids per update while the discriminator sees the
same number of (smaller) samples.

One "epoch" here is one paired discriminator+generator update on one
minibatch.  All randomness for step k derives from (seed, k), so resuming
from a checkpoint continues bit-identically.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .errors import SpecError, TrainingDivergedError
from .grids import ValueDomain
from .nets import (
    build_discriminator,
    build_generator,
    load_checkpoint,
    save_checkpoint,
    spec_to_dict,
)
from .segmentation import (
    SegmentLayout,
    extract_segment_arrays,
    plan_layout,
    scatter_segment_gradients,
    whole_image_layout,
)

SCORE_CLAMP = 1e-7  # probabilities are clamped to [eps, 1-eps] inside logs

LOSS_CSV_HEADER = ["step", "j_d", "j_g", "d_real_mean", "d_fake_mean"]


@dataclass(frozen=True)
class TrainConfig:
    mode: str  # "DCGAN" | "SAGAN"
    batch_size: int = 32
    epochs: int = 1000
    learning_rate: float = 2e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    rng_seed: int = 0
    checkpoint_every: int = 1000
    layout: SegmentLayout = None
    ti_sampling: str = "random"

    def __post_init__(self):
        if self.mode not in ("DCGAN", "SAGAN"):
            raise SpecError(f"mode must be DCGAN or SAGAN, got {self.mode!r}")
        if not (4 <= self.batch_size <= 64):
            raise SpecError("batch_size must lie in [4, 64]")
        if not (0 <= self.epochs <= 100_000):
            raise SpecError("epochs must lie in [0, 100000]")
        if self.mode == "SAGAN" and self.layout is None:
            raise SpecError("SAGAN mode requires a segment layout")
        if self.checkpoint_every < 1:
            raise SpecError("checkpoint_every must be positive")
        if self.ti_sampling not in ("random", "grid"):
            raise SpecError("ti_sampling must be 'random' or 'grid'")


@dataclass(frozen=True)
class LossReport:
    step: int
    j_d: float
    j_g: float
    d_real_mean: float
    d_fake_mean: float

    def is_finite(self):
        return all(
            np.isfinite(v)
            for v in (self.j_d, self.j_g, self.d_real_mean, self.d_fake_mean)
        )


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def _clamped_log(scores):
    s = np.asarray(scores, dtype=np.float64)
    return np.log(np.clip(s, SCORE_CLAMP, 1.0 - SCORE_CLAMP))


def d_loss(real_scores, fake_scores):
    """Discriminator loss: -(1/2n) * sum(log r_i + log(1 - f_i))."""
    r = np.asarray(real_scores, dtype=np.float64)
    f = np.asarray(fake_scores, dtype=np.float64)
    if r.size == 0 or f.size == 0:
        raise SpecError("d_loss needs non-empty score lists")
    if r.size != f.size:
        raise SpecError("real and fake score lists must have equal length")
    n = r.size
    return float(-(_clamped_log(r).sum() + _clamped_log(1.0 - f).sum()) / (2 * n))


def g_loss(fake_scores):
    """Generator loss: -(1/2n) * sum(log f_i), the assembled product form."""
    f = np.asarray(fake_scores, dtype=np.float64)
    if f.size == 0:
        raise SpecError("g_loss needs a non-empty score list")
    return float(-_clamped_log(f).sum() / (2 * f.size))


def d_loss_grad(real_scores, fake_scores):
    """Gradients of d_loss w.r.t. each score (zero where clamping engages)."""
    r = np.asarray(real_scores, dtype=np.float64)
    f = np.asarray(fake_scores, dtype=np.float64)
    n = r.size
    lo, hi = SCORE_CLAMP, 1.0 - SCORE_CLAMP
    dr = np.where((r > lo) & (r < hi), -1.0 / (2 * n * np.clip(r, lo, hi)), 0.0)
    df = np.where(
        (f > lo) & (f < hi), 1.0 / (2 * n * np.clip(1.0 - f, lo, hi)), 0.0
    )
    return dr, df


def g_loss_grad(fake_scores):
    f = np.asarray(fake_scores, dtype=np.float64)
    n = f.size
    lo, hi = SCORE_CLAMP, 1.0 - SCORE_CLAMP
    return np.where((f > lo) & (f < hi), -1.0 / (2 * n * np.clip(f, lo, hi)), 0.0)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

class Adam:
    def __init__(self, lr, beta1, beta2, eps):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        self.t += 1
        for name, p in params.items():
            g = grads[name].astype(p.dtype, copy=False)
            dt = p.dtype.type
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m = self.m[name]
            v = self.v[name]
            m *= dt(self.beta1)
            m += dt(1.0 - self.beta1) * g
            v *= dt(self.beta2)
            v += dt(1.0 - self.beta2) * (g * g)
            mhat = m / dt(1.0 - self.beta1 ** self.t)
            vhat = v / dt(1.0 - self.beta2 ** self.t)
            p -= dt(self.lr) * mhat / (np.sqrt(vhat) + dt(self.eps))


# ---------------------------------------------------------------------------
# data preparation
# ---------------------------------------------------------------------------

def _ti_arrays(tis):
    """Training images as float32 model-range arrays (values -1/+1)."""
    arrays = []
    for ti in tis:
        if ti.value_domain is ValueDomain.Binary01:
            fg = ti.foreground_mask()
            arr = np.where(fg, np.float32(1.0), np.float32(-1.0))
        else:
            arr = ti.data.astype(np.float32)
        arrays.append(arr[..., None])  # add channel axis
    return arrays


def _sample_crops(ti_arrays, segment_dims, count, gen, grid_origins=None):
    """count crops, each a uniform TI at a uniform valid (or grid) origin."""
    crops = np.empty(
        (count,) + tuple(segment_dims) + (1,), dtype=ti_arrays[0].dtype
    )
    for i in range(count):
        t = int(gen.integers(len(ti_arrays)))
        ti = ti_arrays[t]
        if grid_origins is not None:
            origin = grid_origins[t][int(gen.integers(len(grid_origins[t])))]
        else:
            origin = tuple(
                int(gen.integers(td - sd + 1))
                for td, sd in zip(ti.shape[:-1], segment_dims)
            )
        slices = tuple(slice(o, o + s) for o, s in zip(origin, segment_dims))
        crops[i] = ti[slices]
    return crops


def effective_layout(config, output_dims):
    if config.mode == "SAGAN":
        return config.layout
    return whole_image_layout(output_dims)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    generator: object
    discriminator: object
    history: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)


def _validate_setup(g_spec, d_spec, config, ti_arrays):
    out_dims = g_spec.output_dims()
    if config.mode == "DCGAN":
        if out_dims != d_spec.input_dims:
            raise SpecError(
                f"DCGAN mode requires generator output {out_dims} to equal "
                f"discriminator input {d_spec.input_dims}"
            )
    else:
        layout = config.layout
        if layout.output_dims != out_dims:
            raise SpecError(
                f"layout output {layout.output_dims} != generator output {out_dims}"
            )
        if layout.segment_dims != d_spec.input_dims:
            raise SpecError(
                f"layout segments {layout.segment_dims} != discriminator input "
                f"{d_spec.input_dims}"
            )
    layout = effective_layout(config, out_dims)
    for i, arr in enumerate(ti_arrays):
        if arr.ndim - 1 != len(layout.segment_dims):
            raise SpecError(f"TI {i} rank does not match segment rank")
        if any(t < s for t, s in zip(arr.shape[:-1], layout.segment_dims)):
            raise SpecError(
                f"TI {i} dims {arr.shape[:-1]} smaller than segments "
                f"{layout.segment_dims}"
            )
    return layout


def train_step(generator, discriminator, ti_arrays, config, step_rng,
               adam_g, adam_d, layout, step, grid_origins=None):
    """One paired D+G update; returns the step's LossReport."""
    n = layout.n
    g_batch = max(1, config.batch_size // n)
    m = g_batch * n

    # --- discriminator update ---
    reals = _sample_crops(
        ti_arrays, layout.segment_dims, m, step_rng, grid_origins
    )
    z = generator.sample_latent(step_rng, g_batch)
    fakes = generator.forward(z, train=True)
    fake_segments = extract_segment_arrays(fakes, layout)
    scores = discriminator.forward(
        np.concatenate([reals, fake_segments], axis=0), train=True, rng=step_rng
    )
    real_scores, fake_scores = scores[:m], scores[m:]
    j_d = d_loss(real_scores, fake_scores)
    if not np.isfinite(j_d):
        raise TrainingDivergedError(step, f"non-finite discriminator loss at step {step}")
    dr, df = d_loss_grad(real_scores, fake_scores)
    discriminator.backward(
        np.concatenate([dr, df]).astype(discriminator.dtype)
    )
    adam_d.step(discriminator.params(), discriminator.grads())

    # --- generator update on fresh fakes ---
    z = generator.sample_latent(step_rng, g_batch)
    fakes = generator.forward(z, train=True)
    fake_segments = extract_segment_arrays(fakes, layout)
    gen_scores = discriminator.forward(fake_segments, train=True, rng=step_rng)
    j_g = g_loss(gen_scores)
    if not np.isfinite(j_g):
        raise TrainingDivergedError(step, f"non-finite generator loss at step {step}")
    dfg = g_loss_grad(gen_scores)
    dsegments = discriminator.backward(dfg.astype(discriminator.dtype))
    dimages = scatter_segment_gradients(dsegments, layout, g_batch)
    generator.backward(dimages)
    adam_g.step(generator.params(), generator.grads())

    return LossReport(
        step=step,
        j_d=j_d,
        j_g=j_g,
        d_real_mean=float(real_scores.mean()),
        d_fake_mean=float(fake_scores.mean()),
    )


def _checkpoint_header(g_spec, d_spec, config, step):
    layout = config.layout
    return {
        "format": "texsyn-checkpoint",
        "step": int(step),
        "mode": config.mode,
        "generator_spec": spec_to_dict(g_spec),
        "discriminator_spec": spec_to_dict(d_spec),
        "layout": None
        if layout is None
        else {
            "output_dims": list(layout.output_dims),
            "segment_dims": list(layout.segment_dims),
            "overlap": list(layout.overlap),
        },
        "adam": {
            "learning_rate": config.learning_rate,
            "beta1": config.adam_beta1,
            "beta2": config.adam_beta2,
            "eps": config.adam_eps,
        },
        "rng_seed": int(config.rng_seed),
    }


def _checkpoint_tensors(generator, discriminator, adam_g, adam_d):
    tensors = {}
    for name, arr in generator.tensors().items():
        tensors[f"g.{name}"] = arr
    for name, arr in discriminator.tensors().items():
        tensors[f"d.{name}"] = arr
    for prefix, adam, model in (
        ("opt_g", adam_g, generator),
        ("opt_d", adam_d, discriminator),
    ):
        for name in model.params():
            if name in adam.m:
                tensors[f"{prefix}.m.{name}"] = adam.m[name]
                tensors[f"{prefix}.v.{name}"] = adam.v[name]
    return tensors


def write_training_checkpoint(path, generator, discriminator, adam_g, adam_d,
                              g_spec, d_spec, config, step):
    header = _checkpoint_header(g_spec, d_spec, config, step)
    header["adam"]["t_g"] = adam_g.t
    header["adam"]["t_d"] = adam_d.t
    save_checkpoint(
        path, header, _checkpoint_tensors(generator, discriminator, adam_g, adam_d)
    )


def load_training_state(path):
    """Rebuild (generator, discriminator, adam_g, adam_d, header) from disk."""
    from .nets import (
        assign_tensors,
        discriminator_spec_from_dict,
        generator_spec_from_dict,
    )

    header, tensors = load_checkpoint(path)
    g_spec = generator_spec_from_dict(header["generator_spec"])
    d_spec = discriminator_spec_from_dict(header["discriminator_spec"])
    generator = build_generator(g_spec, 0)
    discriminator = build_discriminator(d_spec, 0)
    assign_tensors(generator, tensors, "g")
    assign_tensors(discriminator, tensors, "d")
    adam_cfg = header["adam"]
    adam_g = Adam(adam_cfg["learning_rate"], adam_cfg["beta1"], adam_cfg["beta2"], adam_cfg["eps"])
    adam_d = Adam(adam_cfg["learning_rate"], adam_cfg["beta1"], adam_cfg["beta2"], adam_cfg["eps"])
    adam_g.t = int(adam_cfg.get("t_g", header["step"]))
    adam_d.t = int(adam_cfg.get("t_d", header["step"]))
    for prefix, adam, model in (
        ("opt_g", adam_g, generator),
        ("opt_d", adam_d, discriminator),
    ):
        params = model.params()
        for name, p in params.items():
            mkey = f"{prefix}.m.{name}"
            vkey = f"{prefix}.v.{name}"
            if mkey in tensors:
                adam.m[name] = tensors[mkey].astype(p.dtype)
                adam.v[name] = tensors[vkey].astype(p.dtype)
    return generator, discriminator, adam_g, adam_d, header


def _format_float(x):
    return repr(float(x))


def train(tis, g_spec, d_spec, config, out_dir=None, resume_from=None,
          progress=None):
    """Run the adversarial loop; returns final nets, history, checkpoints.

    Deterministic given ``config.rng_seed``: step k consumes only the
    (seed, k) random stream.  When ``out_dir`` is set, emits
    ``loss_history.csv`` plus a checkpoint every ``checkpoint_every`` steps
    and one final checkpoint.
    """
    if not tis:
        raise SpecError("at least one training image is required")
    ti_arrays = _ti_arrays(tis)
    layout = _validate_setup(g_spec, d_spec, config, ti_arrays)

    grid_origins = None
    if config.ti_sampling == "grid":
        grid_origins = []
        for arr in ti_arrays:
            ti_layout = plan_layout(
                arr.shape[:-1], layout.segment_dims, layout.overlap
            )
            grid_origins.append(ti_layout.origins())

    start_step = 0
    if resume_from is not None:
        generator, discriminator, adam_g, adam_d, header = load_training_state(
            resume_from
        )
        start_step = int(header["step"])
    else:
        generator = build_generator(g_spec, config.rng_seed)
        discriminator = build_discriminator(d_spec, config.rng_seed)
        adam_g = Adam(
            config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps
        )
        adam_d = Adam(
            config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps
        )

    result = TrainResult(generator=generator, discriminator=discriminator)

    out_dir_path = None
    csv_file = None
    writer = None
    if out_dir is not None:
        import pathlib

        out_dir_path = pathlib.Path(out_dir)
        out_dir_path.mkdir(parents=True, exist_ok=True)
        csv_mode = "a" if (resume_from is not None and
                           (out_dir_path / "loss_history.csv").exists()) else "w"
        csv_file = open(out_dir_path / "loss_history.csv", csv_mode, newline="")
        writer = csv.writer(csv_file)
        if csv_mode == "w":
            writer.writerow(LOSS_CSV_HEADER)

    def emit_checkpoint(step, name=None):
        if out_dir_path is None:
            return None
        path = out_dir_path / (name or f"checkpoint_{step:06d}.ckpt")
        write_training_checkpoint(
            path, generator, discriminator, adam_g, adam_d,
            g_spec, d_spec, config, step,
        )
        result.checkpoints.append(str(path))
        return path

    try:
        for step in range(start_step + 1, config.epochs + 1):
            step_rng = rngmod.stream(config.rng_seed, rngmod.TRAIN_STEP, step)
            try:
                report = train_step(
                    generator, discriminator, ti_arrays, config, step_rng,
                    adam_g, adam_d, layout, step, grid_origins,
                )
            except TrainingDivergedError:
                emit_checkpoint(step - 1, name="last_good.ckpt")
                raise
            result.history.append(report)
            if writer is not None:
                writer.writerow(
                    [report.step]
                    + [_format_float(v) for v in
                       (report.j_d, report.j_g, report.d_real_mean, report.d_fake_mean)]
                )
                csv_file.flush()
            if progress is not None:
                progress(report)
            if step % config.checkpoint_every == 0:
                emit_checkpoint(step)
        if config.epochs % config.checkpoint_every != 0 or config.epochs == 0:
            emit_checkpoint(config.epochs)
    finally:
        if csv_file is not None:
            csv_file.close()
    return result
