"""Command-line entry point: train, generate, evaluate, bench, validate-config.

All subcommands are driven by one JSON configuration file (see
docs/config.md for the schema and defaults).  Exit codes: 0 success, 2
configuration error, 3 runtime error (including training divergence).
Every configuration complaint names the JSON path of the offending key.
"""

import argparse
import json
import os
import pathlib
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, TexsynError, TrainingDivergedError
from .grids import load_texture, save_texture
from .metrics import (
    RADIAL,
    c2 as c2_curve,
    ensemble_stats,
    s2 as s2_curve,
    write_metric_csv,
)
from .nets import (
    DiscriminatorSpec,
    GeneratorSpec,
    discriminator_spec_from_dict,
    generator_spec_from_dict,
    segment_field_warnings,
)
from .segmentation import plan_layout
from .synthesis import SynthesisRequest, generate
from .training import TrainConfig, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _require(mapping, key, path):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: required key missing")
    return mapping[key]


def _as_int_list(value, path, length=None):
    if not isinstance(value, (list, tuple)) or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in value
    ):
        raise ConfigError(f"{path}: must be a list of integers")
    if length is not None and len(value) != length:
        raise ConfigError(f"{path}: expected {length} entries, got {len(value)}")
    return [int(v) for v in value]


@dataclass
class RunConfig:
    mode: str
    ti_paths: list
    out_dir: str
    generator_spec: GeneratorSpec
    discriminator_spec: DiscriminatorSpec
    train_config: TrainConfig
    synthesis: dict
    metrics: dict
    bench: dict
    warnings: list


def load_config(path, seed_override=None, out_override=None):
    """Parse and cross-validate a run configuration."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")

    mode = raw.get("mode", "SAGAN")
    if mode not in ("DCGAN", "SAGAN"):
        raise ConfigError(f"mode: must be 'DCGAN' or 'SAGAN', got {mode!r}")

    ti_paths = raw.get("ti_paths", [])
    if not isinstance(ti_paths, list) or not all(isinstance(p, str) for p in ti_paths):
        raise ConfigError("ti_paths: must be a list of file paths")

    out_dir = out_override or raw.get("out_dir", "texsyn_out")

    gen_raw = _require(raw, "generator", "(root)")
    try:
        g_spec = generator_spec_from_dict(gen_raw)
    except (TexsynError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"generator: {exc}")

    dis_raw = _require(raw, "discriminator", "(root)")
    try:
        d_spec = discriminator_spec_from_dict(dis_raw)
    except (TexsynError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"discriminator: {exc}")

    ndim = len(g_spec.lattice_dims)
    if len(d_spec.input_dims) != ndim:
        raise ConfigError(
            "discriminator.input_dims: rank differs from generator.lattice_dims"
        )

    tr = raw.get("training", {})
    out_dims = g_spec.output_dims()
    warnings = []
    layout = None
    if mode == "SAGAN":
        segment = _as_int_list(
            _require(tr, "segment", "training"), "training.segment", ndim
        )
        overlap = _as_int_list(
            tr.get("overlap", [0] * ndim), "training.overlap", ndim
        )
        try:
            layout = plan_layout(out_dims, segment, overlap)
        except TexsynError as exc:
            raise ConfigError(f"training.segment: {exc}")
        if layout.segment_dims != d_spec.input_dims:
            raise ConfigError(
                f"discriminator.input_dims: {list(d_spec.input_dims)} does not "
                f"equal training.segment {list(layout.segment_dims)}"
            )
        warnings.extend(segment_field_warnings(g_spec, layout.segment_dims))
    else:
        if out_dims != d_spec.input_dims:
            raise ConfigError(
                f"discriminator.input_dims: DCGAN requires the generator output "
                f"{list(out_dims)}, got {list(d_spec.input_dims)}"
            )

    seed = int(tr.get("rng_seed", 0))
    if seed_override is not None:
        seed = int(seed_override)
    try:
        train_config = TrainConfig(
            mode=mode,
            batch_size=int(tr.get("batch_size", 32)),
            epochs=int(tr.get("epochs", 1000)),
            learning_rate=float(tr.get("learning_rate", 2e-4)),
            adam_beta1=float(tr.get("adam_beta1", 0.5)),
            adam_beta2=float(tr.get("adam_beta2", 0.999)),
            adam_eps=float(tr.get("adam_eps", 1e-8)),
            rng_seed=seed,
            checkpoint_every=int(tr.get("checkpoint_every", 1000)),
            layout=layout,
            ti_sampling=str(tr.get("ti_sampling", "random")),
        )
    except TexsynError as exc:
        raise ConfigError(f"training: {exc}")

    syn = dict(raw.get("synthesis", {}))
    syn.setdefault("output_dims", list(out_dims))
    syn.setdefault("count", 1)
    syn.setdefault("binarize_threshold", 0.0)
    syn_dims = _as_int_list(syn["output_dims"], "synthesis.output_dims", ndim)
    try:
        g_spec.lattice_for_output(syn_dims)
    except TexsynError as exc:
        raise ConfigError(f"synthesis.output_dims: {exc}")
    syn["output_dims"] = syn_dims
    syn["rng_seed"] = seed if seed_override is not None else int(
        syn.get("rng_seed", seed)
    )

    met = dict(raw.get("metrics", {}))
    met.setdefault("averaging", RADIAL)
    met.setdefault("boundary", "truncated")
    met.setdefault("connectivity", "face")
    if met["averaging"] not in (RADIAL, "directional_x", "directional_y",
                                "directional_z"):
        raise ConfigError(f"metrics.averaging: unknown value {met['averaging']!r}")
    if met["boundary"] not in ("truncated", "periodic"):
        raise ConfigError(f"metrics.boundary: unknown value {met['boundary']!r}")
    if met["connectivity"] not in ("face", "full"):
        raise ConfigError(f"metrics.connectivity: unknown value {met['connectivity']!r}")
    if "max_lag" in met and (not isinstance(met["max_lag"], int) or met["max_lag"] < 1):
        raise ConfigError("metrics.max_lag: must be a positive integer")

    bench = dict(raw.get("bench", {}))
    bench.setdefault("steps", 150)
    if not isinstance(bench["steps"], int) or bench["steps"] < 2:
        raise ConfigError("bench.steps: must be an integer >= 2")

    return RunConfig(
        mode=mode,
        ti_paths=list(ti_paths),
        out_dir=str(out_dir),
        generator_spec=g_spec,
        discriminator_spec=d_spec,
        train_config=train_config,
        synthesis=syn,
        metrics=met,
        bench=bench,
        warnings=warnings,
    )


def _load_tis(config):
    if not config.ti_paths:
        raise ConfigError("ti_paths: at least one training image is required")
    tis = []
    for p in config.ti_paths:
        try:
            tis.append(load_texture(p))
        except TexsynError as exc:
            raise ConfigError(f"ti_paths: {exc}")
        except OSError as exc:
            raise ConfigError(f"ti_paths: cannot read {p} ({exc})")
    return tis


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_validate(config):
    for w in config.warnings:
        print(f"warning: {w}")
    print("config OK")
    return EXIT_OK


def cmd_train(config):
    tis = _load_tis(config)
    result = train(
        tis,
        config.generator_spec,
        config.discriminator_spec,
        config.train_config,
        out_dir=config.out_dir,
    )
    last = result.history[-1] if result.history else None
    if last is not None:
        print(
            f"trained {last.step} steps: j_d={last.j_d:.4f} j_g={last.j_g:.4f} "
            f"d_real={last.d_real_mean:.3f} d_fake={last.d_fake_mean:.3f}"
        )
    print(f"checkpoints: {len(result.checkpoints)} in {config.out_dir}")
    return EXIT_OK


def _latest_checkpoint(out_dir):
    candidates = sorted(pathlib.Path(out_dir).glob("checkpoint_*.ckpt"))
    if not candidates:
        raise ConfigError(
            f"synthesis.checkpoint: none given and no checkpoint found in {out_dir}"
        )
    return str(candidates[-1])


def cmd_generate(config, raw=False):
    syn = config.synthesis
    ckpt = syn.get("checkpoint") or _latest_checkpoint(config.out_dir)
    request = SynthesisRequest(
        checkpoint=ckpt,
        output_dims=syn["output_dims"],
        count=int(syn["count"]),
        rng_seed=int(syn["rng_seed"]),
        binarize_threshold=float(syn["binarize_threshold"]),
        raw=raw,
    )
    grids = generate(request)
    out = pathlib.Path(config.out_dir) / "realizations"
    out.mkdir(parents=True, exist_ok=True)
    ext = "png" if len(request.output_dims) == 2 else "sgrd"
    if raw:
        # diagnostics mode: keep model-range values in an .npy sidecar
        for i, g in enumerate(grids):
            np.save(out / f"real_{i:04}.raw.npy", g.data)
        print(f"wrote {len(grids)} raw realizations to {out}")
        return EXIT_OK
    for i, g in enumerate(grids):
        save_texture(g, out / f"real_{i:04}.{ext}")
    print(f"wrote {len(grids)} realizations to {out}")
    return EXIT_OK


def _metric_pair(grid, options, max_lag):
    kwargs = dict(
        max_lag=max_lag,
        averaging=options["averaging"],
        boundary=options["boundary"],
    )
    curve_s2 = s2_curve(grid, **kwargs)
    curve_c2 = c2_curve(grid, connectivity=options["connectivity"], **kwargs)
    return curve_s2, curve_c2


def evaluate_run(realizations_dir, ti_paths, options, out_dir):
    """Compute per-grid and ensemble statistics for realizations vs TIs.

    Writes ensemble CSVs for both populations, per-realization curve CSVs,
    and a summary JSON with porosity statistics and the mean absolute
    error between ensemble-mean curves.
    """
    real_dir = pathlib.Path(realizations_dir)
    files = sorted(
        p for p in real_dir.iterdir()
        if p.suffix.lower() in (".png", ".sgrd")
    ) if real_dir.is_dir() else []
    if not files:
        raise FileNotFoundError(f"no realization files in {realizations_dir}")
    realizations = [load_texture(p) for p in files]
    tis = [load_texture(p) for p in ti_paths]

    all_grids = realizations + tis
    lag_cap = min(min(g.dims) for g in all_grids) // 2
    max_lag = min(int(options.get("max_lag", lag_cap)), lag_cap)

    threads = os.environ.get("TEXSYN_THREADS")
    workers = max(1, int(threads)) if threads else min(8, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        real_pairs = list(
            pool.map(lambda g: _metric_pair(g, options, max_lag), realizations)
        )
        ti_pairs = list(pool.map(lambda g: _metric_pair(g, options, max_lag), tis))

    out = pathlib.Path(out_dir)
    curves_dir = out / "curves"
    curves_dir.mkdir(parents=True, exist_ok=True)
    for path, (cs2, cc2) in zip(files, real_pairs):
        write_metric_csv(curves_dir / f"{path.stem}_s2.csv", ensemble_stats([cs2]))
        write_metric_csv(curves_dir / f"{path.stem}_c2.csv", ensemble_stats([cc2]))

    real_s2 = ensemble_stats([p[0] for p in real_pairs])
    real_c2 = ensemble_stats([p[1] for p in real_pairs])
    ti_s2 = ensemble_stats([p[0] for p in ti_pairs])
    ti_c2 = ensemble_stats([p[1] for p in ti_pairs])
    write_metric_csv(out / "realizations_s2.csv", real_s2)
    write_metric_csv(out / "realizations_c2.csv", real_c2)
    write_metric_csv(out / "tis_s2.csv", ti_s2)
    write_metric_csv(out / "tis_c2.csv", ti_c2)

    def mae(a, b):
        return float(np.mean(np.abs(np.array(a.mean) - np.array(b.mean))))

    summary = {
        "n_realizations": len(realizations),
        "n_tis": len(tis),
        "max_lag": max_lag,
        "porosity_realizations_mean": real_s2.porosity_mean,
        "porosity_realizations_std": real_s2.porosity_std,
        "porosity_tis_mean": ti_s2.porosity_mean,
        "porosity_tis_std": ti_s2.porosity_std,
        "s2_mae": mae(real_s2, ti_s2),
        "c2_mae": mae(real_c2, ti_c2),
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def cmd_evaluate(config):
    real_dir = pathlib.Path(config.out_dir) / "realizations"
    try:
        summary = evaluate_run(
            real_dir, config.ti_paths, config.metrics,
            pathlib.Path(config.out_dir) / "eval",
        )
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(
        f"evaluated {summary['n_realizations']} realizations vs "
        f"{summary['n_tis']} TIs: s2_mae={summary['s2_mae']:.4f} "
        f"c2_mae={summary['c2_mae']:.4f} "
        f"porosity {summary['porosity_realizations_mean']:.3f} vs "
        f"{summary['porosity_tis_mean']:.3f}"
    )
    return EXIT_OK


def bench_run(config, steps=None):
    """Median per-step wall time for DCGAN vs SAGAN at the same output size."""
    from dataclasses import replace

    tis = _load_tis(config)
    steps = int(steps or config.bench["steps"])
    out_dims = config.generator_spec.output_dims()
    rows = []
    for mode in ("DCGAN", "SAGAN"):
        if mode == "SAGAN" and config.train_config.layout is None:
            raise ConfigError("training.segment: bench needs a SAGAN layout")
        d_spec = (
            config.discriminator_spec
            if mode == "SAGAN"
            else DiscriminatorSpec(
                input_dims=out_dims,
                filters=config.discriminator_spec.filters,
                kernel=config.discriminator_spec.kernel,
                stride=config.discriminator_spec.stride,
                dropout_rate=config.discriminator_spec.dropout_rate,
            )
        )
        t_config = replace(
            config.train_config,
            mode=mode,
            epochs=steps,
            checkpoint_every=steps + 1,
            layout=config.train_config.layout if mode == "SAGAN" else None,
        )
        times = []
        last = [time.perf_counter()]

        def tick(report, last=last, times=times):
            now = time.perf_counter()
            times.append(now - last[0])
            last[0] = now

        train(
            tis, config.generator_spec, d_spec, t_config,
            out_dir=None, progress=tick,
        )
        if len(times) >= 150:
            window = times[49:150]
        else:
            window = times[len(times) // 2:]
        segment = (
            list(t_config.layout.segment_dims) if t_config.layout else list(out_dims)
        )
        rows.append(
            {
                "mode": mode,
                "generated_dims": "x".join(str(d) for d in out_dims),
                "segment_dims": "x".join(str(d) for d in segment),
                "steps": len(times),
                "median_step_seconds": float(np.median(window)),
            }
        )
    return rows


def cmd_bench(config):
    rows = bench_run(config)
    out = pathlib.Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "bench.csv"
    with open(path, "w", newline="") as fh:
        fh.write("mode,generated_dims,segment_dims,steps,median_step_seconds\n")
        for row in rows:
            fh.write(
                f"{row['mode']},{row['generated_dims']},{row['segment_dims']},"
                f"{row['steps']},{row['median_step_seconds']!r}\n"
            )
    dc = next(r for r in rows if r["mode"] == "DCGAN")
    sa = next(r for r in rows if r["mode"] == "SAGAN")
    ratio = sa["median_step_seconds"] / dc["median_step_seconds"]
    print(
        f"DCGAN {dc['median_step_seconds']:.4f}s/step, "
        f"SAGAN {sa['median_step_seconds']:.4f}s/step, "
        f"ratio {ratio:.3f} ({(ratio - 1.0) * 100.0:+.1f}%)"
    )
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="texsyn",
        description="Segment-assembled GAN texture synthesis and evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("train", "train a generator/discriminator pair"),
        ("generate", "draw realizations from a trained checkpoint"),
        ("evaluate", "compare realization statistics against the TIs"),
        ("bench", "time DCGAN vs SAGAN training steps at one output size"),
        ("validate-config", "check a configuration and exit"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="override config out_dir")
        if name == "generate":
            p.add_argument(
                "--raw", action="store_true",
                help="emit model-range values instead of binarized textures",
            )
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        config = load_config(args.config, seed_override=args.seed,
                             out_override=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "validate-config":
            return cmd_validate(config)
        if args.command == "train":
            return cmd_train(config)
        if args.command == "generate":
            return cmd_generate(config, raw=getattr(args, "raw", False))
        if args.command == "evaluate":
            return cmd_evaluate(config)
        if args.command == "bench":
            return cmd_bench(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except TexsynError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    parser.error(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
