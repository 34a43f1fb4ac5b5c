import numpy as np
import pytest

from texsyn import (
    SpecError,
    SynthesisRequest,
    TrainConfig,
    ValueDomain,
    binary_grid,
    channel_texture,
    generate,
    plan_layout,
    seam_scan,
    train,
    whole_image_layout,
)
from texsyn.nets import DiscriminatorSpec, GeneratorSpec
from texsyn.synthesis import load_generator


@pytest.fixture(scope="module")
def tiny_checkpoint(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    ti = channel_texture((32, 32), seed=3, n_channels=4, thickness=2.0)
    g_spec = GeneratorSpec(lattice_dims=(4, 4), filters=(8, 4, 4), kernel=5)
    d_spec = DiscriminatorSpec(input_dims=(32, 32), filters=(4, 8), kernel=5)
    cfg = TrainConfig(mode="DCGAN", batch_size=4, epochs=5, rng_seed=17,
                      checkpoint_every=5)
    train([ti], g_spec, d_spec, cfg, out_dir=out)
    return str(out / "checkpoint_000005.ckpt")


def test_generate_dims_exact_and_binary(tiny_checkpoint):
    req = SynthesisRequest(checkpoint=tiny_checkpoint, output_dims=(32, 32),
                           count=3, rng_seed=1)
    grids = generate(req)
    assert len(grids) == 3
    for g in grids:
        assert g.dims == (32, 32)
        assert g.value_domain is ValueDomain.Binary01


def test_generate_enlarged_output(tiny_checkpoint):
    req = SynthesisRequest(checkpoint=tiny_checkpoint, output_dims=(64, 48),
                           count=1, rng_seed=1)
    assert generate(req)[0].dims == (64, 48)


def test_generate_invalid_dims_lists_nearest(tiny_checkpoint):
    req = SynthesisRequest(checkpoint=tiny_checkpoint, output_dims=(300, 300),
                           count=1, rng_seed=1)
    with pytest.raises(SpecError) as err:
        generate(req)
    assert "296" in str(err.value) and "304" in str(err.value)


def test_generate_seed_determinism(tiny_checkpoint):
    req = SynthesisRequest(checkpoint=tiny_checkpoint, output_dims=(32, 32),
                           count=2, rng_seed=5)
    a = generate(req)
    b = generate(req)
    assert all(x == y for x, y in zip(a, b))
    c = generate(
        SynthesisRequest(checkpoint=tiny_checkpoint, output_dims=(32, 32),
                         count=2, rng_seed=6)
    )
    assert any(not np.array_equal(x.data, y.data) for x, y in zip(a, c))
    # realizations within a request are mutually distinct
    assert not np.array_equal(a[0].data, a[1].data)


def test_generate_raw_mode(tiny_checkpoint):
    req = SynthesisRequest(checkpoint=tiny_checkpoint, output_dims=(32, 32),
                           count=1, rng_seed=2, raw=True)
    g = generate(req)[0]
    assert g.value_domain is ValueDomain.ModelRange


def test_load_generator_header(tiny_checkpoint):
    gen, header = load_generator(tiny_checkpoint)
    assert header["step"] == 5
    assert gen.spec.lattice_dims == (4, 4)


# --- seam_scan -----------------------------------------------------------------

def test_seam_scan_constant_grid_zero_discrepancy():
    g = binary_grid(np.ones((64, 64), dtype=np.uint8))
    layout = plan_layout((64, 64), (34, 34), (4, 4))
    report = seam_scan(g, layout)
    assert len(report.boundaries) == 2
    for b in report.boundaries:
        assert b.discrepancy == 0.0
        assert b.z_score == 0.0


def test_seam_scan_detects_hard_concatenation():
    a = channel_texture((128, 128), seed=1001).data
    b = channel_texture((128, 128), seed=2002).data
    hard = np.concatenate([a[:, :64], b[:, 64:]], axis=1)
    layout = plan_layout((128, 128), (128, 64), (0, 0))
    report = seam_scan(binary_grid(hard), layout)
    assert len(report.boundaries) == 1
    assert report.boundaries[0].z_score > 3.0


def test_seam_scan_stationary_grid_stays_quiet():
    rng = np.random.default_rng(77)
    quiet = 0
    for _ in range(10):
        g = binary_grid((rng.random((96, 96)) < 0.3).astype(np.uint8))
        layout = plan_layout((96, 96), (52, 52), (8, 8))
        report = seam_scan(g, layout)
        quiet += all(abs(b.z_score) < 3 for b in report.boundaries)
    assert quiet >= 9


def test_seam_scan_window_too_large():
    g = binary_grid(np.zeros((16, 16), dtype=np.uint8))
    layout = plan_layout((16, 16), (10, 10), (4, 4))
    with pytest.raises(SpecError):
        seam_scan(g, layout, max_lag=6)


def test_seam_scan_requires_matching_dims():
    g = binary_grid(np.zeros((20, 20), dtype=np.uint8))
    layout = plan_layout((16, 16), (10, 10), (4, 4))
    with pytest.raises(SpecError):
        seam_scan(g, layout)


def test_seam_scan_whole_image_no_boundaries():
    g = binary_grid(np.zeros((16, 16), dtype=np.uint8))
    report = seam_scan(g, whole_image_layout((16, 16)), max_lag=4)
    assert report.boundaries == ()
    assert report.max_abs_z == 0.0
