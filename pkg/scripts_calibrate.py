# calibration probe for the desk-scale training experiment (not shipped)
import numpy as np, time, sys
import texsyn
from texsyn import channel_texture, porosity, s2, ensemble_stats
from texsyn.nets import GeneratorSpec, DiscriminatorSpec
from texsyn.training import TrainConfig, train
from texsyn.segmentation import plan_layout
from texsyn.synthesis import SynthesisRequest, generate, seam_scan
from texsyn.training import write_training_checkpoint

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 4000
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 7

ti = channel_texture((64, 64), seed=42)
phi_ti = porosity(ti)
print("TI porosity:", phi_ti, flush=True)

gs = GeneratorSpec(lattice_dims=(8, 8), filters=(32, 16, 8), kernel=5, stride=2)
ds = DiscriminatorSpec(input_dims=(34, 34), filters=(16, 32, 64), kernel=5, stride=2)
layout = plan_layout((64, 64), (34, 34), (4, 4))
cfg = TrainConfig(mode="SAGAN", batch_size=16, epochs=steps, rng_seed=seed,
                  checkpoint_every=100000, layout=layout)
t0 = time.perf_counter()
res = train([ti], gs, ds, cfg, out_dir=f"/tmp/calib_{steps}_{seed}")
print(f"trained {steps} steps in {time.perf_counter()-t0:.1f}s", flush=True)
for r in res.history[:: max(1, steps // 10)]:
    print(f"  step {r.step}: j_d={r.j_d:.4f} j_g={r.j_g:.4f} real={r.d_real_mean:.3f} fake={r.d_fake_mean:.3f}", flush=True)

ckpt = res.checkpoints[-1]
req = SynthesisRequest(checkpoint=ckpt, output_dims=(64, 64), count=20, rng_seed=123)
reals = generate(req)

phis = [porosity(g) for g in reals]
print("realization porosity mean/std:", np.mean(phis), np.std(phis), "TI:", phi_ti, flush=True)

ti_s2 = s2(ti, max_lag=16)
curves = [s2(g, max_lag=16) for g in reals]
ens = ensemble_stats(curves)
mae = np.mean(np.abs(np.array(ens.mean) - np.array(ti_s2.values)))
print("S2 MAE vs TI (r<=16):", mae, flush=True)
print("  TI S2:  ", np.round(ti_s2.values, 3), flush=True)
print("  ens S2: ", np.round(ens.mean, 3), flush=True)

# pairwise Hamming
npx = 64 * 64
dists = []
for i in range(len(reals)):
    for j in range(i + 1, len(reals)):
        dists.append(np.mean(reals[i].data != reals[j].data))
print("pairwise hamming min/mean:", min(dists), np.mean(dists), flush=True)

# seam scan
zmax, zs = [], []
for g in reals:
    rep = seam_scan(g, layout)
    zs.extend([abs(b.z_score) for b in rep.boundaries])
zs = np.array(zs)
print(f"seam |z|: frac<3 = {(zs50 := (zs < 3).mean()):.3f}, max = {zs.max():.2f}", flush=True)

# adversarial control: hard-concatenate two different textures -> seam at 32
a = channel_texture((64, 64), seed=1001).data
b = channel_texture((64, 64), seed=2002).data
hard = np.concatenate([a[:, :32], b[:, 32:]], axis=1)
ctrl = texsyn.binary_grid(hard)
ctrl_layout = plan_layout((64, 64), (32, 32), (0, 0))
rep = seam_scan(ctrl, ctrl_layout)
print("control seams:", [(bb.axis, bb.position, round(bb.z_score, 2)) for bb in rep.boundaries], flush=True)

# scale-up: 128x128, interior window S2 within band at r<=8
req2 = SynthesisRequest(checkpoint=ckpt, output_dims=(128, 128), count=1, rng_seed=321)
big = generate(req2)[0]
print("big dims:", big.dims, flush=True)
inner = texsyn.binary_grid(big.data[32:96, 32:96])
s2_inner = s2(inner, max_lag=8)
lo = np.array(ens.low)[:9]; hi = np.array(ens.high)[:9]
vals = np.array(s2_inner.values)
print("inner S2 in band:", np.all((vals >= lo - 1e-12) & (vals <= hi + 1e-12)),
      list(np.round(vals, 3)), flush=True)
print("band lo:", np.round(lo, 3), flush=True)
print("band hi:", np.round(hi, 3), flush=True)
