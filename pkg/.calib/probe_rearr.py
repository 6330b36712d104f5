"""Rearranger hyperparameter probe against a cached pretrained GAN."""
import dataclasses
import pickle
import sys
import time
from pathlib import Path

import torch

sys.path.insert(0, "src")
torch.set_num_threads(1)

from featsynth import training
from featsynth.config import toy_config
from featsynth.gan_core import GanCore
from featsynth.toydata import make_dataset

CACHE = Path(".calib/gan_cache.pt")
cfg = toy_config()
scenes = make_dataset(cfg.dataset_size, cfg.dataset_seed, cfg.gan.img_res)
images = torch.stack([s.image for s in scenes])

if CACHE.exists():
    blob = torch.load(CACHE, weights_only=False)
    gan = GanCore(cfg.gan)
    gan.load_state_dict(blob["gan"])
    gan.eval()
    cluster = blob["cluster"]
    print("loaded cached GAN+cluster", flush=True)
else:
    t0 = time.time()
    gan, _ = training.pretrain_gan(cfg, images)
    cluster = training.fit_cluster_stage(cfg, gan)
    torch.save({"gan": gan.state_dict(), "cluster": cluster}, CACHE)
    print(f"pretrained+clustered in {time.time()-t0:.0f}s", flush=True)

ARMS = {
    "A_base_lr5e-4": dict(lr=5e-4),
    "B_lr2e-3": dict(lr=2e-3),
    "C_lr1e-3": dict(lr=1e-3),
    "D_lr1e-3_mask10": dict(lr=1e-3, lambda_mask=10.0),
    "E_lr2e-3_mask10": dict(lr=2e-3, lambda_mask=10.0),
}

only = sys.argv[1:] or list(ARMS)
for name in only:
    opts = ARMS[name]
    sched = dataclasses.replace(cfg.rearrange_stage, total_steps=1200,
                                phase1_steps=1200, eval_every=300,
                                lr=opts.get("lr", cfg.rearrange_stage.lr))
    arm_cfg = dataclasses.replace(cfg, rearrange_stage=sched)
    weights = dataclasses.replace(cfg.loss,
                                  lambda_mask=opts.get("lambda_mask", cfg.loss.lambda_mask))
    t0 = time.time()
    rearr, log = training.train_rearranger(arm_cfg, gan, cluster, images, weights=weights)
    evals = {s: (round(v, 3)) for s, v in log.values("eval_self_miou")}
    crosses = {s: (round(v, 3)) for s, v in log.values("eval_cross_miou")}
    fsd = {s: (round(v, 3)) for s, v in log.values("eval_fsd")}
    print(f"{name}: {time.time()-t0:.0f}s self={evals} cross={crosses} fsd={fsd}", flush=True)
