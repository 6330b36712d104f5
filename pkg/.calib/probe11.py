"""Streaming-pool mapper arm (inorm clusters, w64, 6000 steps, refresh 400)."""
import dataclasses, sys, time
import torch
sys.path.insert(0, "src")
torch.set_num_threads(1)
from featsynth import semantic_mapper as sm, training
from featsynth.config import toy_config
from featsynth.gan_core import GanCore
from featsynth.rearranger import Rearranger

cfg0 = toy_config()
ccfg = dataclasses.replace(cfg0.cluster, feature_norm="instance")
cfg = dataclasses.replace(cfg0, cluster=ccfg)
blob = torch.load(".calib/gan_cache.pt", weights_only=False)
gan = GanCore(cfg.gan); gan.load_state_dict(blob["gan"]); gan.eval()
cluster = torch.load(".calib/inorm_cluster.pt", weights_only=False)
images = torch.zeros(1)  # unused in phase-1-only mapper training

segnet = training.fit_segnet_stage(cfg, gan)
held = sm.mint_pairs(gan, cluster, segnet, 64, seed=4242, kind="segmentation")
msched = dataclasses.replace(cfg.mapper_stage, total_steps=6000, phase1_steps=6000, lr=1e-3)
mcfg_u = dataclasses.replace(cfg.mapper, unet_width=64, pool_size=512, pool_refresh=400)
arm_cfg = dataclasses.replace(cfg, mapper_stage=msched, mapper=mcfg_u)
dummy = Rearranger(cfg.gan, cfg.rearranger, cluster.k)
import torch as _t
from featsynth.toydata import make_dataset
scenes = make_dataset(64, cfg.dataset_seed, cfg.gan.img_res)
images = _t.stack([s.image for s in scenes])
t0 = time.time()
mapper, _ = training.train_mapper(arm_cfg, gan, cluster, dummy, segnet, images)
acc = training.mapper_heldout_accuracy(mapper, held)
print(f"M_stream6000: {time.time()-t0:.0f}s heldout acc={acc:.4f}", flush=True)
