"""Deep-bottleneck mapper with cosine decay: static pool 2048, 8000 steps.
Prints train-pool accuracy vs held-out to separate optimization gap from
information limit."""
import dataclasses, sys, time
import torch
sys.path.insert(0, "src")
torch.set_num_threads(1)
from featsynth import semantic_mapper as sm, training
from featsynth.config import toy_config
from featsynth.gan_core import GanCore
from featsynth.rearranger import Rearranger
from featsynth.toydata import make_dataset

cfg0 = toy_config()
ccfg = dataclasses.replace(cfg0.cluster, feature_norm="instance")
cfg = dataclasses.replace(cfg0, cluster=ccfg)
blob = torch.load(".calib/gan_cache.pt", weights_only=False)
gan = GanCore(cfg.gan); gan.load_state_dict(blob["gan"]); gan.eval()
cluster = torch.load(".calib/inorm_cluster.pt", weights_only=False)
scenes = make_dataset(64, cfg.dataset_seed, cfg.gan.img_res)
images = torch.stack([s.image for s in scenes])

segnet = training.fit_segnet_stage(cfg, gan)
held = sm.mint_pairs(gan, cluster, segnet, 64, seed=4242, kind="segmentation")
train_probe = sm.mint_pairs(gan, cluster, segnet, 64, seed=cfg.mapper_stage.seed,
                            kind="segmentation")  # same seed family as pool head
msched = dataclasses.replace(cfg.mapper_stage, total_steps=8000, phase1_steps=8000, lr=1e-3)
mcfg_u = dataclasses.replace(cfg.mapper, unet_width=64, pool_size=2048, pool_refresh=0)
arm_cfg = dataclasses.replace(cfg, mapper_stage=msched, mapper=mcfg_u)
dummy = Rearranger(cfg.gan, cfg.rearranger, cluster.k)
t0 = time.time()
mapper, _ = training.train_mapper(arm_cfg, gan, cluster, dummy, segnet, images)
acc_h = training.mapper_heldout_accuracy(mapper, held)
acc_t = training.mapper_heldout_accuracy(mapper, train_probe)
print(f"M_deep8000: {time.time()-t0:.0f}s heldout={acc_h:.4f} train={acc_t:.4f}", flush=True)
