"""Diagnose toy GAN pretraining: saturation, diversity, FSD trajectory."""
import sys
import time

import torch

sys.path.insert(0, "src")
torch.set_num_threads(1)

from featsynth import training
from featsynth.config import toy_config
from featsynth.metrics import feature_stats_distance
from featsynth.toydata import make_dataset


def probe(lr, steps=800, r1w=None, batch=None):
    cfg = toy_config()
    cfg.pretrain.total_steps = steps
    cfg.pretrain.lr = lr
    cfg.pretrain.eval_every = 200
    if batch:
        cfg.pretrain.batch_size = batch
    if r1w is not None:
        cfg.gan.r1_weight = r1w
    scenes = make_dataset(512, cfg.dataset_seed, cfg.gan.img_res)
    images = torch.stack([s.image for s in scenes])
    t0 = time.time()
    gan, log = training.pretrain_gan(cfg, images)
    dt = time.time() - t0
    with torch.no_grad():
        z = torch.randn(64, cfg.gan.z_dim, generator=torch.Generator().manual_seed(5))
        fake = gan.g2(gan.g1(gan.mapping(z)))
    sat = (fake.abs() > 0.99).float().mean().item()
    # diversity across samples: std over batch at each pixel
    div = fake.std(dim=0).mean().item()
    fsd = [(s, round(v, 3)) for s, v in log.values("fsd")]
    d_adv = [round(v, 3) for _, v in log.values("d_adv")][::4]
    g_adv = [round(v, 3) for _, v in log.values("g_adv")][::4]
    print(f"lr={lr} r1w={r1w} batch={batch} time={dt:.0f}s sat={sat:.3f} div={div:.3f}")
    print("  fsd:", fsd)
    print("  d_adv:", d_adv)
    print("  g_adv:", g_adv, flush=True)


if __name__ == "__main__":
    for lr in (0.002, 0.0005):
        probe(lr)
