"""Estimate the best achievable mapper accuracy: for each (proxy pixel
position, downsampled condition class) cell, the majority proxy cluster over
training pairs is the Bayes-style predictor available to any cond->proxy map."""
import sys
import time

import torch
import torch.nn.functional as F

sys.path.insert(0, "src")
torch.set_num_threads(1)

from featsynth import semantic_mapper as sm, training
from featsynth.config import toy_config
from featsynth.gan_core import GanCore

cfg = toy_config()
blob = torch.load(".calib/gan_cache.pt", weights_only=False)
gan = GanCore(cfg.gan)
gan.load_state_dict(blob["gan"])
gan.eval()
cluster = blob["cluster"]

t0 = time.time()
segnet = training.fit_segnet_stage(cfg, gan)
train = sm.mint_pairs(gan, cluster, segnet, 192, seed=5, kind="segmentation")
held = sm.mint_pairs(gan, cluster, segnet, 64, seed=4242, kind="segmentation")
print(f"minted in {time.time()-t0:.0f}s", flush=True)

r = cfg.gan.proxy_res
L = cfg.mapper.seg_classes
K = cluster.k

counts = torch.zeros(r * r, L, K)
for cond, proxy in train:
    seg16 = F.interpolate(cond.data[None, None].float(), size=(r, r), mode="nearest")[0, 0].long()
    counts[torch.arange(r * r), seg16.flatten(), :] += F.one_hot(proxy.flatten(), K).float()

majority = counts.argmax(dim=2)  # [r*r, L]

accs = []
for cond, proxy in held:
    seg16 = F.interpolate(cond.data[None, None].float(), size=(r, r), mode="nearest")[0, 0].long()
    pred = majority[torch.arange(r * r), seg16.flatten()]
    accs.append(float((pred == proxy.flatten()).float().mean()))
print(f"(position, class)-majority heldout acc: {sum(accs)/len(accs):.4f}")

# how style-dependent are the clusters? same position+class across pairs
ent_num = counts / counts.sum(dim=2, keepdim=True).clamp(min=1)
purity = ent_num.max(dim=2).values
mask = counts.sum(dim=2) > 0
print(f"mean cell purity over training pairs: {float(purity[mask].mean()):.4f}")
