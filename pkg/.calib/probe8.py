"""Cluster-variant probe: does feature normalization before K-means make
proxy masks more predictable from the condition mask?

Variants: raw (cached behavior), per-channel whitening over the fit sample,
per-image instance norm.  Metric: (pos, 7x7 patch, classes-present) cell
purity over 2000 scenes, with palette-annotated conditions (clean) and
segnet conditions (as minted).
"""
import sys
import time
from collections import Counter, defaultdict

import numpy as np
import torch
import torch.nn.functional as F

sys.path.insert(0, "src")
torch.set_num_threads(1)

from featsynth import semantic_mapper as sm, training, toydata
from featsynth.cluster_proxy import assign_hard, fit_clusters
from featsynth.config import toy_config
from featsynth.gan_core import GanCore

cfg = toy_config()
blob = torch.load(".calib/gan_cache.pt", weights_only=False)
gan = GanCore(cfg.gan)
gan.load_state_dict(blob["gan"])
gan.eval()
segnet_cluster = blob["cluster"]
segnet = training.fit_segnet_stage(cfg, gan)

r = cfg.gan.proxy_res

# --- collect fit features exactly like fit_cluster_stage ---
g = torch.Generator().manual_seed(cfg.cluster_seed if hasattr(cfg, "cluster_seed") else 7)
with torch.no_grad():
    fit_feats = []
    for _ in range(cfg.cluster.fit_samples):
        z = torch.randn(1, cfg.gan.z_dim, generator=g)
        fit_feats.append(gan.g1(gan.mapping(z))[0])

pix = torch.stack(fit_feats).permute(0, 2, 3, 1).reshape(-1, fit_feats[0].shape[0])
mu, sd = pix.mean(0), pix.std(0) + 1e-8


def inorm(f):
    m = f.mean(dim=(1, 2), keepdim=True)
    s = f.std(dim=(1, 2), keepdim=True) + 1e-8
    return (f - m) / s


variants = {
    "raw": (lambda f: f, fit_feats),
    "whiten": (lambda f: (f - mu.view(-1, 1, 1)) / sd.view(-1, 1, 1),
               [(f - mu.view(-1, 1, 1)) / sd.view(-1, 1, 1) for f in fit_feats]),
    "inorm": (inorm, [inorm(f) for f in fit_feats]),
}

models = {"raw": segnet_cluster}
for name in ("whiten", "inorm"):
    t0 = time.time()
    models[name] = fit_clusters(variants[name][1], cfg.cluster.k, seed=7,
                                tau=cfg.cluster.tau, n_init=16)
    print(f"fit {name} in {time.time()-t0:.0f}s", flush=True)

N = 2000
t0 = time.time()
conds_seg, conds_pal, feats = [], [], []
g = torch.Generator().manual_seed(5)
with torch.no_grad():
    for i in range(N):
        z = torch.randn(1, cfg.gan.z_dim, generator=g)
        w = gan.mapping(z)
        f = gan.g1(w)[0]
        img = gan.g2(f[None])[0]
        stack = sm.build_feature_stack(gan, w)
        conds_seg.append(sm.segnet_predict(stack, segnet, cfg.gan.img_res).data)
        conds_pal.append(toydata.annotate_by_palette(img))
        feats.append(f)
print(f"sampled {N} in {time.time()-t0:.0f}s", flush=True)


def seg16(cond):
    return F.interpolate(cond[None, None].float(), size=(r, r),
                         mode="nearest")[0, 0].long()


def patches(seg, k=7):
    p = k // 2
    padded = F.pad(seg[None, None].float(), (p, p, p, p), value=255.0)
    return F.unfold(padded, kernel_size=k).long()[0].T


def purity(conds, proxies):
    table = defaultdict(Counter)
    for cond, proxy in zip(conds, proxies):
        pat = patches(seg16(cond))
        pr = proxy.flatten().tolist()
        extra = tuple(sorted(set(cond.flatten().tolist())))
        for pos in range(r * r):
            table[(pos, tuple(pat[pos].tolist()), extra)][pr[pos]] += 1
    tot = pure = 0
    for c in table.values():
        n = sum(c.values())
        tot += n
        pure += c.most_common(1)[0][1]
    return pure / tot


for name, (tf, _) in variants.items():
    model = models[name]
    proxies = [assign_hard(tf(f), model) for f in feats]
    p_seg = purity(conds_seg, proxies)
    p_pal = purity(conds_pal, proxies)
    print(f"{name:7s} purity segnet={p_seg:.4f} palette={p_pal:.4f}", flush=True)
