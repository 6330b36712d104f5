"""Ceiling probe v3: separate segnet noise from genuine cluster ambiguity.

Arms:
  A. condition = segnet_predict (as minted)          [baseline, purity ~0.77]
  B. condition = nearest-palette annotation of image [removes segnet noise]
  C. key additionally includes the set of classes present [global context]
Purity of (pos, 7x7 patch [, extras]) cells over 2000 pairs is an upper
bound on any mapper limited to that information.
"""
import sys
import time
from collections import Counter, defaultdict

import torch
import torch.nn.functional as F

sys.path.insert(0, "src")
torch.set_num_threads(1)

from featsynth import semantic_mapper as sm, training, toydata
from featsynth.cluster_proxy import assign_hard
from featsynth.config import toy_config
from featsynth.gan_core import GanCore

cfg = toy_config()
blob = torch.load(".calib/gan_cache.pt", weights_only=False)
gan = GanCore(cfg.gan)
gan.load_state_dict(blob["gan"])
gan.eval()
cluster = blob["cluster"]
segnet = training.fit_segnet_stage(cfg, gan)

r = cfg.gan.proxy_res
K = cluster.k
N = 2000

t0 = time.time()
pairs_seg, pairs_pal = [], []
g = torch.Generator().manual_seed(5)
with torch.no_grad():
    for i in range(N):
        z = torch.randn(1, cfg.gan.z_dim, generator=g)
        w = gan.mapping(z)
        f = gan.g1(w)[0]
        proxy = assign_hard(f, cluster)
        img = gan.g2(f[None])[0]
        stack = sm.build_feature_stack(gan, w)
        cond_seg = sm.segnet_predict(stack, segnet, cfg.gan.img_res).data
        cond_pal = toydata.annotate_by_palette(img)
        pairs_seg.append((cond_seg, proxy))
        pairs_pal.append((cond_pal, proxy))
print(f"minted {N} in {time.time()-t0:.0f}s", flush=True)


def seg16(cond):
    return F.interpolate(cond[None, None].float(), size=(r, r),
                         mode="nearest")[0, 0].long()


def patches(seg, k=7):
    p = k // 2
    padded = F.pad(seg[None, None].float(), (p, p, p, p), value=255.0)
    return F.unfold(padded, kernel_size=k).long()[0].T


def purity(pairs, with_global=False):
    table = defaultdict(Counter)
    for cond, proxy in pairs:
        s = seg16(cond)
        pat = patches(s)
        pr = proxy.flatten().tolist()
        extra = tuple(sorted(set(cond.flatten().tolist()))) if with_global else ()
        for pos in range(r * r):
            table[(pos, tuple(pat[pos].tolist()), extra)][pr[pos]] += 1
    tot = pure = 0
    for c in table.values():
        n = sum(c.values())
        tot += n
        pure += c.most_common(1)[0][1]
    return pure / tot


print(f"A segnet cond, 7x7 purity:          {purity(pairs_seg):.4f}", flush=True)
print(f"B palette cond, 7x7 purity:         {purity(pairs_pal):.4f}", flush=True)
print(f"C segnet + classes-present purity:  {purity(pairs_seg, True):.4f}", flush=True)
print(f"D palette + classes-present purity: {purity(pairs_pal, True):.4f}", flush=True)
