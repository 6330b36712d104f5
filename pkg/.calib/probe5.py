"""Ceiling probe v2: can local mask CONTEXT (not just pointwise class)
predict the proxy cluster?  Majority predictor keyed on (position, k x k
patch of the 16^2-downsampled condition), with backoff to smaller keys.
If this reaches ~0.9 the mapper just needs more context/capacity."""
import sys
import time
from collections import Counter, defaultdict

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
train = sm.mint_pairs(gan, cluster, segnet, 2000, seed=5, kind="segmentation")
held = sm.mint_pairs(gan, cluster, segnet, 128, seed=4242, kind="segmentation")
print(f"minted {len(train)}+{len(held)} in {time.time()-t0:.0f}s", flush=True)

r = cfg.gan.proxy_res
K = cluster.k


def seg16(cond):
    return F.interpolate(cond.data[None, None].float(), size=(r, r),
                         mode="nearest")[0, 0].long()


def patches(seg, k):
    """[r*r, k*k] neighborhood labels, padded with 255."""
    p = k // 2
    padded = F.pad(seg[None, None].float(), (p, p, p, p), value=255.0)
    u = F.unfold(padded, kernel_size=k).long()[0].T  # [r*r? no: [(r)*(r), k*k]]
    return u


tables = {k: defaultdict(Counter) for k in (1, 3, 5, 7)}
for cond, proxy in train:
    s = seg16(cond)
    pr = proxy.flatten().tolist()
    for k in tables:
        pat = patches(s, k)
        for pos in range(r * r):
            tables[k][(pos, tuple(pat[pos].tolist()))][pr[pos]] += 1
print(f"tables built in {time.time()-t0:.0f}s", flush=True)

maj = {k: {key: c.most_common(1)[0][0] for key, c in tb.items()}
       for k, tb in tables.items()}

for top in (3, 5, 7):
    order = [k for k in (top, 5, 3, 1) if k <= top]
    correct = total = 0
    backoffs = Counter()
    for cond, proxy in held:
        s = seg16(cond)
        pr = proxy.flatten().tolist()
        pats = {k: patches(s, k) for k in order}
        for pos in range(r * r):
            pred = None
            for k in order:
                key = (pos, tuple(pats[k][pos].tolist()))
                if key in maj[k]:
                    pred = maj[k][key]
                    backoffs[k] += 1
                    break
            if pred is None:
                pred = 0
                backoffs[0] += 1
            correct += int(pred == pr[pos])
            total += 1
    print(f"patch<= {top}x{top} majority heldout acc: {correct/total:.4f} "
          f"(backoff use: {dict(backoffs)})", flush=True)

# purity of the largest-context cells: high purity => layout determines cluster
for k in (5, 7):
    tot = pure = 0
    for c in tables[k].values():
        n = sum(c.values())
        tot += n
        pure += c.most_common(1)[0][1]
    print(f"{k}x{k} cell purity (train): {pure/tot:.4f}")
