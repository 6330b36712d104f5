"""Full toy-scale calibration: run the pipeline and print every acceptance
quantity with timings."""
import sys
import time

import torch

sys.path.insert(0, "src")
torch.set_num_threads(1)

from featsynth import losses, training
from featsynth import semantic_mapper as sm
from featsynth.cluster_proxy import assign_hard
from featsynth.config import toy_config
from featsynth.metrics import miou, pixel_accuracy
from featsynth.synthesis import exemplar, synthesize
from featsynth.toydata import NUM_CLASSES, annotate_by_palette, gen_scene, make_dataset
from featsynth.semantic_mapper import ConditionRaster

t00 = time.time()
cfg = toy_config()
scenes = make_dataset(cfg.dataset_size, cfg.dataset_seed, cfg.gan.img_res)
images = torch.stack([s.image for s in scenes])
print(f"dataset: {time.time()-t00:.0f}s", flush=True)

t0 = time.time()
gan, glog = training.pretrain_gan(cfg, images)
print(f"pretrain: {time.time()-t0:.0f}s fsd: {[(s, round(v,3)) for s,v in glog.values('fsd')]}", flush=True)

t0 = time.time()
cluster = training.fit_cluster_stage(cfg, gan)
print(f"clusters: {time.time()-t0:.0f}s", flush=True)

t0 = time.time()
rearr, rlog = training.train_rearranger(cfg, gan, cluster, images)
print(f"rearranger: {time.time()-t0:.0f}s eval_fsd={rlog.values('eval_fsd')} "
      f"eval_cross={rlog.values('eval_cross_miou')}", flush=True)

# self-reconstruction mIoU on 64 fresh latents
g = torch.Generator().manual_seed(991)
self_scores, cross_scores, self_ls, cross_ls = [], [], [], []
with torch.no_grad():
    for _ in range(64):
        z_i = torch.randn(1, cfg.gan.z_dim, generator=g)
        z_j = torch.randn(1, cfg.gan.z_dim, generator=g)
        f_i = gan.g1(gan.mapping(z_i))[0]
        f_j = gan.g1(gan.mapping(z_j))[0]
        m_i = assign_hard(f_i, cluster)
        f_self = rearr(m_i, f_i)
        f_cross = rearr(m_i, f_j)
        self_scores.append(miou(assign_hard(f_self, cluster), m_i, cluster.k))
        cross_scores.append(miou(assign_hard(f_cross, cluster), m_i, cluster.k))
        self_ls.append(float(losses.loss_self(f_self, f_i)))
        cross_ls.append(float(losses.loss_self(f_cross, f_i)))
print(f"self miou: {sum(self_scores)/64:.4f} cross miou: {sum(cross_scores)/64:.4f} "
      f"self_ls/cross_ls: {sum(self_ls)/sum(cross_ls):.4f}", flush=True)

# style agreement: same mask, two styles
agree = []
with torch.no_grad():
    for s in range(16):
        z_i = torch.randn(1, cfg.gan.z_dim, generator=g)
        f_i = gan.g1(gan.mapping(z_i))[0]
        m_i = assign_hard(f_i, cluster)
        za = torch.randn(1, cfg.gan.z_dim, generator=g)
        zb = torch.randn(1, cfg.gan.z_dim, generator=g)
        fa = rearr(m_i, gan.g1(gan.mapping(za))[0])
        fb = rearr(m_i, gan.g1(gan.mapping(zb))[0])
        agree.append(pixel_accuracy(assign_hard(fa, cluster), assign_hard(fb, cluster)))
print(f"style agreement: {sum(agree)/len(agree):.4f}", flush=True)

t0 = time.time()
sm.reset_annotation_audit()
segnet = training.fit_segnet_stage(cfg, gan)
# segnet overfit check on its own training pair
z = torch.randn(cfg.gan.z_dim, generator=torch.Generator().manual_seed(cfg.seed + 31))
with torch.no_grad():
    w = gan.mapping(z[None])[0]
    stack = sm.build_feature_stack(gan, w)
    image = gan.generate_back(gan.generate_front(w))
labels = annotate_by_palette(image)
pred = sm.segnet_predict(stack, segnet, cfg.gan.img_res)
print(f"segnet: {time.time()-t0:.0f}s overfit acc={pixel_accuracy(pred.data, labels):.4f} "
      f"miou={miou(pred.data.numpy(), labels.numpy(), NUM_CLASSES):.4f} "
      f"annotations={sm.consumed_annotations()}", flush=True)

t0 = time.time()
mapper, mlog = training.train_mapper(cfg, gan, cluster, rearr, segnet, images)
held = sm.mint_pairs(gan, cluster, segnet, 64, seed=4242, kind=cfg.mapper.condition_kind)
acc = training.mapper_heldout_accuracy(mapper, held)
print(f"mapper: {time.time()-t0:.0f}s heldout acc={acc:.4f}", flush=True)

print(f"TOTAL: {time.time()-t00:.0f}s", flush=True)
