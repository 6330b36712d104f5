"""Rearranger arms after the flip fix (self-pair triple flip, cross unflipped):
S1 = winning recipe unchanged; S2 = wider attention + more steps."""
import dataclasses, sys, time
import torch
sys.path.insert(0, "src")
torch.set_num_threads(1)
from featsynth import losses, training
from featsynth.cluster_proxy import assign_hard
from featsynth.config import toy_config
from featsynth.gan_core import GanCore
from featsynth.metrics import miou, pixel_accuracy
from featsynth.toydata import make_dataset

cfg0 = toy_config()
ccfg = dataclasses.replace(cfg0.cluster, feature_norm="instance")
cfg = dataclasses.replace(cfg0, cluster=ccfg)
scenes = make_dataset(cfg.dataset_size, cfg.dataset_seed, cfg.gan.img_res)
images = torch.stack([s.image for s in scenes])
blob = torch.load(".calib/gan_cache.pt", weights_only=False)
gan = GanCore(cfg.gan); gan.load_state_dict(blob["gan"]); gan.eval()
cluster = torch.load(".calib/inorm_cluster.pt", weights_only=False)

def full_eval(rearr):
    g = torch.Generator().manual_seed(991)
    self_m, cross_m, sls, cls_, agree = [], [], [], [], []
    with torch.no_grad():
        for i in range(32):
            z_i = torch.randn(1, cfg.gan.z_dim, generator=g)
            z_j = torch.randn(1, cfg.gan.z_dim, generator=g)
            f_i = gan.g1(gan.mapping(z_i))[0]
            f_j = gan.g1(gan.mapping(z_j))[0]
            m_i = assign_hard(f_i, cluster)
            f_self, f_cross = rearr(m_i, f_i), rearr(m_i, f_j)
            self_m.append(miou(assign_hard(f_self, cluster), m_i, cluster.k))
            cross_m.append(miou(assign_hard(f_cross, cluster), m_i, cluster.k))
            sls.append(float(losses.loss_self(f_self, f_i)))
            cls_.append(float(losses.loss_self(f_cross, f_i)))
            if i < 16:
                za = torch.randn(1, cfg.gan.z_dim, generator=g)
                zb = torch.randn(1, cfg.gan.z_dim, generator=g)
                fa = rearr(m_i, gan.g1(gan.mapping(za))[0])
                fb = rearr(m_i, gan.g1(gan.mapping(zb))[0])
                agree.append(pixel_accuracy(assign_hard(fa, cluster), assign_hard(fb, cluster)))
    n = len(self_m)
    return (sum(self_m)/n, sum(cross_m)/n, sum(sls)/sum(cls_), sum(agree)/len(agree))

arms = [
    ("S1_base", dict(steps=3600, attn=64, lself=10.0)),
    ("S2_wide", dict(steps=4200, attn=128, lself=20.0)),
]
for name, a in arms:
    sched = dataclasses.replace(cfg.rearrange_stage, total_steps=a["steps"],
                                phase1_steps=a["steps"], eval_every=a["steps"]//2,
                                lr=1e-3, batch_size=8)
    rcfg = dataclasses.replace(cfg.rearranger, pe_on_keys=True, attn_dim=a["attn"])
    arm_cfg = dataclasses.replace(cfg, rearrange_stage=sched, rearranger=rcfg)
    weights = dataclasses.replace(cfg.loss, lambda_mask=50.0, lambda_self=a["lself"])
    t0 = time.time()
    rearr, log = training.train_rearranger(arm_cfg, gan, cluster, images, weights=weights)
    s, c, ratio, ag = full_eval(rearr)
    print(f"{name}: {time.time()-t0:.0f}s self={s:.3f} cross={c:.3f} "
          f"self/cross_ls={ratio:.3f} style_agree={ag:.3f} "
          f"fsd={[round(v,3) for _, v in log.values('eval_fsd')]}", flush=True)
