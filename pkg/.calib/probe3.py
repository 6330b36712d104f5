import dataclasses, sys, time
import torch
sys.path.insert(0, "src")
torch.set_num_threads(1)
from featsynth import training
from featsynth.config import toy_config
from featsynth.gan_core import GanCore
from featsynth.toydata import make_dataset

cfg = toy_config()
scenes = make_dataset(cfg.dataset_size, cfg.dataset_seed, cfg.gan.img_res)
images = torch.stack([s.image for s in scenes])
blob = torch.load(".calib/gan_cache.pt", weights_only=False)
gan = GanCore(cfg.gan); gan.load_state_dict(blob["gan"]); gan.eval()
cluster = blob["cluster"]

ARMS = {
    "H_mask50":  dict(lr=1e-3, lambda_mask=50.0, batch=8, steps=3600, adv_every=5),
    "I_no_adv":  dict(lr=1e-3, lambda_mask=10.0, batch=8, steps=3600, adv_every=10**6),
}
for name, o in ARMS.items():
    sched = dataclasses.replace(cfg.rearrange_stage, total_steps=o["steps"],
                                phase1_steps=o["steps"], eval_every=600,
                                lr=o["lr"], batch_size=o["batch"],
                                adv_every=o["adv_every"])
    arm_cfg = dataclasses.replace(cfg, rearrange_stage=sched)
    weights = dataclasses.replace(cfg.loss, lambda_mask=o["lambda_mask"])
    t0 = time.time()
    rearr, log = training.train_rearranger(arm_cfg, gan, cluster, images, weights=weights)
    fmt = lambda key: {s: round(v, 3) for s, v in log.values(key)}
    print(f"{name}: {time.time()-t0:.0f}s self={fmt('eval_self_miou')} "
          f"cross={fmt('eval_cross_miou')} fsd={fmt('eval_fsd')}", flush=True)
