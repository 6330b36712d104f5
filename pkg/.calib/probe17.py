"""Validate: annotation selection + bilinear segnet, mapper gate, k2 common-vocab, service identity."""
import base64, io, sys, time
from concurrent.futures import ThreadPoolExecutor
import torch
sys.path.insert(0, "src")
torch.set_num_threads(1)
from featsynth import semantic_mapper as sm, training
from featsynth.checkpoint import load_checkpoint
from featsynth.metrics import miou, pixel_accuracy

state = load_checkpoint("/tmp/pytest-of-root/pytest-12/toy_run0/checkpoint.fsz")
gan, cfg = state.gan, state.cfg
from featsynth.toydata import make_dataset
scenes = make_dataset(cfg.dataset_size, cfg.dataset_seed, cfg.gan.img_res)
images = torch.stack([s.image for s in scenes])

# --- service payload identity under concurrency (old checkpoint models) ---
from featsynth.service import create_app
from featsynth.toydata import mask_to_indexed_png, SEG_PALETTE
from fastapi.testclient import TestClient
app = create_app(state=state)
buf = io.BytesIO()
mask_to_indexed_png(scenes[0].gt_mask, SEG_PALETTE).save(buf, format="PNG")
payload = {"mask": base64.b64encode(buf.getvalue()).decode("ascii"),
           "kind": "segmentation", "style_seed": 3}
with TestClient(app) as client:
    with ThreadPoolExecutor(max_workers=16) as pool:
        rs = list(pool.map(lambda _: client.post("/v1/synthesize", json=payload), range(100)))
    imgs = {(r.json()["image"], r.json()["proxy_mask"]) for r in rs}
    print(f"service: statuses={sorted({r.status_code for r in rs})} distinct_payloads={len(imgs)}", flush=True)

# --- annotation selection + segnet overfit ---
t0 = time.time()
pairs = training.annotation_pairs(cfg, gan, n=1)
stack, cond = pairs[0]
for ep in (400, 800):
    net = sm.segnet_fit([(stack, cond)], cfg.mapper.seg_classes, cfg.mapper.segnet_hidden,
                        epochs=ep, seed=cfg.seed + 41)
    pred = sm.segnet_predict(stack, net, cfg.gan.img_res)
    print(f"segnet ep={ep}: acc={pixel_accuracy(pred.data, cond.data):.4f} "
          f"miou={miou(pred.data, cond.data, cond.num_classes):.4f} "
          f"({time.time()-t0:.0f}s)", flush=True)

# --- mapper gate with the new segnet ---
segnet = sm.segnet_fit([(stack, cond)], cfg.mapper.seg_classes, cfg.mapper.segnet_hidden,
                       epochs=cfg.mapper.segnet_epochs, seed=cfg.seed + 41)
t0 = time.time()
mapper, _ = training.train_mapper(cfg, gan, state.cluster, state.rearranger, segnet, images)
held = sm.mint_pairs(gan, state.cluster, segnet, 64, seed=4242, kind=cfg.mapper.condition_kind)
acc = training.mapper_heldout_accuracy(mapper, held)
print(f"mapper heldout acc={acc:.4f} ({time.time()-t0:.0f}s)", flush=True)

# --- k2 arm, common-vocabulary scoring ---
t0 = time.time()
cluster2 = training.fit_cluster_stage(cfg, gan, k=2)
rearr2, _ = training.train_rearranger(cfg, gan, cluster2, images)
k2 = training._cross_eval(gan, rearr2, cluster2, 64, 996, eval_cluster=state.cluster)
k8 = training._cross_eval(gan, state.rearranger, state.cluster, 64, 996)
print(f"k2(common vocab)={k2:.4f} vs k8={k8:.4f} ({time.time()-t0:.0f}s)", flush=True)
