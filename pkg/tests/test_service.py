import base64
import io

import pytest
from fastapi.testclient import TestClient
from PIL import Image

from featsynth.service import create_app
from featsynth.toydata import SEG_PALETTE, gen_scene, mask_to_indexed_png


def png_b64(mask, palette=SEG_PALETTE):
    buf = io.BytesIO()
    mask_to_indexed_png(mask, palette).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


@pytest.fixture(scope="module")
def client(micro_pipeline):
    _, ckpt = micro_pipeline
    app = create_app(checkpoint_path=ckpt, defer_load=True)
    with TestClient(app) as c:
        yield c


def test_health_503_before_load_then_ok(micro_pipeline):
    _, ckpt = micro_pipeline
    app = create_app(checkpoint_path=ckpt, defer_load=True)
    with TestClient(app) as c:
        r = c.get("/v1/health")
        assert r.status_code == 503
        assert r.json()["status"] == "loading"
        app.state.load_model()
        r = c.get("/v1/health")
        assert r.status_code == 200
        assert r.json()["status"] == "ok"
        assert len(r.json()["checkpoint_id"]) == 16


def test_synthesize_503_before_load(micro_pipeline, micro_cfg):
    _, ckpt = micro_pipeline
    app = create_app(checkpoint_path=ckpt, defer_load=True)
    with TestClient(app) as c:
        mask = png_b64(gen_scene(1, micro_cfg.gan.img_res).gt_mask)
        assert c.post("/v1/synthesize", json={"mask": mask}).status_code == 503


@pytest.fixture(scope="module")
def loaded(client):
    client.app.state.load_model()
    return client


def test_classes_endpoint(loaded, micro_cfg):
    r = loaded.get("/v1/classes")
    assert r.status_code == 200
    body = r.json()
    assert body["kind"] == "segmentation"
    assert body["mask_size"] == micro_cfg.gan.img_res
    assert len(body["labels"]) == len(body["palette"]) == micro_cfg.mapper.seg_classes
    assert len(body["proxy_palette"]) == micro_cfg.cluster.k


def test_synthesize_round_trip(loaded, micro_cfg):
    mask = png_b64(gen_scene(2, micro_cfg.gan.img_res).gt_mask)
    r = loaded.post("/v1/synthesize", json={"mask": mask, "style_seed": 4})
    assert r.status_code == 200
    body = r.json()
    img = Image.open(io.BytesIO(base64.b64decode(body["image"])))
    assert img.size == (micro_cfg.gan.img_res, micro_cfg.gan.img_res)
    proxy = Image.open(io.BytesIO(base64.b64decode(body["proxy_mask"])))
    assert proxy.size == (micro_cfg.gan.proxy_res, micro_cfg.gan.proxy_res)
    assert body["latency_ms"] > 0


def test_synthesize_byte_identical_repeat(loaded, micro_cfg):
    payload = {"mask": png_b64(gen_scene(3, micro_cfg.gan.img_res).gt_mask),
               "style_seed": 9}
    a = loaded.post("/v1/synthesize", json=payload).json()
    b = loaded.post("/v1/synthesize", json=payload).json()
    assert a["image"] == b["image"]
    assert a["proxy_mask"] == b["proxy_mask"]


def test_synthesize_wrong_size_422(loaded):
    r = loaded.post("/v1/synthesize", json={"mask": png_b64(gen_scene(0, 17).gt_mask)})
    assert r.status_code == 422
    assert "17x17" in r.json()["detail"]


def test_synthesize_wrong_kind_422(loaded, micro_cfg):
    mask = png_b64(gen_scene(1, micro_cfg.gan.img_res).gt_mask)
    r = loaded.post("/v1/synthesize", json={"mask": mask, "kind": "edge"})
    assert r.status_code == 422


def test_synthesize_label_out_of_range_422(loaded, micro_cfg):
    res = micro_cfg.gan.img_res
    mask = gen_scene(1, res).gt_mask.clone()
    mask[0, 0] = 9
    palette = SEG_PALETTE + [(i, i, i) for i in range(6)]
    r = loaded.post("/v1/synthesize", json={"mask": png_b64(mask, palette)})
    assert r.status_code == 422
    assert "label" in r.json()["detail"]


def test_synthesize_malformed_payload_400(loaded):
    r = loaded.post("/v1/synthesize", json={"mask": "definitely not base64!!"})
    assert r.status_code == 400
    r = loaded.post("/v1/synthesize",
                    json={"mask": base64.b64encode(b"junk").decode()})
    assert r.status_code == 400


def test_synthesize_missing_field_422(loaded):
    assert loaded.post("/v1/synthesize", json={}).status_code == 422
