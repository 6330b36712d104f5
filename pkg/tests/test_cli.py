import json

from click.testing import CliRunner
from PIL import Image

from featsynth.cli import main
from featsynth.toydata import SEG_PALETTE, gen_scene, mask_to_indexed_png


def run(*args):
    return CliRunner().invoke(main, list(args))


def test_help_on_every_subcommand():
    assert run("--help").exit_code == 0
    for cmd in ("toydata", "pretrain-gan", "fit-clusters", "train-rearranger",
                "train-mapper", "train", "synthesize", "exemplar", "evaluate",
                "serve"):
        result = run(cmd, "--help")
        assert result.exit_code == 0, f"{cmd} --help failed: {result.output}"
        assert "Usage:" in result.output


def test_toydata_generate(tmp_path):
    out = tmp_path / "scenes"
    result = run("toydata", "generate", "--n", "3", "--seed", "1",
                 "--img-res", "32", "--out", str(out))
    assert result.exit_code == 0, result.output
    assert len(list(out.glob("scene_*.png"))) == 3
    assert len(list(out.glob("mask_*.png"))) == 3
    img = Image.open(out / "scene_0000.png")
    assert img.size == (32, 32)
    assert Image.open(out / "mask_0000.png").mode == "P"


def test_synthesize_writes_png(micro_pipeline, micro_cfg, tmp_path):
    _, ckpt = micro_pipeline
    mask = tmp_path / "m.png"
    scene = gen_scene(5, micro_cfg.gan.img_res)
    mask_to_indexed_png(scene.gt_mask, SEG_PALETTE).save(mask)
    out = tmp_path / "x.png"
    result = run("synthesize", "--checkpoint", str(ckpt), "--mask", str(mask),
                 "--style-seed", "7", "--out", str(out))
    assert result.exit_code == 0, result.output
    assert Image.open(out).size == (micro_cfg.gan.img_res, micro_cfg.gan.img_res)


def test_synthesize_missing_checkpoint_names_path(tmp_path):
    mask = tmp_path / "m.png"
    mask_to_indexed_png(gen_scene(0, 32).gt_mask, SEG_PALETTE).save(mask)
    missing = tmp_path / "nope.fsz"
    result = run("synthesize", "--checkpoint", str(missing), "--mask", str(mask),
                 "--out", str(tmp_path / "x.png"))
    assert result.exit_code != 0
    assert str(missing) in result.output


def test_synthesize_wrong_mask_size_fails(micro_pipeline, tmp_path):
    _, ckpt = micro_pipeline
    mask = tmp_path / "m.png"
    mask_to_indexed_png(gen_scene(0, 17).gt_mask, SEG_PALETTE).save(mask)
    result = run("synthesize", "--checkpoint", str(ckpt), "--mask", str(mask),
                 "--out", str(tmp_path / "x.png"))
    assert result.exit_code != 0
    assert "17" in result.output


def test_exemplar_writes_png(micro_pipeline, tmp_path):
    _, ckpt = micro_pipeline
    out = tmp_path / "ex.png"
    result = run("exemplar", "--checkpoint", str(ckpt), "--target-seed", "1",
                 "--style-seed", "2", "--out", str(out))
    assert result.exit_code == 0, result.output
    assert out.is_file()


def test_evaluate_emits_json_report(micro_pipeline, tmp_path):
    _, ckpt = micro_pipeline
    report_path = tmp_path / "report.json"
    result = run("evaluate", "--checkpoint", str(ckpt), "--out", str(report_path))
    assert result.exit_code == 0, result.output
    report = json.loads(report_path.read_text())
    assert set(report) == {"miou", "accuracy", "fsd", "diversity"}
    assert 0.0 <= report["miou"] <= 1.0
    assert report["fsd"] >= 0.0
    assert report["diversity"] >= 0.0


def test_serve_missing_checkpoint(tmp_path):
    result = run("serve", "--checkpoint", str(tmp_path / "gone.fsz"))
    assert result.exit_code != 0
    assert "gone.fsz" in result.output
