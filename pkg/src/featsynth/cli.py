"""Command-line entry points for every stage, inference, and the service."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import torch

from . import training
from .checkpoint import PipelineState, load_checkpoint, save_checkpoint
from .config import PipelineConfig, toy_config
from .errors import FeatsynthError
from .gan_core import sample_latent
from .metrics import feature_stats_distance, group_diversity, miou
from .semantic_mapper import ConditionRaster, encode_condition, mint_pairs
from .synthesis import exemplar as exemplar_op
from .synthesize_io import load_condition_png
from .synthesis import synthesize as synthesize_op
from .toydata import (SEG_PALETTE, gen_scene, image_to_pil, make_dataset,
                      mask_to_indexed_png)


def _load_cfg(config: str | None, seed: int | None) -> PipelineConfig:
    cfg = PipelineConfig.load(config) if config else toy_config()
    if seed is not None:
        cfg.seed = seed
    return cfg


def _load_ckpt(path: str, cfg: PipelineConfig | None = None) -> PipelineState:
    if not Path(path).is_file():
        raise click.ClickException(f"checkpoint not found: {path}")
    try:
        return load_checkpoint(path, expected=cfg)
    except FeatsynthError as e:
        raise click.ClickException(str(e)) from e


@click.group()
def main() -> None:
    """featsynth: semantic image synthesis via feature-map rearrangement."""


@main.group()
def toydata() -> None:
    """Procedural toy dataset utilities."""


@toydata.command("generate")
@click.option("--n", type=int, default=16, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--img-res", type=int, default=64, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def toydata_generate(n: int, seed: int, img_res: int, out: str) -> None:
    """Write n scenes as paired image / indexed-mask PNGs."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(n):
        scene = gen_scene(seed * 1_000_003 + i, img_res)
        image_to_pil(scene.image).save(out_dir / f"scene_{i:04d}.png")
        mask_to_indexed_png(scene.gt_mask, SEG_PALETTE).save(out_dir / f"mask_{i:04d}.png")
    click.echo(f"wrote {n} scenes to {out_dir}")


@main.command("pretrain-gan")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), required=True)
def pretrain_gan_cmd(config: str | None, seed: int | None, out: str) -> None:
    cfg = _load_cfg(config, seed)
    images = torch.stack([s.image for s in make_dataset(cfg.dataset_size, cfg.dataset_seed,
                                                        cfg.gan.img_res)])
    gan, loss_log = training.pretrain_gan(cfg, images)
    loss_log.to_csv(Path(out).with_suffix(".losses.csv"))
    save_checkpoint(PipelineState(cfg=cfg, gan=gan), out)
    click.echo(f"saved GAN checkpoint to {out}")


@main.command("fit-clusters")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--checkpoint", type=click.Path(), required=True)
@click.option("--out", type=click.Path(), required=True)
def fit_clusters_cmd(config: str | None, seed: int | None, checkpoint: str, out: str) -> None:
    cfg = _load_cfg(config, seed)
    state = _load_ckpt(checkpoint)
    state.cluster = training.fit_cluster_stage(state.cfg, state.gan)
    save_checkpoint(state, out)
    click.echo(f"saved checkpoint with fitted clusters to {out}")


@main.command("train-rearranger")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--checkpoint", type=click.Path(), required=True)
@click.option("--out", type=click.Path(), required=True)
def train_rearranger_cmd(config: str | None, seed: int | None, checkpoint: str, out: str) -> None:
    state = _load_ckpt(checkpoint)
    cfg = state.cfg
    images = torch.stack([s.image for s in make_dataset(cfg.dataset_size, cfg.dataset_seed,
                                                        cfg.gan.img_res)])
    state.rearranger, loss_log = training.train_rearranger(cfg, state.gan, state.cluster, images)
    loss_log.to_csv(Path(out).with_suffix(".losses.csv"))
    save_checkpoint(state, out)
    click.echo(f"saved checkpoint with trained rearranger to {out}")


@main.command("train-mapper")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--checkpoint", type=click.Path(), required=True)
@click.option("--out", type=click.Path(), required=True)
def train_mapper_cmd(config: str | None, seed: int | None, checkpoint: str, out: str) -> None:
    state = _load_ckpt(checkpoint)
    cfg = state.cfg
    images = torch.stack([s.image for s in make_dataset(cfg.dataset_size, cfg.dataset_seed,
                                                        cfg.gan.img_res)])
    if state.segnet is None:
        state.segnet = training.fit_segnet_stage(cfg, state.gan)
    state.mapper, loss_log = training.train_mapper(cfg, state.gan, state.cluster,
                                                   state.rearranger, state.segnet, images)
    loss_log.to_csv(Path(out).with_suffix(".losses.csv"))
    save_checkpoint(state, out)
    click.echo(f"saved checkpoint with trained mapper to {out}")


@main.command("train")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--stage", type=click.Choice(["all", "pretrain", "clusters", "rearranger",
                                            "mapper"]), default="all", show_default=True)
@click.option("--resume", type=click.Path(), default=None,
              help="checkpoint to continue from")
@click.option("--out", type=click.Path(), required=True)
def train_cmd(config: str | None, seed: int | None, stage: str,
              resume: str | None, out: str) -> None:
    """Run the full pipeline (or one stage, resuming from a checkpoint)."""
    if stage == "all" and resume is None:
        cfg = _load_cfg(config, seed)
        training.run_pipeline(cfg, Path(out).parent or Path("."))
        click.echo(f"pipeline complete; artifacts in {Path(out).parent}")
        return
    ctx = click.get_current_context()
    cmd = {"pretrain": pretrain_gan_cmd, "clusters": fit_clusters_cmd,
           "rearranger": train_rearranger_cmd, "mapper": train_mapper_cmd}
    if stage == "pretrain":
        ctx.invoke(pretrain_gan_cmd, config=config, seed=seed, out=out)
    elif stage == "all":
        raise click.ClickException("--resume with --stage all is not supported; pick a stage")
    else:
        if resume is None:
            raise click.ClickException(f"stage {stage} needs --resume <checkpoint>")
        ctx.invoke(cmd[stage], config=config, seed=seed, checkpoint=resume, out=out)


@main.command("synthesize")
@click.option("--checkpoint", type=click.Path(), required=True)
@click.option("--mask", type=click.Path(exists=True), required=True)
@click.option("--kind", type=click.Choice(["segmentation", "scribble", "edge"]),
              default="segmentation", show_default=True)
@click.option("--style-seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def synthesize_cmd(checkpoint: str, mask: str, kind: str, style_seed: int, out: str) -> None:
    """Render an image from a condition mask PNG."""
    state = _load_ckpt(checkpoint)
    try:
        cond = load_condition_png(mask, kind, state.cfg)
        result = synthesize_op(state, cond, style_seed)
    except FeatsynthError as e:
        raise click.ClickException(str(e)) from e
    image_to_pil(result.image).save(out)
    click.echo(f"wrote {out}")


@main.command("exemplar")
@click.option("--checkpoint", type=click.Path(), required=True)
@click.option("--target-seed", type=int, required=True)
@click.option("--style-seed", type=int, required=True)
@click.option("--out", type=click.Path(), required=True)
def exemplar_cmd(checkpoint: str, target_seed: int, style_seed: int, out: str) -> None:
    """Layout from one latent's proxy mask, style from another."""
    state = _load_ckpt(checkpoint)
    result = exemplar_op(state, target_seed, style_seed)
    image_to_pil(result.image).save(out)
    click.echo(f"wrote {out}")


@main.command("evaluate")
@click.option("--checkpoint", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="JSON report path")
def evaluate_cmd(checkpoint: str, seed: int, out: str | None) -> None:
    """Emit a JSON report {miou, accuracy, fsd, diversity} for a checkpoint."""
    state = _load_ckpt(checkpoint)
    report = evaluate_checkpoint(state, seed)
    text = json.dumps(report, indent=2)
    if out:
        Path(out).write_text(text)
    click.echo(text)


def evaluate_checkpoint(state: PipelineState, seed: int = 0,
                        n_pairs: int = 32) -> dict:
    """Cross-pair proxy mIoU, mapper accuracy, FSD vs the toy set, diversity."""
    from .cluster_proxy import assign_hard
    cfg = state.cfg
    gan, cluster, rearr = state.gan, state.cluster, state.rearranger
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        z_i = torch.randn(n_pairs, cfg.gan.z_dim, generator=g)
        z_j = torch.randn(n_pairs, cfg.gan.z_dim, generator=g)
        f_i = gan.g1(gan.mapping(z_i))
        f_j = gan.g1(gan.mapping(z_j))
        m_i = torch.stack([assign_hard(f, cluster) for f in f_i])
        f_out = rearr(m_i, f_j)
        fakes = gan.g2(f_out)
    mious = [miou(assign_hard(f_out[s], cluster), m_i[s], cluster.k)
             for s in range(n_pairs)]

    accuracy = float("nan")
    if state.mapper is not None and state.segnet is not None:
        pairs = mint_pairs(gan, cluster, state.segnet, 32, seed=seed + 1,
                           kind=cfg.mapper.condition_kind)
        accuracy = training.mapper_heldout_accuracy(state.mapper, pairs)

    real = torch.stack([s.image for s in make_dataset(128, cfg.dataset_seed,
                                                      cfg.gan.img_res)])
    fsd = feature_stats_distance(fakes, real[:n_pairs]) if n_pairs >= 2 else float("nan")

    groups = []
    with torch.no_grad():
        for gi in range(4):
            z_s = torch.randn(8, cfg.gan.z_dim, generator=g)
            f_s = gan.g1(gan.mapping(z_s))
            groups.append(gan.g2(rearr(m_i[:8], f_s)))
    return {
        "miou": sum(mious) / len(mious),
        "accuracy": accuracy,
        "fsd": fsd,
        "diversity": group_diversity(groups),
    }


@main.command("serve")
@click.option("--checkpoint", type=click.Path(), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8008, show_default=True)
def serve_cmd(checkpoint: str, host: str, port: int) -> None:
    """Run the HTTP inference service."""
    if not Path(checkpoint).is_file():
        raise click.ClickException(f"checkpoint not found: {checkpoint}")
    from .service import serve
    serve(checkpoint, host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
