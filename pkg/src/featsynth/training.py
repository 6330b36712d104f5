"""The four training stages and their orchestration.

Stage order: GAN pretraining, K-means fitting, rearranger training, mapper
training.  Each stage logs every loss component as (step, name, value) rows
that can be dumped to CSV, checks for divergence, and leaves upstream
weights untouched (frozen components are verified by hash in the tests).
"""

from __future__ import annotations

import copy
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import Tensor

from . import losses
from .checkpoint import PipelineState, save_checkpoint
from .cluster_proxy import ClusterModel, assign_hard, fit_clusters, hflip
from .config import LossWeights, PipelineConfig, StageSchedule
from .errors import ConfigError, DivergenceError
from .gan_core import GanCore
from .metrics import feature_stats_distance, miou
from .rearranger import Rearranger
from .semantic_mapper import (ConditionRaster, MapperUNet, SegNet, build_feature_stack,
                              condition_channels, encode_condition, mint_pairs, segnet_fit)
from .toydata import ToyScene, annotate_by_palette, make_dataset

log = logging.getLogger(__name__)


@dataclass
class LossLog:
    """In-memory (step, name, value) rows with CSV export."""

    rows: list[tuple[int, str, float]] = field(default_factory=list)

    def add(self, step: int, name: str, value: float) -> None:
        self.rows.append((step, name, float(value)))

    def values(self, name: str) -> list[tuple[int, float]]:
        return [(s, v) for s, n, v in self.rows if n == name]

    def last(self, name: str) -> float:
        vals = self.values(name)
        if not vals:
            raise KeyError(name)
        return vals[-1][1]

    def to_csv(self, path: str | Path) -> None:
        lines = ["step,loss,value"]
        lines += [f"{s},{n},{v!r}" for s, n, v in self.rows]
        Path(path).write_text("\n".join(lines) + "\n")


def weights_hash(module: torch.nn.Module) -> str:
    h = hashlib.sha256()
    for name, t in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(t.detach().cpu().numpy().tobytes())
    return h.hexdigest()


def _f(value: Tensor | float) -> float:
    return float(value.detach()) if isinstance(value, Tensor) else float(value)


def _check_finite(value: Tensor | float, stage: str, step: int) -> None:
    v = _f(value)
    if v != v or v in (float("inf"), float("-inf")):
        raise DivergenceError(f"{stage} produced non-finite loss {v} at step {step}")


def _sample_fakes(gan: GanCore, n: int, g: torch.Generator) -> Tensor:
    with torch.no_grad():
        z = torch.randn(n, gan.cfg.z_dim, generator=g)
        return gan.g2(gan.g1(gan.mapping(z)))


def pretrain_gan(cfg: PipelineConfig, images: Tensor,
                 loss_log: LossLog | None = None) -> tuple[GanCore, LossLog]:
    """Unconditional GAN training: non-saturating loss plus R1 every D step."""
    sched = cfg.pretrain
    loss_log = loss_log if loss_log is not None else LossLog()
    torch.manual_seed(sched.seed)
    gan = GanCore(cfg.gan)
    g = torch.Generator().manual_seed(sched.seed)
    opt_g = torch.optim.Adam(
        list(gan.mapping.parameters()) + list(gan.g1.parameters()) + list(gan.g2.parameters()),
        lr=sched.lr, betas=(sched.beta1, sched.beta2))
    opt_d = torch.optim.Adam(gan.disc.parameters(), lr=sched.lr,
                             betas=(sched.beta1, sched.beta2))

    def fsd_snapshot(step: int) -> None:
        n = min(128, images.shape[0])
        fake = _sample_fakes(gan, n, torch.Generator().manual_seed(sched.seed + 99))
        loss_log.add(step, "fsd", feature_stats_distance(fake, images[:n]))

    if sched.eval_every:
        fsd_snapshot(0)
    for t in range(sched.total_steps):
        idx = torch.randint(images.shape[0], (sched.batch_size,), generator=g)
        real = images[idx]
        flip = torch.rand((), generator=g) < 0.5
        if flip:
            real = hflip(real)
        z = torch.randn(sched.batch_size, cfg.gan.z_dim, generator=g)

        with torch.no_grad():
            fake = gan.g2(gan.g1(gan.mapping(z)))
        d_adv = losses.adv_d(gan.disc(real), gan.disc(fake))
        r1 = losses.r1_penalty(gan.disc, real)
        d_loss = d_adv + cfg.gan.r1_weight * r1
        opt_d.zero_grad()
        d_loss.backward()
        opt_d.step()

        z = torch.randn(sched.batch_size, cfg.gan.z_dim, generator=g)
        fake = gan.g2(gan.g1(gan.mapping(z)))
        g_loss = losses.adv_g_nonsat(gan.disc(fake))
        opt_g.zero_grad()
        g_loss.backward()
        opt_g.step()

        _check_finite(d_loss, "pretrain", t)
        _check_finite(g_loss, "pretrain", t)
        if t % sched.log_every == 0:
            loss_log.add(t, "d_adv", _f(d_adv))
            loss_log.add(t, "r1", _f(r1))
            loss_log.add(t, "g_adv", _f(g_loss))
        if sched.eval_every and (t + 1) % sched.eval_every == 0:
            fsd_snapshot(t + 1)
    if sched.eval_every and sched.total_steps % sched.eval_every != 0:
        fsd_snapshot(sched.total_steps)
    gan.eval()
    return gan, loss_log


def fit_cluster_stage(cfg: PipelineConfig, gan: GanCore,
                      k: int | None = None) -> ClusterModel:
    """K-means over G1 features of fresh samples; centroids frozen after."""
    k = k if k is not None else cfg.cluster.k
    g = torch.Generator().manual_seed(cfg.seed + 17)
    with torch.no_grad():
        feats = []
        for _ in range(0, cfg.cluster.fit_samples, 32):
            n = min(32, cfg.cluster.fit_samples - len(feats))
            z = torch.randn(n, cfg.gan.z_dim, generator=g)
            feats.extend(gan.g1(gan.mapping(z)))
    return fit_clusters(feats, k=k, seed=cfg.seed, tau=cfg.cluster.tau,
                        max_iter=cfg.cluster.max_iter, n_init=cfg.cluster.n_init,
                        norm=cfg.cluster.feature_norm)


def _batch_masks(f_batch: Tensor, cluster: ClusterModel) -> Tensor:
    return torch.stack([assign_hard(f, cluster) for f in f_batch])


def _transfer_eval(gan: GanCore, rearr: Rearranger, cluster: ClusterModel,
                   n: int, seed: int,
                   eval_cluster: ClusterModel | None = None) -> tuple[float, float]:
    """(self-reconstruction, cross-pair) proxy mIoU over n fresh latents.

    ``cluster`` conditions the rearranger; ``eval_cluster`` (default: the
    same model) defines the vocabulary the outputs are scored in.  mIoU
    values are only comparable across models when scored in a shared
    vocabulary, since coarser vocabularies inflate the metric.
    """
    ec = eval_cluster if eval_cluster is not None else cluster
    g = torch.Generator().manual_seed(seed)
    self_scores, cross_scores = [], []
    with torch.no_grad():
        for _ in range(0, n, 16):
            b = min(16, n - len(cross_scores))
            z_i = torch.randn(b, gan.cfg.z_dim, generator=g)
            z_j = torch.randn(b, gan.cfg.z_dim, generator=g)
            f_i = gan.g1(gan.mapping(z_i))
            f_j = gan.g1(gan.mapping(z_j))
            m_i = _batch_masks(f_i, cluster)
            ref = m_i if ec is cluster else _batch_masks(f_i, ec)
            f_self = rearr(m_i, f_i)
            f_out = rearr(m_i, f_j)
            for s in range(b):
                self_scores.append(miou(assign_hard(f_self[s], ec), ref[s], ec.k))
                cross_scores.append(miou(assign_hard(f_out[s], ec), ref[s], ec.k))
    return sum(self_scores) / len(self_scores), sum(cross_scores) / len(cross_scores)


def _cross_eval(gan: GanCore, rearr: Rearranger, cluster: ClusterModel,
                n: int, seed: int,
                eval_cluster: ClusterModel | None = None) -> float:
    """Cross-pair proxy-transfer mIoU over n fresh latent pairs."""
    return _transfer_eval(gan, rearr, cluster, n, seed, eval_cluster)[1]


def train_rearranger(cfg: PipelineConfig, gan: GanCore, cluster: ClusterModel,
                     images: Tensor, weights: LossWeights | None = None,
                     loss_log: LossLog | None = None) -> tuple[Rearranger, LossLog]:
    """Alternating self/cross training of the rearranger (G1/G2 frozen).

    Even steps: self pair (m_i, f_i), the whole triple jointly hflipped half
    the time.  Odd steps: cross pair (m_i, f_j), unflipped.  Phase 1 computes
    the adversarial term once every ``adv_every`` steps, phase 2 every step.
    """
    sched = cfg.rearrange_stage
    weights = weights if weights is not None else cfg.loss
    loss_log = loss_log if loss_log is not None else LossLog()
    gan.eval().requires_grad_(False)
    torch.manual_seed(sched.seed)
    rearr = Rearranger(cfg.gan, cfg.rearranger, cluster.k)
    disc = copy.deepcopy(gan.disc).requires_grad_(True)
    g = torch.Generator().manual_seed(sched.seed)
    params = list(rearr.parameters())
    if cfg.finetune_g2:
        gan.g2.requires_grad_(True)
        params += list(gan.g2.parameters())
    opt_r = torch.optim.Adam(params, lr=sched.lr, betas=(sched.beta1, sched.beta2))
    opt_d = torch.optim.Adam(disc.parameters(), lr=sched.lr, betas=(sched.beta1, sched.beta2))
    lr_sched = torch.optim.lr_scheduler.CosineAnnealingLR(
        opt_r, T_max=sched.total_steps, eta_min=sched.lr * sched.lr_decay)

    for t in range(sched.total_steps):
        with torch.no_grad():
            z_i = torch.randn(sched.batch_size, cfg.gan.z_dim, generator=g)
            f_i = gan.g1(gan.mapping(z_i))
            m_i = _batch_masks(f_i, cluster)
        self_pair = t % 2 == 0
        if self_pair:
            # flip mask, key/value features, and target together: the flipped
            # sample is one consistent training instance.  Flipping only the
            # mask+target would make the per-pixel queries (which carry no
            # spatial context) ambiguous between a position and its mirror.
            do_flip = bool(torch.rand((), generator=g) < cfg.hflip_prob)
            m_in = hflip(m_i) if do_flip else m_i
            f_kv = hflip(f_i) if do_flip else f_i
            f_target = f_kv
        else:
            with torch.no_grad():
                z_j = torch.randn(sched.batch_size, cfg.gan.z_dim, generator=g)
                f_kv = gan.g1(gan.mapping(z_j))
            m_in = m_i
            f_target = None

        f_out = rearr(m_in, f_kv)
        l_mask = losses.loss_mask(f_out, m_in, cluster)
        l_self = (losses.loss_self(f_out, f_target, mean=weights.self_loss_mean)
                  if self_pair else torch.zeros(()))

        in_phase2 = t >= sched.phase1_steps
        adv_now = in_phase2 or t % sched.adv_every == 0
        l_adv = torch.zeros(())
        l_r1 = torch.zeros(())
        if adv_now:
            x_fake = gan.g2(f_out)
            idx = torch.randint(images.shape[0], (sched.batch_size,), generator=g)
            real = images[idx]
            d_adv = losses.adv_d(disc(real), disc(x_fake.detach()))
            l_r1 = losses.r1_penalty(disc, real)
            d_loss = d_adv + weights.lambda_r1 * l_r1
            opt_d.zero_grad()
            d_loss.backward()
            opt_d.step()
            _check_finite(d_loss, "rearranger", t)
            # discriminator weights just changed in place, so the generator
            # loss needs a fresh forward through D
            l_adv = losses.adv_g_nonsat(disc(x_fake))

        r_loss = l_adv + weights.lambda_self * l_self + weights.lambda_mask * l_mask
        opt_r.zero_grad()
        r_loss.backward()
        opt_r.step()
        lr_sched.step()
        _check_finite(r_loss, "rearranger", t)

        if t % sched.log_every == 0:
            total = losses.total_rearranger(_f(l_adv), _f(l_self),
                                            _f(l_mask), _f(l_r1), weights)
            loss_log.add(t, "pair", 0.0 if self_pair else 1.0)
            loss_log.add(t, "adv", _f(l_adv))
            loss_log.add(t, "self", _f(l_self))
            loss_log.add(t, "mask", _f(l_mask))
            loss_log.add(t, "r1", _f(l_r1))
            loss_log.add(t, "total", total)
        if sched.eval_every and (t + 1) % sched.eval_every == 0:
            rearr.eval()
            with torch.no_grad():
                ge = torch.Generator().manual_seed(sched.seed + 7)
                z_a = torch.randn(64, cfg.gan.z_dim, generator=ge)
                z_b = torch.randn(64, cfg.gan.z_dim, generator=ge)
                f_a = gan.g1(gan.mapping(z_a))
                f_b = gan.g1(gan.mapping(z_b))
                m_a = _batch_masks(f_a, cluster)
                fakes = gan.g2(rearr(m_a, f_b))
            loss_log.add(t + 1, "eval_fsd",
                         feature_stats_distance(fakes, images[:128]))
            self_m, cross_m = _transfer_eval(gan, rearr, cluster, 32, sched.seed + 13)
            loss_log.add(t + 1, "eval_self_miou", self_m)
            loss_log.add(t + 1, "eval_cross_miou", cross_m)
            rearr.train()
    rearr.eval()
    return rearr, loss_log


ANNOTATION_MIN_PX = 150


def annotation_pairs(cfg: PipelineConfig, gan: GanCore, n: int = 1,
                     min_px: int = ANNOTATION_MIN_PX,
                     max_scan: int = 512) -> list[tuple[Tensor, ConditionRaster]]:
    """Simulated human annotation of n generated samples.

    The annotator picks samples worth labeling: every class visible in the
    rendered image must cover at least ``min_px`` pixels, skipping samples
    where a shape is reduced to a few-pixel sliver that cannot be labeled
    meaningfully.  Deterministic given the pipeline seed."""
    pairs = []
    for i in range(max_scan):
        if len(pairs) == n:
            break
        z = torch.randn(cfg.gan.z_dim,
                        generator=torch.Generator().manual_seed(cfg.seed + 31 + i))
        with torch.no_grad():
            w = gan.mapping(z[None])[0]
            image = gan.generate_back(gan.generate_front(w))
        labels = annotate_by_palette(image)
        counts = torch.bincount(labels.flatten(), minlength=cfg.mapper.seg_classes)
        if any(0 < c < min_px for c in counts.tolist()):
            continue
        with torch.no_grad():
            stack = build_feature_stack(gan, w)
        cond = ConditionRaster(kind="segmentation", data=labels,
                               num_classes=cfg.mapper.seg_classes)
        pairs.append((stack, cond))
    if len(pairs) < n:
        raise ConfigError(f"found only {len(pairs)}/{n} annotatable samples "
                          f"in {max_scan} candidates")
    return pairs


def fit_segnet_stage(cfg: PipelineConfig, gan: GanCore,
                     n_annotations: int = 1) -> SegNet:
    """Fit the one-shot SegNet on simulated human annotations of generated
    samples (n_annotations=1 is the default one-shot setting)."""
    pairs = annotation_pairs(cfg, gan, n_annotations)
    return segnet_fit(pairs, cfg.mapper.seg_classes, cfg.mapper.segnet_hidden,
                      epochs=cfg.mapper.segnet_epochs, seed=cfg.seed + 41)


def mapper_heldout_accuracy(mapper: MapperUNet, pairs) -> float:
    """Mean per-pixel accuracy of argmax mapper output vs target proxies."""
    correct = total = 0
    with torch.no_grad():
        for cond, proxy, *_ in pairs:
            pred = mapper(encode_condition(cond)).argmax(dim=0)
            correct += int((pred == proxy).sum())
            total += proxy.numel()
    return correct / total


def train_mapper(cfg: PipelineConfig, gan: GanCore, cluster: ClusterModel,
                 rearr: Rearranger, segnet: SegNet, images: Tensor,
                 pool_size: int | None = None,
                 loss_log: LossLog | None = None) -> tuple[MapperUNet, LossLog]:
    """Two-phase mapper training on minted (condition, proxy) pairs.

    Pairs are minted online into a pool of ``pool_size`` (default from
    config), re-minted every ``cfg.mapper.pool_refresh`` steps so the mapper
    never runs out of fresh pairs.  Phase 1 is reconstruction only; phase 2
    adds the adversarial term with fakes rendered through a straight-through
    argmax of the mapper logits.  Everything except the mapper and its
    discriminator stays frozen.
    """
    sched = cfg.mapper_stage
    weights = cfg.loss
    loss_log = loss_log if loss_log is not None else LossLog()
    gan.eval().requires_grad_(False)
    rearr.eval().requires_grad_(False)
    segnet.eval().requires_grad_(False)

    kind = cfg.mapper.condition_kind
    pool_size = pool_size if pool_size is not None else cfg.mapper.pool_size

    def mint_pool(seed: int) -> tuple[Tensor, Tensor]:
        pairs = mint_pairs(gan, cluster, segnet, pool_size, seed=seed, kind=kind)
        return (torch.stack([encode_condition(c) for c, _ in pairs]),
                torch.stack([p for _, p in pairs]).long())

    conds, targets = mint_pool(sched.seed)

    torch.manual_seed(sched.seed)
    mapper = MapperUNet(condition_channels(kind, cfg.mapper.seg_classes), cluster.k,
                        cfg.gan.img_res, cfg.gan.proxy_res, cfg.mapper.unet_width)
    disc = copy.deepcopy(gan.disc).requires_grad_(True)
    g = torch.Generator().manual_seed(sched.seed)
    opt_m = torch.optim.Adam(mapper.parameters(), lr=sched.lr,
                             betas=(sched.beta1, sched.beta2))
    opt_d = torch.optim.Adam(disc.parameters(), lr=sched.lr,
                             betas=(sched.beta1, sched.beta2))
    # cosine decay stabilizes the late per-pixel refinements
    lr_sched = torch.optim.lr_scheduler.CosineAnnealingLR(
        opt_m, T_max=sched.total_steps, eta_min=sched.lr * sched.lr_decay)

    refresh = cfg.mapper.pool_refresh
    for t in range(sched.total_steps):
        if refresh and t > 0 and t % refresh == 0:
            conds, targets = mint_pool(sched.seed + t)
        phase = 1 if t < sched.phase1_steps else 2
        lam_rec = weights.lambda_rec_phase1 if phase == 1 else weights.lambda_rec_phase2
        idx = torch.randint(pool_size, (sched.batch_size,), generator=g)
        logits = mapper(conds[idx])
        l_rec = F.cross_entropy(logits, targets[idx])

        l_adv = torch.zeros(())
        l_r1 = torch.zeros(())
        if phase == 2:
            with torch.no_grad():
                z_j = torch.randn(sched.batch_size, cfg.gan.z_dim, generator=g)
                f_j = gan.g1(gan.mapping(z_j))
            probs = torch.softmax(logits, dim=1)
            hard = F.one_hot(probs.argmax(dim=1), cluster.k).permute(0, 3, 1, 2).float()
            st = hard + probs - probs.detach()     # straight-through argmax
            x_fake = gan.g2(rearr(st, f_j))
            ridx = torch.randint(images.shape[0], (sched.batch_size,), generator=g)
            real = images[ridx]
            d_adv = losses.adv_d(disc(real), disc(x_fake.detach()))
            l_r1 = losses.r1_penalty(disc, real)
            d_loss = d_adv + weights.lambda_r1 * l_r1
            opt_d.zero_grad()
            d_loss.backward()
            opt_d.step()
            _check_finite(d_loss, "mapper", t)
            l_adv = losses.adv_g_nonsat(disc(x_fake))

        m_loss = losses.total_mapper(l_adv, l_rec, 0.0, weights, phase)
        opt_m.zero_grad()
        m_loss.backward()
        opt_m.step()
        lr_sched.step()
        _check_finite(m_loss, "mapper", t)

        if t % sched.log_every == 0:
            total = losses.total_mapper(_f(l_adv), _f(l_rec), _f(l_r1),
                                        weights, phase)
            loss_log.add(t, "lambda_rec", lam_rec)
            loss_log.add(t, "rec", _f(l_rec))
            loss_log.add(t, "adv", _f(l_adv))
            loss_log.add(t, "r1", _f(l_r1))
            loss_log.add(t, "total", total)
    mapper.eval()
    return mapper, loss_log


def run_pipeline(cfg: PipelineConfig, out_dir: str | Path,
                 scenes: list[ToyScene] | None = None) -> PipelineState:
    """All four stages end to end; writes loss CSVs and the checkpoint."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenes = scenes if scenes is not None else make_dataset(cfg.dataset_size,
                                                            cfg.dataset_seed,
                                                            cfg.gan.img_res)
    images = torch.stack([s.image for s in scenes])

    log.info("stage 1/4: GAN pretraining (%d steps)", cfg.pretrain.total_steps)
    gan, glog = pretrain_gan(cfg, images)
    glog.to_csv(out_dir / "loss_pretrain.csv")

    log.info("stage 2/4: cluster fitting (K=%d)", cfg.cluster.k)
    cluster = fit_cluster_stage(cfg, gan)

    log.info("stage 3/4: rearranger training (%d steps)", cfg.rearrange_stage.total_steps)
    rearr, rlog = train_rearranger(cfg, gan, cluster, images)
    rlog.to_csv(out_dir / "loss_rearranger.csv")

    log.info("stage 4/4: segnet + mapper training (%d steps)", cfg.mapper_stage.total_steps)
    segnet = fit_segnet_stage(cfg, gan)
    mapper, mlog = train_mapper(cfg, gan, cluster, rearr, segnet, images)
    mlog.to_csv(out_dir / "loss_mapper.csv")

    state = PipelineState(cfg=cfg, gan=gan, cluster=cluster, rearranger=rearr,
                          segnet=segnet, mapper=mapper)
    save_checkpoint(state, out_dir / "checkpoint.fsz")
    return state
