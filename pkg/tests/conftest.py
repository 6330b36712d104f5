import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

from featsynth import training  # noqa: E402
from featsynth.config import (ClusterConfig, GanConfig, MapperConfig,  # noqa: E402
                              PipelineConfig, RearrangerConfig, StageSchedule)
from featsynth.toydata import make_dataset  # noqa: E402

torch.set_num_threads(1)


def micro_config(seed: int = 0) -> PipelineConfig:
    """Small-everything config for fast functional tests."""
    return PipelineConfig(
        gan=GanConfig(z_dim=16, w_dim=16, channels=32, proxy_res=8, img_res=32,
                      widths={4: 32, 8: 32, 16: 16, 32: 8}),
        cluster=ClusterConfig(k=4, fit_samples=32, n_init=4),
        rearranger=RearrangerConfig(attn_dim=16, embed_dim=32),
        mapper=MapperConfig(segnet_hidden=16, unet_width=8, segnet_epochs=150),
        pretrain=StageSchedule(name="pretrain", total_steps=40, phase1_steps=40,
                               batch_size=4, seed=seed + 1),
        rearrange_stage=StageSchedule(name="rearranger", total_steps=60,
                                      phase1_steps=40, batch_size=4, seed=seed + 2),
        mapper_stage=StageSchedule(name="mapper", total_steps=60, phase1_steps=40,
                                   batch_size=4, seed=seed + 3),
        dataset_size=64,
        seed=seed,
    )


@pytest.fixture(scope="session")
def micro_cfg() -> PipelineConfig:
    return micro_config()


@pytest.fixture(scope="session")
def micro_gan(micro_cfg):
    """A briefly pretrained micro GAN (functional, not high quality)."""
    scenes = make_dataset(micro_cfg.dataset_size, micro_cfg.dataset_seed,
                          micro_cfg.gan.img_res)
    images = torch.stack([s.image for s in scenes])
    gan, _ = training.pretrain_gan(micro_cfg, images)
    return gan, images


@pytest.fixture(scope="session")
def micro_pipeline(micro_cfg, tmp_path_factory):
    """Full micro pipeline state plus its on-disk checkpoint path."""
    out = tmp_path_factory.mktemp("micro_ckpt")
    state = training.run_pipeline(micro_cfg, out)
    return state, out / "checkpoint.fsz"
