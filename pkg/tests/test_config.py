import pytest

from featsynth.config import (ClusterConfig, GanConfig, PipelineConfig,
                              RearrangerConfig, StageSchedule, toy_config)
from featsynth.errors import ConfigError


def test_yaml_round_trip(tmp_path):
    cfg = toy_config()
    p = tmp_path / "cfg.yaml"
    cfg.save(p)
    assert PipelineConfig.load(p).to_dict() == cfg.to_dict()


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"gan": {"z_dim": 8, "bogus": 1}})
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"no_such_section": {}})


def test_gan_config_validation():
    with pytest.raises(ConfigError):
        GanConfig(proxy_res=12, img_res=48)           # not powers of two
    with pytest.raises(ConfigError):
        GanConfig(proxy_res=16, img_res=64, widths={4: 8, 8: 8})  # missing widths
    with pytest.raises(ConfigError):
        GanConfig(channels=64, proxy_res=16, img_res=64,
                  widths={4: 8, 8: 8, 16: 32, 32: 8, 64: 8})  # width != channels


def test_cluster_config_validation():
    with pytest.raises(ConfigError):
        ClusterConfig(k=1)
    with pytest.raises(ConfigError):
        ClusterConfig(tau=0.0)


def test_rearranger_config_validation():
    with pytest.raises(ConfigError):
        RearrangerConfig(embed_dim=30)


def test_schedule_validation():
    with pytest.raises(ConfigError):
        StageSchedule(total_steps=10, phase1_steps=20)
    with pytest.raises(ConfigError):
        StageSchedule(adv_every=0)


def test_full_scale_loss_and_optimizer_defaults():
    cfg = PipelineConfig()
    assert cfg.loss.lambda_self == 10.0
    assert cfg.loss.lambda_mask == 1.0
    assert cfg.loss.lambda_r1 == 10.0
    assert cfg.loss.lambda_adv == 1.0
    assert cfg.loss.lambda_rec_phase1 == 10.0
    assert cfg.loss.lambda_rec_phase2 == 100.0
    assert cfg.gan.lr == 0.002
    for sched in (cfg.pretrain, cfg.rearrange_stage, cfg.mapper_stage):
        assert sched.lr == 0.002
        assert (sched.beta1, sched.beta2) == (0.0, 0.99)
        assert sched.adv_every == 5
