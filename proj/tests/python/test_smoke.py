"""Smoke tests for the python bindings."""

import numpy as np
import pytest

import longdiff as ld


@pytest.fixture(scope="module")
def schedule():
    return ld.NoiseSchedule.linear(100, 1e-3, 0.1)


def test_schedule_arrays(schedule):
    beta = np.asarray(schedule.beta)
    abar = np.asarray(schedule.alpha_bar)
    assert beta[0] == pytest.approx(1e-3)
    assert beta[-1] == pytest.approx(0.1)
    assert np.all(np.diff(abar) < 0)
    step = schedule.at(1)
    assert step.posterior_variance == 0.0
    assert step.alpha_bar_prev == 1.0


def test_schedule_rejects_bad_ranges():
    with pytest.raises(ValueError):
        ld.NoiseSchedule.linear(100, 1e-3, 1.5)


def test_forward_sample_identities(schedule):
    rng = np.random.default_rng(0)
    x0 = rng.standard_normal((8, 8, 8)).astype(np.float32)
    zero = np.zeros_like(x0)
    t = 40
    step = schedule.at(t)

    xt = ld.forward_sample(schedule, x0, t, zero)
    np.testing.assert_allclose(xt, np.sqrt(step.alpha_bar) * x0, rtol=1e-5)

    mean, variance = ld.forward_marginal(schedule, x0, t)
    np.testing.assert_allclose(mean, np.sqrt(step.alpha_bar) * x0, rtol=1e-5)
    assert variance == pytest.approx(1.0 - step.alpha_bar)


def test_oracle_sampler_recovers_prior_mean(schedule):
    oracle = ld.GaussianOracleDenoiser(schedule, 0.3, 0.25)
    source = np.zeros((1, 1, 1), dtype=np.float32)
    outs = [
        float(ld.sample_loop(schedule, oracle, source, 1.0, seed)[0, 0, 0])
        for seed in range(400)
    ]
    assert np.mean(outs) == pytest.approx(0.3, abs=0.1)


def test_sampler_is_deterministic(schedule):
    denoiser = ld.ZeroDenoiser()
    source = np.zeros((4, 4, 4), dtype=np.float32)
    a = ld.sample_loop(schedule, denoiser, source, 1.0, 7)
    b = ld.sample_loop(schedule, denoiser, source, 1.0, 7)
    np.testing.assert_array_equal(a, b)


def test_ssim_identity():
    v = np.random.default_rng(1).standard_normal((9, 9, 9)).astype(np.float32)
    assert ld.ssim(v, v) == pytest.approx(1.0)


def test_phantom_tissue_shrinks_with_age():
    counts = [
        ld.tissue_voxel_count(ld.generate_phantom(grid=16, age_years=a))
        for a in (0.0, 1.0, 2.0)
    ]
    assert counts[0] > counts[1] > counts[2]


def test_volume_roundtrip(tmp_path):
    v = ld.generate_phantom(grid=16, age_years=1.0)
    path = str(tmp_path / "phantom.lvol")
    ld.write_volume(path, v)
    np.testing.assert_array_equal(ld.read_volume(path), v)


def test_train_and_sample_from_checkpoint(tmp_path, schedule):
    src = ld.generate_phantom(grid=8, age_years=0.0)
    tgt = ld.generate_phantom(grid=8, age_years=1.0)
    ckpt = str(tmp_path / "model.ldck")
    losses = ld.train_denoiser(
        schedule, [(src, tgt, 1.0)], iterations=5, base_channels=4, checkpoint_path=ckpt
    )
    assert len(losses) == 5
    assert all(np.isfinite(losses))
    out = ld.sample_from_checkpoint(ckpt, src, 1.0, seed=3)
    assert out.shape == (8, 8, 8)
    assert np.all(np.isfinite(out))
    assert out.min() >= -1.0 and out.max() <= 1.0
