import numpy as np
import pytest

from softcrowd import (
    Constant,
    CrowdConfig,
    DistanceProfile,
    MseInit,
    Off,
    SysIdResult,
    estimate_beta,
    estimate_beta_profile,
    estimate_open_loop,
    r_squared,
    refine_mc,
    simulate,
)
from softcrowd.sysid import influence_observations, profile_pivot_distance, run_pipeline

TRUE_OPEN = SysIdResult(gain_hat=0.75, sigma_hat=60.0, r2=1.0,
                        method="regression")


class TestRSquared:
    def test_perfect_fit(self):
        assert r_squared([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 1.0

    def test_null_model(self):
        obs = [1.0, 2.0, 3.0]
        assert r_squared(obs, [2.0, 2.0, 2.0]) == 0.0

    def test_arithmetic(self):
        assert r_squared([1.0, 2.0, 3.0], [1.0, 2.0, 4.0]) == pytest.approx(0.5)

    def test_zero_variance(self):
        with pytest.raises(ValueError, match="zero variance"):
            r_squared([2.0, 2.0], [1.0, 3.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            r_squared([1.0], [1.0])


class TestEstimateOpenLoop:
    def test_noiseless_exact(self):
        cfg = CrowdConfig(n=39, gains=0.75, noise_sigma=0.0,
                          init=MseInit(72000.0))
        res = estimate_open_loop(simulate(cfg, Off(), 30, seed=5))
        assert res.gain_hat == pytest.approx(0.75, abs=1e-6)
        assert res.sigma_hat == pytest.approx(0.0, abs=1e-6)
        assert res.method == "regression"

    def test_mean_recovery_over_200_seeds(self, set_b_config):
        gains, sigmas = [], []
        for s in range(200):
            res = estimate_open_loop(simulate(set_b_config, Off(), 30, seed=s))
            gains.append(res.gain_hat)
            sigmas.append(res.sigma_hat)
        assert np.mean(gains) == pytest.approx(0.75, abs=0.05)
        assert np.mean(sigmas) == pytest.approx(60.0, abs=5.0)

    def test_too_short(self, set_b_config):
        traj = simulate(set_b_config, Off(), 2, seed=1)
        with pytest.raises(ValueError):
            estimate_open_loop(traj)

    def test_non_contractive_fit(self):
        from softcrowd import Trajectory
        # anti-correlated MSE pairs force a negative slope
        xs = np.array([[3.0], [0.1], [2.9], [0.2], [2.8], [0.3]])
        with pytest.raises(ValueError, match="non-contractive fit"):
            estimate_open_loop(Trajectory(xs))


class TestRefineMc:
    def test_refinement_never_worse_than_start(self, set_b_config):
        traj = simulate(set_b_config, Off(), 30, seed=104)
        start = estimate_open_loop(traj)
        refined = refine_mc(traj, start, replicates=1500, seed=1)

        from softcrowd.dynamics import ExplicitInit, simulate_mean_mse

        def objective(g, s):
            cfg = CrowdConfig(n=39, gains=g, noise_sigma=s,
                              init=ExplicitInit(traj.xs[0]))
            series, _ = simulate_mean_mse(cfg, Off(), 30, 1500, 1)
            return float(np.mean((series - traj.mse) ** 2))

        assert objective(refined.gain_hat, refined.sigma_hat) <= \
            objective(start.gain_hat, start.sigma_hat) + 1e-9

    def test_recovery_on_benchmark_crowd(self, set_b_config):
        traj = simulate(set_b_config, Off(), 30, seed=104)
        refined = refine_mc(traj, estimate_open_loop(traj), replicates=1500,
                            seed=1)
        assert refined.gain_hat == pytest.approx(0.75, abs=0.03)
        assert refined.sigma_hat == pytest.approx(60.0, abs=5.0)
        assert refined.method == "mc_refined"

    def test_r2_high_on_model_data(self, set_b_config):
        traj = simulate(set_b_config, Off(), 30, seed=104)
        refined = refine_mc(traj, estimate_open_loop(traj), replicates=1500,
                            seed=1)
        assert refined.r2 >= 0.95


class TestEstimateBeta:
    def test_recovery(self, set_b_config):
        traj = simulate(set_b_config, Constant(0.32), 30, seed=205)
        res = estimate_beta(traj, TRUE_OPEN, replicates=1500, seed=2)
        assert res.beta_hat == pytest.approx(0.32, abs=0.04)
        assert res.r2 > 0.9

    def test_open_loop_data_gives_near_zero(self, set_b_config):
        traj = simulate(set_b_config, Off(), 30, seed=202)
        res = estimate_beta(traj, TRUE_OPEN, replicates=1500, seed=2)
        assert res.beta_hat <= 0.05

    def test_monotone_in_true_beta(self, set_b_config):
        hats = []
        for beta in (0.1, 0.3, 0.5):
            traj = simulate(set_b_config, Constant(beta), 30, seed=400)
            hats.append(estimate_beta(traj, TRUE_OPEN, replicates=1500,
                                      seed=2).beta_hat)
        assert hats[0] < hats[1] < hats[2]


class TestInfluenceProfile:
    def test_noiseless_readings_exact(self):
        cfg = CrowdConfig(n=39, gains=0.75, noise_sigma=0.0,
                          init=MseInit(72000.0))
        traj = simulate(cfg, Constant(0.32), 30, seed=9)
        _, betas = influence_observations(traj, 0.75)
        assert betas.size > 100
        assert np.max(np.abs(betas - 0.32)) < 1e-9

    def test_c_recovery(self, set_b_config):
        traj = simulate(set_b_config, DistanceProfile(0.011), 30, seed=301)
        res = estimate_beta_profile(traj, TRUE_OPEN)
        assert res.c_hat == pytest.approx(0.011, abs=0.004)
        assert res.r2 > 0.9

    def test_flat_data_reproduces_level_low_noise(self):
        # without clipping pressure the one-parameter fit pins the constant
        # level at the fit's own pivot distance
        cfg = CrowdConfig(n=39, gains=0.75, noise_sigma=5.0,
                          init=MseInit(72000.0))
        traj = simulate(cfg, Constant(0.32), 30, seed=42)
        res = estimate_beta_profile(traj, TRUE_OPEN)
        pivot = profile_pivot_distance(traj, 0.75)
        assert np.exp(-res.c_hat * pivot) == pytest.approx(0.32, abs=0.05)

    def test_flat_data_roughly_flat_at_full_noise(self, set_b_config):
        # clipping the noisy readings to [0, 1] inflates small-distance bins,
        # so the reproduced level sits a little above the true constant
        traj = simulate(set_b_config, Constant(0.32), 30, seed=42)
        res = estimate_beta_profile(traj, TRUE_OPEN)
        pivot = profile_pivot_distance(traj, 0.75)
        assert 0.25 <= np.exp(-res.c_hat * pivot) <= 0.47

    def test_insufficient_excitation(self):
        cfg = CrowdConfig(n=2, gains=0.75, noise_sigma=60.0,
                          init=MseInit(72000.0))
        traj = simulate(cfg, Constant(0.3), 3, seed=1)
        with pytest.raises(ValueError, match="insufficient excitation"):
            estimate_beta_profile(traj, TRUE_OPEN)


class TestPipeline:
    def test_full_pipeline_shapes(self, set_b_config):
        tro = simulate(set_b_config, Off(), 30, seed=104)
        trs = simulate(set_b_config, Constant(0.32), 30, seed=205)
        out = run_pipeline(tro, trs, replicates=800, seed=3)
        assert set(out) == {"regression", "open_loop", "beta", "profile"}
        assert out["open_loop"].method == "mc_refined"
        assert out["beta"].beta_hat is not None
        payload = out["beta"].to_json()
        assert "beta_hat" in payload and "r2" in payload
