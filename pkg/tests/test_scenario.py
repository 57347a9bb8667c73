import numpy as np
import pytest

from aggeq import game as gm
from aggeq import scenario
from aggeq.scenario import ScenarioConfig, ScenarioInfeasibleError, generate, shrink


def desk_config(seed=1, n_players=60):
    return ScenarioConfig(n_players=n_players, seed=seed, capacity=400.0,
                          ramp_limit=15.0,
                          price_pieces=((0.0, 1.0, 0.5), (150.0, -74.0, 1.0), (300.0, -374.0, 2.0)))


class TestGenerate:
    def test_preferred_meets_energy_exactly(self):
        game = generate(desk_config())
        for p in game.players:
            assert abs(p.preferred.sum() - p.energy) <= 1e-9 * max(1.0, p.energy)

    def test_profiles_within_bounds_and_window_contiguous(self):
        game = generate(desk_config(seed=3))
        for p in game.players:
            assert np.all(p.preferred >= p.lower - 1e-12)
            assert np.all(p.preferred <= p.upper + 1e-12)
            window = np.flatnonzero(p.upper > 0)
            assert window.size >= 4
            assert np.array_equal(window, np.arange(window[0], window[-1] + 1))
            outside = np.setdiff1d(np.arange(game.horizon), window)
            assert np.all(p.lower[outside] == 0.0)
            assert np.all(p.upper[outside] == 0.0)

    def test_deterministic_per_seed(self):
        a = generate(desk_config(seed=7))
        b = generate(desk_config(seed=7))
        assert gm.game_to_dict(a) == gm.game_to_dict(b)
        c = generate(desk_config(seed=8))
        assert gm.game_to_dict(a) != gm.game_to_dict(c)

    def test_parameter_marginals(self):
        cfg = ScenarioConfig(n_players=400, seed=5, capacity=1e5, ramp_limit=1e5)
        game = generate(cfg)
        energies = np.array([p.energy for p in game.players])
        omegas = np.array([p.omega for p in game.players])
        assert energies.min() >= 1.0 and energies.max() <= 30.0
        assert omegas.min() >= 1.0 and omegas.max() <= 10.0
        # uniform means within 3 sigma of the midpoint
        for vals, lo, hi in ((energies, 1.0, 30.0), (omegas, 1.0, 10.0)):
            sigma = (hi - lo) / np.sqrt(12 * vals.size)
            assert abs(vals.mean() - (lo + hi) / 2) <= 3 * sigma

    def test_coupling_rows(self):
        game = generate(desk_config())
        assert game.coupling.matrix.shape == (game.horizon + 2, game.horizon)
        x = np.arange(game.horizon, dtype=float)
        prod = game.coupling.matrix @ x
        assert prod[0] == pytest.approx(x[-1] - x[0])
        assert prod[1] == pytest.approx(x[0] - x[-1])
        assert np.allclose(prod[2:], x)
        assert np.allclose(game.coupling.rhs[2:], 400.0)

    def test_homogeneous_types(self):
        cfg = desk_config()
        cfg = ScenarioConfig(**{**scenario.config_to_dict(cfg), "homogeneous_types": 4})
        game = generate(cfg)
        distinct = {id(p) for p in game.players}
        assert len(distinct) == 4

    def test_infeasible_capacity_rejected(self):
        cfg = ScenarioConfig(n_players=40, seed=1, capacity=1.0, ramp_limit=50.0)
        with pytest.raises(ScenarioInfeasibleError):
            generate(cfg)

    def test_infeasible_detection_skippable(self):
        cfg = ScenarioConfig(n_players=40, seed=1, capacity=1.0, ramp_limit=50.0,
                             check_feasibility=False)
        game = generate(cfg)
        assert game.n_players == 40


class TestShrink:
    def test_identity(self):
        cfg = ScenarioConfig()
        assert shrink(cfg, 1.0) == cfg

    def test_scaling(self):
        small = shrink(ScenarioConfig(), 0.1)
        assert small.n_players == 200
        assert small.capacity == pytest.approx(140.0)
        assert small.ramp_limit == pytest.approx(5.0)
        assert small.price_pieces == ScenarioConfig().price_pieces

    def test_price_scaling_preserves_continuity(self):
        small = shrink(ScenarioConfig(), 0.1, scale_prices=True)
        starts = [p[0] for p in small.price_pieces]
        assert starts == pytest.approx([0.0, 50.0, 100.0])
        pf = gm.PriceFunction.from_pieces(small.price_pieces)
        # value match with the full-scale curve at the scaled load
        full = gm.PriceFunction.from_pieces(ScenarioConfig().price_pieces)
        for load in (0.0, 30.0, 50.0, 75.0, 120.0):
            assert pf.value(load) == pytest.approx(full.value(load / 0.1))

    def test_too_small_factor_rejected(self):
        with pytest.raises(ValueError):
            shrink(ScenarioConfig(n_players=5), 0.01)
        with pytest.raises(ValueError):
            shrink(ScenarioConfig(), 0.0)


class TestConfigSerialization:
    def test_round_trip(self, tmp_path):
        cfg = shrink(desk_config(seed=11), 0.5, scale_prices=True)
        path = tmp_path / "cfg.json"
        scenario.save_config(cfg, path)
        assert scenario.load_config(path) == cfg
