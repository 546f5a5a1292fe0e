"""Training tests: objective assembly, multiplier bookkeeping, vanilla
convergence on data proven separable by an independent oracle, no-op and
determinism contracts, divergence guard."""

import numpy as np
import pytest

from advtraj import model, trainer
from advtraj.errors import ContractError, DivergenceError
from advtraj.harness import SyntheticSpec, gen_synthetic
from advtraj.trainer import TrainConfig


def small_net(seed=0, d=2):
    return model.init_net(d, 6, 3, 2, seed=seed, gain=0.5)


class TestObjective:
    def test_zero_multiplier_gives_cost(self, rng):
        net = small_net()
        xs, ys = rng.standard_normal((6, 2)), rng.integers(0, 2, 6)
        total, loss, cost = trainer.objective(net, xs, ys, 0.0)
        assert total == cost

    def test_zero_net_gives_multiplier_times_loss(self, rng):
        net = model.init_net(2, 6, 3, 2, seed=0, gain=0.5)
        for blk in net.blocks:  # zero the blocks: no motion, no cost
            blk.w1 *= 0.0
            blk.w2 *= 0.0
        xs, ys = rng.standard_normal((6, 2)), rng.integers(0, 2, 6)
        total, loss, cost = trainer.objective(net, xs, ys, 3.0)
        assert cost == 0.0
        assert total == 3.0 * loss

    def test_total_is_exact_combination(self, rng):
        net = small_net(seed=2)
        xs, ys = rng.standard_normal((8, 2)), rng.integers(0, 2, 8)
        total, loss, cost = trainer.objective(net, xs, ys, 1.7)
        # recompute the two pieces independently through fresh graphs
        g, h = model.build_graph(net, xs, ys)
        assert abs(total - (float(h["cost"].value) + 1.7 * float(h["loss"].value))) < 1e-12

    def test_negative_multiplier_rejected(self, rng):
        with pytest.raises(ContractError):
            trainer.objective(small_net(), rng.standard_normal((2, 2)), [0, 1], -1.0)


class TestMultiplierBookkeeping:
    def test_recurrence_holds_exactly(self, rng):
        net = small_net(seed=3)
        xs = rng.standard_normal((40, 2))
        ys = rng.integers(0, 2, 40)
        cfg = TrainConfig(mode="lap", epochs=3, learning_rate=0.05, batch_size=8,
                          growth_factor=0.7, initial_multiplier=1.0, seed=1)
        report = trainer.train(net, xs, ys, cfg)
        trace = report.multiplier_trace
        losses = report.multiplier_losses
        assert len(trace) == len(losses) + 1
        assert trace[0] == 1.0
        for i, loss in enumerate(losses):
            assert trace[i + 1] == trace[i] + 0.7 * loss  # bitwise recurrence
        assert all(b >= a for a, b in zip(trace, trace[1:]))

    def test_direct_substitution(self):
        # one update with growth 1 starting at 1: new multiplier = 1 + loss
        net = small_net(seed=4)
        xs = np.array([[0.5, -0.2], [-0.4, 0.8]])
        ys = np.array([0, 1])
        cfg = TrainConfig(mode="lap", epochs=1, learning_rate=1e-9, batch_size=2,
                          growth_factor=1.0, initial_multiplier=1.0, seed=0)
        report = trainer.train(net, xs, ys, cfg)
        assert report.multiplier_trace[1] == 1.0 + report.multiplier_losses[0]

    def test_steps_per_update_batches_updates(self, rng):
        net = small_net(seed=5)
        xs, ys = rng.standard_normal((32, 2)), rng.integers(0, 2, 32)
        cfg = TrainConfig(mode="lap", epochs=2, learning_rate=0.05, batch_size=8,
                          steps_per_update=4, seed=1)
        report = trainer.train(net, xs, ys, cfg)
        # 8 batches total, one update per 4 batches
        assert len(report.multiplier_losses) == 2

    def test_vanilla_has_no_trace(self, rng):
        net = small_net(seed=6)
        xs, ys = rng.standard_normal((16, 2)), rng.integers(0, 2, 16)
        report = trainer.train(net, xs, ys, TrainConfig(mode="vanilla", epochs=1, seed=0))
        assert report.multiplier_trace == []


class TestTraining:
    def test_separable_blobs_reach_full_accuracy(self):
        # centers (-1,0)/(1,0) with std 1/3: 6 sigma apart
        data = gen_synthetic(SyntheticSpec(kind="blobs", n=200, noise=1.0 / 3.0, seed=7))
        # hand-fit threshold oracle: the drawn sample must be separable on x0
        left_max = data.x[data.y == 0, 0].max()
        right_min = data.x[data.y == 1, 0].min()
        assert left_max < right_min
        threshold = 0.5 * (left_max + right_min)
        assert np.array_equal(np.where(data.x[:, 0] > threshold, 1, 0), data.y)

        net = small_net(seed=7)
        cfg = TrainConfig(mode="vanilla", epochs=50, learning_rate=0.2, batch_size=32,
                          clip_norm=5.0, seed=7)
        report = trainer.train(net, data.x, data.y, cfg)
        assert report.final_train_accuracy == 1.0
        assert len(report.loss_history) == 50

    def test_zero_epochs_is_noop(self, rng):
        net = small_net(seed=8)
        before = [p.copy() for p in model.get_params(net)]
        xs, ys = rng.standard_normal((10, 2)), rng.integers(0, 2, 10)
        report = trainer.train(net, xs, ys, TrainConfig(epochs=0, seed=0))
        assert report.loss_history == [] and report.cost_history == []
        for a, b in zip(before, model.get_params(net)):
            assert np.array_equal(a, b)

    def test_determinism(self, rng):
        xs, ys = rng.standard_normal((60, 2)), rng.integers(0, 2, 60)
        outcomes = []
        for _ in range(2):
            net = small_net(seed=9)
            cfg = TrainConfig(mode="lap", epochs=4, learning_rate=0.05, batch_size=16,
                              growth_factor=0.3, seed=123)
            report = trainer.train(net, xs, ys, cfg)
            outcomes.append((report.loss_history, report.multiplier_trace,
                             [p.copy() for p in model.get_params(net)]))
        assert outcomes[0][0] == outcomes[1][0]
        assert outcomes[0][1] == outcomes[1][1]
        for a, b in zip(outcomes[0][2], outcomes[1][2]):
            assert np.array_equal(a, b)

    def test_divergence_error_names_epoch(self, rng):
        net = small_net(seed=10)
        xs, ys = rng.standard_normal((20, 2)), rng.integers(0, 2, 20)
        cfg = TrainConfig(mode="vanilla", epochs=50, learning_rate=1e8, batch_size=4, seed=0)
        with pytest.raises(DivergenceError, match="epoch"):
            trainer.train(net, xs, ys, cfg)

    def test_empty_data_rejected(self):
        with pytest.raises(ContractError):
            trainer.train(small_net(), np.zeros((0, 2)), np.zeros(0, dtype=int), TrainConfig())

    def test_label_out_of_range_rejected(self, rng):
        with pytest.raises(ContractError):
            trainer.train(small_net(), rng.standard_normal((4, 2)), [0, 1, 2, 0], TrainConfig())

    def test_invalid_configs_rejected(self):
        with pytest.raises(ContractError):
            TrainConfig(mode="sgd")
        with pytest.raises(ContractError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ContractError):
            TrainConfig(growth_factor=-1.0)
        with pytest.raises(ContractError):
            TrainConfig(steps_per_update=0)
