"""Residual net tests: forward against an independent re-evaluation,
trajectory bookkeeping, transport cost, and checkpoint round-trips."""

import numpy as np
import pytest

from advtraj import model
from advtraj.errors import ContractError, DimensionError, FormatError
from advtraj.model import ResidualBlock, ResidualNet, Trajectory


def zero_net(d=2, w=4, depth=3, k=2, head=None):
    blocks = [ResidualBlock(w1=np.zeros((d, w)), b1=np.zeros((1, w)),
                            w2=np.zeros((w, d)), b2=np.zeros((1, d)))
              for _ in range(depth)]
    head_w = head if head is not None else np.zeros((d, k))
    return ResidualNet(blocks=blocks, head_w=head_w, head_b=np.zeros((1, k)))


def forward_oracle(net, x):
    """Independent step-by-step re-evaluation, scalar loops for the affine maps."""
    cur = np.array(x, dtype=np.float64)
    points = [cur.copy()]
    moves = []
    for blk in net.blocks:
        hidden = np.zeros(blk.w1.shape[1])
        for j in range(blk.w1.shape[1]):
            acc = blk.b1[0, j]
            for i in range(len(cur)):
                acc += cur[i] * blk.w1[i, j]
            hidden[j] = max(acc, 0.0)
        res = np.zeros(len(cur))
        for j in range(len(cur)):
            acc = blk.b2[0, j]
            for i in range(len(hidden)):
                acc += hidden[i] * blk.w2[i, j]
            res[j] = acc
        moves.append(res)
        cur = cur + net.h * res
        points.append(cur.copy())
    logits = cur @ net.head_w + net.head_b[0]
    return np.stack(points), np.stack(moves), logits


class TestForward:
    def test_zero_weights_is_identity(self):
        net = zero_net()
        traj = model.forward(net, np.array([0.3, -0.7]))
        assert np.array_equal(traj.embeddings[-1], traj.embeddings[0])
        assert np.array_equal(traj.residues, np.zeros((3, 2)))

    def test_circles_demo_configuration(self):
        net = model.init_net(2, 16, 9, 2, seed=0)
        traj = model.forward(net, np.array([1.0, 0.0]))
        assert traj.embeddings.shape == (10, 2)
        assert traj.residues.shape == (9, 2)
        assert traj.logits.shape == (2,)

    def test_matches_independent_oracle(self, rng):
        net = model.init_net(3, 5, 4, 3, seed=2, gain=0.7)
        for _ in range(5):
            x = rng.standard_normal(3)
            traj = model.forward(net, x)
            points, moves, logits = forward_oracle(net, x)
            assert np.max(np.abs(traj.embeddings - points)) < 1e-12
            assert np.max(np.abs(traj.residues - moves)) < 1e-12
            assert np.max(np.abs(traj.logits - logits)) < 1e-12

    def test_recomputation_identity_is_bitwise(self, rng):
        net = model.init_net(2, 8, 5, 2, seed=4, gain=0.8)
        _, trajs = model.predict_batch(net, rng.standard_normal((20, 2)))
        for traj in trajs:
            for m in range(len(traj.residues)):
                step = traj.embeddings[m] + traj.h * traj.residues[m]
                assert np.array_equal(traj.embeddings[m + 1], step)

    def test_predicted_ties_break_low(self):
        net = zero_net()  # zero head: all logits equal
        traj = model.forward(net, np.array([1.0, 1.0]))
        assert traj.predicted == 0

    def test_predicted_invariant_under_logit_shift(self, rng):
        logits = rng.standard_normal(4)
        traj = Trajectory(embeddings=np.zeros((2, 2)), residues=np.zeros((1, 2)),
                          logits=logits, predicted=int(np.argmax(logits)))
        assert int(np.argmax(traj.logits + 7.25)) == traj.predicted

    def test_dimension_mismatch(self):
        net = zero_net(d=2)
        with pytest.raises(DimensionError):
            model.forward(net, np.zeros(3))


class TestTransportCost:
    def test_zero_net_costs_nothing(self):
        traj = model.forward(zero_net(), np.array([1.0, 2.0]))
        assert model.transport_cost(traj) == 0.0

    def test_single_block_three_four(self):
        traj = Trajectory(embeddings=np.zeros((2, 2)),
                          residues=np.array([[3.0, 4.0]]),
                          logits=np.zeros(2), predicted=0)
        assert model.transport_cost(traj) == 25.0

    def test_random_batch_matches_direct_summation(self, rng):
        net = model.init_net(2, 8, 4, 2, seed=9, gain=0.9)
        _, trajs = model.predict_batch(net, rng.standard_normal((30, 2)))
        for traj in trajs:
            direct = sum(float(r @ r) for r in traj.residues)
            assert abs(model.transport_cost(traj) - direct) < 1e-12

    def test_invariant_under_block_relabeling(self, rng):
        net = model.init_net(2, 8, 5, 2, seed=1, gain=0.9)
        traj = model.forward(net, rng.standard_normal(2))
        perm = rng.permutation(len(traj.residues))
        shuffled = Trajectory(embeddings=traj.embeddings, residues=traj.residues[perm],
                              logits=traj.logits, predicted=traj.predicted)
        assert model.transport_cost(shuffled) == pytest.approx(
            model.transport_cost(traj), abs=1e-12)


class TestPredictBatch:
    def test_singleton_equals_forward(self, rng):
        net = model.init_net(2, 8, 3, 2, seed=3, gain=0.7)
        x = rng.standard_normal(2)
        ids, trajs = model.predict_batch(net, x[None, :])
        single = model.forward(net, x)
        assert ids[0] == single.predicted
        assert np.array_equal(trajs[0].embeddings, single.embeddings)

    def test_permutation_equivariance(self, rng):
        net = model.init_net(2, 8, 3, 2, seed=3, gain=0.7)
        xs = rng.standard_normal((12, 2))
        perm = rng.permutation(12)
        ids, _ = model.predict_batch(net, xs)
        ids_p, _ = model.predict_batch(net, xs[perm])
        assert np.array_equal(ids_p, ids[perm])

    def test_hundred_samples_equal_individual_forwards(self, rng):
        net = model.init_net(3, 6, 4, 3, seed=6, gain=0.8)
        xs = rng.standard_normal((100, 3))
        ids, trajs = model.predict_batch(net, xs)
        for i in range(100):
            single = model.forward(net, xs[i])
            assert ids[i] == single.predicted
            assert np.max(np.abs(trajs[i].embeddings - single.embeddings)) < 1e-12
            assert np.max(np.abs(trajs[i].residues - single.residues)) < 1e-12

    def test_empty_batch(self):
        ids, trajs = model.predict_batch(zero_net(), np.zeros((0, 2)))
        assert ids.shape == (0,)
        assert trajs == []


class TestValidation:
    def test_needs_blocks(self):
        with pytest.raises(ContractError):
            ResidualNet(blocks=[], head_w=np.zeros((2, 2)), head_b=np.zeros((1, 2)))

    def test_needs_positive_step(self):
        blk = ResidualBlock(w1=np.zeros((2, 3)), b1=np.zeros((1, 3)),
                            w2=np.zeros((3, 2)), b2=np.zeros((1, 2)))
        with pytest.raises(ContractError):
            ResidualNet(blocks=[blk], head_w=np.zeros((2, 2)), head_b=np.zeros((1, 2)), h=0.0)

    def test_blocks_must_share_dimension(self):
        blk2 = ResidualBlock(w1=np.zeros((2, 3)), b1=np.zeros((1, 3)),
                             w2=np.zeros((3, 2)), b2=np.zeros((1, 2)))
        blk3 = ResidualBlock(w1=np.zeros((3, 3)), b1=np.zeros((1, 3)),
                             w2=np.zeros((3, 3)), b2=np.zeros((1, 3)))
        with pytest.raises(DimensionError):
            ResidualNet(blocks=[blk2, blk3], head_w=np.zeros((2, 2)), head_b=np.zeros((1, 2)))


class TestCheckpoint:
    def test_roundtrip_is_exact(self, rng, tmp_path):
        net = model.init_net(3, 5, 4, 3, seed=8, gain=0.31)
        # non-trivial decimals exercise the 17-digit serialization
        net.blocks[0].w1 += rng.standard_normal((3, 5)) * 1e-7
        path = tmp_path / "ckpt.json"
        model.save_checkpoint(net, path)
        loaded = model.load_checkpoint(path)
        for a, b in zip(model.get_params(net), model.get_params(loaded)):
            assert np.array_equal(a, b)
        assert loaded.h == net.h

    def test_load_validates_shapes(self, tmp_path):
        net = model.init_net(2, 3, 2, 2, seed=0)
        path = tmp_path / "ckpt.json"
        model.save_checkpoint(net, path)
        doc = path.read_text().replace('"w": 3', '"w": 4')
        path.write_text(doc)
        with pytest.raises(FormatError):
            model.load_checkpoint(path)

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format_version": 1, "d": 2}\n')
        with pytest.raises(FormatError):
            model.load_checkpoint(path)
