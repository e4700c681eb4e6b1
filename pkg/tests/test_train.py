import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reupload import data, train
from reupload.data import Dataset
from reupload.errors import DegenerateFitError, DegenerateLossError, InvalidArgumentError
from reupload.model import CircuitSpec, Scheme
from reupload.train import GradientMode, TrainConfig

EPS = train.FISHER_EPS


def random_problem(rng, scheme=Scheme.ORIGINAL, n=2, L=2, m=20):
    spec = CircuitSpec(scheme, n, L)
    X = rng.uniform(-1, 1, (m, n))
    y = np.r_[np.ones(m // 2, int), np.full(m - m // 2, 2)]
    return spec, rng.uniform(0, 2 * math.pi, spec.n_params), (X, y)


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)


class TestFisherLoss:
    def test_separated_constant_clusters(self):
        p = np.r_[np.zeros(5), np.ones(5)]
        y = np.r_[np.full(5, 2), np.ones(5, int)]
        assert train.fisher_lda_loss(p, y) == pytest.approx(EPS / (1 + EPS), rel=1e-12)

    def test_identical_distributions(self):
        p = np.array([0.3, 0.5, 0.3, 0.5])
        y = np.array([1, 1, 2, 2])
        var = 0.02  # unbiased variance of {0.3, 0.5}
        assert train.fisher_lda_loss(p, y) == pytest.approx((2 * var + EPS) / EPS, rel=1e-9)

    def test_two_point_shifted(self):
        p = np.array([0.6, 0.8, 0.4, 0.6])
        y = np.array([1, 1, 2, 2])
        assert train.fisher_lda_loss(p, y) == pytest.approx((0.04 + EPS) / (0.04 + EPS), rel=1e-9)

    def test_single_class(self):
        with pytest.raises(DegenerateLossError):
            train.fisher_lda_loss([0.1, 0.2], [1, 1])

    @pytest.mark.parametrize("loss", [train.FISHER, train.CROSS_ENTROPY])
    def test_grad_matches_difference(self, loss):
        rng = np.random.default_rng(0)
        p = rng.uniform(0.05, 0.95, 12)
        y = np.r_[np.ones(6, int), np.full(6, 2)]
        g = loss.grad(p, y)
        h = 1e-6
        fd = np.array([(loss.value(p + h * e, y) - loss.value(p - h * e, y)) / (2 * h) for e in np.eye(12)])
        assert rel_err(g, fd) < 1e-7


class TestGradients:
    def test_param_shift_vs_central(self):
        rng = np.random.default_rng(1)
        for scheme in (Scheme.ORIGINAL, Scheme.COMPRESSED):
            spec, params, d = random_problem(rng, scheme)
            _, g_ps = train.grad_param_shift("fisher", spec, params, d)
            _, g_fd = train.grad_finite_diff("fisher", spec, params, d, GradientMode.FD_CENTRAL, 1e-5)
            assert rel_err(g_fd, g_ps) < 1e-6

    @pytest.mark.parametrize("mode", ["fd_forward", "fd_backward", "fd_central"])
    def test_linear_objective_exact(self, mode):
        coef = np.array([2.0, -3.0, 0.5])
        f = lambda P: np.atleast_2d(P) @ coef  # noqa: E731
        for h in (1e-3, 0.25):
            _, g = train.finite_difference(f, np.array([0.3, 0.7, -1.0]), mode, h)
            assert np.allclose(g, coef, atol=1e-12)

    def test_richardson_orders(self):
        rng = np.random.default_rng(2)
        spec, params, d = random_problem(rng)
        _, exact = train.grad_param_shift("fisher", spec, params, d)
        errs = {}
        for mode in (GradientMode.FD_FORWARD, GradientMode.FD_CENTRAL):
            e1 = rel_err(train.grad_finite_diff("fisher", spec, params, d, mode, 1e-3)[1], exact)
            e2 = rel_err(train.grad_finite_diff("fisher", spec, params, d, mode, 5e-4)[1], exact)
            errs[mode] = e1 / e2
        assert errs[GradientMode.FD_FORWARD] == pytest.approx(2.0, rel=0.15)
        assert errs[GradientMode.FD_CENTRAL] == pytest.approx(4.0, rel=0.15)

    def test_mixed_schedule(self):
        rng = np.random.default_rng(3)
        spec, params, d = random_problem(rng)
        central = train.grad_finite_diff("fisher", spec, params, d, GradientMode.FD_CENTRAL)[1]
        backward = train.grad_finite_diff("fisher", spec, params, d, GradientMode.FD_BACKWARD)[1]
        assert np.array_equal(train.grad_finite_diff("fisher", spec, params, d, GradientMode.FD_MIXED, iteration=20)[1], central)
        assert np.array_equal(train.grad_finite_diff("fisher", spec, params, d, GradientMode.FD_MIXED, iteration=21)[1], backward)

    def test_bad_step(self):
        rng = np.random.default_rng(4)
        spec, params, d = random_problem(rng)
        with pytest.raises(InvalidArgumentError):
            train.grad_finite_diff("fisher", spec, params, d, h=0.0)

    def test_objective_stack(self):
        rng = np.random.default_rng(5)
        spec, params, d = random_problem(rng)
        f = train.make_objective("fisher", spec, d)
        P = np.vstack([params, params + 0.1])
        assert np.allclose(f(P), [f(params), f(params + 0.1)])


class TestAdam:
    cfg = TrainConfig(learning_rate=0.01)

    def test_first_step_is_signed_lr(self):
        state = train.AdamState.init(np.zeros(3))
        g = np.array([0.5, -2.0, 1e-3])
        new, _ = train.adam_step(state, g, self.cfg)
        assert np.allclose(new, -0.01 * np.sign(g), rtol=1e-4)

    def test_zero_gradient(self):
        state = train.AdamState.init(np.array([1.0, 2.0]))
        for _ in range(100):
            params, state = train.adam_step(state, np.zeros(2), self.cfg)
        assert np.array_equal(params, [1.0, 2.0])

    def test_constant_gradient_step_tends_to_lr(self):
        state = train.AdamState.init(np.zeros(1))
        prev = 0.0
        for _ in range(5000):
            params, state = train.adam_step(state, np.array([0.7]), self.cfg)
            step, prev = prev - params[0], params[0]
        assert step == pytest.approx(0.01, rel=1e-6)

    def test_does_not_mutate_state(self):
        state = train.AdamState.init(np.ones(2))
        train.adam_step(state, np.ones(2), self.cfg)
        assert state.t == 0 and np.all(state.m == 0) and np.all(state.v == 0)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            train.adam_step(train.AdamState.init(np.zeros(2)), np.zeros(3), self.cfg)

    @given(st.floats(1e-4, 1.0), st.floats(0.01, 0.99), st.floats(0.01, 0.999))
    @settings(max_examples=30)
    def test_bounded_first_step(self, lr, b1, b2):
        cfg = TrainConfig(learning_rate=lr, adam_beta1=b1, adam_beta2=b2)
        new, _ = train.adam_step(train.AdamState.init(np.zeros(4)), np.array([1.0, -1.0, 5.0, -0.1]), cfg)
        assert np.all(np.abs(new) <= lr * (1 + 1e-6))


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(max_iters=0), dict(learning_rate=0.0), dict(adam_beta1=1.0),
                                    dict(adam_beta2=0.0), dict(loss="nope"), dict(gradient_mode="nope")])
    def test_invalid(self, kw):
        with pytest.raises((InvalidArgumentError, ValueError)):
            TrainConfig(**kw)

    def test_roundtrip(self):
        c = TrainConfig(gradient_mode="fd_mixed", seed=3)
        assert TrainConfig.from_dict(c.to_dict()) == c

    def test_unknown_key(self):
        with pytest.raises(InvalidArgumentError):
            TrainConfig.from_dict({"bogus": 1})


class TestTrainLoop:
    def test_one_point_per_class(self):
        ds = Dataset(np.array([[0.2, -0.5], [-0.7, 0.4]]), np.array([1, 2]), np.array(["train", "train"], dtype=object))
        r = train.train(CircuitSpec(Scheme.ORIGINAL, 2, 1), ds, TrainConfig(max_iters=200))
        assert r.train_accuracy == 1.0
        assert r.test_accuracy is None

    def test_single_class_rejected(self):
        ds = Dataset(np.zeros((3, 2)), np.array([1, 1, 1]), np.array(["train"] * 3, dtype=object))
        with pytest.raises(DegenerateFitError):
            train.train(CircuitSpec(Scheme.ORIGINAL, 2, 1), ds)

    def test_running_minimum_and_determinism(self):
        ds = data.gen_circles(n=80, seed=1)
        spec = CircuitSpec(Scheme.ORIGINAL, 2, 2)
        cfg = TrainConfig(max_iters=150, seed=4)
        a = train.train(spec, ds, cfg)
        b = train.train(spec, ds, cfg)
        assert a.to_dict() == b.to_dict()
        assert len(a.loss_trajectory) == a.iterations_run + 1
        assert a.param_trajectory and a.trajectory_iterations[-1] == a.iterations_run
        assert 0.0 <= a.train_accuracy <= 1.0 and 0.0 <= a.test_accuracy <= 1.0
        assert a.final_loss == pytest.approx(a.loss_trajectory[-1])

    def test_best_seed_not_worse_than_initial(self):
        ds = data.gen_circles(n=80, seed=2)
        reps = train.train_seeds(CircuitSpec(Scheme.ORIGINAL, 2, 2), ds, TrainConfig(max_iters=300), range(5))
        best = max(reps, key=lambda r: r.train_accuracy)
        assert best.train_accuracy >= best.initial_train_accuracy

    def test_convergence_stops_early(self):
        ds = data.gen_circles(n=60, seed=3)
        r = train.train(CircuitSpec(Scheme.ORIGINAL, 2, 1), ds, TrainConfig(max_iters=5000, learning_rate=0.05))
        assert r.converged and r.iterations_run < 5000

    def test_fd_modes_train(self):
        ds = data.gen_circles(n=40, seed=4)
        for mode in ("fd_forward", "fd_backward", "fd_central", "fd_mixed"):
            r = train.train(CircuitSpec(Scheme.ORIGINAL, 2, 1), ds, TrainConfig(max_iters=20, gradient_mode=mode))
            assert np.isfinite(r.final_loss)

    def test_noisy_training_flag(self):
        ds = data.gen_circles(n=40, seed=5)
        cfg = TrainConfig(max_iters=30, noisy_training_counts=1000)
        a = train.train(CircuitSpec(Scheme.ORIGINAL, 2, 1), ds, cfg)
        b = train.train(CircuitSpec(Scheme.ORIGINAL, 2, 1), ds, TrainConfig(max_iters=30))
        assert a.loss_trajectory != b.loss_trajectory
        assert a.to_dict() == train.train(CircuitSpec(Scheme.ORIGINAL, 2, 1), ds, cfg).to_dict()

    def test_report_json_roundtrip(self, tmp_path):
        ds = data.gen_circles(n=40, seed=6)
        r = train.train(CircuitSpec(Scheme.ORIGINAL, 2, 1), ds, TrainConfig(max_iters=20))
        r.to_json(tmp_path / "r.json")
        back = train.TrainReport.from_json(tmp_path / "r.json")
        assert back.to_dict() == r.to_dict()
        r.write_loss_csv(tmp_path / "l.csv")
        r.write_param_csv(tmp_path / "p.csv")
        assert (tmp_path / "l.csv").read_text().count("\n") == len(r.loss_trajectory) + 1

    def test_summarize(self):
        ds = data.gen_circles(n=40, seed=7)
        reps = train.train_seeds(CircuitSpec(Scheme.ORIGINAL, 2, 1), ds, TrainConfig(max_iters=20), [0, 1])
        s = train.summarize(reps)
        assert s["n_seeds"] == 2 and s["best_seed"] in (0, 1)
        assert s["max_test_accuracy"] >= s["best_test_accuracy"]
