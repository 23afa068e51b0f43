"""Score-matrix handling and prior-weighted logistic fusion."""

import numpy as np
import pytest
from scipy.special import logit
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from spoofeval.fusion import (
    FusionModel,
    FusionModelError,
    FusionTrainingError,
    LogisticFusion,
    ScoreMatrix,
    ScoreMatrixError,
    apply_fusion,
    average_fuse,
    combine_score_tables,
    load_fusion_model,
    lr_loss_grad,
    normalize_by_bonafide_std,
    oracle_sweep,
    parse_score_matrix,
    save_fusion_model,
    serialize_score_matrix,
    train_lr,
)
from spoofeval.metrics import AsvErrorRates, DEFAULT_COST_MODEL, min_tdcf, tdcf_coefficients

COEFFS = tdcf_coefficients(AsvErrorRates(0.1, 0.2, 0.5), DEFAULT_COST_MODEL)


def separable_fixture(rng, n_bona=120, n_spoof=120):
    """One informative column: bona fide high, spoof low."""
    scores = np.concatenate(
        [rng.normal(3.0, 1.0, n_bona), rng.normal(-3.0, 1.0, n_spoof)]
    )
    labels = np.concatenate([np.ones(n_bona, bool), np.zeros(n_spoof, bool)])
    return scores[:, None], labels


def complementary_fixture(rng, n=200):
    """Two systems that each catch only one half of the spoofed trials.

    System "a" separates spoof family A but scores family B like bona fide
    material, and system "b" does the reverse; their sum separates both.
    """
    bona = np.column_stack([rng.normal(4.0, 1.0, n), rng.normal(4.0, 1.0, n)])
    spoof_a = np.column_stack([rng.normal(-4.0, 1.0, n // 2), rng.normal(4.0, 1.0, n // 2)])
    spoof_b = np.column_stack([rng.normal(4.0, 1.0, n // 2), rng.normal(-4.0, 1.0, n // 2)])
    values = np.vstack([bona, spoof_a, spoof_b])
    labels = np.concatenate([np.ones(n, bool), np.zeros(n, bool)])
    matrix = ScoreMatrix(
        systems=("a", "b"),
        trial_ids=tuple(f"T{i:04d}" for i in range(values.shape[0])),
        values=values,
    )
    return matrix, labels


class TestScoreMatrix:
    def test_invariants(self):
        with pytest.raises(ValueError, match="unique"):
            ScoreMatrix(("a", "a"), ("t1", "t2"), np.zeros((2, 2)))
        with pytest.raises(ValueError, match="unique"):
            ScoreMatrix(("a", "b"), ("t1", "t1"), np.zeros((2, 2)))
        with pytest.raises(ValueError, match="shape"):
            ScoreMatrix(("a",), ("t1", "t2"), np.zeros((2, 2)))
        with pytest.raises(ValueError, match="finite"):
            ScoreMatrix(("a",), ("t1",), np.array([[np.inf]]))

    def test_column_and_select(self):
        matrix = ScoreMatrix(("a", "b"), ("t1", "t2"), np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert np.array_equal(matrix.column("b"), [2.0, 4.0])
        sub = matrix.select(["b"])
        assert sub.systems == ("b",) and np.array_equal(sub.values[:, 0], [2.0, 4.0])
        with pytest.raises(KeyError):
            matrix.column("c")

    def test_values_read_only(self):
        matrix = ScoreMatrix(("a",), ("t1",), np.array([[1.0]]))
        with pytest.raises(ValueError):
            matrix.values[0, 0] = 2.0


class TestMatrixText:
    def test_round_trip_full_precision(self, rng):
        matrix = ScoreMatrix(
            ("sysA", "sysB", "sysC"),
            tuple(f"t{i}" for i in range(7)),
            rng.normal(size=(7, 3)),
        )
        again = parse_score_matrix(serialize_score_matrix(matrix, full_precision=True))
        assert again.systems == matrix.systems
        assert again.trial_ids == matrix.trial_ids
        assert np.array_equal(again.values, matrix.values)

    def test_comments_and_blanks_skipped(self):
        text = "# comment\n\ntrial_id a b\n# more\nt1 0.5 -0.5\n"
        matrix = parse_score_matrix(text)
        assert matrix.trial_ids == ("t1",) and matrix.n_systems == 2

    @pytest.mark.parametrize(
        "text, pattern",
        [
            ("a b\nt1 1 2\n", "header"),
            ("trial_id\n", "header"),
            ("trial_id a a\nt1 1 2\n", "duplicate system"),
            ("trial_id a b\nt1 1\n", "expected 3 fields"),
            ("trial_id a\nt1 abc\n", "unparseable"),
            ("trial_id a\nt1 inf\n", "non-finite"),
            ("trial_id a\nt1 1\nt1 2\n", "duplicate trial"),
            ("# only comments\n", "no header"),
            ("trial_id a\n", "no score rows"),
        ],
    )
    def test_parse_errors(self, text, pattern):
        with pytest.raises(ScoreMatrixError, match=pattern):
            parse_score_matrix(text)


class TestCombineTables:
    def test_columns_in_given_order_rows_sorted(self):
        matrix = combine_score_tables(
            {"x": {"t2": 1.0, "t1": 2.0}, "y": {"t1": 3.0, "t2": 4.0}}
        )
        assert matrix.systems == ("x", "y")
        assert matrix.trial_ids == ("t1", "t2")
        assert np.array_equal(matrix.values, [[2.0, 3.0], [1.0, 4.0]])

    def test_mismatched_ids_rejected(self):
        with pytest.raises(ScoreMatrixError, match="different trials"):
            combine_score_tables({"x": {"t1": 1.0}, "y": {"t2": 1.0}})
        with pytest.raises(ScoreMatrixError, match="no score"):
            combine_score_tables({"x": {}})
        with pytest.raises(ScoreMatrixError, match="no score tables"):
            combine_score_tables({})


class TestNormalizeAndAverage:
    def test_normalize_divides_by_bonafide_std(self):
        scores = np.array([2.0, 4.0, 6.0, 100.0])
        mask = np.array([True, True, True, False])
        out = normalize_by_bonafide_std(scores, mask)
        assert np.array_equal(out, scores / 2.0)  # std([2,4,6], ddof=1) == 2

    def test_normalize_errors(self):
        with pytest.raises(ValueError, match="at least 2"):
            normalize_by_bonafide_std([1.0, 2.0], np.array([True, False]))
        with pytest.raises(ValueError, match="constant"):
            normalize_by_bonafide_std([1.0, 1.0, 5.0], np.array([True, True, False]))

    def test_average_fuse(self):
        values = np.array([[1.0, 3.0], [2.0, 4.0]])
        assert np.array_equal(average_fuse(values), [2.0, 3.0])


class TestLossGradient:
    def test_gradient_matches_central_differences(self, rng):
        values = rng.normal(size=(40, 3))
        labels = rng.random(40) < 0.5
        labels[:2] = [True, False]  # both classes present
        h = 1e-6
        for _ in range(5):
            w = rng.normal(size=3)
            b = float(rng.normal())
            _, grad_w, grad_b = lr_loss_grad(w, b, values, labels, prior=0.3, l2=0.1)
            numeric = np.empty(4)
            for j in range(3):
                delta = np.zeros(3)
                delta[j] = h
                up, _, _ = lr_loss_grad(w + delta, b, values, labels, prior=0.3, l2=0.1)
                down, _, _ = lr_loss_grad(w - delta, b, values, labels, prior=0.3, l2=0.1)
                numeric[j] = (up - down) / (2 * h)
            up, _, _ = lr_loss_grad(w, b + h, values, labels, prior=0.3, l2=0.1)
            down, _, _ = lr_loss_grad(w, b - h, values, labels, prior=0.3, l2=0.1)
            numeric[3] = (up - down) / (2 * h)
            analytic = np.append(grad_w, grad_b)
            assert np.allclose(numeric, analytic, rtol=1e-6, atol=1e-9)

    def test_start_point_is_stationary_in_bias(self, rng):
        values = rng.normal(size=(30, 2))
        labels = np.arange(30) % 3 == 0
        for prior in (0.2, 0.5, 0.9):
            _, _, grad_b = lr_loss_grad(np.zeros(2), float(logit(prior)), values, labels, prior)
            assert abs(grad_b) < 1e-12

    def test_validation(self, rng):
        values = rng.normal(size=(10, 2))
        labels = np.arange(10) < 5
        with pytest.raises(ValueError, match="prior"):
            lr_loss_grad(np.zeros(2), 0.0, values, labels, prior=1.0)
        with pytest.raises(ValueError, match="l2"):
            lr_loss_grad(np.zeros(2), 0.0, values, labels, l2=-1.0)
        with pytest.raises(ValueError, match="weights"):
            lr_loss_grad(np.zeros(3), 0.0, values, labels)
        with pytest.raises(ValueError, match="both"):
            lr_loss_grad(np.zeros(2), 0.0, values, np.ones(10))


class TestTrainLr:
    def test_converges_and_reduces_loss(self, rng):
        values, labels = separable_fixture(rng)
        model = train_lr(values, labels, l2=0.01)
        loss_init, _, _ = lr_loss_grad(
            np.zeros(1), float(logit(0.5)), values, labels, l2=0.01
        )
        loss_fit, grad_w, grad_b = lr_loss_grad(
            model.weights, model.bias, values, labels, l2=0.01
        )
        assert loss_fit < loss_init
        assert max(np.max(np.abs(grad_w)), abs(grad_b)) < 1e-8

    def test_single_system_preserves_operating_points(self, rng):
        values, labels = separable_fixture(rng)
        model = train_lr(values, labels, l2=0.01)
        assert model.weights[0] > 0.0
        fused = apply_fusion(model, values)
        raw = values[:, 0]
        before = min_tdcf(raw[labels], raw[~labels], COEFFS).min_tdcf_norm
        after = min_tdcf(fused[labels], fused[~labels], COEFFS).min_tdcf_norm
        assert after == pytest.approx(before, abs=1e-12)

    def test_duplicate_columns_still_trainable(self, rng):
        column, labels = separable_fixture(rng)
        values = np.hstack([column, column])
        model = train_lr(values, labels, l2=0.0)
        assert model.weights.sum() > 0.0
        fused = apply_fusion(model, values)
        raw = column[:, 0]
        assert min_tdcf(fused[labels], fused[~labels], COEFFS).min_tdcf_norm == pytest.approx(
            min_tdcf(raw[labels], raw[~labels], COEFFS).min_tdcf_norm, abs=1e-12
        )

    def test_normalize_rescales_weights_back_to_raw_scores(self, rng):
        matrix, labels = complementary_fixture(rng)
        scales = np.array(
            [np.std(matrix.values[labels, j], ddof=1) for j in range(2)]
        )
        plain = train_lr(matrix.values / scales, labels, l2=0.01)
        scaled = train_lr(matrix, labels, l2=0.01, normalize=True)
        assert np.allclose(scaled.weights, plain.weights / scales, rtol=1e-8)
        assert scaled.bias == pytest.approx(plain.bias, rel=1e-8)
        assert scaled.systems == ("a", "b")

    def test_non_convergence_reports_gradient_norm(self, rng):
        values, labels = separable_fixture(rng)
        with pytest.raises(FusionTrainingError, match="max-norm"):
            train_lr(values, labels, gtol=1e-300, max_iter=2)

    def test_unnamed_input_gives_unnamed_model(self, rng):
        values, labels = separable_fixture(rng)
        assert train_lr(values, labels, l2=0.01).systems is None


class TestApplyFusion:
    def test_linear_form(self):
        model = FusionModel(weights=[2.0, -1.0], bias=0.5, prior=0.5)
        out = apply_fusion(model, np.array([[1.0, 1.0], [0.0, 3.0]]))
        assert np.array_equal(out, [1.5, -2.5])

    def test_mismatches_rejected(self):
        model = FusionModel(weights=[1.0, 1.0], bias=0.0, prior=0.5, systems=("a", "b"))
        with pytest.raises(FusionModelError, match="systems, model expects"):
            apply_fusion(model, np.zeros((3, 3)))
        wrong_names = ScoreMatrix(("a", "c"), ("t1",), np.zeros((1, 2)))
        with pytest.raises(FusionModelError, match="do not match"):
            apply_fusion(model, wrong_names)

    def test_reordered_columns_rejected_not_silently_fused(self):
        model = FusionModel(weights=[1.0, -1.0], bias=0.0, prior=0.5, systems=("a", "b"))
        swapped = ScoreMatrix(("b", "a"), ("t1",), np.array([[1.0, 2.0]]))
        with pytest.raises(FusionModelError):
            apply_fusion(model, swapped)


class TestComplementarySystems:
    def test_fusion_beats_both_singles(self, rng):
        matrix, labels = complementary_fixture(rng)
        model = train_lr(matrix, labels, l2=0.01)
        fused = apply_fusion(model, matrix)

        def cost(scores):
            return min_tdcf(scores[labels], scores[~labels], COEFFS).min_tdcf_norm

        fused_cost = cost(fused)
        assert fused_cost < cost(matrix.column("a"))
        assert fused_cost < cost(matrix.column("b"))


class TestOracleSweep:
    def test_non_increasing_and_ordered(self, rng):
        matrix, labels = complementary_fixture(rng)
        noise = rng.normal(size=(matrix.n_trials, 1))
        wide = ScoreMatrix(
            ("a", "b", "junk"),
            matrix.trial_ids,
            np.hstack([matrix.values, noise]),
        )
        entries = oracle_sweep(wide, labels, COEFFS, l2=0.01)
        assert [e.k for e in entries] == [1, 2, 3]
        costs = [e.min_tdcf for e in entries]
        assert all(b <= a + 1e-6 for a, b in zip(costs, costs[1:]))
        assert set(entries[1].systems) == {"a", "b"}
        for earlier, later in zip(entries, entries[1:]):
            assert later.systems[: earlier.k] == earlier.systems

    def test_tie_breaks_to_earliest_column(self, rng):
        column, labels = separable_fixture(rng)
        junk = rng.normal(size=column.shape)
        values = np.hstack([column, junk, column])  # columns 0 and 2 identical
        matrix = ScoreMatrix(("first", "mid", "clone"), tuple(f"t{i}" for i in range(len(column))), values)
        entries = oracle_sweep(matrix, labels, COEFFS, k_max=1, l2=0.01)
        assert entries[0].systems == ("first",)

    def test_k_max_validation(self, rng):
        values, labels = separable_fixture(rng)
        with pytest.raises(ValueError, match="k_max"):
            oracle_sweep(values, labels, COEFFS, k_max=2)


class TestModelFiles:
    def test_round_trip_bitwise(self, tmp_path, rng):
        model = FusionModel(
            weights=rng.normal(size=3),
            bias=float(rng.normal()),
            prior=0.3,
            systems=("a", "b", "c"),
        )
        path = tmp_path / "fusion.txt"
        save_fusion_model(path, model)
        loaded = load_fusion_model(path)
        assert np.array_equal(loaded.weights, model.weights)
        assert loaded.bias == model.bias
        assert loaded.prior == model.prior
        assert loaded.systems == model.systems

    def test_unnamed_model_round_trip(self, tmp_path):
        model = FusionModel(weights=[1.0], bias=0.0, prior=0.5)
        path = tmp_path / "fusion.txt"
        save_fusion_model(path, model)
        assert load_fusion_model(path).systems is None

    @pytest.mark.parametrize(
        "text, pattern",
        [
            ("prior = 0.5\nbias = 0\nweights = 1\ncolor = red\n", "unknown key"),
            ("prior = 0.5\nprior = 0.4\nbias = 0\nweights = 1\n", "duplicate key"),
            ("bias = 0\nweights = 1\n", "missing key 'prior'"),
            ("prior = 0.5\nbias = zero\nweights = 1\n", "unparseable"),
            ("prior = 1.5\nbias = 0\nweights = 1\n", "invalid model"),
            ("systems = a b\nprior = 0.5\nbias = 0\nweights = 1\n", "invalid model"),
            ("just text\n", "expected 'key = value'"),
        ],
    )
    def test_malformed_files(self, tmp_path, text, pattern):
        path = tmp_path / "fusion.txt"
        path.write_text(text, encoding="ascii")
        with pytest.raises(FusionModelError, match=pattern):
            load_fusion_model(path)


class TestLogisticFusionEstimator:
    def test_fit_and_decision_function(self, rng):
        matrix, labels = complementary_fixture(rng)
        est = LogisticFusion(l2=0.01).fit(matrix.values, labels)
        assert np.array_equal(
            est.decision_function(matrix.values), apply_fusion(est.model_, matrix.values)
        )

    def test_not_fitted(self, rng):
        with pytest.raises(NotFittedError):
            LogisticFusion().decision_function(rng.normal(size=(3, 2)))

    def test_sklearn_protocol(self):
        est = LogisticFusion(prior=0.2, l2=0.5, normalize=True)
        params = est.get_params()
        assert params["prior"] == 0.2 and params["normalize"] is True
        assert clone(est).get_params() == params
