import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsecl.metrics import (
    RunResult,
    bwt,
    evaluate,
    final_avg_accuracy,
    jaccard,
    retention_kl,
    subnetwork_cosine,
    write_run_csvs,
)
from sparsecl.model import LayerSpec, init_model
from sparsecl.numerics import kl_div, softmax_temp
from sparsecl.tracking import ActivationStats, TopNSelection


class TestEvaluate:
    def test_perfect_model(self):
        model = init_model([LayerSpec(2, 2, 2)], 2, seed=0)
        model.hidden[0] = np.eye(2)
        model.output = np.eye(2)
        x = np.array([[1.0, 0.0]] * 5 + [[0.0, 1.0]] * 5)
        y = np.array([0] * 5 + [1] * 5)
        assert evaluate(model, x, y) == 1.0

    def test_constant_prediction_balanced(self):
        model = init_model([LayerSpec(2, 4, 2)], 2, seed=0)
        model.output = np.zeros((2, 4))  # all logits tie, argmax is class 0
        x = np.random.default_rng(1).normal(size=(10, 2))
        y = np.array([0, 1] * 5)
        assert evaluate(model, x, y) == 0.5

    def test_hand_count_two_of_three(self):
        model = init_model([LayerSpec(2, 2, 2)], 2, seed=0)
        model.hidden[0] = np.eye(2)
        model.output = np.eye(2)
        x = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        y = np.array([0, 1, 1])  # middle sample is wrong by construction
        assert evaluate(model, x, y) == pytest.approx(2 / 3)

    def test_allowed_classes_restricts_argmax(self):
        model = init_model([LayerSpec(2, 2, 2)], 3, seed=0)
        model.hidden[0] = np.eye(2)
        model.output = np.array([[0.0, 0.0], [0.0, 0.0], [10.0, 10.0]])
        x = np.array([[1.0, 0.0]])
        assert evaluate(model, x, np.array([0])) == 0.0
        assert evaluate(model, x, np.array([0]), allowed_classes=[0, 1]) == 1.0

    def test_empty_dataset_rejected(self):
        model = init_model([LayerSpec(2, 2, 2)], 2, seed=0)
        with pytest.raises(ValueError):
            evaluate(model, np.empty((0, 2)), np.empty(0))


class TestBwt:
    def test_no_forgetting(self):
        r = np.array([[0.9, np.nan], [0.9, 0.8]])
        assert bwt(r) == 0.0

    def test_hand_value(self):
        r = np.full((3, 3), np.nan)
        r[0, 0] = 0.9
        r[1, 1] = 0.8
        r[2, 0] = 0.7
        r[2, 1] = 0.75
        r[2, 2] = 0.95
        assert bwt(r) == pytest.approx(-0.125, abs=1e-12)

    def test_single_task_undefined(self):
        with pytest.raises(ValueError):
            bwt(np.array([[0.9]]))


class TestJaccard:
    def test_identical(self):
        assert jaccard({1, 2, 3}, {1, 2, 3}) == 1.0

    def test_disjoint(self):
        assert jaccard({1, 2}, {3, 4}) == 0.0

    def test_hand_value(self):
        assert jaccard({1, 2, 3}, {2, 3, 4}) == 0.5

    def test_accepts_arrays(self):
        assert jaccard(np.array([1, 2, 3]), np.array([2, 3, 4])) == 0.5

    def test_two_empty_sets_rejected(self):
        with pytest.raises(ValueError):
            jaccard(set(), set())

    @given(
        st.sets(st.integers(0, 20), max_size=10),
        st.sets(st.integers(0, 20), min_size=1, max_size=10),
    )
    @settings(deadline=None)
    def test_bounded(self, a, b):
        assert 0.0 <= jaccard(a, b) <= 1.0


class TestSubnetworkCosine:
    def test_identical_models(self):
        model = init_model([LayerSpec(4, 6, 2)], 3, seed=0)
        sel = TopNSelection([np.array([0, 1, 2])], n=3)
        assert subnetwork_cosine(model, model.snapshot(), sel) == pytest.approx(1.0)

    def test_orthogonal_rows(self):
        teacher = init_model([LayerSpec(2, 2, 1)], 2, seed=0)
        student = teacher.snapshot()
        teacher.hidden[0] = np.array([[1.0, 0.0], [1.0, 0.0]])
        student.hidden[0] = np.array([[0.0, 1.0], [0.0, 1.0]])
        sel = TopNSelection([np.array([0, 1])], n=2)
        assert subnetwork_cosine(teacher, student, sel) == 0.0

    def test_random_pair_in_unit_interval(self):
        teacher = init_model([LayerSpec(4, 6, 2)], 3, seed=1)
        student = init_model([LayerSpec(4, 6, 2)], 3, seed=2)
        sel = TopNSelection([np.array([1, 3, 4])], n=3)
        value = subnetwork_cosine(teacher, student, sel)
        assert 0.0 <= value <= 1.0  # non-negative weights force this


class TestRetentionKl:
    def test_identical_batches_zero(self, rng):
        z = rng.normal(size=(4, 3))
        assert retention_kl(z, z.copy(), temperature=8.0) == 0.0

    def test_always_nonnegative(self, rng):
        s = rng.normal(size=(6, 4))
        t = rng.normal(size=(6, 4))
        assert retention_kl(s, t, temperature=2.0) >= 0.0

    def test_two_sample_hand_case(self):
        s = np.array([[1.0, 0.0], [0.0, 0.0]])
        t = np.array([[0.0, 1.0], [2.0, 0.0]])
        temp = 2.0
        expected = np.mean([
            kl_div(softmax_temp(t[i], temp), softmax_temp(s[i], temp))
            for i in range(2)
        ])
        assert retention_kl(s, t, temp) == pytest.approx(expected, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            retention_kl(np.zeros((2, 3)), np.zeros((2, 4)), 1.0)


class TestFinalAvgAccuracy:
    def test_mean_of_last_row(self):
        r = np.array([[0.9, np.nan], [0.8, 0.6]])
        assert final_avg_accuracy(r) == pytest.approx(0.7)


class TestCsvContract:
    def _result(self):
        r = np.full((2, 2), np.nan)
        r[0, 0] = 1.0
        r[1, 0] = 0.5
        r[1, 1] = 0.75
        stats = ActivationStats([3], [1])
        stats.counts = [np.array([2, 0, 2])]
        stats.total_samples = 4
        return RunResult(
            accuracy_matrix=r,
            mean_bwt=-0.5,
            final_avg_accuracy=0.625,
            jaccard_trace=[(1, 10, 0.5)],
            kl_trace=[(1, 10, 0.01)],
            cosine_trace=[(1, 0.9)],
            loss_rows=[(0, 1, 0.6, 0.0, 0.0, 0.6)],
            entropy_summary=[(0, 0.9, 0.1)],
            heatmap_log=[(10, 0, 0, 2)],
            activation_stats=[stats],
        )

    def test_all_files_written_with_headers(self, tmp_path):
        write_run_csvs(self._result(), tmp_path)
        expected_headers = {
            "accuracy_matrix.csv": ["t", "i", "acc"],
            "traces.csv": ["metric", "task", "epoch", "value"],
            "entropy.csv": ["task", "layer", "neuron", "count", "freq", "entropy"],
            "heatmap.csv": ["epoch", "layer", "rank", "neuron_index"],
        }
        for name, header in expected_headers.items():
            with open(tmp_path / name, newline="") as f:
                rows = list(csv.reader(f))
            assert rows[0] == header
            assert len(rows) > 1

    def test_accuracy_matrix_lower_triangle_only(self, tmp_path):
        write_run_csvs(self._result(), tmp_path)
        with open(tmp_path / "accuracy_matrix.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        pairs = [(int(r["t"]), int(r["i"])) for r in rows]
        assert pairs == [(0, 0), (1, 0), (1, 1)]
        assert float(rows[1]["acc"]) == 0.5

    def test_trace_metrics_present(self, tmp_path):
        write_run_csvs(self._result(), tmp_path)
        with open(tmp_path / "traces.csv", newline="") as f:
            metrics = {r["metric"] for r in csv.DictReader(f)}
        assert metrics == {
            "loss_ce", "loss_kd_hidden", "loss_kd_logits", "loss_total",
            "jaccard", "retention_kl", "cosine",
        }

    def test_values_round_trip_exactly(self, tmp_path):
        write_run_csvs(self._result(), tmp_path)
        with open(tmp_path / "entropy.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert float(rows[0]["freq"]) == 0.5
        assert int(rows[1]["count"]) == 0
