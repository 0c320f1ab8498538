import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsecl.data import (
    EmbeddingDimensionError,
    EmbeddingFormatError,
    TaskDataset,
    gen_synthetic,
    load_embeddings,
    load_embeddings_binary,
    load_embeddings_csv,
    save_embeddings_binary,
    save_embeddings_csv,
    split_tasks,
)
from sparsecl.model import LayerSpec
from sparsecl.continual import TrainConfig
from sparsecl.distill import DistillConfig


class TestGenSynthetic:
    def test_shapes_and_labels(self):
        x, y = gen_synthetic(3, 8, 10, 0.2, seed=0)
        assert x.shape == (30, 8)
        np.testing.assert_array_equal(np.unique(y), [0, 1, 2])
        assert np.all(np.bincount(y) == 10)

    def test_tiny_spread_collapses_to_mean(self):
        x, y = gen_synthetic(2, 4, 5, 1e-12, seed=0)
        for c in range(2):
            cluster = x[y == c]
            assert np.max(np.abs(cluster - cluster[0])) < 1e-9

    def test_same_seed_identical(self):
        a = gen_synthetic(3, 6, 4, 0.3, seed=5)
        b = gen_synthetic(3, 6, 4, 0.3, seed=5)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_low_spread_linearly_separable(self):
        x, y = gen_synthetic(2, 16, 50, 0.05, seed=3)
        # Nearest-class-mean classifier as a stand-in for a linear model.
        means = np.stack([x[y == c].mean(axis=0) for c in range(2)])
        pred = np.argmax(x @ means.T, axis=1)
        assert np.mean(pred == y) > 0.99

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            gen_synthetic(0, 4, 5, 0.1, seed=0)
        with pytest.raises(ValueError):
            gen_synthetic(2, 4, 5, 0.0, seed=0)


class TestSplitTasks:
    def test_label_order_assignment(self):
        x, y = gen_synthetic(10, 4, 10, 0.2, seed=0)
        tasks = split_tasks(x, y, 5, 2, 0.2, seed=0)
        assert [t.class_set for t in tasks] == [
            frozenset({0, 1}), frozenset({2, 3}), frozenset({4, 5}),
            frozenset({6, 7}), frozenset({8, 9}),
        ]

    def test_disjoint_union_covers_classes(self):
        x, y = gen_synthetic(10, 4, 10, 0.2, seed=1)
        tasks = split_tasks(x, y, 5, 2, 0.2, seed=1, shuffle_classes=True)
        union = set()
        for t in tasks:
            assert not (union & t.class_set)
            union |= t.class_set
        assert union == set(range(10))

    def test_val_counts(self):
        x, y = gen_synthetic(4, 4, 100, 0.2, seed=0)
        tasks = split_tasks(x, y, 2, 2, 0.2, seed=0)
        for t in tasks:
            assert t.val_x.shape[0] == 40  # 20 per class, 2 classes
            assert t.train_x.shape[0] == 160

    def test_insufficient_classes(self):
        x, y = gen_synthetic(3, 4, 10, 0.2, seed=0)
        with pytest.raises(ValueError):
            split_tasks(x, y, 2, 2, 0.2, seed=0)

    def test_val_fraction_range(self):
        x, y = gen_synthetic(2, 4, 10, 0.2, seed=0)
        with pytest.raises(ValueError):
            split_tasks(x, y, 1, 2, 0.0, seed=0)

    def test_dataset_guards_class_membership(self):
        with pytest.raises(ValueError):
            TaskDataset(
                task_id=0,
                class_set=frozenset({0}),
                train_x=np.zeros((1, 2)),
                train_y=np.array([3]),
                val_x=np.zeros((1, 2)),
                val_y=np.array([0]),
            )

    def test_two_identical_tasks_retain_accuracy(self):
        # Same cluster geometry under two disjoint label pairs: retraining on
        # the clone task should not destroy the first task's accuracy when the
        # evaluation is restricted to the first task's own classes.
        from sparsecl.continual import ContinualState, run_task
        from sparsecl.metrics import evaluate
        from sparsecl.model import init_model

        x0, y0 = gen_synthetic(2, 16, 60, 0.1, seed=42)
        x = np.concatenate([x0, x0])
        y = np.concatenate([y0, y0 + 2])
        tasks = split_tasks(x, y, 2, 2, 0.2, seed=0)
        cfg = TrainConfig(
            epochs_per_task=40, lr=0.1, batch_size=16,
            distill=DistillConfig(n=16), seed=0,
        )
        state = ContinualState(student=init_model([LayerSpec(16, 64, 8)], 4, 0))
        state, _ = run_task(state, tasks[0], cfg)
        acc_before = evaluate(
            state.student, tasks[0].val_x, tasks[0].val_y, allowed_classes=[0, 1]
        )
        state, _ = run_task(state, tasks[1], cfg)
        acc_after = evaluate(
            state.student, tasks[0].val_x, tasks[0].val_y, allowed_classes=[0, 1]
        )
        assert acc_before > 0.9
        assert acc_after >= acc_before - 0.2


class TestBinaryEmbeddings:
    def test_round_trip(self, tmp_path, rng):
        x = rng.normal(size=(7, 5)).astype(np.float32)
        y = rng.integers(0, 3, size=7)
        path = tmp_path / "emb.bin"
        save_embeddings_binary(path, x, y)
        x2, y2 = load_embeddings_binary(path)
        np.testing.assert_array_equal(x2, x.astype(np.float64))
        np.testing.assert_array_equal(y2, y)

    def test_truncated_file(self, tmp_path, rng):
        x = rng.normal(size=(4, 6)).astype(np.float32)
        y = np.zeros(4, dtype=int)
        path = tmp_path / "emb.bin"
        save_embeddings_binary(path, x, y)
        data = path.read_bytes()
        path.write_bytes(data[:-10])
        with pytest.raises(EmbeddingFormatError, match="truncated"):
            load_embeddings_binary(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "emb.bin"
        path.write_bytes(b"SCLE\x01")
        with pytest.raises(EmbeddingFormatError, match="header"):
            load_embeddings_binary(path)

    def test_bad_magic(self, tmp_path, rng):
        x = rng.normal(size=(2, 3)).astype(np.float32)
        path = tmp_path / "emb.bin"
        save_embeddings_binary(path, x, np.zeros(2, dtype=int))
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(EmbeddingFormatError, match="magic"):
            load_embeddings_binary(path)

    def test_label_out_of_declared_range(self, tmp_path, rng):
        x = rng.normal(size=(2, 3)).astype(np.float32)
        path = tmp_path / "emb.bin"
        save_embeddings_binary(path, x, np.array([0, 5]), class_count=2)
        with pytest.raises(EmbeddingFormatError, match="label"):
            load_embeddings_binary(path)


class TestCsvEmbeddings:
    def test_round_trip(self, tmp_path, rng):
        x = rng.normal(size=(6, 4))
        y = rng.integers(0, 3, size=6)
        path = tmp_path / "emb.csv"
        save_embeddings_csv(path, x, y)
        x2, y2 = load_embeddings_csv(path)
        np.testing.assert_array_equal(x2, x)
        np.testing.assert_array_equal(y2, y)

    def test_dimension_mismatch_names_row(self, tmp_path):
        path = tmp_path / "emb.csv"
        path.write_text("0,1.0,2.0\n1,3.0\n")
        with pytest.raises(EmbeddingDimensionError, match="row 1"):
            load_embeddings_csv(path)

    def test_unparsable_row(self, tmp_path):
        path = tmp_path / "emb.csv"
        path.write_text("0,1.0\nnot_a_label,2.0\n")
        with pytest.raises(EmbeddingFormatError, match="row 1"):
            load_embeddings_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "emb.csv"
        path.write_text("")
        with pytest.raises(EmbeddingFormatError, match="no samples"):
            load_embeddings_csv(path)

    def test_format_dispatch(self, tmp_path, rng):
        x = rng.normal(size=(3, 2))
        y = np.array([0, 1, 0])
        csv_path = tmp_path / "e.csv"
        bin_path = tmp_path / "e.bin"
        save_embeddings_csv(csv_path, x, y)
        save_embeddings_binary(bin_path, x, y)
        np.testing.assert_array_equal(load_embeddings(csv_path, "csv")[1], y)
        np.testing.assert_array_equal(load_embeddings(bin_path, "binary")[1], y)
        with pytest.raises(ValueError, match="unknown embedding format"):
            load_embeddings(csv_path, "parquet")

    @given(seed=st.integers(0, 100))
    @settings(deadline=None, max_examples=15)
    def test_binary_round_trip_property(self, tmp_path_factory, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 10))
        d = int(rng.integers(1, 8))
        x = rng.normal(size=(n, d)).astype(np.float32)
        y = rng.integers(0, 4, size=n)
        path = tmp_path_factory.mktemp("emb") / "e.bin"
        save_embeddings_binary(path, x, y)
        x2, y2 = load_embeddings_binary(path)
        np.testing.assert_array_equal(x2, x.astype(np.float64))
        np.testing.assert_array_equal(y2, y)
