import numpy as np
import pytest

from pqrlearn import load_model, load_separation, stream
from pqrlearn.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main


@pytest.fixture
def small_dataset(tmp_path):
    rng = np.random.default_rng(21)
    path = tmp_path / "data.svm"
    lines = []
    for _ in range(400):
        support = sorted(int(i) for i in rng.choice(np.arange(1, 13), 3, replace=False))
        feats = " ".join(f"{i}:{rng.uniform(0.5, 1.5):.3f}" for i in support)
        label = f"{rng.uniform(1, 5):.3f}"
        lines.append(f"{label} {feats}")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def binary_dataset(tmp_path):
    rng = np.random.default_rng(22)
    path = tmp_path / "binary.svm"
    lines = []
    for _ in range(300):
        support = sorted(int(i) for i in rng.choice(np.arange(1, 10), 2, replace=False))
        feats = " ".join(f"{i}:1" for i in support)
        label = "1" if rng.random() < 0.5 else "-1"
        lines.append(f"{label} {feats}")
    path.write_text("\n".join(lines) + "\n")
    return path


class TestSplitCommand:
    def test_split_and_determinism(self, small_dataset, tmp_path):
        outs = {name: tmp_path / f"{name}.svm" for name in ("train", "valid", "test")}
        argv = ["split", str(small_dataset), "--fractions", "0.8,0.1,0.1", "--seed", "5",
                "--train", str(outs["train"]), "--validation", str(outs["valid"]),
                "--test", str(outs["test"])]
        assert main(argv) == EXIT_OK
        first = {k: p.read_bytes() for k, p in outs.items()}
        assert main(argv) == EXIT_OK
        assert {k: p.read_bytes() for k, p in outs.items()} == first
        total = sum(len(p.read_text().splitlines()) for p in outs.values())
        assert total == 400

    def test_bad_fractions_exit_config(self, small_dataset, tmp_path):
        argv = ["split", str(small_dataset), "--fractions", "0.9,0.2,0.1",
                "--train", str(tmp_path / "a"), "--validation", str(tmp_path / "b"),
                "--test", str(tmp_path / "c")]
        assert main(argv) == EXIT_CONFIG

    def test_missing_input_exit_io(self, tmp_path):
        argv = ["split", str(tmp_path / "nope.svm"),
                "--train", str(tmp_path / "a"), "--validation", str(tmp_path / "b"),
                "--test", str(tmp_path / "c")]
        assert main(argv) == EXIT_IO


class TestCountCommand:
    def test_counts_match_hand_count(self, tmp_path, capsys):
        data = tmp_path / "tiny.svm"
        data.write_text("1 1:1 2:1\n0 2:1 3:1\n1 2:1\n")
        out = tmp_path / "counts.txt"
        assert main(["count", str(data), "--output", str(out)]) == EXIT_OK
        assert out.read_text() == "1 1\n2 3\n3 1\n"

    def test_full_fraction_deterministic(self, small_dataset, tmp_path):
        out = tmp_path / "counts.txt"
        main(["count", str(small_dataset), "--output", str(out), "--sample-fraction", "1.0"])
        first = out.read_bytes()
        main(["count", str(small_dataset), "--output", str(out), "--sample-fraction", "1.0"])
        assert out.read_bytes() == first

    def test_sampled_counts_seeded(self, small_dataset, tmp_path):
        out_a = tmp_path / "a.txt"
        out_b = tmp_path / "b.txt"
        argv = ["count", str(small_dataset), "--sample-fraction", "0.5", "--seed", "9"]
        main(argv + ["--output", str(out_a)])
        main(argv + ["--output", str(out_b)])
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_unreadable_path(self, tmp_path):
        assert main(["count", str(tmp_path / "missing.svm"),
                     "--output", str(tmp_path / "c.txt")]) == EXIT_IO

    def test_corrupt_data_exit_io(self, tmp_path):
        data = tmp_path / "corrupt.svm"
        data.write_text("1 1:1\noops\n")
        assert main(["count", str(data), "--output", str(tmp_path / "c.txt")]) == EXIT_IO


class TestTrainCommand:
    def test_train_writes_model_and_summary(self, small_dataset, tmp_path, capsys):
        model = tmp_path / "model.txt"
        argv = ["train", str(small_dataset), "--task", "regression", "--model", str(model),
                "--k", "4", "--alpha", "0.3", "--l1", "0.1"]
        assert main(argv) == EXIT_OK
        out = capsys.readouterr().out
        assert "task=regression" in out and "rmse=" in out
        state, separation, index_map = load_model(model)
        assert separation.k == 4
        assert state.params.alpha == 0.3

    def test_rerun_byte_identical(self, small_dataset, tmp_path):
        model = tmp_path / "model.txt"
        argv = ["train", str(small_dataset), "--task", "regression", "--model", str(model), "--k", "3"]
        main(argv)
        first = model.read_bytes()
        main(argv)
        assert model.read_bytes() == first

    def test_l1_saturation_empty_model(self, binary_dataset, tmp_path, capsys):
        model = tmp_path / "model.txt"
        main(["train", str(binary_dataset), "--task", "classification", "--model", str(model),
              "--k", "2", "--l1", "1e9"])
        train_out = capsys.readouterr().out
        state, _, index_map = load_model(model)
        assert all(state.weight(slot) == 0.0 for slot, _, _ in state.nonzero_items())
        preds = tmp_path / "preds.txt"
        main(["predict", str(binary_dataset), "--model", str(model), "--output", str(preds)])
        assert set(preds.read_text().splitlines()) == {"0.5"}
        # with every weight pinned at zero the progressive and post-hoc passes coincide
        main(["eval", str(binary_dataset), "--model", str(model)])
        eval_out = capsys.readouterr().out
        assert train_out.split("logloss=")[1] == eval_out.split("logloss=")[1]

    def test_separation_file_reused(self, small_dataset, tmp_path):
        sep_path = tmp_path / "sep.txt"
        model_a = tmp_path / "a.txt"
        model_b = tmp_path / "b.txt"
        main(["train", str(small_dataset), "--task", "regression", "--model", str(model_a),
              "--k", "5", "--save-sep", str(sep_path)])
        separation = load_separation(sep_path)
        assert separation.k == 5
        main(["train", str(small_dataset), "--task", "regression", "--model", str(model_b),
              "--sep", str(sep_path)])
        assert model_a.read_bytes() == model_b.read_bytes()

    def test_default_k_is_ceil_sqrt_d(self, small_dataset, tmp_path):
        model = tmp_path / "model.txt"
        main(["train", str(small_dataset), "--task", "regression", "--model", str(model)])
        _, separation, _ = load_model(model)
        assert separation.d == 12
        assert separation.k == 4  # ceil(sqrt(12))

    def test_checkpoints_in_report(self, small_dataset, tmp_path):
        model = tmp_path / "model.txt"
        report = tmp_path / "report.csv"
        main(["train", str(small_dataset), "--task", "regression", "--model", str(model),
              "--k", "2", "--checkpoints", "10,100,400", "--report", str(report)])
        lines = report.read_text().splitlines()
        assert lines[0] == "checkpoint,cumulative_loss"
        assert [row.split(",")[0] for row in lines[1:]] == ["10", "100", "400"]

    def test_multi_epoch(self, small_dataset, tmp_path):
        model_1 = tmp_path / "e1.txt"
        model_3 = tmp_path / "e3.txt"
        main(["train", str(small_dataset), "--task", "regression", "--model", str(model_1), "--k", "2"])
        main(["train", str(small_dataset), "--task", "regression", "--model", str(model_3),
              "--k", "2", "--epochs", "3"])
        state_1, _, _ = load_model(model_1)
        state_3, _, _ = load_model(model_3)
        assert state_3.rounds_seen == 3 * state_1.rounds_seen

    def test_binary_labels_required_for_classification(self, small_dataset, tmp_path):
        assert main(["train", str(small_dataset), "--task", "classification",
                     "--model", str(tmp_path / "m.txt"), "--k", "2"]) == EXIT_CONFIG

    def test_bad_alpha_exit_config(self, small_dataset, tmp_path):
        assert main(["train", str(small_dataset), "--task", "regression",
                     "--model", str(tmp_path / "m.txt"), "--alpha", "-1"]) == EXIT_CONFIG


class TestEvalCommand:
    def test_eval_matches_training_metrics(self, small_dataset, tmp_path, capsys):
        model = tmp_path / "model.txt"
        main(["train", str(small_dataset), "--task", "regression", "--model", str(model), "--k", "3"])
        capsys.readouterr()
        assert main(["eval", str(small_dataset), "--model", str(model)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "task=regression" in out and "instances=400" in out

    def test_eval_pure_no_mutation(self, small_dataset, tmp_path):
        model = tmp_path / "model.txt"
        main(["train", str(small_dataset), "--task", "regression", "--model", str(model), "--k", "3"])
        before = model.read_bytes()
        main(["eval", str(small_dataset), "--model", str(model)])
        assert model.read_bytes() == before

    def test_empty_eval_file_rejected(self, small_dataset, tmp_path):
        model = tmp_path / "model.txt"
        main(["train", str(small_dataset), "--task", "regression", "--model", str(model), "--k", "2"])
        empty = tmp_path / "empty.svm"
        empty.write_text("")
        assert main(["eval", str(empty), "--model", str(model)]) == EXIT_CONFIG

    def test_task_mismatch_rejected(self, small_dataset, binary_dataset, tmp_path):
        model = tmp_path / "clf.txt"
        main(["train", str(binary_dataset), "--task", "classification", "--model", str(model), "--k", "2"])
        assert main(["eval", str(small_dataset), "--model", str(model)]) == EXIT_CONFIG

    def test_dimension_mismatch_rejected(self, small_dataset, tmp_path):
        model = tmp_path / "model.txt"
        main(["train", str(small_dataset), "--task", "regression", "--model", str(model), "--k", "2"])
        wide = tmp_path / "wide.svm"
        wide.write_text("1 99:1\n")
        assert main(["eval", str(wide), "--model", str(model)]) == EXIT_CONFIG

    def test_classification_metrics(self, binary_dataset, tmp_path, capsys):
        model = tmp_path / "clf.txt"
        main(["train", str(binary_dataset), "--task", "classification", "--model", str(model),
              "--k", "3", "--l1", "0.01"])
        capsys.readouterr()
        main(["eval", str(binary_dataset), "--model", str(model)])
        out = capsys.readouterr().out
        assert "auc=" in out and "logloss=" in out


class TestPredictCommand:
    def test_line_count_and_rerun_identical(self, small_dataset, tmp_path):
        model = tmp_path / "model.txt"
        main(["train", str(small_dataset), "--task", "regression", "--model", str(model), "--k", "2"])
        out = tmp_path / "preds.txt"
        main(["predict", str(small_dataset), "--model", str(model), "--output", str(out)])
        first = out.read_bytes()
        assert len(first.decode().splitlines()) == 400
        main(["predict", str(small_dataset), "--model", str(model), "--output", str(out)])
        assert out.read_bytes() == first

    def test_clip_ratings(self, tmp_path):
        data = tmp_path / "extreme.svm"
        data.write_text("".join("40 1:1\n" for _ in range(300)))
        model = tmp_path / "model.txt"
        main(["train", str(data), "--task", "regression", "--model", str(model),
              "--k", "0", "--alpha", "1", "--l1", "0"])
        out = tmp_path / "preds.txt"
        main(["predict", str(data), "--model", str(model), "--output", str(out), "--clip-ratings"])
        values = [float(v) for v in out.read_text().splitlines()]
        assert max(values) <= 5.0 and min(values) >= 1.0


class TestPipeline:
    def test_full_pipeline_reproducible(self, small_dataset, tmp_path):
        def run(prefix):
            base = tmp_path / prefix
            base.mkdir()
            paths = {
                "train": base / "train.svm", "valid": base / "valid.svm", "test": base / "test.svm",
                "counts": base / "counts.txt", "model": base / "model.txt",
                "report": base / "report.csv", "preds": base / "preds.txt",
            }
            main(["split", str(small_dataset), "--seed", "3",
                  "--train", str(paths["train"]), "--validation", str(paths["valid"]),
                  "--test", str(paths["test"])])
            main(["count", str(paths["train"]), "--output", str(paths["counts"])])
            main(["train", str(paths["train"]), "--task", "regression",
                  "--model", str(paths["model"]), "--k", "4", "--checkpoints", "50,200"])
            main(["eval", str(paths["test"]), "--model", str(paths["model"]),
                  "--report", str(paths["report"])])
            main(["predict", str(paths["test"]), "--model", str(paths["model"]),
                  "--output", str(paths["preds"])])
            return {k: p.read_bytes() for k, p in paths.items()}

        assert run("a") == run("b")


def test_bias_only_training_learns_constant(tmp_path, capsys):
    data = tmp_path / "const.svm"
    data.write_text("".join("2.5 1:1\n" for _ in range(1000)))
    model = tmp_path / "model.txt"
    assert main(["train", str(data), "--task", "regression", "--model", str(model),
                 "--k", "0", "--alpha", "1.0", "--l1", "0", "--l2", "0"]) == EXIT_OK
    out = capsys.readouterr().out
    rmse_value = float(out.split("rmse=")[1].split()[0])
    assert rmse_value < 0.1


def test_stream_parse_error_exit_io(tmp_path):
    data = tmp_path / "bad.svm"
    data.write_text("1 1:1\nnot a line\n")
    assert main(["train", str(data), "--task", "regression",
                 "--model", str(tmp_path / "m.txt"), "--k", "1"]) == EXIT_IO
