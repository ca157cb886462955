"""End-to-end CLI runs over a small synthetic dataset."""

import csv
import json

import pytest

from ganc.cli import main
from ganc.io_utils import read_json
from ganc.synthetic import generate_ratings


@pytest.fixture(scope="module")
def dataset_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "ratings.csv"
    ratings = generate_ratings(n_users=80, n_items=160, seed=21)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user", "item", "rating"])
        for r in ratings:
            w.writerow([r.user_id, r.item_id, r.value])
    return path


@pytest.fixture(scope="module")
def split_dir(dataset_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "split"
    code = main(["split", "--dataset", str(dataset_csv), "--format", "csv",
                 "--kappa", "0.5", "--tau", "20", "--seed", "0",
                 "--out", str(out)])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def prefs_dir(split_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "prefs"
    code = main(["prefs", "--split", str(split_dir), "--model", "generalized",
                 "--out", str(out)])
    assert code == 0
    return out


class TestSplit:
    def test_artifacts_exist(self, split_dir):
        assert (split_dir / "train.csv").exists()
        assert (split_dir / "test.csv").exists()
        manifest = read_json(split_dir / "split.json")
        assert manifest["kappa"] == 0.5 and manifest["tau"] == 20

    def test_rerun_is_byte_identical(self, dataset_csv, split_dir, tmp_path):
        out = tmp_path / "again"
        assert main(["split", "--dataset", str(dataset_csv), "--format", "csv",
                     "--kappa", "0.5", "--tau", "20", "--seed", "0",
                     "--out", str(out)]) == 0
        assert (out / "train.csv").read_bytes() == (split_dir / "train.csv").read_bytes()
        assert (out / "test.csv").read_bytes() == (split_dir / "test.csv").read_bytes()

    def test_missing_file_exits_2_without_outputs(self, tmp_path):
        out = tmp_path / "never"
        code = main(["split", "--dataset", str(tmp_path / "nope.csv"),
                     "--format", "csv", "--out", str(out)])
        assert code == 2
        assert not out.exists()

    def test_bad_kappa_exits_1(self, dataset_csv, tmp_path):
        code = main(["split", "--dataset", str(dataset_csv), "--format", "csv",
                     "--kappa", "1.5", "--out", str(tmp_path / "x")])
        assert code == 1


class TestPrefs:
    def test_generalized_converges(self, prefs_dir):
        manifest = read_json(prefs_dir / "prefs.json")
        assert manifest["converged"] is True
        assert manifest["iterations"] <= 100
        assert (prefs_dir / "weights.csv").exists()

    def test_constant_writes_constant(self, split_dir, tmp_path):
        out = tmp_path / "const"
        assert main(["prefs", "--split", str(split_dir), "--model", "constant",
                     "--constant", "0.5", "--out", str(out)]) == 0
        with open(out / "theta.csv") as fh:
            rows = list(csv.reader(fh))[1:]
        assert all(float(v) == 0.5 for _, v in rows)

    def test_tfidf_equals_generalized_zero_iters(self, split_dir, tmp_path):
        a = tmp_path / "tfidf"
        b = tmp_path / "gen0"
        assert main(["prefs", "--split", str(split_dir), "--model", "tfidf",
                     "--out", str(a)]) == 0
        assert main(["prefs", "--split", str(split_dir), "--model", "generalized",
                     "--max-iters", "0", "--out", str(b)]) == 0
        assert (a / "theta.csv").read_bytes() == (b / "theta.csv").read_bytes()

    def test_unknown_model_exits_1(self, split_dir, tmp_path):
        assert main(["prefs", "--split", str(split_dir), "--model", "psychic",
                     "--out", str(tmp_path / "x")]) == 1


@pytest.fixture(scope="module")
def rec_dir(split_dir, prefs_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "rec"
    code = main(["recommend", "--split", str(split_dir), "--prefs",
                 str(prefs_dir), "--arec", "pop", "--crec", "dyn",
                 "--n", "5", "--s", "30", "--run-seed", "0",
                 "--out", str(out)])
    assert code == 0
    return out


class TestRecommendEvaluate:
    def test_manifest_records_template(self, rec_dir):
        manifest = read_json(rec_dir / "run.json")
        assert manifest["template"] == "GANC(Pop, theta^G, Dyn)"
        assert manifest["phase_seconds"] is not None
        assert manifest["split_sha256"]

    def test_determinism_across_reruns_and_worker_counts(self, split_dir,
                                                         prefs_dir, rec_dir,
                                                         tmp_path):
        out = tmp_path / "again"
        assert main(["recommend", "--split", str(split_dir), "--prefs",
                     str(prefs_dir), "--arec", "pop", "--crec", "dyn",
                     "--n", "5", "--s", "30", "--run-seed", "0",
                     "--workers", "4", "--out", str(out)]) == 0
        assert (out / "topn.csv").read_bytes() == (rec_dir / "topn.csv").read_bytes()

    def test_rsvd_without_model_dir_exits_1(self, split_dir, prefs_dir, tmp_path):
        assert main(["recommend", "--split", str(split_dir), "--prefs",
                     str(prefs_dir), "--arec", "rsvd", "--crec", "stat",
                     "--n", "5", "--out", str(tmp_path / "x")]) == 1

    def test_stat_crec_with_zero_theta_matches_pop(self, split_dir, tmp_path):
        prefs = tmp_path / "zero"
        assert main(["prefs", "--split", str(split_dir), "--model", "constant",
                     "--constant", "0.0", "--out", str(prefs)]) == 0
        out = tmp_path / "rec"
        assert main(["recommend", "--split", str(split_dir), "--prefs", str(prefs),
                     "--arec", "pop", "--crec", "stat", "--n", "5",
                     "--out", str(out)]) == 0
        report_dir = tmp_path / "eval"
        assert main(["evaluate", "--split", str(split_dir), "--topn", str(out),
                     "--out", str(report_dir)]) == 0
        report = json.loads((report_dir / "report.json").read_text())
        assert report["lt_accuracy"] <= 0.2  # popular items dominate

    def test_evaluate_writes_report(self, split_dir, rec_dir, tmp_path):
        out = tmp_path / "eval"
        assert main(["evaluate", "--split", str(split_dir), "--topn", str(rec_dir),
                     "--per-user", "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert set(report) == {"n", "protocol", "precision", "recall", "f_measure",
                               "lt_accuracy", "strat_recall", "coverage", "gini"}
        assert (out / "per_user.csv").exists()

    def test_stale_split_rejected(self, dataset_csv, rec_dir, tmp_path):
        other_split = tmp_path / "split2"
        assert main(["split", "--dataset", str(dataset_csv), "--format", "csv",
                     "--kappa", "0.5", "--tau", "20", "--seed", "9",
                     "--out", str(other_split)]) == 0
        code = main(["evaluate", "--split", str(other_split), "--topn",
                     str(rec_dir), "--out", str(tmp_path / "eval")])
        assert code == 2

    def test_tampered_collection_rejected(self, split_dir, rec_dir, tmp_path):
        bad = tmp_path / "bad-rec"
        bad.mkdir()
        rows = (rec_dir / "topn.csv").read_text().splitlines()
        rows[1] = rows[1].rsplit(",", 1)[0] + ",bogus-item"
        (bad / "topn.csv").write_text("\n".join(rows) + "\n")
        (bad / "run.json").write_text((rec_dir / "run.json").read_text())
        code = main(["evaluate", "--split", str(split_dir), "--topn", str(bad),
                     "--out", str(tmp_path / "eval")])
        assert code == 3

    def test_protocol_mismatch_rejected(self, split_dir, rec_dir, tmp_path):
        code = main(["evaluate", "--split", str(split_dir), "--topn", str(rec_dir),
                     "--protocol", "rated_test_items",
                     "--out", str(tmp_path / "eval")])
        assert code == 3

    def test_rsvd_pipeline(self, split_dir, prefs_dir, tmp_path):
        mf = tmp_path / "mf"
        assert main(["train-rsvd", "--split", str(split_dir), "--g", "8",
                     "--lam", "0.05", "--eta", "0.03", "--epochs", "4",
                     "--out", str(mf)]) == 0
        manifest = read_json(mf / "mf.json")
        assert manifest["rmse_test"] is not None
        out = tmp_path / "rec"
        assert main(["recommend", "--split", str(split_dir), "--prefs",
                     str(prefs_dir), "--arec", "rsvd", "--mf", str(mf),
                     "--crec", "rand", "--n", "5", "--out", str(out)]) == 0
        assert read_json(out / "run.json")["template"] == "GANC(RSVD, theta^G, Rand)"

    def test_external_scores_pipeline(self, split_dir, prefs_dir, tmp_path):
        scores = tmp_path / "scores.csv"
        with open(split_dir / "train.csv") as fh:
            users = sorted({row[0] for row in list(csv.reader(fh))[1:]})
        with open(split_dir / "train.csv") as fh:
            items = sorted({row[1] for row in list(csv.reader(fh))[1:]})
        with open(scores, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["user", "item", "score"])
            for k, u in enumerate(users):
                for j, i in enumerate(items[:10]):
                    w.writerow([u, i, (k * 7 + j * 3) % 11])
        out = tmp_path / "rec"
        assert main(["recommend", "--split", str(split_dir), "--prefs",
                     str(prefs_dir), "--arec", "external",
                     "--external-scores", str(scores), "--crec", "stat",
                     "--n", "3", "--out", str(out)]) == 0


class TestSweep:
    def test_rows_and_clamping(self, split_dir, prefs_dir, tmp_path):
        out = tmp_path / "sweep"
        code = main(["sweep", "--split", str(split_dir), "--prefs", str(prefs_dir),
                     "--arec", "pop", "--n", "5", "--s-values", "10,40,5000",
                     "--reps", "2", "--run-seed", "0", "--out", str(out)])
        assert code == 0
        with open(out / "sweep.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["s", "f_measure", "coverage", "gini", "lt_accuracy"]
        assert [r[0] for r in rows[1:]] == ["10", "40", "5000"]

    def test_single_value_matches_manual_average(self, split_dir, prefs_dir, tmp_path):
        out = tmp_path / "sweep1"
        assert main(["sweep", "--split", str(split_dir), "--prefs", str(prefs_dir),
                     "--arec", "pop", "--n", "5", "--s-values", "20",
                     "--reps", "1", "--run-seed", "3", "--out", str(out)]) == 0
        rec = tmp_path / "rec"
        assert main(["recommend", "--split", str(split_dir), "--prefs",
                     str(prefs_dir), "--arec", "pop", "--crec", "dyn",
                     "--n", "5", "--s", "20", "--run-seed", "3",
                     "--out", str(rec)]) == 0
        ev = tmp_path / "eval"
        assert main(["evaluate", "--split", str(split_dir), "--topn", str(rec),
                     "--out", str(ev)]) == 0
        report = json.loads((ev / "report.json").read_text())
        with open(out / "sweep.csv") as fh:
            row = list(csv.reader(fh))[1]
        assert float(row[2]) == pytest.approx(report["coverage"])
        assert float(row[1]) == pytest.approx(report["f_measure"])


class TestStatsCommand:
    def test_profile_written(self, split_dir, tmp_path):
        out = tmp_path / "stats"
        assert main(["stats", "--split", str(split_dir), "--bins", "10",
                     "--out", str(out)]) == 0
        with open(out / "profile.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["bin_center", "mean_avg_popularity"]
        assert len(rows) > 1


class TestConfigFile:
    def test_config_supplies_defaults_and_flags_override(self, dataset_csv, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            f"dataset = {dataset_csv}\n"
            "format = csv\n"
            "kappa = 0.5\n"
            "tau = 20\n"
            "seed = 5  # trailing comment\n"
            f"out = {tmp_path / 'cfg-out'}\n"
        )
        assert main(["split", "--config", str(cfg)]) == 0
        manifest = read_json(tmp_path / "cfg-out" / "split.json")
        assert manifest["seed"] == 5
        assert main(["split", "--config", str(cfg), "--seed", "7",
                     "--out", str(tmp_path / "cfg-out2")]) == 0
        assert read_json(tmp_path / "cfg-out2" / "split.json")["seed"] == 7

    def test_unknown_config_key_exits_1(self, dataset_csv, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("dataset = x\nwibble = 3\n")
        assert main(["split", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 1

    def test_usage_error_exit_code(self):
        assert main(["split"]) == 1
        assert main(["not-a-command"]) == 1
