import csv

import numpy as np
import pytest

from simknock import csvio, data_path
from simknock.cli import load_sim_config, main
from simknock.errors import ValidationError
from simknock.knockoffs import DesignMatrix, GaussianModel, normalize_columns
from simknock.stats import Experiment

FIX1 = str(data_path("fixture_study1.csv"))
FIX2 = str(data_path("fixture_study2.csv"))


def body(path):
    with open(path) as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    return rows[0], rows[1:]


def comments(path):
    with open(path) as fh:
        return [line.strip() for line in fh if line.startswith("#")]


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return str(path)


class TestCsvio:
    def test_fmt_round_trip(self):
        rng = np.random.default_rng(0)
        for v in rng.standard_normal(200) * 10.0 ** rng.integers(-300, 300, 200):
            assert float(csvio.fmt(v)) == v
        assert csvio.fmt(True) == "1" and csvio.fmt(np.int64(3)) == "3"

    def test_dataset_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        exp = Experiment(rng.standard_normal(7), DesignMatrix(rng.standard_normal((7, 3)), ["a", "b", "c"]))
        path = tmp_path / "d.csv"
        csvio.write_dataset(path, exp)
        back = csvio.read_dataset(path)
        assert np.array_equal(back.y, exp.y) and np.array_equal(back.x.values, exp.x.values)
        assert back.x.column_names == ("a", "b", "c")

    def test_parse_errors_name_lines(self, tmp_path):
        bad = write_csv(tmp_path / "b.csv", ["y", "x1"], [[1, 2], [3, "oops"]])
        with pytest.raises(ValidationError, match="line 3, column 2"):
            csvio.read_dataset(bad)
        ragged = write_csv(tmp_path / "r.csv", ["y", "x1"], [[1, 2], [3]])
        with pytest.raises(ValidationError, match="line 3"):
            csvio.read_dataset(ragged)
        nonbinary = write_csv(tmp_path / "n.csv", ["y", "x1"], [[0, 2], [2, 1]])
        with pytest.raises(ValidationError, match="0/1"):
            csvio.read_dataset(nonbinary, "binomial")

    def test_model_file(self, tmp_path):
        model = GaussianModel([0.5, -1.0], [[2.0, 0.3], [0.3, 1.0]])
        path = tmp_path / "m.csv"
        csvio.write_model(path, model)
        back = csvio.read_model(path)
        assert np.array_equal(back.mean, model.mean)
        assert np.array_equal(back.covariance, model.covariance)

    def test_config_grid(self):
        axes = csvio.parse_config("a = 1, 2\nb = x  # note\n")
        assert axes == {"a": ["1", "2"], "b": ["x"]}
        assert csvio.expand_grid(axes) == [{"a": "1", "b": "x"}, {"a": "2", "b": "x"}]
        with pytest.raises(ValidationError, match="duplicate"):
            csvio.parse_config("a = 1\na = 2")


class TestSelect:
    def test_fixture_recovers_planted_signal(self, tmp_path, capsys):
        out = tmp_path / "sel.csv"
        assert main(["select", "--data", FIX1, "--data", FIX2, "--out", str(out)]) == 0
        header, rows = body(out)
        assert header == ["feature", "w", "selected"]
        assert [r[0] for r in rows if r[2] == "1"] == ["x1"]
        notes = comments(out)
        assert "# seed=0" in notes and "# combiner=product-diff" in notes
        assert notes[-1].startswith("# summary: threshold=") and notes[-1].endswith("selected=1")
        assert "x1" in capsys.readouterr().err

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            main(["select", "--data", FIX1, "--data", FIX2, "--seed", "7", "--out", str(out)])
        assert a.read_text() == b.read_text()

    def test_column_mismatch(self, tmp_path, capsys):
        header, rows = body(FIX2)
        other = write_csv(tmp_path / "o.csv", [header[0], "z1", *header[2:]], rows)
        assert main(["select", "--data", FIX1, "--data", other]) == 2
        assert "columns differ" in capsys.readouterr().err

    def test_invalid_q(self, capsys):
        assert main(["select", "--data", FIX1, "--q", "1.5"]) == 2
        assert "q must lie in (0, 1)" in capsys.readouterr().err

    def test_intersection_and_screening(self, tmp_path):
        out = tmp_path / "i.csv"
        assert main(["select", "--data", FIX1, "--data", FIX2, "--method", "intersection",
                     "--out", str(out)]) == 0
        assert body(out)[0] == ["feature", "w_study1", "w_study2", "selected"]
        out2 = tmp_path / "s.csv"
        assert main(["select", "--data", FIX1, "--data", FIX2, "--screen-top-d", "3",
                     "--q", "0.3", "--out", str(out2)]) == 0
        header, rows = body(out2)
        assert len(rows) == 3 and rows[0][0] == "x1"
        assert main(["select", "--data", FIX1, "--screen-top-d", "0"]) == 2


class TestSimulate:
    def write(self, tmp_path, text):
        path = tmp_path / "c.cfg"
        path.write_text(text)
        return str(path)

    def test_small_grid(self, tmp_path):
        cfg = self.write(tmp_path, "K = 2\nn = 100\np = 8\ns0 = 2\ns_solo = 0, 1\n"
                                   "amplitude = 2\nreplicates = 3\nseed = 4\n")
        out = tmp_path / "r.csv"
        assert main(["simulate", cfg, "--out", str(out)]) == 0
        header, rows = body(out)
        assert header[-7:] == ["method", "fdr_hat", "fdr_se", "power_hat", "power_se",
                               "failures", "replicates_run"]
        assert len(rows) == 6
        assert [r[header.index("method")] for r in rows[:3]] == ["simultaneous", "pooling",
                                                                 "intersection"]
        assert {r[header.index("s_solo")] for r in rows} == {"0", "1"}
        assert any(c.startswith("# rho=") for c in comments(out))

    def test_bundled_config_parses(self):
        points, methods = load_sim_config(data_path("acceptance.cfg"))
        assert len(points) == 2 and len(methods) == 3
        assert points[0]["sigma"] == (1.0, 2.0)

    @pytest.mark.parametrize("text, needle", [
        ("replicates = 0\n", "replicates"),
        ("methods = union\n", "valid"),
        ("bogus = 1\n", "bogus"),
        ("p = 50\ns0 = 10\ns_solo = 30\n", "p"),
    ])
    def test_validation(self, tmp_path, capsys, text, needle):
        assert main(["simulate", self.write(tmp_path, text)]) == 2
        assert needle in capsys.readouterr().err


class TestKnockoffsAndDiagnose:
    def test_fixed_x_round_trip(self, tmp_path):
        out = tmp_path / "ko.csv"
        assert main(["knockoffs", "--data", FIX1, "--out", str(out)]) == 0
        names, xt, s = csvio.read_knockoffs(out)
        exp = csvio.read_dataset(FIX1)
        assert names == list(exp.x.column_names)
        assert body(out)[0] == [f"ko_{n}" for n in names]
        xn, _ = normalize_columns(exp.x.values)
        g = xn.T @ xn
        assert np.max(np.abs(xt.T @ xt - g)) <= 1e-8
        assert np.max(np.abs(xt.T @ xn - (g - np.diag(s)))) <= 1e-8
        assert "# construction=fixed-x" in comments(out)

    def test_insufficient_rows(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        small = write_csv(tmp_path / "s.csv", ["y", "a", "b", "c"], rng.standard_normal((5, 4)))
        assert main(["knockoffs", "--data", small]) == 2
        assert "n >= 2p" in capsys.readouterr().err

    def test_rank_deficient_is_numerical(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((20, 2))
        data = np.column_stack([rng.standard_normal(20), x, x[:, 0] + x[:, 1]])
        path = write_csv(tmp_path / "d.csv", ["y", "a", "b", "c"], data)
        assert main(["knockoffs", "--data", path]) == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_model_x_deterministic(self, tmp_path):
        model = tmp_path / "m.csv"
        csvio.write_model(model, GaussianModel(np.zeros(5), np.eye(5)))
        outs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            assert main(["knockoffs", "--data", FIX1, "--construction", "model-x-gaussian",
                         "--model", str(model), "--seed", "3", "--out", str(out)]) == 0
            outs.append(out.read_text())
        assert outs[0] == outs[1]
        assert main(["knockoffs", "--data", FIX1, "--construction", "model-x-gaussian"]) == 2

    def test_diagnose_equal_models(self, tmp_path):
        ko = tmp_path / "ko.csv"
        model = tmp_path / "m.csv"
        csvio.write_model(model, GaussianModel(np.full(5, 0.1), 2 * np.eye(5)))
        main(["knockoffs", "--data", FIX1, "--construction", "model-x-gaussian",
              "--model", str(model), "--out", str(ko)])
        out = tmp_path / "kl.csv"
        assert main(["diagnose", "--data", FIX1, "--knockoffs", str(ko), "--p-model", str(model),
                     "--q-model", str(model), "--out", str(out)]) == 0
        header, rows = body(out)
        assert header == ["study", "x1", "x2", "x3", "x4", "x5"]
        assert [r[0] for r in rows] == ["study1", "min"]
        assert all(abs(float(v)) <= 1e-8 for r in rows for v in r[1:])

    def test_diagnose_univariate_closed_form(self, tmp_path):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(50)
        data = write_csv(tmp_path / "d.csv", ["y", "x1"],
                         np.column_stack([rng.standard_normal(50), x]))
        pm, qm = tmp_path / "p.csv", tmp_path / "q.csv"
        csvio.write_model(pm, GaussianModel([0.0], [[1.0]]))
        csvio.write_model(qm, GaussianModel([0.6], [[1.0]]))
        ko = tmp_path / "ko.csv"
        main(["knockoffs", "--data", data, "--construction", "model-x-gaussian",
              "--model", str(qm), "--out", str(ko)])
        out = tmp_path / "kl.csv"
        assert main(["diagnose", "--data", data, "--knockoffs", str(ko), "--p-model", str(pm),
                     "--q-model", str(qm), "--out", str(out)]) == 0
        _, xt, _ = csvio.read_knockoffs(ko)
        kl = float(body(out)[1][0][1])
        assert kl == pytest.approx(0.6 * np.sum(xt[:, 0] - x), abs=1e-8)

    def test_asymmetric_covariance(self, tmp_path, capsys):
        bad = write_csv(tmp_path / "m.csv", ["0", "0"], [[1.0, 0.5], [0.4, 1.0]])
        good = tmp_path / "g.csv"
        csvio.write_model(good, GaussianModel(np.zeros(5), np.eye(5)))
        assert main(["diagnose", "--data", FIX1, "--knockoffs", FIX1, "--p-model", bad,
                     "--q-model", str(good)]) == 2
        assert "not symmetric" in capsys.readouterr().err

    def test_non_pd_model_is_numerical(self, tmp_path):
        bad = write_csv(tmp_path / "m.csv", ["0", "0"], [[1.0, 1.0], [1.0, 1.0]])
        assert main(["knockoffs", "--data", FIX1, "--construction", "model-x-gaussian",
                     "--model", bad]) == 3
