import csv
import json

import pytest

from wmstat.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestGenerateDetect:
    @pytest.mark.parametrize("scheme,score", [("gumbel", "ars"), ("inverse", "dif_neg")])
    def test_roundtrip(self, tmp_path, capsys, scheme, score):
        rec = tmp_path / "rec.json"
        code, _, _ = _run(capsys, "generate", "--scheme", scheme, "--key", "9", "--n", "150", "--vocab-size", "100",
                          "--delta-low", "0.3", "--output", str(rec))
        assert code == 0
        code, out, _ = _run(capsys, "detect", "--input", str(rec), "--key", "9", "--scores", score)
        assert code == 0 and json.loads(out)[score]["reject"]
        code, out, _ = _run(capsys, "detect", "--input", str(rec), "--key", "10", "--scores", score)
        assert json.loads(out)[score]["approx_p"] > 1e-4

    def test_missing_input(self, capsys):
        code, _, err = _run(capsys, "detect")
        assert code == 2 and "error" in err


class TestAnalyses:
    def test_crossover(self, capsys):
        code, out, _ = _run(capsys, "crossover")
        assert code == 0 and json.loads(out)["delta"] == pytest.approx(0.17756, abs=1e-3)

    def test_type1_with_config_file(self, tmp_path, capsys):
        conf = tmp_path / "conf.json"
        conf.write_text(json.dumps({"scores": ["ars", "dif_neg"], "vocab_size": 30, "n_grid": "10,20",
                                    "replicates": 20}))
        out_csv = tmp_path / "t1.csv"
        code, _, _ = _run(capsys, "--config", str(conf), "type1", "--replicates", "30", "--output", str(out_csv))
        assert code == 0
        rows = list(csv.DictReader(out_csv.open()))
        assert len(rows) == 4 and {r["score"] for r in rows} == {"ars", "dif_neg"}

    def test_unknown_config_key(self, tmp_path, capsys):
        conf = tmp_path / "conf.json"
        conf.write_text(json.dumps({"bogus": 1}))
        with pytest.raises(SystemExit):
            main(["--config", str(conf), "type1"])

    def test_efficiency_and_tradeoff(self, tmp_path, capsys):
        rates = tmp_path / "rates.csv"
        code, out, _ = _run(capsys, "efficiency", "--scores", "ars;log", "--grid", "0.1,0.5", "--output", str(rates))
        assert code == 0 and len(rates.read_text().splitlines()) == 5
        trace = tmp_path / "trace.json"
        trace.write_text(json.dumps({"kind": "top1", "values": [0.3, 0.6, 0.9, 0.95]}))
        code, out, _ = _run(capsys, "tradeoff", "--trace", str(trace), "--grid", "0.05,0.2,0.5",
                            "--output", str(tmp_path / "t.csv"))
        assert code == 0 and "argmax_delta" in json.loads(out)
