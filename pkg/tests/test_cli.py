"""CLI: subcommand behavior, exit codes, manifests, determinism."""

import json
from fractions import Fraction

import pytest

import projrel
from projrel.cli import main
from projrel.stats import WorldletDistribution, table1_rows
from util import SIG, star_world


@pytest.fixture()
def files(tmp_path):
    rows = table1_rows()
    paths = {}
    for name, dist in rows.items():
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(dist.to_json()))
        paths[name] = str(p)
    w = star_world(4)
    p = tmp_path / "star4.json"
    p.write_text(json.dumps(w.to_json(include_signature=True)))
    paths["star4"] = str(p)
    p = tmp_path / "er.json"
    p.write_text(json.dumps(projrel.erdos_renyi_model().to_json()))
    paths["er"] = str(p)
    return paths


def run(capsys, *argv) -> tuple[int, str]:
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


class TestBasicCommands:
    def test_freq_star(self, capsys, files):
        code, out = run(capsys, "freq", "--world", files["star4"], "--k", "2")
        assert code == 0
        dist = json.loads(out)["distribution"]
        probs = {e["prob"] for e in dist["entries"]}
        assert probs == {"1/2", "1/4"}

    def test_table1_rows_exact(self, capsys):
        code, out = run(capsys, "table1")
        assert code == 0
        rows = {r["name"]: r for r in json.loads(out)["rows"]}
        assert [c["per_world_prob"] for c in rows["plus"]["classes"]] == [
            "0",
            "1/3",
            "0",
            "0",
        ]
        assert [c["size"] for c in rows["plus"]["classes"]] == [1, 3, 3, 1]
        cls = rows["plus"]["classification"]
        assert cls["extendable"] == {"4": True, "5": False}
        assert cls["modularity_violations"] == 1

    def test_check_extendable(self, capsys, files):
        code, out = run(capsys, "check-extendable", "--dist", files["plus"], "--n", "4")
        assert code == 0
        obj = json.loads(out)
        assert obj["status"] == "feasible"
        assert obj["weights"][0]["weight"] == "1"

    def test_check_modularity(self, capsys, files):
        code, out = run(capsys, "check-modularity", "--dist", files["plus"])
        assert code == 0
        obj = json.loads(out)
        assert len(obj["violations"]) == 1
        assert obj["violations"][0]["p"] == "1/3"

    def test_check_exchangeable(self, capsys, files):
        code, out = run(capsys, "check-exchangeable", "--dist", files["bipart"])
        assert code == 0 and json.loads(out)["exchangeable"] is True

    def test_enum_worlds(self, capsys):
        code, out = run(capsys, "enum-worlds", "--n", "2")
        assert code == 0
        lines = out.strip().split("\n")
        assert len(lines) == 17  # manifest line + 16 worlds

    def test_cells(self, capsys):
        code, out = run(capsys, "cells", "--m", "2")
        assert code == 0
        assert len(json.loads(out)["cells"]) == 4

    def test_cells_custom_signature(self, capsys, tmp_path):
        sig = projrel.Signature((("c", 1), ("e", 2)))
        p = tmp_path / "sig.json"
        p.write_text(json.dumps(sig.to_json()))
        code, out = run(capsys, "cells", "--signature", str(p), "--m", "1")
        assert code == 0
        assert len(json.loads(out)["cells"]) == 4  # 2 unary x 2 loop states

    def test_freq_with_signature_flag(self, capsys, tmp_path):
        sig = projrel.Signature((("c", 1), ("e", 2)))
        sp = tmp_path / "sig.json"
        sp.write_text(json.dumps(sig.to_json()))
        w = projrel.World.build(sig, 3, {"c": [(1,)], "e": [(1, 2)]})
        wp = tmp_path / "w.json"
        wp.write_text(json.dumps(w.to_json()))
        code, out = run(
            capsys, "freq", "--world", str(wp), "--signature", str(sp), "--k", "2"
        )
        assert code == 0
        entries = json.loads(out)["distribution"]["entries"]
        assert sum(1 for _ in entries) > 0

    def test_marginalize_plus(self, capsys, files):
        code, out = run(capsys, "marginalize", "--dist", files["plus"], "--m", "2")
        assert code == 0
        dist = WorldletDistribution.from_json(json.loads(out)["distribution"])
        empty = projrel.World.build(SIG, 2)
        assert dist.prob(empty) == Fraction(2, 3)

    def test_fenstad(self, capsys, files):
        code, out = run(capsys, "fenstad", "--dist", files["plus"], "--k", "2")
        assert code == 0
        dist = WorldletDistribution.from_json(json.loads(out)["distribution"])
        assert dist.prob(projrel.World.build(SIG, 2)) == Fraction(2, 3)

    def test_bound(self, capsys):
        code, out = run(capsys, "bound", "--n", "30", "--k", "3", "--t", "1/10", "--worldlets", "8")
        assert code == 0
        obj = json.loads(out)
        assert obj["min_n_below_one"] == 417

    def test_search_realizer(self, capsys, files):
        code, out = run(capsys, "search-realizer", "--dist", files["bipart"], "--n", "6")
        assert code == 0
        assert json.loads(out)["max_deviation"] == "1/20"

    def test_scatter_csv(self, capsys):
        import csv
        import io

        code, out = run(capsys, "scatter", "--k", "3", "--n", "3")
        assert code == 0
        body = out.split("\n", 1)[1]
        rows = list(csv.reader(io.StringIO(body)))
        assert len(rows) == 5  # header + 4 classes

    def test_ahk_sample_jsonl(self, capsys, files):
        code, out = run(
            capsys, "ahk-sample", "--model", files["er"], "--n", "4", "--count", "3",
            "--seed", "7",
        )
        assert code == 0
        lines = out.strip().split("\n")
        assert len(lines) == 4
        assert json.loads(lines[1])["index"] == 0

    def test_ahk_verify(self, capsys, files):
        code, out = run(
            capsys, "ahk-verify", "--model", files["er"],
            "--checks", "equivariance,exchangeability",
            "--trials", "100", "--samples", "4000",
        )
        assert code == 0
        obj = json.loads(out)
        assert obj["equivariance"]["2"]["passed"]
        assert obj["exchangeability"]["passed"]

    def test_figure2(self, capsys, tmp_path):
        out_dir = str(tmp_path / "fig2")
        code, _ = run(capsys, "figure2", "--out-dir", out_dir)
        assert code == 0
        verdicts = json.loads((tmp_path / "fig2" / "verdicts.json").read_text())
        assert verdicts["plus_extendable"] == {
            "3": True,
            "4": True,
            "5": False,
            "6": False,
        }
        n3 = (tmp_path / "fig2" / "scatter_n3.csv").read_text().strip().split("\n")
        assert len(n3) == 2 + 4


class TestExitCodes:
    def test_budget_exceeded_is_2(self, capsys):
        code, out = run(capsys, "enum-worlds", "--n", "12")
        assert code == 2
        assert json.loads(out)["error"]["type"] == "resource-limit"

    def test_domain_error_is_1(self, capsys, tmp_path):
        fwd = projrel.World.build(SIG, 2, {"e": [(1, 2)]})
        dist = WorldletDistribution(SIG, 2, {fwd: Fraction(1)})
        p = tmp_path / "directed.json"
        p.write_text(json.dumps(dist.to_json()))
        code, out = run(capsys, "check-extendable", "--dist", str(p), "--n", "3")
        assert code == 1
        assert json.loads(out)["error"]["type"] == "domain"

    def test_io_error_is_3(self, capsys):
        code, out = run(capsys, "marginalize", "--dist", "/nonexistent.json", "--m", "2")
        assert code == 3

    def test_budget_flag_tightens_limit(self, capsys):
        code, out = run(capsys, "enum-worlds", "--n", "3", "--budget-worlds", "100")
        assert code == 2

    def test_threads_flag_accepted(self, capsys):
        code, _ = run(capsys, "table1", "--threads", "2", "--no-classify")
        assert code == 0


class TestDeterminism:
    def test_identical_manifests_identical_bytes(self, capsys, files, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        argv = ["ahk-sample", "--model", files["er"], "--n", "5", "--count", "4", "--seed", "11"]
        _, out1 = run(capsys, *argv)
        _, out2 = run(capsys, *argv)
        assert out1 == out2
        _, t1 = run(capsys, "table1")
        _, t2 = run(capsys, "table1")
        assert t1 == t2

    def test_manifest_fields(self, capsys, files, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        _, out = run(capsys, "check-modularity", "--dist", files["plus"])
        man = json.loads(out)["manifest"]
        assert man["command"] == "check-modularity"
        assert man["timestamp"] == 1700000000
        assert list(man["inputs"].values())[0].startswith(
            __import__("hashlib").sha256(open(files["plus"], "rb").read()).hexdigest()[:8]
        )

    def test_distribution_roundtrips_through_parser(self, capsys, files):
        _, out = run(capsys, "fenstad", "--dist", files["bipart"], "--k", "2")
        emitted = json.loads(out)["distribution"]
        parsed = WorldletDistribution.from_json(emitted)
        assert parsed.to_json() == emitted

    def test_seed_changes_samples(self, capsys, files):
        _, a = run(capsys, "ahk-sample", "--model", files["er"], "--n", "5", "--count", "2", "--seed", "1")
        _, b = run(capsys, "ahk-sample", "--model", files["er"], "--n", "5", "--count", "2", "--seed", "2")
        assert a.split("\n")[1:] != b.split("\n")[1:]
