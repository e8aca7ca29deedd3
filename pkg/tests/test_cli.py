import json

from ddtrack.cli import main


def run_cli(*args):
    return main(list(args))


class TestGenerate:
    def test_writes_data_files(self, tmp_path):
        assert run_cli("generate", "--out", str(tmp_path)) == 0
        historical = (tmp_path / "historical.csv").read_text().splitlines()
        assert historical[0] == "k,u_1,y_1"
        assert len(historical) == 101
        recent = (tmp_path / "recent.csv").read_text().splitlines()
        assert len(recent) == 5


class TestSynthesizeValidate:
    def test_pipeline_from_files(self, tmp_path):
        assert run_cli("generate", "--out", str(tmp_path)) == 0
        code = run_cli(
            "synthesize",
            "--data", str(tmp_path / "historical.csv"),
            "--recent", str(tmp_path / "recent.csv"),
            "--out", str(tmp_path),
        )
        assert code == 0
        doc = json.loads((tmp_path / "result.json").read_text())
        assert doc["status"] == "optimal"
        assert doc["gamma_star"] > 0
        assert len(doc["u_star"]) == 20

        code = run_cli(
            "validate",
            "--result", str(tmp_path / "result.json"),
            "--data", str(tmp_path / "historical.csv"),
            "--recent", str(tmp_path / "recent.csv"),
            "--out", str(tmp_path),
        )
        assert code == 0
        lines = (tmp_path / "costs.csv").read_text().splitlines()
        assert len(lines) == 101
        gamma = doc["gamma_star"]
        for line in lines[1:]:
            assert float(line.split(",")[1]) <= gamma * (1 + 1e-6)

    def test_infeasible_recent_window_exits_2(self, tmp_path):
        assert run_cli("generate", "--out", str(tmp_path)) == 0
        recent = tmp_path / "recent.csv"
        rows = recent.read_text().splitlines()
        header, body = rows[0], rows[1:]
        shifted = [header]
        for row in body:
            k, u, y = row.split(",")
            shifted.append(f"{k},{u},{float(y) + 100.0}")
        recent.write_text("\n".join(shifted) + "\n")
        code = run_cli(
            "synthesize",
            "--data", str(tmp_path / "historical.csv"),
            "--recent", str(tmp_path / "recent.csv"),
            "--out", str(tmp_path),
        )
        assert code == 2
        doc = json.loads((tmp_path / "result.json").read_text())
        assert doc["status"] == "infeasible"

    def test_unknown_backend_exits_3(self, tmp_path):
        code = run_cli("synthesize", "--backend", "sdpa", "--out", str(tmp_path))
        assert code == 3


class TestRun:
    def test_full_pipeline(self, tmp_path):
        config = {"n_samples": 10}
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(config))
        code = run_cli(
            "run", "--config", str(cfg_path), "--out", str(tmp_path), "--svg"
        )
        assert code == 0
        for name in ("report.json", "outputs.csv", "costs.csv", "outputs.svg", "costs.svg"):
            assert (tmp_path / name).exists()
        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["status"] == "optimal"
        assert doc["n_realizations"] == 10

    def test_seed_override_changes_samples(self, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"n_samples": 5}))
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        assert run_cli("run", "--config", str(cfg), "--out", str(a_dir)) == 0
        assert (
            run_cli(
                "run", "--config", str(cfg), "--out", str(b_dir),
                "--seed", "validation=77",
            )
            == 0
        )
        assert (a_dir / "costs.csv").read_text() != (b_dir / "costs.csv").read_text()

    def test_byte_identical_reruns(self, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"n_samples": 8}))
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        assert run_cli("run", "--config", str(cfg), "--out", str(a_dir)) == 0
        assert run_cli("run", "--config", str(cfg), "--out", str(b_dir)) == 0
        for name in ("outputs.csv", "costs.csv"):
            assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes()


class TestRhc:
    def test_short_loop(self, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"n_samples": 0}))
        code = run_cli(
            "rhc", "--config", str(cfg), "--steps", "3", "--out", str(tmp_path)
        )
        assert code == 0
        lines = (tmp_path / "rhc.csv").read_text().splitlines()
        assert len(lines) == 4


class TestUsageErrors:
    def test_bad_seed_format_exits_1(self, tmp_path):
        assert run_cli("run", "--seed", "nonsense", "--out", str(tmp_path)) == 1

    def test_missing_required_flag_exits_1(self):
        assert run_cli("rhc") == 1

    def test_bad_recent_length_exits_1(self, tmp_path):
        (tmp_path / "short.csv").write_text("k,u_1,y_1\n0,0.1,0.2\n")
        code = run_cli(
            "synthesize", "--recent", str(tmp_path / "short.csv"), "--out", str(tmp_path)
        )
        assert code == 1
