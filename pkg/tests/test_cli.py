import csv
import subprocess
import sys

import numpy as np
import pytest

from qnnc.cli import main
from qnnc.deepcodec import NetworkContainer, decompress_network, dense_forward
from qnnc.succinct import ActivationKind


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture
def net_file(tmp_path):
    path = tmp_path / "net.qnnc"
    assert run_cli(
        "gen", "--layers", "6,5,4,3", "--probs", "0.4,0.2,0.2,0.2", "--seed", "5",
        "--out", str(path),
    ) == 0
    return path


class TestGenCompressInfer:
    def test_pipeline(self, tmp_path, net_file, capsys):
        comp = tmp_path / "net.plbg.qnnc"
        assert run_cli("compress", "--in", str(net_file), "--out", str(comp)) == 0
        out = capsys.readouterr().out
        assert "layer,shape,m" in out

        vec = tmp_path / "x.txt"
        vec.write_text("\n".join(str(v) for v in np.linspace(-1, 1, 6)))
        assert run_cli(
            "infer", "--model", str(comp), "--input", str(vec),
            "--activation", "relu", "--stats",
        ) == 0
        printed = capsys.readouterr().out.strip().splitlines()
        y_cli = np.array([float(v) for v in printed])

        container = NetworkContainer.parse(comp.read_bytes())
        net = decompress_network(container)
        expected = dense_forward(
            net, np.linspace(-1, 1, 6), ActivationKind.RELU, ActivationKind.IDENTITY
        )
        np.testing.assert_allclose(y_cli, expected, atol=1e-9)

    def test_infer_argmax_and_softmax(self, tmp_path, net_file, capsys):
        comp = tmp_path / "c.qnnc"
        run_cli("compress", "--in", str(net_file), "--out", str(comp))
        capsys.readouterr()
        vec = tmp_path / "x.txt"
        vec.write_text("\n".join(["0.5"] * 6))
        assert run_cli(
            "infer", "--model", str(comp), "--input", str(vec),
            "--final", "softmax", "--argmax",
        ) == 0
        out = capsys.readouterr().out.strip()
        assert out.isdigit() and 0 <= int(out) < 3

    def test_decompress_round_trip(self, tmp_path, net_file):
        comp = tmp_path / "c.qnnc"
        raw2 = tmp_path / "back.qnnc"
        run_cli("compress", "--in", str(net_file), "--out", str(comp))
        assert run_cli("decompress", "--in", str(comp), "--out", str(raw2)) == 0
        a = decompress_network(NetworkContainer.parse(net_file.read_bytes()))
        b = decompress_network(NetworkContainer.parse(raw2.read_bytes()))
        x = np.linspace(-1, 1, 6)
        np.testing.assert_allclose(
            dense_forward(a, x, ActivationKind.RELU, ActivationKind.IDENTITY),
            dense_forward(b, x, ActivationKind.RELU, ActivationKind.IDENTITY),
            atol=1e-9,
        )

    def test_infer_all_zero_net(self, tmp_path, capsys):
        raw = tmp_path / "z.qnnc"
        run_cli("gen", "--layers", "4,3,2", "--probs", "1.0,0.0", "--seed", "1",
                "--out", str(raw))
        comp = tmp_path / "zc.qnnc"
        run_cli("compress", "--in", str(raw), "--out", str(comp))
        capsys.readouterr()
        vec = tmp_path / "x.txt"
        vec.write_text("1\n2\n3\n4\n")
        assert run_cli("infer", "--model", str(comp), "--input", str(vec)) == 0
        values = [float(v) for v in capsys.readouterr().out.split()]
        assert values == [0.0, 0.0]

    def test_ktree_mode(self, tmp_path, capsys):
        raw = tmp_path / "b.qnnc"
        run_cli("gen", "--layers", "6,6,6", "--probs", "0.5,0.5", "--seed", "2",
                "--out", str(raw))
        comp = tmp_path / "bk.qnnc"
        assert run_cli("compress", "--in", str(raw), "--mode", "ktree",
                       "--out", str(comp)) == 0
        back = tmp_path / "bb.qnnc"
        assert run_cli("decompress", "--in", str(comp), "--out", str(back)) == 0
        a = decompress_network(NetworkContainer.parse(raw.read_bytes()))
        b = decompress_network(NetworkContainer.parse(back.read_bytes()))
        x = np.linspace(-1, 1, 6)
        np.testing.assert_allclose(dense_forward(a, x), dense_forward(b, x), atol=1e-9)


class TestEntropyCommand:
    def test_report_values(self, capsys):
        assert run_cli("entropy", "--rows", "4", "--cols", "4", "--probs", "0.5,0.5") == 0
        out = capsys.readouterr().out
        assert "plbg_bound_bits 11.415" in out

    def test_report_with_mc(self, capsys):
        assert run_cli(
            "entropy", "--rows", "2", "--cols", "1", "--probs", "0.5,0.5",
            "--mc-trials", "2000", "--seed", "3",
        ) == 0
        out = capsys.readouterr().out
        assert "mc_multiset_entropy_bits" in out


class TestBenchCommand:
    def test_bench_csv_and_figures(self, tmp_path, capsys):
        csv_path = tmp_path / "bench.csv"
        assert run_cli(
            "bench", "--rows", "16", "--cols", "16", "--probs", "0.5,0.5",
            "--trials", "8", "--seed", "11", "--csv", str(csv_path),
        ) == 0
        rows = list(csv.DictReader(csv_path.open()))
        assert len(rows) == 8
        assert rows[0]["shape"] == "16x16"
        assert rows[0]["generator"] == "numpy-pcg64"
        for row in rows:
            assert float(row["observed_bits"]) >= 0
            assert 0 <= float(row["pct_pmf"]) <= 100
        assert csv_path.with_suffix(".rate.png").exists()
        assert csv_path.with_suffix(".queue.png").exists()

    def test_bench_rate_oracle_over_100_trials(self, tmp_path):
        csv_path = tmp_path / "rate.csv"
        assert run_cli(
            "bench", "--rows", "16", "--cols", "16", "--probs", "0.5,0.5",
            "--trials", "100", "--seed", "4", "--csv", str(csv_path), "--no-figures",
        ) == 0
        rows = list(csv.DictReader(csv_path.open()))
        assert len(rows) == 100
        observed = np.mean([float(r["observed_bits"]) for r in rows])
        ideal = np.mean([float(r["ideal_bits"]) for r in rows])
        assert observed <= ideal + 64

    def test_bench_no_figures(self, tmp_path):
        csv_path = tmp_path / "b.csv"
        assert run_cli(
            "bench", "--rows", "8", "--cols", "8", "--probs", "0.5,0.5",
            "--trials", "3", "--seed", "1", "--csv", str(csv_path), "--no-figures",
        ) == 0
        assert not csv_path.with_suffix(".rate.png").exists()


class TestErrorHandling:
    def test_usage_error_exit_1(self):
        assert run_cli("compress", "--in") == 1

    def test_unknown_command_exit_1(self):
        assert run_cli("frobnicate") == 1

    def test_corrupt_container_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.qnnc"
        bad.write_bytes(b"garbage bytes, definitely not a container")
        vec = tmp_path / "x.txt"
        vec.write_text("1\n")
        assert run_cli("infer", "--model", str(bad), "--input", str(vec)) == 2
        assert "error:" in capsys.readouterr().err

    def test_truncated_container_exit_2(self, tmp_path, net_file):
        clipped = tmp_path / "clip.qnnc"
        clipped.write_bytes(net_file.read_bytes()[:-7])
        assert run_cli("decompress", "--in", str(clipped), "--out", str(tmp_path / "o")) == 2

    def test_bad_vector_file_exit_2(self, tmp_path, net_file):
        vec = tmp_path / "x.txt"
        vec.write_text("not-a-number\n")
        assert run_cli("infer", "--model", str(net_file), "--input", str(vec)) == 2

    def test_bad_probs_exit_2(self, tmp_path):
        assert run_cli("gen", "--probs", "0.9,0.9", "--out", str(tmp_path / "x")) == 2

    def test_corrupted_payload_never_panics(self, tmp_path, net_file, capsys):
        comp = tmp_path / "c.qnnc"
        run_cli("compress", "--in", str(net_file), "--out", str(comp))
        vec = tmp_path / "x.txt"
        vec.write_text("\n".join(["0.25"] * 6))
        blob = bytearray(comp.read_bytes())
        rng = np.random.default_rng(6)
        for _ in range(30):
            corrupted = bytearray(blob)
            pos = int(rng.integers(9, len(blob)))
            corrupted[pos] ^= 0xFF
            bad = tmp_path / "bad.qnnc"
            bad.write_bytes(bytes(corrupted))
            code = run_cli("infer", "--model", str(bad), "--input", str(vec))
            capsys.readouterr()
            assert code in (0, 2, 3)  # degraded output or clean diagnostic, never a crash

    def test_entry_point_subprocess(self, tmp_path):
        out = subprocess.run(
            [sys.executable, "-m", "qnnc.cli", "entropy", "--rows", "2", "--cols", "2",
             "--probs", "0.5,0.5"],
            capture_output=True,
            text=True,
        )
        assert out.returncode == 0
        assert "ubg_bound_bits" in out.stdout
