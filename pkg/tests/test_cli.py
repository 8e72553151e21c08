import json
import os
import subprocess
import sys

import pytest

from fogfed.cli import main
from fogfed.ledger import load_chain, verify_chain
from fogfed.neuralnet.weights import deserialize_weights

SYNTH = {"kind": "synthetic", "n": 300, "d": 20, "c": 4, "seed": 3}


def write_config(tmp_path, name="config.json", **overrides):
    cfg = {
        "clients": 2,
        "rounds": 1,
        "epochs": 2,
        "batch": 16,
        "dataset": SYNTH,
    }
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


class TestSimulate:
    def test_happy_path_artifacts(self, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, out_dir=str(out))
        assert main(["simulate", "--config", cfg]) == 0
        for name in [
            "rounds.csv",
            "confusion_n2.csv",
            "chain_n2.fgch",
            "history_n2_r0_c0.csv",
            "history_n2_r0_c1.csv",
            "run-meta.json",
        ]:
            assert (out / name).is_file(), name
        assert verify_chain(load_chain(str(out / "chain_n2.fgch"))) is None
        stdout = capsys.readouterr().out
        assert "N=2 round=0" in stdout

    def test_missing_data_dir_names_path(self, tmp_path, capsys):
        missing = str(tmp_path / "no-such-dir")
        code = main(["simulate", "--data-dir", missing, "--out-dir", str(tmp_path / "o")])
        assert code == 1
        assert missing in capsys.readouterr().err

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"cleints": 2}))
        assert main(["simulate", "--config", str(path)]) == 1
        assert "cleints" in capsys.readouterr().err

    def test_unknown_nested_key_rejected(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"dataset": {"kind": "synthetic", "rows": 5}}))
        assert main(["simulate", "--config", str(path)]) == 1
        assert "rows" in capsys.readouterr().err

    def test_malformed_json_rejected(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert main(["simulate", "--config", str(path)]) == 1
        assert "JSON" in capsys.readouterr().err

    def test_flag_overrides_config_file(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, out_dir=str(out))
        assert main(["simulate", "--config", cfg, "--clients", "1", "--seed", "5"]) == 0
        meta = json.loads((out / "run-meta.json").read_text())
        assert meta["config"]["clients"] == 1  # flag beat the file's 2
        assert meta["config"]["seed"] == 5  # flag beat the default 0
        assert meta["config"]["epochs"] == 2  # file beat the default 10
        assert meta["config"]["batch"] == 16  # file beat the default 8
        assert meta["config"]["lr"] == 0.01  # default survived
        assert (out / "history_n1_r0_c0.csv").is_file()

    def test_partition_flag(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, out_dir=str(out))
        assert main(["simulate", "--config", cfg, "--partition", "iid"]) == 0
        meta = json.loads((out / "run-meta.json").read_text())
        assert meta["config"]["partition"] == "iid"

    def test_no_dataset_is_an_error(self, tmp_path, capsys):
        assert main(["simulate", "--out-dir", str(tmp_path / "o")]) == 1
        assert "dataset" in capsys.readouterr().err

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_config(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", cfg, "--out-dir", str(a)]) == 0
        assert main(["simulate", "--config", cfg, "--out-dir", str(b)]) == 0
        for name in ["rounds.csv", "chain_n2.fgch", "confusion_n2.csv", "history_n2_r0_c1.csv"]:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_meta_hashes_match_artifacts(self, tmp_path):
        import hashlib

        out = tmp_path / "out"
        cfg = write_config(tmp_path, out_dir=str(out))
        assert main(["simulate", "--config", cfg]) == 0
        meta = json.loads((out / "run-meta.json").read_text())
        for name, digest in meta["artifacts"].items():
            assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest

    def test_sweep_from_config(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, out_dir=str(out), sweep=[1, 2])
        assert main(["simulate", "--config", cfg]) == 0
        assert (out / "chain_n1.fgch").is_file()
        assert (out / "chain_n2.fgch").is_file()
        rows = (out / "rounds.csv").read_text().strip().split("\n")
        assert len(rows) == 3  # header + one round for each of N=1, N=2

    def test_config_only_keys(self, tmp_path):
        """Keys with no flag: arch override, chain file export, fixed update
        times, intruders, identical client seeds."""
        out = tmp_path / "out"
        chain_copy = tmp_path / "audit.fgch"
        cfg = write_config(
            tmp_path,
            out_dir=str(out),
            chain_file=str(chain_copy),
            arch={"conv_filters": [8], "conv_kernels": [5], "pool": 2, "dense_units": [16]},
            update_times={"mode": "fixed", "values": [4.0, 2.0]},
            intruder_ids=[50],
            identical_client_seeds=True,
        )
        assert main(["simulate", "--config", cfg]) == 0
        assert chain_copy.is_file()
        assert verify_chain(load_chain(str(chain_copy))) is None
        rows = (out / "rounds.csv").read_text().strip().split("\n")
        header, row = rows[0].split(","), rows[1].split(",")
        cells = dict(zip(header, row))
        assert cells["rejected"] == "1"
        assert float(cells["H"]) == pytest.approx(0.5)  # H([4, 2]) = 1 - 2/4
        # identical seeds on replicated shards: both clients report the same accuracy
        assert cells["acc_client_0"] == cells["acc_client_1"]
        meta = json.loads((out / "run-meta.json").read_text())
        assert meta["config"]["arch"]["conv_filters"] == [8]


class TestLedgerVerify:
    def make_chain_file(self, tmp_path, cfg_overrides=None):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, out_dir=str(out), **(cfg_overrides or {}))
        assert main(["simulate", "--config", cfg]) == 0
        return out / "chain_n2.fgch"

    def test_valid_chain_exit_zero(self, tmp_path, capsys):
        path = self.make_chain_file(tmp_path)
        assert main(["ledger", "verify", str(path)]) == 0
        assert "valid" in capsys.readouterr().out

    def test_tampered_chain_exit_one_names_block(self, tmp_path, capsys):
        path = self.make_chain_file(tmp_path)
        data = bytearray(path.read_bytes())
        data[120] ^= 0xFF  # inside the first record's digest in block 1
        path.write_bytes(bytes(data))
        assert main(["ledger", "verify", str(path)]) == 1
        assert "invalid at block 1" in capsys.readouterr().out

    def test_garbage_file_exit_two(self, tmp_path, capsys):
        path = tmp_path / "junk.fgch"
        path.write_bytes(b"this is not a chain")
        assert main(["ledger", "verify", str(path)]) == 2
        assert "error" in capsys.readouterr().err

    def test_missing_file_exit_two(self, tmp_path):
        assert main(["ledger", "verify", str(tmp_path / "absent.fgch")]) == 2


class TestHeterogeneityCommand:
    def test_two_one(self, capsys):
        assert main(["heterogeneity", "2", "1"]) == 0
        assert capsys.readouterr().out.strip() == "0.500000"

    def test_four_two_one(self, capsys):
        assert main(["heterogeneity", "4", "2", "1"]) == 0
        assert capsys.readouterr().out.strip() == "0.625000"

    def test_single_value_usage_error(self, capsys):
        assert main(["heterogeneity", "1"]) == 2
        assert "at least 2" in capsys.readouterr().err

    def test_non_positive_usage_error(self, capsys):
        assert main(["heterogeneity", "2", "0"]) == 2

    def test_values_from_file(self, tmp_path, capsys):
        f = tmp_path / "times.txt"
        f.write_text("5 5\n5\n")
        assert main(["heterogeneity", "--file", str(f)]) == 0
        assert capsys.readouterr().out.strip() == "0.000000"


class TestTrainAndAggregate:
    def test_round_trip(self, tmp_path, capsys):
        cfg = tmp_path / "data.json"
        cfg.write_text(json.dumps({"dataset": SYNTH}))
        m1 = tmp_path / "m1.fgfw"
        m2 = tmp_path / "m2.fgfw"
        hist = tmp_path / "h1.csv"
        for out, seed in [(m1, 1), (m2, 2)]:
            code = main(
                [
                    "train-local", "--config", str(cfg), "--epochs", "2",
                    "--batch", "16", "--seed", str(seed),
                    "--out", str(out), "--history", str(hist),
                ]
            )
            assert code == 0
        assert hist.read_text().startswith("epoch,train_loss,train_acc,val_loss,val_acc")
        fused = tmp_path / "global.fgfw"
        code = main(
            ["aggregate", str(m1), str(m2), "--accuracies", "0.9,0.8", "--out", str(fused)]
        )
        assert code == 0
        out_text = capsys.readouterr().out
        assert "factors=" in out_text
        w = deserialize_weights(fused.read_bytes())
        assert w.n_params > 0

    def test_aggregate_count_mismatch(self, tmp_path, capsys):
        m = tmp_path / "m.fgfw"
        m.write_bytes(b"FGFW" + b"\x01" + b"\x00\x00\x00\x00")
        code = main(["aggregate", str(m), "--accuracies", "0.9,0.8", "--out", str(tmp_path / "g")])
        assert code == 2


class TestUsage:
    def test_no_command_is_usage_error(self):
        with pytest.raises(SystemExit) as err:
            main([])
        assert err.value.code == 2

    def test_bad_partition_choice(self):
        with pytest.raises(SystemExit) as err:
            main(["simulate", "--partition", "sideways"])
        assert err.value.code == 2

    def test_console_script_installed(self):
        """The fogfed entry point resolves and prints usage."""
        proc = subprocess.run(
            [sys.executable, "-m", "fogfed.cli", "heterogeneity", "2", "1"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert proc.stdout.strip() == "0.500000"
