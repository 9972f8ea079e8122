import hashlib
import os

import numpy as np
import pytest

from synth import make_blobs
from pedcc.cli import run_cli
from pedcc.io import (CorruptFileError, EmbeddingDataset, read_embd,
                      read_labels, write_embd, write_labels)

GOLDEN = os.path.join(os.path.dirname(__file__), "data", "golden.embd")
GOLDEN_SHA256 = "c0ae13faa587538e1db96079a78527ca71f5e20af7629cb1c969a0830052ce58"


class TestEmbdFormat:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        ds = EmbeddingDataset(data=rng.standard_normal((5, 3)).astype(np.float32),
                              views=rng.standard_normal((2, 5, 3)).astype(np.float32))
        path = str(tmp_path / "a.embd")
        write_embd(ds, path)
        loaded = read_embd(path)
        assert np.array_equal(loaded.data, ds.data)
        assert np.array_equal(loaded.views, ds.views)

    def test_deterministic_bytes(self, tmp_path):
        ds = EmbeddingDataset(data=np.ones((3, 2), dtype=np.float32))
        p1, p2 = str(tmp_path / "a"), str(tmp_path / "b")
        write_embd(ds, p1)
        write_embd(ds, p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_minimal_payload_layout(self, tmp_path):
        path = str(tmp_path / "one.embd")
        write_embd(EmbeddingDataset(data=np.zeros((1, 1), dtype=np.float32)), path)
        raw = open(path, "rb").read()
        # header is 4+2+1+4+4+4 = 19 bytes, payload 4 zero bytes, CRC 4 bytes
        assert len(raw) == 19 + 4 + 4
        assert raw[19:23] == b"\x00\x00\x00\x00"

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "t.embd"
        write_embd(EmbeddingDataset(data=np.ones((4, 2), dtype=np.float32)),
                   str(path))
        path.write_bytes(path.read_bytes()[:-6])
        with pytest.raises(CorruptFileError, match="bytes"):
            read_embd(str(path))

    def test_crc_mismatch(self, tmp_path):
        path = tmp_path / "c.embd"
        write_embd(EmbeddingDataset(data=np.ones((4, 2), dtype=np.float32)),
                   str(path))
        raw = bytearray(path.read_bytes())
        raw[25] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(CorruptFileError, match="CRC"):
            read_embd(str(path))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.embd"
        path.write_bytes(b"XXXX" + b"\x00" * 30)
        with pytest.raises(CorruptFileError, match="magic"):
            read_embd(str(path))

    def test_no_views_loads_views_absent(self, tmp_path):
        path = str(tmp_path / "nv.embd")
        write_embd(EmbeddingDataset(data=np.ones((2, 2), dtype=np.float32)), path)
        assert read_embd(path).views is None

    def test_view_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            EmbeddingDataset(data=np.ones((2, 2), dtype=np.float32),
                             views=np.ones((1, 2, 3), dtype=np.float32))

    def test_golden_fixture_stable(self):
        raw = open(GOLDEN, "rb").read()
        assert hashlib.sha256(raw).hexdigest() == GOLDEN_SHA256
        ds = read_embd(GOLDEN)
        assert ds.data.shape == (4, 3)
        assert ds.views.shape == (2, 4, 3)
        assert ds.data[3, 2] == np.float32(11.0 / 7.0)
        assert ds.views[1, 0, 0] == np.float32(7.0 / 3.0)


class TestLabelsFile:
    def test_roundtrip(self, tmp_path):
        path = str(tmp_path / "labels.txt")
        write_labels(np.array([3, 0, 2]), path)
        assert read_labels(path).tolist() == [3, 0, 2]

    def test_negative_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0\n-2\n")
        with pytest.raises(ValueError):
            read_labels(str(path))


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


class TestCli:
    def test_gen_writes_centers(self, workdir):
        assert run_cli(["gen", "--clusters", "10", "--dim", "64",
                        "--out", "p.embd", "--emit-csv", "p.csv"]) == 0
        ds = read_embd("p.embd")
        assert ds.data.shape == (10, 64)
        rows = open("p.csv").read().strip().split("\n")
        assert len(rows) == 10 and len(rows[0].split(",")) == 64

    def test_gen_infeasible_is_runtime_error(self, workdir):
        assert run_cli(["gen", "--clusters", "10", "--dim", "4",
                        "--out", "p.embd"]) == 1

    def test_missing_required_flag_is_usage_error(self, workdir, capsys):
        assert run_cli(["train", "--config", "c", "--out-dir", "d"]) == 2
        assert "usage" in capsys.readouterr().err

    def test_unknown_subcommand(self, workdir):
        assert run_cli(["frobnicate"]) == 2

    def test_eval_prints_metrics(self, workdir, capsys):
        write_labels(np.array([0, 0, 0, 1]), "pred.txt")
        write_labels(np.array([0, 0, 1, 1]), "truth.txt")
        assert run_cli(["eval", "--pred", "pred.txt", "--truth", "truth.txt"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("acc=0.750000 nmi=")

    def test_knn_roundtrip(self, workdir):
        from pedcc.neighbors import read_table
        rng = np.random.default_rng(1)
        data = rng.standard_normal((30, 6)).astype(np.float32)
        write_embd(EmbeddingDataset(data=data), "e.embd")
        assert run_cli(["knn", "--embeddings", "e.embd", "--m", "4",
                        "--out", "t.knn"]) == 0
        table = read_table("t.knn")
        assert table.indices.shape == (30, 4)

    def test_full_pipeline(self, workdir, capsys):
        data, labels = make_blobs(n=240, d_in=12, clusters=3, seed=5)
        write_embd(EmbeddingDataset(data=data), "e.embd")
        write_labels(labels, "truth.txt")
        with open("train.cfg", "w") as f:
            f.write("""
clusters = 3            # required
latent_dim = 8
hidden_dims = 32
lambda1 = 9
lambda2 = 2
lambda3 = 2
batch_size = 60
max_epochs = 8
augmentation_mode = noise
noise_std = 0.1
seed = 0
""")
        assert run_cli(["train", "--embeddings", "e.embd", "--config",
                        "train.cfg", "--labels", "truth.txt",
                        "--out-dir", "out"]) == 0
        assert "acc=" in capsys.readouterr().out
        for name in ("head.ckpt", "centers.embd", "report.ndjson",
                     "assignments.txt"):
            assert os.path.exists(os.path.join("out", name))
        import json
        lines = open("out/report.ndjson").read().strip().split("\n")
        assert len(lines) == 8 + 1
        summary = json.loads(lines[-1])
        assert summary["refresh_epochs"] == [0]

        assert run_cli(["assign", "--embeddings", "e.embd",
                        "--checkpoint", "out/head.ckpt",
                        "--centers", "out/centers.embd",
                        "--out", "pred.txt"]) == 0
        pred = read_labels("pred.txt")
        assert pred.tolist() == read_labels("out/assignments.txt").tolist()

        assert run_cli(["eval", "--pred", "pred.txt",
                        "--truth", "truth.txt"]) == 0
        assert run_cli(["eval-loss", "--embeddings", "e.embd",
                        "--checkpoint", "out/head.ckpt",
                        "--centers", "out/centers.embd",
                        "--batch-size", "120"]) == 0
        out = capsys.readouterr().out
        assert "loss1=" in out and "batch=1" in out

    def test_config_weight_preset(self, workdir):
        from pedcc.cli import _config_from_file
        with open("c.cfg", "w") as f:
            f.write("clusters = 10\npreset = stl10\n")
        config = _config_from_file("c.cfg")
        assert (config.weights.lambda1, config.weights.lambda2,
                config.weights.lambda3) == (8.0, 2.0, 2.0)

    def test_config_unknown_key(self, workdir):
        from pedcc.cli import _config_from_file
        with open("c.cfg", "w") as f:
            f.write("clusters = 3\nbogus = 1\n")
        with pytest.raises(ValueError, match="bogus"):
            _config_from_file("c.cfg")
