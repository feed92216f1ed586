
from helpers import SEEKERS, compose_response

from empath import cli
from empath.checkpoint import load_checkpoint
from empath.text import Vocabulary


def run(argv, capsys):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestBuildVocab:
    def test_writes_vocab_matching_library_build(self, trained_trio, tmp_path, capsys):
        out = tmp_path / "vocab.txt"
        code, stdout, _ = run(
            ["build-vocab", "--corpus", trained_trio["corpus_path"], "--out", str(out)], capsys
        )
        assert code == 0
        assert f"wrote {len(trained_trio['vocab'])} tokens" in stdout
        assert Vocabulary.load(out).sha256() == trained_trio["vocab"].sha256()

    def test_missing_corpus_is_exit_1_with_message(self, tmp_path, capsys):
        code, _, stderr = run(
            ["build-vocab", "--corpus", str(tmp_path / "nope.tsv"), "--out", str(tmp_path / "v")],
            capsys,
        )
        assert code == 1
        assert "error:" in stderr


class TestTrainEval:
    def train_args(self, trio, out, extra=()):
        return [
            "train",
            "--corpus", trio["corpus_path"],
            "--vocab", trio["vocab_path"],
            "--mechanism", "interpretations",
            "--out", str(out),
            "--num-layers", "1", "--num-heads", "1", "--model-dim", "8",
            "--ff-dim", "16", "--max-len", "24", "--epochs", "1", "--batch-size", "8",
            *extra,
        ]

    def test_train_writes_loadable_checkpoint(self, trained_trio, tmp_path, capsys):
        out = tmp_path / "ip.ckpt"
        code, stdout, _ = run(self.train_args(trained_trio, out), capsys)
        assert code == 0
        assert "epoch 0: train loss" in stdout
        model, meta = load_checkpoint(out, expected_vocab_hash=trained_trio["vocab"].sha256())
        assert model.mechanism == "interpretations"
        assert meta["epochs"] == 1

    def test_eval_reports_perfect_fit_on_trained_models(self, trained_trio, capsys):
        code, stdout, _ = run(
            [
                "eval",
                "--corpus", trained_trio["corpus_path"],
                "--vocab", trained_trio["vocab_path"],
                "--checkpoint", trained_trio["checkpoints"]["interpretations"],
                "--split", "all",
            ],
            capsys,
        )
        assert code == 0
        assert "accuracy = 1.0000" in stdout
        assert "macro_f1 = 1.0000" in stdout

    def test_init_from_wrong_mechanism_rejected(self, trained_trio, tmp_path, capsys):
        code, _, stderr = run(
            self.train_args(
                trained_trio, tmp_path / "x.ckpt",
                extra=["--init-from", trained_trio["checkpoints"]["explorations"]],
            ),
            capsys,
        )
        assert code == 1
        assert "explorations" in stderr


class TestOptionPrecedence:
    def test_config_file_env_and_flag(self, trained_trio, tmp_path, capsys, monkeypatch):
        helper = TestTrainEval()
        cfg = tmp_path / "empath.cfg"
        cfg.write_text("# comment\nmodel-dim = 24\n")

        def dim_of(extra):
            out = tmp_path / f"m{len(list(tmp_path.iterdir()))}.ckpt"
            args = [
                "train",
                "--corpus", trained_trio["corpus_path"],
                "--vocab", trained_trio["vocab_path"],
                "--mechanism", "interpretations",
                "--out", str(out),
                "--num-layers", "1", "--num-heads", "1",
                "--ff-dim", "16", "--max-len", "24", "--epochs", "1", "--batch-size", "8",
                *extra,
            ]
            assert cli.main(args) == 0
            capsys.readouterr()
            model, _ = load_checkpoint(out)
            return model.config.model_dim

        assert dim_of(["--config", str(cfg)]) == 24  # file beats default (64)
        monkeypatch.setenv("EMPATH_MODEL_DIM", "16")
        assert dim_of(["--config", str(cfg)]) == 16  # env beats file
        assert dim_of(["--config", str(cfg), "--model-dim", "8"]) == 8  # flag beats env

    def test_malformed_config_file_rejected(self, trained_trio, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("no equals sign here\n")
        helper = TestTrainEval()
        code, _, stderr = run(
            helper.train_args(trained_trio, tmp_path / "x.ckpt", extra=["--config", str(cfg)]),
            capsys,
        )
        assert code != 0


class TestPredictFeedback:
    def test_predict_known_pair(self, trained_trio, capsys):
        pair = trained_trio["pairs"][0]
        code, stdout, _ = run(
            [
                "predict",
                "--vocab", trained_trio["vocab_path"],
                "--checkpoint-dir", str(trained_trio["root"]),
                "--seeker", pair.seeker_text,
                "--response", pair.response_text,
            ],
            capsys,
        )
        assert code == 0
        total = sum(pair.levels.values())
        assert f"total_score: {total}" in stdout
        for mech, level in pair.levels.items():
            assert f"{mech}: level {level}" in stdout

    def test_feedback_with_previous_prints_delta(self, trained_trio, capsys):
        before = compose_response(0, 1, 0)[0]
        after = compose_response(2, 1, 1)[0]
        code, stdout, _ = run(
            [
                "feedback",
                "--vocab", trained_trio["vocab_path"],
                "--checkpoint-dir", str(trained_trio["root"]),
                "--seeker", SEEKERS[0],
                "--response", after,
                "--previous", before,
            ],
            capsys,
        )
        assert code == 0
        assert "total_score: 4" in stdout
        assert "score_delta: +3 (from 1)" in stdout
        assert "1. " in stdout

    def test_feedback_quotes_rationale(self, trained_trio, capsys):
        response = compose_response(0, 1, 0)[0]
        code, stdout, _ = run(
            [
                "feedback",
                "--vocab", trained_trio["vocab_path"],
                "--checkpoint-dir", str(trained_trio["root"]),
                "--seeker", SEEKERS[0],
                "--response", response,
            ],
            capsys,
        )
        assert code == 0
        assert "i understand how you feel" in stdout


class TestAnalyze:
    def test_analyze_annotates_and_prints_sections(self, trained_trio, tmp_path, capsys):
        from test_analytics import rec

        pair = trained_trio["pairs"][1]
        records = [
            rec(responder="vet", year=2015, er=2, ip=1),
            rec(responder="vet", year=2019, er=1),
            rec(seeker_text=pair.seeker_text, response_text=pair.response_text, levels=None),
        ]
        from empath.analytics import save_logs

        logs = tmp_path / "logs.tsv"
        save_logs(records, logs)
        code, stdout, _ = run(
            [
                "analyze",
                "--logs", str(logs),
                "--vocab", trained_trio["vocab_path"],
                "--checkpoint-dir", str(trained_trio["root"]),
                "--min-posts", "1",
            ],
            capsys,
        )
        assert code == 0
        assert "# empathy over time" in stdout
        assert "# engagement by level" in stdout
        assert "# follows within 24h" in stdout

    def test_analyze_without_models_needs_levels(self, tmp_path, capsys):
        from empath.analytics import save_logs
        from test_analytics import rec

        logs = tmp_path / "logs.tsv"
        save_logs([rec(seeker_text="a", response_text="b", levels=None)], logs)
        code, _, stderr = run(["analyze", "--logs", str(logs)], capsys)
        assert code == 1
        assert "checkpoint-dir" in stderr


class TestGradcheck:
    def test_passes_on_toy_model(self, capsys):
        code, stdout, _ = run(
            [
                "gradcheck",
                "--num-layers", "1", "--num-heads", "1", "--model-dim", "8",
                "--ff-dim", "16", "--max-coords", "10",
            ],
            capsys,
        )
        assert code == 0
        assert "gradient check: PASS" in stdout


class TestParser:
    def test_no_subcommand_is_nonzero_exit(self, capsys):
        assert cli.main([]) != 0
        capsys.readouterr()

    def test_unknown_flag_is_nonzero_exit(self, capsys):
        assert cli.main(["gradcheck", "--bogus"]) != 0
        capsys.readouterr()
