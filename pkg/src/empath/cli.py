"""Command-line entry points for every pipeline stage.

Option precedence: command-line flag > EMPATH_<NAME> environment variable >
`key = value` config file (--config) > built-in default.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import analytics as an
from .checkpoint import load_checkpoint, save_checkpoint
from .encoder import EncoderConfig
from .feedback import FeedbackTemplateSet, generate_feedback, score_delta
from .metrics import evaluate
from .model import init_model, predict
from .text import (
    MECHANISMS,
    AnnotatedPair,
    Vocabulary,
    encode_pair,
    load_corpus,
    split_dataset,
)
from .training import MlmConfig, TrainConfig, gradient_check, pretrain_mlm, train

ENV_PREFIX = "EMPATH_"


def _load_config_file(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_overrides(parser: argparse.ArgumentParser, argv: list):
    """Resolve defaults from config file and environment before parsing."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    file_cfg = _load_config_file(known.config) if known.config else {}
    overrides = {}
    for action in parser._actions:
        if not action.dest or action.dest in ("help", "config"):
            continue
        raw = None
        if action.dest in file_cfg:
            raw = file_cfg[action.dest]
        env_key = ENV_PREFIX + action.dest.upper()
        if env_key in os.environ:
            raw = os.environ[env_key]
        if raw is None:
            continue
        if action.type is not None:
            raw = action.type(raw)
        elif isinstance(action.default, bool):
            raw = raw.lower() in ("1", "true", "yes")
        overrides[action.dest] = raw
    parser.set_defaults(**overrides)


def _add_model_flags(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--num-layers", type=int, default=2)
    p.add_argument("--num-heads", type=int, default=2)
    p.add_argument("--model-dim", type=int, default=64)
    p.add_argument("--ff-dim", type=int, default=128)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=12)


def _encoder_config(args, vocab) -> EncoderConfig:
    return EncoderConfig(
        num_layers=args.num_layers,
        num_heads=args.num_heads,
        model_dim=args.model_dim,
        ff_dim=args.ff_dim,
        max_len=args.max_len,
        vocab_size=len(vocab),
        dropout_prob=args.dropout,
    )


def _load_models(checkpoint_dir, vocab):
    models = {}
    paths = {}
    for mech in MECHANISMS:
        path = os.path.join(checkpoint_dir, f"{mech}.ckpt")
        models[mech], _ = load_checkpoint(path, expected_vocab_hash=vocab.sha256())
        paths[mech] = path
    return models, paths


def cmd_build_vocab(args) -> int:
    pairs = load_corpus(args.corpus)
    vocab = Vocabulary.build([p.seeker_text for p in pairs] + [p.response_text for p in pairs])
    vocab.save(args.out)
    print(f"wrote {len(vocab)} tokens to {args.out}")
    return 0


def cmd_pretrain(args) -> int:
    pairs = load_corpus(args.corpus)
    vocab = Vocabulary.load(args.vocab)
    config = _encoder_config(args, vocab)
    model = init_model(args.mechanism, config, seed=args.seed)
    mlm = MlmConfig(epochs=args.mlm_epochs, batch_size=args.mlm_batch_size, mask_prob=args.mask_prob)
    s_res = pretrain_mlm([p.seeker_text for p in pairs], config, model.s_params, vocab, mlm, seed=args.seed)
    r_res = pretrain_mlm([p.response_text for p in pairs], config, model.r_params, vocab, mlm, seed=args.seed)
    for name, curve in (("s-encoder", s_res.loss_curve), ("r-encoder", r_res.loss_curve)):
        for epoch, value in enumerate(curve):
            print(f"{name} epoch {epoch}: mlm loss {value:.4f}")
    save_checkpoint(model, args.out, vocab.sha256(), metadata={"stage": "pretrained"})
    print(f"wrote {args.out}")
    return 0


def cmd_train(args) -> int:
    pairs = load_corpus(args.corpus)
    vocab = Vocabulary.load(args.vocab)
    train_set, dev_set, _ = split_dataset(pairs, seed=args.seed)
    if args.init_from:
        model, _ = load_checkpoint(args.init_from, expected_vocab_hash=vocab.sha256())
        if model.mechanism != args.mechanism:
            print(
                f"error: checkpoint is for {model.mechanism}, not {args.mechanism}",
                file=sys.stderr,
            )
            return 1
    else:
        config = _encoder_config(args, vocab)
        model = init_model(
            args.mechanism,
            config,
            seed=args.seed,
            use_attention=not args.no_attention,
            use_seeker=not args.no_seeker,
        )
    tcfg = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        lambda_ei=args.lambda_ei,
        lambda_re=args.lambda_re,
        seed=args.seed,
        max_len=args.max_len,
    )
    model, history = train(train_set, dev_set, model, tcfg, vocab)
    for stats in history:
        dev = f"{stats.dev_macro_f1:.4f}" if stats.dev_macro_f1 is not None else "n/a"
        print(f"epoch {stats.epoch}: train loss {stats.train_loss:.4f}, dev macro-f1 {dev}")
    save_checkpoint(
        model,
        args.out,
        vocab.sha256(),
        metadata={"epochs": args.epochs, "loss_curve": [s.train_loss for s in history]},
    )
    print(f"wrote {args.out}")
    return 0


def cmd_eval(args) -> int:
    pairs = load_corpus(args.corpus)
    vocab = Vocabulary.load(args.vocab)
    model, _ = load_checkpoint(args.checkpoint, expected_vocab_hash=vocab.sha256())
    splits = dict(zip(("train", "dev", "test"), split_dataset(pairs, seed=args.seed)))
    splits["all"] = pairs
    report = evaluate(model, splits[args.split], vocab, max_len=model.config.max_len)
    print(report.to_text(), end="")
    return 0


def _predict_all(args, vocab, models):
    pair = AnnotatedPair(
        seeker_text=args.seeker, response_text=args.response, levels={m: 0 for m in MECHANISMS}
    )
    max_len = next(iter(models.values())).config.max_len
    enc = encode_pair(pair, vocab, max_len)
    return {mech: predict(enc, models[mech]) for mech in MECHANISMS}


def cmd_predict(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    models, _ = _load_models(args.checkpoint_dir, vocab)
    preds = _predict_all(args, vocab, models)
    total = 0
    for mech in MECHANISMS:
        p = preds[mech]
        total += p.level
        quoted = "; ".join(f'"{args.response[s:e]}" [{s},{e})' for s, e in p.rationale_spans)
        probs = ", ".join(f"{x:.4f}" for x in p.level_probs)
        print(f"{mech}: level {p.level} (probs {probs}){'  rationale: ' + quoted if quoted else ''}")
    print(f"total_score: {total}")
    return 0


def cmd_feedback(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    models, _ = _load_models(args.checkpoint_dir, vocab)
    templates = FeedbackTemplateSet.load(args.templates) if args.templates else FeedbackTemplateSet()

    def report_for(response):
        sub = argparse.Namespace(seeker=args.seeker, response=response)
        preds = _predict_all(sub, vocab, models)
        preds["response_text"] = response
        return generate_feedback(preds, templates)

    report = report_for(args.response)
    print(f"total_score: {report.total_score}")
    for i, item in enumerate(report.items, start=1):
        print(f"{i}. {item}")
    if args.previous:
        prev = report_for(args.previous)
        print(f"score_delta: {score_delta(prev, report):+d} (from {prev.total_score})")
    return 0


def cmd_analyze(args) -> int:
    records = an.load_logs(args.logs)
    if any(r.levels is None for r in records):
        if not args.checkpoint_dir:
            print("error: logs lack levels; pass --checkpoint-dir to annotate", file=sys.stderr)
            return 1
        vocab = Vocabulary.load(args.vocab)
        models, _ = _load_models(args.checkpoint_dir, vocab)
        max_len = next(iter(models.values())).config.max_len
        records = an.annotate_logs(records, models, vocab, max_len=max_len)

    over_time = an.empathy_over_time(records, an.CohortSpec(min_posts=args.min_posts))
    print("# empathy over time (cohort, year, mechanism means)")
    for join_year in sorted(over_time):
        for year in sorted(over_time[join_year]):
            means = over_time[join_year][year]
            cells = ", ".join(f"{m}={means[m]:.4f}" for m in MECHANISMS)
            print(f"cohort {join_year} year {year}: {cells}")

    by_level = an.feedback_by_level(records)
    print("# engagement by level")
    for mech, entry in by_level["mechanisms"].items():
        for level, stats in entry["levels"].items():
            print(
                f"{mech} level {level}: like_rate={stats['like_rate']:.4f} "
                f"mean_replies={stats['mean_replies']:.4f} n={stats['count']}"
            )
        if "like_rate_strong_vs_none" in entry:
            print(f"{mech} like-rate strong vs none: {entry['like_rate_strong_vs_none']:+.2%}")

    follow = an.follow_analysis(records)
    print("# follows within 24h")
    for key, value in follow.items():
        print(f"{key} = {value:.4f}")

    cross = an.gender_crosstab(records)
    print("# gender crosstab (responder -> seeker, mean total score)")
    for (rg, sg), mean in sorted(cross["means"].items()):
        print(f"{rg} -> {sg}: {mean:.4f} (n={cross['counts'][(rg, sg)]})")

    if args.plot_dir:
        _emit_plots(over_time, args.plot_dir)
    return 0


def _emit_plots(over_time, plot_dir):  # best-effort rendering
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib unavailable; skipping plots", file=sys.stderr)
        return
    os.makedirs(plot_dir, exist_ok=True)
    for mech in MECHANISMS:
        fig, ax = plt.subplots()
        for join_year in sorted(over_time):
            years = sorted(over_time[join_year])
            ax.plot(years, [over_time[join_year][y][mech] for y in years], label=f"cohort {join_year}")
        ax.set_xlabel("year")
        ax.set_ylabel(f"mean {mech} level")
        ax.legend()
        path = os.path.join(plot_dir, f"empathy_over_time_{mech}.png")
        fig.savefig(path)
        plt.close(fig)
        print(f"wrote {path}")


def cmd_serve(args) -> int:
    from .service import ServiceConfig, serve

    config = ServiceConfig(
        checkpoint_paths={
            mech: os.path.join(args.checkpoint_dir, f"{mech}.ckpt") for mech in MECHANISMS
        },
        vocab_path=args.vocab,
        template_path=args.templates,
        host=args.host,
        port=args.port,
        max_body_bytes=args.max_body_bytes,
    )
    serve(config)
    return 0


def cmd_gradcheck(args) -> int:
    vocab = Vocabulary.build(["the quick brown fox", "sad and alone tonight"])
    config = EncoderConfig(
        num_layers=args.num_layers,
        num_heads=args.num_heads,
        model_dim=args.model_dim,
        ff_dim=args.ff_dim,
        max_len=16,
        vocab_size=len(vocab),
        dropout_prob=0.0,
    )
    model = init_model("interpretations", config, seed=args.seed)
    pair = AnnotatedPair(
        seeker_text="sad and alone tonight",
        response_text="the quick brown fox",
        levels={"emotional_reactions": 0, "interpretations": 1, "explorations": 0},
        rationale_spans={"interpretations": [(0, 9)]},
    )
    enc = encode_pair(pair, vocab, 16)
    report = gradient_check(
        model,
        enc,
        gold_level=1,
        gold_mask=enc.rationale_mask["interpretations"],
        eps=args.eps,
        tol=args.tol,
        max_coords=args.max_coords,
        seed=args.seed,
    )
    print(f"max relative error: {report.max_rel_err:.3e}")
    for name, coord, analytic, numeric, rel in report.failures[:20]:
        print(f"FAIL {name}[{coord}]: analytic {analytic:.6e} vs numeric {numeric:.6e} (rel {rel:.3e})")
    print("gradient check:", "PASS" if report.ok else "FAIL")
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="empath", description="Empathy classification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-vocab", help="build a vocabulary from a corpus")
    p.add_argument("--config")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("pretrain", help="MLM pretraining of both encoders")
    _add_model_flags(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--mechanism", choices=MECHANISMS, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mlm-epochs", type=int, default=3)
    p.add_argument("--mlm-batch-size", type=int, default=8)
    p.add_argument("--mask-prob", type=float, default=0.15)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="fine-tune one mechanism model")
    _add_model_flags(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--mechanism", choices=MECHANISMS, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--init-from", help="start from a pretrained checkpoint")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--epochs", type=int, default=4)
    p.add_argument("--lambda-ei", type=float, default=1.0)
    p.add_argument("--lambda-re", type=float, default=0.5)
    p.add_argument("--no-attention", action="store_true")
    p.add_argument("--no-seeker", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus split")
    p.add_argument("--config")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "dev", "test", "all"), default="test")
    p.add_argument("--seed", type=int, default=12)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="classify one (seeker, response) pair")
    p.add_argument("--config")
    p.add_argument("--vocab", required=True)
    p.add_argument("--checkpoint-dir", required=True)
    p.add_argument("--seeker", required=True)
    p.add_argument("--response", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("feedback", help="generate templated feedback for a response")
    p.add_argument("--config")
    p.add_argument("--vocab", required=True)
    p.add_argument("--checkpoint-dir", required=True)
    p.add_argument("--seeker", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--previous", help="earlier revision, for the score delta")
    p.add_argument("--templates")
    p.set_defaults(func=cmd_feedback)

    p = sub.add_parser("analyze", help="platform analytics over an interaction log")
    p.add_argument("--config")
    p.add_argument("--logs", required=True)
    p.add_argument("--vocab")
    p.add_argument("--checkpoint-dir")
    p.add_argument("--min-posts", type=int, default=10)
    p.add_argument("--plot-dir")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("serve", help="run the prediction/feedback HTTP service")
    p.add_argument("--config")
    p.add_argument("--vocab", required=True)
    p.add_argument("--checkpoint-dir", required=True)
    p.add_argument("--templates")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8799)
    p.add_argument("--max-body-bytes", type=int, default=1 << 16)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("gradcheck", help="finite-difference check of the toy model")
    _add_model_flags(p)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-coords", type=int, default=200)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # Resolve config-file/env overrides on the chosen subcommand's parser.
    try:
        if argv and argv[0] in parser._subparsers._group_actions[0].choices:
            _apply_overrides(parser._subparsers._group_actions[0].choices[argv[0]], argv[1:])
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except Exception as exc:  # surface errors as exit code + message, not tracebacks
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
