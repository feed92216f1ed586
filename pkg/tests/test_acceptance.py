"""End-to-end acceptance suite.

One test per headline guarantee; each prints a single PASS/FAIL line so the
suite doubles as a human-readable report (run with -s to see them inline).
"""

import itertools
import sys
import time
from contextlib import contextmanager

import numpy as np

from helpers import (
    SEEKERS,
    build_separable_corpus,
    compose_response,
    identification_accuracy,
    token_accuracy,
)

from empath.autodiff import Tensor
from empath.checkpoint import load_checkpoint, save_checkpoint
from empath.encoder import EncoderConfig
from empath.metrics import accuracy, cohen_kappa, iou_f1, macro_f1, token_f1
from empath.model import forward, fuse, init_model, loss, predict
from empath.text import (
    MECHANISMS,
    AnnotatedPair,
    Vocabulary,
    encode_pair,
    load_corpus,
    save_corpus,
    split_dataset,
)
from empath.training import TrainConfig, gradient_check, train

from test_metrics import (
    extract_spans,
    oracle_iou_f1,
    oracle_kappa,
    oracle_macro_f1,
    oracle_token_f1,
    random_mask,
)


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"FAIL: {name}", file=sys.stderr)
        raise
    print(f"PASS: {name}", file=sys.stderr)


def full_toy_setup():
    vocab = Vocabulary.build(
        ["i am about to have an anxiety attack", "this must be terrifying i am here"]
    )
    config = EncoderConfig(
        num_layers=2, num_heads=2, model_dim=64, ff_dim=128, max_len=16,
        vocab_size=len(vocab), dropout_prob=0.0,
    )
    model = init_model("interpretations", config, seed=12)
    pair = AnnotatedPair(
        seeker_text="i am about to have an anxiety attack",
        response_text="this must be terrifying i am here",
        levels={"emotional_reactions": 0, "interpretations": 2, "explorations": 0},
        rationale_spans={"interpretations": [(0, 23)]},
    )
    enc = encode_pair(pair, vocab, 16)
    return model, enc


def test_gradient_integrity():
    with criterion("gradient integrity (full toy model, rel tol 1e-3, < 60 s)"):
        model, enc = full_toy_setup()
        start = time.monotonic()
        report = gradient_check(
            model, enc, gold_level=2, gold_mask=enc.rationale_mask["interpretations"],
            tol=1e-3, max_coords=200,
        )
        elapsed = time.monotonic() - start
        assert report.ok, report.failures[:5]
        assert report.max_rel_err < 1e-3
        assert set(report.per_tensor) == set(model.parameters())
        assert elapsed < 60.0, f"took {elapsed:.1f}s"


def test_architecture_fidelity():
    with criterion("architecture fidelity (fusion oracle, residual, masking, ablations)"):
        rng = np.random.default_rng(12)
        for _ in range(100):
            n = int(rng.integers(1, 9))
            m = int(rng.integers(1, 9))
            d = int(rng.integers(2, 17))
            e_r = rng.normal(size=(n, d))
            e_s = rng.normal(size=(m, d))
            mask = (rng.random(m) < 0.7).astype(float)
            if mask.sum() == 0:
                mask[int(rng.integers(m))] = 1.0
            out = fuse(Tensor(e_r), Tensor(e_s), mask)

            # brute-force oracle: per-row masked softmax then weighted sum
            scores = e_r @ e_s.T / np.sqrt(d)
            oracle_attended = np.zeros_like(e_r)
            keep = mask > 0
            for i in range(n):
                row = scores[i, keep]
                w = np.exp(row - row.max())
                w /= w.sum()
                oracle_attended[i] = w @ e_s[keep]
            assert np.abs(out.attended.data - oracle_attended).max() < 1e-6
            # residual: h = eR + a, exactly
            assert np.array_equal(out.hidden.data, e_r + out.attended.data)
            # rows sum to 1 and masked keys get exactly zero weight
            assert np.abs(out.weights.sum(axis=-1) - 1.0).max() < 1e-6
            assert (out.weights[:, ~keep] == 0.0).all()

        # no-seeker variant is invariant to the seeker text
        vocab = Vocabulary.build(
            [s for s in SEEKERS] + [compose_response(1, 1, 1)[0]]
        )
        config = EncoderConfig(
            num_layers=1, num_heads=2, model_dim=16, ff_dim=32, max_len=24,
            vocab_size=len(vocab), dropout_prob=0.0,
        )
        blind = init_model("interpretations", config, seed=12, use_seeker=False)
        response = compose_response(1, 1, 1)[0]
        levels = {m: 1 for m in MECHANISMS}
        enc_a = encode_pair(AnnotatedPair(SEEKERS[0], response, levels), vocab, 24)
        enc_b = encode_pair(AnnotatedPair(SEEKERS[1], response, levels), vocab, 24)
        pa, pb = predict(enc_a, blind), predict(enc_b, blind)
        assert np.array_equal(pa.level_probs, pb.level_probs)
        assert np.array_equal(pa.rationale_mask, pb.rationale_mask)

        # lambda_RE = 0 leaves the rationale head gradient-free
        model = init_model("interpretations", config, seed=12)
        model.zero_grad()
        out = forward(enc_a, model)
        loss(out, 1, enc_a.rationale_mask["interpretations"], lambda_re=0.0).backward()
        assert model.head_params["rat.w"].grad is None
        assert model.head_params["rat.b"].grad is None
        assert model.head_params["id.w"].grad is not None


def test_trainability():
    with criterion("trainability (32-pair fixture: 100% id, >= 95% token, deterministic, < 5 min)"):
        pairs = build_separable_corpus(32)
        vocab = Vocabulary.build(
            [p.seeker_text for p in pairs] + [p.response_text for p in pairs]
        )
        config = EncoderConfig(
            num_layers=1, num_heads=2, model_dim=32, ff_dim=64, max_len=24,
            vocab_size=len(vocab), dropout_prob=0.0,
        )
        tcfg = TrainConfig(learning_rate=1.5e-3, batch_size=8, epochs=80, seed=12, max_len=24)
        assert tcfg.epochs <= 200

        start = time.monotonic()
        trained = {}
        for mech in MECHANISMS:
            model = init_model(mech, config, seed=12)
            model, _ = train(pairs, [], model, tcfg, vocab)
            trained[mech] = model
        elapsed = time.monotonic() - start
        assert elapsed < 300.0, f"took {elapsed:.1f}s"

        for mech, model in trained.items():
            assert identification_accuracy(model, pairs, vocab, 24) == 1.0, mech
            assert token_accuracy(model, pairs, vocab, 24) >= 0.95, mech

        # bit-identical rerun under the same seed
        rerun = init_model("interpretations", config, seed=12)
        rerun, _ = train(pairs, [], rerun, tcfg, vocab)
        for k, p in trained["interpretations"].parameters().items():
            assert np.array_equal(p.data, rerun.parameters()[k].data), k


def test_metric_correctness():
    with criterion("metric correctness (1000-instance oracle equality + hand cases)"):
        rng = np.random.default_rng(200)
        for _ in range(1000):
            n = int(rng.integers(1, 12))
            pred = list(rng.integers(0, 3, size=n))
            gold = list(rng.integers(0, 3, size=n))
            assert accuracy(pred, gold) == sum(p == g for p, g in zip(pred, gold)) / n
            assert macro_f1(pred, gold) == oracle_macro_f1(pred, gold)

            k = int(rng.integers(1, 4))
            pm = [random_mask(rng, 8) for _ in range(k)]
            gm = [random_mask(rng, 8) for _ in range(k)]
            assert token_f1(pm, gm) == oracle_token_f1(pm, gm)
            ps = [extract_spans(m) for m in pm]
            gs = [extract_spans(m) for m in gm]
            assert iou_f1(ps, gs) == oracle_iou_f1(ps, gs)

            a = list(rng.integers(0, 3, size=max(n, 2)))
            b = list(rng.integers(0, 3, size=max(n, 2)))
            if len(set(a) | set(b)) >= 2:
                assert cohen_kappa(a, b) == oracle_kappa(a, b)

        assert abs(macro_f1([0, 0, 1, 1], [0, 0, 1, 2]) - 5 / 9) < 1e-12
        kappa_a = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]
        kappa_b = [0, 0, 0, 0, 1, 0, 1, 1, 1, 1]
        assert abs(cohen_kappa(kappa_a, kappa_b) - 0.6) < 1e-12
        assert iou_f1([[(1, 3)]], [[(0, 3)]]) == 1.0  # IOU 2/3 counts as TP
        assert iou_f1([[(3, 4)]], [[(0, 4)]]) == 0.0  # IOU 1/4 counts as FN


def test_pipeline_fidelity(tmp_path):
    with criterion("pipeline fidelity (75:5:20 split, corpus round-trip, checkpoint round-trip)"):
        # split ratios with remainder folded into train
        pairs = build_separable_corpus(32)
        dummy = [pairs[i % len(pairs)] for i in range(10143)]
        tr, dv, te = split_dataset(dummy, seed=12)
        assert (len(tr), len(dv), len(te)) == (7608, 507, 2028)
        assert sorted(map(id, tr + dv + te)) == sorted(map(id, dummy))
        for n in (20, 32, 100, 101):
            data = (dummy * (n // len(dummy) + 1))[:n]
            a, b, c = split_dataset(data, seed=12)
            assert len(b) == n * 5 // 100 and len(c) == n * 20 // 100
            assert len(a) == n - len(b) - len(c)

        # corpus round-trip identity
        path = tmp_path / "corpus.tsv"
        save_corpus(pairs, path)
        assert load_corpus(path) == pairs

        # checkpoint round-trip gives bit-identical eval outputs
        vocab = Vocabulary.build(
            [p.seeker_text for p in pairs] + [p.response_text for p in pairs]
        )
        config = EncoderConfig(
            num_layers=1, num_heads=2, model_dim=16, ff_dim=32, max_len=24,
            vocab_size=len(vocab), dropout_prob=0.0,
        )
        model = init_model("explorations", config, seed=12)
        ckpt = tmp_path / "m.ckpt"
        save_checkpoint(model, ckpt, vocab.sha256())
        loaded, _ = load_checkpoint(ckpt, expected_vocab_hash=vocab.sha256())
        for pair in pairs[:8]:
            enc = encode_pair(pair, vocab, 24)
            a, b = predict(enc, model), predict(enc, loaded)
            assert a.level == b.level
            assert np.array_equal(a.level_probs, b.level_probs)
            assert np.array_equal(a.rationale_mask, b.rationale_mask)


def test_feedback_generation():
    with criterion("feedback (27-combo scoring, two-item sample, delta arithmetic)"):
        from empath.feedback import generate_feedback, score_delta, total_score
        from empath.model import Prediction

        for combo in itertools.product((0, 1, 2), repeat=3):
            assert total_score(combo) == sum(combo)

        def pred(mech, level, spans=()):
            return Prediction(
                mechanism=mech, level=level, level_probs=None,
                rationale_mask=None, rationale_spans=list(spans), token_offsets=[],
            )

        def inputs(response, er=(0, ()), ip=(0, ()), ex=(0, ())):
            return {
                "response_text": response,
                "emotional_reactions": pred("emotional_reactions", *er),
                "interpretations": pred("interpretations", *ip),
                "explorations": pred("explorations", *ex),
            }

        report = generate_feedback(inputs("Yeah, I felt it once", ip=(1, [(6, 20)])))
        assert len(report.items) == 2
        assert "I felt it once" in report.items[0]
        assert report.items[1].startswith("It also lacks")

        before = generate_feedback(inputs("meh", ip=(1, [(0, 3)])))
        after = generate_feedback(
            inputs("a much better try ok", er=(2, [(0, 4)]), ip=(1, [(5, 9)]), ex=(1, [(10, 14)]))
        )
        assert score_delta(before, after) == after.total_score - before.total_score == 3


def test_analytics_aggregates():
    with criterion("analytics (cohorts, like-rates, follow ratio, gender cross-tab vs brute force)"):
        from empath.analytics import (
            empathy_over_time,
            feedback_by_level,
            follow_analysis,
            gender_crosstab,
        )
        from test_analytics import rec

        # 36% cohort decline
        records = [rec(responder="vet", year=2015, er=lv) for lv in (2, 2, 2, 1, 1, 1, 1, 0)]
        records += [rec(responder="vet", year=2020, er=lv) for lv in (2, 1, 1, 0, 0)]
        series = empathy_over_time(records)
        start = series[2015][2015]["emotional_reactions"]
        end = series[2015][2020]["emotional_reactions"]
        assert start == sum((2, 2, 2, 1, 1, 1, 1, 0)) / 8
        assert end == sum((2, 1, 1, 0, 0)) / 5
        assert abs((1 - end / start) - 0.36) < 1e-12

        # +45% like-rate lift for strong vs none
        likes = [rec(liked=(i < 8)) for i in range(20)]
        likes += [rec(er=2, liked=(i < 29)) for i in range(50)]
        entry = feedback_by_level(likes)["mechanisms"]["emotional_reactions"]
        group0 = [r for r in likes if r.levels["emotional_reactions"] == 0]
        group2 = [r for r in likes if r.levels["emotional_reactions"] == 2]
        assert entry["levels"][0]["like_rate"] == sum(r.seeker_liked for r in group0) / len(group0)
        assert entry["levels"][2]["like_rate"] == sum(r.seeker_liked for r in group2) / len(group2)
        assert abs(entry["like_rate_strong_vs_none"] - 0.45) < 1e-12

        # +79% follow ratio
        follows = [rec(followed=(i < 20)) for i in range(100)]
        follows += [rec(er=1, followed=(i < 179)) for i in range(500)]
        out = follow_analysis(follows)
        emp = [r for r in follows if r.total >= 1]
        non = [r for r in follows if r.total == 0]
        assert out["empathic_rate"] == sum(r.followed_within_24h for r in emp) / len(emp)
        assert out["non_empathic_rate"] == sum(r.followed_within_24h for r in non) / len(non)
        assert abs(out["relative_change"] - 0.79) < 1e-12

        # +32% gender cross-tab gap
        cross_records = [
            rec(er=lv, seeker_gender="female", responder_gender="female")
            for lv in ([2] * 8 + [1] * 17)
        ]
        cross_records += [
            rec(er=1, seeker_gender="male", responder_gender="male") for _ in range(10)
        ]
        cross = gender_crosstab(cross_records)
        ff = [r.total for r in cross_records if r.responder_gender == "female"]
        assert cross["means"][("female", "female")] == sum(ff) / len(ff)
        assert abs(cross["comparisons"][(("female", "female"), ("male", "male"))] - 0.32) < 1e-12


def test_service_endpoints(trained_trio):
    with criterion("service (/predict, /feedback deterministic + validated + health hashes)"):
        from fastapi.testclient import TestClient

        from empath.checkpoint import checkpoint_hash
        from empath.service import ServiceConfig, create_app

        app = create_app(
            ServiceConfig(
                checkpoint_paths=trained_trio["checkpoints"],
                vocab_path=trained_trio["vocab_path"],
            )
        )
        with TestClient(app, raise_server_exceptions=False) as client:
            health = client.get("/health").json()
            assert health["vocab"] == trained_trio["vocab"].sha256()
            for mech in MECHANISMS:
                assert health["checkpoints"][mech] == checkpoint_hash(
                    trained_trio["checkpoints"][mech]
                )

            pair = trained_trio["pairs"][0]
            payload = {"seeker": pair.seeker_text, "response": pair.response_text}
            first = client.post("/predict", json=payload)
            assert first.status_code == 200
            assert first.json() == client.post("/predict", json=payload).json()
            for mech in MECHANISMS:
                assert first.json()["mechanisms"][mech]["level"] == pair.levels[mech]

            response = compose_response(2, 1, 2)[0]
            body = client.post(
                "/predict", json={"seeker": SEEKERS[0], "response": response}
            ).json()
            raw = response.encode("utf-8")
            for mech in MECHANISMS:
                for span in body["mechanisms"][mech]["spans"]:
                    assert raw[span["start"] : span["end"]].decode("utf-8") == span["text"]

            assert client.post("/predict", json={"seeker": "hi"}).status_code == 400

            fb = {"seeker": SEEKERS[0], "response": response}
            assert client.post("/feedback", json=fb).json() == client.post("/feedback", json=fb).json()
