"""Shared synthetic fixtures: a separable corpus whose levels are keyword-
determined, so a toy model can memorize it and tests know the gold outputs."""

import itertools

from empath.text import MECHANISMS, AnnotatedPair

SEEKERS = [
    "i am about to have an anxiety attack.",
    "i feel so alone tonight",
    "nothing is going right for me",
    "i'm hurt so much that i don't really have feelings anymore",
]

# One phrase per (mechanism, level); level-0 phrases are neutral filler.
PHRASES = {
    "emotional_reactions": {
        0: "ok then",
        1: "hope things improve",
        2: "i feel really sad for you",
    },
    "interpretations": {
        0: "noted",
        1: "i understand how you feel",
        2: "this must be terrifying",
    },
    "explorations": {
        0: "bye for now",
        1: "how are you",
        2: "what makes you feel this way",
    },
}


def compose_response(er_level, ip_level, ex_level):
    """Response text plus per-mechanism char spans for levels > 0."""
    levels = dict(zip(MECHANISMS, (er_level, ip_level, ex_level)))
    parts = []
    spans = {}
    offset = 0
    for mech in MECHANISMS:
        phrase = PHRASES[mech][levels[mech]]
        if parts:
            offset += 1  # joining space
        if levels[mech] > 0:
            spans[mech] = [(offset, offset + len(phrase))]
        else:
            spans[mech] = []
        parts.append(phrase)
        offset += len(phrase)
    return " ".join(parts), levels, spans


def build_separable_corpus(n=32):
    """All 27 level combos (plus repeats up to n), seekers cycled."""
    combos = list(itertools.product((0, 1, 2), repeat=3))
    pairs = []
    for i in range(n):
        er, ip, ex = combos[i % len(combos)]
        response, levels, spans = compose_response(er, ip, ex)
        pairs.append(
            AnnotatedPair(
                seeker_text=SEEKERS[i % len(SEEKERS)],
                response_text=response,
                levels=levels,
                rationale_spans=spans,
            )
        )
    return pairs


def token_accuracy(model, pairs, vocab, max_len):
    from empath.model import predict
    from empath.text import encode_pair

    correct = total = 0
    for pair in pairs:
        enc = encode_pair(pair, vocab, max_len)
        pred = predict(enc, model)
        gold = enc.rationale_mask[model.mechanism]
        correct += int((pred.rationale_mask == gold).sum())
        total += len(gold)
    return correct / total


def identification_accuracy(model, pairs, vocab, max_len):
    from empath.model import predict
    from empath.text import encode_pair

    hits = 0
    for pair in pairs:
        enc = encode_pair(pair, vocab, max_len)
        hits += predict(enc, model).level == pair.levels[model.mechanism]
    return hits / len(pairs)
