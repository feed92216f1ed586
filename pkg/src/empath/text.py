"""Tokenization, vocabulary, corpus IO, span/mask alignment, and splitting.

Word-level tokenizer (lowercase, punctuation split) so rationale alignment
stays exact. Corpus files are tab-delimited, one (seeker, response) pair per
line with per-mechanism level and character spans.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

import numpy as np

MECHANISMS = ("emotional_reactions", "interpretations", "explorations")

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
RESERVED = (PAD, UNK, CLS, SEP, MASK)

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


class CorpusFormatError(ValueError):
    """Malformed corpus file line."""


class ValidationError(ValueError):
    """A record violates a domain invariant."""


@dataclass(frozen=True)
class Token:
    text: str
    start: int  # char offset into original text, half-open [start, end)
    end: int


def tokenize(text: str) -> list[Token]:
    """Lowercased word/punctuation tokens with character offsets."""
    return [Token(m.group(0).lower(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


@dataclass(frozen=True)
class AnnotatedPair:
    seeker_text: str
    response_text: str
    levels: dict  # mechanism -> 0|1|2
    rationale_spans: dict = field(default_factory=dict)  # mechanism -> [(start, end)]

    def __post_init__(self):
        # Canonicalize so equality is insensitive to omitted empty span lists.
        object.__setattr__(
            self,
            "rationale_spans",
            {m: [tuple(s) for s in self.rationale_spans.get(m, [])] for m in MECHANISMS},
        )
        for mech in MECHANISMS:
            if mech not in self.levels:
                raise ValidationError(f"missing level for mechanism '{mech}'")
            level = self.levels[mech]
            if level not in (0, 1, 2):
                raise ValidationError(f"level for '{mech}' must be 0, 1, or 2, got {level!r}")
            spans = self.spans_for(mech)
            validate_spans(spans, len(self.response_text))
            if level == 0 and spans:
                raise ValidationError(
                    f"'{mech}' has level 0 but nonempty rationale spans"
                )

    def spans_for(self, mechanism: str) -> list:
        return list(self.rationale_spans.get(mechanism, []))


def validate_spans(spans, text_len: int) -> None:
    prev_end = None
    for start, end in spans:
        if not (0 <= start < end <= text_len):
            raise ValidationError(f"span ({start}, {end}) out of bounds for text of length {text_len}")
        if prev_end is not None and start < prev_end:
            raise ValidationError(f"spans overlap or are unsorted at ({start}, {end})")
        prev_end = end


class Vocabulary:
    """token <-> id bijection with reserved tokens pinned to ids 0..4."""

    def __init__(self, tokens):
        self._tokens = list(RESERVED) + [t for t in tokens if t not in RESERVED]
        self._ids = {t: i for i, t in enumerate(self._tokens)}
        if len(self._ids) != len(self._tokens):
            raise ValidationError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self._tokens)

    def __contains__(self, token):
        return token in self._ids

    def id(self, token: str) -> int:
        return self._ids.get(token, self._ids[UNK])

    def token(self, idx: int) -> str:
        return self._tokens[idx]

    @property
    def pad_id(self):
        return self._ids[PAD]

    @property
    def unk_id(self):
        return self._ids[UNK]

    @property
    def cls_id(self):
        return self._ids[CLS]

    @property
    def sep_id(self):
        return self._ids[SEP]

    @property
    def mask_id(self):
        return self._ids[MASK]

    def special_ids(self) -> set:
        return {self._ids[t] for t in RESERVED}

    def sha256(self) -> str:
        h = hashlib.sha256()
        for t in self._tokens:
            h.update(t.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()

    @classmethod
    def build(cls, texts, min_count: int = 1) -> "Vocabulary":
        """Frequency-then-lexicographic ordering; deterministic."""
        counts: dict[str, int] = {}
        for text in texts:
            for tok in tokenize(text):
                counts[tok.text] = counts.get(tok.text, 0) + 1
        ordered = sorted(counts, key=lambda t: (-counts[t], t))
        return cls(t for t in ordered if counts[t] >= min_count)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for t in self._tokens:
                f.write(t + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            tokens = [line.rstrip("\n") for line in f if line.rstrip("\n")]
        if tuple(tokens[:5]) != RESERVED:
            raise ValidationError(
                f"vocabulary file must start with reserved tokens {RESERVED}"
            )
        return cls(tokens[5:])


@dataclass(frozen=True)
class TokenizedPair:
    seeker_ids: np.ndarray  # [CLS] ... [SEP] [PAD]* of length max_len
    response_ids: np.ndarray
    seeker_mask: np.ndarray  # 1 on real (non-pad) positions
    response_mask: np.ndarray
    rationale_mask: dict  # mechanism -> np.ndarray over kept response tokens
    response_offsets: list  # (start, end) char offsets per kept response token
    n_response_tokens: int  # count of kept real tokens (excl CLS/SEP/PAD)
    levels: dict


def align_spans_to_mask(spans, token_offsets) -> np.ndarray:
    """Token gets 1 iff its char interval overlaps any span by >= 1 char."""
    # Tokens may have been truncated, so only ordering is checked here.
    validate_spans(spans, max((e for _, e in spans), default=0))
    mask = np.zeros(len(token_offsets), dtype=np.int64)
    for j, (ts, te) in enumerate(token_offsets):
        for ss, se in spans:
            if ts < se and ss < te:
                mask[j] = 1
                break
    return mask


def mask_to_spans(mask, token_offsets) -> list:
    """Maximal runs of 1 mapped back to char intervals."""
    spans = []
    run_start = None
    for j, m in enumerate(list(mask) + [0]):
        if m and run_start is None:
            run_start = j
        elif not m and run_start is not None:
            spans.append((token_offsets[run_start][0], token_offsets[j - 1][1]))
            run_start = None
    return spans


def encode_pair(pair: AnnotatedPair, vocab: Vocabulary, max_len: int = 64) -> TokenizedPair:
    if max_len < 3:
        raise ValidationError("max_len must be at least 3")

    def frame(text):
        toks = tokenize(text)[: max_len - 2]
        ids = [vocab.cls_id] + [vocab.id(t.text) for t in toks] + [vocab.sep_id]
        mask = [1] * len(ids)
        while len(ids) < max_len:
            ids.append(vocab.pad_id)
            mask.append(0)
        offsets = [(t.start, t.end) for t in toks]
        return np.array(ids), np.array(mask), offsets

    s_ids, s_mask, _ = frame(pair.seeker_text)
    r_ids, r_mask, r_offsets = frame(pair.response_text)
    rationale = {
        mech: align_spans_to_mask(pair.spans_for(mech), r_offsets) for mech in MECHANISMS
    }
    return TokenizedPair(
        seeker_ids=s_ids,
        response_ids=r_ids,
        seeker_mask=s_mask,
        response_mask=r_mask,
        rationale_mask=rationale,
        response_offsets=r_offsets,
        n_response_tokens=len(r_offsets),
        levels=dict(pair.levels),
    )


def split_dataset(pairs, ratios=(75, 5, 20), seed: int = 12):
    """Seed-deterministic shuffled partition; floor sizes, remainder to train."""
    if any(r <= 0 for r in ratios) or sum(ratios) != 100:
        raise ValidationError(f"ratios must be positive and sum to 100, got {ratios}")
    n = len(pairs)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_dev = n * ratios[1] // 100
    n_test = n * ratios[2] // 100
    n_train = n - n_dev - n_test
    shuffled = [pairs[i] for i in order]
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_dev],
        shuffled[n_train + n_dev :],
    )


# -- corpus file IO ---------------------------------------------------------
# One record per line, tab-delimited:
#   seeker \t response \t er_level \t er_spans \t ip_level \t ip_spans
#   \t ex_level \t ex_spans
# Spans are "start-end;start-end" (half-open), empty string for none. Tabs,
# newlines, and backslashes inside text are escaped.


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            out.append({"t": "\t", "n": "\n", "\\": "\\"}.get(nxt, "\\" + nxt))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def _format_spans(spans) -> str:
    return ";".join(f"{s}-{e}" for s, e in spans)


def _parse_spans(text: str) -> list:
    if not text:
        return []
    spans = []
    for part in text.split(";"):
        s, _, e = part.partition("-")
        spans.append((int(s), int(e)))
    return spans


def save_corpus(pairs, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            fields = [_escape(p.seeker_text), _escape(p.response_text)]
            for mech in MECHANISMS:
                fields.append(str(p.levels[mech]))
                fields.append(_format_spans(p.spans_for(mech)))
            f.write("\t".join(fields) + "\n")


def load_corpus(path) -> list:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 8:
                raise CorpusFormatError(
                    f"{path}:{lineno}: expected 8 tab-separated fields, got {len(fields)}"
                )
            try:
                levels = {}
                spans = {}
                for i, mech in enumerate(MECHANISMS):
                    levels[mech] = int(fields[2 + 2 * i])
                    spans[mech] = _parse_spans(fields[3 + 2 * i])
                pairs.append(
                    AnnotatedPair(
                        seeker_text=_unescape(fields[0]),
                        response_text=_unescape(fields[1]),
                        levels=levels,
                        rationale_spans=spans,
                    )
                )
            except (ValueError, ValidationError) as err:
                raise type(err)(f"{path}:{lineno}: {err}") from err
    return pairs
