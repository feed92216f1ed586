"""Total empathy scoring and templated feedback from a mechanism triple.

Feedback items follow the register of the pilot feedback loop: weak
communications quote their rationale and suggest strengthening, strong ones
are affirmed, and mechanisms that are absent get exemplar phrasings. Two or
more absent mechanisms collapse into one combined item.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .text import MECHANISMS

LQ, RQ = "“", "”"  # curly quotes, matching the pilot feedback style

MECHANISM_TITLES = {
    "emotional_reactions": "Emotional Reactions",
    "interpretations": "Interpretations",
    "explorations": "Explorations",
}

# What each mechanism is missing when it is absent, phrased to compose into
# a combined "lacks" sentence.
LACK_PHRASES = {
    "emotional_reactions": "expressions of emotions of warmth, compassion, or concern",
    "interpretations": "communication of an understanding of the seeker's feelings and experiences",
    "explorations": "an attempt to explore the seeker's emotions or feelings",
}

DEFAULT_EXEMPLARS = {
    "emotional_reactions": ["I feel really sad for you", "I am feeling sorry for you"],
    "interpretations": ["This must be terrible", "I know you are in a tough situation"],
    "explorations": ["What makes you feel depressed?", "Are you feeling alone right now?"],
}

DEFAULT_TEMPLATES = {
    ("emotional_reactions", 0): "The response lacks expressions of emotions of warmth, compassion, or concern towards the seeker. Typically, they are expressed by saying {exemplars}.",
    ("emotional_reactions", 1): "The response expresses emotions towards the seeker to a weak degree in the portion {rationale}. The communication can be made stronger by specifying your feelings of warmth, compassion, or concern. Typically, they are expressed by saying {exemplars}.",
    ("emotional_reactions", 2): "The response strongly expresses warmth, compassion, or concern towards the seeker in the portion {rationale}. Keep it up.",
    ("interpretations", 0): "The response does not communicate an understanding of the seeker's feelings or experiences. Typically, they are expressed by saying {exemplars}.",
    ("interpretations", 1): "The response communicates an understanding of the seeker's post to a weak degree in the portion {rationale}. The communication can be made stronger by talking about the seeker's feelings or experiences that you interpret after reading the post. Typically, they are expressed by saying {exemplars}.",
    ("interpretations", 2): "The response communicates a strong understanding of the seeker's post in the portion {rationale}. Keep it up.",
    ("explorations", 0): "The response does not attempt to explore the seeker's emotions or feelings. Typically, they are expressed by saying {exemplars}.",
    ("explorations", 1): "The response explores the seeker's feelings to a weak degree in the portion {rationale}. The communication can be made stronger by asking about feelings or experiences the seeker has not stated. Typically, they are expressed by saying {exemplars}.",
    ("explorations", 2): "The response strongly explores the seeker's emotions or feelings in the portion {rationale}. Keep it up.",
}


@dataclass
class FeedbackTemplateSet:
    templates: dict = field(default_factory=lambda: dict(DEFAULT_TEMPLATES))
    exemplars: dict = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_EXEMPLARS.items()})

    def __post_init__(self):
        for mech in MECHANISMS:
            for level in (0, 1, 2):
                if (mech, level) not in self.templates:
                    raise ValueError(f"missing template for ({mech}, {level})")

    @classmethod
    def load(cls, path) -> "FeedbackTemplateSet":
        """Template file: lines `mechanism<TAB>level<TAB>template`, plus
        optional `mechanism<TAB>exemplar<TAB>phrase` lines."""
        templates = {}
        exemplars = {m: [] for m in MECHANISMS}
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t", 2)
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
                mech, kind, text = parts
                if mech not in MECHANISMS:
                    raise ValueError(f"{path}:{lineno}: unknown mechanism {mech!r}")
                if kind == "exemplar":
                    exemplars[mech].append(text)
                else:
                    templates[(mech, int(kind))] = text
        for m in MECHANISMS:
            if not exemplars[m]:
                exemplars[m] = list(DEFAULT_EXEMPLARS[m])
        return cls(templates=templates, exemplars=exemplars)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for (mech, level), text in sorted(self.templates.items()):
                f.write(f"{mech}\t{level}\t{text}\n")
            for mech, phrases in sorted(self.exemplars.items()):
                for phrase in phrases:
                    f.write(f"{mech}\texemplar\t{phrase}\n")


@dataclass
class FeedbackReport:
    response_text: str
    levels: dict  # mechanism -> level
    rationale_spans: dict  # mechanism -> [(start, end)]
    total_score: int
    items: list  # ordered feedback strings
    highlights: list  # (start, end, mechanism, level)


def total_score(levels) -> int:
    vals = [levels[m] for m in MECHANISMS] if isinstance(levels, dict) else list(levels)
    if len(vals) != 3 or any(v not in (0, 1, 2) for v in vals):
        raise ValueError(f"levels must be a triple over {{0,1,2}}, got {vals}")
    return sum(vals)


LOW_EMPATHY_THRESHOLD = 1  # total score at or below this invites a rewrite


def _quote_spans(response: str, spans) -> str:
    quotes = [f"{LQ}{response[s:e]}{RQ}" for s, e in spans]
    return ", ".join(quotes) if quotes else f"{LQ}{RQ}"

def _quote_exemplars(phrases) -> str:
    return ", ".join(f"{LQ}{p}{RQ}" for p in phrases)


def generate_feedback(predictions: dict, templates: FeedbackTemplateSet | None = None) -> FeedbackReport:
    """Build a report from the three mechanisms' predictions on one response.

    `predictions` maps mechanism name to an object with .level and
    .rationale_spans (char intervals into the shared response text), plus the
    response text under key "response_text".
    """
    templates = templates or FeedbackTemplateSet()
    missing = [m for m in MECHANISMS if m not in predictions]
    if missing:
        raise ValueError(f"missing predictions for mechanisms: {missing}")
    response = predictions["response_text"]

    levels = {m: predictions[m].level for m in MECHANISMS}
    spans = {m: list(predictions[m].rationale_spans) for m in MECHANISMS}
    score = total_score(levels)

    zeros = [m for m in MECHANISMS if levels[m] == 0]
    items = []
    for mech in MECHANISMS:
        level = levels[mech]
        if level == 0 and len(zeros) >= 2:
            continue  # grouped into the combined item below
        text = templates.templates[(mech, level)].format(
            rationale=_quote_spans(response, spans[mech]),
            exemplars=_quote_exemplars(templates.exemplars[mech]),
        )
        items.append(text)
    if len(zeros) >= 2:
        lacks = [LACK_PHRASES[m] for m in zeros]
        if len(lacks) == 2:
            lack_text = f"{lacks[0]} and also does not include {lacks[1]}"
        else:
            lack_text = ", ".join(lacks[:-1]) + f", and {lacks[-1]}"
        exemplar_text = _quote_exemplars(
            [templates.exemplars[m][0] for m in zeros]
        )
        prefix = "It also lacks" if items else "The response lacks"
        items.append(
            f"{prefix} {lack_text}. Typically, they are expressed by saying {exemplar_text}."
        )

    highlights = [
        (s, e, mech, levels[mech]) for mech in MECHANISMS for s, e in spans[mech]
    ]
    return FeedbackReport(
        response_text=response,
        levels=levels,
        rationale_spans=spans,
        total_score=score,
        items=items,
        highlights=sorted(highlights),
    )


def score_delta(before: FeedbackReport, after: FeedbackReport) -> int:
    return after.total_score - before.total_score
