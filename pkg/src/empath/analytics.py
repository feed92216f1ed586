"""Platform-insight aggregations over interaction logs.

Cohorted empathy-over-time series, like/reply rates by level, follow-rate
comparison for empathic vs non-empathic conversations, and gender cross-tabs.
All aggregates are plain means/rates so they can be checked against
brute-force recomputation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

from .feedback import total_score
from .text import MECHANISMS


@dataclass(frozen=True)
class InteractionRecord:
    interaction_id: str
    seeker_id: str
    responder_id: str
    timestamp: float  # UTC seconds
    seeker_liked: bool
    reply_count: int
    followed_within_24h: bool
    seeker_gender: str | None = None
    responder_gender: str | None = None
    levels: dict | None = None  # mechanism -> 0|1|2
    seeker_text: str | None = None
    response_text: str | None = None

    def __post_init__(self):
        if self.timestamp <= 0:
            raise ValueError("timestamp must be positive UTC seconds")
        if self.reply_count < 0:
            raise ValueError("reply_count must be nonnegative")
        if self.levels is not None:
            for mech in MECHANISMS:
                if self.levels.get(mech) not in (0, 1, 2):
                    raise ValueError(f"level for '{mech}' must be in {{0,1,2}}")

    @property
    def total(self) -> int:
        return total_score(self.levels)

    def year(self) -> int:
        return datetime.fromtimestamp(self.timestamp, tz=timezone.utc).year


@dataclass
class CohortSpec:
    min_posts: int = 10
    min_tenure_years: int = 1

    def __post_init__(self):
        if self.min_posts < 0:
            raise ValueError("min_posts must be >= 0")


def empathy_over_time(records, spec: CohortSpec | None = None) -> dict:
    """Per join-year cohort, per calendar year: mean level of each mechanism.

    Join year is a responder's first observed post year. Responders with
    fewer than min_posts records or tenure under min_tenure_years are dropped.
    Returns {join_year: {year: {mechanism: mean}}}.
    """
    spec = spec or CohortSpec()
    by_responder: dict[str, list] = {}
    for r in records:
        by_responder.setdefault(r.responder_id, []).append(r)

    kept = []
    for recs in by_responder.values():
        if len(recs) < spec.min_posts:
            continue
        years = [r.year() for r in recs]
        if max(years) - min(years) < spec.min_tenure_years:
            continue
        join_year = min(years)
        for r in recs:
            kept.append((join_year, r))

    result: dict = {}
    sums: dict = {}
    counts: dict = {}
    for join_year, r in kept:
        key = (join_year, r.year())
        if key not in sums:
            sums[key] = {m: 0.0 for m in MECHANISMS}
            counts[key] = 0
        for m in MECHANISMS:
            sums[key][m] += r.levels[m]
        counts[key] += 1
    for (join_year, year), mech_sums in sums.items():
        cohort = result.setdefault(join_year, {})
        cohort[year] = {m: mech_sums[m] / counts[(join_year, year)] for m in MECHANISMS}
    return result


def feedback_by_level(records) -> dict:
    """Like-rate and mean reply count per level per mechanism, plus per
    total-score bucket, with (strong - none)/none relative changes."""
    records = list(records)
    if not records:
        raise ValueError("no records")
    out: dict = {"mechanisms": {}, "total_score": {}}
    for mech in MECHANISMS:
        groups: dict[int, list] = {}
        for r in records:
            groups.setdefault(r.levels[mech], []).append(r)
        per_level = {}
        for level, recs in sorted(groups.items()):
            per_level[level] = {
                "like_rate": sum(r.seeker_liked for r in recs) / len(recs),
                "mean_replies": sum(r.reply_count for r in recs) / len(recs),
                "count": len(recs),
            }
        entry = {"levels": per_level}
        if 0 in per_level and 2 in per_level:
            base_like = per_level[0]["like_rate"]
            base_rep = per_level[0]["mean_replies"]
            if base_like > 0:
                entry["like_rate_strong_vs_none"] = per_level[2]["like_rate"] / base_like - 1.0
            if base_rep > 0:
                entry["replies_strong_vs_none"] = per_level[2]["mean_replies"] / base_rep - 1.0
        out["mechanisms"][mech] = entry
    buckets: dict[int, list] = {}
    for r in records:
        buckets.setdefault(r.total, []).append(r)
    for score, recs in sorted(buckets.items()):
        out["total_score"][score] = {
            "like_rate": sum(r.seeker_liked for r in recs) / len(recs),
            "mean_replies": sum(r.reply_count for r in recs) / len(recs),
            "count": len(recs),
        }
    return out


def follow_analysis(records) -> dict:
    """Follow rate for total score >= 1 vs == 0 and the relative change."""
    empathic = [r for r in records if r.total >= 1]
    flat = [r for r in records if r.total == 0]
    out: dict = {}
    if empathic:
        out["empathic_rate"] = sum(r.followed_within_24h for r in empathic) / len(empathic)
    if flat:
        out["non_empathic_rate"] = sum(r.followed_within_24h for r in flat) / len(flat)
    if (
        "empathic_rate" in out
        and "non_empathic_rate" in out
        and out["non_empathic_rate"] > 0
    ):
        out["relative_change"] = out["empathic_rate"] / out["non_empathic_rate"] - 1.0
    return out


def gender_crosstab(records) -> dict:
    """Mean total score per (responder_gender, seeker_gender) cell, plus
    pairwise relative comparisons between cells."""
    cells: dict[tuple, list] = {}
    for r in records:
        if r.responder_gender and r.seeker_gender:
            cells.setdefault((r.responder_gender, r.seeker_gender), []).append(r.total)
    means = {cell: sum(v) / len(v) for cell, v in cells.items()}
    comparisons = {}
    for a in means:
        for b in means:
            if a != b and means[b] > 0:
                comparisons[(a, b)] = means[a] / means[b] - 1.0
    return {"means": means, "counts": {c: len(v) for c, v in cells.items()}, "comparisons": comparisons}


def annotate_logs(records, models, vocab, max_len: int = 64) -> list:
    """Fill missing levels by running the three mechanism models.

    Records that already carry levels pass through unchanged. `models` maps
    mechanism name to a trained BiEncoderModel sharing `vocab`.
    """
    from dataclasses import replace

    from .model import predict
    from .text import AnnotatedPair, encode_pair

    for mech in MECHANISMS:
        if mech not in models:
            raise ValueError(f"missing model for mechanism '{mech}'")
        stored = getattr(models[mech], "_vocab_hash", None)
        if stored is not None and stored != vocab.sha256():
            raise ValueError(f"model for '{mech}' was trained with a different vocabulary")

    out = []
    for r in records:
        if r.levels is not None:
            out.append(r)
            continue
        if r.seeker_text is None or r.response_text is None:
            raise ValueError(f"record {r.interaction_id} has neither levels nor texts")
        pair = AnnotatedPair(
            seeker_text=r.seeker_text,
            response_text=r.response_text,
            levels={m: 0 for m in MECHANISMS},
        )
        enc = encode_pair(pair, vocab, max_len)
        levels = {m: predict(enc, models[m]).level for m in MECHANISMS}
        out.append(replace(r, levels=levels))
    return out


# -- log file IO -------------------------------------------------------------
# Tab-delimited, one record per line, field order:
#   interaction_id seeker_id responder_id timestamp seeker_liked reply_count
#   followed_within_24h seeker_gender responder_gender er ip ex
#   [seeker_text response_text]
# Missing optional fields are empty strings.

_LOG_FIELDS = 12


def save_logs(records, path) -> None:
    from .text import _escape

    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            levels = r.levels or {}
            fields = [
                r.interaction_id,
                r.seeker_id,
                r.responder_id,
                repr(r.timestamp),
                "1" if r.seeker_liked else "0",
                str(r.reply_count),
                "1" if r.followed_within_24h else "0",
                r.seeker_gender or "",
                r.responder_gender or "",
                *(str(levels[m]) if m in levels else "" for m in MECHANISMS),
            ]
            if r.seeker_text is not None or r.response_text is not None:
                fields.append(_escape(r.seeker_text or ""))
                fields.append(_escape(r.response_text or ""))
            f.write("\t".join(fields) + "\n")


def load_logs(path) -> list:
    from .text import _unescape

    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) not in (_LOG_FIELDS, _LOG_FIELDS + 2):
                raise ValueError(
                    f"{path}:{lineno}: expected {_LOG_FIELDS} or {_LOG_FIELDS + 2} fields, got {len(fields)}"
                )
            level_values = fields[9:12]
            levels = None
            if all(level_values):
                levels = {m: int(v) for m, v in zip(MECHANISMS, level_values)}
            records.append(
                InteractionRecord(
                    interaction_id=fields[0],
                    seeker_id=fields[1],
                    responder_id=fields[2],
                    timestamp=float(fields[3]),
                    seeker_liked=fields[4] == "1",
                    reply_count=int(fields[5]),
                    followed_within_24h=fields[6] == "1",
                    seeker_gender=fields[7] or None,
                    responder_gender=fields[8] or None,
                    levels=levels,
                    seeker_text=_unescape(fields[12]) if len(fields) > 12 else None,
                    response_text=_unescape(fields[13]) if len(fields) > 13 else None,
                )
            )
    return records
