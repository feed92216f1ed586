"""HTTP service exposing prediction and feedback over loaded checkpoints.

Models load once at startup and are immutable afterwards; every response is
a pure function of (request, checkpoints, templates). Span offsets in the
API are UTF-8 byte offsets into the request strings.
"""

from __future__ import annotations

import logging
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .checkpoint import checkpoint_hash, load_checkpoint
from .feedback import FeedbackTemplateSet, generate_feedback, score_delta
from .model import predict
from .text import MECHANISMS, AnnotatedPair, Vocabulary, encode_pair

logger = logging.getLogger("empath.service")


@dataclass
class ServiceConfig:
    checkpoint_paths: dict  # mechanism -> path
    vocab_path: str
    template_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8799
    max_body_bytes: int = 1 << 16
    request_timeout_s: float = 30.0


def char_to_byte_offset(text: str, char_offset: int) -> int:
    return len(text[:char_offset].encode("utf-8"))


def _span_payload(text: str, spans) -> list:
    out = []
    for cs, ce in spans:
        out.append(
            {
                "start": char_to_byte_offset(text, cs),
                "end": char_to_byte_offset(text, ce),
                "text": text[cs:ce],
            }
        )
    return out


class PredictRequest(BaseModel):
    seeker: str
    response: str


class FeedbackRequest(BaseModel):
    seeker: str
    response: str
    previous_response: str | None = None


def create_app(config: ServiceConfig) -> FastAPI:
    vocab = Vocabulary.load(config.vocab_path)
    vocab_hash = vocab.sha256()
    models = {}
    hashes = {}
    for mech in MECHANISMS:
        path = config.checkpoint_paths[mech]
        models[mech], _ = load_checkpoint(path, expected_vocab_hash=vocab_hash)
        hashes[mech] = checkpoint_hash(path)
    templates = (
        FeedbackTemplateSet.load(config.template_path)
        if config.template_path
        else FeedbackTemplateSet()
    )
    max_len = next(iter(models.values())).config.max_len

    app = FastAPI(title="empath", docs_url=None, redoc_url=None)

    @app.middleware("http")
    async def limit_body(request: Request, call_next):
        length = request.headers.get("content-length")
        if length and int(length) > config.max_body_bytes:
            return JSONResponse(
                status_code=413,
                content={"error": f"request body exceeds {config.max_body_bytes} bytes"},
            )
        return await call_next(request)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        fields = sorted({str(e["loc"][-1]) for e in exc.errors()})
        return JSONResponse(
            status_code=400,
            content={"error": "invalid request body", "fields": fields},
        )

    @app.exception_handler(Exception)
    async def internal_handler(request: Request, exc: Exception):
        error_id = uuid.uuid4().hex
        logger.exception("internal error %s on %s", error_id, request.url.path)
        return JSONResponse(status_code=500, content={"error": "internal error", "id": error_id})

    def run_predictions(seeker: str, response: str) -> dict:
        pair = AnnotatedPair(
            seeker_text=seeker, response_text=response, levels={m: 0 for m in MECHANISMS}
        )
        enc = encode_pair(pair, vocab, max_len)
        return {mech: predict(enc, models[mech]) for mech in MECHANISMS}

    def validate_texts(seeker: str, response: str):
        if not response.strip():
            return JSONResponse(status_code=400, content={"error": "response must be nonempty"})
        if not seeker.strip():
            return JSONResponse(status_code=400, content={"error": "seeker must be nonempty"})
        return None

    @app.get("/health")
    async def health():
        return {"status": "ok", "checkpoints": hashes, "vocab": vocab_hash}

    @app.post("/predict")
    async def predict_endpoint(body: PredictRequest):
        err = validate_texts(body.seeker, body.response)
        if err:
            return err
        preds = run_predictions(body.seeker, body.response)
        mechanisms = {
            mech: {
                "level": preds[mech].level,
                "probs": [float(p) for p in preds[mech].level_probs],
                "spans": _span_payload(body.response, preds[mech].rationale_spans),
            }
            for mech in MECHANISMS
        }
        total = sum(preds[mech].level for mech in MECHANISMS)
        return {"mechanisms": mechanisms, "total_score": total}

    @app.post("/feedback")
    async def feedback_endpoint(body: FeedbackRequest):
        err = validate_texts(body.seeker, body.response)
        if err:
            return err

        def report_for(response_text: str):
            preds = run_predictions(body.seeker, response_text)
            preds["response_text"] = response_text
            return generate_feedback(preds, templates)

        report = report_for(body.response)
        payload = {
            "levels": report.levels,
            "total_score": report.total_score,
            "items": report.items,
            "spans": {
                mech: _span_payload(body.response, report.rationale_spans[mech])
                for mech in MECHANISMS
            },
            "highlights": [
                {
                    "start": char_to_byte_offset(body.response, s),
                    "end": char_to_byte_offset(body.response, e),
                    "mechanism": mech,
                    "level": level,
                }
                for s, e, mech, level in report.highlights
            ],
        }
        if body.previous_response is not None:
            previous = report_for(body.previous_response)
            payload["previous_total_score"] = previous.total_score
            payload["score_delta"] = score_delta(previous, report)
        return payload

    return app


def serve(config: ServiceConfig):  # pragma: no cover - exercised manually
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port)
