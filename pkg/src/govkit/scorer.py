"""Bundled mock text-scoring service.

Stands in for an external moderation API: GET /score?text=... returns a
deterministic toxicity score in [0, 1] derived from a fixed word list, so
scenario runs are reproducible without network access.
"""

from __future__ import annotations

import re

from fastapi import FastAPI, Query
from pydantic import BaseModel

TOXIC_WORDS = frozenset(
    {"awful", "garbage", "hate", "idiot", "loser", "moron", "scum", "stupid", "trash", "worthless"}
)

_WORD_RE = re.compile(r"[a-z']+")


def score_text(text: str) -> float:
    words = _WORD_RE.findall(text.lower())
    if not words:
        return 0.0
    hits = sum(1 for w in words if w in TOXIC_WORDS)
    if hits == 0:
        return round(min(0.2, 0.02 * len(words)), 4)
    return round(min(1.0, 0.55 + 0.15 * hits), 4)


class ScoreResponse(BaseModel):
    toxicity_score: float
    text_length: int


app = FastAPI(title="govkit mock scorer")


@app.get("/score", response_model=ScoreResponse)
def score(text: str = Query(default="")) -> ScoreResponse:
    return ScoreResponse(toxicity_score=score_text(text), text_length=len(text))
