"""Human-evaluation service: session assignment, rating capture, reports.

Ratings go to an append-only JSON-lines log; a resubmission for the same
(session, image) simply appends and the latest entry wins at read time,
so replaying the log always reconstructs the same aggregates.
"""

from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from pydantic import BaseModel

from .errors import ConfigError
from .store import ImageRecord

SCORE_MIN, SCORE_MAX = 1, 5

# Cumulative refinement buckets, in cascade order.
STAGE_BUCKETS = (
    ("None", ()),
    ("+Freq", ("freq",)),
    ("+PatchVar", ("freq", "patchvar")),
    ("+CLIP", ("freq", "patchvar", "clip")),
)


@dataclass
class EvalSession:
    session_id: str
    participant: str
    image_ids: list[int]

    def to_dict(self) -> dict:
        return {"session_id": self.session_id,
                "participant": self.participant,
                "image_ids": self.image_ids}

    @classmethod
    def from_dict(cls, obj) -> "EvalSession":
        return cls(session_id=obj["session_id"],
                   participant=obj["participant"],
                   image_ids=list(obj["image_ids"]))


@dataclass
class RatingRecord:
    session_id: str
    image_id: int
    quality: int
    representativeness: int
    comment: str = ""
    timestamp: float = 0.0

    def to_json(self) -> str:
        return json.dumps({
            "session_id": self.session_id,
            "image_id": self.image_id,
            "quality": self.quality,
            "representativeness": self.representativeness,
            "comment": self.comment,
            "timestamp": self.timestamp,
        }, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "RatingRecord":
        return cls(**json.loads(line))


def create_sessions(pool_image_ids, n_participants: int, images_per: int,
                    seed: int = 0) -> list[EvalSession]:
    """Disjoint random per-participant assignments, each shuffled.

    The pool should be drawn before refinement so stage aggregation can
    compare survivors against filtered-out images.
    """
    pool = sorted(set(pool_image_ids))
    need = n_participants * images_per
    if len(pool) < need:
        raise ConfigError(
            f"pool of {len(pool)} images cannot supply "
            f"{n_participants} x {images_per} = {need} distinct images")
    rng = random.Random(seed)
    drawn = rng.sample(pool, need)
    sessions = []
    for i in range(n_participants):
        ids = drawn[i * images_per:(i + 1) * images_per]
        rng.shuffle(ids)
        sessions.append(EvalSession(session_id=f"s{i:03d}",
                                    participant=f"p{i:03d}",
                                    image_ids=ids))
    return sessions


def write_sessions(sessions, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump([s.to_dict() for s in sessions], fh, indent=2)
        fh.write("\n")


def read_sessions(path) -> list[EvalSession]:
    with open(path, "r", encoding="utf-8") as fh:
        return [EvalSession.from_dict(obj) for obj in json.load(fh)]


class RatingLog:
    """Append-only rating log with replace-on-resubmit read semantics."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, record: RatingRecord) -> None:
        with self._lock:
            with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(record.to_json())
                fh.write("\n")

    def entries(self) -> list[RatingRecord]:
        if not self.path.exists():
            return []
        with open(self.path, "r", encoding="utf-8") as fh:
            return [RatingRecord.from_json(line) for line in fh
                    if line.strip()]

    def latest(self) -> dict[tuple[str, int], RatingRecord]:
        """Effective ratings: the last entry per (session, image) wins."""
        resolved: dict[tuple[str, int], RatingRecord] = {}
        for rec in self.entries():
            resolved[(rec.session_id, rec.image_id)] = rec
        return resolved


def validate_rating(session: EvalSession, image_id: int, quality: int,
                    representativeness: int) -> None:
    if image_id not in session.image_ids:
        raise PermissionError(
            f"image {image_id} does not belong to session "
            f"{session.session_id}")
    for name, value in (("quality", quality),
                        ("representativeness", representativeness)):
        if not isinstance(value, int) or not SCORE_MIN <= value <= SCORE_MAX:
            raise ValueError(
                f"{name} must be an integer in [{SCORE_MIN}, {SCORE_MAX}], "
                f"got {value!r}")


def aggregate_by_stage(ratings, records_by_id: dict) -> list[dict]:
    """Mean scores per cumulative refinement bucket, with deltas.

    ``ratings`` is an iterable of effective RatingRecords.  Each bucket
    requires survival of its stage plus every stage before it; "None" is
    all rated images.
    """
    ratings = list(ratings)
    rows = []
    prev_q = prev_r = None
    for label, stages in STAGE_BUCKETS:
        bucket = []
        for rec in ratings:
            img = records_by_id.get(rec.image_id)
            if img is None:
                raise ConfigError(f"rated image {rec.image_id} not in "
                                  "manifest")
            if all(img.survives.get(s) for s in stages):
                bucket.append(rec)
        if bucket:
            mean_q = sum(r.quality for r in bucket) / len(bucket)
            mean_r = (sum(r.representativeness for r in bucket)
                      / len(bucket))
        else:
            mean_q = mean_r = None
        row = {"stage": label, "n": len(bucket),
               "mean_quality": mean_q, "mean_representativeness": mean_r,
               "delta_quality": (None if mean_q is None or prev_q is None
                                 else mean_q - prev_q),
               "delta_representativeness": (
                   None if mean_r is None or prev_r is None
                   else mean_r - prev_r)}
        rows.append(row)
        prev_q, prev_r = mean_q, mean_r
    return rows


def relative_improvement(stage_rows) -> dict:
    """Overall relative gain of the last bucket over the unfiltered one."""
    first, last = stage_rows[0], stage_rows[-1]
    out = {}
    for key in ("mean_quality", "mean_representativeness"):
        a, b = first[key], last[key]
        out[key.replace("mean_", "rel_gain_")] = (
            None if not a or b is None else (b - a) / a)
    return out


@dataclass
class EvalState:
    """Everything the HTTP service needs, reconstructable from disk."""

    records_by_id: dict
    sessions: dict[str, EvalSession]
    log: RatingLog
    image_root: Path | None = None
    show_full_prompt: bool = True
    quantile_grid: tuple = tuple(i / 20 for i in range(1, 21))

    def descriptor_for(self, image_id: int) -> str:
        rec: ImageRecord = self.records_by_id[image_id]
        return rec.prompt_text if self.show_full_prompt else rec.texture_class

    def next_unrated(self, session: EvalSession):
        rated = {iid for (sid, iid) in self.log.latest()
                 if sid == session.session_id}
        for pos, image_id in enumerate(session.image_ids):
            if image_id not in rated:
                return pos, image_id
        return None, None


# Defined at module level so FastAPI can resolve the (postponed) handler
# annotations against this module's globals.
class SessionRequest(BaseModel):
    n_participants: int
    images_per: int
    seed: int = 0


class RatingRequest(BaseModel):
    image_id: int
    quality: int
    representativeness: int
    comment: str = ""


def build_app(state: EvalState):
    """FastAPI app over the rating workflow."""
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import FileResponse

    app = FastAPI(title="ptd eval service")

    def get_session(session_id: str) -> EvalSession:
        session = state.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, f"unknown session {session_id}")
        return session

    @app.post("/api/sessions")
    def make_sessions(req: SessionRequest):
        pool = [i for i, r in state.records_by_id.items()
                if r.status == "kept"]
        try:
            sessions = create_sessions(pool, req.n_participants,
                                       req.images_per, seed=req.seed)
        except ConfigError as exc:
            raise HTTPException(400, str(exc))
        for s in sessions:
            state.sessions[s.session_id] = s
        return {"sessions": [s.to_dict() for s in sessions]}

    @app.get("/api/session/{session_id}/next")
    def next_image(session_id: str):
        session = get_session(session_id)
        pos, image_id = state.next_unrated(session)
        if image_id is None:
            return {"complete": True, "progress":
                    {"done": len(session.image_ids),
                     "total": len(session.image_ids)}}
        return {
            "complete": False,
            "image_id": image_id,
            "image_url": f"/images/{image_id}",
            "descriptor": state.descriptor_for(image_id),
            "progress": {"done": pos, "total": len(session.image_ids)},
        }

    @app.post("/api/session/{session_id}/rating")
    def rate(session_id: str, req: RatingRequest):
        session = get_session(session_id)
        try:
            validate_rating(session, req.image_id, req.quality,
                            req.representativeness)
        except PermissionError as exc:
            raise HTTPException(403, str(exc))
        except ValueError as exc:
            raise HTTPException(422, str(exc))
        state.log.append(RatingRecord(
            session_id=session_id, image_id=req.image_id,
            quality=req.quality, representativeness=req.representativeness,
            comment=req.comment, timestamp=time.time()))
        return {"ok": True}

    @app.get("/api/report/stages")
    def stage_report():
        rows = aggregate_by_stage(state.log.latest().values(),
                                  state.records_by_id)
        return {"stages": rows, **relative_improvement(rows)}

    @app.get("/api/report/curve")
    def curve_report():
        from .metrics import human_vs_clip_curve
        effective = state.log.latest().values()
        pairs = [(r.image_id, r.representativeness) for r in effective]
        scores = {}
        for r in effective:
            img = state.records_by_id.get(r.image_id)
            if img is None or "clip" not in img.stage_scores:
                return {"points": [], "note": "missing CLIP scores"}
            scores[r.image_id] = img.stage_scores["clip"]
        return {"points": human_vs_clip_curve(pairs, scores,
                                              state.quantile_grid)}

    @app.get("/images/{image_id}")
    def image(image_id: int):
        rec = state.records_by_id.get(image_id)
        if rec is None or not rec.file_path or state.image_root is None:
            raise HTTPException(404, f"no image for id {image_id}")
        return FileResponse(state.image_root / rec.file_path)

    return app
