"""Blind human-evaluation service: sampling, blinding, ratings, reports.

A study samples dialogs from the corpus (stratified into single-domain and
multi-domain), crosses them with the models under evaluation, and assigns
each model a per-study random alias ("Model A", "Model B", ...). Annotator
sessions receive the items one at a time in a per-session shuffled order;
item payloads never contain a real model id. Ratings are 1-5 integers on
three criteria, appended to a JSONL event log and replayed on startup with
last-write-wins semantics per (session, item, criterion), so the service
survives restarts. The report resolves aliases back to model ids
server-side and gives mean, population variance, and count per model and
criterion.

Items pair one dialog with one model per screen; side-by-side comparison
is deliberately out of scope.
"""

from __future__ import annotations

import json
import random
import statistics
import threading
import time
import uuid
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .apicall import serialize_apicall
from .errors import (
    InsufficientCorpusError,
    InvalidScoreError,
    UnknownItemError,
    UnknownStudyError,
)
from .metrics import PredictionSet
from .schema import Dialog, OutputKind

DEFAULT_CRITERIA = ("FLUENCY", "INFORMATIVENESS", "TASK_COMPLETION")

_ALIAS_LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


def rubric_text() -> str:
    return resources.files("todkit.data").joinpath("rubric.md").read_text("utf-8")


@dataclass(frozen=True)
class StudyConfig:
    single_domain: int
    multi_domain: int
    models: tuple[str, ...]
    seed: int
    criteria: tuple[str, ...] = DEFAULT_CRITERIA

    def __post_init__(self):
        if self.single_domain < 0 or self.multi_domain < 0:
            raise ValueError("sample sizes must be >= 0")
        if not self.models:
            raise ValueError("at least one model required")
        if len(set(self.models)) != len(self.models):
            raise ValueError("model ids must be distinct")
        if not self.criteria:
            raise ValueError("at least one criterion required")


@dataclass(frozen=True)
class RatingRecord:
    session_id: str
    item_id: str
    criterion: str
    score: int
    comment: str = ""
    blinded_alias: str = ""
    timestamp: float = 0.0

    def __post_init__(self):
        if not isinstance(self.score, int) or isinstance(self.score, bool) or not 1 <= self.score <= 5:
            raise InvalidScoreError(f"score must be an integer in 1..5, got {self.score!r}")


@dataclass(frozen=True)
class StudyItem:
    item_id: str
    dialog_id: str
    model_id: str
    alias: str
    transcript: tuple[dict, ...]

    def payload(self) -> dict:
        return {
            "item_id": self.item_id,
            "dialog_id": self.dialog_id,
            "alias": self.alias,
            "transcript": [dict(t) for t in self.transcript],
        }


@dataclass
class _Study:
    study_id: str
    config: StudyConfig
    items: list[StudyItem]
    aliases: dict[str, str]  # model_id -> alias


@dataclass
class _Session:
    session_id: str
    study_id: str
    order: list[int]
    served: int = 0


class _EventLog:
    """Append-only JSONL log; the single writer is lock-serialized."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def append(self, event: dict) -> None:
        line = json.dumps(event, ensure_ascii=False)
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(line)
                handle.write("\n")
                handle.flush()

    def replay(self) -> list[dict]:
        if not self.path.exists():
            return []
        events = []
        with open(self.path, encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    events.append(json.loads(line))
        return events


def _transcript(dialog: Dialog, predictions: Optional[PredictionSet]) -> tuple[dict, ...]:
    """User/response rows: the model's output where available, gold otherwise."""
    rows = []
    for turn in dialog.turns:
        if predictions is not None and (dialog.dialog_id, turn.index) in predictions.entries:
            response = predictions.entries[(dialog.dialog_id, turn.index)]
        elif turn.system_output.kind is OutputKind.API_CALL:
            response = serialize_apicall(turn.system_output.call)
        else:
            response = turn.system_output.text
        rows.append({"user": turn.user_utterance, "response": response})
    return tuple(rows)


class AnnotationService:
    """In-process core of the study service; the HTTP app wraps this."""

    def __init__(
        self,
        corpus: list[Dialog],
        predictions: list[PredictionSet],
        log_path: Union[str, Path],
    ):
        self.corpus = {d.dialog_id: d for d in corpus}
        self.predictions = {p.model_id: p for p in predictions}
        self.log = _EventLog(log_path)
        self.studies: dict[str, _Study] = {}
        self.sessions: dict[str, _Session] = {}
        self.ratings: dict[tuple[str, str, str], RatingRecord] = {}
        for event in self.log.replay():
            self._apply(event)

    # -- event replay ------------------------------------------------------

    def _apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "study_created":
            config = StudyConfig(
                single_domain=event["config"]["single_domain"],
                multi_domain=event["config"]["multi_domain"],
                models=tuple(event["config"]["models"]),
                seed=event["config"]["seed"],
                criteria=tuple(event["config"]["criteria"]),
            )
            items = [
                StudyItem(
                    item_id=i["item_id"],
                    dialog_id=i["dialog_id"],
                    model_id=i["model_id"],
                    alias=i["alias"],
                    transcript=tuple(i["transcript"]),
                )
                for i in event["items"]
            ]
            self.studies[event["study_id"]] = _Study(
                study_id=event["study_id"],
                config=config,
                items=items,
                aliases=dict(event["aliases"]),
            )
        elif kind == "session_created":
            self.sessions[event["session_id"]] = _Session(
                session_id=event["session_id"],
                study_id=event["study_id"],
                order=list(event["order"]),
            )
        elif kind == "item_served":
            self.sessions[event["session_id"]].served += 1
        elif kind == "rating":
            record = RatingRecord(
                session_id=event["session_id"],
                item_id=event["item_id"],
                criterion=event["criterion"],
                score=event["score"],
                comment=event.get("comment", ""),
                blinded_alias=event.get("alias", ""),
                timestamp=event.get("timestamp", 0.0),
            )
            self.ratings[(record.session_id, record.item_id, record.criterion)] = record

    # -- operations ----------------------------------------------------------

    def create_study(self, config: StudyConfig) -> str:
        singles = [d for d in self.corpus.values() if len(d.domains) == 1]
        multis = [d for d in self.corpus.values() if len(d.domains) > 1]
        if len(singles) < config.single_domain or len(multis) < config.multi_domain:
            raise InsufficientCorpusError(
                f"corpus has {len(singles)} single-domain and {len(multis)} multi-domain "
                f"dialogs; study needs {config.single_domain}+{config.multi_domain}"
            )
        for model_id in config.models:
            if model_id not in self.predictions:
                raise ValueError(f"no prediction set loaded for model {model_id!r}")
        if len(config.models) > len(_ALIAS_LETTERS):
            raise ValueError("too many models to alias")

        rng = random.Random(config.seed)
        sampled = rng.sample(singles, config.single_domain) + rng.sample(
            multis, config.multi_domain
        )
        letters = list(_ALIAS_LETTERS[: len(config.models)])
        rng.shuffle(letters)
        aliases = {model: f"Model {letter}" for model, letter in zip(config.models, letters)}
        if set(aliases.values()) & set(config.models):
            raise ValueError("model ids collide with alias labels; rename the models")

        study_id = f"study-{uuid.uuid4().hex[:8]}"
        items = []
        for dialog in sampled:
            for model_id in config.models:
                items.append(
                    StudyItem(
                        item_id=f"item-{len(items):04d}",
                        dialog_id=dialog.dialog_id,
                        model_id=model_id,
                        alias=aliases[model_id],
                        transcript=_transcript(dialog, self.predictions.get(model_id)),
                    )
                )
        self.log.append(
            {
                "event": "study_created",
                "study_id": study_id,
                "config": {
                    "single_domain": config.single_domain,
                    "multi_domain": config.multi_domain,
                    "models": list(config.models),
                    "seed": config.seed,
                    "criteria": list(config.criteria),
                },
                "aliases": aliases,
                "items": [
                    {
                        "item_id": i.item_id,
                        "dialog_id": i.dialog_id,
                        "model_id": i.model_id,
                        "alias": i.alias,
                        "transcript": list(i.transcript),
                    }
                    for i in items
                ],
            }
        )
        self.studies[study_id] = _Study(study_id, config, items, aliases)
        return study_id

    def _study(self, study_id: str) -> _Study:
        study = self.studies.get(study_id)
        if study is None:
            raise UnknownStudyError(f"no study {study_id!r}")
        return study

    def create_session(self, study_id: str) -> str:
        study = self._study(study_id)
        session_id = f"session-{uuid.uuid4().hex[:8]}"
        order = list(range(len(study.items)))
        random.Random(f"{study.config.seed}:{session_id}").shuffle(order)
        self.log.append(
            {
                "event": "session_created",
                "session_id": session_id,
                "study_id": study_id,
                "order": order,
            }
        )
        self.sessions[session_id] = _Session(session_id, study_id, order)
        return session_id

    def _session(self, study_id: str, session_id: str) -> _Session:
        self._study(study_id)
        session = self.sessions.get(session_id)
        if session is None or session.study_id != study_id:
            raise UnknownStudyError(f"no session {session_id!r} in study {study_id!r}")
        return session

    def next_item(self, study_id: str, session_id: str) -> dict:
        """Serve the next blinded item, advancing the session cursor."""
        study = self._study(study_id)
        session = self._session(study_id, session_id)
        total = len(session.order)
        if session.served >= total:
            return {"done": True, "progress": {"served": total, "total": total}}
        item = study.items[session.order[session.served]]
        self.log.append({"event": "item_served", "session_id": session_id})
        session.served += 1
        return {
            "done": False,
            "item": {**item.payload(), "criteria": list(study.config.criteria)},
            "progress": {"served": session.served, "total": total},
        }

    def submit_rating(self, record: RatingRecord) -> RatingRecord:
        session = self.sessions.get(record.session_id)
        if session is None:
            raise UnknownStudyError(f"no session {record.session_id!r}")
        study = self._study(session.study_id)
        item = next((i for i in study.items if i.item_id == record.item_id), None)
        if item is None:
            raise UnknownItemError(f"item {record.item_id!r} is not part of the session's study")
        if record.criterion not in study.config.criteria:
            raise UnknownItemError(f"criterion {record.criterion!r} is not rated in this study")
        if record.blinded_alias and record.blinded_alias != item.alias:
            raise UnknownItemError(
                f"alias {record.blinded_alias!r} does not match item {record.item_id!r}"
            )
        stored = RatingRecord(
            session_id=record.session_id,
            item_id=record.item_id,
            criterion=record.criterion,
            score=record.score,
            comment=record.comment,
            blinded_alias=item.alias,
            timestamp=record.timestamp or time.time(),
        )
        self.log.append(
            {
                "event": "rating",
                "session_id": stored.session_id,
                "item_id": stored.item_id,
                "criterion": stored.criterion,
                "score": stored.score,
                "comment": stored.comment,
                "alias": stored.blinded_alias,
                "timestamp": stored.timestamp,
            }
        )
        self.ratings[(stored.session_id, stored.item_id, stored.criterion)] = stored
        return stored

    def study_report(self, study_id: str) -> dict:
        """Mean/variance/count per model and criterion, aliases resolved."""
        study = self._study(study_id)
        item_models = {item.item_id: item.model_id for item in study.items}
        scores: dict[tuple[str, str], list[int]] = {}
        for (session_id, item_id, criterion), record in self.ratings.items():
            session = self.sessions.get(session_id)
            if session is None or session.study_id != study_id:
                continue
            model_id = item_models.get(item_id)
            if model_id is None:
                continue
            scores.setdefault((model_id, criterion), []).append(record.score)
        cells = {}
        total = 0
        for model_id in study.config.models:
            cells[model_id] = {}
            for criterion in study.config.criteria:
                values = scores.get((model_id, criterion), [])
                total += len(values)
                cells[model_id][criterion] = {
                    "mean": statistics.fmean(values) if values else None,
                    "variance": statistics.pvariance(values) if values else None,
                    "count": len(values),
                }
        return {
            "study_id": study_id,
            "criteria": list(study.config.criteria),
            "models": cells,
            "total_ratings": total,
        }
