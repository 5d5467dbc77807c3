"""Instruction-prompt rendering and training-pair emission.

Prompts are built from a plain-text template with three placeholders,
{domains}, {schemas} and {dialog_history}, substituted literally (every
occurrence; the shipped default mentions {domains} twice). Templates are
data, not code: ship alternatives as files and load them.

The fixed textual renderings, pinned for byte-determinism:

  - schemas: one block per dialog domain, in dialog-domain order, each
    "Schema for domain: <id>" followed per intent (ingestion order) by
    "Intent: <name>" and indented "required slots:" / "optional slots:"
    lines ("(none)" when empty);
  - history: "User: ..." / "System: ..." lines per exchange, API calls in
    canonical serialized form, "Search Results: ..." appended to an
    exchange that carries them; the window always ends with the current
    "User:" line and never contains the turn's own target.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

from .apicall import serialize_apicall
from .errors import MalformedFileError, UnknownDomainError
from .schema import Dialog, DomainSchema, Exchange, OutputKind, SchemaCatalog, history_window

logger = logging.getLogger(__name__)

PLACEHOLDERS = ("{domains}", "{schemas}", "{dialog_history}")

DEFAULT_HISTORY_WINDOW = 5


@dataclass(frozen=True)
class PromptTemplate:
    template_text: str
    version: str = "default"

    def __post_init__(self):
        for placeholder in PLACEHOLDERS:
            count = self.template_text.count(placeholder)
            if count == 0:
                raise ValueError(f"template is missing {placeholder}")
            if placeholder != "{domains}" and count > 1:
                raise ValueError(f"template must contain {placeholder} exactly once")


def default_template() -> PromptTemplate:
    text = resources.files("todkit.data").joinpath("default_template.txt").read_text("utf-8")
    return PromptTemplate(template_text=text, version="default")


def load_template(path: Union[str, Path], version: Optional[str] = None) -> PromptTemplate:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedFileError(f"cannot read {path}: {exc}") from exc
    return PromptTemplate(template_text=text, version=version or path.stem)


def render_schema(schema: DomainSchema) -> str:
    lines = [f"Schema for domain: {schema.domain_id}"]
    for intent in schema.intents:
        lines.append(f"Intent: {intent.name}")
        required = ", ".join(s.name for s in intent.required_slots()) or "(none)"
        optional = ", ".join(s.name for s in intent.optional_slots()) or "(none)"
        lines.append(f"  required slots: {required}")
        lines.append(f"  optional slots: {optional}")
    return "\n".join(lines)


def render_history(window: Iterable[Exchange]) -> str:
    lines = []
    for exchange in window:
        lines.append(f"User: {exchange.user_utterance}".rstrip())
        if exchange.output is not None:
            if exchange.output.kind is OutputKind.API_CALL:
                lines.append(f"System: {serialize_apicall(exchange.output.call)}")
            else:
                lines.append(f"System: {exchange.output.text}")
        if exchange.search_results is not None:
            lines.append(f"Search Results: {exchange.search_results}")
    return "\n".join(lines)


def render_prompt(
    template: PromptTemplate,
    catalog: SchemaCatalog,
    dialog: Dialog,
    t: int,
    k: int = DEFAULT_HISTORY_WINDOW,
) -> str:
    """Render the instruction prompt for turn ``t`` with a k-exchange window."""
    schemas = []
    for domain_id in dialog.domains:
        schema = catalog.get(domain_id)
        if schema is None:
            raise UnknownDomainError(
                f"dialog {dialog.dialog_id!r} references domain {domain_id!r} "
                "that is not in the catalog"
            )
        schemas.append(render_schema(schema))
    window = history_window(dialog, t, k)
    text = template.template_text
    text = text.replace("{domains}", ", ".join(dialog.domains))
    text = text.replace("{schemas}", "\n".join(schemas))
    text = text.replace("{dialog_history}", render_history(window))
    return text


@dataclass(frozen=True)
class TrainingPair:
    dialog_id: str
    turn_index: int
    prompt: str
    target: str
    is_api_call: bool


def emit_training_pairs(
    corpus: Iterable[Dialog],
    catalog: SchemaCatalog,
    template: Optional[PromptTemplate] = None,
    k: int = DEFAULT_HISTORY_WINDOW,
    warnings: Optional[list[str]] = None,
) -> Iterator[TrainingPair]:
    """One (prompt, target) pair per turn per dialog, in (dialog, turn) order.

    The target is the gold system output: plain text, or the canonical
    APICall serialization. No special tokens are added. Dialogs that fail
    to render (unknown domains) are reported and skipped; the stream
    continues.
    """
    template = template or default_template()
    for dialog in corpus:
        try:
            pairs = []
            for turn in dialog.turns:
                prompt = render_prompt(template, catalog, dialog, turn.index, k)
                if turn.system_output.kind is OutputKind.API_CALL:
                    target = serialize_apicall(turn.system_output.call)
                else:
                    target = turn.system_output.text
                pairs.append(
                    TrainingPair(
                        dialog_id=dialog.dialog_id,
                        turn_index=turn.index,
                        prompt=prompt,
                        target=target,
                        is_api_call=turn.system_output.kind is OutputKind.API_CALL,
                    )
                )
        except UnknownDomainError as exc:
            message = f"dialog {dialog.dialog_id!r} skipped: {exc}"
            if warnings is not None:
                warnings.append(message)
            else:
                logger.warning("%s", message)
            continue
        yield from pairs


def write_training_pairs(pairs: Iterable[TrainingPair], path: Union[str, Path]) -> int:
    """Write pairs as JSONL; returns the number written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for pair in pairs:
            record = {
                "dialog_id": pair.dialog_id,
                "turn_index": pair.turn_index,
                "prompt": pair.prompt,
                "target": pair.target,
                "is_api_call": pair.is_api_call,
            }
            handle.write(json.dumps(record, ensure_ascii=False))
            handle.write("\n")
            count += 1
    return count


def read_training_pairs(path: Union[str, Path]) -> list[TrainingPair]:
    path = Path(path)
    pairs = []
    try:
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    pairs.append(
                        TrainingPair(
                            dialog_id=record["dialog_id"],
                            turn_index=int(record["turn_index"]),
                            prompt=record["prompt"],
                            target=record["target"],
                            is_api_call=bool(record["is_api_call"]),
                        )
                    )
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise MalformedFileError(f"{path}:{lineno}: bad training pair: {exc}") from exc
    except OSError as exc:
        raise MalformedFileError(f"cannot read {path}: {exc}") from exc
    return pairs
