"""Corpus ingestion: SGD- and KETOD-style files normalized into native formats.

Native formats are the canonical interchange for everything downstream:

  - schema file (JSON): ``{"domains": [{"domain_id", "intents": [{"name",
    "slots": [{"name", "is_required"}]}]}]}``
  - dialog file (JSONL, one dialog per line): ``{"dialog_id", "domains",
    "turns": [{"index", "user", "output", "acts", "search_results"?}]}``
    where output is ``{"kind": "TEXT", "text": ...}`` or ``{"kind":
    "API_CALL", "call": {"method", "params": [{"name", "value"}]}}``.

SGD conventions: a raw SYSTEM turn that carries a service_call is split into
two exchanges, (user utterance, API call) followed by ("", text response)
with the service results attached to the response turn as an opaque string.
Act labels are carried verbatim from the system frames of the responding
turn. KETOD files read like SGD, except an enriched system utterance
replaces the base one when present.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Iterable, Optional, Union

from .apicall import ApiCall
from .errors import DuplicateDomainError, EmptySchemaError, MalformedFileError
from .schema import (
    Dialog,
    DomainSchema,
    Intent,
    OutputKind,
    SchemaCatalog,
    SlotSpec,
    Turn,
    TurnOutput,
)

logger = logging.getLogger(__name__)

SCHEMA_FORMATS = ("SGD_JSON", "NATIVE_JSON")
DIALOG_FORMATS = ("SGD_JSON", "KETOD_JSON", "NATIVE_JSONL")

PathLike = Union[str, Path]


def _load_json(path: Path):
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as exc:
        raise MalformedFileError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"{path} is not valid JSON: {exc}") from exc


# ---------------------------------------------------------------------------
# Schemas


def ingest_schemas(path: PathLike, format: str = "SGD_JSON") -> SchemaCatalog:
    """Read a schema file into a catalog of DomainSchema values."""
    path = Path(path)
    if format == "SGD_JSON":
        schemas = _schemas_from_sgd(_load_json(path), path)
    elif format == "NATIVE_JSON":
        schemas = _schemas_from_native(_load_json(path), path)
    else:
        raise ValueError(f"unknown schema format {format!r}; expected one of {SCHEMA_FORMATS}")
    if not schemas:
        raise EmptySchemaError(f"{path} contains no domain schemas")
    catalog: dict[str, DomainSchema] = {}
    for schema in schemas:
        if schema.domain_id in catalog:
            raise DuplicateDomainError(f"domain {schema.domain_id!r} appears twice in {path}")
        catalog[schema.domain_id] = schema
    return SchemaCatalog(schemas=catalog)


def _schemas_from_sgd(payload, path: Path) -> list[DomainSchema]:
    if not isinstance(payload, list):
        raise MalformedFileError(f"{path}: SGD schema file must be a JSON list of services")
    schemas = []
    for service in payload:
        try:
            domain_id = service["service_name"]
            intents = []
            for intent in service.get("intents", []):
                slots: list[SlotSpec] = []
                for name in intent.get("required_slots", []):
                    slots.append(SlotSpec(name=name, is_required=True))
                optional = intent.get("optional_slots", [])
                # Real SGD files map optional slot names to default values.
                names = optional.keys() if isinstance(optional, dict) else optional
                for name in names:
                    slots.append(SlotSpec(name=name, is_required=False))
                intents.append(Intent(name=intent["name"], slots=tuple(slots)))
            declared = {s.get("name") for s in service.get("slots", [])}
            used = {slot.name for intent in intents for slot in intent.slots}
            for orphan in sorted(declared - used - {None}):
                logger.warning(
                    "%s: slot %r of service %r belongs to no intent; dropped",
                    path,
                    orphan,
                    domain_id,
                )
            schemas.append(DomainSchema(domain_id=domain_id, intents=tuple(intents)))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedFileError(f"{path}: bad SGD service entry: {exc}") from exc
    return schemas


def _schemas_from_native(payload, path: Path) -> list[DomainSchema]:
    if not isinstance(payload, dict) or "domains" not in payload:
        raise MalformedFileError(f"{path}: native schema file must be an object with 'domains'")
    schemas = []
    for entry in payload["domains"]:
        try:
            intents = tuple(
                Intent(
                    name=intent["name"],
                    slots=tuple(
                        SlotSpec(name=s["name"], is_required=bool(s["is_required"]))
                        for s in intent["slots"]
                    ),
                )
                for intent in entry["intents"]
            )
            schemas.append(DomainSchema(domain_id=entry["domain_id"], intents=intents))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedFileError(f"{path}: bad domain entry: {exc}") from exc
    return schemas


def catalog_to_native(catalog: SchemaCatalog) -> dict:
    return {
        "domains": [
            {
                "domain_id": schema.domain_id,
                "intents": [
                    {
                        "name": intent.name,
                        "slots": [
                            {"name": slot.name, "is_required": slot.is_required}
                            for slot in intent.slots
                        ],
                    }
                    for intent in schema.intents
                ],
            }
            for schema in catalog.schemas.values()
        ]
    }


def write_schemas(catalog: SchemaCatalog, path: PathLike) -> None:
    """Write the canonical native schema file (stable bytes for fixed input)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(catalog_to_native(catalog), handle, ensure_ascii=False, indent=2)
        handle.write("\n")


# ---------------------------------------------------------------------------
# Dialogs


def ingest_dialogs(
    path: PathLike,
    catalog: SchemaCatalog,
    format: str = "SGD_JSON",
    warnings: Optional[list[str]] = None,
) -> list[Dialog]:
    """Read dialogs from a file or directory of files.

    Unknown domain references are collected as warnings (appended to
    ``warnings`` when given, logged otherwise), never fatal.
    """
    if not len(catalog):
        raise ValueError("catalog must not be empty")
    path = Path(path)
    if format == "NATIVE_JSONL":
        dialogs = _read_native_jsonl(path)
    elif format in ("SGD_JSON", "KETOD_JSON"):
        dialogs = []
        for file in _dialog_files(path):
            dialogs.extend(_read_sgd_file(file, enriched=(format == "KETOD_JSON")))
    else:
        raise ValueError(f"unknown dialog format {format!r}; expected one of {DIALOG_FORMATS}")

    for dialog in dialogs:
        for domain in dialog.domains:
            if domain not in catalog:
                message = f"dialog {dialog.dialog_id!r} references unknown domain {domain!r}"
                if warnings is not None:
                    warnings.append(message)
                else:
                    logger.warning("%s", message)
    return dialogs


def _dialog_files(path: Path) -> list[Path]:
    if path.is_dir():
        files = sorted(p for p in path.glob("*.json") if not p.name.startswith("schema"))
        if not files:
            raise MalformedFileError(f"{path} contains no dialog files")
        return files
    return [path]


def _read_sgd_file(path: Path, enriched: bool) -> list[Dialog]:
    payload = _load_json(path)
    if not isinstance(payload, list):
        raise MalformedFileError(f"{path}: SGD dialog file must be a JSON list")
    dialogs = []
    for entry in payload:
        try:
            dialogs.append(_sgd_dialog(entry, enriched))
        except (KeyError, TypeError, ValueError) as exc:
            dialog_id = entry.get("dialogue_id", "?") if isinstance(entry, dict) else "?"
            raise MalformedFileError(f"{path}: bad dialog {dialog_id!r}: {exc}") from exc
    return dialogs


def _sgd_dialog(entry: dict, enriched: bool) -> Dialog:
    turns: list[Turn] = []
    pending_user = ""
    index = 1
    for raw in entry["turns"]:
        if raw["speaker"].upper() == "USER":
            pending_user = raw["utterance"]
            continue
        frames = raw.get("frames", [])
        acts = tuple(
            action["act"]
            for frame in frames
            for action in frame.get("actions", [])
            if "act" in action
        )
        call = next((f["service_call"] for f in frames if f.get("service_call")), None)
        results = next((f["service_results"] for f in frames if "service_results" in f), None)
        utterance = raw["utterance"]
        if enriched:
            utterance = raw.get("enriched_utter") or raw.get("enriched_utterance") or utterance
        if call is not None:
            api = ApiCall(
                method=call["method"],
                params=tuple((str(k), str(v)) for k, v in call.get("parameters", {}).items()),
            )
            turns.append(Turn(index=index, user_utterance=pending_user, system_output=TurnOutput.from_call(api)))
            index += 1
            turns.append(
                Turn(
                    index=index,
                    user_utterance="",
                    system_output=TurnOutput.from_text(utterance),
                    acts=acts,
                    search_results=(
                        json.dumps(results, ensure_ascii=False) if results is not None else None
                    ),
                )
            )
        else:
            turns.append(
                Turn(
                    index=index,
                    user_utterance=pending_user,
                    system_output=TurnOutput.from_text(utterance),
                    acts=acts,
                )
            )
        index += 1
        pending_user = ""
    if pending_user:
        turns.append(Turn(index=index, user_utterance=pending_user, system_output=TurnOutput.from_text("")))
    return Dialog(
        dialog_id=entry["dialogue_id"],
        domains=tuple(dict.fromkeys(entry.get("services", []))),
        turns=tuple(turns),
    )


def _read_native_jsonl(path: Path) -> list[Dialog]:
    dialogs = []
    try:
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    dialogs.append(dialog_from_native(json.loads(line)))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise MalformedFileError(f"{path}:{lineno}: bad dialog line: {exc}") from exc
    except OSError as exc:
        raise MalformedFileError(f"cannot read {path}: {exc}") from exc
    return dialogs


def call_to_native(call: ApiCall) -> dict:
    return {
        "method": call.method,
        "params": [{"name": name, "value": value} for name, value in call.params],
    }


def call_from_native(payload: dict) -> ApiCall:
    return ApiCall(
        method=payload["method"],
        params=tuple((p["name"], p["value"]) for p in payload["params"]),
    )


def dialog_to_native(dialog: Dialog) -> dict:
    turns = []
    for turn in dialog.turns:
        if turn.system_output.kind is OutputKind.TEXT:
            output = {"kind": "TEXT", "text": turn.system_output.text}
        else:
            output = {"kind": "API_CALL", "call": call_to_native(turn.system_output.call)}
        entry = {
            "index": turn.index,
            "user": turn.user_utterance,
            "output": output,
            "acts": list(turn.acts),
        }
        if turn.search_results is not None:
            entry["search_results"] = turn.search_results
        turns.append(entry)
    return {"dialog_id": dialog.dialog_id, "domains": list(dialog.domains), "turns": turns}


def dialog_from_native(payload: dict) -> Dialog:
    turns = []
    for entry in payload["turns"]:
        output = entry["output"]
        if output["kind"] == "TEXT":
            system_output = TurnOutput.from_text(output["text"])
        elif output["kind"] == "API_CALL":
            system_output = TurnOutput.from_call(call_from_native(output["call"]))
        else:
            raise ValueError(f"unknown output kind {output['kind']!r}")
        turns.append(
            Turn(
                index=entry["index"],
                user_utterance=entry["user"],
                system_output=system_output,
                acts=tuple(entry.get("acts", [])),
                search_results=entry.get("search_results"),
            )
        )
    return Dialog(
        dialog_id=payload["dialog_id"],
        domains=tuple(payload["domains"]),
        turns=tuple(turns),
    )


def write_dialogs(dialogs: Iterable[Dialog], path: PathLike) -> None:
    """Write dialogs as native JSONL, one per line, in the given order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for dialog in dialogs:
            handle.write(json.dumps(dialog_to_native(dialog), ensure_ascii=False))
            handle.write("\n")
