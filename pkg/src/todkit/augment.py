"""Schema variants and systematic dialog rewriting.

A rename lexicon maps one domain's intent and slot names to variant names
(for example Buses_1's from_station/to_station to Buses_11's
origin/destination). Applying it to a schema yields the variant schema;
applying it to dialogs rewrites every structured reference (API-call method
and parameter names) while leaving parameter values, acts, and turn
structure untouched. Utterance text substitution is opt-in via
``rewrite_text``: structured references are unambiguous, free-text mentions
are not.

Lexicon file format (JSON)::

    {"domain_id": "Buses_1", "variant_id": "Buses_11",
     "intents": {"OldIntent": "NewIntent"},
     "slots": {"OldIntent": {"old slot": "new slot"}}}

Slot sections are keyed by the original intent name.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Union

from .apicall import ApiCall
from .errors import CollisionError, MalformedFileError, UnknownNameError
from .schema import Dialog, DomainSchema, Intent, OutputKind, SchemaCatalog, Turn, TurnOutput

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass(frozen=True)
class RenameMap:
    """Bijective renaming of one domain's intent and slot names."""

    domain_id: str
    variant_id: str
    intent_renames: dict[str, str] = field(default_factory=dict)
    slot_renames: dict[tuple[str, str], str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.domain_id:
            raise ValueError("domain_id must be non-empty")
        targets = list(self.intent_renames.values())
        if len(targets) != len(set(targets)):
            raise ValueError(f"intent renames for {self.domain_id!r} are not injective")
        per_intent: dict[str, set[str]] = {}
        for (intent, _), new in self.slot_renames.items():
            bucket = per_intent.setdefault(intent, set())
            if new in bucket:
                raise ValueError(
                    f"slot renames for intent {intent!r} map two slots to {new!r}"
                )
            bucket.add(new)

    @property
    def target_domain_id(self) -> str:
        return self.variant_id or self.domain_id

    def rename_intent(self, name: str) -> str:
        return self.intent_renames.get(name, name)

    def rename_slot(self, intent: str, name: str) -> str:
        return self.slot_renames.get((intent, name), name)


def load_rename_map(path: PathLike) -> RenameMap:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
        slot_renames = {
            (intent, old): new
            for intent, pairs in payload.get("slots", {}).items()
            for old, new in pairs.items()
        }
        return RenameMap(
            domain_id=payload["domain_id"],
            variant_id=payload.get("variant_id", ""),
            intent_renames=dict(payload.get("intents", {})),
            slot_renames=slot_renames,
        )
    except OSError as exc:
        raise MalformedFileError(f"cannot read {path}: {exc}") from exc
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
        raise MalformedFileError(f"{path}: bad rename lexicon: {exc}") from exc


def write_rename_map(renames: RenameMap, path: PathLike) -> None:
    slots: dict[str, dict[str, str]] = {}
    for (intent, old), new in renames.slot_renames.items():
        slots.setdefault(intent, {})[old] = new
    payload = {
        "domain_id": renames.domain_id,
        "variant_id": renames.variant_id,
        "intents": renames.intent_renames,
        "slots": slots,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, ensure_ascii=False, indent=2)
        handle.write("\n")


def invert_rename_map(renames: RenameMap) -> RenameMap:
    """The inverse lexicon, keyed by variant names, mapping back to sources."""
    inverted_slots = {}
    for (intent, old), new in renames.slot_renames.items():
        inverted_slots[(renames.rename_intent(intent), new)] = old
    return RenameMap(
        domain_id=renames.target_domain_id,
        variant_id=renames.domain_id,
        intent_renames={new: old for old, new in renames.intent_renames.items()},
        slot_renames=inverted_slots,
    )


def make_variant(schema: DomainSchema, renames: RenameMap) -> DomainSchema:
    """Apply the lexicon to a schema, preserving structure and required flags."""
    intent_names = {i.name for i in schema.intents}
    for old in renames.intent_renames:
        if old not in intent_names:
            raise UnknownNameError(f"intent {old!r} not in domain {schema.domain_id!r}")
    for intent_name, slot_name in renames.slot_renames:
        intent = schema.intent(intent_name)
        if intent is None:
            raise UnknownNameError(f"intent {intent_name!r} not in domain {schema.domain_id!r}")
        if slot_name not in {s.name for s in intent.slots}:
            raise UnknownNameError(f"slot {slot_name!r} not in intent {intent_name!r}")

    intents = []
    for intent in schema.intents:
        slots = tuple(
            replace(slot, name=renames.rename_slot(intent.name, slot.name))
            for slot in intent.slots
        )
        try:
            intents.append(Intent(name=renames.rename_intent(intent.name), slots=slots))
        except ValueError as exc:
            raise CollisionError(f"domain {schema.domain_id!r}: {exc}") from exc
    try:
        return DomainSchema(domain_id=renames.target_domain_id, intents=tuple(intents))
    except ValueError as exc:
        raise CollisionError(f"domain {schema.domain_id!r}: {exc}") from exc


def _surface_substitutions(renames: RenameMap) -> list[tuple[str, str]]:
    pairs: dict[str, str] = {}
    for old, new in renames.intent_renames.items():
        pairs.setdefault(old, new)
    for (_, old), new in renames.slot_renames.items():
        if old in pairs and pairs[old] != new:
            logger.warning(
                "surface name %r maps to both %r and %r; using %r", old, pairs[old], new, pairs[old]
            )
            continue
        pairs.setdefault(old, new)
    # Longest match first so "leaving time" wins over "time".
    return sorted(pairs.items(), key=lambda kv: len(kv[0]), reverse=True)


def _substitute_text(text: str, substitutions: list[tuple[str, str]]) -> str:
    if not substitutions or not text:
        return text
    pattern = re.compile(
        r"\b(?:" + "|".join(re.escape(old) for old, _ in substitutions) + r")\b"
    )
    lookup = dict(substitutions)
    return pattern.sub(lambda m: lookup[m.group(0)], text)


def rewrite_dialog(
    dialog: Dialog,
    renames: RenameMap,
    rewrite_text: bool = False,
    schemas: Optional[Iterable[DomainSchema]] = None,
    warnings: Optional[list[str]] = None,
) -> Dialog:
    """Rewrite one dialog against the lexicon.

    API-call methods and parameter names are substituted; values and acts
    are never touched. When ``schemas`` (the schemas of the dialog's
    domains) are given, call names found in none of them and not in the
    lexicon pass through with a warning. Turn count and output kinds are
    invariant.
    """
    schemas = list(schemas) if schemas is not None else None

    def warn(message: str) -> None:
        if warnings is not None:
            warnings.append(message)
        else:
            logger.warning("%s", message)

    def find_intent(method: str):
        for candidate in schemas or ():
            intent = candidate.intent(method)
            if intent is not None:
                return intent
        return None

    substitutions = _surface_substitutions(renames) if rewrite_text else []
    turns = []
    for turn in dialog.turns:
        output = turn.system_output
        if output.kind is OutputKind.API_CALL:
            call = output.call
            intent = find_intent(call.method)
            if schemas is not None and intent is None and call.method not in renames.intent_renames:
                warn(
                    f"dialog {dialog.dialog_id!r} turn {turn.index}: method {call.method!r} "
                    "is in neither the schemas nor the lexicon; passed through"
                )
            params = []
            for name, value in call.params:
                if (
                    intent is not None
                    and name not in {s.name for s in intent.slots}
                    and (call.method, name) not in renames.slot_renames
                ):
                    warn(
                        f"dialog {dialog.dialog_id!r} turn {turn.index}: parameter {name!r} "
                        "is in neither the schemas nor the lexicon; passed through"
                    )
                params.append((renames.rename_slot(call.method, name), value))
            new_call = ApiCall(method=renames.rename_intent(call.method), params=tuple(params))
            output = TurnOutput.from_call(new_call)
        elif rewrite_text:
            output = TurnOutput.from_text(_substitute_text(output.text, substitutions))
        user = turn.user_utterance
        if rewrite_text:
            user = _substitute_text(user, substitutions)
        turns.append(
            Turn(
                index=turn.index,
                user_utterance=user,
                system_output=output,
                acts=turn.acts,
                search_results=turn.search_results,
            )
        )
    domains = tuple(
        renames.target_domain_id if d == renames.domain_id else d for d in dialog.domains
    )
    return Dialog(dialog_id=dialog.dialog_id, domains=domains, turns=tuple(turns))


@dataclass(frozen=True)
class AugmentedCorpus:
    """Rewritten dialogs plus the schemas they now reference."""

    variant_schemas: SchemaCatalog
    dialogs: tuple[Dialog, ...]
    provenance: dict[str, str]


def augment_corpus(
    dialogs: Iterable[Dialog],
    catalog: SchemaCatalog,
    rename_maps: Iterable[RenameMap],
    rewrite_text: bool = False,
    include_unmatched: bool = False,
    warnings: Optional[list[str]] = None,
) -> AugmentedCorpus:
    """Apply every lexicon to every dialog touching its domain.

    Dialog ids gain a "/<variant_id>" suffix and provenance records the
    source id for every output dialog. Per-dialog rewrite problems are
    collected as warnings; only schema-level collisions abort.
    """
    dialogs = list(dialogs)
    rename_maps = list(rename_maps)
    schemas: dict[str, DomainSchema] = dict(catalog.schemas)
    out: list[Dialog] = []
    provenance: dict[str, str] = {}
    for renames in rename_maps:
        source_schema = catalog.get(renames.domain_id)
        if source_schema is None:
            raise UnknownNameError(f"lexicon domain {renames.domain_id!r} not in catalog")
        variant_schema = make_variant(source_schema, renames)
        schemas[variant_schema.domain_id] = variant_schema
        suffix = renames.variant_id or renames.domain_id
        for dialog in dialogs:
            if renames.domain_id not in dialog.domains:
                if not include_unmatched:
                    continue
                rewritten = dialog
            else:
                try:
                    dialog_schemas = [
                        s for s in (catalog.get(d) for d in dialog.domains) if s is not None
                    ]
                    rewritten = rewrite_dialog(
                        dialog, renames, rewrite_text=rewrite_text,
                        schemas=dialog_schemas, warnings=warnings,
                    )
                except ValueError as exc:
                    message = f"dialog {dialog.dialog_id!r} under {suffix!r} skipped: {exc}"
                    if warnings is not None:
                        warnings.append(message)
                    else:
                        logger.warning("%s", message)
                    continue
            new_id = f"{dialog.dialog_id}/{suffix}"
            out.append(replace(rewritten, dialog_id=new_id))
            provenance[new_id] = dialog.dialog_id
    return AugmentedCorpus(
        variant_schemas=SchemaCatalog(schemas=schemas),
        dialogs=tuple(out),
        provenance=provenance,
    )


def diff_schemas(source: DomainSchema, target: DomainSchema) -> RenameMap:
    """Derive a lexicon from two structurally parallel schemas.

    Intents and slots are matched positionally; sibling corpus schemas
    (Buses_1 vs Buses_11 style) share structure, so a positional diff
    recovers exactly the renames.
    """
    if len(source.intents) != len(target.intents):
        raise ValueError(
            f"{source.domain_id!r} and {target.domain_id!r} have different intent counts"
        )
    intent_renames = {}
    slot_renames = {}
    for src, dst in zip(source.intents, target.intents):
        if len(src.slots) != len(dst.slots):
            raise ValueError(
                f"intents {src.name!r} and {dst.name!r} have different slot counts"
            )
        if src.name != dst.name:
            intent_renames[src.name] = dst.name
        for s_slot, d_slot in zip(src.slots, dst.slots):
            if s_slot.name != d_slot.name:
                slot_renames[(src.name, s_slot.name)] = d_slot.name
    return RenameMap(
        domain_id=source.domain_id,
        variant_id=target.domain_id,
        intent_renames=intent_renames,
        slot_renames=slot_renames,
    )
