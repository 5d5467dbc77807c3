"""Normalized data model for domain schemas and dialogs.

A domain schema lists the intents a user can pursue in that domain and, for
each intent, the slots that parameterize it together with a required flag.
Dialogs are sequences of exchanges: a user utterance paired with a system
output, which is either plain text or a structured API call. All types are
frozen dataclasses, immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .apicall import ApiCall
from .errors import OutOfRangeError


class OutputKind(enum.Enum):
    TEXT = "TEXT"
    API_CALL = "API_CALL"


@dataclass(frozen=True)
class SlotSpec:
    """A named intent parameter and whether it is mandatory."""

    name: str
    is_required: bool

    def __post_init__(self):
        if not self.name:
            raise ValueError("slot name must be non-empty")
        if "\n" in self.name or "\r" in self.name:
            raise ValueError(f"slot name contains a newline: {self.name!r}")


@dataclass(frozen=True)
class Intent:
    """A user goal within a domain, fulfilled by an API method of the same name."""

    name: str
    slots: tuple[SlotSpec, ...]

    def __post_init__(self):
        if not self.name:
            raise ValueError("intent name must be non-empty")
        names = [s.name for s in self.slots]
        if len(names) != len(set(names)):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate slot names in intent {self.name!r}: {dupes}")

    def required_slots(self) -> tuple[SlotSpec, ...]:
        return tuple(s for s in self.slots if s.is_required)

    def optional_slots(self) -> tuple[SlotSpec, ...]:
        return tuple(s for s in self.slots if not s.is_required)


@dataclass(frozen=True)
class DomainSchema:
    domain_id: str
    intents: tuple[Intent, ...]

    def __post_init__(self):
        if not self.domain_id:
            raise ValueError("domain_id must be non-empty")
        if not self.intents:
            raise ValueError(f"domain {self.domain_id!r} has no intents")
        names = [i.name for i in self.intents]
        if len(names) != len(set(names)):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate intent names in domain {self.domain_id!r}: {dupes}")

    def intent(self, name: str) -> Optional[Intent]:
        for i in self.intents:
            if i.name == name:
                return i
        return None


@dataclass(frozen=True)
class SchemaCatalog:
    """Lookup table of domain schemas keyed by domain id."""

    schemas: dict[str, DomainSchema] = field(default_factory=dict)

    def __post_init__(self):
        for key, schema in self.schemas.items():
            if key != schema.domain_id:
                raise ValueError(f"catalog key {key!r} != schema domain_id {schema.domain_id!r}")

    def __contains__(self, domain_id: str) -> bool:
        return domain_id in self.schemas

    def __len__(self) -> int:
        return len(self.schemas)

    def get(self, domain_id: str) -> Optional[DomainSchema]:
        return self.schemas.get(domain_id)

    def domain_ids(self) -> tuple[str, ...]:
        return tuple(self.schemas.keys())


@dataclass(frozen=True)
class TurnOutput:
    """System-side output of one exchange: natural language or an API call."""

    kind: OutputKind
    text: Optional[str] = None
    call: Optional[ApiCall] = None

    def __post_init__(self):
        if self.kind is OutputKind.TEXT:
            if self.text is None or self.call is not None:
                raise ValueError("TEXT output must carry text and no call")
        elif self.kind is OutputKind.API_CALL:
            if self.call is None or self.text is not None:
                raise ValueError("API_CALL output must carry a call and no text")
        else:  # pragma: no cover - enum is closed
            raise ValueError(f"unknown output kind {self.kind!r}")

    @staticmethod
    def from_text(text: str) -> "TurnOutput":
        return TurnOutput(kind=OutputKind.TEXT, text=text)

    @staticmethod
    def from_call(call: ApiCall) -> "TurnOutput":
        return TurnOutput(kind=OutputKind.API_CALL, call=call)


@dataclass(frozen=True)
class Turn:
    """One exchange: the user utterance and the system output that answers it.

    ``user_utterance`` may be empty for turns that only surface API results.
    ``acts`` carries corpus act annotations verbatim (used for evaluation
    slicing only, never for training-pair content). ``search_results`` is an
    opaque string of API results shown to the system, when the corpus has one.
    """

    index: int
    user_utterance: str
    system_output: TurnOutput
    acts: tuple[str, ...] = ()
    search_results: Optional[str] = None

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"turn index must be >= 1, got {self.index}")


@dataclass(frozen=True)
class Dialog:
    dialog_id: str
    domains: tuple[str, ...]
    turns: tuple[Turn, ...]

    def __post_init__(self):
        if not self.dialog_id:
            raise ValueError("dialog_id must be non-empty")
        if not self.domains:
            raise ValueError(f"dialog {self.dialog_id!r} has no domains")
        if len(set(self.domains)) != len(self.domains):
            raise ValueError(f"dialog {self.dialog_id!r} repeats a domain")
        for pos, turn in enumerate(self.turns, start=1):
            if turn.index != pos:
                raise ValueError(
                    f"dialog {self.dialog_id!r}: turn index {turn.index} at position {pos}; "
                    "indices must be contiguous from 1"
                )


@dataclass(frozen=True)
class Exchange:
    """History entry handed to prompt rendering.

    The final entry of a history window carries the current user utterance
    with ``output`` set to None: the system side of that turn is what a model
    is asked to produce.
    """

    index: int
    user_utterance: str
    output: Optional[TurnOutput]
    search_results: Optional[str] = None


def history_window(dialog: Dialog, t: int, k: int) -> list[Exchange]:
    """Return the ``min(k, t)`` most recent exchanges ending at turn ``t``.

    The last entry contains the turn-``t`` user utterance and no system
    output. Raises OutOfRangeError when ``t`` is not a valid turn index or
    ``k`` is not positive.
    """
    if k < 1:
        raise OutOfRangeError(f"history window k must be >= 1, got {k}")
    if t < 1 or t > len(dialog.turns):
        raise OutOfRangeError(
            f"turn index {t} out of range for dialog {dialog.dialog_id!r} "
            f"with {len(dialog.turns)} turns"
        )
    start = max(0, t - k)
    window = []
    for turn in dialog.turns[start : t - 1]:
        window.append(
            Exchange(
                index=turn.index,
                user_utterance=turn.user_utterance,
                output=turn.system_output,
                search_results=turn.search_results,
            )
        )
    current = dialog.turns[t - 1]
    window.append(
        Exchange(
            index=current.index,
            user_utterance=current.user_utterance,
            output=None,
            search_results=current.search_results,
        )
    )
    return window
