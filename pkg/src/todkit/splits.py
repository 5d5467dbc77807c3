"""Domain-category classification and Inform/Request subtask selection.

A dialog is SEEN when every domain it touches is in the configured
seen-domain set, UNSEEN when none is, MIXED otherwise. ALL is a reporting
bucket holding every dialog and is never the result of classification.
Subtask selection is act-family based: any act label starting with INFORM
counts toward the Inform slice, any starting with REQUEST toward Request
(SGD-style labels carry family prefixes, e.g. REQUEST_ALTS). A text turn
annotated with both families lands in both slices; API-call turns never
enter either.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from .errors import MalformedFileError
from .schema import Dialog, OutputKind


class DomainCategory(enum.Enum):
    ALL = "All"
    SEEN = "Seen"
    MIXED = "Mixed"
    UNSEEN = "Unseen"


class Subtask(enum.Enum):
    INFORM = "INFORM"
    REQUEST = "REQUEST"


@dataclass(frozen=True)
class SplitConfig:
    seen_domains: frozenset[str]

    def __post_init__(self):
        if not self.seen_domains:
            raise ValueError("seen_domains must be non-empty")


def load_split_config(path: Union[str, Path]) -> SplitConfig:
    """Read a seen-domain file: a JSON list of domain ids."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
        if not isinstance(payload, list) or not all(isinstance(d, str) for d in payload):
            raise MalformedFileError(f"{path}: seen-domain file must be a JSON list of strings")
        return SplitConfig(seen_domains=frozenset(payload))
    except OSError as exc:
        raise MalformedFileError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"{path} is not valid JSON: {exc}") from exc


def categorize(dialog: Dialog, config: SplitConfig) -> DomainCategory:
    domains = set(dialog.domains)
    if domains <= config.seen_domains:
        return DomainCategory.SEEN
    if not (domains & config.seen_domains):
        return DomainCategory.UNSEEN
    return DomainCategory.MIXED


def subtask_turns(dialog: Dialog, subtask: Subtask) -> list[int]:
    """Indices of TEXT turns whose acts include the subtask's family."""
    prefix = subtask.value
    return [
        turn.index
        for turn in dialog.turns
        if turn.system_output.kind is OutputKind.TEXT
        and any(act.upper().startswith(prefix) for act in turn.acts)
    ]


def infer_seen_domains(dialogs: Iterable[Dialog]) -> frozenset[str]:
    """Union of all domains a training corpus touches."""
    seen: set[str] = set()
    for dialog in dialogs:
        seen.update(dialog.domains)
    return frozenset(seen)
