"""Schema-aware task-oriented dialog toolkit.

Turns raw dialog corpora into augmented training data and scores model
predictions for task completion: corpus ingestion and normalization, an
APICall grammar parser/serializer, schema-variant augmentation, instruction
prompt emission, call- and response-level metrics, and a blind human
annotation service.
"""

__version__ = "0.1.0"

from .apicall import ApiCall, ParseOutcome, ParseStatus, parse_apicall, serialize_apicall
from .schema import (
    Dialog,
    DomainSchema,
    Exchange,
    Intent,
    OutputKind,
    SchemaCatalog,
    SlotSpec,
    Turn,
    TurnOutput,
    history_window,
)

__all__ = [
    "ApiCall",
    "Dialog",
    "DomainSchema",
    "Exchange",
    "Intent",
    "OutputKind",
    "ParseOutcome",
    "ParseStatus",
    "SchemaCatalog",
    "SlotSpec",
    "Turn",
    "TurnOutput",
    "__version__",
    "history_window",
    "parse_apicall",
    "serialize_apicall",
]
