"""Scoring of model predictions against gold dialogs.

Five call-level metrics are computed over gold API-call turns:

  - invoke accuracy: the prediction parses as an APICall at all;
  - method accuracy: parsed and the method matches (case-fold + trim);
  - param name accuracy: micro recall of gold parameter names;
  - param value accuracy: micro, counting only parameters whose name was
    matched (a correct value under a wrong name scores nothing);
  - complete accuracy: method, every name, every value, and no spurious
    parameters.

Text turns get a corpus-level BLEU-4 (overall and per Inform/Request
subtask slice) and a supplementary false-invoke rate: the fraction of gold
text turns answered with a parseable API call. Everything is reported per
domain category (All/Seen/Mixed/Unseen) with explicit denominators;
accuracies with an empty denominator are None, never zero.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from .apicall import ApiCall, ParseStatus, parse_apicall
from .errors import EmptyInputError, MalformedFileError
from .schema import Dialog, OutputKind
from .splits import DomainCategory, SplitConfig, Subtask, categorize, subtask_turns

TurnKey = tuple[str, int]

REPORT_NOTES = (
    "method comparison is normalized (case-fold + trim)",
    "text turns annotated with both INFORM and REQUEST acts score in both subtask slices",
)


@dataclass(frozen=True)
class PredictionSet:
    model_id: str
    entries: dict[TurnKey, str]


def load_predictions(path: Union[str, Path], model_id: Optional[str] = None) -> PredictionSet:
    """Read a prediction JSONL file: {"dialog_id", "turn_index", "output"} per line."""
    path = Path(path)
    entries: dict[TurnKey, str] = {}
    try:
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    key = (record["dialog_id"], int(record["turn_index"]))
                    if key in entries:
                        raise MalformedFileError(f"{path}:{lineno}: duplicate key {key}")
                    entries[key] = record["output"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise MalformedFileError(f"{path}:{lineno}: bad prediction line: {exc}") from exc
    except OSError as exc:
        raise MalformedFileError(f"cannot read {path}: {exc}") from exc
    return PredictionSet(model_id=model_id or path.stem, entries=entries)


# ---------------------------------------------------------------------------
# Per-turn API scoring


def _normalize_name(name: str) -> str:
    return name.strip().casefold()


def _normalize_value(value: str) -> str:
    value = value.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "'\"`":
        value = value[1:-1].strip()
    return value.casefold()


@dataclass(frozen=True)
class ApiTurnScore:
    invoked: bool
    method_correct: bool
    gold_param_count: int
    name_hits: int
    value_hits: int
    spurious_params: int
    complete: bool

    def __post_init__(self):
        if not 0 <= self.value_hits <= self.name_hits <= self.gold_param_count:
            raise ValueError("hit counts must satisfy value <= name <= gold count")
        if self.complete and not (
            self.invoked
            and self.method_correct
            and self.name_hits == self.gold_param_count
            and self.value_hits == self.gold_param_count
            and self.spurious_params == 0
        ):
            raise ValueError("complete contradicts component results")


def score_api_turn(gold: ApiCall, predicted_text: str) -> ApiTurnScore:
    """Score one prediction string against a gold API call."""
    gold_count = len(gold.params)
    outcome = parse_apicall(predicted_text)
    if outcome.status is not ParseStatus.PARSED:
        return ApiTurnScore(False, False, gold_count, 0, 0, 0, False)
    predicted = outcome.call
    method_correct = _normalize_name(predicted.method) == _normalize_name(gold.method)
    gold_values = {_normalize_name(n): _normalize_value(v) for n, v in gold.params}
    name_hits = 0
    value_hits = 0
    spurious = 0
    for name, value in predicted.params:
        key = _normalize_name(name)
        if key in gold_values:
            name_hits += 1
            if _normalize_value(value) == gold_values[key]:
                value_hits += 1
        else:
            spurious += 1
    complete = (
        method_correct
        and name_hits == gold_count
        and value_hits == gold_count
        and spurious == 0
    )
    return ApiTurnScore(True, method_correct, gold_count, name_hits, value_hits, spurious, complete)


# ---------------------------------------------------------------------------
# BLEU-4

_TOKEN_BOUNDARY = re.compile(r"([^\w\s])")


def tokenize(text: str) -> list[str]:
    """Whitespace tokenization after splitting punctuation into own tokens."""
    return _TOKEN_BOUNDARY.sub(r" \1 ", text).split()


def bleu4(candidates: list[str], references: list[str]) -> float:
    """Corpus-level BLEU with orders 1..4, uniform weights, brevity penalty.

    Smoothing adds epsilon=0.1 to a zero clipped-match count. Orders whose
    candidate n-gram total is zero (every candidate shorter than n tokens)
    are dropped from the geometric mean rather than treated as misses. An
    all-empty candidate corpus scores 0.
    """
    if len(candidates) != len(references):
        raise ValueError("candidates and references must have equal length")
    if not candidates:
        raise EmptyInputError("bleu4 needs at least one sentence pair")
    matches = [0] * 4
    totals = [0] * 4
    candidate_length = 0
    reference_length = 0
    for candidate, reference in zip(candidates, references):
        cand_tokens = tokenize(candidate)
        ref_tokens = tokenize(reference)
        candidate_length += len(cand_tokens)
        reference_length += len(ref_tokens)
        for n in range(1, 5):
            cand_counts = Counter(
                tuple(cand_tokens[i : i + n]) for i in range(len(cand_tokens) - n + 1)
            )
            ref_counts = Counter(
                tuple(ref_tokens[i : i + n]) for i in range(len(ref_tokens) - n + 1)
            )
            totals[n - 1] += sum(cand_counts.values())
            matches[n - 1] += sum(
                min(count, ref_counts[ngram]) for ngram, count in cand_counts.items()
            )
    if candidate_length == 0:
        return 0.0
    log_sum = 0.0
    orders = 0
    for match, total in zip(matches, totals):
        if total == 0:
            continue
        numerator = match if match > 0 else match + 0.1
        log_sum += math.log(numerator / total)
        orders += 1
    if orders == 0:
        return 0.0
    geometric_mean = math.exp(log_sum / orders)
    brevity = 1.0 if candidate_length > reference_length else math.exp(
        1.0 - reference_length / candidate_length
    )
    return brevity * geometric_mean


# ---------------------------------------------------------------------------
# Report aggregation


@dataclass(frozen=True)
class Ratio:
    """An accuracy with its denominator; value is None when unscored."""

    numerator: float = 0.0
    denominator: int = 0

    @property
    def value(self) -> Optional[float]:
        if self.denominator == 0:
            return None
        return self.numerator / self.denominator

    def plus(self, numerator: float, denominator: int = 1) -> "Ratio":
        return Ratio(self.numerator + numerator, self.denominator + denominator)


@dataclass(frozen=True)
class BleuScore:
    value: Optional[float]
    pair_count: int


@dataclass(frozen=True)
class CategoryReport:
    category: DomainCategory
    invoke_acc: Ratio = Ratio()
    method_acc: Ratio = Ratio()
    param_name_acc: Ratio = Ratio()
    param_value_acc: Ratio = Ratio()
    complete_acc: Ratio = Ratio()
    false_invoke_rate: Ratio = Ratio()
    bleu4_overall: BleuScore = BleuScore(None, 0)
    bleu4_inform: BleuScore = BleuScore(None, 0)
    bleu4_request: BleuScore = BleuScore(None, 0)
    external_semantic_score: Optional[Ratio] = None


@dataclass(frozen=True)
class EvalReport:
    model_id: str
    categories: dict[DomainCategory, CategoryReport]
    dialog_categories: dict[str, DomainCategory]
    missing_predictions: tuple[TurnKey, ...]
    unresolved_predictions: tuple[TurnKey, ...]
    notes: tuple[str, ...]


@dataclass
class _Accumulator:
    api_turns: int = 0
    invoked: int = 0
    method: int = 0
    complete: int = 0
    gold_params: int = 0
    name_hits: int = 0
    value_hits: int = 0
    text_turns: int = 0
    false_invokes: int = 0
    per_call_name_exact: int = 0
    pairs_overall: list[tuple[str, str]] = field(default_factory=list)
    pairs_inform: list[tuple[str, str]] = field(default_factory=list)
    pairs_request: list[tuple[str, str]] = field(default_factory=list)

    def add_api(self, score: ApiTurnScore) -> None:
        self.api_turns += 1
        self.invoked += score.invoked
        self.method += score.method_correct
        self.complete += score.complete
        self.gold_params += score.gold_param_count
        self.name_hits += score.name_hits
        self.value_hits += score.value_hits
        self.per_call_name_exact += (
            score.name_hits == score.gold_param_count and score.spurious_params == 0
        )

    def add_text(self, gold_text: str, predicted: str, inform: bool, request: bool) -> None:
        self.text_turns += 1
        if parse_apicall(predicted).status is ParseStatus.PARSED:
            self.false_invokes += 1
        self.pairs_overall.append((predicted, gold_text))
        if inform:
            self.pairs_inform.append((predicted, gold_text))
        if request:
            self.pairs_request.append((predicted, gold_text))

    def report(self, category: DomainCategory, per_call_param_names: bool) -> CategoryReport:
        def bleu(pairs: list[tuple[str, str]]) -> BleuScore:
            if not pairs:
                return BleuScore(None, 0)
            candidates = [p for p, _ in pairs]
            references = [r for _, r in pairs]
            return BleuScore(bleu4(candidates, references), len(pairs))

        if per_call_param_names:
            name_acc = Ratio(self.per_call_name_exact, self.api_turns)
        else:
            name_acc = Ratio(self.name_hits, self.gold_params)
        return CategoryReport(
            category=category,
            invoke_acc=Ratio(self.invoked, self.api_turns),
            method_acc=Ratio(self.method, self.api_turns),
            param_name_acc=name_acc,
            param_value_acc=Ratio(self.value_hits, self.gold_params),
            complete_acc=Ratio(self.complete, self.api_turns),
            false_invoke_rate=Ratio(self.false_invokes, self.text_turns),
            bleu4_overall=bleu(self.pairs_overall),
            bleu4_inform=bleu(self.pairs_inform),
            bleu4_request=bleu(self.pairs_request),
        )


def evaluate(
    gold: Iterable[Dialog],
    predictions: PredictionSet,
    config: SplitConfig,
    per_call_param_names: bool = False,
) -> EvalReport:
    """Score one prediction set against gold dialogs, per domain category.

    Turns without a prediction are listed as missing and skipped; prediction
    keys that match no gold turn are listed as unresolved. With
    ``per_call_param_names`` the name accuracy becomes the per-call boolean
    (every gold name present, nothing spurious) instead of micro recall.
    """
    gold = list(gold)
    accumulators = {category: _Accumulator() for category in DomainCategory}
    dialog_categories: dict[str, DomainCategory] = {}
    missing: list[TurnKey] = []
    seen_keys: set[TurnKey] = set()
    any_acts = False
    for dialog in gold:
        category = categorize(dialog, config)
        dialog_categories[dialog.dialog_id] = category
        inform_turns = set(subtask_turns(dialog, Subtask.INFORM))
        request_turns = set(subtask_turns(dialog, Subtask.REQUEST))
        any_acts = any_acts or any(turn.acts for turn in dialog.turns)
        for turn in dialog.turns:
            key = (dialog.dialog_id, turn.index)
            seen_keys.add(key)
            if key not in predictions.entries:
                missing.append(key)
                continue
            predicted = predictions.entries[key]
            buckets = (accumulators[DomainCategory.ALL], accumulators[category])
            if turn.system_output.kind is OutputKind.API_CALL:
                score = score_api_turn(turn.system_output.call, predicted)
                for bucket in buckets:
                    bucket.add_api(score)
            else:
                for bucket in buckets:
                    bucket.add_text(
                        turn.system_output.text,
                        predicted,
                        inform=turn.index in inform_turns,
                        request=turn.index in request_turns,
                    )
    unresolved = tuple(sorted(set(predictions.entries) - seen_keys))
    notes = list(REPORT_NOTES)
    if not any_acts:
        notes.append("corpus carries no act annotations; subtask slices are empty")
    if per_call_param_names:
        notes.append("param name accuracy uses the per-call boolean variant")
    return EvalReport(
        model_id=predictions.model_id,
        categories={
            category: accumulator.report(category, per_call_param_names)
            for category, accumulator in accumulators.items()
        },
        dialog_categories=dialog_categories,
        missing_predictions=tuple(missing),
        unresolved_predictions=unresolved,
        notes=tuple(notes),
    )


def attach_external_scores(
    report: EvalReport, scores: Mapping[TurnKey, float]
) -> EvalReport:
    """Fold externally computed per-turn semantic scores into the report.

    Scores must lie in [-1, 1]. Keys whose dialog is not part of the report
    are ignored. An empty map leaves the report unchanged (field absent).
    """
    if not scores:
        return report
    sums: dict[DomainCategory, Ratio] = {}
    for (dialog_id, _), value in scores.items():
        if not -1.0 <= value <= 1.0:
            raise ValueError(f"external score {value} outside [-1, 1]")
        category = report.dialog_categories.get(dialog_id)
        if category is None:
            continue
        for bucket in (DomainCategory.ALL, category):
            sums[bucket] = sums.get(bucket, Ratio()).plus(value)
    categories = {
        category: replace(cat_report, external_semantic_score=sums.get(category))
        for category, cat_report in report.categories.items()
    }
    return replace(report, categories=categories)


# ---------------------------------------------------------------------------
# Rendering

_TABLE_ROWS = (
    ("Invoke Accuracy", "invoke_acc"),
    ("Method Accuracy", "method_acc"),
    ("Param Name Accuracy", "param_name_acc"),
    ("Param Value Accuracy", "param_value_acc"),
    ("Complete Accuracy", "complete_acc"),
    ("False Invoke Rate", "false_invoke_rate"),
    ("BLEU-4 Overall", "bleu4_overall"),
    ("BLEU-4 Inform", "bleu4_inform"),
    ("BLEU-4 Request", "bleu4_request"),
    ("External Semantic Score", "external_semantic_score"),
)

_COLUMNS = (
    DomainCategory.ALL,
    DomainCategory.SEEN,
    DomainCategory.MIXED,
    DomainCategory.UNSEEN,
)


def _cell(entry) -> str:
    if entry is None:
        return "-"
    if isinstance(entry, Ratio):
        return "-" if entry.value is None else f"{entry.value:.4f}"
    if isinstance(entry, BleuScore):
        return "-" if entry.value is None else f"{entry.value:.4f}"
    return f"{entry:.4f}"


def render_table(report: EvalReport) -> str:
    """Aligned plain-text table: metric rows by All/Seen/Mixed/Unseen columns."""
    lines = [f"Model: {report.model_id}"]
    lines.extend(f"Note: {note}" for note in report.notes)
    header = f"{'Metric':<26}" + "".join(f"{c.value:>10}" for c in _COLUMNS)
    lines.append(header)
    lines.append("-" * len(header))
    for label, attr in _TABLE_ROWS:
        if attr == "external_semantic_score" and all(
            report.categories[c].external_semantic_score is None for c in _COLUMNS
        ):
            continue
        cells = "".join(f"{_cell(getattr(report.categories[c], attr)):>10}" for c in _COLUMNS)
        lines.append(f"{label:<26}{cells}")
    if report.missing_predictions:
        lines.append(f"Missing predictions: {len(report.missing_predictions)}")
    if report.unresolved_predictions:
        lines.append(f"Unresolved prediction keys: {len(report.unresolved_predictions)}")
    return "\n".join(lines) + "\n"


def report_to_json(report: EvalReport) -> dict:
    def ratio(entry: Optional[Ratio]):
        if entry is None:
            return None
        return {
            "value": entry.value,
            "numerator": entry.numerator,
            "denominator": entry.denominator,
        }

    def bleu(entry: BleuScore):
        return {"value": entry.value, "pair_count": entry.pair_count}

    return {
        "model_id": report.model_id,
        "notes": list(report.notes),
        "categories": {
            category.value: {
                "invoke_acc": ratio(cat.invoke_acc),
                "method_acc": ratio(cat.method_acc),
                "param_name_acc": ratio(cat.param_name_acc),
                "param_value_acc": ratio(cat.param_value_acc),
                "complete_acc": ratio(cat.complete_acc),
                "false_invoke_rate": ratio(cat.false_invoke_rate),
                "bleu4_overall": bleu(cat.bleu4_overall),
                "bleu4_inform": bleu(cat.bleu4_inform),
                "bleu4_request": bleu(cat.bleu4_request),
                "external_semantic_score": ratio(cat.external_semantic_score),
            }
            for category, cat in report.categories.items()
        },
        "missing_predictions": [list(k) for k in report.missing_predictions],
        "unresolved_predictions": [list(k) for k in report.unresolved_predictions],
    }
