"""Parse generated rule explanations back into predicates and a label.

The parser is total over arbitrary strings and tolerant of every rendering
variant this toolkit emits (symbolic or worded relations, integer or
two-decimal numbers, optional verbal tags in parentheses). Feature names are
matched by longest prefix against the known names, so names containing
spaces or parentheses need no delimiters. Anything it cannot interpret comes
back as a typed failure with a byte offset instead of an exception.

Limitation: a feature name containing the literal token " and " would be
split apart, since conjunctions are delimiter-free.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources

_LABEL_RE = re.compile(r"Label:\s*([+-]?\d+)")
_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)")
_PAREN_RE = re.compile(r"\([^)]*\)")

# Longest tokens first so "<=" wins over "<" and "=".
_RELATIONS = (
    ("is greater than", "GT"),
    ("is less than", "LE"),
    ("is equal to", "EQ"),
    ("<=", "LE"),
    (">=", "GT"),
    ("<", "LE"),
    (">", "GT"),
    ("=", "EQ"),
)


class Comparator(Enum):
    LE = "<="
    GT = ">"


class FailureReason(str, Enum):
    MISSING_RELATION = "MissingRelation"
    UNKNOWN_FEATURE = "UnknownFeature"
    MALFORMED_NUMBER = "MalformedNumber"
    MISSING_LABEL = "MissingLabel"
    EMPTY_STATEMENT = "EmptyStatement"


@dataclass(frozen=True)
class Predicate:
    feature_name: str
    comparator: Comparator
    threshold: float


@dataclass(frozen=True)
class ParsedStatement:
    predicates: tuple[Predicate, ...]
    predicted_label: int
    source_text: str
    lenient: bool = False


@dataclass(frozen=True)
class ParseFailure:
    reason: FailureReason
    offset: int
    label: int | None = None


ParseOutcome = ParsedStatement | ParseFailure


def _byte_offset(text: str, char_offset: int) -> int:
    return len(text[:char_offset].encode("utf-8"))


class _ClauseError(Exception):
    def __init__(self, reason: FailureReason, char_offset: int):
        self.reason = reason
        self.char_offset = char_offset


def _skip_spaces(text: str, pos: int) -> int:
    while pos < len(text) and text[pos] == " ":
        pos += 1
    return pos


def _match_feature(clause: str, feature_names) -> str | None:
    best = None
    for name in feature_names:
        if clause.startswith(name) and len(clause) > len(name) and clause[len(name)] == " ":
            if best is None or len(name) > len(best):
                best = name
    return best


def _parse_clause(
    clause: str, feature_names, offset: int
) -> tuple[list[tuple[Comparator, float, str]], bool]:
    """Parse one comparison clause starting at ``offset`` in the full text.

    Returns (parsed comparisons, clause had trailing junk). Equality expands
    to the LE and GT pair at the same threshold.
    """
    name = _match_feature(clause, feature_names)
    if name is None:
        raise _ClauseError(FailureReason.UNKNOWN_FEATURE, offset)
    pos = _skip_spaces(clause, len(name))

    value = _NUMBER_RE.match(clause, pos)
    if value is None:
        raise _ClauseError(FailureReason.MALFORMED_NUMBER, offset + pos)
    pos = _skip_spaces(clause, value.end())

    paren = _PAREN_RE.match(clause, pos)
    if paren is not None:
        pos = _skip_spaces(clause, paren.end())

    relation = None
    for token, kind in _RELATIONS:
        if clause.startswith(token, pos):
            end = pos + len(token)
            if token.isalpha() or " " in token:
                if end < len(clause) and clause[end] not in (" ",):
                    continue
            relation = kind
            pos = _skip_spaces(clause, end)
            break
    if relation is None:
        raise _ClauseError(FailureReason.MISSING_RELATION, offset + pos)

    threshold = _NUMBER_RE.match(clause, pos)
    if threshold is None:
        raise _ClauseError(FailureReason.MALFORMED_NUMBER, offset + pos)
    pos = _skip_spaces(clause, threshold.end())

    paren = _PAREN_RE.match(clause, pos)
    if paren is not None:
        pos = _skip_spaces(clause, paren.end())

    leftover = clause[pos:].strip(" .")
    t = float(threshold.group())
    if relation == "EQ":
        parsed = [(Comparator.LE, t, name), (Comparator.GT, t, name)]
    else:
        parsed = [(Comparator[relation], t, name)]
    return parsed, bool(leftover)


def _parse_conditions(conditions: str, feature_names, base: int):
    """All clauses of ``conditions``; raises _ClauseError on the first bad one."""
    predicates: list[Predicate] = []
    saw_inequality = False
    saw_junk = False
    pos = 0
    clauses = conditions.split(" and ")
    first_offset = None
    for clause in clauses:
        start = base + pos
        stripped = clause.strip()
        inner = start + clause.index(stripped) if stripped else start
        if first_offset is None:
            first_offset = inner
        if not stripped:
            raise _ClauseError(FailureReason.EMPTY_STATEMENT, start)
        parsed, junk = _parse_clause(stripped, feature_names, inner)
        saw_junk = saw_junk or junk
        for comparator, threshold, name in parsed:
            predicates.append(Predicate(name, comparator, threshold))
        if len(parsed) == 1:
            saw_inequality = True
        pos += len(clause) + len(" and ")
    if not saw_inequality:
        raise _ClauseError(FailureReason.MISSING_RELATION, first_offset or base)
    return predicates, saw_junk


def parse_output(text: str, feature_names) -> ParseOutcome:
    """Parse a generated explanation into predicates plus a predicted label.

    Total over strings: returns ParseFailure (with the recovered label when
    one exists) rather than raising. The last "Label:" clause wins; text
    before the first recognizable clause is ignored with the lenient flag
    set.
    """
    label_match = None
    for label_match in _LABEL_RE.finditer(text):
        pass
    if label_match is None:
        return ParseFailure(FailureReason.MISSING_LABEL, _byte_offset(text, len(text)))
    label = int(label_match.group(1))

    conditions = text[: label_match.start()].rstrip()
    if conditions.endswith("."):
        conditions = conditions[:-1].rstrip()
    if not conditions:
        return ParseFailure(FailureReason.EMPTY_STATEMENT, 0, label=label)

    try:
        predicates, junk = _parse_conditions(conditions, feature_names, 0)
        lenient = junk
    except _ClauseError as primary:
        retry = _lenient_start(conditions, feature_names)
        if retry is None:
            return ParseFailure(
                primary.reason, _byte_offset(text, primary.char_offset), label=label
            )
        try:
            predicates, _ = _parse_conditions(conditions[retry:], feature_names, retry)
            lenient = True
        except _ClauseError:
            return ParseFailure(
                primary.reason, _byte_offset(text, primary.char_offset), label=label
            )

    if not predicates:
        return ParseFailure(FailureReason.EMPTY_STATEMENT, 0, label=label)
    return ParsedStatement(
        predicates=tuple(predicates),
        predicted_label=label,
        source_text=text,
        lenient=lenient,
    )


def _lenient_start(conditions: str, feature_names) -> int | None:
    """Earliest offset past position 0 where a known feature name begins."""
    best = None
    for name in feature_names:
        found = conditions.find(name, 1)
        if found > 0 and (best is None or found < best):
            best = found
    return best


def _format_threshold(value: float) -> str:
    if value == int(value):
        return str(int(value))
    return repr(value)


def to_filter_program(statement: ParsedStatement) -> tuple[str, ...]:
    """Sequential filter steps equivalent to the statement's conjunction.

    Audit rendering only; validation consumes the predicates directly.
    """
    return tuple(
        f"keep rows where {p.feature_name} {p.comparator.value} {_format_threshold(p.threshold)}"
        for p in statement.predicates
    )


def translation_prompt_template() -> str:
    """Prompt template for delegating rule-to-code translation to an external
    language model. Stored for reference; this toolkit always uses its own
    parser."""
    return (
        resources.files("forest2text")
        .joinpath("assets/translation_prompt.txt")
        .read_text(encoding="utf-8")
    )
