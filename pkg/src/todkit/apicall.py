"""Parser and canonical serializer for the APICall surface form.

The canonical form is::

    ApiCall(method='ReserveRestaurant', parameters={'date': '2019-03-11', 'time': '11:30'})

Model output in the wild is irregular, so parsing is a small recursive
descent over characters instead of regular expressions (regexes cannot keep
quoted commas apart from pair separators). The accepted variation is a fixed
tolerance matrix:

  - keyword: any casing of "apicall" followed by "(" (word-delimited);
  - "method" / "parameters" keywords: any casing, "=" or ":" separators;
  - values and names: bare tokens, or quoted with single/double/backtick
    quotes (backslash escapes the next character; commas are literal inside
    quotes);
  - the parameter list may be brace-delimited, unbraced, or carry one stray
    unbalanced brace;
  - prose before the keyword and after the closing ")" is ignored when
    exactly one call is present.

Anything beyond that matrix is MALFORMED, never silently guessed. Two or
more call keywords in one string are MALFORMED as well. All functions are
pure and total: no input raises.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Optional

_QUOTES = "'\"`"
_CALL_START = re.compile(r"\bapicall\s*\(", re.IGNORECASE)


def normalize_name(name: str) -> str:
    """Case-fold and trim, the normalization used for name comparisons."""
    return name.strip().casefold()


@dataclass(frozen=True)
class ApiCall:
    """A method name plus ordered (slot name, slot value) pairs."""

    method: str
    params: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.method:
            raise ValueError("method must be non-empty")
        seen: dict[str, str] = {}
        for name, _ in self.params:
            if not name:
                raise ValueError("parameter names must be non-empty")
            key = normalize_name(name)
            if key in seen:
                raise ValueError(f"duplicate parameter name {name!r}")
            seen[key] = name

    def param_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.params)


class ParseStatus(enum.Enum):
    PARSED = "PARSED"
    NOT_AN_APICALL = "NOT_AN_APICALL"
    MALFORMED = "MALFORMED"


@dataclass(frozen=True)
class ParseOutcome:
    status: ParseStatus
    call: Optional[ApiCall] = None
    diagnostic: str = ""

    def __post_init__(self):
        if (self.status is ParseStatus.PARSED) != (self.call is not None):
            raise ValueError("call must be present exactly when status is PARSED")


class _Malformed(Exception):
    pass


class _Scanner:
    """Character cursor with the few token reads the grammar needs."""

    def __init__(self, text: str, pos: int):
        self.text = text
        self.pos = pos

    def eof(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self) -> str:
        return "" if self.eof() else self.text[self.pos]

    def skip_ws(self) -> None:
        while not self.eof() and self.text[self.pos].isspace():
            self.pos += 1

    def expect(self, char: str, context: str) -> None:
        if self.peek() != char:
            found = repr(self.peek()) if not self.eof() else "end of input"
            raise _Malformed(f"expected {char!r} {context}, found {found}")
        self.pos += 1

    def take_keyword(self, word: str) -> None:
        end = self.pos + len(word)
        if self.text[self.pos : end].lower() != word:
            snippet = self.text[self.pos : self.pos + 12]
            raise _Malformed(f"expected keyword {word!r}, found {snippet!r}")
        self.pos = end

    def take_separator(self, context: str) -> None:
        # peek() is "" at EOF; "in" on the empty string would be vacuously true
        if not self.eof() and self.peek() in "=:":
            self.pos += 1
        else:
            raise _Malformed(f"expected '=' or ':' {context}, found {self.peek()!r}")

    def take_quoted(self) -> str:
        quote = self.text[self.pos]
        self.pos += 1
        out: list[str] = []
        while True:
            if self.eof():
                raise _Malformed(f"unterminated {quote} quote")
            ch = self.text[self.pos]
            self.pos += 1
            if ch == "\\":
                if self.eof():
                    raise _Malformed("dangling backslash inside quotes")
                out.append(self.text[self.pos])
                self.pos += 1
            elif ch == quote:
                return "".join(out)
            else:
                out.append(ch)

    def take_bare(self, terminators: str, context: str) -> str:
        start = self.pos
        while not self.eof() and self.text[self.pos] not in terminators:
            self.pos += 1
        if self.eof():
            raise _Malformed(f"ran off the end reading {context}")
        return self.text[start : self.pos].strip()


def _parse_token(scanner: _Scanner, terminators: str, context: str) -> str:
    if not scanner.eof() and scanner.peek() in _QUOTES:
        return scanner.take_quoted()
    return scanner.take_bare(terminators, context)


def _parse_body(scanner: _Scanner) -> ApiCall:
    """Parse everything after the opening parenthesis."""
    scanner.skip_ws()
    scanner.take_keyword("method")
    scanner.skip_ws()
    scanner.take_separator("after 'method'")
    scanner.skip_ws()
    method = _parse_token(scanner, ",)", "the method name")
    if not method:
        raise _Malformed("empty method name")

    scanner.skip_ws()
    scanner.expect(",", "between method and parameters")
    scanner.skip_ws()
    scanner.take_keyword("parameters")
    scanner.skip_ws()
    scanner.take_separator("after 'parameters'")
    scanner.skip_ws()
    if scanner.peek() == "{":
        scanner.pos += 1
        scanner.skip_ws()

    params: list[tuple[str, str]] = []
    seen: set[str] = set()
    while not scanner.eof() and scanner.peek() not in "})":
        name = _parse_token(scanner, "=:", "a parameter name")
        if not name:
            raise _Malformed("empty parameter name")
        scanner.skip_ws()
        scanner.take_separator(f"after parameter name {name!r}")
        scanner.skip_ws()
        value = _parse_token(scanner, ",})", f"the value of {name!r}")
        key = normalize_name(name)
        if key in seen:
            raise _Malformed(f"duplicate parameter name {name!r}")
        seen.add(key)
        params.append((name, value))
        scanner.skip_ws()
        if scanner.peek() == ",":
            scanner.pos += 1
            scanner.skip_ws()
        elif scanner.eof() or scanner.peek() not in "})":
            found = repr(scanner.peek()) if not scanner.eof() else "end of input"
            raise _Malformed(f"expected ',', '}}' or ')' after the value of {name!r}, found {found}")

    if scanner.peek() == "}":
        # Closing or stray brace; either way the ")" must follow.
        scanner.pos += 1
        scanner.skip_ws()
    scanner.expect(")", "to close the call")
    return ApiCall(method=method, params=tuple(params))


def parse_apicall(text: str) -> ParseOutcome:
    """Parse one APICall out of ``text``, tolerating surrounding prose.

    Returns NOT_AN_APICALL when no call keyword followed by "(" exists,
    MALFORMED when the keyword is there but the body breaks the grammar, and
    PARSED with the call otherwise. Never raises.
    """
    starts = list(_CALL_START.finditer(text))
    if not starts:
        return ParseOutcome(ParseStatus.NOT_AN_APICALL, diagnostic="no ApiCall keyword with '('")
    if len(starts) > 1:
        return ParseOutcome(
            ParseStatus.MALFORMED,
            diagnostic=f"{len(starts)} ApiCall keywords in one prediction; expected exactly one",
        )
    scanner = _Scanner(text, starts[0].end())
    try:
        call = _parse_body(scanner)
    except (_Malformed, ValueError) as exc:
        return ParseOutcome(ParseStatus.MALFORMED, diagnostic=str(exc))
    return ParseOutcome(ParseStatus.PARSED, call=call)


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("'", "\\'")


def serialize_apicall(call: ApiCall) -> str:
    """Render ``call`` in canonical single-quoted form.

    The output always re-parses to an equal ApiCall: internal quotes and
    backslashes are backslash-escaped, parameter order is preserved.
    """
    rendered = ", ".join(f"'{_escape(name)}': '{_escape(value)}'" for name, value in call.params)
    return f"ApiCall(method='{_escape(call.method)}', parameters={{{rendered}}})"
