"""Two-pass answer extraction: trigger-augmented prompt, short decode, parse.

The first decode produces a free-form rationale; this module builds the
follow-up prompt (question, rationale, answer trigger), runs a short greedy
decode, and parses the continuation into a canonical comparable value.
Canonical values are strings: integers without a decimal point, decimals
as written, option letters uppercased, yes/no lowercased.  ``None`` marks
an unparseable answer and compares unequal to everything, itself included.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum

from .backends.base import Backend
from .engine import DecodeConfig, single_decode


class AnswerFormat(Enum):
    ARABIC_NUMBER = "arabic_number"
    OPTION_A_E = "option_a_e"
    OPTION_A_C = "option_a_c"
    YES_NO = "yes_no"
    FREE_STRING = "free_string"


# Default trigger per format; overridable through the ``triggers`` argument.
ANSWER_TRIGGERS: dict[AnswerFormat, str] = {
    AnswerFormat.ARABIC_NUMBER: "Therefore, the answer (arabic numerals) is",
    AnswerFormat.OPTION_A_E: "Therefore, among A through E, the answer is",
    AnswerFormat.OPTION_A_C: "Therefore, among A through C, the answer is",
    AnswerFormat.YES_NO: "Therefore, the answer (Yes or No) is",
    AnswerFormat.FREE_STRING: "Therefore, the final answer is",
}

DEFAULT_EXTRACTION_MAX_TOKENS = 32

_NUMBER_RE = re.compile(r"[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?")
_YES_NO_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


@dataclass(frozen=True)
class ExtractedAnswer:
    raw: str
    canonical: str | None

    @property
    def unparsed(self) -> bool:
        return self.canonical is None


def parse_numeric(text: str) -> str | None:
    """Last numeric literal in the text, canonicalized.

    Thousands separators are stripped, currency symbols and trailing
    punctuation never match, integer-valued numbers lose the decimal point.
    """
    matches = _NUMBER_RE.findall(text)
    if not matches:
        return None
    value = float(matches[-1].replace(",", ""))
    if value.is_integer():
        return str(int(value))
    return repr(value)


def _parse_option(text: str, last_letter: str) -> str | None:
    pattern = re.compile(rf"\b([A-{last_letter}a-{last_letter.lower()}])\b")
    match = pattern.search(text)
    return match.group(1).upper() if match else None


def parse_answer(text: str, fmt: AnswerFormat) -> str | None:
    """Parse a raw continuation into the format's canonical value."""
    if fmt is AnswerFormat.ARABIC_NUMBER:
        return parse_numeric(text)
    if fmt is AnswerFormat.OPTION_A_E:
        return _parse_option(text, "E")
    if fmt is AnswerFormat.OPTION_A_C:
        return _parse_option(text, "C")
    if fmt is AnswerFormat.YES_NO:
        match = _YES_NO_RE.search(text)
        return match.group(1).lower() if match else None
    stripped = text.strip()
    return stripped if stripped else None


def answers_equal(a: str | None, b: str | None, fmt: AnswerFormat) -> bool:
    """Compare canonical answers; unparsed (None) never equals anything."""
    if a is None or b is None:
        return False
    if fmt is AnswerFormat.ARABIC_NUMBER:
        try:
            x, y = float(a), float(b)
        except ValueError:
            return False
        return abs(x - y) <= max(1e-9, 1e-6 * max(abs(x), abs(y)))
    if fmt in (AnswerFormat.OPTION_A_E, AnswerFormat.OPTION_A_C, AnswerFormat.YES_NO):
        return a.casefold() == b.casefold()
    return a.strip() == b.strip()


def build_extraction_prompt(
    question: str,
    rationale: str,
    fmt: AnswerFormat,
    triggers: dict[AnswerFormat, str] | None = None,
) -> str:
    """Question, rationale and answer trigger joined by newlines."""
    trigger = (triggers or ANSWER_TRIGGERS)[fmt]
    return f"{question}\n{rationale}\n{trigger}"


def extract_answer(
    backend: Backend,
    question: str,
    rationale: str,
    fmt: AnswerFormat,
    config: DecodeConfig,
    *,
    max_tokens: int = DEFAULT_EXTRACTION_MAX_TOKENS,
    triggers: dict[AnswerFormat, str] | None = None,
) -> ExtractedAnswer:
    """Run the second, short greedy decode and parse its continuation."""
    prompt = build_extraction_prompt(question, rationale, fmt, triggers)
    short = replace(config, max_len=max_tokens, temperature=0.0)
    result = single_decode(backend, prompt, short)
    return ExtractedAnswer(raw=result.text, canonical=parse_answer(result.text, fmt))
