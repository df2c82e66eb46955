#!/usr/bin/env python3
"""Two-pass answer extraction and canonical comparison.

The first decode yields a free-form rationale; the second, short decode is
prompted with question + rationale + an answer trigger and its
continuation is parsed into a canonical value.  This demo exercises the
trigger table and the parsers directly on transcript strings.
"""

from choir.extraction import (
    ANSWER_TRIGGERS,
    AnswerFormat,
    answers_equal,
    build_extraction_prompt,
    parse_answer,
)

print("answer triggers:")
for fmt, trigger in ANSWER_TRIGGERS.items():
    print(f"  {fmt.value:15} {trigger!r}")

prompt = build_extraction_prompt(
    "A wallpaper costs $400 and DIY saves 20%. Total cost?",
    "The savings are 20% of $400 = $80, so the materials cost $400 - $80 = $320.",
    AnswerFormat.ARABIC_NUMBER,
)
print(f"\nextraction prompt:\n{prompt}\n")

continuations = [
    (AnswerFormat.ARABIC_NUMBER, " $320."),
    (AnswerFormat.ARABIC_NUMBER, " 320 + 80 = 400"),
    (AnswerFormat.ARABIC_NUMBER, " roughly 3.5 meters"),
    (AnswerFormat.OPTION_A_E, " (B), clearly."),
    (AnswerFormat.YES_NO, " Yes, it does."),
    (AnswerFormat.FREE_STRING, "  the Eiffel Tower "),
    (AnswerFormat.ARABIC_NUMBER, "no number in sight"),
]
print("parsed continuations:")
for fmt, text in continuations:
    print(f"  {fmt.value:15} {text!r:28} -> {parse_answer(text, fmt)!r}")

print("\ncomparisons:")
print("  320 vs 320.0 (numeric):", answers_equal("320", "320.0", AnswerFormat.ARABIC_NUMBER))
print("  a vs A (option):       ", answers_equal("a", "A", AnswerFormat.OPTION_A_E))
print("  unparsed vs unparsed:  ", answers_equal(None, None, AnswerFormat.ARABIC_NUMBER))
