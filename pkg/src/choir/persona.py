"""Counterfactual persona groups and persona-conditioned instruction prompts.

A demographic attribute carries an ordered list of terms (``his``/``her``/
``their``, ``old``/``young``, ...).  A persona template stores one fully
expanded persona description per term; expanding it yields a group whose
base persona is the first term's variant and whose counterfactuals are the
remaining variants, differing from the base only in demographic wording.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .errors import SchemaError

PERSONA_PLACEHOLDER = "{persona}"

# Built-in instruction patterns; "1" is the default used throughout.
DEFAULT_INSTRUCTIONS: dict[str, str] = {
    "1": "You are {persona}. Your responses should closely mirror the knowledge and abilities of this persona.",
    "2": "Adopt the identity of {persona}. Answer the questions while staying in strict accordance with the nature of this identity.",
}
DEFAULT_INSTRUCTION_ID = "1"


@dataclass(frozen=True)
class DemographicAttribute:
    """A named attribute with its ordered demographic terms."""

    name: str
    terms: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.name:
            raise SchemaError("attribute name must be non-empty")
        if not self.terms:
            raise SchemaError(f"attribute {self.name!r} has no terms")
        seen = set()
        for term in self.terms:
            if term in seen:
                raise SchemaError(f"attribute {self.name!r} lists term {term!r} more than once")
            seen.add(term)


@dataclass(frozen=True)
class Persona:
    """One persona description tied to a demographic term within a group."""

    text: str
    attribute: str
    term: str
    group_id: str

    def __post_init__(self):
        if not self.text:
            raise SchemaError(f"persona for term {self.term!r} in group {self.group_id!r} has empty text")


@dataclass(frozen=True)
class PersonaGroup:
    """A base persona plus its counterfactual variants for one attribute."""

    base: Persona
    counterfactuals: tuple[Persona, ...]

    def __post_init__(self):
        object.__setattr__(self, "counterfactuals", tuple(self.counterfactuals))
        if not self.counterfactuals:
            raise SchemaError(
                f"group {self.base.group_id!r} needs at least one counterfactual persona"
            )
        terms = set()
        for member in self.members:
            if member.group_id != self.base.group_id or member.attribute != self.base.attribute:
                raise SchemaError(
                    f"group {self.base.group_id!r} mixes group ids or attributes across members"
                )
            if member.term in terms:
                raise SchemaError(
                    f"group {self.base.group_id!r} has two personas for term {member.term!r}"
                )
            terms.add(member.term)

    @property
    def members(self) -> tuple[Persona, ...]:
        return (self.base, *self.counterfactuals)

    @property
    def group_id(self) -> str:
        return self.base.group_id

    @property
    def attribute(self) -> str:
        return self.base.attribute


@dataclass(frozen=True)
class PersonaTemplate:
    """Per-term persona texts for one attribute, ready to expand into a group.

    Variants are stored fully expanded per term; no article or agreement
    rewriting happens at expansion time.  The contract that variants differ
    only in demographic wording is the file author's responsibility.
    """

    id: str
    attribute: DemographicAttribute
    variants: Mapping[str, str]
    instruction_id: str = DEFAULT_INSTRUCTION_ID

    def __post_init__(self):
        object.__setattr__(self, "variants", dict(self.variants))
        if not self.id:
            raise SchemaError("persona template id must be non-empty")
        for term in self.attribute.terms:
            if term not in self.variants:
                raise SchemaError(
                    f"template {self.id!r} is missing the variant for term {term!r}"
                )
            if not self.variants[term]:
                raise SchemaError(f"template {self.id!r} has an empty variant for term {term!r}")
        extra = set(self.variants) - set(self.attribute.terms)
        if extra:
            raise SchemaError(
                f"template {self.id!r} has variants for unknown terms: {sorted(extra)}"
            )


@dataclass(frozen=True)
class InstructionTemplate:
    """An instruction pattern with exactly one persona placeholder."""

    id: str
    pattern: str

    def __post_init__(self):
        count = self.pattern.count(PERSONA_PLACEHOLDER)
        if count != 1:
            raise SchemaError(
                f"instruction {self.id!r} must contain {PERSONA_PLACEHOLDER!r} exactly once, found {count}"
            )


def instruction_template(instruction_id: str = DEFAULT_INSTRUCTION_ID) -> InstructionTemplate:
    """Return a built-in instruction template by id."""
    try:
        pattern = DEFAULT_INSTRUCTIONS[instruction_id]
    except KeyError:
        raise SchemaError(
            f"unknown instruction id {instruction_id!r}; built-ins: {sorted(DEFAULT_INSTRUCTIONS)}"
        ) from None
    return InstructionTemplate(id=instruction_id, pattern=pattern)


def expand_template(template: PersonaTemplate) -> PersonaGroup:
    """Expand a template into a persona group, base first, in term order."""
    personas = [
        Persona(
            text=template.variants[term],
            attribute=template.attribute.name,
            term=term,
            group_id=template.id,
        )
        for term in template.attribute.terms
    ]
    return PersonaGroup(base=personas[0], counterfactuals=tuple(personas[1:]))


def render_instruction(persona: Persona, instruction: InstructionTemplate) -> str:
    """Substitute the persona text into the instruction pattern."""
    return instruction.pattern.replace(PERSONA_PLACEHOLDER, persona.text)


def _template_from_record(record: Mapping, *, path: str | None = None, line: int | None = None) -> PersonaTemplate:
    try:
        attribute = record["attribute"]
        attr = DemographicAttribute(name=attribute["name"], terms=tuple(attribute["terms"]))
        return PersonaTemplate(
            id=record["group_id"],
            attribute=attr,
            variants=dict(record["variants"]),
            instruction_id=record.get("instruction_id", DEFAULT_INSTRUCTION_ID),
        )
    except KeyError as exc:
        raise SchemaError(f"missing field {exc.args[0]!r}", path=path, line=line) from None
    except SchemaError as exc:
        raise SchemaError(str(exc), path=path, line=line) from None


def load_persona_file(path: str | Path) -> list[PersonaTemplate]:
    """Load persona templates from a UTF-8 JSONL file, in file order."""
    path = Path(path)
    templates: list[PersonaTemplate] = []
    seen_ids: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", path=str(path), line=lineno) from None
            template = _template_from_record(record, path=str(path), line=lineno)
            if template.id in seen_ids:
                raise SchemaError(f"duplicate group id {template.id!r}", path=str(path), line=lineno)
            seen_ids.add(template.id)
            templates.append(template)
    return templates


def dump_persona_file(templates: Iterable[PersonaTemplate], path: str | Path) -> None:
    """Write persona templates to JSONL; inverse of :func:`load_persona_file`."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for template in templates:
            record = {
                "group_id": template.id,
                "attribute": {
                    "name": template.attribute.name,
                    "terms": list(template.attribute.terms),
                },
                "variants": dict(template.variants),
                "instruction_id": template.instruction_id,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def bundled_data_path(name: str) -> Path:
    """Path of a data file shipped with the package (persona sets, prompts)."""
    return Path(str(resources.files("choir").joinpath("data", name)))


def load_groups(path: str | Path, attribute: str | None = None) -> list[PersonaGroup]:
    """Load and expand persona templates, optionally filtered by attribute name."""
    groups = [expand_template(t) for t in load_persona_file(path)]
    if attribute is not None:
        groups = [g for g in groups if g.attribute == attribute]
    return groups
