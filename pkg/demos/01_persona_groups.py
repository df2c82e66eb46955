#!/usr/bin/env python3
"""Counterfactual persona groups and instruction rendering.

Loads the bundled demographic persona sets, expands each template into a
group (base persona first, counterfactual variants after), and renders the
persona-conditioned instructions that become the decoding streams.
"""

from choir.persona import (
    bundled_data_path,
    expand_template,
    instruction_template,
    load_persona_file,
    render_instruction,
)

templates = load_persona_file(bundled_data_path("personas_demographics.jsonl"))
print(f"{len(templates)} bundled demographic templates\n")

for template in templates:
    group = expand_template(template)
    print(f"[{group.attribute}] {group.group_id}")
    print(f"  terms: {', '.join(template.attribute.terms)}")
    print(f"  base persona ({group.base.term}): {group.base.text}")
    for persona in group.counterfactuals:
        print(f"  counterfactual ({persona.term}): {persona.text}")
    print()

# Each persona slots into an instruction pattern; two patterns ship built in.
group = expand_template(templates[0])
for instruction_id in ("1", "2"):
    instruction = instruction_template(instruction_id)
    print(f"instruction {instruction_id}: {render_instruction(group.base, instruction)}")
