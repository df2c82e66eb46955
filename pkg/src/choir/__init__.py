"""Collaborative decoding over counterfactual persona streams.

The package fuses several persona-conditioned next-token predictions into
one shared output sequence by weighting each stream's logits with its
agreement with the group's consensus confidence.  It ships the persona
construction utilities, the decoding engine, two-pass answer extraction,
baseline aggregators, an evaluation harness with significance and latency
reporting, and a CLI.
"""

from .backends import (
    Backend,
    BigramBackend,
    InstrumentedBackend,
    RemoteBackend,
    ScriptedBackend,
    VocabInfo,
)
from .engine import (
    DEFAULT_COT_TRIGGER,
    DecodeConfig,
    DecodeResult,
    StepTrace,
    build_prompt,
    choir_decode,
    confidence,
    consensus,
    fuse_logits,
    select_token,
    single_decode,
    softmax,
    weights,
)
from .ensembles import (
    EnsembleResult,
    VoteOutcome,
    choir_with_sc,
    majority_vote,
    run_persona_individual,
    self_consistency,
)
from .errors import (
    BackendError,
    CapacityError,
    ChoirError,
    DecodeError,
    SchemaError,
    TokenOutOfRangeError,
    UnknownStreamError,
)
from .extraction import (
    ANSWER_TRIGGERS,
    AnswerFormat,
    ExtractedAnswer,
    answers_equal,
    build_extraction_prompt,
    extract_answer,
    parse_answer,
    parse_numeric,
)
from .harness import (
    DatasetRecord,
    EvalSettings,
    LatencyReport,
    OverlapReport,
    RunRecord,
    accuracy,
    evaluate,
    lambda_sweep,
    latency_report,
    load_dataset,
    overlap,
    summarize,
)
from .persona import (
    DemographicAttribute,
    InstructionTemplate,
    Persona,
    PersonaGroup,
    PersonaTemplate,
    expand_template,
    instruction_template,
    load_groups,
    load_persona_file,
    render_instruction,
)
from .stats import TTestResult, chi_square_sf, paired_ttest

__version__ = "0.1.0"
