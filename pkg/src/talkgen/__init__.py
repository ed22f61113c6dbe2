"""Multi-party dialogue speech corpus generation and evaluation.

The pipeline pairs a script-writing agent with a speech synthesizer and an
audio critic: the writer drafts a dialogue, the synthesizer voices it, the
critic listens and flags weak utterances, and the writer revises.  Repeating
that loop yields scripts annotated with emphasis, pause, and emotion markup,
plus assembled dialogue audio and a JSONL corpus manifest.
"""

from .audio import (AudioSegment, DialogueAudio, TurnSpan, assemble_dialogue,
                    decode_wav, encode_wav, read_wav, resample)
from .characters import (Character, CharacterPool, Relation, load_pool,
                         pool_to_dict, sample_participants, validate_pool)
from .config import BackendEndpoint, RunConfig, load_config, validate_config
from .dataset import (CorpusStats, DialogueRecord, LanguageStats, Provenance,
                      UtteranceRecord, build_record, compute_stats, load_corpus,
                      render_stats_table, validate_corpus, write_corpus,
                      write_failure_reports)
from .errors import (BackendError, ConfigError, DuplicateDialogueId, EmptyCorpus,
                     EmptyReference, EmptySheet, EmptyVotes, FormatError,
                     InsufficientCharacters, MalformedOutputError, MarkupError,
                     MissingAudio, OutOfRangeScore, ParseError, ResampleError,
                     StageError, TalkgenError, ValidationError, Violation)
from .evaluation import (AggregateScore, PreferenceTally, RatingItem, RatingSheet,
                         TranscriptPair, aggregate, corpus_error_rate,
                         edit_distance, error_rate, normalize_text,
                         preference_tally)
from .orchestrator import (Backends, BatchResult, IterationRecord, PipelineOptions,
                           PipelineRun, PipelineVariant, RetryPolicy, run_batch,
                           run_pipeline, split_seed)
from .script import (DialogueScript, EmphasisSpan, MarkupConfig, ParsedMarkup,
                     PauseToken, PlainText, Utterance, parse_markup,
                     render_markup, strip_markup, validate_script)

__version__ = "0.1.0"

__all__ = [
    "AggregateScore", "AudioSegment", "BackendEndpoint", "BackendError",
    "Backends", "BatchResult", "Character", "CharacterPool", "ConfigError",
    "CorpusStats", "DialogueAudio", "DialogueRecord", "DialogueScript",
    "DuplicateDialogueId", "EmphasisSpan", "EmptyCorpus", "EmptyReference",
    "EmptySheet", "EmptyVotes", "FormatError", "InsufficientCharacters",
    "IterationRecord", "LanguageStats", "MalformedOutputError", "MarkupConfig",
    "MarkupError", "MissingAudio", "OutOfRangeScore", "ParseError",
    "ParsedMarkup", "PauseToken", "PipelineOptions", "PipelineRun",
    "PipelineVariant", "PlainText", "PreferenceTally", "Provenance",
    "RatingItem", "RatingSheet", "Relation", "ResampleError", "RetryPolicy",
    "RunConfig", "StageError", "TalkgenError", "TranscriptPair", "TurnSpan",
    "Utterance", "UtteranceRecord", "ValidationError", "Violation",
    "aggregate", "assemble_dialogue", "build_record", "compute_stats",
    "corpus_error_rate", "decode_wav", "edit_distance", "encode_wav",
    "error_rate", "load_config", "load_corpus", "load_pool", "normalize_text",
    "parse_markup", "pool_to_dict", "preference_tally", "read_wav",
    "render_markup", "render_stats_table", "resample", "run_batch",
    "run_pipeline", "sample_participants", "split_seed", "strip_markup",
    "validate_config", "validate_corpus", "validate_pool", "validate_script",
    "write_corpus", "write_failure_reports", "__version__",
]
