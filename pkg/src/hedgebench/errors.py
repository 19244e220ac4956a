"""Exception hierarchy with machine-parseable error classes.

Every exception carries an ``error_class`` dotted tag so the CLI can emit a
single stable line (``<class>: <message>``) on failure.
"""

from __future__ import annotations


class HedgebenchError(Exception):
    """Base for all package errors."""

    error_class = "error"

    def cli_line(self) -> str:
        return f"{self.error_class}: {self}"


class InputError(HedgebenchError):
    error_class = "input.invalid"


class ConfigError(HedgebenchError):
    error_class = "config.invalid"


class UnknownMethodError(ConfigError):
    error_class = "config.unknown_method"


class UnknownModelError(ConfigError):
    error_class = "config.unknown_model"


class GenerationParseError(HedgebenchError):
    """Malformed numbered-list generation output; raw text preserved."""

    error_class = "parse.generation"

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class MappingError(HedgebenchError):
    """Judge output could not be turned into a confidence score."""

    error_class = "parse.mapping"


class TransportError(HedgebenchError):
    error_class = "gateway.transport"


class CapabilityError(HedgebenchError):
    error_class = "gateway.capability"


class MetricUndefinedError(HedgebenchError):
    error_class = "metric.undefined"


class LeakageError(HedgebenchError):
    """Training text collides with an evaluation text."""

    error_class = "mapper.leakage"

    def __init__(self, offenders: list[str]):
        preview = "; ".join(repr(t[:60]) for t in offenders[:5])
        super().__init__(
            f"{len(offenders)} training text(s) appear in the evaluation set: {preview}"
        )
        self.offenders = offenders


class InsufficientSentencesError(HedgebenchError):
    error_class = "sft.insufficient_sentences"

    def __init__(self, question_id: str, level: str, have: int, need: int):
        super().__init__(
            f"question {question_id!r} needs {need} sentences at level "
            f"{level!r} but the database holds {have}"
        )
        self.question_id = question_id
        self.level = level
        self.have = have
        self.need = need
