"""Concept rules: the regular-expression patterns behind extraction.

Patterns use a restricted dialect: literal text, alternation, grouping,
optional and bounded repetition, the \\s and \\S classes, character
classes, and word-boundary anchors, matched case-insensitively.
Backreferences and lookaround are rejected so every pattern stays
simple enough to audit and cheap to run.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from ._jsonl import InputFormatError, read_records, require_field


class ConceptCategory(Enum):
    """The sleep concepts a rule can assert about a document."""

    SNORING = "snoring"
    NAPPING = "napping"
    SLEEP_PROBLEM = "sleep_problem"
    BAD_SLEEP_QUALITY = "bad_sleep_quality"
    DAYTIME_SLEEPINESS = "daytime_sleepiness"
    NIGHT_WAKINGS = "night_wakings"
    SLEEP_DURATION = "sleep_duration"


# The six yes/no concepts; sleep duration carries a class instead.
BINARY_CONCEPTS: tuple[ConceptCategory, ...] = tuple(
    c for c in ConceptCategory if c is not ConceptCategory.SLEEP_DURATION
)

CONCEPT_ORDER = {concept: index for index, concept in enumerate(ConceptCategory)}


class DurationClass(Enum):
    """Nightly sleep duration bands: short (<=6h), medium (6-8h), long (>=8h)."""

    SHORT = "short"
    MEDIUM = "medium"
    LONG = "long"


@dataclass(frozen=True)
class Rule:
    """One extraction pattern tied to a concept.

    duration_class is set exactly when the concept is SLEEP_DURATION.
    negation_exempt marks patterns that embed their own negation
    ("no sleep") and must not be flipped by a preceding cue.
    """

    concept: ConceptCategory
    pattern: str
    duration_class: DurationClass | None = None
    negation_exempt: bool = False


class RuleCompileError(ValueError):
    """A rule's pattern is invalid or uses a disallowed construct."""


# Constructs outside the dialect: backreferences and any "(?" extension
# (lookaround, inline flags, named groups).
_BACKREFERENCE_RE = re.compile(r"\\[1-9]")
_EXTENSION_RE = re.compile(r"\(\?")


@dataclass(frozen=True)
class CompiledRule:
    rule: Rule
    regex: re.Pattern[str]

    @property
    def concept(self) -> ConceptCategory:
        return self.rule.concept

    @property
    def duration_class(self) -> DurationClass | None:
        return self.rule.duration_class

    @property
    def negation_exempt(self) -> bool:
        return self.rule.negation_exempt


class RuleSet:
    """Compiled rules in definition order.

    Order matters: when two rules of the same concept match an identical
    span, the earlier rule wins. The default set lists short-duration
    patterns before long before medium so the tighter class takes the span.
    """

    def __init__(self, compiled: Sequence[CompiledRule]):
        self.rules = tuple(compiled)

    def __iter__(self):
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)


def compile_rules(rules: Iterable[Rule]) -> RuleSet:
    """Validate and compile rules, reporting the offending rule on error."""
    compiled = []
    for index, rule in enumerate(rules):
        label = f"rule {index} ({rule.concept.value}: {rule.pattern!r})"
        if (rule.concept is ConceptCategory.SLEEP_DURATION) != (rule.duration_class is not None):
            raise RuleCompileError(
                f"{label}: duration_class must be set exactly for sleep_duration rules"
            )
        if _BACKREFERENCE_RE.search(rule.pattern):
            raise RuleCompileError(f"{label}: backreferences are not allowed")
        if _EXTENSION_RE.search(rule.pattern):
            raise RuleCompileError(f"{label}: '(?' constructs are not allowed")
        try:
            regex = re.compile(rule.pattern, re.IGNORECASE)
        except re.error as exc:
            raise RuleCompileError(f"{label}: {exc}") from exc
        compiled.append(CompiledRule(rule, regex))
    return RuleSet(compiled)


def _snoring() -> list[Rule]:
    c = ConceptCategory.SNORING
    return [
        Rule(c, r"\bsnor(es|ing|e)?\b"),
        Rule(c, r"\bsnorings\b"),
        Rule(c, r"\bsleep apnea\b"),
        Rule(c, r"\bosa\b"),
        Rule(c, r"\bobstructive sleep apnea\b"),
    ]


def _napping() -> list[Rule]:
    c = ConceptCategory.NAPPING
    return [
        Rule(c, r"\bnap(s|ping)?\b"),
        Rule(c, r"\bdoz(es|ing|e)?\b"),
    ]


def _sleep_problem() -> list[Rule]:
    c = ConceptCategory.SLEEP_PROBLEM
    return [
        Rule(c, r"\binsomnia\b"),
        Rule(c, r"\bsleeplessness\b", negation_exempt=True),
        Rule(c, r"\bsleep (disorders?|problems?)\b"),
        Rule(c, r"\bhypersomnia\b"),
        Rule(c, r"\bparasomnia\b"),
        Rule(c, r"\bosa\b"),
        Rule(c, r"\bobstructive sleep apnea\b"),
        Rule(c, r"\bsleep apnea\b"),
        Rule(c, r"\bhypersomnolence\b"),
    ]


def _bad_sleep_quality() -> list[Rule]:
    c = ConceptCategory.BAD_SLEEP_QUALITY
    return [
        Rule(c, r"\bstaying up\b"),
        Rule(c, r"\b(trouble|irritable|tense) (\S+\s+){0,5}(sleep(ing)?|asleep)\b"),
        Rule(c, r"\bsleep(s|ing)? poorly\b"),
        Rule(c, r"\bsleep is poor\b"),
        Rule(c, r"\brestless sleep\b"),
        Rule(c, r"\bca(n't|nnot) sleep\b", negation_exempt=True),
        Rule(c, r"\bcould(n't| not) sleep\b", negation_exempt=True),
        Rule(c, r"\bsleep issues?\b"),
        Rule(c, r"\bsleep(ing)? (\S+\s+){0,5}(problems?|problematic)\b"),
        Rule(c, r"\bsleeps? a lot\b"),
        Rule(c, r"\bdifficulty (\S+\s+){0,5}(asleep|sleep(ing)?)\b"),
        Rule(c, r"\bsleep disturbance\b"),
        Rule(c, r"\bdisturbance in sleep\b"),
        Rule(c, r"\bsleep quality: (fair|bad)\b"),
        Rule(c, r"\bnot sleeping\b", negation_exempt=True),
        Rule(c, r"\bno sleep\b", negation_exempt=True),
        Rule(c, r"\bsleeplessness\b", negation_exempt=True),
        Rule(c, r"\bsleep difficulty\b"),
        Rule(c, r"\bnocturnal agitation\b"),
        Rule(c, r"\bup (during|at) night\b"),
        Rule(c, r"\bnocturnal\b"),
        Rule(c, r"\boften awake\b"),
    ]


def _daytime_sleepiness() -> list[Rule]:
    c = ConceptCategory.DAYTIME_SLEEPINESS
    return [
        Rule(c, r"\b(excessive )?daytime sleep(iness|inesses)?\b"),
        Rule(c, r"\b(excessive )?daytime somnolence\b"),
        Rule(c, r"\bsleep(s|ing|iness)? at times\b"),
        Rule(c, r"\bsleep(s|iness)? in (\S+\s+){0,2}day(time)?\b"),
        Rule(c, r"\bsleep(s|iness)? during (\S+\s+){0,2}day(time)?\b"),
        Rule(c, r"\bsleep all day\b"),
        Rule(c, r"\bsleeps? a lot (\S+\s+){0,5}day(time)?\b"),
    ]


def _night_wakings() -> list[Rule]:
    c = ConceptCategory.NIGHT_WAKINGS
    return [
        Rule(c, r"\bnight (wakings?|awakenings?)\b"),
        Rule(c, r"\bwak(e|es|ing up) (\S+\s+){0,5}night\b"),
        Rule(c, r"\bawake(ning|n)? (from|during|at) night(mares)?\b"),
    ]


def _sleep_duration() -> list[Rule]:
    c = ConceptCategory.SLEEP_DURATION
    short = DurationClass.SHORT
    long_ = DurationClass.LONG
    medium = DurationClass.MEDIUM
    # Order encodes precedence on identical spans: short, long, medium.
    return [
        Rule(c, r"\bsleep(s|ing)? (less than|up to) (1|2|3|4|5|6) hours\b", short),
        Rule(c, r"\bsleep(s|ing)?\s+(\S+\s+){0,5}[1-6]-[1-6]\s+hours\b", short),
        Rule(
            c,
            r"\bsleep(s|ing)? (\S+\s+){0,5}more than (8|9|10|11|12|13|14|15|16|17|18|19|20) hours\b",
            long_,
        ),
        Rule(
            c,
            r"\bsleep(s|ing)? (\S+\s+){0,5}(8|9|10|11|12)-(8|10|11|12|13|14|15|16|17|18|19|20) hours\b",
            long_,
        ),
        Rule(c, r"\bsleep(s|ing)? (\S+\s+){0,5}(6|7|8)-(6|7|8) hours\b", medium),
    ]


DEFAULT_RULES: tuple[Rule, ...] = tuple(
    _snoring()
    + _napping()
    + _sleep_problem()
    + _bad_sleep_quality()
    + _daytime_sleepiness()
    + _night_wakings()
    + _sleep_duration()
)

_DEFAULT_RULESET: RuleSet | None = None


def default_ruleset() -> RuleSet:
    """The built-in rules, compiled once."""
    global _DEFAULT_RULESET
    if _DEFAULT_RULESET is None:
        _DEFAULT_RULESET = compile_rules(DEFAULT_RULES)
    return _DEFAULT_RULESET


def load_rules(path: str | Path) -> list[Rule]:
    """Read rules from a JSONL file.

    Fields: concept, pattern, optional duration_class, optional
    negation_exempt (default false).
    """
    rules = []
    for line_no, record in read_records(path):
        concept_name = require_field(record, "concept", path, line_no)
        pattern = require_field(record, "pattern", path, line_no)
        try:
            concept = ConceptCategory(concept_name)
        except ValueError:
            raise InputFormatError(path, line_no, f"unknown concept {concept_name!r}") from None
        duration_raw = record.get("duration_class")
        duration = None
        if duration_raw is not None:
            try:
                duration = DurationClass(duration_raw)
            except ValueError:
                raise InputFormatError(
                    path, line_no, f"unknown duration_class {duration_raw!r}"
                ) from None
        exempt = record.get("negation_exempt", False)
        if not isinstance(exempt, bool):
            raise InputFormatError(path, line_no, "negation_exempt must be a boolean")
        if not isinstance(pattern, str):
            raise InputFormatError(path, line_no, "pattern must be a string")
        rules.append(Rule(concept, pattern, duration, exempt))
    return rules


def save_rules(path: str | Path, rules: Iterable[Rule]) -> int:
    """Write rules as JSONL; the inverse of load_rules."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for rule in rules:
            record: dict[str, object] = {"concept": rule.concept.value, "pattern": rule.pattern}
            if rule.duration_class is not None:
                record["duration_class"] = rule.duration_class.value
            if rule.negation_exempt:
                record["negation_exempt"] = True
            handle.write(json.dumps(record, ensure_ascii=True))
            handle.write("\n")
            count += 1
    return count
