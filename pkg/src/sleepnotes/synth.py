"""Synthetic note corpus with known ground truth.

Documents are assembled from a curated template catalog: plant sentences
that produce known concept mentions, distractor sentences that contain
sleep keywords in non-sleep contexts, and neutral filler. Every generated
bundle is self-checked: gold labels declared by the templates must equal
what the rule engine extracts, every gold document must be retrievable,
and duplicate pairs must actually exceed the dedup threshold.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import ClinicalDocument, RawNoteLine, cosine_similarity, term_vector
from .evaluation import GoldRecord, write_gold
from .extract import Assertion, DocumentLabels, label_document
from .retrieval import KeywordLexicon, is_relevant, match_keywords
from .rules import BINARY_CONCEPTS, ConceptCategory, DurationClass

# One intended mention: concept, assertion, and duration class if any.
Effect = tuple[ConceptCategory, Assertion, DurationClass | None]


@dataclass(frozen=True)
class PlantTemplate:
    """A sentence with declared extraction effects.

    ``countable`` templates touch exactly one concept and are the pool the
    generator draws from when hitting configured label counts. The rest
    (multi-concept sentences, regression sentences) are fixture material.
    """

    family: str
    text: str
    effects: tuple[Effect, ...]
    countable: bool = True


def _one(concept: ConceptCategory, assertion: Assertion, duration: DurationClass | None = None):
    return ((concept, assertion, duration),)


_SNO = ConceptCategory.SNORING
_NAP = ConceptCategory.NAPPING
_PRB = ConceptCategory.SLEEP_PROBLEM
_BSQ = ConceptCategory.BAD_SLEEP_QUALITY
_DTS = ConceptCategory.DAYTIME_SLEEPINESS
_NWK = ConceptCategory.NIGHT_WAKINGS
_DUR = ConceptCategory.SLEEP_DURATION
_POS = Assertion.POSITIVE
_NEG = Assertion.NEGATED
_HYP = Assertion.HYPOTHETICAL

CATALOG: tuple[PlantTemplate, ...] = (
    # --- snoring -----------------------------------------------------------
    PlantTemplate("snoring/word", "Patient snores loudly at night per spouse.", _one(_SNO, _POS)),
    PlantTemplate("snoring/word", "Loud snoring was reported by the family.", _one(_SNO, _POS)),
    PlantTemplate("snoring/word", "She tends to snore when supine.", _one(_SNO, _POS)),
    PlantTemplate(
        "snoring/snorings", "Frequent snorings during sleep were documented.", _one(_SNO, _POS)
    ),
    PlantTemplate(
        "snoring/denied", "Patient denies snoring at night.", _one(_SNO, _NEG)
    ),
    PlantTemplate("snoring/denied", "Spouse reports no snoring recently.", _one(_SNO, _NEG)),
    PlantTemplate("snoring/denied", "She does not snore per her husband.", _one(_SNO, _NEG)),
    PlantTemplate(
        "snoring/denied", "He never snores according to his roommate.", _one(_SNO, _NEG)
    ),
    PlantTemplate(
        "snoring/denied", "Patient denied snoring when asked directly.", _one(_SNO, _NEG)
    ),
    PlantTemplate(
        "snoring/hypothetical", "Recommend evaluation if snoring develops.", _one(_SNO, _HYP)
    ),
    PlantTemplate(
        "snoring/hypothetical", "Consider CPAP titration for snoring issues.", _one(_SNO, _HYP)
    ),
    PlantTemplate(
        "snoring/hypothetical", "Monitor for snoring at future visits.", _one(_SNO, _HYP)
    ),
    # osa / sleep apnea wordings assert both snoring and sleep problem.
    PlantTemplate(
        "snoring/osa",
        "PMH significant for OSA on BiPAP at home.",
        ((_SNO, _POS, None), (_PRB, _POS, None)),
        countable=False,
    ),
    PlantTemplate(
        "snoring/sleep-apnea",
        "History of sleep apnea treated with CPAP.",
        ((_SNO, _POS, None), (_PRB, _POS, None)),
        countable=False,
    ),
    PlantTemplate(
        "snoring/obstructive",
        "Obstructive sleep apnea confirmed by overnight testing.",
        ((_SNO, _POS, None), (_PRB, _POS, None)),
        countable=False,
    ),
    # --- napping ------------------------------------------------------------
    PlantTemplate("napping/nap", "Patient naps in the afternoon most days.", _one(_NAP, _POS)),
    PlantTemplate("napping/nap", "He is napping twice daily per caregiver.", _one(_NAP, _POS)),
    PlantTemplate(
        "napping/nap", "Caregiver states he takes a nap after lunch.", _one(_NAP, _POS)
    ),
    PlantTemplate("napping/doze", "He tends to doze during television.", _one(_NAP, _POS)),
    PlantTemplate("napping/doze", "She dozes in her chair after lunch.", _one(_NAP, _POS)),
    PlantTemplate(
        "napping/denied", "Patient denies napping during the day.", _one(_NAP, _NEG)
    ),
    PlantTemplate("napping/denied", "No naps reported by the caregiver.", _one(_NAP, _NEG)),
    PlantTemplate("napping/denied", "He never naps even when tired.", _one(_NAP, _NEG)),
    PlantTemplate(
        "napping/denied", "Family is adamantly denying napping at work.", _one(_NAP, _NEG)
    ),
    PlantTemplate(
        "napping/hypothetical", "Advised to avoid napping after dinner.", _one(_NAP, _HYP)
    ),
    PlantTemplate(
        "napping/hypothetical", "Recommend limiting naps during recovery.", _one(_NAP, _HYP)
    ),
    # --- sleep problem -------------------------------------------------------
    PlantTemplate(
        "sleep-problem/insomnia", "Chronic insomnia remains on the problem list.", _one(_PRB, _POS)
    ),
    PlantTemplate(
        "sleep-problem/disorder",
        "Longstanding sleep disorder followed by neurology.",
        _one(_PRB, _POS),
    ),
    PlantTemplate(
        "sleep-problem/hypersomnia", "History of hypersomnia noted in chart.", _one(_PRB, _POS)
    ),
    PlantTemplate(
        "sleep-problem/parasomnia",
        "Parasomnia episodes were described by his wife.",
        _one(_PRB, _POS),
    ),
    PlantTemplate(
        "sleep-problem/hypersomnolence",
        "Hypersomnolence documented at prior visit.",
        _one(_PRB, _POS),
    ),
    PlantTemplate(
        "sleep-problem/denied", "Denies insomnia or early waking.", _one(_PRB, _NEG)
    ),
    PlantTemplate(
        "sleep-problem/denied",
        "No history of hypersomnia or parasomnia.",
        ((_PRB, _NEG, None), (_PRB, _NEG, None)),
    ),
    PlantTemplate(
        "sleep-problem/denied",
        "Review negative for insomnia this visit.",
        _one(_PRB, _NEG),
    ),
    PlantTemplate(
        "sleep-problem/hypothetical",
        "Screen for sleep disorder at next appointment.",
        _one(_PRB, _HYP),
    ),
    PlantTemplate(
        "sleep-problem/hypothetical",
        "Consider referral for insomnia management.",
        _one(_PRB, _HYP),
    ),
    PlantTemplate(
        "sleep-problem/hypothetical",
        "Risk of hypersomnia with new medication discussed.",
        _one(_PRB, _HYP),
    ),
    # sleeplessness and "sleep problems" assert bad sleep quality too.
    PlantTemplate(
        "sleep-problem/sleeplessness",
        "Sleeplessness has been a recurring complaint.",
        ((_PRB, _POS, None), (_BSQ, _POS, None)),
        countable=False,
    ),
    PlantTemplate(
        "sleep-problem/problems",
        "Sleep problems have persisted for years.",
        ((_PRB, _POS, None), (_BSQ, _POS, None)),
        countable=False,
    ),
    # --- bad sleep quality ----------------------------------------------------
    PlantTemplate(
        "bad-sleep/staying-up", "Reports staying up all night worrying.", _one(_BSQ, _POS)
    ),
    PlantTemplate(
        "bad-sleep/trouble",
        "Having trouble falling asleep after lights out.",
        _one(_BSQ, _POS),
    ),
    PlantTemplate(
        "bad-sleep/poorly", "She has been sleeping poorly for months.", _one(_BSQ, _POS)
    ),
    PlantTemplate(
        "bad-sleep/is-poor", "Sleep is poor according to his wife.", _one(_BSQ, _POS)
    ),
    PlantTemplate(
        "bad-sleep/restless", "Restless sleep noted by nursing staff.", _one(_BSQ, _POS)
    ),
    PlantTemplate(
        "bad-sleep/cannot", "States she cannot sleep without the television.", _one(_BSQ, _POS)
    ),
    PlantTemplate(
        "bad-sleep/cannot", "Says she can't sleep before midnight.", _one(_BSQ, _POS)
    ),
    PlantTemplate(
        "bad-sleep/couldnt",
        "States she couldn't sleep during night hours.",
        _one(_BSQ, _POS),
    ),
    PlantTemplate(
        "bad-sleep/issues", "Ongoing sleep issues discussed at length.", _one(_BSQ, _POS)
    ),
    PlantTemplate(
        "bad-sleep/problematic",
        "Sleeping has become problematic since the move.",
        _one(_BSQ, _POS),
    ),
    PlantTemplate(
        "bad-sleep/a-lot", "Family notes she sleeps a lot lately.", _one(_BSQ, _POS)
    ),
    PlantTemplate(
        "bad-sleep/difficulty",
        "Difficulty falling asleep nearly every evening.",
        _one(_BSQ, _POS),
    ),
    PlantTemplate(
        "bad-sleep/disturbance",
        "Sleep disturbance attributed to knee pain.",
        _one(_BSQ, _POS),
    ),
    PlantTemplate(
        "bad-sleep/disturbance-in",
        "Notes disturbance in sleep since admission.",
        _one(_BSQ, _POS),
    ),
    PlantTemplate(
        "bad-sleep/quality", "Sleep quality: fair per intake form.", _one(_BSQ, _POS)
    ),
    PlantTemplate(
        "bad-sleep/not-sleeping",
        "Patient is not sleeping through the morning hours.",
        _one(_BSQ, _POS),
    ),
    PlantTemplate(
        "bad-sleep/no-sleep", "Reports no sleep for two consecutive days.", _one(_BSQ, _POS)
    ),
    PlantTemplate(
        "bad-sleep/difficulty-noun",
        "Sleep difficulty has worsened this winter.",
        _one(_BSQ, _POS),
    ),
    PlantTemplate(
        "bad-sleep/nocturnal-agitation",
        "Nocturnal agitation was observed on the unit.",
        _one(_BSQ, _POS),
    ),
    PlantTemplate(
        "bad-sleep/up-at-night",
        "He is frequently up at night wandering the halls.",
        _one(_BSQ, _POS),
    ),
    PlantTemplate(
        "bad-sleep/nocturnal", "Nocturnal confusion reported by the facility.", _one(_BSQ, _POS)
    ),
    PlantTemplate(
        "bad-sleep/often-awake", "She is often awake before dawn.", _one(_BSQ, _POS)
    ),
    PlantTemplate(
        "bad-sleep/denied", "Denies staying up late on weeknights.", _one(_BSQ, _NEG)
    ),
    PlantTemplate(
        "bad-sleep/denied", "No trouble falling asleep per patient.", _one(_BSQ, _NEG)
    ),
    PlantTemplate(
        "bad-sleep/denied", "Denies restless sleep or vivid dreams.", _one(_BSQ, _NEG)
    ),
    PlantTemplate(
        "bad-sleep/denied", "Denies sleep issues at this time.", _one(_BSQ, _NEG)
    ),
    PlantTemplate(
        "bad-sleep/denied",
        "Three nights without restless sleep recorded.",
        _one(_BSQ, _NEG),
    ),
    PlantTemplate(
        "bad-sleep/hypothetical",
        "If sleep issues persist, will refer to clinic.",
        _one(_BSQ, _HYP),
    ),
    PlantTemplate(
        "bad-sleep/hypothetical",
        "Take melatonin nightly for difficulty falling asleep.",
        _one(_BSQ, _HYP),
    ),
    PlantTemplate(
        "bad-sleep/hypothetical",
        "Recommended relaxation exercises for sleep difficulty.",
        _one(_BSQ, _HYP),
    ),
    # --- daytime sleepiness ----------------------------------------------------
    PlantTemplate(
        "daytime/sleepiness",
        "Excessive daytime sleepiness interferes with meals.",
        _one(_DTS, _POS),
    ),
    PlantTemplate(
        "daytime/sleepiness", "Daytime sleepiness has increased since spring.", _one(_DTS, _POS)
    ),
    PlantTemplate(
        "daytime/somnolence", "Daytime somnolence noted during examination.", _one(_DTS, _POS)
    ),
    PlantTemplate(
        "daytime/at-times", "He sleeps at times during conversation.", _one(_DTS, _POS)
    ),
    PlantTemplate(
        "daytime/in-day", "She sleeps in the daytime per staff.", _one(_DTS, _POS)
    ),
    PlantTemplate(
        "daytime/during-day", "He sleeps during the day most afternoons.", _one(_DTS, _POS)
    ),
    PlantTemplate(
        "daytime/all-day", "Per family he would sleep all day unless roused.", _one(_DTS, _POS)
    ),
    PlantTemplate(
        "daytime/denied", "Denies daytime sleepiness on questioning.", _one(_DTS, _NEG)
    ),
    PlantTemplate(
        "daytime/denied", "No daytime somnolence was observed.", _one(_DTS, _NEG)
    ),
    PlantTemplate(
        "daytime/hypothetical",
        "Monitor for daytime sleepiness with the new dose.",
        _one(_DTS, _HYP),
    ),
    PlantTemplate(
        "daytime/hypothetical",
        "Consider stimulant review for daytime somnolence.",
        _one(_DTS, _HYP),
    ),
    # sleeping a lot through the day asserts bad sleep quality too.
    PlantTemplate(
        "daytime/a-lot-day",
        "Family says she sleep a lot through out the day.",
        ((_BSQ, _POS, None), (_DTS, _POS, None)),
        countable=False,
    ),
    # --- night wakings -----------------------------------------------------------
    PlantTemplate(
        "night-wakings/wakings",
        "Frequent night wakings reported by her daughter.",
        _one(_NWK, _POS),
    ),
    PlantTemplate(
        "night-wakings/waking", "Notes frequent night waking after midnight.", _one(_NWK, _POS)
    ),
    PlantTemplate(
        "night-wakings/wakes-up",
        "She wakes up several times during the night.",
        _one(_NWK, _POS),
    ),
    PlantTemplate(
        "night-wakings/middle",
        "Describes waking up in the middle of the night.",
        _one(_NWK, _POS),
    ),
    PlantTemplate(
        "night-wakings/counted",
        "Reports waking up 3-5 times during the night.",
        _one(_NWK, _POS),
    ),
    PlantTemplate(
        "night-wakings/nightmares", "Awakening from nightmares most weeks.", _one(_NWK, _POS)
    ),
    PlantTemplate(
        "night-wakings/awake-at", "He is awake during night checks.", _one(_NWK, _POS)
    ),
    PlantTemplate(
        "night-wakings/denied",
        "Denies night wakings since starting treatment.",
        _one(_NWK, _NEG),
    ),
    PlantTemplate(
        "night-wakings/denied", "No awakening during night hours per aide.", _one(_NWK, _NEG)
    ),
    PlantTemplate(
        "night-wakings/hypothetical",
        "Monitor for night wakings after the dose change.",
        _one(_NWK, _HYP),
    ),
    PlantTemplate(
        "night-wakings/hypothetical",
        "If night wakings return, adjust evening routine.",
        _one(_NWK, _HYP),
    ),
    # --- sleep duration -------------------------------------------------------------
    PlantTemplate(
        "duration/short-less-than",
        "He sleeps less than 5 hours nightly.",
        _one(_DUR, _POS, DurationClass.SHORT),
    ),
    PlantTemplate(
        "duration/short-range",
        "She sleeps 4-5 hours on most nights.",
        _one(_DUR, _POS, DurationClass.SHORT),
    ),
    PlantTemplate(
        "duration/medium-range",
        "He sleeps about 7-8 hours per night.",
        _one(_DUR, _POS, DurationClass.MEDIUM),
    ),
    PlantTemplate(
        "duration/long-more-than",
        "Reportedly will sleep more than 12 hours on weekends.",
        _one(_DUR, _POS, DurationClass.LONG),
    ),
    PlantTemplate(
        "duration/long-range",
        "Sleeping 10-12 hours has become typical for her.",
        _one(_DUR, _POS, DurationClass.LONG),
    ),
    PlantTemplate(
        "duration/denied",
        "Denies sleeping more than 12 hours.",
        _one(_DUR, _NEG, DurationClass.LONG),
        countable=False,
    ),
    # --- regression sentences (fixture material) --------------------------------------
    PlantTemplate(
        "regression/melatonin",
        "Take Melatonin 5 mg at bedtime every night for 3-4 weeks"
        " for difficulty falling asleep",
        _one(_BSQ, _HYP),
        countable=False,
    ),
    PlantTemplate(
        "regression/out-of-window-not",
        "The patient's daughter states that she has not been complaining of her back"
        " pain or of her leg cramps we discussed the fact that she is doing less and"
        " does nap during the day",
        _one(_NAP, _POS),
        countable=False,
    ),
    PlantTemplate(
        "regression/problem-list",
        "Change in social contacts/activities? No Patient Active Problem List Diagnosis"
        " Primary open angle glaucoma Urge incontinence Backache, unspecified Pneumonia,"
        " organism unspecified Insomnia",
        _one(_PRB, _POS),
        countable=False,
    ),
    PlantTemplate(
        "regression/depression-screen",
        "Depression screen done 7/2017, PHQ9 score 16 points for sleep problem which"
        " seems better now",
        ((_PRB, _HYP, None), (_BSQ, _HYP, None)),
        countable=False,
    ),
    PlantTemplate(
        "regression/tie-vote",
        "Patient denies snoring but wife reports snoring nightly.",
        ((_SNO, _NEG, None), (_SNO, _POS, None)),
        countable=False,
    ),
    PlantTemplate(
        "regression/semicolon-scope",
        "Denies apnea; snoring noted.",
        _one(_SNO, _POS),
        countable=False,
    ),
)


# Neutral filler sentences; {n1}/{n2} are numbers, {rel} a relation noun.
_FILLERS = (
    "Blood pressure {n1} over {n2} with regular pulse.",
    "Weight stable at {n1} pounds this visit.",
    "Ambulates independently with a rolling walker.",
    "Medication list reviewed and reconciled today.",
    "Lives with her {rel} in a ranch home.",
    "Denies chest pain, shortness of breath, or palpitations.",
    "Follow up in {n2} weeks with primary care.",
    "Mini mental status exam scored {n2} of 30.",
    "Appetite described as fair by the {rel}.",
    "Labs from last week were unremarkable.",
    "No acute distress observed during the exam.",
    "Gait steady; uses a cane outdoors.",
    "Continues physical therapy twice weekly.",
    "Vaccinations are up to date.",
    "Reviewed fall precautions with the {rel}.",
    "Hearing aids functioning well bilaterally.",
    "Reports mild knee pain after long walks.",
    "Blood sugars have ranged {n1} to {n2} this month.",
    "Plan to recheck labs in {n2} months.",
    "The {rel} accompanied the patient today.",
    "Dietary counseling provided regarding sodium intake.",
    "Remarkable improvement in mobility since surgery.",
    "The medication dosage was adjusted downward.",
    "A snapshot of home supports was obtained.",
)

# Sentences that contain sleep keywords in non-sleep contexts: they make a
# document retrievable without producing any concept mention.
_KEYWORD_DISTRACTORS = (
    "Mild wheezing noted on pulmonary exam.",
    "Denies wheezing, cough, or sputum production.",
    "Occasional dizziness when standing too quickly.",
    "Central apnea was excluded by the prior workup.",
    "Polysomnography records requested from the outside clinic.",
    "Hypopnea index was within normal limits last year.",
    "Family history includes narcolepsy in a cousin.",
    "Somnolence from the new medication has resolved.",
    "REM percentages were typical on the prior study.",
    "NREM architecture was preserved per the report.",
    "Wakes early to take morning medications.",
)

_RELATIONS = ("daughter", "son", "spouse", "caregiver", "neighbor", "niece", "aide")

_DUP_BOILERPLATE = "Electronically signed by the covering provider, id {n1}."

DEDUP_THRESHOLD = 0.9


@dataclass(frozen=True)
class PlantCounts:
    """How many documents to plant per assertion for one concept and split."""

    positive: int = 0
    negated: int = 0
    hypothetical: int = 0

    def total(self) -> int:
        return self.positive + self.negated + self.hypothetical


@dataclass(frozen=True)
class ConceptPlan:
    train: PlantCounts = PlantCounts()
    test: PlantCounts = PlantCounts()


def _default_concepts() -> dict[ConceptCategory, ConceptPlan]:
    # Positive counts mirror the label distribution the pipeline is tuned
    # for: rare concepts stay rare. Negated/hypothetical plants inject the
    # same vocabulary into negative documents.
    def plan(train_pos, test_pos, train_neg=3, test_neg=2, train_hyp=2, test_hyp=1):
        return ConceptPlan(
            PlantCounts(train_pos, train_neg, train_hyp),
            PlantCounts(test_pos, test_neg, test_hyp),
        )

    return {
        ConceptCategory.SNORING: plan(30, 14),
        ConceptCategory.NAPPING: plan(4, 1),
        ConceptCategory.SLEEP_PROBLEM: plan(35, 20),
        ConceptCategory.BAD_SLEEP_QUALITY: plan(20, 8),
        ConceptCategory.DAYTIME_SLEEPINESS: plan(9, 1),
        ConceptCategory.NIGHT_WAKINGS: plan(2, 2),
    }


def _default_durations() -> dict[DurationClass, tuple[int, int]]:
    return {
        DurationClass.SHORT: (0, 0),
        DurationClass.MEDIUM: (1, 0),
        DurationClass.LONG: (2, 0),
    }


@dataclass(frozen=True)
class SynthConfig:
    """Corpus recipe: sizes, per-concept plant counts, noise, and seed."""

    n_docs: int = 320
    n_train: int = 200
    concepts: Mapping[ConceptCategory, ConceptPlan] = field(default_factory=_default_concepts)
    durations: Mapping[DurationClass, tuple[int, int]] = field(default_factory=_default_durations)
    duplicate_pair_count: int = 3
    distractor_keyword_rate: float = 0.3
    seed: int = 42

    @staticmethod
    def scaled(n_docs: int, seed: int = 42) -> "SynthConfig":
        """Default recipe scaled to another corpus size, same proportions."""
        base = SynthConfig()
        factor = n_docs / base.n_docs
        n_train = int(round(base.n_train * factor))

        def scale(count: int) -> int:
            return int(round(count * factor))

        concepts = {
            concept: ConceptPlan(
                PlantCounts(
                    scale(plan.train.positive),
                    scale(plan.train.negated),
                    scale(plan.train.hypothetical),
                ),
                PlantCounts(
                    scale(plan.test.positive),
                    scale(plan.test.negated),
                    scale(plan.test.hypothetical),
                ),
            )
            for concept, plan in base.concepts.items()
        }
        durations = {
            cls: (scale(train), scale(test)) for cls, (train, test) in base.durations.items()
        }
        return SynthConfig(
            n_docs=n_docs,
            n_train=n_train,
            concepts=concepts,
            durations=durations,
            duplicate_pair_count=base.duplicate_pair_count,
            distractor_keyword_rate=base.distractor_keyword_rate,
            seed=seed,
        )


@dataclass(frozen=True)
class Plant:
    """One planted sentence and what it asserts."""

    doc_id: str
    family: str
    text: str
    effects: tuple[Effect, ...]


@dataclass
class SynthBundle:
    """Everything generate() produces for one configuration."""

    config: SynthConfig
    documents: list[ClinicalDocument]
    note_lines: list[RawNoteLine]
    gold: list[GoldRecord]
    plants: list[Plant]
    duplicate_pairs: list[tuple[str, str]]


class SynthConfigError(ValueError):
    """The requested corpus is infeasible or inconsistent."""


def intended_labels(doc_id: str, effects: Iterable[Effect]) -> DocumentLabels:
    """Labels a set of declared effects must aggregate to.

    Mirrors the extraction vote: positive effects vote yes, negated vote
    no, hypothetical abstain; duration takes the majority positive class
    with ties to the earliest effect.
    """
    yes = {concept: 0 for concept in BINARY_CONCEPTS}
    no = {concept: 0 for concept in BINARY_CONCEPTS}
    duration_votes: list[DurationClass] = []
    for concept, assertion, duration in effects:
        if concept is ConceptCategory.SLEEP_DURATION:
            if assertion is Assertion.POSITIVE:
                assert duration is not None
                duration_votes.append(duration)
            continue
        if assertion is Assertion.POSITIVE:
            yes[concept] += 1
        elif assertion is Assertion.NEGATED:
            no[concept] += 1
    values = {
        concept.value: yes[concept] >= 1 and yes[concept] >= no[concept]
        for concept in BINARY_CONCEPTS
    }
    duration = None
    if duration_votes:
        counts: dict[DurationClass, int] = {}
        for cls in duration_votes:
            counts[cls] = counts.get(cls, 0) + 1
        best = max(counts.values())
        duration = next(cls for cls in duration_votes if counts[cls] == best)
    return DocumentLabels(doc_id=doc_id, sleep_duration=duration, **values)  # type: ignore[arg-type]


def _countable_pool() -> dict[tuple[ConceptCategory, Assertion], list[PlantTemplate]]:
    pool: dict[tuple[ConceptCategory, Assertion], list[PlantTemplate]] = {}
    for template in CATALOG:
        if not template.countable:
            continue
        concepts = {effect[0] for effect in template.effects}
        assertions = {effect[1] for effect in template.effects}
        if len(concepts) != 1 or len(assertions) != 1:
            continue
        pool.setdefault((next(iter(concepts)), next(iter(assertions))), []).append(template)
    return pool


def _duration_pool() -> dict[DurationClass, list[PlantTemplate]]:
    pool: dict[DurationClass, list[PlantTemplate]] = {}
    for template in CATALOG:
        if not template.countable or len(template.effects) != 1:
            continue
        concept, assertion, duration = template.effects[0]
        if concept is ConceptCategory.SLEEP_DURATION and assertion is Assertion.POSITIVE:
            assert duration is not None
            pool.setdefault(duration, []).append(template)
    return pool


_COUNTABLE = _countable_pool()
_DURATION_TEMPLATES = _duration_pool()


@dataclass
class _DocPlan:
    doc_id: str
    split: str
    template: PlantTemplate | None = None
    family: str = ""


def _validate(config: SynthConfig) -> None:
    if config.n_docs < 1:
        raise SynthConfigError("n_docs must be positive")
    if not 0 <= config.n_train <= config.n_docs:
        raise SynthConfigError("n_train must be between 0 and n_docs")
    if not 0.0 <= config.distractor_keyword_rate <= 1.0:
        raise SynthConfigError("distractor_keyword_rate must be in [0, 1]")
    if config.duplicate_pair_count < 0:
        raise SynthConfigError("duplicate_pair_count must be non-negative")
    needed = {"train": 0, "test": 0}
    for concept, plan in config.concepts.items():
        if concept is ConceptCategory.SLEEP_DURATION:
            raise SynthConfigError("sleep duration is configured via durations, not concepts")
        for split, counts in (("train", plan.train), ("test", plan.test)):
            for count, assertion in (
                (counts.positive, Assertion.POSITIVE),
                (counts.negated, Assertion.NEGATED),
                (counts.hypothetical, Assertion.HYPOTHETICAL),
            ):
                if count < 0:
                    raise SynthConfigError(f"negative plant count for {concept.value}")
                if count > 0 and (concept, assertion) not in _COUNTABLE:
                    raise SynthConfigError(
                        f"no template available for {concept.value}/{assertion.value}"
                    )
            needed[split] += counts.total()
    for cls, (train_count, test_count) in config.durations.items():
        if train_count < 0 or test_count < 0:
            raise SynthConfigError("negative duration count")
        if (train_count or test_count) and cls not in _DURATION_TEMPLATES:
            raise SynthConfigError(f"no template available for duration {cls.value}")
        needed["train"] += train_count
        needed["test"] += test_count
    if needed["train"] > config.n_train:
        raise SynthConfigError(
            f"train plants ({needed['train']}) exceed train documents ({config.n_train})"
        )
    if needed["test"] > config.n_docs - config.n_train:
        raise SynthConfigError(
            f"test plants ({needed['test']}) exceed test documents "
            f"({config.n_docs - config.n_train})"
        )


def _fill(template: str, rng: random.Random) -> str:
    return template.format(
        n1=rng.randint(90, 180),
        n2=rng.randint(2, 28),
        rel=rng.choice(_RELATIONS),
    )


def generate(config: SynthConfig | None = None, verify: bool = True) -> SynthBundle:
    """Build a corpus whose gold labels are true by construction.

    The same config always produces the same bundle, byte for byte. With
    ``verify`` (the default) the generated corpus is cross-checked against
    the rule engine, the retrieval lexicon, and the dedup threshold;
    a failure means a template and the engine disagree.
    """
    if config is None:
        config = SynthConfig()
    _validate(config)
    rng = random.Random(config.seed)

    width = max(5, len(str(config.n_docs + 2 * config.duplicate_pair_count)))
    doc_ids = [f"doc-{index:0{width}d}" for index in range(config.n_docs)]
    train_ids = set(rng.sample(doc_ids, config.n_train))
    plans = {
        doc_id: _DocPlan(doc_id, "train" if doc_id in train_ids else "test")
        for doc_id in doc_ids
    }

    open_slots = {
        "train": [doc_id for doc_id in doc_ids if doc_id in train_ids],
        "test": [doc_id for doc_id in doc_ids if doc_id not in train_ids],
    }
    rng.shuffle(open_slots["train"])
    rng.shuffle(open_slots["test"])

    def assign(split: str, template_pool: list[PlantTemplate], count: int) -> None:
        for _ in range(count):
            doc_id = open_slots[split].pop()
            plan = plans[doc_id]
            plan.template = rng.choice(template_pool)
            plan.family = plan.template.family

    for concept in ConceptCategory:
        if concept is ConceptCategory.SLEEP_DURATION:
            continue
        concept_plan = config.concepts.get(concept, ConceptPlan())
        for split, counts in (("train", concept_plan.train), ("test", concept_plan.test)):
            for assertion, count in (
                (Assertion.POSITIVE, counts.positive),
                (Assertion.NEGATED, counts.negated),
                (Assertion.HYPOTHETICAL, counts.hypothetical),
            ):
                if count:
                    assign(split, _COUNTABLE[(concept, assertion)], count)
    for cls in DurationClass:
        train_count, test_count = config.durations.get(cls, (0, 0))
        if train_count:
            assign("train", _DURATION_TEMPLATES[cls], train_count)
        if test_count:
            assign("test", _DURATION_TEMPLATES[cls], test_count)

    documents: list[ClinicalDocument] = []
    gold: list[GoldRecord] = []
    plants: list[Plant] = []
    lexicon = KeywordLexicon.build()

    for index, doc_id in enumerate(doc_ids):
        plan = plans[doc_id]
        sentences = []
        for _ in range(rng.randint(3, 6)):
            if rng.random() < config.distractor_keyword_rate:
                sentences.append(rng.choice(_KEYWORD_DISTRACTORS))
            else:
                sentences.append(_fill(rng.choice(_FILLERS), rng))
        if plan.template is not None:
            position = rng.randint(0, len(sentences))
            sentences.insert(position, plan.template.text)
        if not any(match_keywords(sentence, lexicon)[0] for sentence in sentences):
            # Every gold document must be retrievable so the pipeline
            # produces a prediction for it; some rule wordings (doze,
            # parasomnia, awakening) contain no lexicon keyword.
            position = rng.randint(0, len(sentences))
            sentences.insert(position, rng.choice(_KEYWORD_DISTRACTORS))

        separators = [rng.choice((" ", " ", "\n")) for _ in range(len(sentences) - 1)]
        text = sentences[0]
        for separator, sentence in zip(separators, sentences[1:]):
            text += separator + sentence

        patient_id = f"patient-{index // 8:05d}"
        note_date = f"20{rng.randint(19, 21)}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"
        documents.append(ClinicalDocument(doc_id, patient_id, note_date, text))

        effects = plan.template.effects if plan.template is not None else ()
        labels = intended_labels(doc_id, effects)
        gold.append(GoldRecord(doc_id=doc_id, split=plan.split, labels=labels))
        if plan.template is not None:
            plants.append(Plant(doc_id, plan.family, plan.template.text, effects))

    duplicate_pairs: list[tuple[str, str]] = []
    for pair_index in range(config.duplicate_pair_count):
        base_index = config.n_docs + 2 * pair_index
        id_a = f"doc-{base_index:0{width}d}"
        id_b = f"doc-{base_index + 1:0{width}d}"
        sentences = [_fill(rng.choice(_FILLERS), rng) for _ in range(6)]
        base_text = " ".join(sentences)
        patient_id = f"patient-dup-{pair_index:03d}"
        note_date = f"20{rng.randint(19, 21)}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"
        copy_text = base_text + "\n" + _fill(_DUP_BOILERPLATE, rng)
        documents.append(ClinicalDocument(id_a, patient_id, note_date, base_text))
        documents.append(ClinicalDocument(id_b, patient_id, note_date, copy_text))
        duplicate_pairs.append((id_a, id_b))

    note_lines: list[RawNoteLine] = []
    for document in documents:
        for line_no, line in enumerate(document.text.split("\n"), start=1):
            note_lines.append(
                RawNoteLine(document.doc_id, line_no, document.patient_id, document.note_date, line)
            )
    rng.shuffle(note_lines)

    bundle = SynthBundle(
        config=config,
        documents=documents,
        note_lines=note_lines,
        gold=gold,
        plants=plants,
        duplicate_pairs=duplicate_pairs,
    )
    if verify:
        _verify_bundle(bundle, lexicon)
    return bundle


def _verify_bundle(bundle: SynthBundle, lexicon: KeywordLexicon) -> None:
    """Cross-check the generated corpus against the actual pipeline pieces."""
    gold_by_id = {record.doc_id: record for record in bundle.gold}
    by_id = {document.doc_id: document for document in bundle.documents}
    for document in bundle.documents:
        is_gold = document.doc_id in gold_by_id
        if is_gold:
            if is_relevant(document, lexicon) is None:
                raise AssertionError(f"gold document {document.doc_id} is not retrievable")
            expected = gold_by_id[document.doc_id].labels
            actual = label_document(document)
            if actual != expected:
                raise AssertionError(
                    f"template/engine disagreement on {document.doc_id}: "
                    f"expected {expected}, engine produced {actual}"
                )
        else:
            if is_relevant(document, lexicon) is not None:
                raise AssertionError(
                    f"duplicate-pair document {document.doc_id} must not be retrievable"
                )
    # Gold documents sharing a patient must stay below the dedup threshold;
    # planted duplicate pairs must exceed it.
    by_patient: dict[str, list[ClinicalDocument]] = {}
    for document in bundle.documents:
        if document.doc_id in gold_by_id:
            by_patient.setdefault(document.patient_id, []).append(document)
    for block in by_patient.values():
        vectors = [term_vector(document.text) for document in block]
        for i in range(len(block)):
            for j in range(i + 1, len(block)):
                similarity = cosine_similarity(vectors[i], vectors[j])
                if similarity > DEDUP_THRESHOLD:
                    raise AssertionError(
                        f"gold documents {block[i].doc_id} and {block[j].doc_id} "
                        f"are near-duplicates (cosine {similarity:.4f})"
                    )
    for id_a, id_b in bundle.duplicate_pairs:
        similarity = cosine_similarity(term_vector(by_id[id_a].text), term_vector(by_id[id_b].text))
        if similarity <= DEDUP_THRESHOLD:
            raise AssertionError(
                f"planted duplicate pair ({id_a}, {id_b}) has cosine {similarity:.4f}, "
                f"not above {DEDUP_THRESHOLD}"
            )


# ---------------------------------------------------------------------------
# Bundle files


def write_bundle(bundle: SynthBundle, output_dir: str | Path) -> dict[str, Path]:
    """Write notes.jsonl, gold.jsonl, plants.jsonl, and duplicate_pairs.csv."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "notes": output_dir / "notes.jsonl",
        "gold": output_dir / "gold.jsonl",
        "plants": output_dir / "plants.jsonl",
        "duplicate_pairs": output_dir / "duplicate_pairs.csv",
    }
    with open(paths["notes"], "w", encoding="utf-8") as handle:
        for line in bundle.note_lines:
            record = {
                "doc_id": line.doc_id,
                "line_no": line.line_no,
                "patient_id": line.patient_id,
                "note_date": line.note_date,
                "text": line.text,
            }
            handle.write(json.dumps(record, ensure_ascii=True))
            handle.write("\n")
    write_gold(paths["gold"], bundle.gold)
    with open(paths["plants"], "w", encoding="utf-8") as handle:
        for plant in bundle.plants:
            record = {
                "doc_id": plant.doc_id,
                "family": plant.family,
                "text": plant.text,
                "effects": [
                    {
                        "concept": concept.value,
                        "assertion": assertion.value,
                        "duration_class": duration.value if duration else None,
                    }
                    for concept, assertion, duration in plant.effects
                ],
            }
            handle.write(json.dumps(record, ensure_ascii=True))
            handle.write("\n")
    with open(paths["duplicate_pairs"], "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["doc_id_a", "doc_id_b"])
        for id_a, id_b in bundle.duplicate_pairs:
            writer.writerow([id_a, id_b])
    return paths
