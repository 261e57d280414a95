"""Prompt catalogs for the three tasks plus free-text verdict parsing.

The catalog is read-only and also shipped as a machine-readable fixture
(data/prompt_catalog.json) so servers and tests share one source of truth.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .postprocess import RiderLabel


class Task(enum.Enum):
    CONGESTION = "congestion"
    CRACK = "crack"
    HELMET = "helmet"


class Verdict(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNKNOWN = "unknown"


class PromptLookupError(LookupError):
    """Unknown catalog id; the message lists the valid ids for the task."""


@dataclass(frozen=True)
class AliasMap:
    """Answer tokens accepted for each class, matched as whole words."""

    positive: tuple[str, ...]
    negative: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.positive or not self.negative:
            raise ValueError("alias map must cover both classes")
        pos = {a.lower() for a in self.positive}
        neg = {a.lower() for a in self.negative}
        if pos & neg:
            raise ValueError(f"aliases shared between classes: {pos & neg}")

    def entries(self) -> list[tuple[str, Verdict]]:
        return [(a, Verdict.POSITIVE) for a in self.positive] + [
            (a, Verdict.NEGATIVE) for a in self.negative
        ]


@dataclass(frozen=True)
class LabelPair:
    """Two class names for a similarity classifier; positive = condition present."""

    id: str
    positive_label: str
    negative_label: str

    def __post_init__(self) -> None:
        if not self.positive_label or not self.negative_label:
            raise ValueError("labels must be non-empty")
        if self.positive_label == self.negative_label:
            raise ValueError("labels must be distinct")

    @property
    def labels(self) -> list[str]:
        return [self.positive_label, self.negative_label]


@dataclass(frozen=True)
class CascadeSpec:
    """Two-turn prompt pair: describe the image, then force a class answer."""

    id: str
    initial_prompt: str
    follow_up_prompt: str
    alias_map: AliasMap


@dataclass(frozen=True)
class DirectPrompt:
    """Single-turn chat prompt with the tokens to parse from the answer."""

    id: str
    text: str
    alias_map: AliasMap


@dataclass(frozen=True)
class TextualDetectionPrompt:
    """Sentence-level detector query mapped straight to a rider class."""

    id: int
    query: str
    mapped_class: RiderLabel


_YES_NO = AliasMap(positive=("Yes",), negative=("No",))
_CONGESTION_CLASS_WORDS = AliasMap(positive=("Congested lanes",), negative=("Free-lanes",))
_CRACK_CLASS_WORDS = AliasMap(positive=("Cracked",), negative=("Non-cracked",))
# Negated phrasings are listed as negative aliases so that answers like
# "not wearing helmet" can never land in the positive class.
_HELMET_WORDS = AliasMap(
    positive=("helmet",),
    negative=(
        "nohelmet",
        "no-helmet",
        "no helmet",
        "not wearing helmet",
        "not wearing a helmet",
        "without wearing helmet",
        "without helmet",
        "without a helmet",
    ),
)

_LABEL_PAIRS: dict[Task, dict[str, LabelPair]] = {
    Task.CONGESTION: {
        "A1": LabelPair("A1", "Congested", "Non-congested"),
        "A2": LabelPair("A2", "Congested lanes", "Non-congested lanes"),
        "A3": LabelPair("A3", "Lanes with congestion", "Lanes without congestion"),
        "A4": LabelPair("A4", "Queued traffic", "Free-flow traffic"),
        "A5": LabelPair("A5", "Congested lanes", "Free-lanes"),
    },
    Task.CRACK: {
        "B1": LabelPair("B1", "Cracked", "Non-Cracked"),
        "B2": LabelPair("B2", "Cracks present", "Cracks absent"),
        "B3": LabelPair("B3", "Cracked surface", "Non-Cracked surface"),
        "B4": LabelPair("B4", "Cracked pavement", "Crack-free pavement"),
        "B5": LabelPair("B5", "Crack", "No crack"),
    },
}

# P1 and P2 of the congestion set are identical on purpose; both keys are
# kept so every report row has its own id.
_CONGESTION_INITIAL = {
    1: "Classify whether highway lanes are congested or not in the image.",
    2: "Classify whether highway lanes are congested or not in the image.",
    3: "Classify whether in the image highway lanes are congested or not.",
    4: "Classify whether the highway have congested lane or free-lane in the image.",
    5: "Check whether the highway lanes are congested or not in the image.",
}
_CONGESTION_FOLLOWUP = {
    1: "Write Yes for congested, No for non-congested.",
    2: "Write Congested lanes if lanes are congested, Free-lanes if lanes are not congested.",
    3: "Write Congested lanes if lanes are congested, Free-lanes if lanes are not congested.",
    4: "Write  Congested lanes if lanes are congested, Free-lanes if free-lane.",  # sic
    5: "Write Congested lanes if lanes are congested, Free-lanes if lanes are not congested.",
}
_CRACK_INITIAL = {
    1: "Classify whether the pavements have cracks or not in the image?",
    2: "Classify whether the cracks are present or not in the pavement surface image?",
    3: "Classify whether the pavement surface is cracked or not in the image?",
    4: "Classify whether in the image, the pavement surface have cracks or not?",
    5: "Check whether the pavement surface has any cracks or not?",
}
_CRACK_FOLLOWUP = {
    1: "Write Cracked if cracks present, Non-cracked if cracks not present.",
    2: "Write Cracked if cracks present, Non-cracked if cracks not present.",
    3: "Write Cracked if surface is cracked, Non-cracked if surface is not-cracked.",
    4: "Write Cracked if surface has cracks, Non-cracked if surface do not have cracks.",
    5: "Write Cracked if cracks present, Non-cracked if cracks not present.",
}


def _cascades(task: Task) -> dict[str, CascadeSpec]:
    if task is Task.CONGESTION:
        initial, followup = _CONGESTION_INITIAL, _CONGESTION_FOLLOWUP
        alias_for = lambda i: _YES_NO if i == 1 else _CONGESTION_CLASS_WORDS
    else:
        initial, followup = _CRACK_INITIAL, _CRACK_FOLLOWUP
        alias_for = lambda i: _CRACK_CLASS_WORDS
    return {
        f"P{i}-F{i}": CascadeSpec(f"P{i}-F{i}", initial[i], followup[i], alias_for(i))
        for i in range(1, 6)
    }


_DIRECT_PROMPTS: dict[Task, dict[str, DirectPrompt]] = {
    Task.CONGESTION: {
        "gpt-congestion": DirectPrompt(
            "gpt-congestion",
            "Can you tell me whether the closer lane are free lanes or not. "
            "Only return non-Congested if there are all free lanes otherwise return congested",
            AliasMap(positive=("congested",), negative=("non-Congested",)),
        ),
    },
    Task.CRACK: {
        "gpt-crack": DirectPrompt(
            "gpt-crack",
            "Can you tell me whether the pavements have cracks or not in the image. "
            "Only return yes if crack is present and no if crack is not present.",
            _YES_NO,
        ),
    },
    Task.HELMET: {
        "llava-helmet": DirectPrompt(
            "llava-helmet",
            "Identify whether all person sitting on motorbike is wearing helmet or not?",
            _HELMET_WORDS,
        ),
        "llava-helmet-followup": DirectPrompt(
            "llava-helmet-followup",
            "Write no if any person is not wearing helmet and write yes if all person "
            "is wearing helmet.",
            _YES_NO,
        ),
        "gpt-helmet": DirectPrompt(
            "gpt-helmet",
            "Can you tell me the if there is a person wearing helmet or not. "
            "Only return helmet if all person are wearing helmet otherwise result nohelmet",
            _HELMET_WORDS,
        ),
    },
}

_TEXTUAL_PROMPTS: dict[str, TextualDetectionPrompt] = {
    "1": TextualDetectionPrompt(1, "A person on a motorbike wearing helmet", RiderLabel.HELMET),
    "2": TextualDetectionPrompt(2, "A person on a motorbike bareheaded", RiderLabel.NOHELMET),
    "3": TextualDetectionPrompt(
        3, "A person on a motorbike without wearing helmet", RiderLabel.NOHELMET
    ),
}

CatalogEntry = LabelPair | CascadeSpec | DirectPrompt | TextualDetectionPrompt


def _task_catalog(task: Task) -> dict[str, CatalogEntry]:
    catalog: dict[str, CatalogEntry] = {}
    catalog.update(_LABEL_PAIRS.get(task, {}))
    if task in (Task.CONGESTION, Task.CRACK):
        catalog.update(_cascades(task))
    if task is Task.HELMET:
        catalog.update(_TEXTUAL_PROMPTS)
    catalog.update(_DIRECT_PROMPTS.get(task, {}))
    return catalog


def valid_ids(task: Task | str) -> list[str]:
    return sorted(_task_catalog(Task(task) if isinstance(task, str) else task))


def catalog_lookup(task: Task | str, prompt_id: str) -> CatalogEntry:
    """Fetch a catalog entry by id (case-insensitive); the store is read-only."""
    task = Task(task) if isinstance(task, str) else task
    catalog = _task_catalog(task)
    wanted = prompt_id.strip()
    for key, entry in catalog.items():
        if key.lower() == wanted.lower():
            return entry
    raise PromptLookupError(
        f"unknown prompt id {prompt_id!r} for task {task.value!r}; "
        f"valid ids: {', '.join(sorted(catalog))}"
    )


def textual_detection_prompts() -> tuple[TextualDetectionPrompt, ...]:
    """The three sentence queries, in catalog order."""
    return tuple(_TEXTUAL_PROMPTS[k] for k in ("1", "2", "3"))


_WORD = "0-9a-z_"


def parse_label(text: str, alias_map: AliasMap) -> Verdict:
    """Map free-form model output onto a class, or Unknown.

    Aliases are matched case-insensitively as whole words, longest alias
    first, and each match masks its span so that e.g. "Non-cracked" can
    never also count as a hit for "cracked". Exactly one class matched
    gives that class; zero or both give Unknown.
    """
    haystack = text.lower()
    found: set[Verdict] = set()
    for alias, verdict in sorted(alias_map.entries(), key=lambda e: (-len(e[0]), e[0])):
        pattern = re.compile(
            rf"(?<![{_WORD}]){re.escape(alias.lower())}(?![{_WORD}])"
        )
        if pattern.search(haystack):
            found.add(verdict)
            haystack = pattern.sub(lambda m: "\x00" * len(m.group()), haystack)
    if len(found) == 1:
        return found.pop()
    return Verdict.UNKNOWN


def compose_followup(description: str, follow_up_prompt: str) -> str:
    """Second-turn prompt: the first answer, a newline, then the follow-up."""
    if not description:
        raise ValueError("empty description: first turn produced no text")
    return f"{description}\n{follow_up_prompt}"


def build_followup(description: str, spec: CascadeSpec) -> str:
    return compose_followup(description, spec.follow_up_prompt)


def export_catalog() -> list[dict[str, str]]:
    """Flatten every prompt to (task, id, role, text) records in stable order."""
    records: list[dict[str, str]] = []

    def add(task: Task, entry_id: str, role: str, text: str) -> None:
        records.append({"task": task.value, "id": entry_id, "role": role, "text": text})

    for task in (Task.CONGESTION, Task.CRACK, Task.HELMET):
        for key, entry in _task_catalog(task).items():
            if isinstance(entry, LabelPair):
                add(task, key, "positive_label", entry.positive_label)
                add(task, key, "negative_label", entry.negative_label)
            elif isinstance(entry, CascadeSpec):
                add(task, key, "initial", entry.initial_prompt)
                add(task, key, "follow_up", entry.follow_up_prompt)
            elif isinstance(entry, DirectPrompt):
                add(task, key, "direct", entry.text)
            else:
                add(task, key, "query", entry.query)
    return records
