"""Annotated text instances and type prompts."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

KIND_RELATION = "relation"
KIND_EVENT = "event"

MASK_SLOT = "[MASK]"


class InstanceError(ValueError):
    """Invalid instance: bad spans, missing fields, mixed kinds."""


@dataclass
class Span:
    start: int
    end: int

    def text(self, sentence: str) -> str:
        return sentence[self.start : self.end]


@dataclass
class TextInstance:
    """One relation or event mention with character-offset spans.

    ``label`` is the type name when annotated. ``known`` decides where it
    lands on export: the label field for known instances, the evaluation-only
    gold field for unknown ones.
    """

    id: str
    sentence: str
    kind: str
    head: Span | None = None
    tail: Span | None = None
    trigger: Span | None = None
    label: str | None = None
    known: bool = False
    split: str = "train"

    def validate(self) -> None:
        if self.kind == KIND_RELATION:
            if self.head is None or self.tail is None:
                raise InstanceError(f"{self.id}: relation instances need head and tail spans")
            spans = [self.head, self.tail]
        elif self.kind == KIND_EVENT:
            if self.trigger is None:
                raise InstanceError(f"{self.id}: event instances need a trigger span")
            spans = [self.trigger]
        else:
            raise InstanceError(f"{self.id}: bad kind '{self.kind}'")
        for span in spans:
            if not (0 <= span.start < span.end <= len(self.sentence)):
                raise InstanceError(
                    f"{self.id}: span ({span.start}, {span.end}) outside sentence bounds"
                )
        if self.kind == KIND_RELATION:
            a, b = sorted(spans, key=lambda s: s.start)
            if a.end > b.start:
                raise InstanceError(f"{self.id}: head and tail spans overlap")
        if self.known and self.label is None:
            raise InstanceError(f"{self.id}: known instance without a label")
        if self.split not in ("train", "test"):
            raise InstanceError(f"{self.id}: bad split '{self.split}'")


def _span_from(obj, key, row) -> Span | None:
    if key not in obj or obj[key] is None:
        return None
    pair = obj[key]
    if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
        raise InstanceError(f"line {row}: '{key}' must be a [start, end] pair")
    return Span(int(pair[0]), int(pair[1]))


def read_instances(path: Path | str) -> list[TextInstance]:
    """Read the input JSONL; one validated TextInstance per line."""
    instances = []
    with open(path, encoding="utf-8") as f:
        for row, line in enumerate(f):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise InstanceError(f"line {row}: {e}") from e
            try:
                inst = TextInstance(
                    id=obj["id"],
                    sentence=obj["sentence"],
                    kind=obj["kind"],
                    head=_span_from(obj, "head", row),
                    tail=_span_from(obj, "tail", row),
                    trigger=_span_from(obj, "trigger", row),
                    label=obj.get("label"),
                    known=bool(obj.get("known", False)),
                    split=obj.get("split", "train"),
                )
            except KeyError as e:
                raise InstanceError(f"line {row}: missing field {e}") from e
            inst.validate()
            instances.append(inst)
    kinds = {inst.kind for inst in instances}
    if len(kinds) > 1:
        raise InstanceError(f"mixed instance kinds in one file: {sorted(kinds)}")
    return instances


@dataclass
class PromptTemplate:
    """Fill-in-the-blank template whose blank should hold the type name."""

    text: str

    def validate(self) -> None:
        if self.text.count(MASK_SLOT) != 1:
            raise InstanceError(
                f"prompt needs exactly one {MASK_SLOT} slot: '{self.text}'"
            )

    def fill(self, **surfaces: str) -> tuple[str, str]:
        """Substitute surface strings; returns (prefix, suffix) around the slot."""
        self.validate()
        filled = self.text
        for key, value in surfaces.items():
            filled = filled.replace("{" + key + "}", value)
        prefix, suffix = filled.split(MASK_SLOT)
        return prefix.strip(), suffix.strip()


RELATION_PROMPT = PromptTemplate("{tail} is the [MASK] of {head}")
EVENT_PROMPT = PromptTemplate("{trigger} is a [MASK] event")
