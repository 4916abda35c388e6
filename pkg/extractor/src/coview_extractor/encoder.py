"""Two-view encoding with a masked language model.

Token view: mark mentions with special tokens, embed the sentence, take the
first subtoken of each mention (head and tail concatenated for relations,
trigger alone for events). Mask view: append the filled type prompt to the
marked sentence and take the embedding at the prompt's mask slot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from transformers import AutoModelForMaskedLM, AutoTokenizer

from .instances import (
    EVENT_PROMPT,
    KIND_EVENT,
    KIND_RELATION,
    PromptTemplate,
    RELATION_PROMPT,
    TextInstance,
)

MARKERS = ("<h>", "</h>", "<t>", "</t>", "<tgr>", "</tgr>")


class EncodingError(ValueError):
    """Sentence cannot be encoded: over-length after truncation, empty mention."""


@dataclass
class EncodedInput:
    ids: list[int]
    positions: dict[str, int]  # named positions: head, tail, trigger, mask


class MaskedLmEncoder:
    """Wraps a masked LM and tokenizer; adds seeded marker embeddings."""

    def __init__(
        self,
        model_name_or_path: str,
        seed: int = 0,
        max_length: int | None = None,
        batch_size: int = 16,
        relation_prompt: PromptTemplate = RELATION_PROMPT,
        event_prompt: PromptTemplate = EVENT_PROMPT,
    ):
        relation_prompt.validate()
        event_prompt.validate()
        self.tokenizer = AutoTokenizer.from_pretrained(model_name_or_path)
        self.model = AutoModelForMaskedLM.from_pretrained(model_name_or_path)
        self.model.eval()
        self.batch_size = batch_size
        self.relation_prompt = relation_prompt
        self.event_prompt = event_prompt

        limit = getattr(self.model.config, "max_position_embeddings", 512)
        self.max_length = min(max_length or limit, limit)

        added = self.tokenizer.add_special_tokens(
            {"additional_special_tokens": list(MARKERS)}
        )
        if added:
            old_rows = self.model.get_input_embeddings().weight.shape[0]
            self.model.resize_token_embeddings(len(self.tokenizer), mean_resizing=False)
            gen = torch.Generator().manual_seed(seed)
            std = getattr(self.model.config, "initializer_range", 0.02)
            with torch.no_grad():
                fresh = torch.normal(
                    0.0, std, size=(len(self.tokenizer) - old_rows, self.model.config.hidden_size),
                    generator=gen,
                )
                self.model.get_input_embeddings().weight[old_rows:] = fresh
        self.marker_ids = {m: self.tokenizer.convert_tokens_to_ids(m) for m in MARKERS}

    @property
    def width(self) -> int:
        return int(self.model.config.hidden_size)

    def _tok(self, text: str) -> list[int]:
        if not text.strip():
            return []
        return self.tokenizer(text, add_special_tokens=False)["input_ids"]

    def _assemble(
        self,
        inst: TextInstance,
        with_prompt: bool,
    ) -> EncodedInput:
        """Token ids for one instance: [CLS] marked-sentence [prompt] [SEP].

        Over-length inputs are trimmed from the unmarked trailing context
        first, then the leading context; anything beyond that is an error
        because a marked span or the mask slot would be lost.
        """
        tok = self.tokenizer
        s = inst.sentence
        if inst.kind == KIND_RELATION:
            first, second = sorted((("head", inst.head), ("tail", inst.tail)), key=lambda kv: kv[1].start)
            open1, close1 = ("<h>", "</h>") if first[0] == "head" else ("<t>", "</t>")
            open2, close2 = ("<h>", "</h>") if second[0] == "head" else ("<t>", "</t>")
            pre = self._tok(s[: first[1].start])
            m1 = self._tok(first[1].text(s))
            mid = self._tok(s[first[1].end : second[1].start])
            m2 = self._tok(second[1].text(s))
            post = self._tok(s[second[1].end :])
            if not m1 or not m2:
                raise EncodingError(f"{inst.id}: a mention tokenizes to nothing")
            marked = [
                ("pre", pre),
                ("open1", [self.marker_ids[open1]]),
                (first[0], m1),
                ("close1", [self.marker_ids[close1]]),
                ("mid", mid),
                ("open2", [self.marker_ids[open2]]),
                (second[0], m2),
                ("close2", [self.marker_ids[close2]]),
                ("post", post),
            ]
            tracked = {"head", "tail"}
        else:
            span = inst.trigger
            pre = self._tok(s[: span.start])
            m1 = self._tok(span.text(s))
            post = self._tok(s[span.end :])
            if not m1:
                raise EncodingError(f"{inst.id}: trigger tokenizes to nothing")
            marked = [
                ("pre", pre),
                ("open1", [self.marker_ids["<tgr>"]]),
                ("trigger", m1),
                ("close1", [self.marker_ids["</tgr>"]]),
                ("post", post),
            ]
            tracked = {"trigger"}

        prompt_ids: list[int] = []
        mask_offset = -1
        if with_prompt:
            if inst.kind == KIND_RELATION:
                prefix, suffix = self.relation_prompt.fill(
                    head=inst.head.text(s), tail=inst.tail.text(s)
                )
            else:
                prefix, suffix = self.event_prompt.fill(trigger=inst.trigger.text(s))
            left = self._tok(prefix)
            right = self._tok(suffix)
            prompt_ids = left + [tok.mask_token_id] + right
            mask_offset = len(left)

        budget = self.max_length - 2 - len(prompt_ids)  # [CLS] and [SEP]
        lengths = {name: len(ids) for name, ids in marked}
        overflow = sum(lengths.values()) - budget
        for trim in ("post", "pre"):
            if overflow > 0:
                cut = min(overflow, lengths[trim])
                lengths[trim] -= cut
                overflow -= cut
        if overflow > 0:
            raise EncodingError(
                f"{inst.id}: sentence too long; marked spans would not survive truncation"
            )

        ids = [tok.cls_token_id]
        positions: dict[str, int] = {}
        for name, seg in marked:
            seg = seg[: lengths[name]] if name == "post" else seg
            if name == "pre":
                seg = seg[len(seg) - lengths["pre"] :]
            if name in tracked:
                positions[name] = len(ids)
            ids.extend(seg)
        if with_prompt:
            positions["mask"] = len(ids) + mask_offset
            ids.extend(prompt_ids)
        ids.append(tok.sep_token_id)
        return EncodedInput(ids, positions)

    def _hidden_states(self, encoded: list[EncodedInput]) -> list[torch.Tensor]:
        """Final hidden states per instance, batched with padding."""
        outputs: list[torch.Tensor] = []
        pad = self.tokenizer.pad_token_id
        for start in range(0, len(encoded), self.batch_size):
            chunk = encoded[start : start + self.batch_size]
            width = max(len(e.ids) for e in chunk)
            input_ids = torch.full((len(chunk), width), pad, dtype=torch.long)
            attention = torch.zeros((len(chunk), width), dtype=torch.long)
            for i, e in enumerate(chunk):
                input_ids[i, : len(e.ids)] = torch.tensor(e.ids)
                attention[i, : len(e.ids)] = 1
            with torch.no_grad():
                out = self.model(
                    input_ids=input_ids,
                    attention_mask=attention,
                    output_hidden_states=True,
                )
            hidden = out.hidden_states[-1]
            outputs.extend(hidden[i, : len(e.ids)] for i, e in enumerate(chunk))
        return outputs

    def encode_token_view(self, instances: list[TextInstance]) -> np.ndarray:
        """First-subtoken embeddings; head and tail concatenated for relations."""
        if not instances:
            kind = KIND_RELATION
            return np.zeros((0, 2 * self.width), dtype=np.float32)
        kind = instances[0].kind
        encoded = [self._assemble(inst, with_prompt=False) for inst in instances]
        hidden = self._hidden_states(encoded)
        rows = []
        for e, h in zip(encoded, hidden):
            if kind == KIND_RELATION:
                vec = torch.cat([h[e.positions["head"]], h[e.positions["tail"]]])
            else:
                vec = h[e.positions["trigger"]]
            rows.append(vec.numpy())
        return np.stack(rows).astype(np.float32)

    def encode_mask_view(self, instances: list[TextInstance]) -> np.ndarray:
        """Embedding at the type prompt's mask slot."""
        if not instances:
            return np.zeros((0, self.width), dtype=np.float32)
        encoded = [self._assemble(inst, with_prompt=True) for inst in instances]
        hidden = self._hidden_states(encoded)
        rows = [h[e.positions["mask"]].numpy() for e, h in zip(encoded, hidden)]
        return np.stack(rows).astype(np.float32)

    def predict_names(self, instances: list[TextInstance], top_k: int = 10) -> list[list[str]]:
        """Top vocabulary words at the mask slot, skipping word pieces."""
        if top_k <= 0 or not instances:
            return [[] for _ in instances]
        encoded = [self._assemble(inst, with_prompt=True) for inst in instances]
        skip = set(self.tokenizer.all_special_ids)
        names: list[list[str]] = []
        pad = self.tokenizer.pad_token_id
        for start in range(0, len(encoded), self.batch_size):
            chunk = encoded[start : start + self.batch_size]
            width = max(len(e.ids) for e in chunk)
            input_ids = torch.full((len(chunk), width), pad, dtype=torch.long)
            attention = torch.zeros((len(chunk), width), dtype=torch.long)
            for i, e in enumerate(chunk):
                input_ids[i, : len(e.ids)] = torch.tensor(e.ids)
                attention[i, : len(e.ids)] = 1
            with torch.no_grad():
                logits = self.model(input_ids=input_ids, attention_mask=attention).logits
            for i, e in enumerate(chunk):
                scores = logits[i, e.positions["mask"]]
                ranked = torch.argsort(scores, descending=True).tolist()
                words = []
                for token_id in ranked:
                    if token_id in skip:
                        continue
                    token = self.tokenizer.convert_ids_to_tokens(token_id)
                    if token.startswith("##"):
                        continue
                    words.append(token)
                    if len(words) == top_k:
                        break
                names.append(words)
        return names
