"""Masked-LM backend: one model per process, full-vocabulary mask
distributions, and the vocabulary export used for corpus filtering."""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

log = logging.getLogger(__name__)

MASK_PLACEHOLDER = "[MASK]"
DEFAULT_RANK_HORIZON = 100

# word-initial markers used by BPE/sentencepiece vocabularies
_SPACE_MARKERS = ("Ġ", "▁")  # Ġ, ▁


class RequestError(Exception):
    """Per-request validation failure; collected into the 400 failed_ids."""


@dataclass(frozen=True)
class ModelHandle:
    name: str
    mask_token: str
    vocab_size: int
    convention_notes: str

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "mask_token": self.mask_token,
            "vocab_size": self.vocab_size,
            "convention_notes": self.convention_notes,
        }


class MaskedLMBackend:
    """Wraps a HuggingFace masked LM behind the scoring semantics.

    Forward passes are serialized with a single lock to bound memory; the
    rest of request handling may run concurrently.
    """

    def __init__(
        self,
        name: str,
        model_path: Optional[str] = None,
        rank_horizon: int = DEFAULT_RANK_HORIZON,
        local_files_only: bool = False,
    ):
        from transformers import AutoModelForMaskedLM, AutoTokenizer

        source = model_path or name
        self.name = name
        self.tokenizer = AutoTokenizer.from_pretrained(source, local_files_only=local_files_only)
        self.model = AutoModelForMaskedLM.from_pretrained(source, local_files_only=local_files_only)
        self.model.eval()
        self.rank_horizon = rank_horizon
        self._lock = threading.Lock()

        self.mask_token = self.tokenizer.mask_token
        if self.mask_token is None:
            raise ValueError(f"{name} has no mask token; not a masked LM")
        self.mask_token_id = self.tokenizer.mask_token_id
        # BPE-style vocabularies mark word-initial tokens with a space
        # glyph; mid-sentence gold tokens must be encoded with a leading
        # space to land on the word-initial piece.
        self._space_marked = any(
            str(t).startswith(_SPACE_MARKERS) for t in list(self.tokenizer.get_vocab())[:2000]
        )
        self._special_ids = set(self.tokenizer.all_special_ids)

    @property
    def handle(self) -> ModelHandle:
        notes = (
            "mask placeholder '[MASK]' is replaced with the native mask token in place; "
            + (
                "BPE vocabulary with space-marked word-initial tokens: gold tokens are "
                "encoded with a leading space (mid-sentence convention) and exported "
                "tokens have the space marker stripped"
                if self._space_marked
                else "wordpiece vocabulary: gold tokens are encoded bare; '##' continuation "
                "pieces are excluded from the vocabulary export"
            )
        )
        return ModelHandle(
            name=self.name,
            mask_token=self.mask_token,
            vocab_size=len(self.tokenizer),
            convention_notes=notes,
        )

    # --- token conventions -------------------------------------------------

    def _decode_token(self, token_id: int) -> str:
        token = self.tokenizer.convert_ids_to_tokens(int(token_id))
        for marker in _SPACE_MARKERS:
            if token.startswith(marker):
                return token[len(marker):]
        return token

    def gold_token_id(self, gold_token: str) -> int:
        """Single vocabulary id for the gold surface form, or RequestError
        when it does not map to exactly one non-special token."""
        text = f" {gold_token}" if self._space_marked else gold_token
        ids = self.tokenizer.encode(text, add_special_tokens=False)
        if len(ids) != 1:
            raise RequestError(
                f"gold token {gold_token!r} maps to {len(ids)} vocabulary pieces, need exactly 1"
            )
        token_id = ids[0]
        if token_id == self.tokenizer.unk_token_id:
            raise RequestError(f"gold token {gold_token!r} is out of vocabulary")
        return token_id

    # --- scoring -------------------------------------------------------------

    def _mask_distribution(self, text: str) -> np.ndarray:
        if text.count(MASK_PLACEHOLDER) != 1:
            raise RequestError(
                f"text must contain exactly one {MASK_PLACEHOLDER}, got {text.count(MASK_PLACEHOLDER)}"
            )
        mapped = text.replace(MASK_PLACEHOLDER, self.mask_token)
        encoded = self.tokenizer(mapped, return_tensors="pt", truncation=True)
        mask_positions = (encoded["input_ids"][0] == self.mask_token_id).nonzero().flatten()
        if len(mask_positions) != 1:
            raise RequestError(
                f"text maps to {len(mask_positions)} native mask tokens after placeholder "
                "replacement, need exactly 1"
            )
        with self._lock, torch.no_grad():
            logits = self.model(**encoded).logits
        probs = torch.softmax(logits[0, mask_positions[0]].float(), dim=-1)
        return probs.numpy()

    def score(self, text: str, gold_token: Optional[str] = None, top_k: int = 10) -> dict:
        """One protocol result entry: top-k tokens (prob desc, surface asc),
        full-distribution entropy in bits, and gold probability/rank when a
        gold token is supplied."""
        gold_id = self.gold_token_id(gold_token) if gold_token is not None else None
        probs = self._mask_distribution(text)

        # over-fetch then break float ties on the decoded surface
        n_fetch = min(len(probs), max(top_k + 32, 64))
        candidate_ids = np.argpartition(-probs, n_fetch - 1)[:n_fetch]
        candidates = [(self._decode_token(i), float(probs[i])) for i in candidate_ids]
        candidates.sort(key=lambda pair: (-pair[1], pair[0]))
        top = [[token, prob] for token, prob in candidates[:top_k] if prob > 0.0]

        positive = probs[probs > 0.0]
        entropy_bits = float(-(positive * np.log2(positive)).sum())

        result: dict = {"top": top, "entropy_bits": max(entropy_bits, 0.0)}
        if gold_id is not None:
            gold_prob = float(probs[gold_id])
            result["gold_prob"] = gold_prob
            greater = int((probs > gold_prob).sum())
            if greater < self.rank_horizon and gold_prob > 0.0:
                ties = np.flatnonzero(probs == gold_prob)
                gold_surface = self._decode_token(gold_id)
                ties_before = sum(
                    1 for i in ties if i != gold_id and self._decode_token(i) < gold_surface
                )
                rank = greater + ties_before + 1
                if rank <= self.rank_horizon:
                    result["gold_rank"] = rank
        return result

    # --- vocabulary export ------------------------------------------------------

    def vocab_export(self) -> list[str]:
        """Decoded single-token vocabulary in corpus-filter normalization:
        special tokens and continuation pieces dropped, space markers
        stripped, first occurrence kept on collisions. Deterministic."""
        out = []
        seen = set()
        for token_id in range(len(self.tokenizer)):
            if token_id in self._special_ids:
                continue
            raw = self.tokenizer.convert_ids_to_tokens(token_id)
            if raw is None:
                continue
            if self._space_marked:
                if not raw.startswith(_SPACE_MARKERS):
                    continue  # mid-word continuation piece
                surface = raw[1:]
            else:
                if raw.startswith("##"):
                    continue
                surface = raw
            if not surface or surface in seen:
                continue
            seen.add(surface)
            out.append(surface)
        return out


# --- offline test model ----------------------------------------------------------


TINY_VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "paris", "rome", "berlin", "tokyo", "france", "italy", "spain", "germany",
    "russia", "japan", "europe", "asia", "africa", "city", "town", "country",
    "state", "continent", "river", "capital", "place", "is", "the", "of", "a",
    "an", "and", "which", "in", "located", "municipality", ".", ",",
    "mad", "##rid", "uni", "##verse",
]


def build_tiny_model(directory: str, seed: int = 7) -> str:
    """Construct a deterministic, randomly initialized wordpiece masked LM
    for offline tests. Returns the directory it was saved to."""
    from transformers import BertConfig, BertForMaskedLM, BertTokenizerFast

    from pathlib import Path

    directory = str(directory)
    Path(directory).mkdir(parents=True, exist_ok=True)
    vocab_file = Path(directory) / "vocab.txt"
    vocab_file.write_text("\n".join(TINY_VOCAB) + "\n", encoding="utf-8")

    tokenizer = BertTokenizerFast(str(vocab_file), do_lower_case=True)
    tokenizer.save_pretrained(directory)

    torch.manual_seed(seed)
    config = BertConfig(
        vocab_size=len(TINY_VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=128,
    )
    model = BertForMaskedLM(config)
    model.save_pretrained(directory)
    return directory
