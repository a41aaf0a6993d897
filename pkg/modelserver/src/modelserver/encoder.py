"""Encoder backends: text -> fixed-width embedding, (query, doc) -> score.

The builtin backend is a small randomly-initialized (seeded) transformer
encoder running real attention inference on CPU: deterministic, offline, and
dimension-compatible with the wire contract. Any pretrained checkpoint can be
swapped in through the ``transformers`` backend without changing the API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .pooling import mean_pool
from .tokenizer import HashingTokenizer


@dataclass(frozen=True)
class ModelConfig:
    backend: str = "builtin"           # builtin | transformers
    model_name: str | None = None      # checkpoint path for the transformers backend
    dim: int = 768
    max_tokens: int = 512
    uses_url: bool = False
    seed: int = 0
    layers: int = 2
    heads: int = 8
    vocab_size: int = 8192


def doc_to_text(doc: dict, uses_url: bool) -> str:
    """title + separator + body, with the url appended only when enabled."""
    text = f"{doc.get('title', '')} ␟ {doc.get('body', '')}"
    if uses_url:
        text = f"{text} ␟ {doc.get('url', '')}"
    return text


class _TinyTransformer(nn.Module):
    """Token embedding + sinusoidal positions + a stack of encoder layers."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.embedding = nn.Embedding(cfg.vocab_size, cfg.dim)
        layer = nn.TransformerEncoderLayer(
            d_model=cfg.dim,
            nhead=cfg.heads,
            dim_feedforward=2 * cfg.dim,
            dropout=0.0,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=cfg.layers)
        self.score_head = nn.Linear(cfg.dim, 1)
        position = torch.arange(cfg.max_tokens).unsqueeze(1)
        term = torch.exp(
            torch.arange(0, cfg.dim, 2) * (-math.log(10000.0) / cfg.dim)
        )
        encoding = torch.zeros(cfg.max_tokens, cfg.dim)
        encoding[:, 0::2] = torch.sin(position * term)
        encoding[:, 1::2] = torch.cos(position * term)
        self.register_buffer("positions", encoding)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        hidden = self.embedding(ids) + self.positions[: ids.shape[1]]
        return self.encoder(hidden)


class BuiltinEncoder:
    """Seeded tiny transformer: same host + same input -> bit-equal output."""

    def __init__(self, cfg: ModelConfig = ModelConfig()):
        self.cfg = cfg
        self.tokenizer = HashingTokenizer(
            vocab_size=cfg.vocab_size, max_tokens=cfg.max_tokens
        )
        torch.manual_seed(cfg.seed)
        self.model = _TinyTransformer(cfg)
        self.model.eval()

    @property
    def dim(self) -> int:
        return self.cfg.dim

    @property
    def max_tokens(self) -> int:
        return self.cfg.max_tokens

    @property
    def uses_url(self) -> bool:
        return self.cfg.uses_url

    def _token_states(self, ids: list[int]) -> np.ndarray:
        batch = torch.tensor([ids], dtype=torch.long)
        with torch.no_grad():
            hidden = self.model(batch)
        return hidden[0].numpy()

    def can_embed(self, text: str) -> bool:
        return bool(self.tokenizer.encode(text))

    def embed(self, text: str) -> np.ndarray:
        """Tokenize, truncate, encode, mean-pool over real (non-pad) tokens."""
        ids = self.tokenizer.encode(text)
        if not ids:
            raise ValueError("cannot embed a text with no tokens")
        states = self._token_states(ids)
        return mean_pool(states, [1] * len(ids))

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        # Texts run one at a time: no padding, so a text's vector never
        # depends on what else shares the request.
        return [self.embed(text) for text in texts]

    def score(self, query: str, doc: dict) -> float:
        ids = self.tokenizer.encode_pair(query, doc_to_text(doc, self.cfg.uses_url))
        if not ids:
            raise ValueError("cannot score an empty (query, doc) pair")
        batch = torch.tensor([ids], dtype=torch.long)
        with torch.no_grad():
            hidden = self.model(batch)
            value = self.model.score_head(hidden[0, 0])
        return float(value.item())

    def score_batch(self, query: str, docs: list[dict]) -> list[float]:
        return [self.score(query, doc) for doc in docs]


class TransformersEncoder:
    """Adapter for a pretrained checkpoint (Hugging Face ``transformers``).

    The encoder path mean-pools the last hidden state over the attention mask;
    the scoring path expects a sequence-classification head producing one
    logit. Requires the checkpoint to be available locally.
    """

    def __init__(self, cfg: ModelConfig):
        if not cfg.model_name:
            raise ValueError("transformers backend needs model_name")
        from transformers import AutoModel, AutoModelForSequenceClassification, AutoTokenizer

        self.cfg = cfg
        self.tokenizer = AutoTokenizer.from_pretrained(cfg.model_name)
        self.model = AutoModel.from_pretrained(cfg.model_name)
        self.model.eval()
        self._scorer = None
        self._scorer_cls = AutoModelForSequenceClassification

    @property
    def dim(self) -> int:
        return self.cfg.dim

    @property
    def max_tokens(self) -> int:
        return self.cfg.max_tokens

    @property
    def uses_url(self) -> bool:
        return self.cfg.uses_url

    def can_embed(self, text: str) -> bool:
        return bool(text.strip())

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        encoded = self.tokenizer(
            texts,
            truncation=True,
            max_length=self.cfg.max_tokens,
            padding=True,
            return_tensors="pt",
        )
        with torch.no_grad():
            output = self.model(**encoded)
        states = output.last_hidden_state.numpy()
        masks = encoded["attention_mask"].numpy()
        return [mean_pool(states[i], masks[i]) for i in range(len(texts))]

    def score_batch(self, query: str, docs: list[dict]) -> list[float]:
        if self._scorer is None:
            self._scorer = self._scorer_cls.from_pretrained(self.cfg.model_name)
            self._scorer.eval()
        pairs = [(query, doc_to_text(doc, self.cfg.uses_url)) for doc in docs]
        encoded = self.tokenizer(
            pairs,
            truncation=True,
            max_length=self.cfg.max_tokens,
            padding=True,
            return_tensors="pt",
        )
        with torch.no_grad():
            logits = self._scorer(**encoded).logits
        return [float(v) for v in logits[:, -1]]


def load_encoder(cfg: ModelConfig):
    if cfg.backend == "builtin":
        return BuiltinEncoder(cfg)
    if cfg.backend == "transformers":
        return TransformersEncoder(cfg)
    raise ValueError(f"unknown backend {cfg.backend!r}")
