"""Deterministic hashing tokenizer for the builtin encoder.

Lowercase alphanumeric word splitting, then each word hashes into a fixed-size
vocabulary. No external vocab files, stable across hosts and runs, and
idempotent: tokenizing the join of a token list returns the same list, which
is what makes truncated-prefix identities testable.
"""

from __future__ import annotations

import hashlib
import re

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)

PAD_ID = 0
CLS_ID = 1
SEP_ID = 2
N_SPECIAL = 3


class HashingTokenizer:
    def __init__(self, vocab_size: int = 8192, max_tokens: int = 512):
        if vocab_size <= N_SPECIAL:
            raise ValueError("vocab_size must exceed the special-token count")
        self.vocab_size = vocab_size
        self.max_tokens = max_tokens
        self._cache: dict[str, int] = {}

    def words(self, text: str) -> list[str]:
        return _WORD_RE.findall(text.lower())

    def word_id(self, word: str) -> int:
        cached = self._cache.get(word)
        if cached is None:
            digest = hashlib.blake2b(word.encode("utf-8"), digest_size=8).digest()
            bucket = int.from_bytes(digest, "big") % (self.vocab_size - N_SPECIAL)
            cached = N_SPECIAL + bucket
            self._cache[word] = cached
        return cached

    def encode(self, text: str) -> list[int]:
        """Token ids for one text, truncated to max_tokens."""
        return [self.word_id(w) for w in self.words(text)[: self.max_tokens]]

    def encode_pair(self, query: str, doc_text: str) -> list[int]:
        """[CLS] query [SEP] doc ids, truncated to max_tokens overall."""
        ids = [CLS_ID]
        ids.extend(self.word_id(w) for w in self.words(query))
        ids.append(SEP_ID)
        ids.extend(self.word_id(w) for w in self.words(doc_text))
        return ids[: self.max_tokens]
