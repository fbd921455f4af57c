"""Basic contextual encoders.

Two interchangeable families sit behind the same surface:

* ``TinyBasicEncoder`` — a small self-contained transformer with a
  deterministic hash-chunk tokenizer. Trains from scratch, needs no external
  files, and is the encoder used throughout the test suite.
* ``HFBasicEncoder`` — adapter around a Hugging Face transformer (the
  production choice, e.g. bert-base-uncased). Loaded lazily; weights are
  resolved through ``ASTE_ENCODER_CACHE`` or the standard HF cache.

Both expose: ``tokenizer`` (a SubwordTokenizer), ``d_b``, ``pretrained``,
and ``subword_states(ids)``.
"""

from __future__ import annotations

import hashlib
import os

import torch
from torch import nn

from .align import pool_subwords, tokenize_with_alignment
from .errors import ConfigError

ENCODER_CACHE_ENV = "ASTE_ENCODER_CACHE"


class ChunkTokenizer:
    """Deterministic subword tokenizer: lowercase, split into fixed-size
    character chunks, hash each chunk into a bounded id space.

    There is no out-of-vocabulary word (every chunk hashes somewhere), which
    keeps the tiny encoder fully self-contained.
    """

    start_id = 0
    end_id = 1
    unk_id = 2
    _reserved = 3

    def __init__(self, vocab_size: int = 4096, chunk: int = 4, max_subwords: int = 512):
        if vocab_size <= self._reserved:
            raise ConfigError("vocab_size must exceed the reserved id count")
        self.vocab_size = vocab_size
        self.chunk = chunk
        self.max_subwords = max_subwords

    def _piece_id(self, piece: str) -> int:
        digest = hashlib.blake2b(piece.encode("utf-8"), digest_size=8).digest()
        return self._reserved + int.from_bytes(digest, "little") % (
            self.vocab_size - self._reserved
        )

    def pieces(self, word: str) -> list[str]:
        w = word.lower()
        return [w[i : i + self.chunk] for i in range(0, len(w), self.chunk)]

    def subword_ids(self, word: str) -> list[int]:
        return [self._piece_id(p) for p in self.pieces(word)]


class TinyBasicEncoder(nn.Module):
    """Small trainable contextual encoder used as the offline default.

    Subword embeddings through a stacked bidirectional LSTM; recurrent layers
    train stably from scratch at this scale, unlike a cold transformer.
    """

    pretrained = False

    def __init__(
        self,
        d_b: int = 64,
        n_layers: int = 2,
        vocab_size: int = 4096,
        max_subwords: int = 512,
        dropout: float = 0.1,
    ):
        super().__init__()
        if d_b % 2 != 0:
            raise ConfigError(f"d_b={d_b} must be even (two LSTM directions)")
        self.tokenizer = ChunkTokenizer(vocab_size=vocab_size, max_subwords=max_subwords)
        self.d_b = d_b
        self.embed = nn.Embedding(vocab_size, d_b)
        self.position = nn.Embedding(max_subwords, d_b)
        self.lstm = nn.LSTM(
            input_size=d_b,
            hidden_size=d_b // 2,
            num_layers=n_layers,
            bidirectional=True,
            dropout=dropout if n_layers > 1 else 0.0,
            batch_first=True,
        )

    def subword_states(self, ids) -> torch.Tensor:
        ids_t = torch.as_tensor(ids, dtype=torch.long, device=self.embed.weight.device)
        pos = torch.arange(len(ids), device=ids_t.device)
        x = self.embed(ids_t) + self.position(pos)
        out, _ = self.lstm(x.unsqueeze(0))
        return out.squeeze(0)

    forward = subword_states


class HFTokenizerAdapter:
    """SubwordTokenizer view over a Hugging Face tokenizer."""

    def __init__(self, hf_tokenizer, max_subwords: int):
        self._tok = hf_tokenizer
        self.start_id = hf_tokenizer.cls_token_id
        self.end_id = hf_tokenizer.sep_token_id
        self.unk_id = hf_tokenizer.unk_token_id
        self.max_subwords = max_subwords

    def subword_ids(self, word: str) -> list[int]:
        return self._tok.convert_tokens_to_ids(self._tok.tokenize(word))


class HFBasicEncoder(nn.Module):
    """Adapter around a pretrained Hugging Face transformer encoder."""

    pretrained = True

    def __init__(self, model, hf_tokenizer):
        super().__init__()
        self.model = model
        limit = min(
            int(getattr(hf_tokenizer, "model_max_length", 512) or 512),
            int(getattr(model.config, "max_position_embeddings", 512)),
        )
        self.tokenizer = HFTokenizerAdapter(hf_tokenizer, max_subwords=limit)
        self.d_b = model.config.hidden_size

    @classmethod
    def from_name(cls, name: str) -> "HFBasicEncoder":
        try:
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ConfigError(
                f"encoder {name!r} needs the 'transformers' package (pip install aste-dual[hf])"
            ) from exc
        cache_dir = os.environ.get(ENCODER_CACHE_ENV)
        try:
            tok = AutoTokenizer.from_pretrained(name, cache_dir=cache_dir)
            model = AutoModel.from_pretrained(name, cache_dir=cache_dir)
        except Exception as exc:
            raise ConfigError(f"cannot load pretrained encoder {name!r}: {exc}") from exc
        return cls(model, tok)

    def subword_states(self, ids) -> torch.Tensor:
        device = next(self.model.parameters()).device
        ids_t = torch.as_tensor(ids, dtype=torch.long, device=device).unsqueeze(0)
        return self.model(input_ids=ids_t).last_hidden_state.squeeze(0)

    forward = subword_states


def load_basic_encoder(encoder_name: str) -> nn.Module:
    """Build the encoder named by the config.

    ``tiny`` / ``tiny:<width>`` construct the self-contained encoder; any
    other name is treated as a Hugging Face model identifier.
    """
    if encoder_name == "tiny" or encoder_name.startswith("tiny:"):
        d_b = 64
        if ":" in encoder_name:
            try:
                d_b = int(encoder_name.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"bad tiny encoder spec {encoder_name!r}") from None
        return TinyBasicEncoder(d_b=d_b)
    return HFBasicEncoder.from_name(encoder_name)


def encode_basic(tokens, encoder) -> torch.Tensor:
    """Word-level contextual states: tokenize, run the encoder, pool subwords."""
    ids, amap = tokenize_with_alignment(tokens, encoder.tokenizer)
    states = encoder.subword_states(ids)
    return pool_subwords(states, amap)
