"""Full triplet-extraction model: dual encoders, interaction, BDTF head.

Ablation switches rewire the encoder side; the head is shared by every
variant:

  full            interaction(h_b, h_p)        -> head
  no_basic        project(h_p) to d_b          -> head
  no_particular   h_b                          -> head
  no_interaction  project([h_b ; h_p]) to d_b  -> head
  single_embedding / no_gcn  change the particular branch internals only
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import torch
from torch import nn

from .bdtf import (
    BoundaryDetector,
    BoundaryGrids,
    CandidateRegion,
    LossBreakdown,
    RegionClassifier,
    RelationHead,
    ResidualConvStack,
    assemble_candidates,
    compute_loss,
    decode_triplets,
    encode_gold_grids,
    top_cells,
)
from .config import ModelConfig
from .corpus import AnnotatedSentence, GoldTriplet
from .encoders import EmbeddingTable, ParticularEncoder
from .errors import ConfigError
from .fusion import InteractionStack
from .pretrained import encode_basic, load_basic_encoder


def resolve_basic_width(encoder_name: str) -> int:
    """Hidden width of the named encoder without instantiating it.

    Needed by the basic-ablated variant, whose projection still targets the
    width the basic encoder would have had.
    """
    if encoder_name == "tiny":
        return 64
    if encoder_name.startswith("tiny:"):
        return int(encoder_name.split(":", 1)[1])
    return 768  # bert-base-style default


@dataclass
class SentenceOutput:
    grids: BoundaryGrids
    candidates: list[CandidateRegion]


class TripletModel(nn.Module):
    def __init__(
        self,
        config: ModelConfig,
        general: EmbeddingTable | None = None,
        specific: EmbeddingTable | None = None,
        basic_encoder: nn.Module | None = None,
    ):
        super().__init__()
        config.validate()
        self.config = config

        if config.no_basic:
            self.basic = None
            d_b = resolve_basic_width(config.encoder_name)
        else:
            self.basic = basic_encoder or load_basic_encoder(config.encoder_name)
            d_b = self.basic.d_b
        self.d_b = d_b

        if config.no_particular:
            self.particular = None
        else:
            if general is None:
                raise ConfigError("particular branch requires the general embedding table")
            self.particular = ParticularEncoder(
                general,
                specific,
                d_p=config.d_p,
                d_l=config.d_l,
                gcn_layers=config.effective_gcn_layers,
                single_embedding=config.single_embedding,
            )

        self.interaction = None
        self.particular_proj = None
        self.fuse_proj = None
        if config.no_basic:
            self.particular_proj = nn.Linear(config.d_l, d_b)
        elif config.no_particular:
            pass  # h_b feeds the head directly
        elif config.no_interaction:
            self.fuse_proj = nn.Linear(d_b + config.d_l, d_b)
        else:
            if config.attention_heads > 1 and (
                d_b % config.attention_heads or config.d_l % config.attention_heads
            ):
                raise ConfigError("attention_heads must divide both d_b and d_l")
            self.interaction = InteractionStack(
                d_l=config.d_l,
                iterations=config.interaction_layers,
                gcn_layers=config.effective_gcn_layers,
                dropout=config.dropout,
                heads=config.attention_heads,
                share_weights=config.share_interaction_weights,
            )

        self.relation = RelationHead(d_b, config.d_relation, pool=config.pooling)
        self.conv = ResidualConvStack(config.d_relation, config.cnn_layers)
        self.boundary = BoundaryDetector(config.d_relation)
        self.classifier = RegionClassifier(config.d_relation, pool=config.pooling)

    # --- encoding ---

    def fused_states(self, sent: AnnotatedSentence, norm_adj: torch.Tensor) -> torch.Tensor:
        cfg = self.config
        h_b = encode_basic(sent.tokens, self.basic) if self.basic is not None else None
        h_p = (
            self.particular(sent.tokens, sent.pos, norm_adj)
            if self.particular is not None
            else None
        )
        if cfg.no_basic:
            return self.particular_proj(h_p)
        if cfg.no_particular:
            return h_b
        if cfg.no_interaction:
            return self.fuse_proj(torch.cat([h_b, h_p], dim=-1))
        return self.interaction(h_b, h_p, norm_adj)

    # --- full forward ---

    def forward(
        self,
        sent: AnnotatedSentence,
        norm_adj: torch.Tensor,
        extra_starts: tuple = (),
        extra_ends: tuple = (),
    ) -> SentenceOutput:
        h = self.fused_states(sent, norm_adj)
        values = self.conv(self.relation(h))
        grids = self.boundary(values)
        k = self.config.top_k_for(len(sent))
        starts = top_cells(grids.start, k)
        ends = top_cells(grids.end, k)
        for cell in extra_starts:
            if cell not in starts:
                starts.append(cell)
        for cell in extra_ends:
            if cell not in ends:
                ends.append(cell)
        pairs = assemble_candidates(starts, ends)
        candidates = self.classifier(values, pairs)
        return SentenceOutput(grids=grids, candidates=candidates)

    def sentence_loss(self, sent: AnnotatedSentence, norm_adj: torch.Tensor) -> LossBreakdown:
        gold_start, gold_end, gold_regions = encode_gold_grids(sent.gold, len(sent))
        extra_starts: tuple = ()
        extra_ends: tuple = ()
        if self.training and self.config.train_with_gold_regions:
            extra_starts = tuple(s for s, _ in gold_regions)
            extra_ends = tuple(e for _, e in gold_regions)
        out = self.forward(sent, norm_adj, extra_starts=extra_starts, extra_ends=extra_ends)
        candidates = out.candidates
        if self.training and self.config.max_negatives > 0:
            positives = [
                c for c in candidates if (c.start_cell, c.end_cell) in gold_regions
            ]
            negatives = [
                c for c in candidates if (c.start_cell, c.end_cell) not in gold_regions
            ]
            if len(negatives) > self.config.max_negatives:
                negatives = random.sample(negatives, self.config.max_negatives)
            candidates = positives + negatives
        return compute_loss(
            out.grids,
            candidates,
            gold_start,
            gold_end,
            gold_regions,
            pos_weight=self.config.boundary_pos_weight,
        )

    @torch.no_grad()
    def decode_sentence(
        self, sent: AnnotatedSentence, norm_adj: torch.Tensor
    ) -> list[GoldTriplet]:
        was_training = self.training
        self.eval()
        try:
            out = self.forward(sent, norm_adj)
            return decode_triplets(out.candidates)
        finally:
            self.train(was_training)

    # --- optimizer plumbing ---

    def parameter_groups(self, encoder_lr: float, lr: float) -> list[dict]:
        """Pretrained-encoder parameters at encoder_lr, everything else at lr."""
        pretrained, rest = [], []
        pretrained_ids = set()
        if self.basic is not None and getattr(self.basic, "pretrained", False):
            pretrained = list(self.basic.parameters())
            pretrained_ids = {id(p) for p in pretrained}
        rest = [p for p in self.parameters() if id(p) not in pretrained_ids]
        groups = [{"params": rest, "lr": lr}]
        if pretrained:
            groups.append({"params": pretrained, "lr": encoder_lr})
        return groups

    @property
    def embedding_tables(self) -> tuple[EmbeddingTable | None, EmbeddingTable | None]:
        if self.particular is None:
            return None, None
        emb = self.particular.embedding
        return emb.general, emb.specific
