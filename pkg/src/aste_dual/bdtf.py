"""Boundary-driven table filling.

An aspect-opinion pair is a rectangular region in the n x n word-pair grid:
rows index aspect words, columns opinion words, the region is located by its
top-left start cell (a_s, o_s) and bottom-right end cell (a_e, o_e). The head
builds a relation tensor over all word pairs, refines it with a residual
convolution stack, scores every cell as a region start/end, pairs the top-k
cells of each grid, classifies each paired region into
{POS, NEU, NEG, INVALID}, and decodes the non-INVALID regions into triplets.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .corpus import GoldTriplet, Sentiment
from .errors import ConfigError, DataError

log = logging.getLogger(__name__)

Cell = tuple[int, int]

INVALID_CLASS = 3
N_REGION_CLASSES = 4


@dataclass
class BoundaryGrids:
    """Per-cell start/end probabilities; logits kept for stable losses."""

    start: torch.Tensor  # n x n in [0, 1]
    end: torch.Tensor
    start_logits: torch.Tensor | None = None
    end_logits: torch.Tensor | None = None


@dataclass
class CandidateRegion:
    start_cell: Cell
    end_cell: Cell
    sentiment_dist: torch.Tensor  # 4-vector over POS, NEU, NEG, INVALID
    logits: torch.Tensor | None = None

    def __post_init__(self):
        if self.start_cell[0] > self.end_cell[0] or self.start_cell[1] > self.end_cell[1]:
            raise DataError(
                f"region start {self.start_cell} not <= end {self.end_cell}"
            )


@dataclass
class LossBreakdown:
    l_start: torch.Tensor
    l_end: torch.Tensor
    l_sentiment: torch.Tensor

    @property
    def total(self) -> torch.Tensor:
        return self.l_start + self.l_end + self.l_sentiment


def _slice_bounds(n: int, dtype=torch.long):
    ar = torch.arange(n)
    lo = torch.minimum(ar[:, None], ar[None, :])
    hi = torch.maximum(ar[:, None], ar[None, :])
    return lo, hi


class RelationHead(nn.Module):
    """Pairwise relation representations r_ij = gelu(Linear(pool(h[i..j])))
    where the pool runs over the contiguous word slice between i and j."""

    def __init__(self, d_in: int, d_relation: int, pool: str = "mean"):
        super().__init__()
        if pool not in ("mean", "max"):
            raise ConfigError(f"unknown pooling mode {pool!r}")
        self.pool = pool
        self.linear = nn.Linear(d_in, d_relation)

    def pair_representation(self, h: torch.Tensor, i: int, j: int) -> torch.Tensor:
        n = h.shape[0]
        if not (0 <= i < n and 0 <= j < n):
            raise DataError(f"pair indices ({i}, {j}) out of range for n={n}")
        lo, hi = min(i, j), max(i, j)
        sl = h[lo : hi + 1]
        pooled = sl.mean(dim=0) if self.pool == "mean" else sl.max(dim=0).values
        return F.gelu(self.linear(pooled))

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        """All-pairs relation tensor, n x n x d_relation."""
        n = h.shape[0]
        if self.pool == "mean":
            pref = torch.cat([torch.zeros(1, h.shape[1], dtype=h.dtype), torch.cumsum(h, dim=0)])
            lo, hi = _slice_bounds(n)
            sums = pref[hi + 1] - pref[lo]
            pooled = sums / (hi - lo + 1).unsqueeze(-1).to(h.dtype)
        else:
            run = [[None] * n for _ in range(n)]
            for i in range(n):
                acc = h[i]
                run[i][i] = acc
                for j in range(i + 1, n):
                    acc = torch.maximum(acc, h[j])
                    run[i][j] = acc
            pooled = torch.stack(
                [torch.stack([run[min(i, j)][max(i, j)] for j in range(n)]) for i in range(n)]
            )
        return F.gelu(self.linear(pooled))


class ResidualConvStack(nn.Module):
    """Channel-preserving 3x3 convolutions with ReLU, each in an additive
    residual wrapper; the relation tensor keeps its shape."""

    def __init__(self, d_relation: int, layers: int, kernel: int = 3):
        super().__init__()
        if layers < 0:
            raise ConfigError(f"layer count must be non-negative, got {layers}")
        self.convs = nn.ModuleList(
            [
                nn.Conv2d(d_relation, d_relation, kernel, padding=kernel // 2)
                for _ in range(layers)
            ]
        )

    def forward(self, values: torch.Tensor) -> torch.Tensor:
        x = values.permute(2, 0, 1).unsqueeze(0)
        for conv in self.convs:
            x = torch.relu(conv(x)) + x
        return x.squeeze(0).permute(1, 2, 0)


class BoundaryDetector(nn.Module):
    """Per-cell sigmoid scores for region starts and ends.

    Biases start at the sparse prior (most cells are not boundaries) so early
    training spends its gradient on the rare positive cells.
    """

    PRIOR_LOGIT = -2.0

    def __init__(self, d_relation: int):
        super().__init__()
        self.start_linear = nn.Linear(d_relation, 1)
        self.end_linear = nn.Linear(d_relation, 1)
        nn.init.constant_(self.start_linear.bias, self.PRIOR_LOGIT)
        nn.init.constant_(self.end_linear.bias, self.PRIOR_LOGIT)

    def forward(self, values: torch.Tensor) -> BoundaryGrids:
        start_logits = self.start_linear(values).squeeze(-1)
        end_logits = self.end_linear(values).squeeze(-1)
        return BoundaryGrids(
            start=torch.sigmoid(start_logits),
            end=torch.sigmoid(end_logits),
            start_logits=start_logits,
            end_logits=end_logits,
        )


def top_cells(grid: torch.Tensor, k: int) -> list[Cell]:
    """k highest-probability cells, ties broken row-major (smaller aspect
    index first, then smaller opinion index). k is clamped to the grid size."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    n = grid.shape[0]
    if k > n * n:
        log.warning("top-k %d exceeds grid size %d; clamping", k, n * n)
        k = n * n
    flat = grid.detach().cpu().numpy().ravel()
    order = sorted(range(n * n), key=lambda f: (-flat[f], f))
    return [(f // n, f % n) for f in order[:k]]


def assemble_candidates(
    starts: Sequence[Cell], ends: Sequence[Cell]
) -> list[tuple[Cell, Cell]]:
    """Cartesian start x end pairs filtered to component-wise start <= end,
    ordered start-major then end, both row-major."""
    pairs = []
    for s in sorted(starts):
        for e in sorted(ends):
            if s[0] <= e[0] and s[1] <= e[1]:
                pairs.append((s, e))
    return pairs


class RegionClassifier(nn.Module):
    """Sentiment distribution for a candidate region from its corner
    representations and the pooled region context."""

    PRIOR_LOGIT = 2.0  # most candidates are INVALID; start there

    def __init__(self, d_relation: int, pool: str = "mean"):
        super().__init__()
        if pool not in ("mean", "max"):
            raise ConfigError(f"unknown pooling mode {pool!r}")
        self.pool = pool
        self.linear = nn.Linear(3 * d_relation, N_REGION_CLASSES)
        with torch.no_grad():
            self.linear.bias[INVALID_CLASS] = self.PRIOR_LOGIT

    def _region_context(self, values: torch.Tensor, pairs) -> torch.Tensor:
        a_s = torch.tensor([p[0][0] for p in pairs])
        o_s = torch.tensor([p[0][1] for p in pairs])
        a_e = torch.tensor([p[1][0] for p in pairs])
        o_e = torch.tensor([p[1][1] for p in pairs])
        if self.pool == "mean":
            n, _, d = values.shape
            pref = torch.zeros(n + 1, n + 1, d, dtype=values.dtype)
            pref[1:, 1:] = torch.cumsum(torch.cumsum(values, dim=0), dim=1)
            total = (
                pref[a_e + 1, o_e + 1]
                - pref[a_s, o_e + 1]
                - pref[a_e + 1, o_s]
                + pref[a_s, o_s]
            )
            area = ((a_e - a_s + 1) * (o_e - o_s + 1)).unsqueeze(-1).to(values.dtype)
            return total / area
        return torch.stack(
            [
                values[p[0][0] : p[1][0] + 1, p[0][1] : p[1][1] + 1]
                .reshape(-1, values.shape[2])
                .max(dim=0)
                .values
                for p in pairs
            ]
        )

    def forward(self, values: torch.Tensor, pairs) -> list[CandidateRegion]:
        if not pairs:
            return []
        for s, e in pairs:
            if s[0] > e[0] or s[1] > e[1]:
                raise DataError(f"invalid region pair {s} -> {e}")
        r_start = values[[p[0][0] for p in pairs], [p[0][1] for p in pairs]]
        r_end = values[[p[1][0] for p in pairs], [p[1][1] for p in pairs]]
        context = self._region_context(values, pairs)
        logits = self.linear(torch.cat([r_start, r_end, context], dim=-1))
        dists = torch.softmax(logits, dim=-1)
        return [
            CandidateRegion(start_cell=s, end_cell=e, sentiment_dist=dists[i], logits=logits[i])
            for i, (s, e) in enumerate(pairs)
        ]

    def classify_region(
        self, values: torch.Tensor, start_cell: Cell, end_cell: Cell
    ) -> CandidateRegion:
        if start_cell[0] > end_cell[0] or start_cell[1] > end_cell[1]:
            raise DataError(f"invalid region pair {start_cell} -> {end_cell}")
        return self.forward(values, [(start_cell, end_cell)])[0]


def decode_triplets(candidates: Sequence[CandidateRegion]) -> list[GoldTriplet]:
    """Emit one triplet per candidate whose argmax sentiment is not INVALID.

    Duplicate span pairs keep the highest-confidence sentiment; output sorted
    by (a_s, a_e, o_s, o_e).
    """
    best: dict[tuple, tuple[float, int]] = {}
    for cand in candidates:
        dist = cand.sentiment_dist.detach().cpu().numpy()
        cls = int(np.argmax(dist))
        if cls == INVALID_CLASS:
            continue
        aspect = (cand.start_cell[0], cand.end_cell[0])
        opinion = (cand.start_cell[1], cand.end_cell[1])
        key = (aspect, opinion)
        conf = float(dist[cls])
        if key not in best or conf > best[key][0]:
            best[key] = (conf, cls)
    triplets = [
        GoldTriplet(aspect=a, opinion=o, sentiment=Sentiment(cls))
        for (a, o), (_, cls) in best.items()
    ]
    return sorted(triplets, key=lambda t: (t.aspect[0], t.aspect[1], t.opinion[0], t.opinion[1]))


def encode_gold_grids(
    gold: Sequence[GoldTriplet], n: int
) -> tuple[np.ndarray, np.ndarray, dict[tuple[Cell, Cell], Sentiment]]:
    """0/1 start and end grids plus the (start_cell, end_cell) -> sentiment
    map for a sentence's gold triplets."""
    start = np.zeros((n, n), dtype=np.float64)
    end = np.zeros((n, n), dtype=np.float64)
    regions: dict[tuple[Cell, Cell], Sentiment] = {}
    for t in gold:
        (a_s, a_e), (o_s, o_e) = t.aspect, t.opinion
        key = ((a_s, o_s), (a_e, o_e))
        if key in regions and regions[key] != t.sentiment:
            raise DataError(f"conflicting sentiments for region {key}")
        regions[key] = t.sentiment
        start[a_s, o_s] = 1.0
        end[a_e, o_e] = 1.0
    return start, end, regions


def _grid_bce(
    probs: torch.Tensor,
    logits: torch.Tensor | None,
    gold: torch.Tensor,
    pos_weight: float,
) -> torch.Tensor:
    if logits is not None:
        pw = None
        if pos_weight != 1.0:
            pw = torch.full((), pos_weight, dtype=logits.dtype)
        return F.binary_cross_entropy_with_logits(logits, gold.to(logits.dtype), pos_weight=pw)
    eps = 1e-12
    p = probs.clamp(eps, 1.0 - eps)
    y = gold.to(p.dtype)
    per_cell = -(pos_weight * y * torch.log(p) + (1.0 - y) * torch.log(1.0 - p))
    return per_cell.mean()


def compute_loss(
    grids: BoundaryGrids,
    candidates: Sequence[CandidateRegion],
    gold_start: np.ndarray | torch.Tensor,
    gold_end: np.ndarray | torch.Tensor,
    gold_regions: dict[tuple[Cell, Cell], Sentiment],
    pos_weight: float = 1.0,
) -> LossBreakdown:
    """Mean BCE on each boundary grid plus mean categorical cross-entropy
    over the candidates, labelled by their gold region sentiment (INVALID for
    every candidate that matches no gold region)."""
    gold_start_t = torch.as_tensor(np.asarray(gold_start))
    gold_end_t = torch.as_tensor(np.asarray(gold_end))
    l_start = _grid_bce(grids.start, grids.start_logits, gold_start_t, pos_weight)
    l_end = _grid_bce(grids.end, grids.end_logits, gold_end_t, pos_weight)

    if candidates:
        labels = torch.tensor(
            [
                int(gold_regions.get((c.start_cell, c.end_cell), INVALID_CLASS))
                for c in candidates
            ],
            dtype=torch.long,
        )
        if all(c.logits is not None for c in candidates):
            logits = torch.stack([c.logits for c in candidates])
            l_sent = F.cross_entropy(logits, labels)
        else:
            dists = torch.stack([c.sentiment_dist for c in candidates])
            picked = dists[torch.arange(len(candidates)), labels].clamp_min(1e-12)
            l_sent = -torch.log(picked).mean()
    else:
        l_sent = torch.zeros((), dtype=l_start.dtype)
    return LossBreakdown(l_start=l_start, l_end=l_end, l_sentiment=l_sent)
