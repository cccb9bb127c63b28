"""Corpus aggregation, rank correlation, annotator agreement and scatter export."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as sps

from .errors import ConstantInput, EmptyCorpus, MissingAnnotation, UnknownMetric
from .selection import FilterRange, ParaphrasePair

METRICS = ("bleu", "jaccard", "cosine", "manual")
LIKERT_SCALE = (1, 2, 3)

# Export precision per metric.
DECIMALS = {"bleu": 1, "manual": 1, "jaccard": 3, "cosine": 3}


@dataclass(frozen=True)
class AnnotationRecord:
    pair_id: str
    annotator_id: str
    score: int

    def __post_init__(self):
        if self.score not in LIKERT_SCALE:
            raise ValueError(f"Likert score must be one of {LIKERT_SCALE}, got {self.score!r}")


def likert_to_percent(mean_score: float) -> float:
    return (mean_score - 1.0) / 2.0 * 100.0


def scale_manual(records: Iterable[AnnotationRecord], pair_id: str) -> float:
    """Mean 3-point Likert score for ``pair_id`` mapped onto 0-100."""
    scores = [r.score for r in records if r.pair_id == pair_id]
    if not scores:
        raise MissingAnnotation(pair_id)
    return likert_to_percent(sum(scores) / len(scores))


def mean_likert_by_pair(records: Iterable[AnnotationRecord]) -> dict[str, float]:
    """Raw (1-3) mean score per pair id, in first-seen order."""
    sums: dict[str, list[int]] = {}
    for r in records:
        sums.setdefault(r.pair_id, []).append(r.score)
    return {pid: sum(v) / len(v) for pid, v in sums.items()}


@dataclass
class CorpusReport:
    n_pairs: int
    mean_bleu: float
    mean_jaccard: float
    mean_cosine: float | None = None
    mean_manual_scaled: float | None = None
    missing: dict[str, int] = field(default_factory=dict)
    filter_range: str | None = None
    config_fp: str = ""
    label: str = ""

    def rounded(self) -> dict:
        """Values at table precision: 1 decimal for BLEU/manual, 3 otherwise."""
        def r(v, nd):
            return None if v is None else round(v, nd)
        d = asdict(self)
        d["mean_bleu"] = r(self.mean_bleu, 1)
        d["mean_jaccard"] = r(self.mean_jaccard, 3)
        d["mean_cosine"] = r(self.mean_cosine, 3)
        d["mean_manual_scaled"] = r(self.mean_manual_scaled, 1)
        return d

    def to_json(self, full_precision: bool = False) -> str:
        return json.dumps(asdict(self) if full_precision else self.rounded(), ensure_ascii=False)

    def to_tsv(self) -> str:
        d = self.rounded()
        keys = ["label", "n_pairs", "mean_manual_scaled", "mean_cosine", "mean_bleu", "mean_jaccard", "filter_range", "config_fp"]
        vals = ["n/a" if d[k] is None else str(d[k]) for k in keys]
        return format_table([keys, vals])


def _mean(values: list[float]) -> float | None:
    # fsum keeps the result independent of input order.
    return math.fsum(values) / len(values) if values else None


def aggregate(
    pairs: Iterable[ParaphrasePair],
    *,
    filter_range: FilterRange | None = None,
    label: str = "",
) -> CorpusReport:
    """Means over non-missing values, with missing counts per metric.

    ``manual`` on pairs is the raw 1-3 Likert mean; the report carries it
    scaled to 0-100.
    """
    cols: dict[str, list[float]] = {m: [] for m in METRICS}
    n = 0
    fps: set[str] = set()
    for p in pairs:
        n += 1
        fps.add(p.provenance.config_fp)
        for m in METRICS:
            v = getattr(p, m)
            if v is not None:
                cols[m].append(float(v))
    if n == 0:
        raise EmptyCorpus("no pairs to aggregate")
    manual = _mean(cols["manual"])
    return CorpusReport(
        n_pairs=n,
        mean_bleu=_mean(cols["bleu"]),
        mean_jaccard=_mean(cols["jaccard"]),
        mean_cosine=_mean(cols["cosine"]),
        mean_manual_scaled=None if manual is None else likert_to_percent(manual),
        missing={m: n - len(cols[m]) for m in METRICS},
        filter_range=str(filter_range) if filter_range else None,
        config_fp=",".join(sorted(fps - {""})),
        label=label,
    )


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x), dtype=float)
    sx = x[order]
    i = 0
    while i < len(sx):
        j = i
        while j + 1 < len(sx) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


@dataclass(frozen=True)
class SpearmanResult:
    rho: float
    p_value: float
    n: int


def spearman(x: Sequence[float], y: Sequence[float]) -> SpearmanResult:
    """Spearman's rho (Pearson on average ranks) with a t-approximation p-value."""
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 3:
        raise ValueError("spearman needs at least 3 observations")
    rx, ry = average_ranks(x), average_ranks(y)
    dx, dy = rx - rx.mean(), ry - ry.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ConstantInput("rank correlation is undefined for a constant input")
    rho = float(dx @ dy) / math.sqrt(sxx * syy)
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) == 1.0:
        p = 0.0
    else:
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p = float(2.0 * sps.t.sf(abs(t), n - 2))
    return SpearmanResult(rho, p, n)


def correlation_matrix(pairs: Sequence[ParaphrasePair], metrics: Sequence[str] = METRICS) -> dict[str, dict[str, float | None]]:
    """Pairwise Spearman rho over pairs where both metrics are present."""
    out: dict[str, dict[str, float | None]] = {}
    for a in metrics:
        out[a] = {}
        for b in metrics:
            xs, ys = [], []
            for p in pairs:
                va, vb = getattr(p, a), getattr(p, b)
                if va is not None and vb is not None:
                    xs.append(va)
                    ys.append(vb)
            try:
                out[a][b] = spearman(xs, ys).rho
            except ValueError:
                out[a][b] = None
    return out


def kappa_weights(k: int, weights: str = "linear") -> np.ndarray:
    idx = np.arange(k)
    d = np.abs(idx[:, None] - idx[None, :]) / (k - 1)
    if weights == "linear":
        return d
    if weights == "quadratic":
        return d**2
    raise ValueError(f"unknown kappa weighting {weights!r}")


def weighted_kappa(
    a: Sequence[int],
    b: Sequence[int],
    weights: str = "linear",
    categories: Sequence[int] = LIKERT_SCALE,
) -> float:
    """Cohen's weighted kappa, ``1 - sum(W*O) / sum(W*E)``.

    ``O`` is the observed confusion matrix, ``E`` the outer product of the
    two raters' marginals divided by the item count.
    """
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise ValueError("weighted_kappa needs at least one item")
    pos = {c: i for i, c in enumerate(categories)}
    k = len(categories)
    try:
        ia = np.array([pos[v] for v in a])
        ib = np.array([pos[v] for v in b])
    except KeyError as exc:
        raise ValueError(f"score {exc.args[0]!r} outside categories {tuple(categories)}") from None
    observed = np.zeros((k, k))
    np.add.at(observed, (ia, ib), 1.0)
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0)) / len(a)
    w = kappa_weights(k, weights)
    denom = float((w * expected).sum())
    if denom == 0.0:
        raise ConstantInput("chance disagreement is zero; kappa undefined")
    return 1.0 - float((w * observed).sum()) / denom


@dataclass(frozen=True)
class ScatterRow:
    x: float
    y: float
    label: str


def export_scatter(
    pairs: Iterable[ParaphrasePair],
    x_metric: str,
    y_metric: str,
    *,
    sigma_x: float = 0.1,
    sigma_y: float = 0.05,
    seed: int = 0,
    label: str | None = None,
) -> list[ScatterRow]:
    """Metric pairs with seeded Gaussian jitter added to each axis.

    Rows are labelled with ``label`` when given, else with the pair id.
    Pairs missing either metric are left out.
    """
    for m in (x_metric, y_metric):
        if m not in METRICS:
            raise UnknownMetric(f"unknown metric {m!r}; expected one of {METRICS}")
    if sigma_x < 0 or sigma_y < 0:
        raise ValueError("jitter sigmas must be non-negative")
    rows = [(getattr(p, x_metric), getattr(p, y_metric), label if label is not None else p.id) for p in pairs]
    rows = [r for r in rows if r[0] is not None and r[1] is not None]
    rng = np.random.default_rng(seed)
    nx = rng.normal(0.0, sigma_x, len(rows)) if sigma_x > 0 else np.zeros(len(rows))
    ny = rng.normal(0.0, sigma_y, len(rows)) if sigma_y > 0 else np.zeros(len(rows))
    return [ScatterRow(float(x) + float(jx), float(y) + float(jy), lab) for (x, y, lab), jx, jy in zip(rows, nx, ny)]


def scatter_csv(rows: Iterable[ScatterRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "label"])
    for r in rows:
        w.writerow([repr(r.x), repr(r.y), r.label])
    return buf.getvalue()


def format_table(rows: Sequence[Sequence[str]]) -> str:
    """Tab-separated rows with cells padded to aligned column widths."""
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for r in rows:
        cells = [str(c).ljust(w) for c, w in zip(r, widths)]
        lines.append("\t".join(cells).rstrip())
    return "\n".join(lines) + "\n"


COMPARE_HEADERS = ("Dataset", "Manual", "Cosine", "BLEU", "Jaccard")


def comparison_table(reports: Sequence[CorpusReport]) -> str:
    """One row per corpus with the Manual/Cosine/BLEU/Jaccard columns."""
    rows = [list(COMPARE_HEADERS)]
    for rep in reports:
        d = rep.rounded()
        def cell(key, nd):
            v = d[key]
            return "n/a" if v is None else f"{v:.{nd}f}"
        rows.append([
            rep.label or "corpus",
            cell("mean_manual_scaled", 1),
            cell("mean_cosine", 3),
            cell("mean_bleu", 1),
            cell("mean_jaccard", 3),
        ])
    return format_table(rows)
