"""Filtered ranking metrics, McNemar tests and difference bands."""

from __future__ import annotations

import csv
import enum
import io
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from scipy.stats import chi2 as _chi2

from .graph import Split, materialize
from .model import INSTANCE_OF, EntityId, OpKind

HITS_AT = (1, 5, 10)


class EvaluationError(ValueError):
    pass


# --- test sample ----------------------------------------------------------

def known_types(ops) -> dict:
    """P31 values per entity in the state reached by ``ops``."""
    out: dict = {}
    for t in materialize(ops).triples:
        if t.predicate == INSTANCE_OF and isinstance(t.object, EntityId):
            out.setdefault(t.subject, set()).add(t.object)
    return out


def build_test_sample(split: Split) -> list:
    """(entity, new class) pairs from P31 additions in the test part.

    A class counts as new when the entity did not hold it at the end of
    train+valid. Sorted, without duplicates.
    """
    before = known_types(split.ops("train", "valid"))
    out = set()
    for op in split.test:
        t = op.triple
        if (op.kind is OpKind.ADDITION and t.predicate == INSTANCE_OF
                and isinstance(t.object, EntityId)
                and t.object not in before.get(t.subject, ())):
            out.add((t.subject, t.object))
    return sorted(out, key=lambda x: (x[0].sort_key(), x[1].sort_key()))


def candidate_classes(train_ops) -> list:
    """Every entity used as a P31 object anywhere in the training operations."""
    cands = {op.triple.object for op in train_ops
             if op.triple.predicate == INSTANCE_OF and isinstance(op.triple.object, EntityId)}
    return sorted(cands, key=EntityId.sort_key)


# --- ranking --------------------------------------------------------------

@dataclass(frozen=True)
class RankingResult:
    entity: object
    true_class: object
    rank: int


def filtered_rank(scores: Mapping, true_class, known_true: Iterable = ()) -> int:
    """1 + number of non-filtered competitors scoring at least the true class."""
    if true_class not in scores:
        raise EvaluationError(f"true class {true_class} missing from candidates")
    known = set(known_true)
    if true_class in known:
        raise EvaluationError(f"true class {true_class} is in the filtered set")
    target = scores[true_class]
    if math.isnan(target):
        raise EvaluationError("true class score is NaN")
    return 1 + sum(1 for c, s in scores.items()
                   if c != true_class and c not in known and s >= target)


@dataclass(frozen=True)
class RankingReport:
    mr: float
    mrr: float
    hits_at: dict
    n: int

    def row(self) -> dict:
        out = {"n": self.n, "MR": self.mr, "MRR": self.mrr}
        for k in sorted(self.hits_at):
            out[f"hits@{k}"] = self.hits_at[k]
        return out


def ranking_report(ranks: Iterable, ks: Sequence[int] = HITS_AT) -> RankingReport:
    ranks = [r.rank if isinstance(r, RankingResult) else int(r) for r in ranks]
    if not ranks:
        raise EvaluationError("no ranking results")
    if min(ranks) < 1:
        raise EvaluationError("ranks must be >= 1")
    n = len(ranks)
    return RankingReport(
        mr=math.fsum(ranks) / n,
        mrr=math.fsum(1.0 / r for r in ranks) / n,
        hits_at={k: sum(1 for r in ranks if r <= k) / n for k in ks},
        n=n,
    )


def evaluate_rankings(sample, candidates, score_fn: Callable, known: Mapping) -> list:
    """Rank every (entity, true class) of ``sample`` with ``score_fn(entity, candidates)``.

    ``known`` maps entities to the classes filtered from their ranking.
    Cases whose true class is not a candidate are skipped.
    """
    results = []
    cset = set(candidates)
    for entity, true_class in sample:
        if true_class not in cset:
            continue
        scores = score_fn(entity, candidates)
        if true_class not in scores:
            continue
        rank = filtered_rank(scores, true_class, known.get(entity, set()) - {true_class})
        results.append(RankingResult(entity, true_class, rank))
    return results


# --- significance ---------------------------------------------------------

@dataclass(frozen=True)
class ContingencyTable:
    both_correct: int
    only_a_correct: int
    only_b_correct: int
    both_wrong: int

    @property
    def total(self) -> int:
        return self.both_correct + self.only_a_correct + self.only_b_correct + self.both_wrong

    @classmethod
    def from_outcomes(cls, a: Sequence[bool], b: Sequence[bool]) -> "ContingencyTable":
        if len(a) != len(b):
            raise EvaluationError("outcome vectors are not aligned")
        cells = [0, 0, 0, 0]
        for x, y in zip(a, b):
            cells[(0 if x else 2) + (0 if y else 1)] += 1
        # index: (a, b) = (1,1)->0, (1,0)->1, (0,1)->2, (0,0)->3
        return cls(cells[0], cells[1], cells[2], cells[3])


@dataclass(frozen=True)
class McNemarResult:
    chi2: float
    p_value: float
    table: ContingencyTable
    corrected: bool


def chi2_sf(x: float, dof: int = 1) -> float:
    return float(_chi2.sf(x, dof))


def mcnemar(a: Sequence[bool] | ContingencyTable, b: Sequence[bool] | None = None,
            corrected: bool = True) -> McNemarResult:
    """McNemar's test over the discordant cells of a hits@1 contingency table."""
    table = a if isinstance(a, ContingencyTable) else ContingencyTable.from_outcomes(a, b)
    nb, nc = table.only_a_correct, table.only_b_correct
    if nb + nc == 0:
        raise EvaluationError("McNemar test undefined: no discordant pairs")
    # Edwards form taken literally: b == c still gives 1 / (b + c)
    diff = abs(nb - nc) - (1 if corrected else 0)
    stat = diff * diff / (nb + nc)
    return McNemarResult(stat, chi2_sf(stat), table, corrected)


class Band(enum.Enum):
    NON_RELEVANT = "NonRelevant"
    NOTICEABLE = "Noticeable"
    MATERIAL = "Material"


def sparck_jones_band(delta_percent: float) -> Band:
    if delta_percent < 0 or math.isnan(delta_percent):
        raise EvaluationError("band input must be a non-negative difference")
    if delta_percent < 5:
        return Band.NON_RELEVANT
    if delta_percent <= 10:
        return Band.NOTICEABLE
    return Band.MATERIAL


def relative_delta_percent(a: float, b: float) -> float:
    """Absolute difference relative to the larger value, in percent."""
    ref = max(abs(a), abs(b))
    return 0.0 if ref == 0 else 100.0 * abs(a - b) / ref


# --- comparison reports ---------------------------------------------------

@dataclass
class PairComparison:
    a: str
    b: str
    test: McNemarResult | None
    significant: bool
    bands: dict


def compare_models(reports: Mapping[str, RankingReport], outcomes: Mapping[str, Sequence[bool]],
                   alpha: float = 0.01, corrected: bool = True) -> list:
    """Pairwise McNemar tests and metric bands for every pair of named models."""
    names = sorted(reports)
    if len(names) < 2:
        raise EvaluationError("comparison needs at least two models")
    lengths = {len(outcomes[n]) for n in names}
    if len(lengths) != 1:
        raise EvaluationError("misaligned test samples")
    out = []
    for x, y in itertools.combinations(names, 2):
        try:
            test = mcnemar(outcomes[x], outcomes[y], corrected=corrected)
        except EvaluationError:
            test = None
        ra, rb = reports[x].row(), reports[y].row()
        bands = {k: sparck_jones_band(relative_delta_percent(ra[k], rb[k])).value
                 for k in ra if k != "n"}
        out.append(PairComparison(x, y, test, test is not None and test.p_value <= alpha, bands))
    return out


def reports_csv(reports: Mapping[str, RankingReport]) -> str:
    buf = io.StringIO()
    rows = [dict(model=name, **reports[name].row()) for name in sorted(reports)]
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def comparison_csv(pairs: Sequence[PairComparison]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    band_keys = sorted(pairs[0].bands) if pairs else []
    w.writerow(["a", "b", "b_only_a", "c_only_b", "chi2", "p_value", "significant"] + band_keys)
    for p in pairs:
        if p.test is None:
            w.writerow([p.a, p.b, 0, 0, "undefined", "undefined", False]
                       + [p.bands[k] for k in band_keys])
        else:
            t = p.test
            w.writerow([p.a, p.b, t.table.only_a_correct, t.table.only_b_correct,
                        f"{t.chi2:.4f}", f"{t.p_value:.3e}", p.significant]
                       + [p.bands[k] for k in band_keys])
    return buf.getvalue()


def comparison_text(pairs: Sequence[PairComparison]) -> str:
    lines = []
    for p in pairs:
        if p.test is None:
            lines.append(f"{p.a} against {p.b} [test undefined: identical hits@1 outcomes]")
        else:
            mark = "significant" if p.significant else "not significant"
            lines.append(f"{p.a} against {p.b} [chi2(1)={p.test.chi2:.2f}, "
                         f"pvalue={p.test.p_value:.2e}] {mark}")
        lines.append("  bands: " + ", ".join(f"{k}={v}" for k, v in sorted(p.bands.items())))
    return "\n".join(lines) + "\n"


def report_text(name: str, report: RankingReport) -> str:
    parts = [f"model {name}: n={report.n}", f"MR={report.mr:.4f}", f"MRR={report.mrr:.4f}"]
    parts += [f"hits@{k}={v:.4f}" for k, v in sorted(report.hits_at.items())]
    return "  ".join(parts) + "\n"
