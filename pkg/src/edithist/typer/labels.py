"""Labelled triples from the addition/removal streams."""

from __future__ import annotations

from dataclasses import dataclass

from ..model import OpKind, Triple


@dataclass(frozen=True)
class LabeledTriple:
    triple: Triple
    label: int
    source_ordinal: int


def label_from_history(ops, dedup: bool = False) -> list:
    """One instance per operation: additions get 1, removals 0.

    With ``dedup`` each distinct triple keeps only its chronologically last
    label, listed in order of first appearance.
    """
    ops = sorted(ops, key=lambda op: op.ordinal)
    out = [LabeledTriple(op.triple, 1 if op.kind is OpKind.ADDITION else 0, op.ordinal)
           for op in ops]
    if not dedup:
        return out
    last: dict = {}
    for inst in out:
        last[inst.triple] = inst
    return list(last.values())
