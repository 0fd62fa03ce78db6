"""Python access to the kpset C++ core."""

import json

from ._core import (
    brute_force_assign,
    config_keys,
    dedup_stemmed,
    f1_at_5,
    f1_at_m,
    gen_synthetic,
    hungarian,
    join_stems,
    lambda_adp,
    porter_stem,
    tokenize,
    train,
)
from . import _core


def evaluate(checkpoint, corpus):
    """Score report as a dict."""
    return json.loads(_core.evaluate_json(str(checkpoint), str(corpus)))


def diagnose(checkpoint, log, corpus):
    """Diagnostics report as a dict."""
    return json.loads(_core.diagnose_json(str(checkpoint), str(log), str(corpus)))


__all__ = [
    "brute_force_assign",
    "config_keys",
    "dedup_stemmed",
    "diagnose",
    "evaluate",
    "f1_at_5",
    "f1_at_m",
    "gen_synthetic",
    "hungarian",
    "join_stems",
    "lambda_adp",
    "porter_stem",
    "tokenize",
    "train",
]
