"""Blockchain-anchored federated learning simulator."""

import json as _json

from . import _bcfl
from ._bcfl import (
    DivergenceError,
    LedgerRejection,
    MissingAnchor,
    ParseError,
    aggregate,
    canonicalize,
    cdw_weights,
    centroid_distance,
    fedavg_weights,
    generate,
    merkle_root,
    paper_scenario,
    serialized_size,
    verify_snapshot,
)

__all__ = [
    "DivergenceError",
    "LedgerRejection",
    "MissingAnchor",
    "ParseError",
    "aggregate",
    "canonicalize",
    "cdw_weights",
    "centroid_distance",
    "fedavg_weights",
    "generate",
    "merkle_root",
    "paper_scenario",
    "run",
    "serialized_size",
    "verify_snapshot",
]


def run(config=None, write=False, **overrides):
    """Run one experiment and return its summary as a dict.

    `config` is a dict in the bcfl config format; keyword arguments override
    its fields. With write=True the artifacts land in config["output_dir"].
    """
    cfg = dict(config or {})
    cfg.update(overrides)
    return _json.loads(_bcfl.run_json(_json.dumps(cfg), write))
