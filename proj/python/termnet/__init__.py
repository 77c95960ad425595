"""Term association graphs, metric backbones and bundle queries."""

import json

from ._termnet import (
    Bundle,
    DataError,
    Dictionary,
    NotFoundError,
    UsageError,
    backbone_from_tsv,
    cooccurrence,
    metric_backbone,
    run_cli,
    tag,
)

__all__ = [
    "Bundle",
    "DataError",
    "Dictionary",
    "NotFoundError",
    "UsageError",
    "backbone_from_tsv",
    "cooccurrence",
    "metric_backbone",
    "query",
    "run_cli",
    "tag",
]


def query(bundle, path, **params):
    """Service request against a loaded Bundle; returns (status, decoded body)."""
    status, body = bundle.query(path, {k: str(v).lower() if isinstance(v, bool) else str(v)
                                       for k, v in params.items()})
    return status, json.loads(body)
