"""Garment-transfer warping, fusion and loss kernels."""

import json

from ._ctnet import *  # noqa: F401,F403
from ._ctnet import run_pipeline as _run_pipeline

__version__ = "0.1.0"


def run_pipeline(fixture, out, config=None):
    """Run the full pipeline on a fixture directory; returns (report, manifest) dicts."""
    if isinstance(config, dict):
        config = json.dumps(config)
    report, manifest = _run_pipeline(str(fixture), str(out), config)
    return json.loads(report), json.loads(manifest)
