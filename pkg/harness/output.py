"""
harness/output.py

Result files of a run:
- regret.csv     T_checkpoint, cum_regret, stderr
- run.json       the RunRecord without the raw buffer and evaluation arrays
- buffer.jsonl   the resample buffer, one block per line (optional)
- loss_sequence.json  every loss function played, for exact replay
- diag.json      the regret decomposition (when requested)

CSV floats carry 17 significant digits; JSON floats use the shortest
representation that round-trips exactly, never more than 17 digits (see
docs/OUTPUT.md). Wall times stay in memory only, so repeated runs with the
same seeds write byte-identical files.
"""

import json
import logging
import math
import os
from typing import Dict, List, Optional

import numpy as np

from environments.adversaries import save_loss_sequence
from estimators.buffer_io import save_buffer

from .regret import RegretCurve
from .simulator import RunRecord

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _jsonable(value):
    """numpy scalars and arrays to plain Python; non-finite floats to strings."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    return value


def write_json(data, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(data), f, indent=2)
    return path


def write_regret_csv(curve: RegretCurve, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    curve.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def run_summary(record: RunRecord, curve: RegretCurve, regret_bound: Optional[float] = None) -> Dict:
    """The run.json payload."""
    return {
        "fingerprint": record.fingerprint(),
        "complete": record.complete,
        "rounds": record.rounds,
        "config": record.config,
        "params": record.params.to_dict(),
        "m_eps": record.m_eps,
        "regret_bound": regret_bound,
        "seeds": record.seeds,
        "kernel": record.kernel,
        "kernel_evals_total": record.total_kernel_evals,
        "regret": {
            "checkpoints": curve.checkpoints,
            "cum_regret": curve.regret,
            "stderr": curve.stderr,
            "exact": curve.exact,
        },
        "eval_contexts": {"n": int(record.eval_points.shape[0]), "discrete": record.eval_discrete},
        "rounds_detail": {
            "contexts": record.contexts,
            "actions": record.actions,
            "losses": record.losses,
            "probs": record.probs,
            "kernel_evals": record.kernel_evals,
        },
    }


def write_run_outputs(
    record: RunRecord,
    curve: RegretCurve,
    out_dir: str,
    buffer: bool = False,
    loss_sequence: bool = True,
    diag: Optional[Dict] = None,
    regret_bound: Optional[float] = None,
) -> List[str]:
    """Write every result file of one run into out_dir; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    written = [
        write_regret_csv(curve, os.path.join(out_dir, "regret.csv")),
        write_json(run_summary(record, curve, regret_bound), os.path.join(out_dir, "run.json")),
    ]
    if buffer:
        path = os.path.join(out_dir, "buffer.jsonl")
        save_buffer(record.buffer, path)
        written.append(path)
    if loss_sequence:
        path = os.path.join(out_dir, "loss_sequence.json")
        save_loss_sequence(record.loss_sequence, path)
        written.append(path)
    if diag is not None:
        written.append(write_json(diag, os.path.join(out_dir, "diag.json")))
    for path in written:
        logger.debug("wrote %s", path)
    return written
