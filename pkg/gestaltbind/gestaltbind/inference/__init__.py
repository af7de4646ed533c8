from .engine import (
    GROUPS,
    InferenceHyper,
    InferenceRun,
    infer_binding,
    infer_joint,
    infer_perspective,
)
from .metrics import MetricLog, od, summarize_logs, td
