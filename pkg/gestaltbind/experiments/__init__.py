from .config import DEFAULTS, INFERENCE_KINDS, KINDS, available_presets, make_config, resolve_model_run
from .harness import RunResult, build_sequence, build_test_sequence, run
from .report import report
