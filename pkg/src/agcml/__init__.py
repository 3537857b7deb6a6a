"""ML-assisted gain control for a saturating packet receiver.

Deterministic two-phase receiver physics, a native AGC loop, best-gain
labeling of interferer configs, burst-pattern signal synthesis, a
from-scratch window classifier, and functional-mode replay measuring
packet error rates with and without the predicted gain.
"""

from .util import TOOL_VERSION as __version__  # noqa: F401

from .rxsim import (  # noqa: F401
    Arrival,
    GainTable,
    LinkBudget,
    PacketScenario,
    Phase,
    combine_dbm,
    effective_snr,
)
from .agc import DEFAULT_TARGET_WINDOW_DBM, run_preamble_agc  # noqa: F401
from .labeling import (  # noqa: F401
    LabeledConfig,
    PacketConfig,
    ReceptionStatus,
    flip_experiment,
    label_config,
    receive_packet,
    status_of,
    sweep_dataset,
)
from .signalgen import (  # noqa: F401
    Band,
    WiFiPattern,
    blocked_split,
    classify_band,
    crossval_runs,
    make_windows,
    synthesize_signal,
)
from .mlengine import (  # noqa: F401
    TrainedModel,
    TrainParams,
    evaluate,
    load_model,
    predict,
    save_model,
    train,
)
from .runtime import (  # noqa: F401
    PerSweepSpec,
    RuntimeMode,
    RuntimeScenario,
    per_sweep,
    run_signal,
)
from .config import ExperimentConfig, config_hash, load_config  # noqa: F401
