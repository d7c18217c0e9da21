"""Beat-synchronous music-motion representation learning."""

from ._motionbeat import (
    BeatGrid,
    ConfigError,
    DomainError,
    NumericError,
    bar_mass,
    bar_phase,
    beat_alignment_score,
    build_beat_grid,
    contact_attention,
    emd_1d,
    embed,
    eval_retrieval,
    generate_dataset,
    hard_dtw,
    info_nce,
    phase_rotate,
    run_cli,
    soft_dtw,
    total_loss,
)

__version__ = "0.1.0"
