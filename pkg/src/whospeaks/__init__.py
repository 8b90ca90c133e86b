"""Audio-visual speaker diarization from binaural spectral features."""

from .alignment import PersonTrack, TrainingSet, build_training_set, nearest_training
from .association import (
    AssociationConfig,
    FreqMixtureParams,
    complex_gauss_density,
    fit_freq_mixtures,
    speaking_probabilities,
)
from .pipeline import PipelineConfig, diarize_pipeline
from .scoring import DerReport, DiarTimeline, score_der
from .simulate import (
    RigParams,
    Scene,
    load_scene,
    make_grid,
    render_scene,
    render_training_grid,
    synth_rtf,
)
from .spectral import (
    AudioClip,
    BinauralSpectrogram,
    NoiseStats,
    Spectrogram,
    activity_mask,
    binaural_feature_static,
    binaural_spectrogram,
    estimate_noise_stats,
    load_wav,
    save_wav,
    stft,
)
from .state_filter import (
    FilterConfig,
    FilterPosterior,
    StateConfig,
    config_likelihood,
    map_state,
    predict,
    run_filter,
    transition_prob,
    update,
)

__version__ = "0.1.0"
