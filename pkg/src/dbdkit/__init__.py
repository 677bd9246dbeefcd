"""dbdkit: a multimodal dialogue-breakdown detection toolkit.

Synthetic labeled phone-call corpora with controllable breakdown causes,
audio/text feature frontends, four turn-level detector architectures
(MultConDB plus three baselines), a deterministic training harness,
turn-level evaluation with distance analysis and paired significance,
streaming inference sessions, and an in-context-learning harness.
"""
from .corpus import (
    AudioSpec, Call, Cause, CorpusSpec, DatasetSplit, Label, SignalChannel,
    SpeakerTag, Turn, TurnsPerCall, Waveform, format_e2e_input,
    format_utterance, generate_synthetic_corpus, load_corpus, save_corpus,
    split_corpus,
)
from .frontends import (
    FeatureSequence, FrontendConfig, Modality, extract_audio_features,
    extract_text_features, frame_count, pad_or_trim,
)
from .encoders import EncoderConfig
from .models import (
    Architecture, Logits, ModelConfig, Prediction, build_model,
    export_fusion_embedding, model_card,
)
from .training import ClassWeighting, TrainConfig, class_weights, set_global_seed, train
from .evaluation import (
    MetricsReport, NO_PREDICTION, compute_prf, dump_embeddings, evaluate_model,
    first_prediction_distance, histogram_distances, paired_significance,
)
from .streaming import feed_turn, measure_latency, open_session
from .icl import (
    LLMClientConfig, OracleClient, RefusingClient, approx_token_count,
    build_prompt, evaluate_icl, format_call_for_prompt, parse_answer,
)

__version__ = "0.1.0"
