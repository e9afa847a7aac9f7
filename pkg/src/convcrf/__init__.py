"""Speaker-aware conversation labeling.

Identity-masked multi-head attention and a dialogue-aware gated recurrent
cell extract global/local context; a skip-chain CRF over dyadic conversation
segments scores and decodes label sequences exactly.
"""

from .conversation import (
    Conversation,
    DyadicSegment,
    SpeakerBlock,
    Utterance,
    dyadic_segments,
    moment_other,
    moment_self,
    speaker_blocks,
    validate_conversation,
)
from .crf import (
    CrfPotentials,
    crf_gradients,
    log_partition,
    marginals,
    nll_loss,
    score_sequence,
    viterbi_decode,
)
from .model import ConversationModel, ModelConfig
from .recurrent import DecayConfig, decay_factor
from .training import TrainConfig, gradient_check, train_loop

__all__ = [
    "Conversation",
    "Utterance",
    "SpeakerBlock",
    "DyadicSegment",
    "validate_conversation",
    "moment_self",
    "moment_other",
    "speaker_blocks",
    "dyadic_segments",
    "CrfPotentials",
    "score_sequence",
    "log_partition",
    "nll_loss",
    "marginals",
    "crf_gradients",
    "viterbi_decode",
    "ConversationModel",
    "ModelConfig",
    "DecayConfig",
    "decay_factor",
    "TrainConfig",
    "train_loop",
    "gradient_check",
]
