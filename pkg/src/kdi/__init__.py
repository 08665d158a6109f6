"""Keystroke-dynamics toolkit for separating bona fide from AI-assisted writing.

Pipeline: ingest or synthesize raw key-down/key-up streams, normalize them
into fixed-length feature sequences, train a Siamese LSTM detector on
balanced sequence pairs, calibrate the decision threshold at the equal error
rate, and evaluate across user / keyboard / context / dataset scenarios.
"""

from .events import (
    Action,
    Condition,
    Context,
    DatasetTag,
    Keyboard,
    KeySequence,
    KeystrokeEvent,
    SequenceMeta,
    parse_canonical,
    write_canonical,
)
from .metrics import EvalReport, RocPoint, ScoredPair, eer_threshold, evaluate, roc
from .model import (
    DetectorModel,
    TowerConfig,
    classify_pair,
    cosine_similarity,
    embed,
    init_detector,
    pair_loss,
    pair_score,
    pair_scores,
    verdict,
)
from .preprocess import (
    FilterDecision,
    FilterPolicy,
    PairExample,
    ProcessedSequence,
    filter_sequence,
    make_pairs,
    normalize,
    pad_clip,
    process_pool,
)
from .scenarios import (
    ScenarioKind,
    SplitSpec,
    context_split,
    dataset_split,
    keyboard_split,
    user_agnostic,
    user_specific,
)
from .synth import ConditionProfile, GenParams, default_profiles, generate_corpus, generate_sequence
from .trainer import HyperParams, TrainRun, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"
