"""Player classification of basso continuo realizations from griff profiles."""

__version__ = "0.1.0"

from .classifier import (  # noqa: E402
    BinaryModel, ConvergenceError, KernelSpec, ModelOvO, MulticlassModel, kernel_eval, predict,
    train_binary_svm, train_multiclass,
)
from .evaluation import (  # noqa: E402
    FoldPlan, NoteStats, cross_validate, griff_distribution, note_stats, player_focused,
    segment_scan, stratified_kfold,
)
from .features import (  # noqa: E402
    FeatureMatrix, GriffProfile, Vocabulary, bow_matrix, build_vocabulary, dataset_matrix, profile,
)
from .griffs import (  # noqa: E402
    EMPTY, GriffSequence, decode, encode, extract_dataset, extract_griffs, group_by_score_note, intervals_repr,
    make_ngrams, segment_windows, to_griff,
)
from .ingest import (  # noqa: E402
    Alignment, Dataset, IngestError, PerformanceNote, ScoreNote, load_dataset, parse_alignment,
    parse_midi,
)
