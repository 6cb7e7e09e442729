"""capmatch: caption-supervision tooling for image-caption corpora.

Subset-matching labelers that turn caption metadata into class labels or
filtered datasets, deterministic caption ablations, and the metric suite
(label quality, dataset utilization, robustness aggregates, trend fits)
used to evaluate them.
"""

from .corpus import CAPTION_SOURCES, Sample, compose_caption, parse_manifest, write_manifest
from .errors import CapmatchError, ManifestError, MetricError, TermFileError
from .matcher import (
    FuzzyOptions,
    MatchOutcome,
    MatchStrategy,
    TermIndex,
    fuzzy_similarity,
    match_corpus,
    match_sample,
)
from .metrics import (
    LabelQualityReport,
    RobustnessRecord,
    TrendFit,
    agreement,
    avg_robustness,
    binomial_halfwidth,
    caption_stats,
    dataset_utilization,
    effective_robustness,
    err,
    fit_trend,
    label_quality,
)
from .termdb import SynonymLexicon, TermDatabase, expand_synset, load_lexicon, load_termdb, max_term_words
from .textproc import ngrams, normalize
from .transforms import (
    TransformSpec,
    scramble,
    shift_cipher,
    simple_caption,
    simpler_caption,
    token_strip,
)

__version__ = "0.1.0"
