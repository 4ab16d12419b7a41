"""parascope: detect domain-adjacent utterances for semantic parsers.

Utterances on a parser's topic whose meaning cannot be expressed in its
output schema look deceptively like training data. This package encodes
sentences as weighted averages of pre-trained word vectors, with weights
that emphasize words that are surprising in their trained context, and
scores them by mean cosine distance to their nearest training sentences.
"""

from .dataset import (
    DOMAIN_ADJACENT,
    IN_DOMAIN,
    Instance,
    MixedTestSet,
    SplitSpec,
    exclude_predicates,
    load_corpus,
    mix_test_set,
    tokenize,
)
from .detector import (
    NeighborIndex,
    Threshold,
    adjacency_score,
    build_index,
    calibrate_threshold,
    classify,
)
from .embeddings import (
    EmbeddingTable,
    cosine_distance,
    cosine_similarity,
    load_embeddings,
    save_embeddings,
)
from .encoders import (
    IdfTable,
    SentenceEmbedding,
    build_idf,
    encode_cbow,
    encode_frequency,
    encode_pretrained_weights,
    encode_surprise,
    surprise_weights,
)
from .harness import (
    ParseOutcome,
    RocCurve,
    compute_roc_auc,
    downstream_accuracy,
    run_direct_eval,
    run_downstream_eval,
)
from .mapping import (
    DomainMapping,
    TrainingParams,
    apply_mapping,
    materialize_domain_table,
    train_mapping,
)

__version__ = "0.1.0"
