"""Memory-bounded streaming attention-memory engine.

Three cooperating feature stores (sensory, working, long-term), an
anisotropic squared-distance readout with top-k filtered softmax affinity,
usage-driven consolidation of working memory into long-term prototypes, and
LFU eviction under a hard element cap.
"""

from .affinity import AffinityMatrix, SimilarityMatrix, UsageMass, affinity, readout, similarity, usage_mass
from .core_types import (
    CapacityError,
    ConfigError,
    ContractError,
    FeatureDims,
    KeyBlock,
    QueryBlock,
    SelectionBlock,
    ShapeError,
    ShrinkageVector,
    StreamFormatError,
    ValidationError,
    ValueBlock,
    XmemError,
    map_selection,
    map_shrinkage,
)
from .long_term_memory import (
    ConsolidationReport,
    LongTermMemory,
    potentiate,
    select_kmeans,
    select_prototypes,
    select_random,
)
from .pipeline import (
    FrameEvents,
    FrameOutput,
    ObjectFeatures,
    ObjectTrack,
    Pipeline,
    PipelineConfig,
    soft_aggregate,
)
from .sensory import GruWeights, SensoryState, deep_update, gru_step, load_gru_weights, save_gru_weights
from .working_memory import CandidateBundle, FrameRecord, WorkingMemory

__version__ = "0.1.0"
