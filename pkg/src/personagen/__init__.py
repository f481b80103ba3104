"""personagen: sample identity-consistent character embeddings for frozen
text-to-image diffusion pipelines.

A tiny GAN learns the word-embedding distribution of well-known names inside
a frozen text encoder; sampling it yields new "people" the diffusion model
renders consistently across prompts, without touching any model weights.
"""
from .bank import (
    EmbeddingBank,
    EmbeddingStats,
    NameEntry,
    NameList,
    NoiseConfig,
    augment_real,
    compute_stats,
    encode_names,
    load_bank,
    load_name_list,
    save_bank,
)
from .context import (
    PLACEHOLDER,
    PromptCorpus,
    PromptTemplate,
    context_consistency_loss,
    contextualize,
    embed_prompt_with_identity,
    load_prompt_corpus,
)
from .encoders import StubTextEncoder, TextEncoder, load_encoder
from .errors import (
    CheckpointError,
    CorpusError,
    DegenerateInputError,
    EvalError,
    IdentityFileError,
    NameListError,
    PersonagenError,
    RenderError,
    StoryRenderError,
    TrainingError,
)
from .gan import DiscriminatorNet, GeneratorNet, adain, adversarial_losses, generator_forward
from .inference import (
    GeneratorHandle,
    PseudoIdentity,
    RenderRequest,
    interpolate,
    load_generator,
    load_identity,
    render,
    sample_identity,
    save_identity,
    story_render,
)
from .backends import stub_backends
from .corpus_gen import generate_names, generate_prompts
from .evaluation import (
    EvalGrid,
    MetricBackends,
    MetricsReport,
    compute_report,
    editability,
    face_diversity,
    fid_from_features,
    identity_consistency,
    identity_diversity,
    image_quality_fid,
    load_grid,
    save_grid,
    subject_consistency,
    trusted_face_diversity,
)
from .pipelines import DiffusionPipeline, StubDiffusionPipeline, load_pipeline
from .training import (
    Trainer,
    TrainingConfig,
    TrainingLogRecord,
    load_checkpoint,
    save_checkpoint,
    stratified_split,
    train,
)

__version__ = "0.1.0"
