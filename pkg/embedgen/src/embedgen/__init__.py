"""Label-description embedding generator for the cube classifier pipeline."""

from .descriptions import (
    DescriptionSet,
    FixtureStore,
    LiveClient,
    NameSource,
    generate_descriptions,
)
from .encoders import (
    ContextualEncoder,
    StaticWordVectors,
    default_strategy,
    encode_descriptions,
    load_encoder,
    tokenize_words,
)
from .errors import ConfigError, DataError, EmbedGenError, RetryableError
from .prompts import DEFAULT_TEMPLATE, render_prompt
from .writer import read_embedding_file, write_embedding_file

__version__ = "0.1.0"
