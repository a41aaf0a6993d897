"""Transformer inference microservice: embeddings and cross-encoder scores."""

__version__ = "0.1.0"

from .encoder import BuiltinEncoder, ModelConfig, doc_to_text, load_encoder
from .pooling import AllMasked, mean_pool
from .server import create_app
from .tokenizer import HashingTokenizer
