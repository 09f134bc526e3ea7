"""rcxi-extractor: capture per-turn transformer hidden states under a
recursive-prompt protocol and write analyzer-ready trace files."""

from .extract import ExtractionResult, extract_trace, write_trace_records
from .models import BuiltinBackend, ContextOverflowError, ModelLoadError, TransformersBackend, load_backend
from .protocol import ProtocolSpec, load_protocol, save_protocol

__version__ = "0.1.0"
