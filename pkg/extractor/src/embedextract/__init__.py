"""embedextract: build embedding stores for grounded bias tests.

Reads a bias-test spec, encodes every required (text, image) pair with a
registered model, and writes one store file per granularity (W word, S
sentence, C contextualized word) in the binary format the analysis tools
consume.
"""

from .encoders import (
    GRANULARITIES,
    Encoder,
    HashedProjectionEncoder,
    get_encoder,
    list_encoders,
)
from .errors import EncodeFailure, ExtractError, SpecError, UnknownModel
from .extract import (
    ExtractionJob,
    ExtractionReport,
    FailureRecord,
    extract,
    find_image_file,
)
from .specio import (
    BiasSpec,
    read_spec,
    required_pairs,
    serialize_pair,
)
from .storefile import write_store_file

__all__ = [
    "GRANULARITIES",
    "BiasSpec",
    "EncodeFailure",
    "Encoder",
    "ExtractError",
    "ExtractionJob",
    "ExtractionReport",
    "FailureRecord",
    "HashedProjectionEncoder",
    "SpecError",
    "UnknownModel",
    "extract",
    "find_image_file",
    "get_encoder",
    "list_encoders",
    "read_spec",
    "required_pairs",
    "serialize_pair",
    "write_store_file",
]

__version__ = "0.1.0"
