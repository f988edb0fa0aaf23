from utils.file_utils import (
    ConfigFileError,
    FileProcessingError,
    decode_bytes,
    iter_text_lines,
    load_yaml_model,
    parse_yaml_model,
    read_csv,
    read_matrix_csv,
    read_pgm,
    write_csv,
    write_matrix_csv,
    write_pgm,
)
from utils.seeding import derive_seed, query_rng

__all__ = [
    "ConfigFileError",
    "FileProcessingError",
    "decode_bytes",
    "iter_text_lines",
    "load_yaml_model",
    "parse_yaml_model",
    "read_csv",
    "read_matrix_csv",
    "read_pgm",
    "write_csv",
    "write_matrix_csv",
    "write_pgm",
    "derive_seed",
    "query_rng",
]
