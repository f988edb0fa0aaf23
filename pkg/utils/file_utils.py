import io
from pathlib import Path
from typing import Iterator, List, Optional, Type, TypeVar, Union

import numpy as np
import pandas as pd
import yaml
from pydantic import BaseModel, ValidationError

PathLike = Union[str, Path]
ModelT = TypeVar("ModelT", bound=BaseModel)

_ENCODINGS = ['utf-8', 'utf-8-sig', 'latin-1', 'cp1252']


class FileProcessingError(Exception):
    """Raised when a data file cannot be read or written"""
    pass


class ConfigFileError(Exception):
    """Raised when a YAML config file does not parse or violates its schema"""
    pass


def decode_bytes(content: bytes) -> str:
    """
    Decode file content trying the usual encodings in order.

    Args:
        content: Raw bytes

    Returns:
        Text with NUL bytes removed and newlines normalized
    """
    decoded = None
    for encoding in _ENCODINGS:
        try:
            decoded = content.decode(encoding)
            break
        except UnicodeDecodeError:
            continue

    if decoded is None:
        decoded = content.decode('utf-8', errors='ignore')

    decoded = decoded.replace('\x00', '')
    return decoded.replace('\r\n', '\n').replace('\r', '\n')


def iter_text_lines(path: PathLike) -> Iterator[str]:
    """Stream the lines of a text file without trailing newlines"""
    try:
        with open(path, 'rb') as handle:
            for raw in handle:
                yield decode_bytes(raw).rstrip('\n')
    except OSError as e:
        raise FileProcessingError(f"Error reading file '{path}': {e}")


def _merge(data: dict, updates: dict) -> dict:
    merged = dict(data)
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def parse_yaml_model(text: str, model: Type[ModelT], source: str = "<text>",
                     updates: Optional[dict] = None) -> ModelT:
    """
    Parse YAML text and validate it against a pydantic model.

    `updates` is merged into the parsed mapping (nested keys merge) before
    validation.

    Raises:
        ConfigFileError: with the line number for syntax errors or the
            field path for schema violations
    """
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        where = f" line {mark.line + 1}" if mark is not None else ""
        raise ConfigFileError(f"{source}:{where} invalid YAML: {getattr(e, 'problem', e)}")

    if data is None:
        data = {}
    if updates and isinstance(data, dict):
        data = _merge(data, updates)
    try:
        return model.model_validate(data)
    except ValidationError as e:
        problems = [
            f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}"
            for err in e.errors()
        ]
        raise ConfigFileError(f"{source}: schema violation\n  " + "\n  ".join(problems))


def load_yaml_model(path: PathLike, model: Type[ModelT], updates: Optional[dict] = None) -> ModelT:
    """Read a YAML file and validate it against a pydantic model"""
    path = Path(path)
    if not path.exists():
        raise ConfigFileError(f"Config file not found: {path}")
    return parse_yaml_model(decode_bytes(path.read_bytes()), model, source=str(path), updates=updates)


def write_csv(frame: pd.DataFrame, path: PathLike) -> None:
    """Write a frame as CSV without the index"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)


def read_csv(path: PathLike, **kwargs) -> pd.DataFrame:
    """Read a CSV written by write_csv"""
    try:
        return pd.read_csv(path, **kwargs)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise FileProcessingError(f"Error processing file '{path}': {e}")


def write_pgm(raster: np.ndarray, path: PathLike, max_value: int = 255) -> None:
    """
    Write a [0, 1] raster as a plain (P2) portable graymap.

    Row 0 of the raster is the bottom of the floor plan, so rows are
    written top-down in reverse.
    """
    values = np.clip(np.nan_to_num(np.asarray(raster, dtype=float)), 0.0, 1.0)
    levels = np.rint(values * max_value).astype(int)[::-1]
    rows, cols = levels.shape
    buffer = io.StringIO()
    buffer.write(f"P2\n{cols} {rows}\n{max_value}\n")
    for row in levels:
        buffer.write(" ".join(str(v) for v in row) + "\n")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buffer.getvalue())


def read_pgm(path: PathLike) -> np.ndarray:
    """Read a P2 graymap written by write_pgm back into a [0, 1] raster"""
    tokens: List[str] = []
    for line in Path(path).read_text().splitlines():
        line = line.split('#', 1)[0]
        tokens.extend(line.split())
    if not tokens or tokens[0] != 'P2':
        raise FileProcessingError(f"Error processing file '{path}': not a plain graymap")
    cols, rows, max_value = int(tokens[1]), int(tokens[2]), int(tokens[3])
    levels = np.array([int(t) for t in tokens[4:4 + rows * cols]], dtype=float)
    return (levels.reshape(rows, cols) / max_value)[::-1]


def write_matrix_csv(raster: np.ndarray, path: PathLike) -> None:
    """Write a 2-D raster as a header-less CSV matrix, row 0 first"""
    frame = pd.DataFrame(np.asarray(raster, dtype=float))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, header=False)


def read_matrix_csv(path: PathLike) -> np.ndarray:
    return read_csv(path, header=None).to_numpy(dtype=float)
