"""Array file I/O and the dump manifest schema.

Arrays travel as NPY v1.0 files with this exact layout:

  - 6 magic bytes: 0x93 'N' 'U' 'M' 'P' 'Y'
  - 2 version bytes: 0x01 0x00
  - 2-byte little-endian header length
  - ASCII header ``{'descr': '<f8', 'fortran_order': False, 'shape': (r, c), }``
    padded with spaces so the total header (magic through newline) is a
    multiple of 64 bytes, terminated with a newline
  - raw little-endian row-major payload

Only little-endian float32/float64 payloads of one or two dimensions are
accepted; anything else is rejected at read time.

A *dump manifest* is a single JSON object binding one layer's weight matrix
to per-sample input activations and labels (see ``MANIFEST_FIELDS``). File
paths inside a manifest are resolved relative to the manifest's directory.
Arrays are upcast to float64 after loading; sums over large path matrices
accumulate too much error in float32.
"""

from __future__ import annotations

import ast
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .validation import as_label_vector

_MAGIC = b"\x93NUMPY"
_VERSION = b"\x01\x00"
_HEADER_ALIGN = 64

# manifest dtype tag -> numpy dtype string
_DESCR = {"f32": "<f4", "f64": "<f8"}
_DTYPE_TAG = {v: k for k, v in _DESCR.items()}

MANIFEST_FIELDS = frozenset(
    {
        "model_id",
        "layer_id",
        "weight_file",
        "bias_file",
        "activation_file",
        "label_file",
        "class_names",
        "dtype",
        "sample_count",
    }
)
_REQUIRED_FIELDS = MANIFEST_FIELDS - {"bias_file"}


class DumpError(ValueError):
    """Raised for malformed array files or manifests that fail validation."""


@dataclass
class ActivationDump:
    """One layer's weights plus per-sample input activations and labels.

    ``activations`` holds the layer's *inputs* (one row per sample), so the
    interaction matrix for sample ``s`` is computable as
    ``weights * activations[s]`` without re-running the model.
    """

    model_id: str
    layer_id: str
    weights: np.ndarray          # (m, n) float64
    bias: np.ndarray | None      # (m,) float64 or None
    activations: np.ndarray      # (S, n) float64
    labels: np.ndarray           # (S,) int64
    class_names: list[str]
    dtype: str                   # "f32" | "f64" (storage dtype of the files)
    sample_count: int


def write_array(array, path, dtype: str = "f64") -> None:
    """Write a 1-D or 2-D finite float array as an NPY v1.0 file."""
    if dtype not in _DESCR:
        raise DumpError(f"unsupported dtype tag {dtype!r}, expected 'f32' or 'f64'")
    arr = np.asarray(array)
    if arr.ndim not in (1, 2):
        raise DumpError(f"only 1-D and 2-D arrays are supported, got {arr.ndim}-D")
    if arr.size == 0 or min(arr.shape) == 0:
        raise DumpError(f"arrays must be at least 1x1, got shape {arr.shape}")
    arr = np.ascontiguousarray(arr, dtype=_DESCR[dtype])
    if not np.isfinite(arr).all():
        raise DumpError("array contains NaN or Inf")

    header = _format_header(_DESCR[dtype], arr.shape)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(_VERSION)
        fh.write(len(header).to_bytes(2, "little"))
        fh.write(header)
        fh.write(arr.tobytes(order="C"))


def _format_header(descr: str, shape: tuple[int, ...]) -> bytes:
    if len(shape) == 1:
        shape_str = f"({shape[0]},)"
    else:
        shape_str = f"({shape[0]}, {shape[1]})"
    text = f"{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape_str}, }}"
    # pad with spaces so magic+version+length+header+newline is 64-aligned
    total = len(_MAGIC) + len(_VERSION) + 2 + len(text) + 1
    pad = (-total) % _HEADER_ALIGN
    return (text + " " * pad + "\n").encode("ascii")


def read_array(path) -> np.ndarray:
    """Read an NPY v1.0 file written by :func:`write_array` (or numpy).

    The file's dtype is preserved; callers that compute on the result should
    upcast to float64.
    """
    with open(path, "rb") as fh:
        data = fh.read()

    if data[:6] != _MAGIC:
        raise DumpError(f"{path}: not an NPY file (bad magic bytes)")
    if data[6:8] != _VERSION:
        raise DumpError(f"{path}: unsupported NPY version {data[6:8]!r}, expected 1.0")
    if len(data) < 10:
        raise DumpError(f"{path}: truncated header")
    hlen = int.from_bytes(data[8:10], "little")
    header_end = 10 + hlen
    if len(data) < header_end:
        raise DumpError(f"{path}: truncated header")
    try:
        header = ast.literal_eval(data[10:header_end].decode("ascii"))
    except (ValueError, SyntaxError, UnicodeDecodeError) as exc:
        raise DumpError(f"{path}: malformed NPY header") from exc
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise DumpError(f"{path}: malformed NPY header dict")

    descr = header["descr"]
    if descr not in _DTYPE_TAG:
        raise DumpError(
            f"{path}: unsupported dtype {descr!r}; only little-endian "
            "float32/float64 payloads are accepted"
        )
    if header["fortran_order"] is not False:
        raise DumpError(f"{path}: Fortran-ordered payloads are not supported")
    shape = header["shape"]
    if not (
        isinstance(shape, tuple)
        and len(shape) in (1, 2)
        and all(isinstance(d, int) for d in shape)
    ):
        raise DumpError(f"{path}: unsupported shape {shape!r}; only 1-D and 2-D arrays")
    if min(shape) < 1:
        raise DumpError(f"{path}: arrays must be at least 1x1, got shape {shape}")

    payload = data[header_end:]
    itemsize = np.dtype(descr).itemsize
    expected = int(np.prod(shape)) * itemsize
    if len(payload) != expected:
        raise DumpError(
            f"{path}: payload holds {len(payload)} bytes but shape {shape} "
            f"requires {expected}"
        )
    arr = np.frombuffer(payload, dtype=descr).reshape(shape).copy()
    if not np.isfinite(arr).all():
        raise DumpError(f"{path}: payload contains NaN or Inf")
    return arr


def load_dump(manifest_path, strict: bool = True) -> ActivationDump:
    """Load and fully validate an activation dump from its manifest.

    Checks the documented schema, loads every referenced array, cross-checks
    shapes (weight cols == activation cols, label length == activation rows,
    bias length == weight rows) and bounds every label by ``class_names``.
    Unknown manifest keys are rejected in strict mode and warned about
    otherwise.
    """
    manifest_path = Path(manifest_path)
    try:
        raw = json.loads(manifest_path.read_text())
    except FileNotFoundError:
        raise DumpError(f"manifest {manifest_path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise DumpError(f"manifest {manifest_path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise DumpError(f"manifest {manifest_path} must hold a JSON object")

    unknown = set(raw) - MANIFEST_FIELDS
    if unknown:
        msg = f"manifest {manifest_path} has unknown keys: {sorted(unknown)}"
        if strict:
            raise DumpError(msg)
        warnings.warn(msg, stacklevel=2)
    missing = _REQUIRED_FIELDS - set(raw)
    if missing:
        raise DumpError(f"manifest {manifest_path} is missing keys: {sorted(missing)}")

    dtype = raw["dtype"]
    if dtype not in _DESCR:
        raise DumpError(f"manifest dtype must be 'f32' or 'f64', got {dtype!r}")
    class_names = raw["class_names"]
    if not isinstance(class_names, list) or not all(isinstance(c, str) for c in class_names):
        raise DumpError("class_names must be a list of strings")
    if len(class_names) < 1:
        raise DumpError("class_names must not be empty")

    base = manifest_path.parent

    def load(key, expect_ndim):
        rel = raw[key]
        file_path = base / rel
        if not file_path.exists():
            raise DumpError(f"{key} {rel!r} does not exist (resolved {file_path})")
        arr = read_array(file_path)
        if arr.dtype != np.dtype(_DESCR[dtype]):
            raise DumpError(
                f"{key} {rel!r} stores {_DTYPE_TAG[arr.dtype.str]} "
                f"but the manifest declares {dtype}"
            )
        if arr.ndim != expect_ndim:
            raise DumpError(f"{key} {rel!r} must be {expect_ndim}-D, got {arr.ndim}-D")
        return arr.astype(np.float64)

    weights = load("weight_file", 2)
    activations = load("activation_file", 2)
    labels_f = load("label_file", 1)
    bias = None
    if raw.get("bias_file") is not None:
        bias = load("bias_file", 1)

    if weights.shape[1] != activations.shape[1]:
        raise DumpError(
            f"weight cols ({weights.shape[1]}) != activation cols "
            f"({activations.shape[1]})"
        )
    if labels_f.shape[0] != activations.shape[0]:
        raise DumpError(
            f"label length ({labels_f.shape[0]}) != activation rows "
            f"({activations.shape[0]})"
        )
    if bias is not None and bias.shape[0] != weights.shape[0]:
        raise DumpError(
            f"bias length ({bias.shape[0]}) != weight rows ({weights.shape[0]})"
        )
    sample_count = raw["sample_count"]
    if not isinstance(sample_count, int) or sample_count != activations.shape[0]:
        raise DumpError(
            f"sample_count {sample_count!r} does not match activation rows "
            f"({activations.shape[0]})"
        )
    try:
        labels = as_label_vector(labels_f, num_classes=len(class_names))
    except ValueError as exc:
        raise DumpError(str(exc)) from exc

    return ActivationDump(
        model_id=str(raw["model_id"]),
        layer_id=str(raw["layer_id"]),
        weights=weights,
        bias=bias,
        activations=activations,
        labels=labels,
        class_names=list(class_names),
        dtype=dtype,
        sample_count=sample_count,
    )


def write_dump(
    out_dir,
    weights,
    activations,
    labels,
    class_names,
    bias=None,
    model_id: str = "model",
    layer_id: str = "final",
    dtype: str = "f64",
    manifest_name: str = "manifest.json",
) -> Path:
    """Write arrays plus a manifest into ``out_dir``; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    write_array(np.asarray(weights, dtype=np.float64), out_dir / "weights.npy", dtype)
    write_array(np.asarray(activations, dtype=np.float64), out_dir / "activations.npy", dtype)
    write_array(np.asarray(labels, dtype=np.float64), out_dir / "labels.npy", dtype)
    manifest = {
        "model_id": model_id,
        "layer_id": layer_id,
        "weight_file": "weights.npy",
        "bias_file": None,
        "activation_file": "activations.npy",
        "label_file": "labels.npy",
        "class_names": list(class_names),
        "dtype": dtype,
        "sample_count": int(np.asarray(activations).shape[0]),
    }
    if bias is not None:
        write_array(np.asarray(bias, dtype=np.float64), out_dir / "bias.npy", dtype)
        manifest["bias_file"] = "bias.npy"

    manifest_path = out_dir / manifest_name
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path
