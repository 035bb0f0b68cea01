"""Source-term family, dataset generation and JSON persistence.

The forcing family is a four-term sine sum with random phases:

    f(x, y) = sum_i alpha_i * sin(beta_i * pi * (x + C_i))

with alpha = (1/2, 1/2, 1/10, 1/10), beta = (2, 2, 4, 4), C1, C2 drawn
uniformly from [0, 1] and C3, C4 from [0, 1/2].  As written the sum
depends on x only; the ``xy`` family variant replaces x by y in terms 2
and 4 (``verbatim`` is the default).

Files are JSON with floats printed to 17 significant digits, which
round-trips every float64 exactly and keeps outputs byte-deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .fem import fe_solve
from .mesh import MeshHierarchy, build_hierarchy
from .nn import Mlp
from .parallel import parallel_map
from .rng import SplitMix64

__all__ = [
    "ALPHA",
    "BETA",
    "SourceParams",
    "DataSample",
    "Dataset",
    "ModelStamp",
    "FormatError",
    "eval_source",
    "source_fn",
    "sample_source",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
    "save_model",
    "load_model",
]

ALPHA = (0.5, 0.5, 0.1, 0.1)
BETA = (2.0, 2.0, 4.0, 4.0)

FAMILIES = ("verbatim", "xy")

DATASET_FORMAT_VERSION = 1
MODEL_FORMAT_VERSION = 1


class FormatError(ValueError):
    """A persisted file is malformed or violates a data invariant."""


@dataclass(frozen=True)
class SourceParams:
    """Phase parameters of one family member; c1, c2 in [0,1], c3, c4 in [0,1/2]."""

    c1: float
    c2: float
    c3: float
    c4: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.c1, self.c2, self.c3, self.c4)


def eval_source(p: SourceParams, x, y, family: str = "verbatim"):
    """Evaluate the family member at (x, y); accepts scalars or arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    cs = p.as_tuple()
    out = np.zeros(np.broadcast_shapes(x.shape, y.shape))
    for i, (a, b, c) in enumerate(zip(ALPHA, BETA, cs)):
        arg = y if (family == "xy" and i % 2 == 1) else x
        out = out + a * np.sin(b * np.pi * (arg + c))
    return out if out.ndim else float(out)


def source_fn(p: SourceParams, family: str = "verbatim"):
    """The family member as a plain (x, y) -> value callable."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    return lambda x, y: eval_source(p, x, y, family=family)


def sample_source(rng: SplitMix64) -> SourceParams:
    """Draw C1, C2 ~ U[0,1] and C3, C4 ~ U[0,1/2]; four draws per call."""
    return SourceParams(
        c1=rng.uniform(0.0, 1.0),
        c2=rng.uniform(0.0, 1.0),
        c3=rng.uniform(0.0, 0.5),
        c4=rng.uniform(0.0, 0.5),
    )


@dataclass
class DataSample:
    params: SourceParams
    uH: np.ndarray  # coarse (level 0) coefficients
    uh: np.ndarray  # fine (level L) coefficients


@dataclass
class Dataset:
    """Sampled sources with their coarse and fine FE solutions."""

    n0: int
    levels: int
    seed: int
    family: str
    samples: list[DataSample]


def generate_dataset(
    m: MeshHierarchy, count: int, seed: int, family: str = "verbatim"
) -> Dataset:
    """Solve the coarse and fine problems for `count` random sources.

    Parameters are drawn sequentially from SplitMix64(seed), so the
    dataset is bit-reproducible; solves may run on worker threads
    (HYBRIDFEM_THREADS) with results ordered by sample index.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    rng = SplitMix64(seed)
    params = [sample_source(rng) for _ in range(count)]

    def solve_one(item):
        i, p = item
        f = source_fn(p, family)
        try:
            uH = fe_solve(m, 0, f)
            uh = fe_solve(m, m.levels, f)
        except Exception as e:
            raise type(e)(f"sample {i}: {e}") from e
        return DataSample(params=p, uH=uH.coeffs, uh=uh.coeffs)

    samples = parallel_map(solve_one, list(enumerate(params)))
    return Dataset(n0=m.n0, levels=m.levels, seed=seed, family=family, samples=samples)


@dataclass(frozen=True)
class ModelStamp:
    """Mesh compatibility stamp stored with a trained model."""

    n0: int
    level: int
    coarse_input: str = "patch"


# --- JSON with exact float round-trip ------------------------------------

def _dump_json(obj) -> str:
    if isinstance(obj, dict):
        items = ",".join(f"{json.dumps(k)}:{_dump_json(v)}" for k, v in obj.items())
        return "{" + items + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_dump_json(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError("non-finite value in output document")
        return format(v, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if obj is None:
        return "null"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _write_json(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dump_json(doc))
        fh.write("\n")


def _read_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: expected a JSON object at top level")
    return doc


def _require(doc: dict, key: str, path) -> object:
    if key not in doc:
        raise FormatError(f"{path}: missing key {key!r}")
    return doc[key]


def _check_version(doc: dict, expected: int, path) -> None:
    version = _require(doc, "format_version", path)
    if version != expected:
        raise FormatError(f"{path}: format_version {version!r} != {expected}")


# --- dataset files --------------------------------------------------------

def save_dataset(ds: Dataset, path) -> None:
    doc = {
        "format_version": DATASET_FORMAT_VERSION,
        "n0": ds.n0,
        "levels": ds.levels,
        "seed": ds.seed,
        "family": ds.family,
        "samples": [
            {"C": list(s.params.as_tuple()), "uH": s.uH, "uh": s.uh}
            for s in ds.samples
        ],
    }
    _write_json(doc, path)


def _validate_sample(i: int, s: DataSample, m: MeshHierarchy, path) -> None:
    c1, c2, c3, c4 = s.params.as_tuple()
    if not (0.0 <= c1 <= 1.0 and 0.0 <= c2 <= 1.0 and 0.0 <= c3 <= 0.5 and 0.0 <= c4 <= 0.5):
        raise FormatError(f"{path}: sample {i}: parameters outside the family ranges")
    for name, vec, level in (("uH", s.uH, 0), ("uh", s.uh, m.levels)):
        expected = m.node_count(level)
        if vec.shape != (expected,):
            raise FormatError(
                f"{path}: sample {i}: {name} has length {vec.shape[0]}, expected {expected}"
            )
        if not np.all(np.isfinite(vec)):
            raise FormatError(f"{path}: sample {i}: {name} contains non-finite values")
        if np.any(vec[m.boundary_mask(level)] != 0.0):
            raise FormatError(f"{path}: sample {i}: {name} is nonzero on the boundary")


def load_dataset(path) -> Dataset:
    """Load and validate a dataset file; fails loudly naming the bad sample."""
    doc = _read_json(path)
    _check_version(doc, DATASET_FORMAT_VERSION, path)
    n0 = int(_require(doc, "n0", path))
    levels = int(_require(doc, "levels", path))
    seed = int(_require(doc, "seed", path))
    family = doc.get("family", "verbatim")
    if family not in FAMILIES:
        raise FormatError(f"{path}: unknown family {family!r}")
    if n0 < 1 or levels < 1:
        raise FormatError(f"{path}: invalid mesh parameters n0={n0}, levels={levels}")
    m = build_hierarchy(n0, levels)
    raw = _require(doc, "samples", path)
    if not isinstance(raw, list) or not raw:
        raise FormatError(f"{path}: samples must be a nonempty list")
    samples = []
    for i, entry in enumerate(raw):
        cs = entry.get("C")
        if not isinstance(cs, list) or len(cs) != 4:
            raise FormatError(f"{path}: sample {i}: C must be a list of 4 reals")
        s = DataSample(
            params=SourceParams(*[float(c) for c in cs]),
            uH=np.asarray(entry.get("uH", []), dtype=float),
            uh=np.asarray(entry.get("uh", []), dtype=float),
        )
        _validate_sample(i, s, m, path)
        samples.append(s)
    return Dataset(n0=n0, levels=levels, seed=seed, family=family, samples=samples)


# --- model files ----------------------------------------------------------

def save_model(net: Mlp, path, stamp: ModelStamp | None = None) -> None:
    """Write the net as JSON: dims, activation, row-major weights, biases."""
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "dims": list(net.dims),
        "activation": net.activation,
        "weights": [w.ravel() for w in net.weights],
        "biases": list(net.biases),
    }
    if stamp is not None:
        doc["stamp"] = {
            "n0": stamp.n0,
            "level": stamp.level,
            "coarse_input": stamp.coarse_input,
        }
    _write_json(doc, path)


def load_model(path) -> tuple[Mlp, ModelStamp | None]:
    doc = _read_json(path)
    _check_version(doc, MODEL_FORMAT_VERSION, path)
    dims = _require(doc, "dims", path)
    if not isinstance(dims, list) or len(dims) < 2 or any(int(d) < 1 for d in dims):
        raise FormatError(f"{path}: invalid dims {dims!r}")
    dims = [int(d) for d in dims]
    activation = _require(doc, "activation", path)
    if activation != "tanh":
        raise FormatError(f"{path}: unsupported activation {activation!r}")
    raw_w = _require(doc, "weights", path)
    raw_b = _require(doc, "biases", path)
    if len(raw_w) != len(dims) - 1 or len(raw_b) != len(dims) - 1:
        raise FormatError(f"{path}: layer count inconsistent with dims")
    weights, biases = [], []
    for li, (n_in, n_out) in enumerate(zip(dims[:-1], dims[1:])):
        w = np.asarray(raw_w[li], dtype=float)
        b = np.asarray(raw_b[li], dtype=float)
        if w.shape != (n_out * n_in,):
            raise FormatError(f"{path}: layer {li}: weight length {w.shape[0]} != {n_out * n_in}")
        if b.shape != (n_out,):
            raise FormatError(f"{path}: layer {li}: bias length {b.shape[0]} != {n_out}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise FormatError(f"{path}: layer {li}: non-finite parameters")
        weights.append(w.reshape(n_out, n_in))
        biases.append(b)
    net = Mlp(dims=dims, weights=weights, biases=biases, activation=activation)
    stamp = None
    if "stamp" in doc:
        raw = doc["stamp"]
        try:
            stamp = ModelStamp(
                n0=int(raw["n0"]),
                level=int(raw["level"]),
                coarse_input=str(raw.get("coarse_input", "patch")),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"{path}: malformed stamp: {e}") from e
    return net, stamp
