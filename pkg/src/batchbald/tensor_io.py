"""Posterior-prediction tensors, validation and on-disk formats.

A posterior tensor holds ``p(y | x_i, w_j)`` for every pool point ``i``,
parameter sample ``j`` and class ``y`` as a float64 array of shape
``(n_pool, k, c)``. The parameter samples are assumed to be shared by all pool
points; joint probabilities across points are only meaningful under that
assumption and it cannot be checked from the data.

PTF1 layout (all little-endian)::

    bytes 0-3    b"PTF1"
    bytes 4-15   uint32 n_pool, k, c
    bytes 16-    n_pool * k * c float64, row-major (point, sample, class)
"""

from __future__ import annotations

import csv
import io
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"PTF1"
HEADER = struct.Struct("<4s3I")
NORMALIZATION_TOL = 1e-9
# refuse to allocate payloads larger than this (bytes)
MAX_PAYLOAD_BYTES = 1 << 36

TRACE_COLUMNS = (
    "round",
    "train_size",
    "test_accuracy",
    "acquired_indices",
    "label_entropy_nats",
    "strategy",
    "seed",
)
RESULTS_KEYS = ("strategy", "b", "k", "m", "seed", "exact_limit", "acquired", "scores", "step_ms")


@dataclass(frozen=True, eq=False)
class PosteriorTensor:
    """Predictive probabilities of shape ``(n_pool, k, c)``.

    Construction does not validate; use :func:`validate_tensor` or
    :func:`require_valid`.
    """

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=np.float64))

    @property
    def n_pool(self) -> int:
        return self.probs.shape[0]

    @property
    def k(self) -> int:
        return self.probs.shape[1]

    @property
    def c(self) -> int:
        return self.probs.shape[2]

    def subset(self, indices) -> "PosteriorTensor":
        return PosteriorTensor(self.probs[np.asarray(indices, dtype=np.intp)])

    def __eq__(self, other):
        if not isinstance(other, PosteriorTensor):
            return NotImplemented
        return self.probs.shape == other.probs.shape and np.array_equal(self.probs, other.probs)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    index: tuple | None = None
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            where = f" at {c.index}" if c.index is not None else ""
            extra = f": {c.detail}" if c.detail else ""
            lines.append(f"{status} {c.name}{where}{extra}")
        return "\n".join(lines)


class InvalidTensorError(ValueError):
    def __init__(self, report: ValidationReport):
        self.report = report
        names = ", ".join(f.name for f in report.failures)
        super().__init__(f"posterior tensor violates: {names}\n{report}")


def _first_index(mask: np.ndarray) -> tuple:
    return tuple(int(v) for v in np.argwhere(mask)[0])


def validate_tensor(t) -> ValidationReport:
    """Check every tensor invariant; never raises."""
    report = ValidationReport()
    try:
        probs = np.asarray(t.probs if isinstance(t, PosteriorTensor) else t, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        report.checks.append(CheckResult("numeric", False, detail=str(exc)))
        return report

    if probs.ndim != 3:
        report.checks.append(CheckResult("shape", False, detail=f"expected 3 dims, got {probs.ndim}"))
        return report
    n, k, c = probs.shape
    shape_ok = n >= 1 and k >= 1 and c >= 2
    report.checks.append(
        CheckResult("shape", shape_ok, detail="" if shape_ok else f"need n_pool>=1, k>=1, c>=2; got {probs.shape}")
    )
    if probs.size == 0:
        return report

    bad = ~np.isfinite(probs)
    report.checks.append(CheckResult("finite", not bad.any(), _first_index(bad) if bad.any() else None))

    with np.errstate(invalid="ignore"):
        out = (probs < 0.0) | (probs > 1.0)
    report.checks.append(
        CheckResult(
            "range",
            not out.any(),
            _first_index(out) if out.any() else None,
            f"value {probs[_first_index(out)]!r}" if out.any() else "",
        )
    )

    with np.errstate(invalid="ignore"):
        dev = np.abs(probs.sum(axis=2) - 1.0)
    off = ~(dev <= NORMALIZATION_TOL)
    report.checks.append(
        CheckResult(
            "normalization",
            not off.any(),
            _first_index(off) if off.any() else None,
            f"row sums to {probs[_first_index(off)].sum()!r}" if off.any() else "",
        )
    )
    return report


def require_valid(t: PosteriorTensor) -> PosteriorTensor:
    report = validate_tensor(t)
    if not report.ok:
        raise InvalidTensorError(report)
    return t


# ---------------------------------------------------------------------------
# PTF1
# ---------------------------------------------------------------------------


class TensorFormatError(ValueError):
    """Base class for PTF1 decoding errors; ``offset`` is the byte position."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


class MagicError(TensorFormatError):
    pass


class TruncatedError(TensorFormatError):
    pass


class DimensionOverflowError(TensorFormatError):
    pass


class TrailingDataError(TensorFormatError):
    pass


def encode_tensor(t: PosteriorTensor) -> bytes:
    n, k, c = t.probs.shape
    payload = np.ascontiguousarray(t.probs, dtype="<f8").tobytes()
    return HEADER.pack(MAGIC, n, k, c) + payload


def decode_tensor(data: bytes) -> PosteriorTensor:
    if len(data) < 4:
        raise TruncatedError("file shorter than magic", len(data))
    if data[:4] != MAGIC:
        raise MagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", 0)
    if len(data) < HEADER.size:
        raise TruncatedError("header truncated", len(data))
    _, n, k, c = HEADER.unpack_from(data)
    count = n * k * c
    if count * 8 > MAX_PAYLOAD_BYTES:
        raise DimensionOverflowError(f"dimensions {n}x{k}x{c} exceed payload limit", 4)
    end = HEADER.size + 8 * count
    if len(data) < end:
        raise TruncatedError(f"payload holds {(len(data) - HEADER.size) // 8} of {count} values", len(data))
    if len(data) > end:
        raise TrailingDataError(f"{len(data) - end} trailing bytes", end)
    probs = np.frombuffer(data, dtype="<f8", count=count, offset=HEADER.size)
    return PosteriorTensor(probs.astype(np.float64).reshape(n, k, c))


def read_tensor(path) -> PosteriorTensor:
    return decode_tensor(Path(path).read_bytes())


def atomic_write(path, data: bytes | str) -> None:
    """Write via a temp file in the target directory followed by rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_tensor(t: PosteriorTensor, path) -> None:
    n, k, c = t.probs.shape
    if max(n, k, c) >= 1 << 32:
        raise DimensionOverflowError("dimension does not fit in uint32", 4)
    atomic_write(path, encode_tensor(t))


# ---------------------------------------------------------------------------
# results documents and traces
# ---------------------------------------------------------------------------


def results_json(doc: dict) -> str:
    missing = [key for key in RESULTS_KEYS if key not in doc]
    if missing:
        raise KeyError(f"results document missing keys {missing}")
    ordered = {key: doc[key] for key in RESULTS_KEYS}
    return json.dumps(ordered, indent=2) + "\n"


def write_results(doc: dict, path) -> None:
    atomic_write(path, results_json(doc))


def trace_csv(trace) -> str:
    """Render a trace (anything with a non-empty ``rounds`` list) as CSV text."""
    rounds = list(trace.rounds)
    if not rounds:
        raise ValueError("cannot emit an empty trace")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for r in rounds:
        writer.writerow(
            [
                r.round,
                r.train_size,
                f"{r.test_accuracy:.6f}",
                ";".join(str(i) for i in r.acquired),
                f"{r.label_entropy:.6f}",
                trace.strategy,
                trace.seed,
            ]
        )
    return buf.getvalue()


def emit_trace_csv(trace, path) -> None:
    atomic_write(path, trace_csv(trace))


def write_traces_csv(traces, path) -> None:
    """Concatenate several traces (e.g. one per seed) under a single header."""
    traces = list(traces)
    if not traces:
        raise ValueError("no traces to write")
    parts = [trace_csv(t) for t in traces]
    body = parts[0] + "".join(p.split("\n", 1)[1] for p in parts[1:])
    atomic_write(path, body)


def read_trace_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def random_tensor(
    rng: np.random.Generator, n_pool: int, k: int, c: int, concentration: float | None = None
) -> PosteriorTensor:
    """Rows drawn from a symmetric Dirichlet.

    Without an explicit ``concentration`` one is drawn log-uniformly from
    [0.1, 3] so instances range from near one-hot to near uniform.
    """
    if concentration is None:
        concentration = float(np.exp(rng.uniform(np.log(0.1), np.log(3.0))))
    probs = rng.dirichlet(np.full(c, concentration), size=(n_pool, k))
    # renormalise: Dirichlet draws are normalised only to rounding
    probs /= probs.sum(axis=2, keepdims=True)
    return PosteriorTensor(probs)
