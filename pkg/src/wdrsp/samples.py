"""Travel-time samples, support boxes, ambiguity-set parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadConstant, BadValue, IoError, ShapeMismatch, SampleOutsideBox
from .graph import PathVector

NORMS = {"l1": 1.0, "l2": 2.0, "linf": math.inf}


def parse_norm(value) -> float:
    """Accept ``"l1"``/``"l2"``/``"linf"`` or the numbers 1, 2, inf."""
    if isinstance(value, str):
        key = value.strip().lower()
        if key in NORMS:
            return NORMS[key]
        if key in ("inf", "infinity"):
            return math.inf
        try:
            value = float(key)
        except ValueError:
            raise BadValue(f"unknown norm {value!r}") from None
    value = float(value)
    if value not in (1.0, 2.0, math.inf):
        raise BadValue(f"norm exponent must be 1, 2 or inf, got {value}")
    return value


def norm_name(p: float) -> str:
    return {1.0: "l1", 2.0: "l2", math.inf: "linf"}[p]


def dual_exponent(p: float) -> float:
    """Hoelder conjugate q with 1/p + 1/q = 1."""
    if p == 1.0:
        return math.inf
    if p == math.inf:
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True)
class SampleSet:
    """N x n matrix of observed arc travel times, one sample per row.

    The empirical distribution puts weight 1/N on each row.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim == 1:
            data = data.reshape(1, -1)
        if data.ndim != 2 or data.shape[0] < 1:
            raise BadValue("sample set needs at least one row")
        if not np.all(np.isfinite(data)):
            raise BadValue("samples must be finite")
        if np.any(data < 0):
            raise BadValue("travel times must be nonnegative")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def N(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    def rows(self, idx) -> "SampleSet":
        return SampleSet(self.data[idx])


@dataclass(frozen=True)
class SupportBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float)
        hi = np.array(self.upper, dtype=float)
        if lo.shape != hi.shape:
            raise ShapeMismatch("support bounds differ in length")
        if np.any(lo > hi):
            raise BadValue("support box has lower > upper")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains(self, points: np.ndarray, tol: float = 0.0) -> bool:
        pts = np.atleast_2d(points)
        return bool(np.all(pts >= self.lower - tol) and np.all(pts <= self.upper + tol))

    def widen(self, lower_by: float = 0.0, upper_by: float = 0.0) -> "SupportBox":
        return SupportBox(self.lower - lower_by, self.upper + upper_by)


@dataclass(frozen=True)
class AmbiguitySpec:
    """Wasserstein ball around the empirical distribution.

    ``norm_p`` is the exponent of the ground metric ``||x - y||_p``;
    ``support`` restricts the ball to distributions on a box.
    """

    radius: float
    norm_p: float = 1.0
    support: SupportBox | None = None

    def __post_init__(self):
        if not self.radius >= 0 or not math.isfinite(self.radius):
            raise BadValue(f"radius must be finite and >= 0, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "norm_p", parse_norm(self.norm_p))

    @property
    def dual_q(self) -> float:
        return dual_exponent(self.norm_p)

    def check_samples(self, samples: SampleSet, tol: float = 1e-12) -> None:
        if self.support is None:
            return
        if self.support.lower.shape[0] != samples.n:
            raise ShapeMismatch("support box dimension differs from sample dimension")
        if not self.support.contains(samples.data, tol):
            raise SampleOutsideBox("a sample row lies outside the support box")


def load_samples(path: str | Path, n_expected: int | None = None) -> SampleSet:
    """Read a headerless CSV of samples (rows) by arcs (columns)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read samples {path}: {exc}") from None
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = [float(tok) for tok in line.split(",")]
        except ValueError:
            raise BadValue(f"{path}:{lineno}: non-numeric entry") from None
        if n_expected is not None and len(row) != n_expected:
            raise ShapeMismatch(f"{path}:{lineno}: {len(row)} columns, expected {n_expected}")
        if rows and len(row) != len(rows[0]):
            raise ShapeMismatch(f"{path}:{lineno}: ragged row")
        rows.append(row)
    if not rows:
        raise BadValue(f"{path}: no samples")
    return SampleSet(np.array(rows))


def write_samples(samples: SampleSet | np.ndarray, path: str | Path) -> None:
    data = samples.data if isinstance(samples, SampleSet) else np.atleast_2d(samples)
    with open(path, "w") as fh:
        for row in data:
            fh.write(",".join(f"{v:.12g}" for v in row) + "\n")


def support_box(s: SampleSet) -> SupportBox:
    """Componentwise min/max over the samples."""
    return SupportBox(s.data.min(axis=0), s.data.max(axis=0))


def radius_schedule(N: float, beta_N: float, c1: float, c2: float, c: float, n: int) -> float:
    """Wasserstein radius guaranteeing the ball covers the truth w.p. 1 - beta_N.

    Light-tail concentration rate: exponent ``1/max(n, 2)`` once
    ``N >= log(c1/beta_N)/c2``, exponent ``1/c`` below that.
    """
    if c1 <= 0 or c2 <= 0:
        raise BadConstant("c1 and c2 must be positive")
    if not c > 1:
        raise BadConstant("moment constant c must exceed 1")
    if not 0 < beta_N < 1:
        raise BadConstant("beta_N must lie in (0, 1)")
    if N <= 0 or n < 1:
        raise BadConstant("N and n must be positive")
    log_term = math.log(c1 / beta_N)
    ratio = log_term / (c2 * N)
    if N >= log_term / c2:
        return max(ratio, 0.0) ** (1.0 / max(n, 2))
    return ratio ** (1.0 / c)


def path_times(s: SampleSet, p: PathVector | np.ndarray) -> np.ndarray:
    """Travel time of path ``p`` under each sample."""
    sel = p.selected if isinstance(p, PathVector) else np.asarray(p, dtype=float)
    if sel.shape[0] != s.n:
        raise ShapeMismatch(f"path over {sel.shape[0]} arcs, samples over {s.n}")
    return s.data @ sel
