"""
Construction and analysis of LWPD generator matrices.

A codebook stores its generator as an integer sign matrix over {-1, 0, +1}
together with a single global scale 1/sqrt(t). Every row has exactly t
non-zeros, so the scaled rows are unit vectors and the master can apply a
worker's result with additions and subtractions only.

For n = 2k with n, k powers of two the matrix is the block code built from
the Hadamard-type character matrix X^(t) and the half-blocks L^(t), R^(t).
Other (n, k) are handled by building the code for the next powers of two
and rotating rows and task labels every round (the toroidal schedule).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np


class UnsupportedParametersError(ValueError):
    """Raised for parameter triples the block construction cannot realise."""


def is_power_of_two(x: int) -> bool:
    return isinstance(x, (int, np.integer)) and x >= 1 and (x & (x - 1)) == 0


def next_power_of_two(x: int) -> int:
    if x < 1:
        raise ValueError(f"expected a positive integer, got {x}")
    return 1 << (int(x) - 1).bit_length()


def _is_prime(x: int) -> bool:
    if x < 2:
        return False
    if x % 2 == 0:
        return x == 2
    f = 3
    while f * f <= x:
        if x % f == 0:
            return False
        f += 2
    return True


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class CodeParams:
    """The (n, k, t) triple plus the permutation displacement d.

    Only cheap structural checks run on construction so hand-made fixtures
    (e.g. a lone X^(t) block) can still be described; :meth:`validate`
    enforces the full set of constraints needed by :func:`build_code`.
    """

    n: int
    k: int
    t: int
    d: int | None = None

    def __post_init__(self):
        for name in ("n", "k", "t"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if not is_power_of_two(self.t) or self.t < 2:
            raise ValueError(f"t must be a power of two >= 2, got {self.t}")

    @property
    def p(self) -> int:
        return self.t.bit_length() - 1

    @property
    def n_pow(self) -> int:
        """Number of rows of the internal power-of-two codebook."""
        return next_power_of_two(self.n)

    @property
    def k_pow(self) -> int:
        return next_power_of_two(self.k)

    @property
    def s(self) -> int:
        return self.k_pow // self.t

    @property
    def needs_schedule(self) -> bool:
        return not (
            is_power_of_two(self.n) and is_power_of_two(self.k) and self.n == 2 * self.k
        )

    def resolved(self) -> "CodeParams":
        """Copy with ``d`` filled in when a schedule is needed, dropped otherwise."""
        if not self.needs_schedule:
            return CodeParams(self.n, self.k, self.t, None)
        d = self.d if self.d is not None else find_displacement(self.k)
        return CodeParams(self.n, self.k, self.t, d)

    def validate(self) -> None:
        if not self.k <= self.n <= 2 * self.k:
            raise ValueError(f"need k <= n <= 2k, got n={self.n}, k={self.k}")
        if self.k_pow % self.t or self.s < 2:
            raise UnsupportedParametersError(
                f"s = k'/t must be >= 2 (k'={self.k_pow}, t={self.t})"
            )
        if self.t > self.n_pow // 4:
            raise ValueError(f"t={self.t} exceeds n'/4 = {self.n_pow // 4}")
        if self.d is not None:
            if self.d % 2 == 0 or not _is_prime(self.d) or self.k % self.d == 0:
                raise ValueError(f"d={self.d} must be an odd prime not dividing k={self.k}")


# ---------------------------------------------------------------------------
# characters and blocks


def char_value(alpha: str | Iterable[int], beta: str | Iterable[int]) -> int:
    """Unscaled character sign (-1)^<alpha, beta> over F_2^p.

    ``alpha`` and ``beta`` are bit strings ("0110") or sequences of 0/1.
    """
    a = [int(c) for c in alpha]
    b = [int(c) for c in beta]
    if len(a) != len(b):
        raise ValueError(f"bit strings differ in length: {len(a)} != {len(b)}")
    if any(x not in (0, 1) for x in a + b):
        raise ValueError("bit strings may only contain 0 and 1")
    parity = 0
    for x, y in zip(a, b):
        parity ^= x & y
    return -1 if parity else 1


def build_X(t: int) -> np.ndarray:
    """t x t sign matrix with entry [alpha, beta] = (-1)^popcount(alpha & beta).

    Row and column indices are read as binary strings of length log2(t).
    Scaled by 1/sqrt(t) the rows are orthonormal.
    """
    if not is_power_of_two(t):
        raise ValueError(f"t must be a power of two, got {t}")
    idx = np.arange(t)
    anded = idx[:, None] & idx[None, :]
    parity = np.zeros_like(anded)
    while anded.any():
        parity ^= anded & 1
        anded >>= 1
    return (1 - 2 * parity).astype(np.int8)


def build_LR(t: int) -> tuple[np.ndarray, np.ndarray]:
    """Half-support parity blocks L^(t) and R^(t) as sign matrices.

    L keeps X^(t/2) stacked twice in its right half; R keeps X^(t/2) over
    -X^(t/2) in its left half. The 1/sqrt(2) of the block definition folds
    into the global 1/sqrt(t) scale.
    """
    if not is_power_of_two(t) or t < 2:
        raise ValueError(f"t must be a power of two >= 2, got {t}")
    h = t // 2
    xh = build_X(h)
    L = np.zeros((t, t), dtype=np.int8)
    R = np.zeros((t, t), dtype=np.int8)
    L[:h, h:] = xh
    L[h:, h:] = xh
    R[:h, :h] = xh
    R[h:, :h] = -xh
    return L, R


def _block_code(k: int, t: int) -> np.ndarray:
    s = k // t
    X = build_X(t)
    L, R = build_LR(t)
    C = np.zeros((2 * k, k), dtype=np.int8)
    for b in range(s):
        C[b * t:(b + 1) * t, b * t:(b + 1) * t] = X
    for b in range(s):
        rows = slice(k + b * t, k + (b + 1) * t)
        nxt = (b + 1) % s
        C[rows, b * t:(b + 1) * t] += L
        C[rows, nxt * t:(nxt + 1) * t] += R
    return C


# ---------------------------------------------------------------------------
# codebook


@dataclass(frozen=True)
class Codebook:
    """Signed generator matrix with global scale 1/sqrt(t) and round schedule.

    ``signs`` has shape (n', k'); it equals the n x k generator when n = 2k
    are powers of two. With a schedule, worker ``i`` evaluates row
    ``(i + d*r) % n'`` in round ``r`` and virtual column ``c`` stands for real
    task ``((c - r) % k') % k``.
    """

    params: CodeParams
    signs: np.ndarray = field(repr=False)

    def __post_init__(self):
        signs = np.asarray(self.signs)
        if signs.ndim != 2:
            raise ValueError("signs must be a 2-d matrix")
        if not np.isin(signs, (-1, 0, 1)).all():
            raise ValueError("sign entries must lie in {-1, 0, 1}")
        signs = signs.astype(np.int8)
        signs.setflags(write=False)
        object.__setattr__(self, "signs", signs)

    @property
    def t(self) -> int:
        return self.params.t

    @property
    def scale(self) -> float:
        return 1.0 / math.sqrt(self.params.t)

    @property
    def n_rows(self) -> int:
        return self.signs.shape[0]

    @property
    def n_cols(self) -> int:
        return self.signs.shape[1]

    @property
    def has_schedule(self) -> bool:
        return self.params.d is not None

    def matrix(self) -> np.ndarray:
        return self.signs * self.scale

    def row_for(self, worker: int, round: int = 0) -> tuple[int, int]:
        """(row, rotation) evaluated by ``worker`` in ``round``."""
        if not 0 <= worker < self.params.n:
            raise IndexError(f"worker {worker} out of range [0, {self.params.n})")
        if not self.has_schedule:
            return worker, 0
        row = (worker + self.params.d * round) % self.n_rows
        return row, round

    def task_of_column(self, col: int, rotation: int = 0) -> int:
        """Real task index that virtual column ``col`` stands for."""
        if not self.has_schedule:
            return col
        return ((col - rotation) % self.n_cols) % self.params.k

    def schedule(self, rounds: int) -> list[tuple[int, int, int, int]]:
        """(round, worker, row, rotation) quadruples for ``rounds`` rounds."""
        if not self.has_schedule:
            return []
        out = []
        for r in range(rounds):
            for i in range(self.params.n):
                row, rot = self.row_for(i, r)
                out.append((r, i, row, rot))
        return out


def build_code(params: CodeParams) -> Codebook:
    """Build the LWPD codebook for ``params``.

    For n = 2k powers of two the result is the block code itself. Otherwise
    the first n' rows of C^(2k', k', t) are kept and a displacement d is
    attached so the toroidal schedule covers every row/task pairing.
    """
    params.validate()
    params = params.resolved()
    full = _block_code(params.k_pow, params.t)
    return Codebook(params, full[: params.n_pow])


# ---------------------------------------------------------------------------
# distance and weight analysis


@dataclass(frozen=True)
class DistanceReport:
    min_distance: float
    pair_histogram: dict[float, int]
    gap_ratio: float

    def summary(self) -> str:
        lines = [
            f"min_distance {self.min_distance:.12f} rad ({self.min_distance / math.pi:.6f} pi)",
            f"gap_ratio {self.gap_ratio:.12f}",
            "# gap_ratio = (pi/2 - min_distance) / (pi/2); for min_distance = pi/3 this is 1/3.",
            "# The often-quoted '1/6 ~ 16%' figure for this ratio does not follow from that formula.",
        ]
        for dist, count in sorted(self.pair_histogram.items()):
            lines.append(f"pairs at {dist:.12f} rad: {count}")
        return "\n".join(lines)


def projective_distance(u, v, atol: float = 1e-9) -> float:
    """Angle between the lines spanned by unit vectors u and v, in [0, pi/2]."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch {u.shape} vs {v.shape}")
    for name, x in (("u", u), ("v", v)):
        if abs(np.linalg.norm(x) - 1.0) > atol:
            raise ValueError(f"{name} is not unit norm (|{name}| = {np.linalg.norm(x)})")
    # half-angle form; arccos loses ~1e-8 near parallel vectors
    if np.dot(u, v) < 0:
        v = -v
    return 2.0 * math.atan2(float(np.linalg.norm(u - v)), float(np.linalg.norm(u + v)))


def _unit_rows(code) -> np.ndarray:
    if isinstance(code, Codebook):
        return code.matrix()
    return np.asarray(code, dtype=float)


def analyze_distance(code, decimals: int = 9) -> DistanceReport:
    """Minimum pairwise projective distance over all row pairs.

    ``code`` is a :class:`Codebook` or any matrix whose rows are unit
    vectors. Histogram keys are distances rounded to ``decimals`` places.
    """
    rows = _unit_rows(code)
    n = rows.shape[0]
    hist: Counter = Counter()
    best = math.pi / 2
    for i in range(n):
        for j in range(i + 1, n):
            dist = projective_distance(rows[i], rows[j])
            best = min(best, dist)
            hist[round(dist, decimals)] += 1
    half_pi = math.pi / 2
    return DistanceReport(best, dict(hist), (half_pi - best) / half_pi)


def weight_distribution(code) -> dict[int, int]:
    """Count rows by their number of non-zero entries."""
    m = code.signs if isinstance(code, Codebook) else np.asarray(code)
    weights = np.count_nonzero(m, axis=1)
    return dict(sorted(Counter(int(w) for w in weights).items()))


# ---------------------------------------------------------------------------
# schedule


def find_displacement(k: int) -> int:
    """Smallest odd prime that does not divide ``k``."""
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    d = 3
    while True:
        if _is_prime(d) and k % d:
            return d
        d += 2


def check_coverage(params: CodeParams, rounds: int | None = None) -> bool:
    """Does the sliding window visit every (row offset, task offset) pair?

    The window anchor moves by d rows (mod n') and one task (mod k) per
    round; coverage needs all n'*k residue pairs within ``rounds`` rounds.
    The visited pairs form the cyclic subgroup generated by (d, 1), so full
    coverage is possible only when n' and k are coprime (k odd); for even k
    that is not a power of two this returns False for every ``rounds``.
    """
    d = params.d if params.d is not None else find_displacement(params.k)
    n_pow, k = params.n_pow, params.k
    if rounds is None:
        rounds = n_pow * k
    seen = {((d * r) % n_pow, r % k) for r in range(rounds)}
    return len(seen) == n_pow * k


# ---------------------------------------------------------------------------
# text export


def dumps_codebook(cb: Codebook, rounds: int = 0) -> str:
    """Text form: "n k t d" header, one line per row, optional schedule."""
    p = cb.params
    lines = [f"{p.n} {p.k} {p.t} {p.d or 0}"]
    lines += [" ".join(str(int(x)) for x in row) for row in cb.signs]
    if rounds and cb.has_schedule:
        lines.append(f"schedule {rounds}")
        lines += [" ".join(map(str, q)) for q in cb.schedule(rounds)]
    return "\n".join(lines) + "\n"


def loads_codebook(text: str) -> Codebook:
    """Parse :func:`dumps_codebook` output. No structural checks are applied."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty codebook text")
    try:
        n, k, t, d = (int(x) for x in lines[0].split())
    except ValueError as e:
        raise ValueError(f"bad header line {lines[0]!r}") from e
    params = CodeParams(n, k, t, d or None)
    n_rows = params.n_pow if params.d else n
    body = lines[1:1 + n_rows]
    if len(body) != n_rows:
        raise ValueError(f"expected {n_rows} matrix rows, found {len(body)}")
    signs = np.array([[int(x) for x in ln.split()] for ln in body])
    if signs.ndim != 2:
        raise ValueError("ragged codebook rows")
    rest = lines[1 + n_rows:]
    cb = Codebook(params, signs)
    if rest:
        head = rest[0].split()
        if head[0] != "schedule":
            raise ValueError(f"unexpected line {rest[0]!r}")
        quads = [tuple(int(x) for x in ln.split()) for ln in rest[1:]]
        if quads != cb.schedule(int(head[1])):
            raise ValueError("stored schedule disagrees with the displacement rule")
    return cb


# ---------------------------------------------------------------------------
# property suite


def verify_codebook(cb: Codebook, atol: float = 1e-9) -> list[tuple[str, bool, str]]:
    """Run every structural check; returns (invariant, passed, detail) triples."""
    out = []
    t = cb.t
    weights = np.count_nonzero(cb.signs, axis=1)
    bad = np.flatnonzero(weights != t)
    out.append(("row-weight", bad.size == 0,
                f"rows {bad.tolist()} do not have weight {t}" if bad.size else f"all rows weight {t}"))

    norms = np.linalg.norm(cb.matrix(), axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > atol)
    out.append(("unit-norm", bad.size == 0,
                f"rows {bad.tolist()} are not unit norm" if bad.size else "all rows unit norm"))

    k_sys = min(cb.n_rows, cb.n_cols)
    sys_rows = cb.matrix()[:k_sys]
    dev = float(np.max(np.abs(sys_rows @ sys_rows.T - np.eye(k_sys))))
    out.append(("systematic-orthonormality", dev <= atol, f"max Gram deviation {dev:.3g}"))

    if np.all(np.abs(norms - 1.0) <= atol):
        rep = analyze_distance(cb)
        if cb.n_rows > cb.n_cols:
            third = abs(rep.min_distance - math.pi / 3) <= atol
            others = all(abs(d - math.pi / 3) <= atol or abs(d - math.pi / 2) <= atol
                         for d in rep.pair_histogram)
            out.append(("min-distance", third and others,
                        f"min {rep.min_distance:.12f}, distances {sorted(rep.pair_histogram)}"))
            out.append(("no-projective-mds", rep.min_distance < math.pi / 2 - atol,
                        f"min {rep.min_distance:.12f} < pi/2"))
        else:
            out.append(("min-distance", abs(rep.min_distance - math.pi / 2) <= atol,
                        f"min {rep.min_distance:.12f} (no parity rows)"))

    try:
        ref = build_code(CodeParams(cb.params.n, cb.params.k, cb.params.t))
        same = ref.signs.shape == cb.signs.shape and bool(np.array_equal(ref.signs, cb.signs))
        same = same and ref.params.d == cb.params.d
        out.append(("construction", same, "matches build_code" if same else "differs from build_code"))
    except ValueError as e:
        out.append(("construction", False, str(e)))
    return out
