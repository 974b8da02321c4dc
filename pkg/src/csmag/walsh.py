"""Walsh bases in sequency and Paley orderings.

Walsh functions are products of Rademacher square waves selected by the
binary digits of the function index (Gray-coded digits for the sequency
ordering, plain binary for Paley).  The discrete orthonormal basis
samples the first 2^N functions on the 2^N subinterval midpoints of
[0, 1) and scales by 1/sqrt(n).  A butterfly fast transform provides the
same action in O(n log n) for the measurement pipelines; the dense
matrix stays around for diagnostics and cross-checks.

Sign convention: at dyadic switch points, where sgn(sin(2^k pi t)) would
be zero, the binary-digit definition (-1)^{t_k} with terminating
expansions is used.  This keeps every function total and consistent with
the sampled matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ResourceError

ORDERINGS = ("sequency", "paley")

# Largest order for which a dense 2^N x 2^N matrix is built (128 MiB of
# float64 at N=12).
MAX_DENSE_ORDER = 12

# Rademacher digit extraction happens in float; beyond ~2^52 the digits
# are below the float64 resolution of t.
MAX_RADEMACHER_INDEX = 50


def _unit_interval_array(t):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise ValueError("time argument must lie in [0, 1)")
    return arr


def _binary_digit(arr, k):
    """k'th binary digit of each t in arr (k = 1 is the most significant)."""
    return np.floor(arr * 2.0 ** k).astype(np.int64) & 1


def rademacher(k, t):
    """k'th Rademacher square wave (-1)^{t_k} on t in [0, 1).

    Equals sgn(sin(2^k pi t)) away from dyadic switch points; at switch
    points the binary-digit value (+1 or -1, never 0) is returned.
    Accepts scalar or array t.
    """
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError("Rademacher index k must be an integer >= 1")
    if k > MAX_RADEMACHER_INDEX:
        raise ValueError(f"Rademacher index k={k} exceeds float digit resolution")
    arr = _unit_interval_array(t)
    out = 1 - 2 * _binary_digit(arr, k)
    if np.isscalar(t):
        return int(out)
    return out


def gray_code(i):
    """Gray code of a non-negative integer (successive codes differ in one bit)."""
    if not isinstance(i, (int, np.integer)) or i < 0:
        raise ValueError("gray_code expects a non-negative integer")
    i = int(i)
    return i ^ (i >> 1)


@dataclass(frozen=True)
class WalshIndex:
    """A Walsh function index together with its ordering convention."""

    ordering: str
    j: int

    def __post_init__(self):
        if self.ordering not in ORDERINGS:
            raise ValueError(f"unknown ordering {self.ordering!r}; use one of {ORDERINGS}")
        if not isinstance(self.j, (int, np.integer)) or self.j < 0:
            raise ValueError("Walsh index j must be a non-negative integer")
        object.__setattr__(self, "j", int(self.j))

    @property
    def rademacher_code(self):
        """Bit mask selecting the Rademacher factors (bit k-1 <-> R_k)."""
        return gray_code(self.j) if self.ordering == "sequency" else self.j


def _coerce_index(idx, ordering="sequency"):
    if isinstance(idx, WalshIndex):
        return idx
    return WalshIndex(ordering, idx)


def walsh_eval(idx, t, ordering="sequency"):
    """Evaluate a Walsh function at t in [0, 1); returns +-1.

    `idx` may be a WalshIndex or a plain integer (interpreted in
    `ordering`, sequency by default).  Accepts scalar or array t.
    """
    widx = _coerce_index(idx, ordering)
    arr = _unit_interval_array(t)
    code = widx.rademacher_code
    parity = np.zeros(arr.shape, dtype=np.int64)
    k = 1
    while code:
        if code & 1:
            parity ^= _binary_digit(arr, k)
        code >>= 1
        k += 1
    out = 1 - 2 * parity
    if np.isscalar(t):
        return int(out)
    return out


def _bit_reverse(value, width):
    out = 0
    for _ in range(width):
        out = (out << 1) | (value & 1)
        value >>= 1
    return out


def sign_table(j, order, ordering="sequency"):
    """Values (+-1) of Walsh function j on the 2^order cells of [0, 1).

    Cell c covers [c/n, (c+1)/n); the function is constant there for all
    j < n.  This is the row of the unnormalized discrete basis.
    """
    n = 1 << order
    widx = _coerce_index(j, ordering)
    if widx.j >= n:
        raise ValueError(f"index {widx.j} does not fit order {order} (n={n})")
    # On cell c the k'th binary digit of t is bit (order-k) of c, so the
    # Rademacher product reduces to a parity of masked bits of c.
    mask = _bit_reverse(widx.rademacher_code, order)
    cells = np.arange(n)
    masked = cells & mask
    parity = np.zeros(n, dtype=np.int64)
    for b in range(order):
        parity ^= (masked >> b) & 1
    return (1 - 2 * parity).astype(np.int64)


@dataclass(frozen=True)
class DiscreteWalshBasis:
    """Dense orthonormal Walsh basis: row j is W_j, entries +-1/sqrt(n)."""

    order: int
    ordering: str
    rows: np.ndarray

    def __post_init__(self):
        self.rows.setflags(write=False)

    @property
    def n(self):
        return 1 << self.order

    def row(self, j):
        return self.rows[j]


def discrete_walsh_matrix(order, ordering="sequency"):
    """Build the dense 2^order discrete orthonormal Walsh basis."""
    if order < 0:
        raise ValueError("order must be >= 0")
    if order > MAX_DENSE_ORDER:
        raise ResourceError(
            f"dense Walsh matrix of order {order} needs {(1 << (2 * order)) * 8} bytes; "
            f"limit is order {MAX_DENSE_ORDER}"
        )
    if ordering not in ORDERINGS:
        raise ValueError(f"unknown ordering {ordering!r}")
    n = 1 << order
    codes = np.arange(n)
    if ordering == "sequency":
        codes = codes ^ (codes >> 1)
    masks = np.array([_bit_reverse(int(c), order) for c in codes], dtype=np.int64)
    cells = np.arange(n, dtype=np.int64)
    masked = masks[:, None] & cells[None, :]
    parity = np.zeros((n, n), dtype=np.int64)
    for b in range(order):
        parity ^= (masked >> b) & 1
    rows = (1 - 2 * parity) / np.sqrt(n)
    return DiscreteWalshBasis(order, ordering, rows)


@lru_cache(maxsize=8)
def cached_walsh_matrix(order, ordering="sequency"):
    """Memoized dense basis; shared by the measurement pipelines."""
    return discrete_walsh_matrix(order, ordering)


def fwht_natural(x):
    """Unnormalized fast Walsh-Hadamard transform, natural (Hadamard) order.

    Returns H @ x with H[i, j] = (-1)^{popcount(i & j)}.
    """
    a = np.array(x, dtype=float)
    n = a.size
    if n == 0 or n & (n - 1):
        raise ValueError("input length must be a power of two")
    h = 1
    while h < n:
        a = a.reshape(n // (2 * h), 2, h)
        top = a[:, 0, :] + a[:, 1, :]
        bot = a[:, 0, :] - a[:, 1, :]
        a = np.concatenate((top[:, None, :], bot[:, None, :]), axis=1).reshape(n)
        h *= 2
    return a


@lru_cache(maxsize=16)
def _row_permutation(order, ordering):
    """perm[i] = natural-order row index of the i'th ordered Walsh row."""
    n = 1 << order
    idx = np.arange(n)
    codes = idx ^ (idx >> 1) if ordering == "sequency" else idx
    return np.array([_bit_reverse(int(c), order) for c in codes], dtype=np.intp)


def fast_walsh_transform(v, ordering="sequency"):
    """Orthonormal Walsh transform W @ v via the butterfly, O(n log n)."""
    v = np.asarray(v, dtype=float)
    n = v.size
    order = n.bit_length() - 1
    if 1 << order != n:
        raise ValueError("input length must be a power of two")
    perm = _row_permutation(order, ordering)
    return fwht_natural(v)[perm] / np.sqrt(n)


def fast_walsh_inverse(v, ordering="sequency"):
    """Inverse (= transpose) of fast_walsh_transform."""
    v = np.asarray(v, dtype=float)
    n = v.size
    order = n.bit_length() - 1
    if 1 << order != n:
        raise ValueError("input length must be a power of two")
    perm = _row_permutation(order, ordering)
    scattered = np.zeros(n)
    scattered[perm] = v
    return fwht_natural(scattered) / np.sqrt(n)


@dataclass(frozen=True)
class WalshCoefficients:
    """Continuous-basis Walsh coefficients of a field over [0, T]."""

    T: float
    coeffs: dict

    def __post_init__(self):
        for j, value in self.coeffs.items():
            if not np.isfinite(value):
                raise ValueError(f"non-finite Walsh coefficient at index {j}")

    def vector(self, n):
        return np.array([self.coeffs[j] for j in range(n)])


def cell_averages(field, T, n, quadrature_points):
    q = quadrature_points
    if q < n or q % n:
        raise ValueError("quadrature_points must be a multiple of the cell count")
    s = (np.arange(q) + 0.5) * (T / q)
    vals = np.asarray(field.evaluate(s), dtype=float)
    return vals.reshape(n, q // n).mean(axis=1)


def walsh_coefficient(field, idx, T, quadrature_points, ordering="sequency"):
    """Midpoint-rule value of (1/T) * integral of b(t) w_j(t/T) dt.

    `quadrature_points` must be a power of two at least as fine as the
    dyadic resolution of the Walsh function, so that the piecewise
    constant w_j is integrated exactly per cell.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    widx = _coerce_index(idx, ordering)
    q = int(quadrature_points)
    if q < 1 or q & (q - 1):
        raise ValueError("quadrature_points must be a positive power of two")
    resolution = widx.rademacher_code.bit_length()
    if q < (1 << resolution):
        raise ValueError(
            f"quadrature_points={q} cannot resolve Walsh index {widx.j} "
            f"(needs at least {1 << resolution})"
        )
    s = (np.arange(q) + 0.5) * (T / q)
    w = walsh_eval(widx, s / T)
    vals = np.asarray(field.evaluate(s), dtype=float)
    return float(np.mean(vals * w))


def walsh_spectrum(field, order, T, quadrature_points=None, ordering="sequency"):
    """All 2^order continuous Walsh coefficients of a field, via the fast transform.

    Uses per-cell averages of the field, which makes the midpoint rule
    exact for every (piecewise constant) Walsh function at once:
    b_hat = W @ cell_averages / sqrt(n).
    """
    if T <= 0:
        raise ValueError("T must be positive")
    n = 1 << order
    q = n if quadrature_points is None else int(quadrature_points)
    avg = cell_averages(field, T, n, q)
    coeffs = fast_walsh_transform(avg, ordering) / np.sqrt(n)
    return WalshCoefficients(T, {j: float(c) for j, c in enumerate(coeffs)})
