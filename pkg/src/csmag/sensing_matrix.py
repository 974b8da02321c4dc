"""Measurement operators and their compressive-sensing diagnostics.

Builds subsampled orthonormal-basis products (rows of Phi^T Psi picked
by an index set) and the classical random ensembles, plus the coherence
and exact restricted-isometry diagnostics used to sanity-check them at
desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from . import walsh
from .errors import ResourceError

MATRIX_FORMAT = "csmag-matrix/1"

RANDOM_ENSEMBLES = ("bernoulli", "gaussian", "ternary", "sphere_columns", "projection")

# RIC gate under which l1 recovery of 2S-sparse-RIP matrices is exact.
EXACT_RECOVERY_RIC_GATE = 0.4652

_ORTHONORMALITY_TOL = 1e-10
_DEFAULT_SUPPORT_BUDGET = 2_000_000


@dataclass(frozen=True)
class OrthonormalBasis:
    """An orthonormal basis of R^n; column k is the k'th basis vector."""

    label: str
    columns: np.ndarray

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=float)
        if cols.ndim != 2 or cols.shape[0] != cols.shape[1]:
            raise ValueError("basis matrix must be square")
        gram_dev = np.max(np.abs(cols.T @ cols - np.eye(cols.shape[0])))
        if gram_dev > _ORTHONORMALITY_TOL:
            raise ValueError(f"columns are not orthonormal (deviation {gram_dev:.3g})")
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)

    @property
    def n(self):
        return self.columns.shape[0]


@lru_cache(maxsize=8)
def spike_basis(n):
    """Standard basis of R^n."""
    return OrthonormalBasis("spike", np.eye(n))


@lru_cache(maxsize=8)
def walsh_basis(order, ordering="sequency"):
    """Discrete Walsh basis as columns (basis vector k = Walsh row k)."""
    rows = walsh.cached_walsh_matrix(order, ordering).rows
    label = "walsh_sequency" if ordering == "sequency" else "walsh_paley"
    return OrthonormalBasis(label, rows.T.copy())


@lru_cache(maxsize=8)
def fourier_real_basis(n):
    """Real Fourier basis on the n interval midpoints of [0, 1).

    Columns: DC, then interleaved cos/sin pairs at integer frequencies
    1..n/2-1 evaluated at (j + 1/2)/n, then the Nyquist vector, which at
    midpoint sampling is the alternating (-1)^j / sqrt(n).
    """
    if n < 2 or n % 2:
        raise ValueError("n must be even and >= 2")
    j = np.arange(n)
    theta = 2.0 * np.pi * (j + 0.5) / n
    cols = np.empty((n, n))
    cols[:, 0] = 1.0 / np.sqrt(n)
    scale = np.sqrt(2.0 / n)
    for k in range(1, n // 2):
        cols[:, 2 * k - 1] = scale * np.cos(k * theta)
        cols[:, 2 * k] = scale * np.sin(k * theta)
    cols[:, n - 1] = np.where(j % 2 == 0, 1.0, -1.0) / np.sqrt(n)
    return OrthonormalBasis("fourier_real", cols)


def coherence(phi, psi):
    """mu(Phi, Psi) = sqrt(n) max |<phi_i, psi_j>|, in [1, sqrt(n)]."""
    if phi.n != psi.n:
        raise ValueError("bases must have the same dimension")
    overlap = np.max(np.abs(phi.columns.T @ psi.columns))
    return float(np.sqrt(phi.n) * overlap)


@dataclass(frozen=True)
class SensingMatrix:
    """An m x n measurement operator with its provenance."""

    matrix: np.ndarray
    provenance: dict
    sparse_basis_label: str | None = None

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        if mat.ndim != 2:
            raise ValueError("matrix must be 2-d")
        if mat.shape[0] > mat.shape[1]:
            raise ValueError("need m <= n")
        if not np.all(np.isfinite(mat)):
            raise ValueError("matrix entries must be finite")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def m(self):
        return self.matrix.shape[0]

    @property
    def n(self):
        return self.matrix.shape[1]


def subsample_rows(phi, psi, indices):
    """Rows of Phi^T Psi selected by the index set, in the set's order.

    With Psi the spike basis, row j is the j'th measurement vector
    itself.
    """
    if phi.n != psi.n:
        raise ValueError("bases must have the same dimension")
    idx = [int(i) for i in indices]
    if len(set(idx)) != len(idx):
        raise ValueError("index set contains duplicates")
    if any(i < 0 or i >= phi.n for i in idx):
        raise ValueError("index out of range")
    product = phi.columns.T @ psi.columns
    return SensingMatrix(
        product[idx],
        {
            "kind": "subsampled",
            "measurement_basis": phi.label,
            "sparse_basis": psi.label,
            "indices": tuple(idx),
        },
        sparse_basis_label=psi.label,
    )


def random_matrix(kind, rng_seed, m, n):
    """Draw an m x n matrix from one of the named random ensembles.

    bernoulli: entries +-1/sqrt(m) with probability 1/2 each;
    gaussian: N(0, 1/m) entries;
    ternary: {-sqrt(3/m), 0, sqrt(3/m)} with probabilities {1/6, 2/3, 1/6};
    sphere_columns: columns uniform on the unit sphere S^{m-1};
    projection: m rows of a random n x n orthogonal matrix times sqrt(n/m).
    """
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    rng = np.random.default_rng(rng_seed)
    if kind == "bernoulli":
        mat = rng.choice([-1.0, 1.0], size=(m, n)) / np.sqrt(m)
    elif kind == "gaussian":
        mat = rng.normal(0.0, 1.0 / np.sqrt(m), size=(m, n))
    elif kind == "ternary":
        root = np.sqrt(3.0 / m)
        mat = rng.choice([-root, 0.0, root], size=(m, n), p=[1 / 6, 2 / 3, 1 / 6])
    elif kind == "sphere_columns":
        cols = rng.normal(size=(m, n))
        mat = cols / np.linalg.norm(cols, axis=0)
    elif kind == "projection":
        q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        mat = q[:m] * np.sqrt(n / m)
    else:
        raise ValueError(f"unknown ensemble kind {kind!r}; use one of {RANDOM_ENSEMBLES}")
    return SensingMatrix(
        mat,
        {"kind": "ensemble", "ensemble": kind, "seed": rng_seed},
        sparse_basis_label=None,
    )


def compose_with_basis(g, psi):
    """A = G Psi: measurement matrix expressed in the sparse basis."""
    if g.n != psi.n:
        raise ValueError("dimension mismatch between matrix and basis")
    return SensingMatrix(
        g.matrix @ psi.columns,
        {"kind": "composed", "measurement": g.provenance, "sparse_basis": psi.label},
        sparse_basis_label=psi.label,
    )


@dataclass(frozen=True)
class RipReport:
    """Exact restricted-isometry constant at one sparsity level."""

    sparsity: int
    delta: float
    supports_enumerated: int
    worst_support: tuple


def restricted_isometry_constant(a, sparsity, support_budget=_DEFAULT_SUPPORT_BUDGET):
    """Exact RIC by enumerating every S-column submatrix.

    delta_S is the largest deviation max(sigma_max^2 - 1, 1 - sigma_min^2)
    over all supports, computed from the eigenvalues of the support Gram
    matrix minus the identity (exactly zero for orthonormal inputs).
    """
    mat = a.matrix if isinstance(a, SensingMatrix) else np.asarray(a, dtype=float)
    n = mat.shape[1]
    if sparsity < 1 or sparsity > n:
        raise ValueError("sparsity must lie in [1, n]")
    count = math.comb(n, sparsity)
    if count > support_budget:
        raise ResourceError(
            f"RIC enumeration needs {count} supports, over the budget of {support_budget}"
        )
    eye = np.eye(sparsity)
    delta = 0.0
    worst = tuple(range(sparsity))
    for support in combinations(range(n), sparsity):
        sub = mat[:, support]
        dev = sub.T @ sub - eye
        eigs = np.linalg.eigvalsh(dev)
        local = max(abs(eigs[0]), abs(eigs[-1]))
        if local > delta:
            delta = local
            worst = support
    return RipReport(sparsity, float(delta), count, worst)


def rip_check(a, sparsity, delta, support_budget=_DEFAULT_SUPPORT_BUDGET):
    """True when the exact RIC at this sparsity is below delta."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    report = restricted_isometry_constant(a, sparsity, support_budget)
    return bool(report.delta < delta)


def exact_recovery_gate(a, sparsity, support_budget=_DEFAULT_SUPPORT_BUDGET):
    """The order-2S gate guaranteeing unique l1 recovery of S-sparse signals."""
    return rip_check(a, 2 * sparsity, EXACT_RECOVERY_RIC_GATE, support_budget)


def save_matrix(sm, path):
    """Plain-text dense dump: header 'm n', then one row per line."""
    mat = sm.matrix if isinstance(sm, SensingMatrix) else np.asarray(sm, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{mat.shape[0]} {mat.shape[1]}\n")
        for row in mat:
            fh.write(" ".join(repr(float(v)) for v in row))
            fh.write("\n")


def load_matrix(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("expected 'm n' header line")
        m, n = int(header[0]), int(header[1])
        rows = [np.array(fh.readline().split(), dtype=float) for _ in range(m)]
    mat = np.vstack(rows)
    if mat.shape != (m, n):
        raise ValueError("matrix body does not match header dimensions")
    return SensingMatrix(mat, {"kind": "file", "path": str(path)})
