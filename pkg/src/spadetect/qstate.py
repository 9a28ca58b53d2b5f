"""Density operators on multipartite systems and the state families used as test inputs.

Basis ordering follows ``numpy.kron``: for dims ``[d1, d2, ...]`` the flat
index of ``|i1 i2 ...>`` is ``i1 * (d2 * d3 ...) + i2 * (d3 ...) + ...``, so
the leftmost subsystem is the most significant digit. ``|0> (x) |1>`` is
therefore ``(0, 1, 0, 0)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-9
TRACE_TOL = 1e-9
PSD_TOL = 1e-9
NORM_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=complex, copy=True)
    a.flags.writeable = False
    return a


def _check_dims(dims, m):
    dims = tuple(int(x) for x in dims)
    if not dims or any(x < 1 for x in dims):
        raise ValueError(f"invalid dims {dims}")
    if int(np.prod(dims)) != m:
        raise ValueError(f"dims {dims} do not multiply to {m}")
    return dims


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, unit-trace, positive semidefinite matrix with subsystem dims."""

    dims: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {mat.shape}")
        dims = _check_dims(self.dims, mat.shape[0])
        herm_err = np.max(np.abs(mat - mat.conj().T))
        if herm_err > HERMITIAN_TOL:
            raise ValueError(f"matrix is not Hermitian (max deviation {herm_err:.3g})")
        tr = np.trace(mat)
        if abs(tr - 1) > TRACE_TOL:
            raise ValueError(f"trace {tr.real:.12g} is not 1")
        lo = np.linalg.eigvalsh(mat)[0]
        if lo < -PSD_TOL:
            raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {lo:.3g})")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def __repr__(self):
        return f"DensityOperator(dims={list(self.dims)})"


@dataclass(frozen=True, eq=False)
class PureState:
    dims: tuple[int, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = _frozen(self.amplitudes)
        if amp.ndim != 1:
            raise ValueError("amplitudes must be a vector")
        dims = _check_dims(self.dims, amp.shape[0])
        nrm = np.linalg.norm(amp)
        if abs(nrm - 1) > NORM_TOL:
            raise ValueError(f"state norm {nrm:.15g} is not 1")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amp)

    def to_density(self) -> DensityOperator:
        return DensityOperator(self.dims, np.outer(self.amplitudes, self.amplitudes.conj()))

    def __repr__(self):
        return f"PureState(dims={list(self.dims)})"


def as_matrix(state) -> np.ndarray:
    """Density matrix of a state given as DensityOperator, PureState or array."""
    if isinstance(state, DensityOperator):
        return state.matrix
    if isinstance(state, PureState):
        return np.outer(state.amplitudes, state.amplitudes.conj())
    return np.asarray(state, dtype=complex)


def tensor(a, b):
    """Kronecker product of two states of the same kind, concatenating dims."""
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(a.dims + b.dims, np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        return DensityOperator(a.dims + b.dims, np.kron(a.matrix, b.matrix))
    raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def _subsystem(dims, subsystem):
    if not 0 <= subsystem < len(dims):
        raise ValueError(f"subsystem index {subsystem} out of range for dims {list(dims)}")
    return subsystem


def partial_transpose_matrix(matrix, dims: Sequence[int], subsystem: int) -> np.ndarray:
    dims = tuple(dims)
    _subsystem(dims, subsystem)
    n = len(dims)
    m = int(np.prod(dims))
    t = np.asarray(matrix).reshape(dims + dims)
    axes = list(range(2 * n))
    axes[subsystem], axes[subsystem + n] = axes[subsystem + n], axes[subsystem]
    return t.transpose(axes).reshape(m, m)


def partial_transpose(rho: DensityOperator, subsystem: int = 1) -> np.ndarray:
    """Transpose the indices of one tensor factor.

    The result is returned as a plain Hermitian array because it need not be
    positive semidefinite.
    """
    return partial_transpose_matrix(rho.matrix, rho.dims, subsystem)


def partial_trace(rho: DensityOperator, subsystem: int = 1) -> DensityOperator:
    """Trace out one subsystem."""
    dims = rho.dims
    _subsystem(dims, subsystem)
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    reduced = np.trace(t, axis1=subsystem, axis2=subsystem + n)
    rest = dims[:subsystem] + dims[subsystem + 1:]
    m = int(np.prod(rest)) if rest else 1
    return DensityOperator(rest or (1,), reduced.reshape(m, m))


def eigenvalues(h) -> np.ndarray:
    """Ascending real eigenvalues of a Hermitian matrix."""
    h = as_matrix(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("expected a square matrix")
    err = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if err > HERMITIAN_TOL:
        raise ValueError(f"matrix is not Hermitian (max deviation {err:.3g})")
    return np.linalg.eigvalsh((h + h.conj().T) / 2)


# --- state families -------------------------------------------------------

_BELL = {
    0: np.array([1, 0, 0, 1]) / np.sqrt(2),   # Phi+
    1: np.array([1, 0, 0, -1]) / np.sqrt(2),  # Phi-
    2: np.array([0, 1, 1, 0]) / np.sqrt(2),   # Psi+
    3: np.array([0, 1, -1, 0]) / np.sqrt(2),  # Psi- (singlet)
}


def make_bell(which: int = 0) -> PureState:
    """Bell states ordered Phi+, Phi-, Psi+, Psi-."""
    if which not in _BELL:
        raise ValueError(f"Bell index must be 0..3, got {which}")
    return PureState((2, 2), _BELL[which])


def make_max_entangled(d: int) -> PureState:
    """``sum_i |ii> / sqrt(d)``."""
    if d < 1:
        raise ValueError("d must be positive")
    v = np.zeros(d * d, dtype=complex)
    v[:: d + 1] = 1 / np.sqrt(d)
    return PureState((d, d), v)


def maximally_mixed(dims: Sequence[int]) -> DensityOperator:
    m = int(np.prod(dims))
    return DensityOperator(tuple(dims), np.eye(m) / m)


def make_werner(q: float) -> DensityOperator:
    """Two-qubit Werner state ``q |Psi-><Psi-| + (1 - q) I/4``."""
    if not 0 <= q <= 1:
        raise ValueError(f"Werner weight q must lie in [0, 1], got {q}")
    singlet = make_bell(3).to_density().matrix
    return DensityOperator((2, 2), q * singlet + (1 - q) * np.eye(4) / 4)


def make_isotropic(f: float, d: int) -> DensityOperator:
    """Isotropic state of singlet fraction ``f``.

    ``f |Phi><Phi| + (1 - f) (I - |Phi><Phi|) / (d^2 - 1)`` with ``|Phi>`` the
    maximally entangled state; entangled iff ``f > 1/d``.
    """
    if not 0 <= f <= 1:
        raise ValueError(f"singlet fraction f must lie in [0, 1], got {f}")
    if d < 2:
        raise ValueError("isotropic states need d >= 2")
    phi = make_max_entangled(d).to_density().matrix
    rest = (np.eye(d * d) - phi) / (d * d - 1)
    return DensityOperator((d, d), f * phi + (1 - f) * rest)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _ginibre(rng, rows, cols):
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def random_density(m: int, rank: int | None = None, seed=None,
                   dims: Sequence[int] | None = None) -> DensityOperator:
    """Random state ``G G^dag / Tr(G G^dag)`` from an ``m x rank`` Ginibre matrix."""
    rank = m if rank is None else rank
    if not 1 <= rank <= m:
        raise ValueError(f"rank must lie in [1, {m}], got {rank}")
    g = _ginibre(_rng(seed), m, rank)
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return DensityOperator(tuple(dims) if dims is not None else (m,), (rho + rho.conj().T) / 2)


def random_pure(m: int, seed=None) -> np.ndarray:
    v = _ginibre(_rng(seed), m, 1)[:, 0]
    return v / np.linalg.norm(v)


def random_separable(d: int, terms: int = 10, seed=None) -> DensityOperator:
    """Convex mixture of ``terms`` random product pure states on ``d x d``."""
    if d < 1 or terms < 1:
        raise ValueError("d and terms must be positive")
    rng = _rng(seed)
    weights = rng.dirichlet(np.ones(terms))
    rho = np.zeros((d * d, d * d), dtype=complex)
    for w in weights:
        psi = np.kron(random_pure(d, rng), random_pure(d, rng))
        rho += w * np.outer(psi, psi.conj())
    rho /= np.trace(rho).real
    return DensityOperator((d, d), (rho + rho.conj().T) / 2)


# --- state files ----------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps_matrix(matrix) -> str:
    rows = []
    for row in np.asarray(matrix):
        rows.append("[" + ", ".join(f"[{_fmt(z.real)}, {_fmt(z.imag)}]" for z in row) + "]")
    return "[\n    " + ",\n    ".join(rows) + "\n  ]"


def loads_matrix(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError("matrix must be a nested list of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def state_to_json(rho: DensityOperator) -> str:
    return '{\n  "dims": %s,\n  "matrix": %s\n}\n' % (json.dumps(list(rho.dims)), dumps_matrix(rho.matrix))


def state_from_json(text: str) -> DensityOperator:
    obj = json.loads(text)
    try:
        dims, matrix = obj["dims"], obj["matrix"]
    except (KeyError, TypeError) as exc:
        raise ValueError("state file needs 'dims' and 'matrix'") from exc
    return DensityOperator(tuple(dims), loads_matrix(matrix))


def save_state(rho: DensityOperator, path) -> None:
    Path(path).write_text(state_to_json(rho))


def load_state(path) -> DensityOperator:
    return state_from_json(Path(path).read_text())

