"""Positive maps, their structural physical approximations, and the qubit Pauli-channel realization.

Choi convention (unnormalized)::

    J(L) = sum_ij |i><j| (x) L(|i><j|)

so ``J.reshape(d, d, d, d)[i, a, j, b] == L(|i><j|)[a, b]``.  The structural
physical approximation (SPA) of ``I (x) L`` is

    rho -> p Tr(rho) I/d^2 + (1 - p) [I (x) L](rho),

with ``p`` the smallest weight making it completely positive.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import check_capacity
from .qstate import DensityOperator, dumps_matrix, loads_matrix

CHOI_HERMITIAN_TOL = 1e-10
TP_TOL = 1e-10
SPA_PSD_TOL = 1e-9
# Induced negativity below this is eigensolver noise on a completely positive map.
NEGATIVITY_FLOOR = 1e-12

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _frozen(a):
    a = np.array(a, dtype=complex, copy=True)
    a.flags.writeable = False
    return a


def _ptrace_output(choi, d):
    """``Tr_out J``; entry ``[i, j]`` equals ``Tr L(|i><j|)``."""
    return np.einsum("iaja->ij", choi.reshape(d, d, d, d))


@dataclass(frozen=True, eq=False)
class PositiveMapSpec:
    """A linear map on ``M_d`` held by its Choi matrix.

    ``trace_preserving`` is computed, not supplied.  ``builtin`` marks the maps
    whose positivity is known analytically; user maps rely on
    ``declared_positive``.
    """

    d: int
    choi: np.ndarray
    declared_positive: bool = False
    name: str = "custom"
    builtin: bool = False
    trace_preserving: bool = field(init=False)

    def __post_init__(self):
        d = int(self.d)
        choi = _frozen(self.choi)
        if choi.shape != (d * d, d * d):
            raise ValueError(f"Choi matrix for d={d} must be {d * d}x{d * d}, got {choi.shape}")
        err = np.max(np.abs(choi - choi.conj().T))
        if err > CHOI_HERMITIAN_TOL:
            raise ValueError(f"Choi matrix is not Hermitian (max deviation {err:.3g}); "
                             "map does not preserve Hermiticity")
        tp = np.max(np.abs(_ptrace_output(choi, d) - np.eye(d))) <= TP_TOL
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "choi", choi)
        object.__setattr__(self, "trace_preserving", bool(tp))

    @property
    def is_positive(self) -> bool:
        return self.builtin or self.declared_positive

    def __call__(self, x) -> np.ndarray:
        """Apply the map to a ``d x d`` matrix."""
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.d, self.d):
            raise ValueError(f"expected a {self.d}x{self.d} matrix, got {x.shape}")
        return np.einsum("ij,iajb->ab", x, self.choi.reshape((self.d,) * 4))

    def __repr__(self):
        return f"PositiveMapSpec({self.name!r}, d={self.d})"


def max_trace(choi, d) -> float:
    """``max_rho Tr L(rho)``, the top eigenvalue of ``Tr_out J``."""
    t = _ptrace_output(np.asarray(choi), d)
    return float(np.linalg.eigvalsh((t + t.conj().T) / 2)[-1])


def custom_map(choi, d: int, declared_positive: bool, name: str = "custom",
               normalize: bool = True) -> PositiveMapSpec:
    """User-supplied map, rescaled so that ``max_rho Tr L(rho) = 1``.

    Positivity is not certified; it is the caller's assertion.
    """
    choi = np.asarray(choi, dtype=complex)
    if normalize:
        scale = max_trace(choi, d)
        if scale <= 0:
            raise ValueError("map annihilates the trace of every state; cannot normalize")
        choi = choi / scale
    return PositiveMapSpec(d, choi, declared_positive=declared_positive, name=name)


def kraus_to_choi(kraus, weights=None) -> np.ndarray:
    """Choi matrix of ``X -> sum_k w_k K_k X K_k^dag``."""
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    weights = np.ones(len(kraus)) if weights is None else weights
    d = kraus[0].shape[1]
    choi = np.zeros((d * d, d * d), dtype=complex)
    for w, k in zip(weights, kraus):
        v = k.T.reshape(-1)
        choi += w * np.outer(v, v.conj())
    return choi


# --- built-in maps --------------------------------------------------------

def transposition(d: int) -> PositiveMapSpec:
    # J(T) is the swap operator on C^d (x) C^d.
    idx = np.arange(d * d)
    swap = np.zeros((d * d, d * d))
    swap[(idx % d) * d + idx // d, idx] = 1
    return PositiveMapSpec(d, swap, name="transpose", builtin=True)


def identity_map(d: int) -> PositiveMapSpec:
    v = np.eye(d).reshape(-1)
    return PositiveMapSpec(d, np.outer(v, v), name="identity", builtin=True)


def depolarizing(d: int) -> PositiveMapSpec:
    """Completely depolarizing channel ``X -> Tr(X) I/d``."""
    return PositiveMapSpec(d, np.eye(d * d) / d, name="depolarizing", builtin=True)


def reduction(d: int) -> PositiveMapSpec:
    """Reduction map ``X -> (Tr(X) I - X) / (d - 1)``; positive, not completely positive."""
    if d < 2:
        raise ValueError("reduction map needs d >= 2")
    v = np.eye(d).reshape(-1)
    return PositiveMapSpec(d, (np.eye(d * d) - np.outer(v, v)) / (d - 1),
                           name="reduction", builtin=True)


def lambda1_map() -> PositiveMapSpec:
    return PositiveMapSpec(2, kraus_to_choi([SIGMA_X, SIGMA_Y, SIGMA_Z], [1 / 3] * 3),
                           name="lambda1", builtin=True)


def lambda2_map() -> PositiveMapSpec:
    return PositiveMapSpec(2, kraus_to_choi([SIGMA_0, SIGMA_X, SIGMA_Y, SIGMA_Z], [1 / 4] * 4),
                           name="lambda2", builtin=True)


BUILTIN_MAPS = {
    "transpose": transposition,
    "identity": identity_map,
    "depolarizing": depolarizing,
    "reduction": reduction,
    "lambda1": lambda d=2: _qubit_only(lambda1_map, d),
    "lambda2": lambda d=2: _qubit_only(lambda2_map, d),
}


def _qubit_only(factory, d):
    if d != 2:
        raise ValueError("the Pauli channels are defined for d = 2 only")
    return factory()


def builtin_map(name: str, d: int) -> PositiveMapSpec:
    try:
        factory = BUILTIN_MAPS[name]
    except KeyError:
        raise ValueError(f"unknown map {name!r}; choose from {sorted(BUILTIN_MAPS)}") from None
    return factory(d)


# --- applying maps --------------------------------------------------------

def _apply_on_last(matrix, rest, lam: PositiveMapSpec):
    d = lam.d
    t = np.asarray(matrix, dtype=complex).reshape(rest, d, rest, d)
    out = np.einsum("piqj,iajb->paqb", t, lam.choi.reshape(d, d, d, d))
    return out.reshape(rest * d, rest * d)


def _bipartite_matrix(rho, d):
    if isinstance(rho, DensityOperator):
        if rho.dims != (d, d):
            raise ValueError(f"state dims {list(rho.dims)} do not match map dimension [{d}, {d}]")
        return rho.matrix
    mat = np.asarray(rho, dtype=complex)
    if mat.shape != (d * d, d * d):
        raise ValueError(f"expected a {d * d}x{d * d} matrix, got {mat.shape}")
    return mat


def apply_induced(lam: PositiveMapSpec, rho) -> np.ndarray:
    """``[I (x) L](rho)``: the map acts on the second factor of a ``d x d`` state."""
    return _apply_on_last(_bipartite_matrix(rho, lam.d), lam.d, lam)


def most_negative_induced_eigenvalue(lam: PositiveMapSpec, method: str = "dense",
                                     cap: int | None = None) -> float:
    """Magnitude of the most negative eigenvalue induced on a maximally entangled state.

    The extended map ``(I (x) I) (x) (I (x) L)`` acts on ``|Phi>`` over
    ``C^{d^2} (x) C^{d^2}``, each half composed of two ``d``-dimensional parts.
    ``method="dense"`` diagonalizes the ``d^4 x d^4`` output;
    ``method="factorized"`` uses ``|Phi_{d^2}> = |Phi_d>|Phi_d>`` (up to a
    reordering of factors), which reduces the spectrum to that of ``J(L)/d``.
    """
    d = lam.d
    if method == "dense":
        m = d ** 4
        check_capacity("induced-eigenvalue operator", m, cap)
        phi = np.zeros(m, dtype=complex)
        phi[:: d * d + 1] = 1 / d
        out = _apply_on_last(np.outer(phi, phi.conj()), d ** 3, lam)
        lo = np.linalg.eigvalsh((out + out.conj().T) / 2)[0]
    elif method == "factorized":
        lo = np.linalg.eigvalsh(lam.choi / d)[0]
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(-lo) if -lo > NEGATIVITY_FLOOR else 0.0


# --- structural physical approximation ------------------------------------

@dataclass(frozen=True, eq=False)
class SpaMap:
    """Completely positive approximation of ``I (x) L``.

    Attributes mirror the construction: ``lambda_neg`` is the induced negativity
    of ``L``, ``p_star = d^4 l / (d^4 l + 1)`` the depolarizing weight, and
    ``threshold = d^2 l / (d^4 l + 1)`` the smallest eigenvalue any separable
    input can produce.
    """

    base: PositiveMapSpec
    d: int
    lambda_neg: float
    p_star: float
    threshold: float
    choi_full: np.ndarray

    @property
    def identity_coefficient(self) -> float:
        """Weight of ``I (x) I`` in the output."""
        return self.p_star / self.d ** 2

    @property
    def map_coefficient(self) -> float:
        return 1.0 - self.p_star

    @property
    def trace_preserving(self) -> bool:
        return self.base.trace_preserving

    @property
    def name(self) -> str:
        return self.base.name


def _choi_of_extended(lam: PositiveMapSpec) -> np.ndarray:
    """Choi matrix of ``I_d (x) L`` viewed as a map on ``M_{d^2}``."""
    d = lam.d
    j = lam.choi.reshape(d, d, d, d)
    eye = np.eye(d)
    # [(i1 i2), (a1 a2), (j1 j2), (b1 b2)] = delta(i1 a1) delta(j1 b1) J[i2 a2 j2 b2]
    full = np.einsum("xu,yv,iajb->xiuayjvb", eye, eye, j)
    return full.reshape(d ** 4, d ** 4)


def build_spa(lam: PositiveMapSpec, method: str = "dense", cap: int | None = None) -> SpaMap:
    if not lam.is_positive:
        raise ValueError(f"map {lam.name!r} is neither built-in nor declared positive")
    d = lam.d
    lam_neg = most_negative_induced_eigenvalue(lam, method=method, cap=cap)
    scaled = d ** 4 * lam_neg
    p_star = scaled / (scaled + 1)
    threshold = d ** 2 * lam_neg / (scaled + 1)
    check_capacity("SPA Choi matrix", d ** 4, cap)
    choi_full = p_star / d ** 2 * np.eye(d ** 4) + (1 - p_star) * _choi_of_extended(lam)
    lo = np.linalg.eigvalsh(choi_full)[0]
    if lo < -SPA_PSD_TOL:
        raise ValueError(f"SPA of {lam.name!r} is not completely positive (Choi min eigenvalue "
                         f"{lo:.3g}); the map is not positive or its negativity was underestimated")
    return SpaMap(lam, d, lam_neg, p_star, threshold, _frozen(choi_full))


def spa_output(spa: SpaMap, rho) -> np.ndarray:
    """Unnormalized SPA output; its trace is the postselection success probability."""
    mat = _bipartite_matrix(rho, spa.d)
    m = spa.d ** 2
    return (spa.p_star * np.trace(mat) * np.eye(m) / m
            + (1 - spa.p_star) * apply_induced(spa.base, mat))


def apply_spa(spa: SpaMap, rho: DensityOperator) -> DensityOperator:
    """The transformed state for a trace-preserving test map.

    Non-trace-preserving tests need postselection; use
    ``postselect_normalize(spa_output(spa, rho))`` for them.
    """
    if not spa.trace_preserving:
        raise ValueError(f"SPA of {spa.name!r} is not trace preserving; "
                         "use spa_output with postselect_normalize")
    out = spa_output(spa, rho)
    return DensityOperator((spa.d, spa.d), (out + out.conj().T) / 2)


def apply_choi(choi, x, d_in: int) -> np.ndarray:
    """Apply a map on ``M_{d_in}`` given only by its Choi matrix."""
    d_out = choi.shape[0] // d_in
    j = np.asarray(choi).reshape(d_in, d_out, d_in, d_out)
    return np.einsum("ij,iajb->ab", np.asarray(x), j)


def postselect_normalize(sigma) -> tuple[DensityOperator, float]:
    """Normalize a PSD operator produced by a trace-decreasing map.

    Returns the normalized state and the discarded trace, which is the factor
    the measured smallest eigenvalue must be multiplied by before comparing it
    with the SPA threshold.
    """
    if isinstance(sigma, DensityOperator):
        return sigma, 1.0
    sigma = np.asarray(sigma, dtype=complex)
    tr = float(np.trace(sigma).real)
    if tr <= 1e-12:
        raise ValueError(f"cannot normalize an operator of trace {tr:.3g}")
    m = sigma.shape[0]
    d = int(round(np.sqrt(m)))
    dims = (d, d) if d * d == m else (m,)
    return DensityOperator(dims, (sigma + sigma.conj().T) / (2 * tr)), tr


# --- qubit Pauli-channel realization --------------------------------------

def _check_qubit(x):
    x = np.asarray(x, dtype=complex)
    if x.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got {x.shape}")
    return x


def pauli_channel_lambda1(rho_b) -> np.ndarray:
    """``(1/3) sum_{x,y,z} s_i rho s_i``."""
    x = _check_qubit(rho_b)
    return sum(s @ x @ s for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)) / 3


def pauli_channel_lambda2(rho_b) -> np.ndarray:
    x = _check_qubit(rho_b)
    return sum(s @ x @ s for s in (SIGMA_0, SIGMA_X, SIGMA_Y, SIGMA_Z)) / 4


# Weights of (lambda1 (x) lambda2, I (x) conj_{XZ} . lambda1).  Solving the
# Pauli-basis coefficients against the qubit SPA of partial transposition
# gives (2/3, 1/3); the reverse assignment misses it by up to 1/18 per entry.
PAULI_DECOMPOSITION_WEIGHTS = (2 / 3, 1 / 3)


def _local_pauli_mixture(rho, left, right):
    """``sum_{a,b} wa wb (A (x) B) rho (A (x) B)^dag`` over weighted unitaries."""
    out = np.zeros((4, 4), dtype=complex)
    for a, wa in left:
        for b, wb in right:
            k = np.kron(a, b)
            out += wa * wb * (k @ rho @ k.conj().T)
    return out


def apply_spa_pauli_decomposition(rho: DensityOperator,
                                  weights=PAULI_DECOMPOSITION_WEIGHTS) -> DensityOperator:
    """Qubit SPA of partial transposition as a mixture of local Pauli unitaries.

    Each branch applies a product of Pauli operators with a fixed probability,
    so the map is trace preserving and needs no postselection.
    """
    if not isinstance(rho, DensityOperator) or rho.dims != (2, 2):
        raise ValueError("the Pauli decomposition acts on two-qubit states only")
    w_prod, w_local = weights
    xz = SIGMA_X @ SIGMA_Z
    lam1 = [(s, 1 / 3) for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)]
    lam2 = [(s, 1 / 4) for s in (SIGMA_0, SIGMA_X, SIGMA_Y, SIGMA_Z)]
    flipped = [(xz @ s, 1 / 3) for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)]
    out = (w_prod * _local_pauli_mixture(rho.matrix, lam1, lam2)
           + w_local * _local_pauli_mixture(rho.matrix, [(SIGMA_0, 1.0)], flipped))
    return DensityOperator((2, 2), (out + out.conj().T) / 2)


# --- map files ------------------------------------------------------------

def map_to_json(lam: PositiveMapSpec) -> str:
    return ('{\n  "d": %d,\n  "declared_positive": %s,\n  "choi": %s\n}\n'
            % (lam.d, json.dumps(bool(lam.is_positive)), dumps_matrix(lam.choi)))


def map_from_json(text: str, name: str = "custom") -> PositiveMapSpec:
    obj = json.loads(text)
    try:
        d, choi = int(obj["d"]), loads_matrix(obj["choi"])
    except (KeyError, TypeError) as exc:
        raise ValueError("map file needs 'd' and 'choi'") from exc
    return custom_map(choi, d, declared_positive=bool(obj.get("declared_positive", False)), name=name)


def load_map(path) -> PositiveMapSpec:
    path = Path(path)
    return map_from_json(path.read_text(), name=path.stem)


def save_map(lam: PositiveMapSpec, path) -> None:
    Path(path).write_text(map_to_json(lam))
