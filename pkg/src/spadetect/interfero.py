"""Single-ancilla interferometer and controlled-shift estimation of power traces.

The network is H on the ancilla, controlled-U on the system, a phase
``diag(1, e^{i phi})`` on the ancilla, H, then an ancilla measurement. Its
outcome-0 probability is ``(1 + Re[e^{i phi} Tr(rho U)]) / 2``.

Sampling goes through a counter-based generator (Philox) keyed by
``(seed, *stream)`` so any experiment can be replayed from its seed and
stream labels alone.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import reduce

import mpmath
import numpy as np

from .errors import check_capacity
from .qstate import DensityOperator, as_matrix

#: ``shots`` value requesting the noiseless expectation.
EXACT = None

UNITARY_TOL = 1e-10
BACKENDS = ("circuit", "analytic", "exact")

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def rng_stream(seed, *stream) -> np.random.Generator:
    """Philox generator for the stream ``(seed, *stream)``."""
    if isinstance(seed, np.random.Generator):
        return seed
    key = [int(seed if seed is not None else 0), *(int(s) for s in stream)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


class CopyBudget:
    """Thread-safe tally of consumed copies of the measured state."""

    def __init__(self):
        self._lock = threading.Lock()
        self._total = 0

    def consume(self, n: int) -> None:
        with self._lock:
            self._total += int(n)

    @property
    def total(self) -> int:
        return self._total


@dataclass(frozen=True)
class InterferenceResult:
    estimate: complex
    visibility: float
    phase: float
    shots: int | None
    std_error: float


class ShiftOperator:
    """Cyclic shift ``|x1 x2 ... xk> -> |xk x1 ... x(k-1)>`` on k copies of C^m.

    Stored as an index permutation; ``matrix`` materializes it densely.
    """

    def __init__(self, k: int, m: int, perm: np.ndarray):
        self.k = k
        self.m = m
        self.perm = perm
        self.perm.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.m ** self.k

    @property
    def matrix(self) -> np.ndarray:
        p = np.zeros((self.dim, self.dim))
        p[self.perm, np.arange(self.dim)] = 1
        return p

    def apply_left(self, x):
        """``V @ x``."""
        out = np.empty_like(x)
        out[self.perm] = x
        return out

    def apply_right_dag(self, x):
        """``x @ V^dag``."""
        out = np.empty_like(x)
        out[:, self.perm] = x
        return out

    def __repr__(self):
        return f"ShiftOperator(k={self.k}, m={self.m})"


def _digit_permutation(k, m, order):
    digits = np.array(np.unravel_index(np.arange(m ** k), (m,) * k))
    return np.ravel_multi_index(tuple(digits[list(order)]), (m,) * k)


def _adjacent_swap(k, m, t):
    order = list(range(k))
    order[t], order[t + 1] = order[t + 1], order[t]
    return _digit_permutation(k, m, order)


def build_shift(k: int, m: int, cap: int | None = None) -> ShiftOperator:
    """Controlled-shift target ``V^(k)``, checked against a cascade of k - 1 swaps."""
    if k < 2 or m < 2:
        raise ValueError(f"shift needs k >= 2 and m >= 2, got k={k}, m={m}")
    check_capacity("shift operator", m ** k, cap)
    # output digit 0 is input digit k-1, output digit t is input digit t-1
    perm = _digit_permutation(k, m, [k - 1, *range(k - 1)])
    # V = S(1,2) S(2,3) ... S(k-1,k); the rightmost swap acts first
    cascade = reduce(lambda acc, t: _adjacent_swap(k, m, t)[acc],
                     reversed(range(k - 1)), np.arange(m ** k))
    if not np.array_equal(perm, cascade):
        raise AssertionError("shift permutation disagrees with its swap cascade")
    if not np.array_equal(np.sort(perm), np.arange(m ** k)):
        raise AssertionError("shift is not a permutation")
    return ShiftOperator(k, m, perm)


def _apply_ancilla_gate(blocks, g):
    return [[sum(g[a, c] * np.conj(g[b, e]) * blocks[c][e]
                 for c in range(2) for e in range(2))
             for b in range(2)] for a in range(2)]


def _controlled(blocks, left, right_dag):
    (b00, b01), (b10, b11) = blocks
    return [[b00, right_dag(b01)], [left(b10), left(right_dag(b11))]]


def ancilla_p0(rho, left, right_dag, phi: float) -> float:
    """Outcome-0 probability of the network, simulated gate by gate.

    The joint ancilla-system state is kept as a 2 x 2 grid of system blocks,
    so controlled-U only ever touches the off-diagonal and ``|1><1|`` blocks.
    """
    rho = as_matrix(rho)
    zero = np.zeros_like(rho)
    blocks = [[rho, zero], [zero, zero]]
    blocks = _apply_ancilla_gate(blocks, _H)
    blocks = _controlled(blocks, left, right_dag)
    blocks = _apply_ancilla_gate(blocks, np.diag([1, np.exp(1j * phi)]))
    blocks = _apply_ancilla_gate(blocks, _H)
    return float(np.clip(np.trace(blocks[0][0]).real, 0.0, 1.0))


def _sample_component(p0, shots, rng):
    return 2 * rng.binomial(shots, p0) / shots - 1


def interfere(rho, u, phi: float = 0.0, shots: int | None = EXACT, rng_seed=None,
              budget: CopyBudget | None = None) -> InterferenceResult:
    """Estimate ``Tr(rho U)`` from the ancilla interference pattern.

    Two settings are measured, ``phi`` and ``phi - pi/2``, giving the real and
    imaginary parts of ``e^{i phi} Tr(rho U)``.  ``shots=EXACT`` returns the
    noiseless expectation with zero standard error.

    ``u`` may be a unitary array or a :class:`ShiftOperator`.
    """
    rho = as_matrix(rho)
    if isinstance(u, ShiftOperator):
        if u.dim != rho.shape[0]:
            raise ValueError(f"shift acts on dimension {u.dim}, state has {rho.shape[0]}")
        left, right_dag = u.apply_left, u.apply_right_dag
    else:
        u = np.asarray(u, dtype=complex)
        if u.shape != rho.shape:
            raise ValueError(f"unitary shape {u.shape} does not match state {rho.shape}")
        err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
        if err > UNITARY_TOL:
            raise ValueError(f"U is not unitary (max deviation {err:.3g})")
        left, right_dag = (lambda x: u @ x), (lambda x: x @ u.conj().T)

    p_re = ancilla_p0(rho, left, right_dag, phi)
    p_im = ancilla_p0(rho, left, right_dag, phi - np.pi / 2)
    if shots is EXACT:
        x, y, se = 2 * p_re - 1, 2 * p_im - 1, 0.0
    else:
        if shots < 1:
            raise ValueError("shots must be >= 1")
        rng = rng_stream(rng_seed)
        x = _sample_component(p_re, shots, rng)
        y = _sample_component(p_im, shots, rng)
        se = 1 / np.sqrt(shots)
        if budget is not None:
            budget.consume(2 * shots)
    est = np.exp(-1j * phi) * complex(x, y)
    return InterferenceResult(est, abs(est), float(np.angle(est)), shots, se)


def power_trace(rho, k: int, shots: int | None = EXACT, backend: str = "circuit",
                rng_seed=None, cap: int | None = None,
                budget: CopyBudget | None = None) -> tuple[float, float]:
    """Estimate ``Tr(rho^k)`` as the interference factor of ``V^(k)`` on ``rho^{(x)k}``.

    Backends:

    * ``circuit`` builds ``rho^{(x)k}`` and runs the network at ``phi = 0``;
      ``shots=EXACT`` returns its noiseless expectation.
    * ``analytic`` samples the same outcome distribution from ``Tr(rho^k)``
      computed by matrix powers, without the joint state.
    * ``exact`` returns the matrix-power trace with zero error.

    Each sampled shot consumes ``k`` copies of ``rho``.  Raises
    :class:`~spadetect.errors.CapacityError` when the circuit backend would
    exceed the dense cap; callers fall back to ``analytic``.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    rho = as_matrix(rho)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return float(np.trace(rho).real), 0.0
    if backend == "exact":
        return float(np.trace(np.linalg.matrix_power(rho, k)).real), 0.0

    if backend == "circuit":
        m = rho.shape[0]
        check_capacity(f"circuit backend for k={k}", m ** k, cap)
        shift = build_shift(k, m, cap)
        joint = reduce(np.kron, [rho] * k)
        p0 = ancilla_p0(joint, shift.apply_left, shift.apply_right_dag, 0.0)
    else:
        t = float(np.trace(np.linalg.matrix_power(rho, k)).real)
        p0 = float(np.clip((1 + t) / 2, 0.0, 1.0))

    if shots is EXACT:
        return 2 * p0 - 1, 0.0
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if budget is not None:
        budget.consume(k * shots)
    return _sample_component(p0, shots, rng_stream(rng_seed)), 1 / np.sqrt(shots)


def exact_power_sums(rho, kmax: int, dps: int) -> list:
    """``Tr rho^k`` for ``k = 1 .. kmax`` evaluated in ``dps``-digit arithmetic.

    The matrix entries are taken as exact; only the powers are extended.
    """
    rho = as_matrix(rho)
    with mpmath.workdps(dps):
        a = mpmath.matrix(rho.tolist())
        cur, out = a, []
        for k in range(1, kmax + 1):
            if k > 1:
                cur = cur * a
            out.append(mpmath.re(sum(cur[i, i] for i in range(a.rows))))
    return out


def power_traces(rho: DensityOperator, kmax: int, **kwargs):
    """``[(Tr rho^k, std_error) for k = 1 .. kmax]``; each k uses its own RNG stream."""
    seed = kwargs.pop("rng_seed", None)
    out = []
    for k in range(1, kmax + 1):
        out.append(power_trace(rho, k, rng_seed=rng_stream(seed, k) if seed is not None else None,
                               **kwargs))
    return out
