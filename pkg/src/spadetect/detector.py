"""End-to-end detection: SPA transform, power-sum measurement, spectrum inversion, verdict.

Also hosts the exact partial-transpose oracle and the two-qubit
entanglement-of-formation bounds derived from the smallest SPA eigenvalue.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import DEFAULT_DENSE_CAP
from .interfero import CopyBudget, exact_power_sums, power_trace, rng_stream
from .posmap import (PositiveMapSpec, SpaMap, build_spa, builtin_map, postselect_normalize,
                     spa_output)
from .qstate import DensityOperator, eigenvalues, partial_transpose
from .spectrum import (ROUNDING_TOL, SpectrumEstimate, highprec_dps, newton_spectrum,
                       newton_spectrum_highprec, rounding_error)

EXACT_DECISION_TOL = 1e-9
# Adjacent float64 roots closer than this are treated as a split cluster.
CLUSTER_GAP = 1e-4
PPT_TOL = 1e-9
MIN_SAMPLED_SHOTS = 100

# Tests that decide separability on their own for two qubits.  The qubit
# reduction map is a unitary conjugate of transposition.
_SHARP_QUBIT_TESTS = ("transpose", "reduction")


class Verdict(str, Enum):
    ENTANGLED = "ENTANGLED"
    NOT_DETECTED = "NOT_DETECTED"
    SEPARABLE = "SEPARABLE"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class EofBounds:
    lambda_prime: float
    lower: float
    upper: float

    def to_dict(self):
        return {"lambda_prime": self.lambda_prime, "lower": self.lower, "upper": self.upper}


@dataclass(frozen=True)
class DetectionReport:
    verdict: Verdict
    lambda_min_estimate: float
    lambda_min_std_error: float
    threshold: float
    margin: float
    rescale_factor: float
    mode: str
    shots_per_power_sum: int | None
    copies_consumed: int
    test_name: str
    seed: int | None = None
    timestamp: str = ""
    eof: EofBounds | None = field(default=None, compare=False)
    spectrum: SpectrumEstimate | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        """Flat JSON-ready record; EoF bounds and the spectrum are not part of it."""
        return {
            "verdict": self.verdict.value,
            "lambda_min_estimate": self.lambda_min_estimate,
            "lambda_min_std_error": self.lambda_min_std_error,
            "threshold": self.threshold,
            "margin": self.margin,
            "rescale_factor": self.rescale_factor,
            "mode": self.mode,
            "shots_per_power_sum": self.shots_per_power_sum,
            "copies_consumed": self.copies_consumed,
            "test_name": self.test_name,
            "seed": self.seed,
            "timestamp": self.timestamp,
        }


@lru_cache(maxsize=32)
def _builtin_spa(name, d):
    return build_spa(builtin_map(name, d))


def resolve_spa(test, d: int) -> SpaMap:
    if isinstance(test, SpaMap):
        return test
    if isinstance(test, PositiveMapSpec):
        return build_spa(test)
    return _builtin_spa(str(test), d)


def is_sharp(spa: SpaMap) -> bool:
    return spa.d == 2 and spa.base.builtin and spa.name in _SHARP_QUBIT_TESTS


def ppt_oracle(rho: DensityOperator) -> tuple[bool, float]:
    """Exact PPT check: ``(min eig of rho^{T_B} >= -1e-9, that eigenvalue)``."""
    if len(rho.dims) != 2:
        raise ValueError("PPT oracle needs a bipartite state")
    lo = float(eigenvalues(partial_transpose(rho, 1))[0])
    return lo >= -PPT_TOL, lo


def lambda_prime_from_spa(lambda_min: float, d: int = 2) -> float:
    """Negativity of ``rho^{T_B}`` recovered from the smallest qubit-SPA eigenvalue.

    Inverts ``lambda_min = 2/9 + (1/9) * min eig(rho^{T_B})`` and clamps to
    ``[0, 1/2]``.
    """
    if d != 2:
        raise ValueError("lambda' is defined for the two-qubit transposition test only")
    return min(0.5, max(0.0, -(9 * lambda_min - 2)))


def binary_entropy(x: float) -> float:
    if x <= 0 or x >= 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def _eof_from_concurrence(c):
    return binary_entropy((1 + math.sqrt(max(0.0, 1 - c * c))) / 2)


def eof_bounds(lambda_prime: float) -> EofBounds:
    """Lower and upper entanglement-of-formation bounds, in bits.

    Both come from concurrence bounds inserted into
    ``E = H((1 + sqrt(1 - C^2)) / 2)``: ``C_lo = 2 l'`` and
    ``C_up = 2 (sqrt(2 l'^2 + l') - l')``.
    """
    if not -1e-12 <= lambda_prime <= 0.5 + 1e-12:
        raise ValueError(f"lambda' must lie in [0, 1/2], got {lambda_prime}")
    lp = min(0.5, max(0.0, lambda_prime))
    c_lo = 2 * lp
    c_up = min(1.0, max(c_lo, 2 * (math.sqrt(2 * lp * lp + lp) - lp)))
    return EofBounds(lp, _eof_from_concurrence(c_lo), _eof_from_concurrence(c_up))


def _pick_backend(backend, m, k, cap):
    if backend != "auto":
        return backend
    return "circuit" if m ** k <= cap else "analytic"


def exact_spectrum(rho_p, m: int) -> SpectrumEstimate:
    """Noiseless reconstruction from ``Tr rho'^k``, k = 1 .. m.

    Float64 first; clustered SPA spectra make that lose digits, so unresolved
    or poorly conditioned cases are redone in extended precision.
    """
    sums = [power_trace(rho_p, k, backend="exact")[0] for k in range(1, m + 1)]
    est = newton_spectrum(sums, m)
    clustered = m > 1 and np.min(np.diff(est.eigenvalues)) < CLUSTER_GAP
    if clustered or est.degenerate or not est.consistent or rounding_error(est) > ROUNDING_TOL:
        dps = highprec_dps(m)
        est = newton_spectrum_highprec(exact_power_sums(rho_p, m, dps), dps)
    return est


def detect(rho: DensityOperator, test="transpose", mode: str = "exact",
           shots: int | None = None, decision_sigma: float = 3.0, seed: int | None = 0,
           backend: str = "auto", cap: int | None = None,
           budget: CopyBudget | None = None, stream: tuple[int, ...] = ()) -> DetectionReport:
    """Run the detection pipeline on ``rho`` with one positive-map test.

    ``test`` is a built-in map name, a :class:`PositiveMapSpec` or a prebuilt
    :class:`SpaMap`.  In ``exact`` mode the power traces are computed without
    noise; in ``sampled`` mode each ``Tr rho'^k`` is estimated from ``shots``
    interferometer runs, drawn from RNG stream ``(seed, *stream, k)``.
    """
    if mode not in ("exact", "sampled"):
        raise ValueError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    if len(rho.dims) != 2 or rho.dims[0] != rho.dims[1]:
        raise ValueError(f"detection needs a d x d state, got dims {list(rho.dims)}")
    d = rho.dims[0]
    cap = DEFAULT_DENSE_CAP if cap is None else cap
    spa = resolve_spa(test, d)
    if spa.d != d:
        raise ValueError(f"test acts on d={spa.d}, state has d={d}")
    if mode == "sampled":
        if shots is None or shots < MIN_SAMPLED_SHOTS:
            raise ValueError(f"sampled mode needs shots >= {MIN_SAMPLED_SHOTS}")
    else:
        shots = None

    rho_p, rescale = postselect_normalize(spa_output(spa, rho))
    if spa.trace_preserving:
        rescale = 1.0

    budget = CopyBudget() if budget is None else budget
    m = d * d
    if mode == "exact":
        est = exact_spectrum(rho_p, m)
    else:
        sums, errs = [1.0], [0.0]
        for k in range(2, m + 1):
            val, err = power_trace(rho_p, k, shots=shots, backend=_pick_backend(backend, m, k, cap),
                                   rng_seed=rng_stream(seed, *stream, k), cap=cap, budget=budget)
            sums.append(val)
            errs.append(err)
        est = newton_spectrum(sums, m, errors=errs)
    lam = est.lambda_min * rescale
    se = est.lambda_min_std_error * rescale
    thr = spa.threshold
    sharp = is_sharp(spa)
    clear = Verdict.SEPARABLE if sharp else Verdict.NOT_DETECTED

    if mode == "exact":
        verdict = Verdict.ENTANGLED if lam < thr - EXACT_DECISION_TOL else clear
        margin = thr - lam
    else:
        if lam < thr - decision_sigma * se:
            verdict = Verdict.ENTANGLED
        elif lam > thr + decision_sigma * se:
            verdict = clear
        else:
            verdict = Verdict.INCONCLUSIVE
        margin = (thr - lam) / se if se > 0 else math.copysign(math.inf, thr - lam)

    eof = None
    if d == 2 and spa.base.builtin and spa.name == "transpose":
        eof = eof_bounds(lambda_prime_from_spa(lam))

    return DetectionReport(
        verdict=verdict,
        lambda_min_estimate=float(lam),
        lambda_min_std_error=float(se),
        threshold=float(thr),
        margin=float(margin),
        rescale_factor=float(rescale),
        mode=mode,
        shots_per_power_sum=shots,
        copies_consumed=budget.total,
        test_name=spa.name,
        seed=seed,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        eof=eof,
        spectrum=est,
    )


def exact_lambda_min(rho: DensityOperator, test="transpose") -> float:
    """Smallest eigenvalue of the (rescaled) SPA output by direct diagonalization."""
    spa = resolve_spa(test, rho.dims[0])
    return float(np.linalg.eigvalsh(spa_output(spa, rho))[0])

