"""Spectrum reconstruction from power sums via Newton's identities."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .errors import DegenerateRootWarning

FD_STEP = 1e-6
IMAG_TOL_SCALE = 1e-6
# Propagated float64 rounding error on lambda_min above which exact
# reconstructions switch to extended precision.
ROUNDING_TOL = 1e-12


def _newton_identities(p, one):
    """``k e_k = sum_i (-1)^(i-1) e_(k-i) p_i``; works for floats and mpmath numbers."""
    e = [one]
    for k in range(1, len(p) + 1):
        e.append(sum((-1) ** (i - 1) * e[k - i] * p[i - 1] for i in range(1, k + 1)) / k)
    return e


def elementary_symmetric(power_sums) -> np.ndarray:
    """``e_0 .. e_m`` from ``p_1 .. p_m``."""
    return np.array(_newton_identities([float(x) for x in power_sums], 1.0))


def characteristic_coefficients(power_sums) -> np.ndarray:
    """Monic characteristic polynomial, highest degree first."""
    e = elementary_symmetric(power_sums)
    return e * (-1.0) ** np.arange(len(e))


def companion_roots(coeffs) -> np.ndarray:
    """Roots of a monic polynomial as the eigenvalues of its companion matrix."""
    c = np.asarray(coeffs, dtype=float)
    n = len(c) - 1
    if n == 0:
        return np.zeros(0, dtype=complex)
    comp = np.zeros((n, n))
    comp[0, :] = -c[1:] / c[0]
    comp[np.arange(1, n), np.arange(n - 1)] = 1.0
    return np.linalg.eigvals(comp).astype(complex)


def _roots(power_sums):
    r = companion_roots(characteristic_coefficients(power_sums))
    return r[np.argsort(r.real, kind="stable")]


def _min_root(power_sums):
    return float(np.min(_roots(power_sums).real))


def project_simplex(x, total=1.0) -> np.ndarray:
    """Euclidean projection onto ``{y >= 0, sum(y) = total}``."""
    x = np.asarray(x, dtype=float)
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - total
    ind = np.arange(1, len(x) + 1)
    rho = ind[u - css / ind > 0][-1]
    return np.maximum(x - css[rho - 1] / rho, 0.0)


@dataclass(frozen=True)
class SpectrumEstimate:
    m: int
    power_sums: np.ndarray
    power_sum_errors: np.ndarray
    eigenvalues_raw: np.ndarray
    eigenvalues: np.ndarray
    imag_tol: float
    lambda_min: float
    lambda_min_std_error: float
    degenerate: bool
    eigenvalues_projected: np.ndarray | None = field(default=None)

    @property
    def max_imag(self) -> float:
        return float(np.max(np.abs(self.eigenvalues_raw.imag))) if self.m else 0.0

    @property
    def consistent(self) -> bool:
        """Whether the reconstruction looks like a physical spectrum.

        False when any root keeps an imaginary part above ``imag_tol`` or falls
        outside ``[0, p_1]``; statistically inconsistent power sums are
        reported this way rather than corrected.
        """
        tol = self.imag_tol
        total = self.power_sums[0]
        return bool(self.max_imag <= tol and np.all(self.eigenvalues >= -tol)
                    and np.all(self.eigenvalues <= total + tol))

    def to_dict(self) -> dict:
        out = {
            "m": self.m,
            "power_sums": self.power_sums.tolist(),
            "power_sum_errors": self.power_sum_errors.tolist(),
            "eigenvalues_raw": [[z.real, z.imag] for z in self.eigenvalues_raw],
            "eigenvalues": self.eigenvalues.tolist(),
            "imag_tol": self.imag_tol,
            "consistent": self.consistent,
            "lambda_min": self.lambda_min,
            "lambda_min_std_error": self.lambda_min_std_error,
            "degenerate": self.degenerate,
        }
        if self.eigenvalues_projected is not None:
            out["eigenvalues_projected"] = self.eigenvalues_projected.tolist()
        return out


def lambda_min_sensitivity(power_sums, step: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of the smallest root with respect to each ``p_k``."""
    p = np.asarray(power_sums, dtype=float)
    grad = np.zeros(len(p))
    for k in range(len(p)):
        hi, lo = p.copy(), p.copy()
        hi[k] += step
        lo[k] -= step
        grad[k] = (_min_root(hi) - _min_root(lo)) / (2 * step)
    return grad


def newton_spectrum(power_sums, m: int | None = None, errors=None,
                    project_to_simplex: bool = False) -> SpectrumEstimate:
    """Reconstruct an ``m``-point spectrum from ``p_1 .. p_m``.

    Parameters
    ----------
    power_sums : sequence of float
        ``p_k = sum_i lambda_i^k`` for ``k = 1 .. m``. ``p_1`` is the trace.
    m : int, optional
        Spectrum size; defaults to ``len(power_sums)``.
    errors : sequence of float, optional
        Standard errors of the power sums, propagated to ``lambda_min`` through
        a finite-difference Jacobian.  Zero (the default) means exact inputs.
    project_to_simplex : bool
        Also report the Euclidean projection of the cleaned eigenvalues onto
        the simplex of total ``p_1``.  ``lambda_min`` is never projected.

    Noisy inputs may produce complex or negative roots; they are kept and
    flagged through ``consistent`` rather than corrected.
    """
    p = np.asarray(power_sums, dtype=float)
    m = len(p) if m is None else int(m)
    if m < 1 or len(p) != m:
        raise ValueError(f"need exactly m = {m} power sums p_1..p_m, got {len(p)}")
    sig = np.zeros(m) if errors is None else np.asarray(errors, dtype=float)
    if sig.shape != (m,):
        raise ValueError("errors must match power_sums in length")

    raw = _roots(p)
    imag_tol = IMAG_TOL_SCALE * (1 + float(np.max(np.abs(raw))))
    # imaginary residues above imag_tol survive in `raw` and flag `consistent`
    eig = np.sort(raw.real)
    lam_min = float(eig[0])

    std = 0.0
    if np.any(sig > 0):
        grad = lambda_min_sensitivity(p)
        std = float(np.sqrt(np.sum((grad * sig) ** 2)))

    degenerate = False
    if m >= 2:
        gap = abs(raw[1] - raw[0])
        unresolved = max(abs(raw[0].imag), abs(raw[1].imag)) > imag_tol
        degenerate = bool(gap <= 2 * std or unresolved)

    projected = project_simplex(eig, p[0]) if project_to_simplex else None
    return SpectrumEstimate(m, p, sig, raw, eig, imag_tol, lam_min, std, degenerate, projected)


def highprec_dps(m: int) -> int:
    """Working digits that resolve an m-fold root cluster to about 1e-15."""
    return 15 * m + 20


# Chebyshev-algorithm coefficients b_k below this (squared distance units)
# mean the remaining atoms coincide to ~1e-14.
BREAKDOWN_TOL = 1e-28


def _extend_power_sums(p, e, n):
    """``p_1 .. p_n`` from ``p_1 .. p_m`` and ``e_0 .. e_m`` via the Newton recurrence."""
    m = len(e) - 1
    out = list(p)
    for k in range(m + 1, n + 1):
        out.append(sum((-1) ** (i - 1) * e[i] * out[k - i - 1] for i in range(1, m + 1)))
    return out


def _jacobi_atoms(moments, n):
    """Jacobi matrix of the atomic measure with ``moments[l] = sum_i lambda_i^l``.

    Chebyshev's algorithm; stops early when ``b_k`` vanishes, i.e. when the
    measure has fewer than ``n`` distinct atoms.  Returns ``(a, b)`` or None if
    the moments are not those of a real atomic measure.
    """
    a = [moments[1] / moments[0]]
    b = [moments[0]]
    prev = [mpmath.mpf(0)] * len(moments)
    cur = list(moments)
    for k in range(1, n):
        nxt = [mpmath.mpf(0)] * len(moments)
        for l in range(k, 2 * n - k):
            nxt[l] = cur[l + 1] - a[k - 1] * cur[l] - b[k - 1] * prev[l]
        bk = nxt[k] / cur[k - 1]
        if bk < -BREAKDOWN_TOL:
            return None
        if bk < BREAKDOWN_TOL:
            break
        a.append(nxt[k + 1] / nxt[k] - cur[k] / cur[k - 1])
        b.append(bk)
        prev, cur = cur, nxt
    return a, b


def _to_mpf(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def _highprec_roots(p, dps):
    """Real roots with multiplicities; companion eigenvalues as a fallback."""
    m = len(p)
    with mpmath.workdps(dps):
        p = [_to_mpf(x) for x in p]
        e = _newton_identities(p, mpmath.mpf(1))
        moments = [mpmath.mpf(m)] + _extend_power_sums(p, e, 2 * m)
        jac = _jacobi_atoms(moments, m)
        if jac is not None:
            a, b = jac
            diag = np.array([float(x) for x in a])
            off = np.array([float(mpmath.sqrt(x)) for x in b[1:]])
            atoms, vecs = np.linalg.eigh(np.diag(diag) + np.diag(off, 1) + np.diag(off, -1))
            mult = np.rint(m * vecs[0] ** 2).astype(int)
            if np.all(mult >= 1) and mult.sum() == m:
                return np.repeat(atoms, mult).astype(complex)
        comp = mpmath.zeros(m, m)
        for j in range(m):
            comp[0, j] = e[j + 1] * (-1) ** j
        for i in range(1, m):
            comp[i, i - 1] = 1
        return np.array([complex(z) for z in mpmath.eig(comp, left=False, right=False)])


def newton_spectrum_highprec(power_sums, dps: int | None = None) -> SpectrumEstimate:
    """Noiseless reconstruction in ``dps``-digit arithmetic.

    ``power_sums`` should themselves carry ``dps`` digits (mpmath numbers from
    :func:`spadetect.interfero.exact_power_sums`, or ``Fraction``).  The characteristic
    polynomial is turned into the Jacobi matrix of the spectral measure, whose
    symmetric eigenproblem is well conditioned even for repeated roots;
    multiplicities come from the eigenvector weights.
    """
    m = len(power_sums)
    dps = highprec_dps(m) if dps is None else dps
    raw = _highprec_roots(power_sums, dps)
    raw = raw[np.argsort(raw.real, kind="stable")]
    pf = np.array([float(x) for x in power_sums])
    imag_tol = IMAG_TOL_SCALE * (1 + float(np.max(np.abs(raw))))
    eig = np.sort(raw.real)
    unresolved = m >= 2 and max(abs(raw[0].imag), abs(raw[1].imag)) > imag_tol
    return SpectrumEstimate(m, pf, np.zeros(m), raw, eig, imag_tol, float(eig[0]), 0.0,
                            bool(unresolved))


def rounding_error(est: SpectrumEstimate) -> float:
    """Float64 rounding of ``p_k``, propagated to ``lambda_min``."""
    p = est.power_sums
    k = np.arange(1, est.m + 1)
    grad = lambda_min_sensitivity(p)
    return float(np.sqrt(np.sum((grad * est.m * k * np.finfo(float).eps * np.abs(p)) ** 2)))


def min_eigenvalue(est: SpectrumEstimate) -> tuple[float, float]:
    """Smallest reconstructed eigenvalue and its propagated standard error.

    Warns with :class:`DegenerateRootWarning` when the two smallest roots are
    not resolved, since the linearized error is unreliable there.
    """
    if est.degenerate:
        warnings.warn(
            f"smallest eigenvalue {est.lambda_min:.6g} is not resolved from its neighbour; "
            "propagated error is unreliable", DegenerateRootWarning, stacklevel=2)
    return est.lambda_min, est.lambda_min_std_error


def power_sums_of(spectrum, m: int | None = None) -> np.ndarray:
    lam = np.asarray(spectrum, dtype=float)
    m = len(lam) if m is None else m
    return np.array([np.sum(lam ** k) for k in range(1, m + 1)])
