"""Weighted Bergman kernels via Gram-matrix orthonormalization.

The kernel of the space of weighted square-integrable holomorphic functions
is approximated by truncating a dense basis (monomials on simply connected
domains, Laurent monomials on annuli), assembling the weighted Gram matrix
with an exact-for-polynomials quadrature rule, and evaluating

    K(z, w) = b(w)^H G^{-1} b(z)

through the Cholesky factor of G, never an explicit inverse: one triangular
solve per point, cost O(order^2).  The module also provides the minimal-norm
extremal function of the class {f : f(t) = 1}, the reproducing-property
residual of the truncated kernel, and the kernel-derived point distance
sqrt(1 - |K(z,w)| / sqrt(K(z,z) K(w,w))).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .errors import (
    DegenerateKernelError,
    IllConditionedGramError,
    NumericError,
    ParameterError,
)
from .geometry import Annulus, Domain, QuadratureRule, integrate
from .weights import Weight

__all__ = [
    "MonomialBasis",
    "LaurentBasis",
    "KernelApproximation",
    "ExtremalFunction",
    "gram_matrix",
    "kernel_from_gram",
    "extremal_function",
    "reproducing_residual",
    "skwarczynski_distance",
]

# Gram matrices whose smallest eigenvalue falls below this multiple of the
# largest are trimmed to a smaller basis before factorization.
CONDITION_FLOOR = 1e-12


@dataclass(frozen=True)
class MonomialBasis:
    """Monomials (z - center)^n, n = 0..maxdeg, on a simply connected domain."""

    domain: Domain
    maxdeg: int

    def __post_init__(self):
        if isinstance(self.domain, Annulus):
            raise ParameterError("monomials span nothing dense on an annulus; use LaurentBasis")
        if self.maxdeg < 0:
            raise ParameterError("maxdeg must be >= 0")

    @property
    def exponents(self):
        return tuple(range(self.maxdeg + 1))

    @property
    def size(self):
        return self.maxdeg + 1

    @property
    def center(self):
        return self.domain.basis_center

    def evaluate(self, zs) -> np.ndarray:
        """Basis value matrix, one row per point, columns ordered by degree."""
        zeta = np.atleast_1d(np.asarray(zs, dtype=complex)) - self.center
        out = np.empty((zeta.size, self.size), dtype=complex)
        out[:, 0] = 1.0
        for k in range(1, self.size):
            out[:, k] = out[:, k - 1] * zeta
        return out

    def label(self):
        return f"monomials(maxdeg={self.maxdeg})"


@dataclass(frozen=True)
class LaurentBasis:
    """Laurent monomials z^n, minexp <= n <= maxexp, on an origin-centered annulus.

    Columns are ordered by |n| (0, 1, -1, 2, -2, ...) so trimming the tail
    removes the most extreme exponents first.
    """

    domain: Annulus
    minexp: int
    maxexp: int

    def __post_init__(self):
        if not isinstance(self.domain, Annulus):
            raise ParameterError("Laurent bases are only defined on annuli")
        if self.minexp > 0 or self.maxexp < 0:
            raise ParameterError("Laurent range must satisfy minexp <= 0 <= maxexp")

    @property
    def exponents(self):
        exps = sorted(range(self.minexp, self.maxexp + 1), key=lambda n: (abs(n), n < 0))
        return tuple(exps)

    @property
    def size(self):
        return self.maxexp - self.minexp + 1

    @property
    def center(self):
        return 0j

    def evaluate(self, zs) -> np.ndarray:
        z = np.atleast_1d(np.asarray(zs, dtype=complex))
        exps = np.array(self.exponents)
        return z[:, None] ** exps[None, :]

    def label(self):
        return f"laurent({self.minexp}..{self.maxexp})"


def gram_matrix(basis, weight: Weight, rule: QuadratureRule) -> np.ndarray:
    """Hermitian Gram matrix of the basis in the rho-weighted inner product.

    Entry (m, n) is the integral of e_m conj(e_n) rho over the domain.  Only
    the upper triangle is computed (fsum-reduced in fixed node order); the
    lower triangle is its conjugate mirror, so the result is Hermitian by
    construction.
    """
    if rule.domain != basis.domain:
        raise ParameterError("quadrature rule and basis live on different domains")
    if weight.domain != basis.domain:
        raise ParameterError("weight and basis live on different domains")
    B = basis.evaluate(rule.nodes)
    wr = rule.weights * np.real(np.asarray(weight.value(rule.nodes), dtype=complex))
    n = basis.size
    G = np.empty((n, n), dtype=complex)
    for m in range(n):
        col_m = wr * B[:, m]
        for k in range(m, n):
            terms = col_m * np.conj(B[:, k])
            G[m, k] = complex(math.fsum(terms.real), math.fsum(terms.imag))
            if k != m:
                G[k, m] = np.conj(G[m, k])
    return G


@dataclass(frozen=True, eq=False)
class KernelApproximation:
    """Truncated reproducing kernel backed by a Cholesky-factored Gram matrix.

    ``factor`` is the lower-triangular L with G = L L^H restricted to the
    ``order`` leading basis elements that survived conditioning; the spectrum
    bounds of the retained Gram block are recorded for the report.
    """

    basis: object
    weight: Weight
    rule: QuadratureRule
    factor: np.ndarray
    order: int
    requested_order: int
    eig_min: float
    eig_max: float

    @property
    def exponents(self):
        return self.basis.exponents[: self.order]

    def basis_values(self, zs) -> np.ndarray:
        return self.basis.evaluate(zs)[:, : self.order]

    def _coords(self, zs) -> np.ndarray:
        b = self.basis_values(zs)
        return solve_triangular(self.factor, b.T, lower=True)

    def evaluate(self, z: complex, w: complex) -> complex:
        """K(z, w); Hermitian in its arguments by construction."""
        yz = self._coords([z])[:, 0]
        yw = self._coords([w])[:, 0]
        return complex(np.vdot(yw, yz))

    def evaluate_points(self, zs, w: complex) -> np.ndarray:
        """Vector of K(z_k, w) for many first arguments."""
        Y = self._coords(zs)
        yw = self._coords([w])[:, 0]
        return np.conj(yw) @ Y

    def diagonal(self, z: complex) -> float:
        y = self._coords([z])[:, 0]
        return float(np.real(np.vdot(y, y)))

    def truncation_tail_estimate(self, margin: float = 0.7):
        """Geometric tail bound for the unweighted disk series at |z| = margin * r.

        The centered-disk kernel expands as sum (n+1) (z conj(w))^n / (pi r^(2n+2)),
        so the omitted tail beyond degree N is bounded by
        t^(N+1) ((N+2) - (N+1) t) / (pi r^2 (1 - t)^2) with t = margin^2.
        Only meaningful for monomial bases on disks; None otherwise.
        """
        from .geometry import Disk, UnitDisk

        if not (isinstance(self.basis, MonomialBasis)
                and isinstance(self.basis.domain, (Disk, UnitDisk))):
            return None
        r = self.basis.domain.radius
        t = margin**2
        n = self.order - 1
        return t ** (n + 1) * ((n + 2) - (n + 1) * t) / (math.pi * r**2 * (1 - t) ** 2)

    def metadata(self) -> dict:
        return {
            "basis": self.basis.label(),
            "weight": self.weight.representation,
            "requested_order": self.requested_order,
            "effective_order": self.order,
            "gram_eig_min": self.eig_min,
            "gram_eig_max": self.eig_max,
            "quadrature_order": self.rule.order,
            "truncation_tail_estimate_at_0.7": self.truncation_tail_estimate(),
        }


def kernel_from_gram(basis, weight: Weight, rule: QuadratureRule) -> KernelApproximation:
    """Assemble the Gram matrix and wrap its Cholesky factor as a kernel.

    If the smallest Gram eigenvalue falls below ``CONDITION_FLOOR`` times the
    largest, trailing basis elements are dropped until the retained block is
    well conditioned; the effective order is recorded on the result.
    """
    G = gram_matrix(basis, weight, rule)
    n = G.shape[0]
    eigs = None
    while n >= 1:
        eigs = np.linalg.eigvalsh(G[:n, :n])
        if eigs[0] > 0 and eigs[0] >= CONDITION_FLOOR * eigs[-1]:
            break
        n -= 1
    if n < 1:
        raise IllConditionedGramError(
            "Gram matrix is numerically singular at every truncation",
            eig_min=float(eigs[0]) if eigs is not None else None,
            eig_max=float(eigs[-1]) if eigs is not None else None,
        )
    try:
        L = cholesky(G[:n, :n], lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded by eig check
        raise IllConditionedGramError(
            f"Cholesky factorization failed: {exc}",
            eig_min=float(eigs[0]),
            eig_max=float(eigs[-1]),
        ) from exc
    return KernelApproximation(
        basis=basis,
        weight=weight,
        rule=rule,
        factor=L,
        order=n,
        requested_order=basis.size,
        eig_min=float(eigs[0]),
        eig_max=float(eigs[-1]),
    )


@dataclass(frozen=True, eq=False)
class ExtremalFunction:
    """Unique minimal-norm function with value 1 at t: phi(z) = K(z, t) / K(t, t)."""

    kernel: KernelApproximation
    t: complex
    norm_sq: float

    def value(self, z):
        if np.ndim(z):
            return self.kernel.evaluate_points(z, self.t) / self.kernel.diagonal(self.t)
        return self.kernel.evaluate(complex(z), self.t) / self.kernel.diagonal(self.t)

    __call__ = value


def extremal_function(kernel: KernelApproximation, t: complex) -> ExtremalFunction:
    """Extremal function at an interior point; its squared norm is 1 / K(t, t)."""
    if not kernel.basis.domain.contains(t):
        raise ParameterError(f"extremal point {t} is not interior to the domain")
    ktt = kernel.diagonal(t)
    if ktt <= 0:
        raise DegenerateKernelError(f"kernel diagonal {ktt} at t={t} is not positive")
    return ExtremalFunction(kernel=kernel, t=complex(t), norm_sq=1.0 / ktt)


def _eval_scalar(f, t: complex) -> complex:
    try:
        v = np.asarray(f(np.array([t], dtype=complex)))
        if v.shape == (1,):
            return complex(v[0])
    except (TypeError, ValueError):
        pass
    return complex(f(t))


def reproducing_residual(kernel: KernelApproximation, f, t: complex, rule: QuadratureRule) -> float:
    """| f(t) - <f, K(., t)>_rho | for an evaluator f in the basis span."""
    weight = kernel.weight

    def integrand(zs):
        fz = np.asarray(f(zs), dtype=complex)
        kz = kernel.evaluate_points(zs, t)
        return fz * np.conj(kz) * np.asarray(weight.value(zs), dtype=complex)

    inner = integrate(rule, integrand)
    return abs(_eval_scalar(f, complex(t)) - inner)


def skwarczynski_distance(kernel: KernelApproximation, z: complex, w: complex) -> float:
    """Kernel-derived distance sqrt(1 - |K(z,w)| / sqrt(K(z,z) K(w,w))) in [0, 1]."""
    kzz = kernel.diagonal(z)
    kww = kernel.diagonal(w)
    if kzz <= 0 or kww <= 0:
        raise DegenerateKernelError("kernel diagonal must be positive for the distance")
    ratio = abs(kernel.evaluate(z, w)) / math.sqrt(kzz * kww)
    radicand = 1.0 - ratio
    if radicand < -1e-12:
        raise NumericError(f"distance radicand {radicand} is negative beyond tolerance")
    return math.sqrt(max(radicand, 0.0))
