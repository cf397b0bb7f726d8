"""Weight representations, admissibility checks, and the antiholomorphic gauge.

A weight is a positive function rho on a domain in one of three forms:

* ``HoloModulusSquaredWeight``: rho = |mu|^2 with mu a polynomial that is
  zero-free on the closure of the domain,
* ``LogHarmonicWeight``: rho = exp(2 Re H) with H a polynomial, so log rho
  is harmonic by construction,
* ``GenericC1Weight``: an arbitrary positive C^1 evaluator with its first
  partial derivatives.

For the first two families the weighted Green's function factors through an
antiholomorphic gauge g (a function of conj(w) alone) satisfying

    d(g)/dw = 0        and        (1/g) d(g)/d(conj w) = (1/rho) d(rho)/d(conj w),

which :func:`solve_gauge` constructs in closed form: g = conj(mu) for
rho = |mu|^2 and g = exp(conj(H)) for rho = exp(2 Re H).  Weights whose log
is not harmonic admit no such gauge; the measured Laplacian of log rho is
reported as the obstruction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import GaugeInfeasibleError, ParameterError, WeightError
from .geometry import Domain, QuadratureRule, build_quadrature, make_domain

__all__ = [
    "Weight",
    "HoloModulusSquaredWeight",
    "LogHarmonicWeight",
    "GenericC1Weight",
    "AdmissibilityCertificate",
    "LogHarmonicCheck",
    "Gauge",
    "unit_weight",
    "eval_weight",
    "check_admissible",
    "check_log_harmonic",
    "solve_gauge",
    "weight_from_json",
    "GENERIC_BUILTINS",
]

ROOT_MARGIN = 1e-9


class Weight:
    """Positive weight attached to a domain."""

    representation = "weight"

    def __init__(self, domain: Domain):
        self.domain = domain

    def value(self, z):
        """rho(z); accepts scalars or numpy arrays."""
        raise NotImplementedError

    __call__ = value

    def log_value(self, z):
        return np.log(self.value(z))

    def dwbar(self, z):
        """d(rho)/d(conj z) = (d/dx + i d/dy) rho / 2."""
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


def _coeffs(c):
    arr = np.atleast_1d(np.asarray(c, dtype=complex))
    if arr.ndim != 1 or arr.size == 0:
        raise ParameterError("polynomial coefficients must be a nonempty 1-d sequence")
    return arr


def _coeffs_json(arr):
    return [[float(a.real), float(a.imag)] for a in arr]


class HoloModulusSquaredWeight(Weight):
    """rho(z) = |mu(z)|^2 for a polynomial mu zero-free on the closure.

    Coefficients are ascending in z.  Construction fails if any root of mu
    comes within ``ROOT_MARGIN`` of the closed domain.
    """

    representation = "holo_modulus_squared"

    def __init__(self, mu_coefficients, domain: Domain):
        super().__init__(domain)
        self.mu_coefficients = _coeffs(mu_coefficients)
        if len(self.mu_coefficients) > 1:
            roots = np.polynomial.Polynomial(self.mu_coefficients).roots()
            for root in roots:
                if domain.closure_distance(complex(root)) < ROOT_MARGIN:
                    raise WeightError(
                        f"mu has a root at {complex(root):.6g} on or within "
                        f"{ROOT_MARGIN} of the closure of {domain.kind}"
                    )
        elif self.mu_coefficients[0] == 0:
            raise WeightError("mu must not vanish identically")

    def mu(self, z):
        return P.polyval(np.asarray(z) if np.ndim(z) else complex(z), self.mu_coefficients)

    def mu_prime(self, z):
        d = P.polyder(self.mu_coefficients)
        return P.polyval(np.asarray(z) if np.ndim(z) else complex(z), d)

    def value(self, z):
        return np.abs(self.mu(z)) ** 2

    def dwbar(self, z):
        # rho = mu * conj(mu), so d rho / d conj(z) = mu * conj(mu').
        return self.mu(z) * np.conj(self.mu_prime(z))

    @property
    def is_constant(self):
        return len(self.mu_coefficients) == 1

    def to_json(self):
        return {
            "representation": self.representation,
            "coefficients": _coeffs_json(self.mu_coefficients),
            "domain": self.domain.to_json(),
        }


class LogHarmonicWeight(Weight):
    """rho(z) = exp(2 Re H(z)) for a polynomial H; log rho is harmonic exactly."""

    representation = "log_harmonic"

    def __init__(self, h_coefficients, domain: Domain):
        super().__init__(domain)
        self.h_coefficients = _coeffs(h_coefficients)

    def exponent(self, z):
        return P.polyval(np.asarray(z) if np.ndim(z) else complex(z), self.h_coefficients)

    def exponent_prime(self, z):
        d = P.polyder(self.h_coefficients)
        return P.polyval(np.asarray(z) if np.ndim(z) else complex(z), d)

    def value(self, z):
        return np.exp(2.0 * np.real(self.exponent(z)))

    def dwbar(self, z):
        # log rho = H + conj(H), so d(log rho)/d conj(z) = conj(H').
        return self.value(z) * np.conj(self.exponent_prime(z))

    def to_json(self):
        return {
            "representation": self.representation,
            "coefficients": _coeffs_json(self.h_coefficients),
            "domain": self.domain.to_json(),
        }


class GenericC1Weight(Weight):
    """Positive C^1 weight given by an evaluator and its first partials."""

    representation = "generic_c1"

    def __init__(self, fn: Callable, dfdx: Callable, dfdy: Callable, domain: Domain, name="generic"):
        super().__init__(domain)
        self.fn = fn
        self.dfdx = dfdx
        self.dfdy = dfdy
        self.name = name

    def value(self, z):
        return self.fn(np.asarray(z) if np.ndim(z) else complex(z))

    def dwbar(self, z):
        z = np.asarray(z) if np.ndim(z) else complex(z)
        return 0.5 * (self.dfdx(z) + 1j * self.dfdy(z))

    def to_json(self):
        return {
            "representation": self.representation,
            "name": self.name,
            "domain": self.domain.to_json(),
        }


def _exp_abs_sq(domain):
    return GenericC1Weight(
        fn=lambda z: np.exp(np.abs(z) ** 2),
        dfdx=lambda z: 2.0 * np.real(z) * np.exp(np.abs(z) ** 2),
        dfdy=lambda z: 2.0 * np.imag(z) * np.exp(np.abs(z) ** 2),
        domain=domain,
        name="exp_abs_sq",
    )


def _abs_sq(domain):
    return GenericC1Weight(
        fn=lambda z: np.abs(z) ** 2,
        dfdx=lambda z: 2.0 * np.real(z),
        dfdy=lambda z: 2.0 * np.imag(z),
        domain=domain,
        name="abs_sq",
    )


#: Named generic weights available to the JSON config layer.
GENERIC_BUILTINS = {
    "exp_abs_sq": _exp_abs_sq,  # rho = exp(|z|^2), log rho has Laplacian 4
    "abs_sq": _abs_sq,  # rho = |z|^2, positive away from the origin
}


def unit_weight(domain: Domain) -> HoloModulusSquaredWeight:
    """The constant weight rho = 1."""
    return HoloModulusSquaredWeight([1.0], domain)


def weight_from_json(spec: dict, domain: Optional[Domain] = None) -> Weight:
    rep = spec.get("representation", "holo_modulus_squared")
    if domain is None:
        dom_spec = spec.get("domain")
        if dom_spec is None:
            raise ParameterError("weight JSON needs a domain")
        domain = make_domain(dom_spec["kind"], **dom_spec.get("params", {}))
    if rep == "holo_modulus_squared":
        coeffs = [complex(c[0], c[1]) for c in spec["coefficients"]]
        return HoloModulusSquaredWeight(coeffs, domain)
    if rep == "log_harmonic":
        coeffs = [complex(c[0], c[1]) for c in spec["coefficients"]]
        return LogHarmonicWeight(coeffs, domain)
    if rep == "generic_c1":
        name = spec["name"]
        if name not in GENERIC_BUILTINS:
            raise ParameterError(f"unknown generic weight {name!r}")
        return GENERIC_BUILTINS[name](domain)
    raise ParameterError(f"unknown weight representation {rep!r}")


def eval_weight(weight: Weight, z: complex) -> float:
    """Evaluate rho(z), rejecting nonpositive or non-finite values."""
    v = float(np.real(weight.value(complex(z))))
    if not math.isfinite(v) or v <= 0.0:
        raise WeightError(f"weight value {v} at z={z} violates positivity")
    return v


# ---------------------------------------------------------------------------
# Admissibility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdmissibilityCertificate:
    admissible: bool
    exponent: float
    integral_estimate: float
    method: str
    coarse_estimate: float = float("nan")


def check_admissible(
    weight: Weight, exponent: float, step: Domain, order: int = 24
) -> AdmissibilityCertificate:
    """Numerically test integrability of rho^(-a) over a subdomain.

    Integrates at two successive quadrature orders; the weight is declared
    admissible when both estimates are finite and agree within 5%.  A
    diverging refinement yields ``admissible=False`` rather than an error.
    """
    if exponent <= 0:
        raise ParameterError("admissibility exponent must be positive")
    for p in step.boundary_points(32):
        if weight.domain.closure_distance(p) > 1e-12:
            raise ParameterError("step must be contained in the weight's domain")

    def estimate(q):
        rule = build_quadrature(step, q)
        vals = np.real(np.asarray(weight.value(rule.nodes), dtype=complex))
        if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
            return math.inf
        terms = rule.weights * vals ** (-exponent)
        return math.fsum(terms)

    coarse = estimate(order)
    fine = estimate(order + 1)
    stable = (
        math.isfinite(coarse)
        and math.isfinite(fine)
        and abs(fine - coarse) <= 0.05 * max(abs(fine), 1e-300)
    )
    return AdmissibilityCertificate(
        admissible=stable,
        exponent=exponent,
        integral_estimate=fine,
        method=f"quadrature refinement agreement at orders {order}/{order + 1} (5% threshold)",
        coarse_estimate=coarse,
    )


# ---------------------------------------------------------------------------
# Log-harmonicity diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogHarmonicCheck:
    max_abs_laplacian: float
    nodes_checked: int
    nodes_skipped: int


def check_log_harmonic(weight: Weight, rule: QuadratureRule, fd_step: float = 1e-3) -> LogHarmonicCheck:
    """Maximum five-point finite-difference Laplacian of log rho over rule nodes.

    Nodes whose stencil leaves the domain are skipped and counted.
    """
    z = rule.nodes
    h = fd_step
    stencil = [z + h, z - h, z + 1j * h, z - 1j * h]
    ok = weight.domain.contains_many(z)
    for s in stencil:
        ok &= weight.domain.contains_many(s)
    if not ok.any():
        return LogHarmonicCheck(0.0, 0, len(z))
    center = np.log(np.real(np.asarray(weight.value(z[ok]), dtype=complex)))
    acc = -4.0 * center
    for s in stencil:
        acc = acc + np.log(np.real(np.asarray(weight.value(s[ok]), dtype=complex)))
    lap = acc / h**2
    return LogHarmonicCheck(
        max_abs_laplacian=float(np.max(np.abs(lap))),
        nodes_checked=int(ok.sum()),
        nodes_skipped=int(len(z) - ok.sum()),
    )


# ---------------------------------------------------------------------------
# Gauge
# ---------------------------------------------------------------------------

GAUGE_RESIDUAL_LIMIT = 1e-4


@dataclass(frozen=True, eq=False)
class Gauge:
    """Antiholomorphic gauge factor g with decomposition g = rho * e^h.

    ``conj_coefficients`` holds the coefficients of g as a polynomial in
    conj(w) when that representation is exact (holomorphic-modulus weights);
    otherwise it is ``None`` and only the evaluator is available.  By
    construction g depends on conj(w) alone, so d(g)/dw vanishes identically.
    """

    source_weight: Weight
    conj_coefficients: Optional[np.ndarray]
    _g: Callable
    _h: Callable
    kind: str

    def __call__(self, w):
        return self._g(np.asarray(w) if np.ndim(w) else complex(w))

    def h(self, w):
        return self._h(np.asarray(w) if np.ndim(w) else complex(w))

    @property
    def analytic_dw_residual(self) -> float:
        # g is stored as a function of conj(w) alone; its w-derivative is
        # identically zero by representation.
        return 0.0

    def system_residuals(self, nodes, fd_step: float = 1e-5) -> dict:
        """Finite-difference residuals of both gauge equations at the given nodes."""
        w = np.asarray(nodes)
        s = fd_step
        rho = np.real(np.asarray(self.source_weight.value(w), dtype=complex))

        def fd_pair(fn):
            du = (fn(w + s) - fn(w - s)) / (2 * s)
            dv = (fn(w + 1j * s) - fn(w - 1j * s)) / (2 * s)
            return 0.5 * (du - 1j * dv), 0.5 * (du + 1j * dv)

        g_w, g_wbar = fd_pair(self._g)
        _, rho_wbar = fd_pair(lambda q: np.asarray(self.source_weight.value(q), dtype=complex))
        gvals = self._g(w)
        eq_ratio = g_wbar / gvals - rho_wbar / rho
        return {
            "max_dw": float(np.max(np.abs(g_w))),
            "max_ratio": float(np.max(np.abs(eq_ratio))),
        }

    def decomposition_residual(self, nodes) -> float:
        """max | |g| - rho * exp(Re h) | over the nodes (g = rho e^h in modulus)."""
        w = np.asarray(nodes)
        rho = np.real(np.asarray(self.source_weight.value(w), dtype=complex))
        return float(np.max(np.abs(np.abs(self._g(w)) - rho * np.exp(np.real(self._h(w))))))


def solve_gauge(weight: Weight) -> Gauge:
    """Construct the antiholomorphic gauge for a log-harmonic weight.

    * rho = |mu|^2: g(w) = conj(mu(w)) with conjugated coefficients in
      conj(w); h = -log(mu) on the principal branch (valid because mu is
      zero-free near the closure; on an annulus h may jump across a cut but
      only |g|, Re h and the product g(z) conj(g(w)) are consumed downstream).
    * rho = exp(2 Re H): g(w) = exp(conj(H(w))), h = -H.

    Generic weights are rejected: if log rho fails the harmonicity check the
    returned error carries the residual, and a numerically log-harmonic
    generic weight must be re-expressed in one of the closed forms above.
    """
    if isinstance(weight, HoloModulusSquaredWeight):
        cc = np.conj(weight.mu_coefficients)

        def g(w):
            return P.polyval(np.conj(w), cc)

        def h(w):
            return -np.log(weight.mu(w))

        return Gauge(source_weight=weight, conj_coefficients=cc, _g=g, _h=h, kind="conj_poly")

    if isinstance(weight, LogHarmonicWeight):
        hc = weight.h_coefficients

        def g(w):
            return np.exp(np.conj(P.polyval(w, hc)))

        def h(w):
            return -P.polyval(w, hc)

        return Gauge(source_weight=weight, conj_coefficients=None, _g=g, _h=h, kind="exp_conj")

    rule = build_quadrature(weight.domain, 12)
    check = check_log_harmonic(weight, rule, fd_step=1e-3)
    if check.max_abs_laplacian > GAUGE_RESIDUAL_LIMIT:
        raise GaugeInfeasibleError(
            "weight is not log-harmonic (max |Laplacian log rho| = "
            f"{check.max_abs_laplacian:.3e}); no antiholomorphic gauge exists",
            residual=check.max_abs_laplacian,
        )
    raise ParameterError(
        "generic weight passes the log-harmonicity check; re-express it as a "
        "holomorphic-modulus or log-harmonic weight to obtain its gauge"
    )
