"""Dedekind eta, the theta product and the torsion of flat bundles on elliptic curves.

Conventions: ``q = exp(2 pi i tau)``; ``T = C / (Z + tau Z)``; the dual torus is
``C / Gamma_hat`` with ``Gamma_hat = (Z + tau Z) / Im tau``.  A point
``z_hat`` of the dual torus is the character point of the flat bundle whose
semicharacter has phase ``Im z_hat`` on ``1`` and ``Im z_hat Re tau - Re z_hat Im tau``
on ``tau`` (mod 1).
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import exp1

from .errors import SlowConvergence, TrivialBundle, ValidationError
from .torsion import TorsionResult

IM_TAU_FLOOR = 0.05
TAIL = 1e-15
MAX_FACTORS = 100_000


@dataclass(frozen=True)
class EllipticParams:
    tau: complex
    z_hat: complex

    def __post_init__(self):
        if not self.tau.imag > 0:
            raise ValidationError("Im tau must be positive")

    @property
    def w(self) -> complex:
        """``z_hat Im tau``, the argument of the classical theta function."""
        return self.z_hat * self.tau.imag


def _nome(tau: complex, floor: float) -> complex:
    tau = complex(tau)
    if not tau.imag > 0:
        raise ValidationError("Im tau must be positive")
    if tau.imag < floor:
        raise SlowConvergence(f"Im tau = {tau.imag} below floor {floor}")
    return cmath.exp(2j * math.pi * tau)


def _q_product_length(aq: float) -> int:
    # smallest K with |q|^K / (1 - |q|) < TAIL
    return max(1, int(math.ceil(math.log(TAIL * (1 - aq)) / math.log(aq))))


def log_eta(tau: complex, floor: float = IM_TAU_FLOOR) -> complex:
    """Principal-branch-free ``log eta``: ``pi i tau / 12 + sum log(1 - q^k)``."""
    q = _nome(tau, floor)
    K = _q_product_length(abs(q))
    acc = 1j * math.pi * complex(tau) / 12
    qk = 1.0 + 0j
    for _ in range(K):
        qk *= q
        acc += cmath.log(1 - qk)
    return acc


def dedekind_eta(tau: complex, floor: float = IM_TAU_FLOOR) -> complex:
    """``eta(tau) = e^{pi i tau/12} prod_{k>=1} (1 - q^k)``, truncated by the geometric tail bound."""
    q = _nome(tau, floor)
    K = _q_product_length(abs(q))
    prod = 1.0 + 0j
    qk = 1.0 + 0j
    for _ in range(K):
        qk *= q
        prod *= 1 - qk
    return cmath.exp(1j * math.pi * complex(tau) / 12) * prod


def eta_pentagonal(tau: complex, floor: float = IM_TAU_FLOOR) -> complex:
    """Eta from Euler's pentagonal-number series (independent of the product)."""
    q = _nome(tau, floor)
    aq = abs(q)
    total = 1.0 + 0j
    k = 1
    while True:
        e1, e2 = k * (3 * k - 1) // 2, k * (3 * k + 1) // 2
        if aq**e1 < 1e-18:
            break
        total += (-1) ** k * (q**e1 + q**e2)
        k += 1
    return cmath.exp(1j * math.pi * complex(tau) / 12) * total


def theta_product(tau: complex, w: complex, floor: float = IM_TAU_FLOOR) -> complex:
    """``prod_{k in Z} (1 - exp(2 pi i (|k| tau + w sgn(k + 1/2))))``."""
    q = _nome(tau, floor)
    aq = abs(q)
    x = cmath.exp(2j * math.pi * w)
    prod = 1 - x
    qk = 1.0 + 0j
    for k in range(1, MAX_FACTORS):
        qk *= q
        t1, t2 = qk * x, qk / x
        prod *= (1 - t1) * (1 - t2)
        if abs(t1) < TAIL * 1e-2 and abs(t2) < TAIL * 1e-2 and aq**k < TAIL:
            return prod
    raise SlowConvergence("theta product did not converge")


def theta_paper(tau: complex, z_hat: complex, floor: float = IM_TAU_FLOOR) -> complex:
    """``-eta(tau) e^{pi i (tau/6 - z_hat Im tau)} prod_k (...)``.

    Equal to ``i theta_1(z_hat Im tau | tau)`` for the classical first Jacobi theta function.
    """
    tau = complex(tau)
    w = complex(z_hat) * tau.imag
    return (-dedekind_eta(tau, floor) * cmath.exp(1j * math.pi * (tau / 6 - w))
            * theta_product(tau, w, floor))


def log_abs_theta_paper(tau: complex, z_hat: complex, floor: float = IM_TAU_FLOOR) -> float:
    tau = complex(tau)
    w = complex(z_hat) * tau.imag
    eta = log_eta(tau, floor).real
    expo = (1j * math.pi * (tau / 6 - w)).real
    return eta + expo + math.log(abs(theta_product(tau, w, floor)))


def on_dual_lattice(tau: complex, z_hat: complex, tol: float = 1e-12) -> bool:
    w = complex(z_hat) * tau.imag
    b = w.imag / tau.imag
    a = w.real - b * tau.real
    return abs(a - round(a)) < tol and abs(b - round(b)) < tol


def ray_singer_torsion(tau: complex, z_hat: complex, floor: float = IM_TAU_FLOOR) -> TorsionResult:
    """``T_0 = |theta(z_hat) / eta(tau) * exp(pi i (Im z_hat)^2 tau)|`` for a nontrivial flat bundle.

    Raises:
        TrivialBundle: ``z_hat`` lies on the dual lattice.
    """
    tau, z_hat = complex(tau), complex(z_hat)
    if on_dual_lattice(tau, z_hat):
        raise TrivialBundle("z_hat lies on the dual lattice")
    log_t0 = (log_abs_theta_paper(tau, z_hat, floor) - log_eta(tau, floor).real
              - math.pi * z_hat.imag**2 * tau.imag)
    return TorsionResult(log_t0, "theta_formula", details={"tau": tau, "zhat": z_hat})


def quillen_constant(tau: complex, floor: float = IM_TAU_FLOOR) -> float:
    """``|gamma| = 1 / |eta(tau)|``."""
    return 1.0 / abs(dedekind_eta(tau, floor))


def quillen_norm(tau: complex, z_hat: complex, floor: float = IM_TAU_FLOOR) -> float:
    """Pointwise norm of ``sigma = gamma theta e^{(pi/2) Im tau z_hat^2}`` in the metric ``e^{-pi Im tau |z_hat|^2}``."""
    tau, z_hat = complex(tau), complex(z_hat)
    y = tau.imag
    log_norm = (-math.log(abs(dedekind_eta(tau, floor))) + log_abs_theta_paper(tau, z_hat, floor)
                + 0.5 * math.pi * y * (z_hat**2).real - 0.5 * math.pi * y * abs(z_hat) ** 2)
    return math.exp(log_norm)


# ----------------------------------------------------------------------------
# zeta-regularized determinant oracle


def phases_from_zhat(tau: complex, z_hat: complex) -> tuple[float, float]:
    """Semicharacter phases on ``(1, tau)`` whose character point is ``z_hat``."""
    a1 = z_hat.imag
    a2 = a1 * tau.real - z_hat.real * tau.imag
    return a1 % 1.0, a2 % 1.0


def zhat_from_phases(tau: complex, a1: float, a2: float) -> complex:
    return (a1 * tau - a2) / tau.imag


def flat_data_for(tau: complex, z_hat: complex):
    """Flat data of ``C/(Z + tau Z)`` with the flat bundle at ``z_hat``."""
    from .degenerate import decompose
    from .torus_model import validate

    a1, a2 = phases_from_zhat(complex(tau), complex(z_hat))
    bundle = validate(n=1, lattice=np.array([[1.0], [complex(tau)]]), metric_g=np.eye(1),
                      form_H=np.zeros((1, 1)), alpha_phases=np.array([a1, a2]))
    return decompose(bundle)[0]


def _points_within(basis: np.ndarray, shift: np.ndarray, radius2: float):
    """Real 2-vectors ``(k + shift) @ basis`` with squared norm ``<= radius2``."""
    G = basis @ basis.T
    half = np.sqrt(radius2 * np.diag(np.linalg.inv(G)))
    ranges = [range(int(math.ceil(-s - h)) - 1, int(math.floor(-s + h)) + 2)
              for s, h in zip(shift, half)]
    for k in itertools.product(*ranges):
        x = (np.asarray(k, float) + shift) @ basis
        r2 = float(x @ x)
        if r2 <= radius2:
            yield x, r2


def epstein_log_det(flat, depth: float = 40.0) -> float:
    """``log det'`` of the scalar spectrum ``2 pi^2 |ell + ell_alpha|^2`` by theta-transform continuation.

    The dual lattice is first scaled to unit covolume; the zeta function
    vanishes at ``s = 0`` for a nontrivial twist, so the determinant is scale
    invariant.  The Mellin integral is split at ``t = 1``; the small-``t`` half
    is Poisson-transformed into a sum over the lattice dual to it, twisted by
    the character.  Both sums are cut where the Gaussian factor drops below
    ``e^{-depth}``.
    """
    if flat.n_prime != 1:
        raise ValidationError("oracle needs a one-dimensional flat factor")
    if flat.ell_alpha is None:
        from .degenerate import character_point

        flat = character_point(flat)
    if flat.trivial_P:
        raise TrivialBundle("oracle needs a nontrivial flat bundle")
    D = np.column_stack([flat.dual_basis[:, 0].real, flat.dual_basis[:, 0].imag])  # rows: basis
    covol = abs(np.linalg.det(D))
    D = D / math.sqrt(covol)
    shift = flat.ell_alpha_coeffs
    c = shift @ D
    two_pi_sq = 2 * math.pi**2

    # large t: sum over spectrum of Gamma(0, lambda)
    direct = math.fsum(float(exp1(two_pi_sq * r2))
                       for _, r2 in _points_within(D, shift, depth / two_pi_sq))
    # small t: Theta(t) = (1/(2 pi t)) sum_k e^{-|k|^2/(2t)} e^{2 pi i <k, c>}
    Dstar = np.linalg.inv(D).T
    A = 1.0 / (2 * math.pi)
    terms = []
    for k, r2 in _points_within(Dstar, np.zeros(2), 2 * depth):
        if r2 > 0:
            terms.append(math.cos(2 * math.pi * float(k @ c)) * 2 * math.exp(-r2 / 2) / r2)
    dual = A * math.fsum(terms)
    zeta_prime = direct - A + dual
    return -zeta_prime


def epstein_regdet(flat, depth: float = 40.0) -> TorsionResult:
    """Torsion of a flat bundle on an elliptic curve from the regularized determinant.

    Each eigenvalue carries forms of degree 0 and 1, net degree weight ``-1``,
    so ``zeta_box = -zeta_scalar`` and ``log T_0 = (1/2) log det'``.
    """
    return TorsionResult(0.5 * epstein_log_det(flat, depth), "epstein")
