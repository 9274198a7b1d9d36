"""Special functions and the scalar kernels the integral operators are built from.

Every function accepts scalars or numpy arrays and is pure.
"""
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy import special

from scatter_workbench.errors import DomainError

ArrayLike = Union[float, np.ndarray]

EULER_GAMMA = float(np.euler_gamma)
# low-frequency constant of the 2D fundamental solution
C2 = np.log(2.0) / (2.0 * np.pi) - EULER_GAMMA / (2.0 * np.pi) + 0.25j


@dataclass(frozen=True)
class KernelEval:
    value: np.ndarray
    gradient_y: Tuple[np.ndarray, np.ndarray]


def _positive(x: ArrayLike, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError(f"{what} requires a positive finite argument")
    return arr


def cyl_bessel_j(x: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """J0 and J1 for x >= 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError("J0/J1 are evaluated for x >= 0 only")
    return special.j0(arr), special.j1(arr)


def cyl_bessel(x: ArrayLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """J0, J1, Y0, Y1 for x > 0."""
    arr = _positive(x, "Y0/Y1")
    return special.j0(arr), special.j1(arr), special.y0(arr), special.y1(arr)


def mod_bessel_k(x: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    arr = _positive(x, "K0/K1")
    return special.k0(arr), special.k1(arr)


def hankel1(order: int, x: ArrayLike) -> np.ndarray:
    if order not in (0, 1):
        raise DomainError(f"Hankel order {order} is not supported, use 0 or 1")
    arr = _positive(x, "H^(1)")
    return special.hankel1(order, arr)


def _distance(r: ArrayLike) -> np.ndarray:
    arr = np.asarray(r, dtype=float)
    if np.any(arr <= 0.0):
        raise DomainError("kernel evaluated at zero distance")
    return arr


def phi(k: float, r: ArrayLike) -> np.ndarray:
    """Helmholtz fundamental solution (i/4) H0(k r) in the plane."""
    if not k > 0:
        raise DomainError("wavenumber must be positive")
    rr = _distance(r)
    return 0.25j * special.hankel1(0, k * rr)


def phi_imaginary(r: ArrayLike) -> np.ndarray:
    """Kernel at wavenumber i: (i/4) H0(i r) = K0(r) / (2 pi)."""
    rr = _distance(r)
    return special.k0(rr) / (2.0 * np.pi)


def phi0(r: ArrayLike) -> np.ndarray:
    rr = _distance(r)
    return np.log(1.0 / rr) / (2.0 * np.pi)


def psi_kernel(r: ArrayLike) -> np.ndarray:
    rr = np.asarray(r, dtype=float)
    if np.any(rr < 0.0):
        raise DomainError("distance must be non-negative")
    safe = np.where(rr > 0.0, rr, 1.0)
    value = safe ** 2 / (8.0 * np.pi) * (np.log(safe / 2.0) + EULER_GAMMA - 1.0 - 0.5j * np.pi)
    return np.where(rr > 0.0, value, 0.0 + 0.0j)


def phi_lowk_remainder(k: float, r: ArrayLike, order: int = 2) -> np.ndarray:
    """Phi minus its low-frequency partial sum through ``order`` (0, 1 or 2).

    There is no odd term in the plane, so order 1 equals order 0.
    """
    if order not in (0, 1, 2):
        raise DomainError(f"expansion order {order} is not available")
    rr = _distance(r)
    partial = -np.log(k) / (2.0 * np.pi) + phi0(rr) + C2
    if order == 2:
        partial = partial + rr ** 2 / (8.0 * np.pi) * k ** 2 * np.log(k) + psi_kernel(rr) * k ** 2
    return phi(k, rr) - partial


def phi_eval(k: float, x: np.ndarray, y: np.ndarray) -> KernelEval:
    """Phi(x, y) with its gradient in y, for point arrays of shape (..., 2)."""
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = _distance(np.hypot(diff[..., 0], diff[..., 1]))
    value = phi(k, r)
    factor = 0.25j * k * special.hankel1(1, k * r) / r
    return KernelEval(value=value, gradient_y=(factor * diff[..., 0], factor * diff[..., 1]))


def phi0_eval(x: np.ndarray, y: np.ndarray) -> KernelEval:
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = _distance(np.hypot(diff[..., 0], diff[..., 1]))
    factor = 1.0 / (2.0 * np.pi * r ** 2)
    return KernelEval(value=phi0(r), gradient_y=(factor * diff[..., 0], factor * diff[..., 1]))


def psi_eval(x: np.ndarray, y: np.ndarray) -> KernelEval:
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.hypot(diff[..., 0], diff[..., 1])
    safe = np.where(r > 0.0, r, 1.0)
    # dPsi/dr divided by r; the gradient in y carries a minus sign from d r / d y
    dpsi_over_r = (2.0 * np.log(safe / 2.0) + 2.0 * EULER_GAMMA - 1.0 - 1.0j * np.pi) / (8.0 * np.pi)
    dpsi_over_r = np.where(r > 0.0, dpsi_over_r, 0.0)
    return KernelEval(
        value=psi_kernel(r),
        gradient_y=(-dpsi_over_r * diff[..., 0], -dpsi_over_r * diff[..., 1]),
    )
