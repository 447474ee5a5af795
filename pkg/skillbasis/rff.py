"""Random Fourier feature factorization of the energy-model kernel ``exp(psi^T nu)``."""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, ShapeMismatchError
from .models import FloatArray
from .utils import stage_rng


@dataclass(frozen=True, eq=False)
class RffExpansion:
    """
    Explicit finite-dimensional factorization.

    Attributes:
        phi_omega: Features of the psi rows ``(n_psi, 2M)``.
        mu_omega: Features of the nu rows ``(n_nu, 2M)``.
        kernel_estimate: ``phi_omega @ mu_omega.T``, estimating ``exp(psi_i^T nu_j)``.

    """

    phi_omega: FloatArray
    mu_omega: FloatArray
    kernel_estimate: FloatArray


def _fourier_features(values: FloatArray, omega: FloatArray) -> FloatArray:
    """``exp(||x||^2 / 2) * [cos(Omega x), sin(Omega x)] / sqrt(M)`` per row."""
    projection = values @ omega.T
    envelope = np.exp(0.5 * np.sum(values * values, axis=1, keepdims=True))
    scale = 1.0 / np.sqrt(omega.shape[0])
    return envelope * scale * np.hstack([np.cos(projection), np.sin(projection)])


def rff_expand(psi_values: FloatArray, nu_values: FloatArray, M: int, seed: int) -> RffExpansion:
    """
    Factorize ``exp(psi^T nu)`` with M random frequencies.

    Draws ``omega_1..omega_M ~ N(0, I_g)``. Cosine/sine pairs give
    ``(1/M) sum cos(omega^T (psi - nu))``, an unbiased estimate of the
    Gaussian kernel ``exp(-||psi - nu||^2 / 2)``; the envelopes
    ``exp(||psi||^2 / 2)`` and ``exp(||nu||^2 / 2)`` turn it into an estimate
    of ``exp(psi^T nu)``. The partition function is not included.

    Args:
        psi_values: Rows ``(n_psi, g)``.
        nu_values: Rows ``(n_nu, g)``.
        M: Number of frequencies, at least 1.
        seed: Seed of the frequency draw.

    Returns:
        Features of both sides and the pairwise estimate.

    Raises:
        ShapeMismatchError: If the column counts differ.
        ConfigurationError: If ``M < 1``.

    """
    psi = np.atleast_2d(np.asarray(psi_values, dtype=float))
    nu = np.atleast_2d(np.asarray(nu_values, dtype=float))
    if psi.shape[1] != nu.shape[1]:
        raise ShapeMismatchError(
            f"psi has {psi.shape[1]} columns but nu has {nu.shape[1]}"
        )
    if M < 1:
        raise ConfigurationError(f"M must be >= 1, got {M}")
    omega = stage_rng(seed, "rff").standard_normal((M, psi.shape[1]))
    phi_omega = _fourier_features(psi, omega)
    mu_omega = _fourier_features(nu, omega)
    return RffExpansion(phi_omega, mu_omega, phi_omega @ mu_omega.T)


def quadratic_potential_factors(psi: FloatArray, nu: FloatArray) -> tuple[float, float, float]:
    """
    The three factors of ``exp(psi^T nu) = exp(|psi|^2/2) exp(-|psi-nu|^2/2) exp(|nu|^2/2)``.

    Args:
        psi: One feature vector.
        nu: One feature vector of the same length.

    Returns:
        ``(psi envelope, Gaussian kernel, nu envelope)``.

    """
    return (
        float(np.exp(0.5 * psi @ psi)),
        float(np.exp(-0.5 * np.sum((psi - nu) ** 2))),
        float(np.exp(0.5 * nu @ nu)),
    )
