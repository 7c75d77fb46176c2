"""Centering/whitening and deflation FastICA."""
from dataclasses import dataclass, field
import logging
from typing import Callable, Dict, List, Tuple

import numpy as np

from errors import DimensionError, SingularCovarianceError
from numerics import SeededRng, as_matrix, covariance, randn, sym_eig

logger = logging.getLogger(__name__)

SINGULAR_RATIO = 1e-10
ORTHONORMAL_TOLERANCE = 1e-6


@dataclass
class WhiteningTransform:
    """X̃ = P (X - mean), with P = D^(-1/2) Vᵀ from the covariance V D Vᵀ."""
    P: np.ndarray
    mean: np.ndarray
    V: np.ndarray
    d: np.ndarray

    def apply(self, X) -> np.ndarray:
        return self.P @ (as_matrix(X, "X") - self.mean[:, np.newaxis])

    @property
    def P_inverse(self) -> np.ndarray:
        return self.V * np.sqrt(self.d)

    def invert(self, X_white) -> np.ndarray:
        """Back to observation space: P⁻¹ X̃ + mean."""
        return self.P_inverse @ as_matrix(X_white, "X_white") + self.mean[:, np.newaxis]


def center_whiten(X) -> Tuple[np.ndarray, WhiteningTransform]:
    """Remove row means and decorrelate the rows to unit variance."""
    X = as_matrix(X, "X")
    C = covariance(X)
    V, d = sym_eig(C)
    if d[0] <= 0 or d[-1] <= SINGULAR_RATIO * d[0]:
        raise SingularCovarianceError(
            "singular covariance (zero-variance or duplicate channel): eigenvalues span {:.3g} .. {:.3g}".format(
                d[-1], d[0]))
    mean = X.mean(axis=1)
    P = V.T / np.sqrt(d)[:, np.newaxis]
    transform = WhiteningTransform(P=P, mean=mean, V=V, d=d)
    return transform.apply(X), transform


def contrast(u):
    """Gaussian contrast: g(u) = u·exp(-u²/2), g'(u) = (1 - u²)·exp(-u²/2)."""
    u = np.asarray(u, dtype=np.float64)
    e = np.exp(-u * u / 2.0)
    return u * e, (1.0 - u * u) * e


def logcosh_contrast(u, alpha: float = 1.0):
    g = np.tanh(alpha * np.asarray(u, dtype=np.float64))
    return g, alpha * (1.0 - g * g)


def cube_contrast(u):
    u = np.asarray(u, dtype=np.float64)
    return u ** 3, 3.0 * u * u


CONTRASTS: Dict[str, Callable] = {
    "gauss": contrast,
    "logcosh": logcosh_contrast,
    "cube": cube_contrast,
}


@dataclass
class IcaResult:
    W: np.ndarray                # n x N_s, unit-norm orthogonal columns
    S: np.ndarray                # N_s x T, S = Wᵀ X̃
    iterations: List[int] = field(default_factory=list)
    converged: List[bool] = field(default_factory=list)
    fun: str = "gauss"

    @property
    def n_components(self) -> int:
        return self.W.shape[1]

    @property
    def mixing(self) -> np.ndarray:
        """(Wᵀ)⁻¹, mapping sources back to whitened observations.

        Equals W while W stays orthonormal; otherwise an explicit inverse is
        taken, which needs a square W.
        """
        drift = np.abs(self.W.T @ self.W - np.eye(self.n_components)).max()
        if drift <= ORTHONORMAL_TOLERANCE:
            return self.W.copy()
        if self.W.shape[0] != self.W.shape[1]:
            raise DimensionError("dimension error: W drifted from orthonormal and is not square")
        logger.warning("Unmixing matrix drifted from orthonormal by %.3g; using an explicit inverse", drift)
        return np.linalg.inv(self.W.T)


def fast_ica(X_white, n_components: int, rng: SeededRng, tol: float = 1e-6, max_iter: int = 200,
             fun: str = "gauss") -> IcaResult:
    """Extract ``n_components`` sources one at a time from whitened data.

    Each w_i is driven by the fixed-point update
    w ← mean(X̃ g(wᵀX̃)) - mean(g'(wᵀX̃)) w, decorrelated against the components
    found before it and renormalized, until |⟨w_new, w_old⟩| > 1 - tol. A
    component that reaches ``max_iter`` is kept and flagged as not converged.
    """
    X = as_matrix(X_white, "X_white")
    n, T = X.shape
    if not 1 <= n_components <= n:
        raise DimensionError("dimension error: n_components must lie in 1..{}, got {}".format(n, n_components))
    if fun not in CONTRASTS:
        raise ValueError("unknown contrast {!r}; choose one of {}".format(fun, sorted(CONTRASTS)))
    g_func = CONTRASTS[fun]

    W_init = randn(n, n_components, rng)
    W = np.zeros((n, n_components))
    iterations = []
    converged = []
    for i in range(n_components):
        w = _decorrelate(W_init[:, i], W[:, :i])
        w = w / _norm_or_raise(w, i)
        done = False
        it = 0
        for it in range(1, max_iter + 1):
            g, g_prime = g_func(w @ X)
            w_new = X @ g / T - g_prime.mean() * w
            w_new = _decorrelate(w_new, W[:, :i])
            w_new = w_new / _norm_or_raise(w_new, i)
            done = bool(abs(w_new @ w) > 1.0 - tol)
            w = w_new
            if done:
                break
        if not done:
            logger.warning("FastICA component %d did not converge in %d iterations", i, max_iter)
        W[:, i] = w
        iterations.append(int(it))
        converged.append(bool(done))
    return IcaResult(W=W, S=W.T @ X, iterations=iterations, converged=converged, fun=fun)


def _decorrelate(w: np.ndarray, previous: np.ndarray) -> np.ndarray:
    if previous.shape[1] == 0:
        return w
    return w - previous @ (previous.T @ w)


def _norm_or_raise(w: np.ndarray, component: int) -> float:
    norm = float(np.linalg.norm(w))
    if not norm > 1e-12:
        raise SingularCovarianceError("singular input: component {} collapsed to zero; the data is not "
                                      "full rank".format(component))
    return norm
