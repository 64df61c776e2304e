"""Sparse deconvolution on the torus with a finite spectral measure.

The convolution kernel is positive definite with a uniform spectral
measure on the integer frequency cube ``[-freq_cutoff, freq_cutoff]^d``
(the super-resolution low-pass setting), so

    k(x) = mean over frequencies of cos(<u, x>),        k(0) = 1.

The observation is a spike train convolved with the kernel plus an
optional noise term that is itself a small combination of kernel
translates, which keeps every inner product a finite sum:

    y(t) = sum_a beta_a k(t - s_a)       <phi_t, y> = y(t).

The kernel-side surrogate samples one frequency uniformly,
``g(t, t', u) = cos(<u, t - t'>)``; the data side is deterministic
(``h(t, .) = y(t)``, the data draw is a placeholder).  Positions live on
``[-pi, pi)^d`` with wrap-around, so projection is modular reduction.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np

from .base import FeatureModel, GroundTruth, ModelBounds, coordinate_product_grad

TORUS_RADIUS = np.pi


class FourierDeconvolutionModel(FeatureModel):
    """Spike deconvolution against a low-pass kernel on the d-torus.

    Parameters
    ----------
    freq_cutoff : int
        Highest retained frequency per axis; 0 degenerates to the
        constant kernel (a zero-variance sanity model).
    dim : int
        Torus dimension.
    truth : GroundTruth
        Spikes (weights, positions) plus optional noise atoms
        (noise_coeffs, noise_positions) entering the observation.
    """

    def __init__(self, freq_cutoff: int, dim: int, truth: GroundTruth):
        if freq_cutoff < 0:
            raise ValueError("freq_cutoff must be >= 0")
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.freq_cutoff = int(freq_cutoff)
        self.dim = dim
        self.radius = TORUS_RADIUS
        self.truth = truth

        self._freqs_1d = np.arange(-self.freq_cutoff, self.freq_cutoff + 1)
        self._n_freq_1d = len(self._freqs_1d)

        atoms = [truth.positions]
        coeffs = [truth.weights]
        if truth.noise_coeffs is not None and len(truth.noise_coeffs):
            atoms.append(truth.noise_positions)
            coeffs.append(truth.noise_coeffs)
        self._atom_positions = np.concatenate(atoms, axis=0)
        self._atom_coeffs = np.concatenate(coeffs)
        if self._atom_positions.shape[1] != dim:
            raise ValueError("ground-truth positions do not match dim")

        n_atoms = len(self._atom_coeffs)
        self.cost_kernel = self._n_freq_1d**dim
        self.cost_inner_y = n_atoms * self.cost_kernel

    # ----- kernel -------------------------------------------------------------

    def _k_1d(self, x):
        # mean of cos(n x) over n in [-fc, fc]; even in x
        return np.mean(np.cos(np.asarray(x, dtype=float)[..., None]
                              * self._freqs_1d), axis=-1)

    def _k_1d_deriv(self, x):
        return np.mean(-self._freqs_1d
                       * np.sin(np.asarray(x, dtype=float)[..., None]
                                * self._freqs_1d), axis=-1)

    def kernel(self, t, t_prime):
        diff = np.asarray(t, dtype=float) - np.asarray(t_prime, dtype=float)
        return np.prod(self._k_1d(diff), axis=-1)

    def grad_kernel(self, t, t_prime):
        diff = np.asarray(t, dtype=float) - np.asarray(t_prime, dtype=float)
        return coordinate_product_grad(self._k_1d(diff), self._k_1d_deriv(diff))

    def inner_y(self, t):
        t = np.asarray(t, dtype=float)
        diff = t[..., None, :] - self._atom_positions
        return np.prod(self._k_1d(diff), axis=-1) @ self._atom_coeffs

    def grad_inner_y(self, t):
        t = np.asarray(t, dtype=float)
        diff = t[..., None, :] - self._atom_positions
        grads = coordinate_product_grad(self._k_1d(diff), self._k_1d_deriv(diff))
        return np.einsum("...ad,a->...d", grads, self._atom_coeffs)

    @cached_property
    def y_norm_sq(self) -> float:
        gram = self.gram(self._atom_positions, self._atom_positions)
        return float(self._atom_coeffs @ gram @ self._atom_coeffs)

    # ----- stochastic surrogates -----------------------------------------------

    def sample_u(self, rng, size):
        return rng.integers(-self.freq_cutoff, self.freq_cutoff + 1,
                            size=(size, self.dim)).astype(float)

    def sample_v(self, rng, size):
        # data side is deterministic for this model
        return np.zeros(size)

    def g(self, t, t_prime, u):
        diff = np.asarray(t, dtype=float) - np.asarray(t_prime, dtype=float)
        phase = np.sum(np.asarray(u, dtype=float) * diff, axis=-1)
        return np.cos(phase)

    def grad_g(self, t, t_prime, u):
        u = np.asarray(u, dtype=float)
        diff = np.asarray(t, dtype=float) - np.asarray(t_prime, dtype=float)
        phase = np.sum(u * diff, axis=-1)
        return -np.sin(phase)[..., None] * u

    def h(self, t, v):
        out = self.inner_y(t)
        shape = np.broadcast_shapes(np.shape(out), np.shape(v))
        return np.broadcast_to(out, shape)

    def grad_h(self, t, v):
        out = self.grad_inner_y(t)
        shape = np.broadcast_shapes(np.shape(out), np.shape(v) + (1,))
        return np.broadcast_to(out, shape)

    # ----- fused paths ----------------------------------------------------------

    def kernel_surrogate(self, t, t_prime, u):
        u = np.asarray(u, dtype=float)
        diff = np.asarray(t, dtype=float) - np.asarray(t_prime, dtype=float)
        phase = np.sum(u * diff, axis=-1)
        return np.cos(phase), -np.sin(phase)[..., None] * u

    def data_surrogate(self, t, v):
        iy, giy = self.data_fit(t)
        return (np.broadcast_to(iy, np.broadcast_shapes(np.shape(iy), np.shape(v))),
                np.broadcast_to(giy, np.broadcast_shapes(np.shape(giy),
                                                         np.shape(v) + (1,))))

    def data_fit(self, t):
        t = np.asarray(t, dtype=float)
        diff = t[..., None, :] - self._atom_positions
        vals = self._k_1d(diff)
        ders = self._k_1d_deriv(diff)
        prods = np.prod(vals, axis=-1)
        grads = coordinate_product_grad(vals, ders)
        return (prods @ self._atom_coeffs,
                np.einsum("...ad,a->...d", grads, self._atom_coeffs))

    # ----- geometry ---------------------------------------------------------------

    def project(self, points):
        return wrap_torus(points)

    def displacement(self, a, b):
        return wrap_torus(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))

    def contains(self, points, tol: float = 1e-12) -> bool:
        pts = np.atleast_2d(points)
        return bool(np.all(np.abs(pts) <= np.pi + tol))

    # ----- bounds --------------------------------------------------------------------

    @cached_property
    def _bounds(self) -> ModelBounds:
        beta_abs = float(np.sum(np.abs(self._atom_coeffs)))
        if self.freq_cutoff == 0:
            g_inf = 1.0
            grad_g_sup = 0.0
            mean_norm = 0.0
            mean_sq = 0.0
        else:
            g_inf = -1.0
            freqs = np.stack(np.meshgrid(*([self._freqs_1d] * self.dim),
                                         indexing="ij"), axis=-1).reshape(-1, self.dim)
            norms = np.sqrt(np.sum(freqs.astype(float)**2, axis=1))
            grad_g_sup = float(np.max(norms))
            mean_norm = float(np.mean(norms))
            mean_sq = float(np.mean(norms**2))
        return ModelBounds(
            g_inf=g_inf,
            g_sup=1.0,
            h_sup=beta_abs,
            grad_g_sup=grad_g_sup,
            grad_h_sup=beta_abs * mean_norm,
            kernel_lip=np.sqrt(mean_sq),
        )

    def bounds(self) -> ModelBounds:
        return self._bounds


def wrap_torus(points: np.ndarray) -> np.ndarray:
    """Reduce coordinates to the fundamental domain [-pi, pi)."""
    return np.mod(np.asarray(points, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
