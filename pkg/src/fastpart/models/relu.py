"""Two-layer ReLU network as a sparse-measure problem.

A width-p network ``x -> sum_j sign_j w_j relu(<t_j, x>)`` is the
embedding of a signed particle measure through the feature map
``phi_t(x) = relu(<t, x>)``, seen in the empirical inner product
``<a, b> = mean_i a(x_i) b(x_i)`` over a regression sample.  Squared
loss plus a total-mass penalty is then the same objective the other
models use, so the particle solver applies unchanged up to two quirks:

* the kernel-side and data-side draws coincide (one random sample
  index serves both), which the joint sampler reflects;
* relu is positively one-homogeneous, so instead of clipping positions
  to the ball the model rescales: positions outside are pulled back to
  the sphere and their weights absorb the norm, leaving the network
  function unchanged.

The relu derivative at the kink is taken to be 0.  Gradient identities
therefore hold only almost everywhere; ``smooth_at`` reports whether a
point is safely away from every kink so derivative checks can skip.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np

from .base import FeatureModel, ModelBounds


def sample_regression_data(n: int, dim: int, rng: np.random.Generator,
                           teacher_width: int = 4, noise_scale: float = 0.05):
    """Synthetic regression pair (X, y) from a planted ReLU teacher."""
    if n <= 0 or dim < 1:
        raise ValueError("need n >= 1 and dim >= 1")
    x = rng.normal(size=(n, dim))
    x /= np.sqrt(dim)
    directions = rng.normal(size=(teacher_width, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    coeffs = rng.choice([-1.0, 1.0], size=teacher_width) * (
        0.5 + rng.random(teacher_width))
    y = np.maximum(x @ directions.T, 0.0) @ coeffs
    y = y + noise_scale * rng.normal(size=n)
    return x, y


class ReluFeatureModel(FeatureModel):
    """Empirical ReLU feature model over a regression sample.

    Parameters
    ----------
    x : array, shape (N, d)
        Inputs.
    y : array, shape (N,)
        Regression targets.
    radius : float
        Ball radius for the particle positions (1 by the homogeneous
        rescaling convention).
    """

    def __init__(self, x, y, radius: float = 1.0):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        if len(x) != len(y) or len(y) == 0:
            raise ValueError("x and y must be nonempty with matching length")
        self.x = x
        self.y = y
        self.dim = x.shape[1]
        self.radius = float(radius)
        self.n_data = len(y)
        self.cost_kernel = self.n_data
        self.cost_inner_y = self.n_data

    # ----- exact quantities ----------------------------------------------------

    def kernel(self, t, t_prime):
        ft = np.maximum(np.asarray(t, dtype=float) @ self.x.T, 0.0)
        fs = np.maximum(np.asarray(t_prime, dtype=float) @ self.x.T, 0.0)
        return np.mean(ft * fs, axis=-1)

    def grad_kernel(self, t, t_prime):
        zt = np.asarray(t, dtype=float) @ self.x.T
        fs = np.maximum(np.asarray(t_prime, dtype=float) @ self.x.T, 0.0)
        active = (zt > 0.0) * fs
        return active @ self.x / self.n_data

    def gram(self, t, t_prime):
        ft = np.maximum(np.atleast_2d(np.asarray(t, dtype=float)) @ self.x.T, 0.0)
        fs = np.maximum(np.atleast_2d(np.asarray(t_prime, dtype=float)) @ self.x.T, 0.0)
        return ft @ fs.T / self.n_data

    def gram_grad(self, t, t_prime):
        t = np.atleast_2d(np.asarray(t, dtype=float))
        s = np.atleast_2d(np.asarray(t_prime, dtype=float))
        mask = (t @ self.x.T > 0.0).astype(float)
        fs = np.maximum(s @ self.x.T, 0.0)
        return np.einsum("in,jn,nd->ijd", mask, fs, self.x) / self.n_data

    def inner_y(self, t):
        ft = np.maximum(np.asarray(t, dtype=float) @ self.x.T, 0.0)
        return np.mean(ft * self.y, axis=-1)

    def grad_inner_y(self, t):
        zt = np.asarray(t, dtype=float) @ self.x.T
        return ((zt > 0.0) * self.y) @ self.x / self.n_data

    @cached_property
    def y_norm_sq(self) -> float:
        return float(np.mean(self.y**2))

    # ----- stochastic surrogates -------------------------------------------------

    def sample_u(self, rng, size):
        return rng.integers(self.n_data, size=size)

    def sample_v(self, rng, size):
        return rng.integers(self.n_data, size=size)

    def sample_uv(self, rng, size):
        # a single data index feeds both sides
        idx = rng.integers(self.n_data, size=size)
        return idx, idx

    def g(self, t, t_prime, u):
        xu = self.x[np.asarray(u, dtype=int)]
        ft = np.maximum(np.sum(np.asarray(t, dtype=float) * xu, axis=-1), 0.0)
        fs = np.maximum(np.sum(np.asarray(t_prime, dtype=float) * xu, axis=-1), 0.0)
        return ft * fs

    def grad_g(self, t, t_prime, u):
        xu = self.x[np.asarray(u, dtype=int)]
        zt = np.sum(np.asarray(t, dtype=float) * xu, axis=-1)
        fs = np.maximum(np.sum(np.asarray(t_prime, dtype=float) * xu, axis=-1), 0.0)
        return ((zt > 0.0) * fs)[..., None] * xu

    def h(self, t, v):
        v = np.asarray(v, dtype=int)
        xv = self.x[v]
        ft = np.maximum(np.sum(np.asarray(t, dtype=float) * xv, axis=-1), 0.0)
        return ft * self.y[v]

    def grad_h(self, t, v):
        v = np.asarray(v, dtype=int)
        xv = self.x[v]
        zt = np.sum(np.asarray(t, dtype=float) * xv, axis=-1)
        return ((zt > 0.0) * self.y[v])[..., None] * xv

    # ----- geometry ------------------------------------------------------------------

    def finalize_positions(self, weights, raw_positions):
        norms = np.sqrt(np.sum(raw_positions**2, axis=-1))
        outside = norms > self.radius
        if not np.any(outside):
            return weights, raw_positions
        scale = np.where(outside, self.radius / np.where(norms > 0, norms, 1.0), 1.0)
        new_pos = raw_positions * scale[:, None]
        new_w = weights * np.where(outside, norms / self.radius, 1.0)
        return new_w, new_pos

    def smooth_at(self, t, step: float = 0.0) -> bool:
        t = np.asarray(t, dtype=float)
        z = np.abs(t @ self.x.T)
        margin = step * np.linalg.norm(self.x, axis=1) + 1e-12
        return bool(np.all(z > margin))

    # ----- bounds ----------------------------------------------------------------------

    @cached_property
    def _bounds(self) -> ModelBounds:
        xnorm = np.linalg.norm(self.x, axis=1)
        feat_max = self.radius * xnorm
        return ModelBounds(
            g_inf=0.0,
            g_sup=float(np.max(feat_max**2)),
            h_sup=float(np.max(feat_max * np.abs(self.y))),
            grad_g_sup=float(np.max(xnorm * feat_max)),
            grad_h_sup=float(np.max(xnorm * np.abs(self.y))),
            kernel_lip=float(np.sqrt(np.mean(xnorm**2))),
        )

    def bounds(self) -> ModelBounds:
        return self._bounds
