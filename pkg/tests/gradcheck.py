"""Central finite-difference check of the training-loss gradient."""

import jax.numpy as jnp
import numpy as np
from jax.flatten_util import ravel_pytree

from anisocal.energy import _consts, trainables
from anisocal.training import _loss_fn, _norm_vec, _order, batch_arrays, loss_gradient

EPS = np.finfo(float).eps


def fd_loss_gradient(model, batch, norms, weights):
    """Exact gradient, finite-difference gradient and the per-component FD roundoff level.

    The step is ``1e-5 |x| + 1e-8``. Rounding in the loss value limits central
    differences to about ``eps |L| / h``; the returned noise level is 100 times that.
    """
    order = _order(weights)
    arrays = batch_arrays(batch, order >= 2)
    consts = _consts(model)
    fn = _loss_fn(model.kind, order, weights)
    flat, unravel = ravel_pytree(trainables(model))
    x0 = np.asarray(flat, dtype=float)

    def total(x):
        return float(fn(unravel(jnp.asarray(x)), consts, arrays, _norm_vec(norms))["total"])

    L0 = abs(total(x0))
    fd = np.empty_like(x0)
    noise = np.empty_like(x0)
    for k in range(x0.size):
        h = 1e-5 * abs(x0[k]) + 1e-8
        xp, xm = x0.copy(), x0.copy()
        xp[k] += h
        xm[k] -= h
        fd[k] = (total(xp) - total(xm)) / (2 * h)
        noise[k] = 100 * EPS * L0 / h
    exact = np.asarray(ravel_pytree(loss_gradient(model, batch, norms, weights))[0])
    return exact, fd, noise


def check(exact, fd, noise, rtol=1e-4):
    """Worst ``|exact - fd| / (rtol |fd| + noise)`` (pass iff <= 1) and the worst
    plain relative error over components resolved well above the noise."""
    ratio = float(np.max(np.abs(exact - fd) / (rtol * np.abs(fd) + noise)))
    resolved = np.abs(fd) > 1e4 * noise
    rel = float(np.max(np.abs(exact - fd)[resolved] / np.abs(fd)[resolved])) if resolved.any() else 0.0
    return ratio, rel, int(resolved.sum())
