"""Composite Simpson quadrature on regular subdivisions."""

import numpy as np


def simpson_weights(n_nodes, step):
    """Weights of the composite Simpson rule for ``n_nodes`` equispaced nodes.

    ``n_nodes`` must be odd (an even number of sub-intervals).
    """
    if n_nodes < 3 or n_nodes % 2 == 0:
        raise ValueError(
            f"Simpson's rule needs an odd number of nodes >= 3, got {n_nodes}")
    w = np.ones(n_nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (step / 3.0)


def simpson(values, step, axis=-1):
    """Composite Simpson integral of samples taken on a regular grid.

    Parameters
    ----------
    values : array_like
        Integrand values at ``p + 1`` equispaced nodes, ``p`` even.
    step : float
        Node spacing.
    axis : int, optional
        Axis holding the nodes.

    Returns
    -------
    float or numpy.ndarray
    """
    values = np.asarray(values, dtype=float)
    w = simpson_weights(values.shape[axis], step)
    return np.tensordot(np.moveaxis(values, axis, -1), w, axes=([-1], [0]))
