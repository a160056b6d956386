"""Composite trapezoid quadrature on uniform grids.

Everything here works on plain numpy arrays sampled at ``n + 1`` equally
spaced nodes with spacing ``dx``.
"""

import numpy as np

# Extended closed formula with O(h^4) error (Gregory end weights).
_GREGORY_ENDS = np.array([3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0])


def trapezoid_weights(n_nodes, dx):
    w = np.full(n_nodes, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


def trapezoid(values, dx, corrected=False):
    """Integrate samples over the whole grid.

    With ``corrected=True`` the three end weights on each side are replaced
    by Gregory weights, which lifts the error from O(dx^2) to O(dx^4) for
    smooth integrands. Needs at least 6 nodes.
    """
    values = np.asarray(values, dtype=float)
    if not corrected:
        return dx * (values.sum() - 0.5 * (values[0] + values[-1]))
    if values.size < 6:
        raise ValueError("corrected trapezoid needs at least 6 nodes")
    interior = values[3:-3].sum()
    ends = _GREGORY_ENDS @ values[:3] + _GREGORY_ENDS @ values[-1:-4:-1]
    return dx * (interior + ends)


def suffix_trapezoid(values, dx, dvalues=None):
    """Return S[i] = integral of the samples from node i to the last node.

    If ``dvalues`` (the derivative samples) is given, the Euler-Maclaurin
    end correction ``-dx^2/12 * (f'(b) - f'(x_i))`` is applied.
    """
    values = np.asarray(values, dtype=float)
    panels = 0.5 * dx * (values[:-1] + values[1:])
    out = np.zeros_like(values)
    out[:-1] = np.cumsum(panels[::-1])[::-1]
    if dvalues is not None:
        dvalues = np.asarray(dvalues, dtype=float)
        out -= dx * dx / 12.0 * (dvalues[-1] - dvalues)
    return out


def cumulative_trapezoid(values, dx):
    """Return C[i] = integral of the samples from node 0 to node i."""
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * dx * (values[:-1] + values[1:]))
    return out
