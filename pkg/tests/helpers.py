"""Shared randomized-state generators and independent oracles for tests."""

import numpy as np

from qdp.qcore import DensityMatrix, PureState, trace_distance


def random_unitary(rng, dim):
    """Haar-ish unitary from the QR decomposition of a Ginibre matrix."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_pure(rng, dim) -> PureState:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return PureState(v / np.linalg.norm(v))


def random_density(rng, dim) -> DensityMatrix:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


def pair_within(rng, dim, max_trace_dist):
    """Two random states at trace distance uniformly drawn in (0, max]."""
    rho = random_density(rng, dim)
    other = random_density(rng, dim)
    gap = trace_distance(rho, other)
    target = rng.uniform(0.0, max_trace_dist)
    t = min(1.0, target / gap) if gap > 0 else 0.0
    mixed = DensityMatrix((1.0 - t) * rho.matrix + t * other.matrix)
    return rho, mixed


def simplex_vertices(lower, upper):
    """Vertices of {l <= x <= u, sum x = 1} for K = 2 or 3, by enumeration.

    Fix K-1 coordinates at a box bound each and solve the last from the sum
    constraint; keep the feasible ones. Linear objectives attain their
    optimum on this set.
    """
    k = len(lower)
    verts = []
    if k == 2:
        choices = [(0,), (1,)]
    elif k == 3:
        choices = [(0, 1), (0, 2), (1, 2)]
    else:
        raise ValueError("vertex enumeration implemented for K = 2, 3 only")
    for fixed in choices:
        free = [i for i in range(k) if i not in fixed]
        assert len(free) == 1
        import itertools

        for bounds in itertools.product(*[(lower[i], upper[i]) for i in fixed]):
            x = np.zeros(k)
            for i, b in zip(fixed, bounds):
                x[i] = b
            x[free[0]] = 1.0 - sum(bounds)
            if lower[free[0]] - 1e-12 <= x[free[0]] <= upper[free[0]] + 1e-12:
                verts.append(x)
    return verts


def parameter_shift_loss_gradient(circuit, theta, examples, batch_class1):
    """Analytic gradient of the squared loss via the pi/2 shift identity.

    Each expectation is a single-frequency trigonometric function of every
    angle, so dy/dt = (y(t + pi/2) - y(t - pi/2)) / 2 exactly; the loss
    gradient follows by the chain rule. Independent of finite differences.
    """
    x = np.stack([ex.features for ex in examples])
    c = np.array([ex.label for ex in examples], dtype=float)
    y = batch_class1(circuit, theta, x)
    grad = np.zeros_like(np.asarray(theta, dtype=float))
    for j in range(len(theta)):
        up = np.array(theta, dtype=float)
        up[j] += np.pi / 2
        down = np.array(theta, dtype=float)
        down[j] -= np.pi / 2
        dy = (batch_class1(circuit, up, x) - batch_class1(circuit, down, x)) / 2.0
        grad[j] = np.mean(2.0 * (y - c) * dy)
    return grad
