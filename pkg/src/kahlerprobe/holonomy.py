"""Chart-defined Riemannian manifolds and numerical holonomy.

A manifold is a single coordinate chart: a box domain, a smooth metric
coefficient function, and optionally analytic Christoffel symbols.  Parallel
transport integrates the first-order transport ODE with classical RK4 for
every coordinate basis vector at once, then expresses the transport matrix
in g-orthonormal frames at the endpoints, where it is orthogonal up to the
integration defect.  Holonomy is sampled by transporting families of closed
loops and optionally closing the sample under products and inverses.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    LoopEscapesDomain,
    MetricNotInvertible,
    OutsideDomain,
    StepTooCoarse,
    UnknownManifold,
)

FD_STEP = 1e-5          # finite-difference step for Christoffels
DEFECT_LIMIT = 1e-4     # raw orthogonality defect beyond which results are rejected


@dataclass(frozen=True)
class ManifoldChart:
    """A coordinate chart with metric g_ij(x) on a box domain."""

    dim: int
    metric: callable            # x -> (dim, dim) symmetric positive-definite
    domain: np.ndarray          # (dim, 2) per-axis closed intervals
    christoffel: callable = None  # optional analytic x -> Gamma[k, i, j]
    name: str = "chart"

    def __post_init__(self):
        object.__setattr__(self, "domain", np.array(self.domain, dtype=float))
        self.domain.setflags(write=False)

    def contains(self, x, margin: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.domain[:, 0] + margin)
                    and np.all(x <= self.domain[:, 1] - margin))

    def center(self) -> np.ndarray:
        return 0.5 * (self.domain[:, 0] + self.domain[:, 1])


@dataclass(frozen=True)
class SmoothPath:
    """A parametrized path t in [0, 1] in chart coordinates.

    ``breakpoints`` are parameter values where the velocity may jump
    (rectangle corners); the transport integrator splits there to keep its
    fourth-order accuracy.
    """

    map: callable
    velocity: callable = None
    closed: bool = False
    breakpoints: tuple = ()
    description: dict = field(default_factory=dict)

    def vel(self, t: float) -> np.ndarray:
        if self.velocity is not None:
            return np.asarray(self.velocity(t), dtype=float)
        h = 1e-6
        return (np.asarray(self.map(min(t + h, 1.0)))
                - np.asarray(self.map(max(t - h, 0.0)))) / (min(t + h, 1.0) - max(t - h, 0.0))

    def reversed(self) -> "SmoothPath":
        fwd_map, fwd_vel = self.map, self.velocity
        rev_vel = None if fwd_vel is None else (lambda t: -np.asarray(fwd_vel(1.0 - t)))
        return SmoothPath(
            map=lambda t: fwd_map(1.0 - t),
            velocity=rev_vel,
            closed=self.closed,
            breakpoints=tuple(sorted(1.0 - b for b in self.breakpoints)),
            description={"kind": "reversed", "of": self.description},
        )


def concatenate_paths(paths) -> SmoothPath:
    """Join paths end to end, re-parametrized uniformly over [0, 1]."""
    paths = list(paths)
    m = len(paths)

    def cmap(t):
        s = min(t * m, m - 1e-15)
        k = int(s)
        return paths[k].map(s - k)

    def cvel(t):
        s = min(t * m, m - 1e-15)
        k = int(s)
        return m * np.asarray(paths[k].vel(s - k))

    breaks = []
    for k, p in enumerate(paths):
        if k > 0:
            breaks.append(k / m)
        breaks.extend((k + b) / m for b in p.breakpoints)
    start = np.asarray(paths[0].map(0.0))
    end = np.asarray(paths[-1].map(1.0))
    return SmoothPath(map=cmap, velocity=cvel,
                      closed=bool(np.max(np.abs(start - end)) < 1e-12),
                      breakpoints=tuple(sorted(breaks)),
                      description={"kind": "concatenation",
                                   "parts": [p.description for p in paths]})


@dataclass(frozen=True)
class HolonomySample:
    """A loop together with the orthogonal matrix it induces on the
    orthonormal frame at the base point."""

    base_point: np.ndarray
    loop: SmoothPath
    matrix: np.ndarray
    ode_steps: int
    orthogonality_defect: float
    word: tuple = ()


# -- Christoffel symbols ------------------------------------------------------

def _metric_at(chart: ManifoldChart, x) -> np.ndarray:
    g = np.asarray(chart.metric(np.asarray(x, dtype=float)), dtype=float)
    return g


def christoffel(chart: ManifoldChart, x) -> np.ndarray:
    """Gamma[k, i, j] at x, analytic when available, else central differences."""
    x = np.asarray(x, dtype=float)
    if chart.christoffel is not None:
        return np.asarray(chart.christoffel(x), dtype=float)
    h = FD_STEP
    if not chart.contains(x, margin=2.0 * h):
        raise OutsideDomain(f"{x} too close to the domain boundary for step {h}")
    d = chart.dim
    dg = np.empty((d, d, d))  # dg[l, i, j] = d g_ij / d x_l
    for l in range(d):
        e = np.zeros(d)
        e[l] = h
        dg[l] = (_metric_at(chart, x + e) - _metric_at(chart, x - e)) / (2.0 * h)
    g = _metric_at(chart, x)
    try:
        ginv = np.linalg.inv(g)
    except np.linalg.LinAlgError as exc:
        raise MetricNotInvertible(str(exc)) from exc
    # Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij), term[i, j, l]
    term = dg + np.swapaxes(dg, 0, 1) - np.moveaxis(dg, 0, 2)
    return 0.5 * np.einsum("kl,ijl->kij", ginv, term)


def orthonormal_frame(chart: ManifoldChart, x) -> np.ndarray:
    """Columns form a g(x)-orthonormal basis (Gram-Schmidt on coordinate
    basis vectors, realized as the inverse transposed Cholesky factor)."""
    g = _metric_at(chart, x)
    try:
        L = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise MetricNotInvertible(f"metric not positive definite at {x}") from exc
    d = chart.dim
    return np.linalg.solve(L, np.eye(d)).T  # L^{-T}, upper triangular


# -- parallel transport -------------------------------------------------------

def _transport_coordinate(chart: ManifoldChart, path: SmoothPath, steps: int) -> np.ndarray:
    """Coordinate-frame transport matrix by segment-wise RK4 on V' = -M(t) V."""
    d = chart.dim

    def M(t):
        x = np.asarray(path.map(t), dtype=float)
        if not chart.contains(x):
            raise OutsideDomain(f"path leaves the domain at t={t}: {x}")
        gamma = christoffel(chart, x)
        return np.einsum("kij,i->kj", gamma, path.vel(t))

    knots = sorted({0.0, 1.0, *(b for b in path.breakpoints if 0.0 < b < 1.0)})
    V = np.eye(d)
    for t0, t1 in zip(knots[:-1], knots[1:]):
        n = max(2, int(math.ceil(steps * (t1 - t0))))
        h = (t1 - t0) / n
        # keep stage evaluations strictly inside the segment so that the
        # one-sided velocity at corners is picked up correctly
        nudge = 1e-9 * (t1 - t0)
        Ms = lambda t: M(min(max(t, t0 + nudge), t1 - nudge))
        t = t0
        for _ in range(n):
            k1 = -Ms(t) @ V
            k2 = -Ms(t + 0.5 * h) @ (V + 0.5 * h * k1)
            k3 = -Ms(t + 0.5 * h) @ (V + 0.5 * h * k2)
            k4 = -Ms(t + h) @ (V + h * k3)
            V = V + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
    return V


def transport_with_defect(chart: ManifoldChart, path: SmoothPath, steps: int):
    """Orthonormal-frame transport matrix and its raw orthogonality defect."""
    if steps < 100:
        raise ValueError("steps must be >= 100")
    P = _transport_coordinate(chart, path, steps)
    p = np.asarray(path.map(0.0), dtype=float)
    q = np.asarray(path.map(1.0), dtype=float)
    Fp = orthonormal_frame(chart, p)
    Fq = orthonormal_frame(chart, q)
    A = np.linalg.solve(Fq, P @ Fp)
    defect = float(np.max(np.abs(A.T @ A - np.eye(chart.dim))))
    return A, defect


def parallel_transport(chart: ManifoldChart, path: SmoothPath, steps: int) -> np.ndarray:
    """Orthonormal-frame parallel transport along the path."""
    A, defect = transport_with_defect(chart, path, steps)
    if defect > DEFECT_LIMIT:
        raise StepTooCoarse(f"orthogonality defect {defect:.3e}; raise steps")
    return A


def nearest_orthogonal(A: np.ndarray) -> np.ndarray:
    """Polar factor of A: the nearest orthogonal matrix."""
    U, _, Vt = np.linalg.svd(A)
    return U @ Vt


# -- loop families and holonomy sampling --------------------------------------

def _check_inside(chart, path, n_probe=256):
    for t in np.linspace(0.0, 1.0, n_probe):
        if not chart.contains(np.asarray(path.map(t))):
            raise LoopEscapesDomain(
                f"loop leaves the domain of {chart.name} at t={t:.3f}")


def _segment(a, b, description):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return SmoothPath(map=lambda t: a + t * (b - a),
                      velocity=lambda t: b - a,
                      breakpoints=(), description=description)


def rectangle_loop(p, axis_i: int, axis_j: int, scale: float) -> SmoothPath:
    """The coordinate rectangle loop of side ``scale`` in the (i, j)-plane."""
    p = np.asarray(p, dtype=float)
    ei = np.zeros_like(p)
    ej = np.zeros_like(p)
    ei[axis_i] = scale
    ej[axis_j] = scale
    corners = [p, p + ei, p + ei + ej, p + ej, p]
    desc = {"kind": "rectangle", "base": p.tolist(), "axes": [axis_i, axis_j],
            "scale": scale}
    loop = concatenate_paths(
        [_segment(corners[k], corners[k + 1], desc) for k in range(4)])
    return SmoothPath(map=loop.map, velocity=loop.velocity, closed=True,
                      breakpoints=loop.breakpoints, description=desc)


def fourier_loop(p, coeffs_a: np.ndarray, coeffs_b: np.ndarray) -> SmoothPath:
    """Closed curve p + sum_k (a_k sin 2pi k t + b_k cos 2pi k t) - sum_k b_k."""
    p = np.asarray(p, dtype=float)
    a = np.asarray(coeffs_a, dtype=float)  # (K, dim)
    b = np.asarray(coeffs_b, dtype=float)
    shift = b.sum(axis=0)

    def fmap(t):
        x = p - shift
        for k in range(a.shape[0]):
            w = 2.0 * math.pi * (k + 1)
            x = x + a[k] * math.sin(w * t) + b[k] * math.cos(w * t)
        return x

    def fvel(t):
        v = np.zeros_like(p)
        for k in range(a.shape[0]):
            w = 2.0 * math.pi * (k + 1)
            v = v + w * (a[k] * math.cos(w * t) - b[k] * math.sin(w * t))
        return v

    return SmoothPath(map=fmap, velocity=fvel, closed=True,
                      description={"kind": "fourier", "base": p.tolist(),
                                   "a": a.tolist(), "b": b.tolist()})


def loop_family(chart: ManifoldChart, p, kind: str, count: int, scale: float,
                seed: int = 0) -> list:
    """Generate closed loops based at p.

    ``coordinate_rectangles``: one rectangle per axis pair (count ignored
    beyond the number of pairs times repeats with alternating orientation).
    ``fourier_random``: seeded closed Fourier curves through p.
    """
    p = np.asarray(p, dtype=float)
    if not chart.contains(p):
        raise OutsideDomain(f"base point {p} outside {chart.name}")
    loops = []
    if kind == "coordinate_rectangles":
        pairs = list(itertools.combinations(range(chart.dim), 2))
        for idx in range(count):
            i, j = pairs[idx % len(pairs)]
            s = scale if (idx // len(pairs)) % 2 == 0 else -scale
            loops.append(rectangle_loop(p, i, j, s))
    elif kind == "fourier_random":
        rng = np.random.default_rng(seed)
        for _ in range(count):
            a = rng.uniform(-scale, scale, size=(3, chart.dim)) / np.array([[1.0], [2.0], [3.0]])
            b = rng.uniform(-scale, scale, size=(3, chart.dim)) / np.array([[1.0], [2.0], [3.0]])
            loops.append(fourier_loop(p, a, b))
    else:
        raise ValueError(f"unknown loop family kind {kind!r}")
    for loop in loops:
        _check_inside(chart, loop)
    return loops


def holonomy_samples(chart: ManifoldChart, p, loops, steps: int,
                     word_length: int = 1) -> list:
    """Transport every loop and optionally close under products/inverses.

    Products are formed on the polar-corrected matrices; their loops are the
    corresponding path concatenations, so every sample stays independently
    replayable.
    """
    p = np.asarray(p, dtype=float)
    base = []
    for i, loop in enumerate(loops):
        if not loop.closed:
            raise ValueError("holonomy sampling needs closed loops")
        if np.max(np.abs(np.asarray(loop.map(0.0)) - p)) > 1e-9:
            raise ValueError("loop is not based at p")
        A, defect = transport_with_defect(chart, loop, steps)
        if defect >= DEFECT_LIMIT:
            raise StepTooCoarse(
                f"orthogonality defect {defect:.3e} >= {DEFECT_LIMIT}; raise steps")
        base.append(HolonomySample(p, loop, nearest_orthogonal(A), steps,
                                   defect, word=(i + 1,)))
    if word_length <= 1:
        return base

    def seen(mat, pool):
        return any(np.max(np.abs(mat - s.matrix)) < 1e-9 for s in pool)

    # generators and their inverses, indexed +-(i+1)
    gens = {}
    for i, s in enumerate(base):
        gens[i + 1] = s
        gens[-(i + 1)] = HolonomySample(p, s.loop.reversed(), s.matrix.T,
                                        steps, s.orthogonality_defect,
                                        word=(-(i + 1),))
    out = list(base)
    frontier = [((i + 1,), s) for i, s in enumerate(base)]
    frontier += [((-(i + 1),), gens[-(i + 1)]) for i in range(len(base))]
    for s in (gens[-(i + 1)] for i in range(len(base))):
        if not seen(s.matrix, out):
            out.append(s)
    for _ in range(word_length - 1):
        new_frontier = []
        for word, s in frontier:
            for g_idx, g in gens.items():
                if g_idx == -word[-1]:
                    continue  # immediate cancellation
                mat = s.matrix @ g.matrix
                if seen(mat, out):
                    continue
                sample = HolonomySample(
                    p, concatenate_paths([g.loop, s.loop]), mat, steps,
                    max(s.orthogonality_defect, g.orthogonality_defect),
                    word=word + (g_idx,))
                out.append(sample)
                new_frontier.append((sample.word, sample))
        frontier = new_frontier
    return out


# -- catalog charts -----------------------------------------------------------

def _conformal_sphere_metric(d):
    def metric(x):
        lam = 2.0 / (1.0 + float(np.dot(x, x)))
        return (lam * lam) * np.eye(d)
    return metric


def _conformal_sphere_christoffel(d):
    # g = e^{2f} delta with f = log 2 - log(1+|x|^2):
    # Gamma^k_ij = delta_ki w_j + delta_kj w_i - delta_ij w_k, w = grad f
    def gamma(x):
        w = -2.0 * x / (1.0 + float(np.dot(x, x)))
        G = np.zeros((d, d, d))
        I = np.eye(d)
        G += np.einsum("ki,j->kij", I, w)
        G += np.einsum("kj,i->kij", I, w)
        G -= np.einsum("ij,k->kij", I, w)
        return G
    return gamma


def _fs_complexify(u):
    return np.array([u[0] + 1j * u[1], u[2] + 1j * u[3]])


def _fs_realify_vec(v):
    return np.array([v[0].real, v[0].imag, v[1].real, v[1].imag])


def fubini_study_metric(x):
    """Real form of the Fubini-Study metric in the affine chart, normalized
    to the identity at the origin.  Coordinates are (x1, y1, x2, y2) with
    z_a = x_a + i y_a."""
    z = _fs_complexify(x)
    r2 = float(np.dot(x, x))
    H = ((1.0 + r2) * np.eye(2) - np.outer(z, z.conj())) / (1.0 + r2) ** 2
    return _fs_realify_mat(H)


def _fs_realify_mat(Hc):
    # real form of a Hermitian coefficient matrix; the block sign is fixed
    # so that multiplication by i (the canonical block structure) is
    # parallel for the resulting metric
    g = np.empty((4, 4))
    for a in range(2):
        for b in range(2):
            A = Hc[a, b].real
            B = Hc[a, b].imag
            g[2 * a:2 * a + 2, 2 * b:2 * b + 2] = [[A, -B], [B, A]]
    return g


def fubini_study_christoffel(x):
    """Analytic Christoffels of the Fubini-Study chart, from exact real
    derivatives of the Hermitian coefficient matrix H = ((1+r2) I -
    z zbar^T) / (1+r2)^2."""
    z = _fs_complexify(x)
    r2 = float(np.dot(x, x))
    D = 1.0 + r2
    zz = np.outer(z, z.conj())
    dg = np.empty((4, 4, 4))  # dg[l, i, j] = d g_ij / d x_l
    I2 = np.eye(2)
    for l in range(4):
        a, part = divmod(l, 2)
        e = np.zeros(2, dtype=complex)
        e[a] = 1.0
        dz = e if part == 0 else 1j * e       # dz/dx_l resp. dz/dy_l
        dr2 = 2.0 * x[l]
        dH = (-dr2 / D**2 * I2
              - (np.outer(dz, z.conj()) + np.outer(z, np.conj(dz))) / D**2
              + 2.0 * dr2 * zz / D**3)
        dg[l] = _fs_realify_mat(dH)
    g = fubini_study_metric(x)
    ginv = np.linalg.inv(g)
    term = dg + np.swapaxes(dg, 0, 1) - np.moveaxis(dg, 0, 2)
    return 0.5 * np.einsum("kl,ijl->kij", ginv, term)


def _product_s2_metric(x):
    g = np.zeros((4, 4))
    for blk in range(2):
        xx = x[2 * blk:2 * blk + 2]
        lam = 2.0 / (1.0 + float(np.dot(xx, xx)))
        g[2 * blk:2 * blk + 2, 2 * blk:2 * blk + 2] = (lam * lam) * np.eye(2)
    return g


def _product_s2_christoffel(x):
    G = np.zeros((4, 4, 4))
    g2 = _conformal_sphere_christoffel(2)
    for blk in range(2):
        sl = slice(2 * blk, 2 * blk + 2)
        G[sl, sl, sl] = g2(x[sl])
    return G


CATALOG_NAMES = ("flat_torus_4", "round_sphere_2", "round_sphere_4",
                 "fubini_study_cp2", "product_s2_s2")


def catalog(name: str) -> ManifoldChart:
    """Built-in analytic test charts."""
    if name == "flat_torus_4":
        return ManifoldChart(4, lambda x: np.eye(4),
                             [[0.0, 1.0]] * 4,
                             christoffel=lambda x: np.zeros((4, 4, 4)),
                             name=name)
    if name == "round_sphere_2":
        return ManifoldChart(2, _conformal_sphere_metric(2),
                             [[-4.0, 4.0]] * 2,
                             christoffel=_conformal_sphere_christoffel(2),
                             name=name)
    if name == "round_sphere_4":
        return ManifoldChart(4, _conformal_sphere_metric(4),
                             [[-4.0, 4.0]] * 4,
                             christoffel=_conformal_sphere_christoffel(4),
                             name=name)
    if name == "fubini_study_cp2":
        return ManifoldChart(4, fubini_study_metric,
                             [[-0.5, 0.5]] * 4,
                             christoffel=fubini_study_christoffel,
                             name=name)
    if name == "product_s2_s2":
        return ManifoldChart(4, _product_s2_metric,
                             [[-4.0, 4.0]] * 4,
                             christoffel=_product_s2_christoffel,
                             name=name)
    raise UnknownManifold(f"no catalog chart named {name!r}")
