"""Payoff matrices, mixed actions, target sets and their expansion distances.

All types are immutable after construction and every operation is pure, so
they are safe to share across concurrent runs.
"""

from __future__ import annotations

import itertools

import numpy as np

SUPPORTED_NORMS = (1, 2, np.inf)

# kind tags for TargetSet
NEGATIVE_ORTHANT = "negative_orthant"
SINGLETON = "singleton"
HALF_LINE_BELOW = "half_line_below"
HALF_LINE_ABOVE = "half_line_above"
POLYTOPE = "polytope"


class GeometryError(ValueError):
    """Invalid geometric data (bad shapes, non-finite entries, bad norms)."""


class DimensionMismatch(GeometryError):
    """Operands with incompatible dimensions."""


def _as_finite_array(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise GeometryError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name} must have finite entries")
    return arr


class PayoffMatrix:
    """One round's choice of the opponent: a payoff column per action.

    ``entries`` has shape (d, A); column ``a`` is the payoff vector the
    decision-maker receives (in expectation) for playing action ``a``.
    """

    __slots__ = ("entries",)

    def __init__(self, entries):
        arr = _as_finite_array(entries, "payoff matrix")
        if arr.ndim != 2:
            raise GeometryError(f"payoff matrix must be 2-D, got shape {arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    def __setattr__(self, name, value):
        raise AttributeError("PayoffMatrix is immutable")

    @property
    def dim(self):
        return self.entries.shape[0]

    @property
    def n_actions(self):
        return self.entries.shape[1]

    def column(self, a):
        return self.entries[:, a]

    def flat(self):
        """Column-stacked vector in R^{dA}, the ambient space of K."""
        return self.entries.ravel(order="F")

    def __eq__(self, other):
        return isinstance(other, PayoffMatrix) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    def __repr__(self):
        return f"PayoffMatrix({self.entries.tolist()})"


class MixedAction:
    """A point of the simplex over the decision-maker's actions.

    Weights are clipped of floating-point dust and renormalized on
    construction; genuinely negative weights are rejected.
    """

    __slots__ = ("weights",)

    _NEG_TOL = 1e-9

    def __init__(self, weights):
        arr = _as_finite_array(weights, "mixed action")
        if arr.ndim != 1:
            raise GeometryError(f"mixed action must be 1-D, got shape {arr.shape}")
        if np.min(arr) < -self._NEG_TOL:
            raise GeometryError(f"mixed action has negative weight {np.min(arr)}")
        arr = np.maximum(arr, 0.0)
        total = arr.sum()
        if total <= 0.0:
            raise GeometryError("mixed action weights sum to zero")
        arr = arr / total
        arr.setflags(write=False)
        object.__setattr__(self, "weights", arr)

    def __setattr__(self, name, value):
        raise AttributeError("MixedAction is immutable")

    @classmethod
    def uniform(cls, n_actions):
        return cls(np.full(n_actions, 1.0 / n_actions))

    @classmethod
    def pure(cls, action, n_actions):
        w = np.zeros(n_actions)
        w[action] = 1.0
        return cls(w)

    @property
    def n_actions(self):
        return self.weights.shape[0]

    def sample(self, rng):
        """Draw an action index; used only by the demonstration sampling mode."""
        return int(rng.choice(self.n_actions, p=self.weights))

    def __eq__(self, other):
        return isinstance(other, MixedAction) and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())

    def __repr__(self):
        return f"MixedAction({self.weights.tolist()})"


def combine(x, m):
    """Expected payoff of playing mixed action ``x`` against matrix ``m``.

    Returns sum_a x_a m_a, a vector in R^d; bilinear in both arguments.
    """
    if x.n_actions != m.n_actions:
        raise DimensionMismatch(
            f"mixed action has {x.n_actions} actions, matrix has {m.n_actions}"
        )
    return m.entries @ x.weights


def project_to_simplex(v):
    """Euclidean projection onto the probability simplex (sort-based, exact)."""
    v = _as_finite_array(v, "vector")
    if v.ndim != 1:
        raise GeometryError("simplex projection expects a 1-D vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    cond = u - css / idx > 0
    rho = idx[cond][-1]
    theta = css[rho - 1] / rho
    return MixedAction(np.maximum(v - theta, 0.0))


def _segment_distance_candidates(a, b, p):
    """Candidate parameters t for min_t ||a + t(b-a)||_p over t in [0,1].

    The objective is piecewise linear (p in {1, inf}) or piecewise smooth
    (p = 2) in t; minima lie at endpoints, coordinate zero crossings, or
    crossings |e_i| = |e_j|.
    """
    d = a - b  # e(t) = a + t(b - a); de/dt = b - a
    cands = [0.0, 1.0]
    dim = a.size
    for i in range(dim):
        if d[i] != 0.0:
            cands.append(a[i] / d[i])  # e_i(t) = 0
        for j in range(i + 1, dim):
            for s in (1.0, -1.0):
                denom = d[i] - s * d[j]
                if denom != 0.0:
                    cands.append((a[i] - s * a[j]) / denom)  # e_i = +-e_j
    if p == 2:
        denom = d @ d
        if denom > 0.0:
            cands.append((a @ d) / denom)
    return [t for t in cands if 0.0 <= t <= 1.0]


def _point_to_segment(r, v0, v1, p):
    a = r - v0
    b = r - v1
    best = np.inf
    for t in _segment_distance_candidates(a, b, p):
        e = a + t * (b - a)
        best = min(best, float(np.linalg.norm(e, ord=p)))
    return best


def _projected_gradient_hull(r, vertices, tol=1e-9, max_iter=10_000):
    """min_{lambda in simplex} ||V lambda - r||_2 via accelerated projected gradient.

    Returns (distance, closest point). Vertices has shape (n, d).
    """
    V = vertices.T  # (d, n)
    n = vertices.shape[0]
    if n == 1:
        z = vertices[0]
        return float(np.linalg.norm(z - r)), z
    lam = np.full(n, 1.0 / n)
    lip = np.linalg.norm(V, ord=2) ** 2
    if lip == 0.0:
        z = V @ lam
        return float(np.linalg.norm(z - r)), z
    step = 1.0 / lip
    y = lam.copy()
    t_acc = 1.0
    prev_obj = np.inf
    for _ in range(max_iter):
        grad = V.T @ (V @ y - r)
        lam_new = project_to_simplex(y - step * grad).weights
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc))
        y = lam_new + ((t_acc - 1.0) / t_new) * (lam_new - lam)
        lam, t_acc = lam_new, t_new
        obj = float(np.linalg.norm(V @ lam - r))
        if abs(prev_obj - obj) <= tol * max(1.0, obj):
            break
        prev_obj = obj
    z = V @ lam
    return float(np.linalg.norm(z - r)), z


def _polygon_contains(point, hull_vertices):
    """Membership test for a point in a 2-D convex polygon given hull vertices in order."""
    n = len(hull_vertices)
    if n == 1:
        return bool(np.allclose(point, hull_vertices[0], atol=1e-12))
    sign = 0
    for i in range(n):
        a = hull_vertices[i]
        b = hull_vertices[(i + 1) % n]
        cross = (b[0] - a[0]) * (point[1] - a[1]) - (b[1] - a[1]) * (point[0] - a[0])
        if abs(cross) <= 1e-12:
            continue
        s = 1 if cross > 0 else -1
        if sign == 0:
            sign = s
        elif s != sign:
            return False
    return True


class TargetSet:
    """A base convex set C with closed-form l_p distance and expansion distance.

    The alpha-expansion distance is computed as max(0, d_p(r, C) - alpha),
    which is exact for every supported kind.
    """

    __slots__ = ("kind", "dim", "norm_p", "point", "threshold", "vertices", "_hull2d")

    def __init__(self, kind, dim, norm_p=2, point=None, threshold=None, vertices=None):
        if norm_p not in SUPPORTED_NORMS:
            raise GeometryError(f"norm_p must be one of {SUPPORTED_NORMS}, got {norm_p}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "norm_p", norm_p)
        object.__setattr__(self, "point", point)
        object.__setattr__(self, "threshold", threshold)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "_hull2d", None)
        if self.dim < 1:
            raise GeometryError("target set dimension must be >= 1")
        if kind in (HALF_LINE_BELOW, HALF_LINE_ABOVE) and self.dim != 1:
            raise GeometryError("half-line targets are one-dimensional")
        if kind == POLYTOPE:
            if vertices is None or vertices.shape[0] < 1:
                raise GeometryError("polytope needs at least one vertex")
            if self.dim == 2:
                object.__setattr__(self, "_hull2d", _hull_2d(vertices))

    def __setattr__(self, name, value):
        raise AttributeError("TargetSet is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def negative_orthant(cls, dim, norm_p=np.inf):
        return cls(NEGATIVE_ORTHANT, dim, norm_p)

    @classmethod
    def singleton(cls, point, norm_p=2):
        point = np.atleast_1d(_as_finite_array(point, "singleton point"))
        point.setflags(write=False)
        return cls(SINGLETON, point.size, norm_p, point=point)

    @classmethod
    def half_line_below(cls, threshold, norm_p=2):
        return cls(HALF_LINE_BELOW, 1, norm_p, threshold=float(threshold))

    @classmethod
    def half_line_above(cls, threshold, norm_p=2):
        return cls(HALF_LINE_ABOVE, 1, norm_p, threshold=float(threshold))

    @classmethod
    def polytope(cls, vertices, norm_p=2):
        verts = _as_finite_array(vertices, "polytope vertices")
        verts = np.atleast_2d(verts.astype(float))
        verts.setflags(write=False)
        return cls(POLYTOPE, verts.shape[1], norm_p, vertices=verts)

    # -- distances ---------------------------------------------------------

    def _check_point(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if r.shape != (self.dim,):
            raise DimensionMismatch(f"expected point in R^{self.dim}, got shape {r.shape}")
        return r

    def distance(self, r):
        """l_p distance of ``r`` to the base set."""
        r = self._check_point(r)
        p = self.norm_p
        if self.kind == NEGATIVE_ORTHANT:
            return float(np.linalg.norm(np.maximum(r, 0.0), ord=p))
        if self.kind == SINGLETON:
            return float(np.linalg.norm(r - self.point, ord=p))
        if self.kind == HALF_LINE_BELOW:
            return max(0.0, float(r[0]) - self.threshold)
        if self.kind == HALF_LINE_ABOVE:
            return max(0.0, self.threshold - float(r[0]))
        return self._polytope_distance(r)

    def _polytope_distance(self, r):
        p = self.norm_p
        verts = self.vertices
        if self.dim == 1:
            lo, hi = verts.min(), verts.max()
            return float(max(0.0, lo - r[0], r[0] - hi))
        if p == 2:
            return _projected_gradient_hull(r, verts)[0]
        if self.dim == 2:
            hull = self._hull2d
            if _polygon_contains(r, hull):
                return 0.0
            if len(hull) == 1:
                return float(np.linalg.norm(r - hull[0], ord=p))
            return min(
                _point_to_segment(r, hull[i], hull[(i + 1) % len(hull)], p)
                for i in range(len(hull))
            )
        raise GeometryError("l_1/l_inf polytope distance is supported only for d <= 2")

    def expansion_distance(self, r, alpha):
        """l_p distance of ``r`` to the alpha-expansion of the base set."""
        if alpha < 0:
            raise GeometryError(f"expansion index must be >= 0, got {alpha}")
        return max(0.0, self.distance(r) - alpha)

    def contains(self, r, tol=0.0):
        return self.distance(r) <= tol

    def project(self, r):
        """Euclidean projection onto the base set (independent of norm_p)."""
        r = self._check_point(r)
        if self.kind == NEGATIVE_ORTHANT:
            return np.minimum(r, 0.0)
        if self.kind == SINGLETON:
            return self.point.copy()
        if self.kind == HALF_LINE_BELOW:
            return np.minimum(r, self.threshold)
        if self.kind == HALF_LINE_ABOVE:
            return np.maximum(r, self.threshold)
        return _projected_gradient_hull(r, self.vertices)[1]

    def project_expansion(self, r, alpha):
        """Euclidean projection onto the alpha-expansion (expansion in norm_p).

        Exact for the orthant/half-line kinds with p = inf or 1-D sets, and
        for any kind when norm_p = 2; those cover every use in this package.
        """
        if alpha < 0:
            raise GeometryError(f"expansion index must be >= 0, got {alpha}")
        r = self._check_point(r)
        if self.kind == NEGATIVE_ORTHANT and self.norm_p == np.inf:
            return np.minimum(r, alpha)
        if self.kind == HALF_LINE_BELOW:
            return np.minimum(r, self.threshold + alpha)
        if self.kind == HALF_LINE_ABOVE:
            return np.maximum(r, self.threshold - alpha)
        if self.dim == 1 and self.kind == SINGLETON:
            c = self.point[0]
            return np.clip(r, c - alpha, c + alpha)
        if self.norm_p == 2:
            base = self.project(r)
            gap = r - base
            norm = np.linalg.norm(gap)
            if norm <= alpha:
                return r.copy()
            return base + (alpha / norm) * gap
        raise GeometryError(
            f"no exact expansion projection for kind={self.kind}, p={self.norm_p}"
        )

    def __repr__(self):
        return f"TargetSet(kind={self.kind!r}, dim={self.dim}, p={self.norm_p})"


def _hull_2d(points):
    """Vertices of the convex hull of 2-D points, counterclockwise (monotone chain)."""
    pts = sorted({(float(x), float(y)) for x, y in points})
    if len(pts) == 1:
        return [np.array(pts[0])]
    def half(points_iter):
        out = []
        for pt in points_iter:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                if (a[0] - o[0]) * (pt[1] - o[1]) - (a[1] - o[1]) * (pt[0] - o[0]) <= 0:
                    out.pop()
                else:
                    break
            out.append(pt)
        return out
    lower = half(pts)
    upper = half(reversed(pts))
    return [np.array(p) for p in lower[:-1] + upper[:-1]]


class ConvexBody:
    """Polytope K of payoff matrices, given by its vertex list.

    Only known-game components are allowed to read it; the block strategy of
    the main algorithm never does.
    """

    __slots__ = ("vertices",)

    def __init__(self, vertices):
        verts = list(vertices)
        if not verts:
            raise GeometryError("convex body needs at least one vertex")
        dims = {(v.dim, v.n_actions) for v in verts}
        if len(dims) != 1:
            raise DimensionMismatch(f"inconsistent vertex shapes: {dims}")
        object.__setattr__(self, "vertices", tuple(verts))

    def __setattr__(self, name, value):
        raise AttributeError("ConvexBody is immutable")

    @property
    def dim(self):
        return self.vertices[0].dim

    @property
    def n_actions(self):
        return self.vertices[0].n_actions

    def contains(self, m, tol=1e-9):
        flats = np.array([v.flat() for v in self.vertices])
        dist, _ = _projected_gradient_hull(m.flat(), flats)
        return dist <= tol


def body_norm_bound(body):
    """max of vertex norms and pairwise difference norms over K (Euclidean).

    Both maxima are attained at vertices by convexity of the norm.
    """
    flats = [v.flat() for v in body.vertices]
    best = max(float(np.linalg.norm(f)) for f in flats)
    for a, b in itertools.combinations(flats, 2):
        best = max(best, float(np.linalg.norm(a - b)))
    return best
