"""Response functions: maps from payoff matrices to mixed actions.

A response function is the central strategy parameter of the block
algorithm. Provided here: the generic best response (minimize distance of
the combined payoff to the target set), its cost-constrained variant, the
closed forms for the two worked examples, constant responses, and responses
tabulated from a file.
"""

from __future__ import annotations

import csv

import numpy as np
from scipy import optimize

from .geometry import (
    HALF_LINE_ABOVE,
    HALF_LINE_BELOW,
    NEGATIVE_ORTHANT,
    POLYTOPE,
    SINGLETON,
    DimensionMismatch,
    MixedAction,
    PayoffMatrix,
    TargetSet,
    project_to_simplex,
)

# Slight preference for mass on low action indices; breaks exact argmin ties
# deterministically while perturbing objectives far below solver tolerance.
_LEX_BIAS = 1e-10


class ResponseError(RuntimeError):
    """Failure inside a response-function solver."""


class SolverDidNotConverge(ResponseError):
    """Raised when the iteration cap is hit; carries the best iterate found."""

    def __init__(self, message, best_action, best_value):
        super().__init__(message)
        self.best_action = best_action
        self.best_value = best_value


class InfeasibleConstraint(ResponseError):
    """No mixed action satisfies the cost constraint for this matrix."""


class ResponseFunction:
    """Base class: a deterministic map from payoff matrices to mixed actions."""

    def __call__(self, m: PayoffMatrix) -> MixedAction:
        raise NotImplementedError


class ConstantResponse(ResponseFunction):
    def __init__(self, weights):
        self.action = weights if isinstance(weights, MixedAction) else MixedAction(weights)

    def __call__(self, m):
        if m.n_actions != self.action.n_actions:
            raise DimensionMismatch("constant response has wrong action count")
        return self.action


# ---------------------------------------------------------------------------
# Generic best response
# ---------------------------------------------------------------------------


def _is_linearizable(target):
    """Whether d_p(., C) has an exact linear-programming epigraph."""
    if target.dim == 1:
        return True
    if target.norm_p == 2:
        return False
    return target.kind in (NEGATIVE_ORTHANT, SINGLETON, POLYTOPE)


def _distance_epigraph(target, n_payoff_vars, payoff_rows):
    """Linear pieces for minimizing d_p(y, C) where y = payoff_rows @ vars.

    Returns (cost, extra vars count, A_ub rows, b_ub, A_eq rows, b_eq) in
    terms of an augmented variable vector [vars, s..., nu...]. payoff_rows is
    (k, n_payoff_vars).
    """
    k = target.dim
    p = np.inf if target.dim == 1 else target.norm_p
    n_s = 1 if p == np.inf else k
    rows_ub, b_ub, rows_eq, b_eq = [], [], [], []
    n_nu = 0

    def srow(i):
        # coefficient row selecting s (scalar epigraph: always slot 0)
        r = np.zeros(n_s)
        if p == np.inf:
            r[0] = 1.0
        else:
            r[i] = 1.0
        return r

    if target.kind == NEGATIVE_ORTHANT:
        for i in range(k):
            rows_ub.append((payoff_rows[i], -srow(i), None))
            b_ub.append(0.0)
    elif target.kind == SINGLETON:
        for i in range(k):
            rows_ub.append((payoff_rows[i], -srow(i), None))
            b_ub.append(target.point[i])
            rows_ub.append((-payoff_rows[i], -srow(i), None))
            b_ub.append(-target.point[i])
    elif target.kind == HALF_LINE_BELOW:
        rows_ub.append((payoff_rows[0], -srow(0), None))
        b_ub.append(target.threshold)
    elif target.kind == HALF_LINE_ABOVE:
        rows_ub.append((-payoff_rows[0], -srow(0), None))
        b_ub.append(-target.threshold)
    elif target.kind == POLYTOPE:
        verts = target.vertices  # (n, k)
        n_nu = verts.shape[0]
        for i in range(k):
            vrow = verts[:, i]
            rows_ub.append((payoff_rows[i], -srow(i), -vrow))
            b_ub.append(0.0)
            rows_ub.append((-payoff_rows[i], -srow(i), vrow))
            b_ub.append(0.0)
        rows_eq.append((np.zeros(n_payoff_vars), np.zeros(n_s), np.ones(n_nu)))
        b_eq.append(1.0)
    else:
        raise ResponseError(f"no linear epigraph for target kind {target.kind}")
    return n_s, n_nu, rows_ub, b_ub, rows_eq, b_eq


def _solve_distance_lp(M, target, extra_ub=None, extra_eq=None, n_extra=0):
    """min_x d_p(M x, C) over the simplex, plus optional linear side constraints.

    Side constraints may involve additional variables (appended after x),
    e.g. hull weights of a constraint polytope. Exact for piecewise-linear
    distances. Returns (MixedAction, distance).
    """
    n = M.shape[1]
    n_s, n_nu, rows_ub, b_ub, rows_eq, b_eq = _distance_epigraph(target, n, M)
    n_vars = n + n_extra + n_s + n_nu

    def assemble(xpart, spart, nupart, extrapart=None):
        row = np.zeros(n_vars)
        row[:n] = xpart
        if extrapart is not None:
            row[n : n + n_extra] = extrapart
        row[n + n_extra : n + n_extra + n_s] = spart
        if n_nu:
            row[n + n_extra + n_s :] = nupart if nupart is not None else 0.0
        return row

    A_ub = [assemble(xp, sp, nup) for xp, sp, nup in rows_ub]
    ub = list(b_ub)
    A_eq = [assemble(xp, sp, nup) for xp, sp, nup in rows_eq]
    eq = list(b_eq)
    # simplex constraint on x
    A_eq.append(assemble(np.ones(n), np.zeros(n_s), np.zeros(n_nu) if n_nu else None))
    eq.append(1.0)
    for row, rhs in extra_ub or []:
        A_ub.append(assemble(row[:n], np.zeros(n_s), None, row[n:]))
        ub.append(rhs)
    for row, rhs in extra_eq or []:
        A_eq.append(assemble(row[:n], np.zeros(n_s), None, row[n:]))
        eq.append(rhs)

    cost = np.zeros(n_vars)
    cost[:n] = _LEX_BIAS * np.arange(n)
    cost[n + n_extra : n + n_extra + n_s] = 1.0
    bounds = [(0, None)] * n + [(0, None)] * n_extra
    bounds += [(0, None)] * n_s + [(0, None)] * n_nu
    res = optimize.linprog(
        cost,
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(ub) if ub else None,
        A_eq=np.array(A_eq),
        b_eq=np.array(eq),
        bounds=bounds,
        method="highs",
    )
    if res.status == 2:
        raise InfeasibleConstraint("constraint set admits no mixed action")
    if not res.success:
        raise ResponseError(f"linear program failed: {res.message}")
    x = project_to_simplex(res.x[:n])
    return x, float(target.distance(M @ x.weights))


def _two_action_candidates(M, target):
    """Candidate weights t on action 0 for exactly minimizing t -> d_p(z(t), C).

    z(t) = t*M[:,0] + (1-t)*M[:,1]. The distance is piecewise linear or
    piecewise quadratic in t for the closed-form target kinds; minima sit at
    endpoints, kink locations, or per-piece stationary points.
    """
    a = M[:, 1]
    d = M[:, 0] - M[:, 1]  # z(t) = a + t d
    k = target.dim
    cands = {0.0, 1.0}

    def add(t):
        if np.isfinite(t) and 0.0 < t < 1.0:
            cands.add(float(t))

    if target.kind == SINGLETON:
        e0 = a - target.point
    elif target.kind in (HALF_LINE_BELOW, HALF_LINE_ABOVE):
        e0 = a - target.threshold
    elif target.kind == POLYTOPE and k == 1:
        # interval [lo, hi]: kinks where the payoff crosses either end
        for bound in (target.vertices.min(), target.vertices.max()):
            if d[0] != 0.0:
                add((bound - a[0]) / d[0])
        return sorted(cands)
    else:
        e0 = a
    for i in range(k):
        if d[i] != 0.0:
            add(-e0[i] / d[i])  # component crosses the set boundary
        for j in range(i + 1, k):
            for s in (1.0, -1.0):
                if d[i] - s * d[j] != 0.0:
                    add(-(e0[i] - s * e0[j]) / (d[i] - s * d[j]))
    if target.norm_p == 2 and target.kind in (NEGATIVE_ORTHANT, SINGLETON):
        # stationary points of sum of squared residuals over coordinate subsets
        for mask in range(1, 2**k):
            sel = [i for i in range(k) if mask >> i & 1]
            denom = sum(d[i] * d[i] for i in sel)
            if denom > 0.0:
                add(-sum(e0[i] * d[i] for i in sel) / denom)
    return sorted(cands)


def _best_response_two_actions(M, target):
    def f(t):
        return target.distance(M @ np.array([t, 1.0 - t]))

    if target.kind == POLYTOPE and target.dim > 1:
        res = optimize.minimize_scalar(f, bounds=(0.0, 1.0), method="bounded",
                                       options={"xatol": 1e-12})
        cands = [0.0, 1.0, float(res.x)]
    else:
        cands = _two_action_candidates(M, target)
    vals = [f(t) for t in cands]
    best = min(vals)
    # among ties, put the mass on the lowest action index (largest t)
    t_star = max(t for t, v in zip(cands, vals) if v <= best + 1e-12)
    return MixedAction([t_star, 1.0 - t_star]), float(f(t_star))


def _best_response_fista(M, target, tol=1e-11, max_iter=20_000):
    """min_x d_2(M x, C) by accelerated projected gradient on the squared distance.

    grad of x -> ||Mx - proj_C(Mx)||^2 is 2 M^T (Mx - proj_C(Mx)).
    """
    n = M.shape[1]
    lip = 2.0 * np.linalg.norm(M, ord=2) ** 2
    if lip == 0.0:
        return MixedAction.uniform(n), float(target.distance(M @ MixedAction.uniform(n).weights))
    step = 1.0 / lip
    bias = _LEX_BIAS * np.arange(n)
    x = np.full(n, 1.0 / n)
    y = x.copy()
    t_acc = 1.0
    best_val, best_x = np.inf, x

    def value(xv):
        return float(target.distance(M @ xv))

    prev = np.inf
    for it in range(max_iter):
        z = M @ y
        grad = 2.0 * (M.T @ (z - target.project(z))) + bias
        x_new = project_to_simplex(y - step * grad).weights
        val = value(x_new)
        if val < best_val:
            best_val, best_x = val, x_new
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc))
        y = x_new + ((t_acc - 1.0) / t_new) * (x_new - x)
        x, t_acc = x_new, t_new
        if abs(prev - val) <= tol * max(1.0, val) and it > 10:
            return MixedAction(best_x), best_val
        prev = val
    raise SolverDidNotConverge(
        f"best response did not converge in {max_iter} iterations",
        MixedAction(best_x), best_val,
    )


class BestResponse(ResponseFunction):
    """x*(m): a mixed action minimizing d_p(x (.) m, C) over the simplex.

    Exact for two actions and for piecewise-linear distances (solved as
    linear programs); accelerated projected gradient otherwise.
    """

    def __init__(self, target: TargetSet, tol=1e-8, max_iter=20_000):
        self.target = target
        self.tol = tol
        self.max_iter = max_iter

    def __call__(self, m):
        M = m.entries
        if M.shape[0] != self.target.dim:
            raise DimensionMismatch(
                f"matrix dim {M.shape[0]} does not match target dim {self.target.dim}"
            )
        if M.shape[1] == 1:
            return MixedAction([1.0])
        if M.shape[1] == 2:
            return _best_response_two_actions(M, self.target)[0]
        if _is_linearizable(self.target):
            return _solve_distance_lp(M, self.target)[0]
        return _best_response_fista(M, self.target, self.tol, self.max_iter)[0]

    def value(self, m):
        """The minimal distance itself (used by the target-function module)."""
        x = self(m)
        return float(self.target.distance(m.entries @ x.weights))


class ConstrainedBestResponse(ResponseFunction):
    """Best response under sample-path cost constraints.

    Minimizes d_p(P (x (.) m), payoff_target) over mixed actions x subject to
    G (x (.) m) in cost_set. P and G are row-selection (or general linear)
    maps applied to payoff vectors.
    """

    def __init__(self, payoff_map, cost_map, payoff_target: TargetSet,
                 cost_set: TargetSet, feasibility_tol=1e-6):
        self.payoff_map = np.atleast_2d(np.asarray(payoff_map, dtype=float))
        self.cost_map = np.atleast_2d(np.asarray(cost_map, dtype=float))
        self.payoff_target = payoff_target
        self.cost_set = cost_set
        self.feasibility_tol = feasibility_tol
        if self.payoff_map.shape[0] != payoff_target.dim:
            raise DimensionMismatch("payoff map rows must match payoff target dim")
        if self.cost_map.shape[0] != cost_set.dim:
            raise DimensionMismatch("cost map rows must match cost set dim")

    def _cost_rows(self, Mg):
        """Linear representation of Mg x in cost_set as (ub rows, eq rows, extra vars)."""
        g = Mg.shape[0]
        kind = self.cost_set.kind
        ub, eq = [], []
        n_extra = 0
        if kind == NEGATIVE_ORTHANT:
            for i in range(g):
                ub.append((Mg[i], 0.0))
        elif kind == HALF_LINE_BELOW:
            ub.append((Mg[0], self.cost_set.threshold))
        elif kind == HALF_LINE_ABOVE:
            ub.append((-Mg[0], -self.cost_set.threshold))
        elif kind == SINGLETON:
            for i in range(g):
                eq.append((Mg[i], self.cost_set.point[i]))
        elif kind == POLYTOPE:
            verts = self.cost_set.vertices  # (n, g)
            n_extra = verts.shape[0]
            for i in range(g):
                eq.append((np.concatenate([Mg[i], -verts[:, i]]), 0.0))
            eq.append((np.concatenate([np.zeros(Mg.shape[1]), np.ones(n_extra)]), 1.0))
        else:
            raise ResponseError(f"unsupported cost-set kind {kind}")
        if n_extra == 0:
            ub = [(np.concatenate([row, np.zeros(0)]), rhs) for row, rhs in ub]
            eq = [(np.concatenate([row, np.zeros(0)]), rhs) for row, rhs in eq]
        return ub, eq, n_extra

    def _check_feasible(self, Mg):
        n = Mg.shape[1]
        if n == 1:
            viol = self.cost_set.distance(Mg[:, 0])
        elif n == 2:
            viol = _best_response_two_actions(Mg, self.cost_set)[1]
        elif _is_linearizable(self.cost_set):
            viol = _solve_distance_lp(Mg, self.cost_set)[1]
        else:
            viol = _best_response_fista(Mg, self.cost_set)[1]
        if viol > self.feasibility_tol:
            raise InfeasibleConstraint(
                f"minimal cost-constraint violation {viol:.3g} exceeds tolerance"
            )

    def __call__(self, m):
        Mp = self.payoff_map @ m.entries
        Mg = self.cost_map @ m.entries
        self._check_feasible(Mg)
        if m.n_actions == 1:
            return MixedAction([1.0])
        if _is_linearizable(self.payoff_target):
            ub, eq, n_extra = self._cost_rows(Mg)
            x, _ = _solve_distance_lp(Mp, self.payoff_target,
                                      extra_ub=ub, extra_eq=eq, n_extra=n_extra)
            return x
        return self._penalty_solve(Mp, Mg)

    def _penalty_solve(self, Mp, Mg, max_iter=20_000):
        """Exact-penalty continuation for smooth (p=2, multi-d) payoff targets."""
        n = Mp.shape[1]
        x = np.full(n, 1.0 / n)
        for rho in 10.0 ** np.arange(0, 9):
            big = np.vstack([Mp, np.sqrt(rho) * Mg])
            lip = 2.0 * np.linalg.norm(big, ord=2) ** 2
            step = 1.0 / lip
            for _ in range(max_iter // 9):
                zp = Mp @ x
                zg = Mg @ x
                grad = 2.0 * (Mp.T @ (zp - self.payoff_target.project(zp)))
                grad += 2.0 * rho * (Mg.T @ (zg - self.cost_set.project(zg)))
                x_new = project_to_simplex(x - step * grad).weights
                if np.max(np.abs(x_new - x)) <= 1e-13:
                    x = x_new
                    break
                x = x_new
        viol = self.cost_set.distance(Mg @ x)
        if viol > self.feasibility_tol:
            raise SolverDidNotConverge(
                f"penalty solve left constraint violation {viol:.3g}",
                MixedAction(x), float(self.payoff_target.distance(Mp @ x)),
            )
        return MixedAction(x)


# ---------------------------------------------------------------------------
# Closed forms for the worked examples
# ---------------------------------------------------------------------------

EXAMPLE1_DAGGER = np.array([[3.0, 0.0], [4.0, 5.0]])  # columns (3,4), (0,5)
EXAMPLE1_SHARP = np.array([[4.0, 5.0], [3.0, 0.0]])  # columns (4,3), (5,0)


def example1_matrix(nu):
    """The opponent's matrix at mixture parameter nu in [0, 1]."""
    return PayoffMatrix(nu * EXAMPLE1_DAGGER + (1.0 - nu) * EXAMPLE1_SHARP)


def example1_parameter(m):
    """Recover nu for a matrix on (or near) the example-1 segment."""
    entries = m.entries if isinstance(m, PayoffMatrix) else np.asarray(m, dtype=float)
    diff = EXAMPLE1_DAGGER - EXAMPLE1_SHARP
    nu = float(np.sum((entries - EXAMPLE1_SHARP) * diff) / np.sum(diff * diff))
    return min(1.0, max(0.0, nu))


class Example1BestResponse(ResponseFunction):
    """Closed-form x*(nu) for example 1: (1,0) outside (1/4, 3/4), else (0,1).

    At the tie points nu in {1/4, 3/4} the mass goes to the lower action
    index; only the achieved distance is determined there.
    """

    def __call__(self, m):
        nu = example1_parameter(m)
        if nu <= 0.25 or nu >= 0.75:
            return MixedAction([1.0, 0.0])
        return MixedAction([0.0, 1.0])


class Example2BestResponse(ResponseFunction):
    """Closed-form x*(v, w) for example 2 (scalar payoffs on the square).

    Mixes to exactly zero when the components have opposite signs; plays the
    smaller-magnitude component otherwise. At the origin every action is
    optimal; returns (1/2, 1/2).
    """

    def __call__(self, m):
        v, w = m.entries[0]
        if v * w > 0.0:
            if abs(v) <= abs(w):
                return MixedAction([1.0, 0.0])
            return MixedAction([0.0, 1.0])
        denom = abs(v) + abs(w)
        if denom == 0.0:
            return MixedAction([0.5, 0.5])
        return MixedAction([abs(w) / denom, abs(v) / denom])


class TabulatedResponse(ResponseFunction):
    """Response looked up from a tabulated grid of matrices to mixed actions.

    Nearest-neighbor in Euclidean distance on the flattened matrix. File
    format: CSV with header m0..m{dA-1},x0..x{A-1}, one grid point per row.
    """

    def __init__(self, matrices, actions, dim, n_actions):
        self.keys = np.atleast_2d(np.asarray(matrices, dtype=float))
        self.values = np.atleast_2d(np.asarray(actions, dtype=float))
        self.dim = dim
        self.n_actions = n_actions
        if self.keys.shape[1] != dim * n_actions:
            raise DimensionMismatch("tabulated keys must have d*A entries")
        if self.values.shape != (self.keys.shape[0], n_actions):
            raise DimensionMismatch("tabulated values must have one weight per action")

    @classmethod
    def from_csv(cls, path, dim, n_actions):
        keys, values = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            n_m = sum(1 for name in header if name.startswith("m"))
            if n_m != dim * n_actions:
                raise DimensionMismatch(
                    f"table has {n_m} matrix columns, expected {dim * n_actions}"
                )
            for row in reader:
                vals = [float(v) for v in row]
                keys.append(vals[:n_m])
                values.append(vals[n_m:])
        return cls(keys, values, dim, n_actions)

    def __call__(self, m):
        if m.dim != self.dim or m.n_actions != self.n_actions:
            raise DimensionMismatch("matrix shape does not match the table")
        idx = int(np.argmin(np.linalg.norm(self.keys - m.flat(), axis=1)))
        return MixedAction(self.values[idx])
