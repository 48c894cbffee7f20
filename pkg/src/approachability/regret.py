"""Scalar-payoff full-information regret minimization.

The polynomially weighted average forecaster is parameter-free in both the
payoff range and the horizon, which the block strategy requires because the
scale of the scalarized payoffs it feeds is unknown and grows over time.
Documented guarantee: regret <= 2*sqrt(2e) * B * sqrt(T ln A) for payoffs in
[-B, B]; the test corpus asserts the tighter empirical constant 4.
"""

from __future__ import annotations

import numpy as np

from .geometry import DimensionMismatch, MixedAction


class PolynomialWeights:
    """Polynomially weighted average forecaster with exponent q = max(2, 2 ln A).

    Maintains the cumulative per-action regret vector R and plays weights
    proportional to (max(R_a, 0))^(q-1). Play is invariant under positive
    rescaling of all payoffs, and R itself scales linearly.
    """

    def __init__(self, n_actions):
        if n_actions < 1:
            raise ValueError("need at least one action")
        self.n_actions = int(n_actions)
        self.exponent = max(2.0, 2.0 * np.log(self.n_actions))
        self.regret = np.zeros(self.n_actions)
        self.t = 0

    def next_action(self):
        """Current mixed action; uniform whenever no action has positive regret."""
        pos = np.maximum(self.regret, 0.0)
        top = pos.max()
        if top <= 0.0:
            return MixedAction.uniform(self.n_actions)
        w = (pos / top) ** (self.exponent - 1.0)
        return MixedAction(w)

    def observe(self, payoffs):
        """Update regrets with the payoff vector of the round just played."""
        payoffs = np.asarray(payoffs, dtype=float)
        if payoffs.shape != (self.n_actions,):
            raise DimensionMismatch(
                f"expected {self.n_actions} payoffs, got shape {payoffs.shape}"
            )
        if not np.all(np.isfinite(payoffs)):
            raise ValueError("payoffs must be finite")
        u = self.next_action().weights
        self.regret += payoffs - u @ payoffs
        self.t += 1

    def realized_regret(self):
        """Regret against the best fixed action so far: max(0, max_a R_a).

        Equals max over the simplex of sum <u, m'_t> - sum <u_t, m'_t>,
        attained at a vertex.
        """
        return max(0.0, float(self.regret.max()))
