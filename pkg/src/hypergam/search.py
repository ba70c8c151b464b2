"""Stochastic model-space search by Metropolis-Hastings with Move/Swap steps.

Each iteration proposes either a Move (one covariate's dof steps to an
adjacent grid value; up or down with probability 1/2 each, deterministically
at the grid ends) or a Swap (a uniformly chosen pair i <= j exchanges its dof
values, a no-op when they are equal). The two proposal types never produce
the same candidate, and the forward/backward proposal probabilities cancel
except at Move boundaries:

    q(d'|d) / q(d|d') = 2   if d_j is at a grid end,
                        1/2 if d'_j is at a grid end,
                        1   otherwise (and always for Swap).

A proposal is accepted with probability

    min{1, [f(y|d') f(d') / (f(y|d) f(d))] * [q(d|d') / q(d'|d)]},

i.e. the posterior-kernel ratio divided by the proposal ratio above, which
makes the visit frequencies a consistent estimate of the model posterior.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dof import DofGrid

__all__ = ["SearchState", "propose", "mh_search", "posterior_tables"]

_LOG2 = math.log(2.0)


@dataclass
class SearchState:
    """Outcome of one search run."""

    current: tuple
    visit_counts: dict = field(default_factory=dict)
    score_cache: dict = field(default_factory=dict)
    iterations: int = 0
    accepted: int = 0
    p_move: float = 0.75
    seed: int | None = None
    start: tuple | None = None

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.iterations if self.iterations else 0.0


def propose(model, grid: DofGrid, rng, p_move: float = 0.75):
    """One Move/Swap proposal from ``model``.

    Returns ``(proposal, log_q_ratio)`` with
    ``log_q_ratio = log q(d'|d) - log q(d|d')``.
    """
    values = grid.values
    top = values.size - 1
    d = list(model)
    if rng.random() < p_move:
        j = int(rng.integers(len(d)))
        i = grid.index_of(d[j])
        if i == 0:
            i2 = 1
            log_fwd = 0.0
        elif i == top:
            i2 = top - 1
            log_fwd = 0.0
        else:
            i2 = i + 1 if rng.random() < 0.5 else i - 1
            log_fwd = -_LOG2
        log_rev = 0.0 if i2 in (0, top) else -_LOG2
        d[j] = float(values[i2])
        return tuple(d), log_fwd - log_rev
    p = len(d)
    k = int(rng.integers(p * (p + 1) // 2))
    i = 0
    while k >= p - i:
        k -= p - i
        i += 1
    j = i + k
    d[i], d[j] = d[j], d[i]
    return tuple(d), 0.0


def mh_search(
    score_components,
    start,
    iters: int,
    grid: DofGrid,
    seed,
    p_move: float = 0.75,
) -> SearchState:
    """Run the chain for ``iters`` iterations from ``start``.

    ``score_components(model) -> (log_marglik, log_prior)`` is expected to
    memoize; a model whose marginal likelihood is -inf (failed scoring) is
    never accepted.
    """
    rng = np.random.default_rng(seed)
    state = SearchState(
        current=tuple(float(d) for d in start),
        p_move=p_move,
        seed=seed,
        start=tuple(float(d) for d in start),
    )

    def kernel(m):
        if m not in state.score_cache:
            state.score_cache[m] = score_components(m)
        lml, lpr = state.score_cache[m]
        return lml + lpr

    cur = state.current
    cur_lp = kernel(cur)
    visits = state.visit_counts
    for _ in range(iters):
        cand, log_q_ratio = propose(cur, grid, rng, p_move)
        if cand == cur:
            visits[cur] = visits.get(cur, 0) + 1
            state.accepted += 1
            continue
        cand_lp = kernel(cand)
        if cand_lp == -math.inf:
            accept = False
        elif cur_lp == -math.inf:
            accept = True
        else:
            log_alpha = (cand_lp - cur_lp) - log_q_ratio
            accept = log_alpha >= 0.0 or math.log(rng.random()) < log_alpha
        if accept:
            cur = cand
            cur_lp = cand_lp
            state.accepted += 1
        visits[cur] = visits.get(cur, 0) + 1
    state.current = cur
    state.iterations = iters
    return state


def posterior_tables(state: SearchState):
    """Ranked models with renormalized and frequency-based probabilities.

    Returns a list of ``(model, log_marglik, log_prior, post_prob,
    freq_prob)`` tuples sorted by renormalized posterior probability.
    """
    if state.iterations < 1:
        raise ValueError("search ran zero iterations")
    items = [
        (m, lml, lpr)
        for m, (lml, lpr) in state.score_cache.items()
        if math.isfinite(lml)
    ]
    kernels = np.array([lml + lpr for _, lml, lpr in items])
    m = kernels.max()
    w = np.exp(kernels - m)
    w /= w.sum()
    rows = [
        (mod, lml, lpr, float(pw), state.visit_counts.get(mod, 0) / state.iterations)
        for (mod, lml, lpr), pw in zip(items, w)
    ]
    rows.sort(key=lambda r: r[3], reverse=True)
    return rows
