"""Monte Carlo rollouts of solved testing policies.

Randomness comes from numpy's Philox4x32-10 counter-based generator. Episodes
are grouped in fixed blocks of ``BLOCK`` and block ``i`` draws from the stream
keyed by ``SeedSequence(seed, spawn_key=(i,))``, so an episode's outcome depends
only on the seed and its index, not on scheduling or worker count.
"""

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .model import ProblemSpec, State
from .solver import PolicyTable, immediate_action

BLOCK = 4096


class WorldMode(enum.Enum):
    BELIEF_CONSISTENT = "belief"
    FIXED_RATE = "fixed"


@dataclass
class QuarterRecord:
    t: int
    state: State
    n: int
    k: int
    beta_i_next: int
    reward: float


@dataclass
class RolloutTrace:
    quarters: List[QuarterRecord] = field(default_factory=list)
    terminal: bool = False
    discounted_return: float = 0.0


@dataclass
class RolloutSummary:
    mean_return: float
    std_error: float
    terminal_rate: float
    mean_events: float
    episodes: int
    seed: int
    mode: str
    start: State
    lambda_true: Optional[float] = None

    def to_dict(self):
        return {
            "mean_return": self.mean_return,
            "std_error": self.std_error,
            "terminal_rate": self.terminal_rate,
            "mean_events": self.mean_events,
            "episodes": self.episodes,
            "seed": self.seed,
            "mode": self.mode,
            "start": [self.start.K, self.start.N, self.start.beta_I],
            "lambda_true": self.lambda_true,
        }


def _block_rng(seed, block):
    ss = np.random.SeedSequence(seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


class _Simulator:
    def __init__(self, pt: PolicyTable, spec: ProblemSpec, mode: WorldMode, lambda_true):
        self.pt = pt
        self.spec = spec
        self.mode = mode
        self.lambda_true = lambda_true
        self.kthr = np.asarray(spec.terminal_thresholds)
        d = spec.innovation
        self.deltas = np.array(d.support, dtype=np.int64)
        self.dprobs = np.array(d.probs)
        self._imm = {}

    def terminal(self, K, N):
        return K <= self.kthr[N - self.spec.n_lo]

    def action(self, K, N, b, t):
        """Policy action and whether the episode must end after it (off-grid state)."""
        s = self.spec
        if K <= s.k_max and N <= s.n_max:
            return int(self.pt.values[t - 1, K - s.k_lo, N - s.n_lo, b - s.b_lo]), False
        key = (K, N, b)
        if key not in self._imm:
            self._imm[key] = immediate_action(State(K, N, b), s)[0]
        return self._imm[key], True

    def run_block(self, seed, block, count, start: State):
        """Simulate ``count`` episodes; returns (returns, reached, events) arrays."""
        s = self.spec
        rng = _block_rng(seed, block)
        T = self.pt.horizon
        K = np.full(count, start.K, dtype=np.int64)
        N = np.full(count, start.N, dtype=np.int64)
        b = np.full(count, start.beta_I, dtype=np.int64)
        ret = np.zeros(count)
        events = np.zeros(count, dtype=np.int64)
        reached = np.zeros(count, dtype=bool)
        alive = ~self.terminal(K, N)
        for t in range(1, T + 1):
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            Ki, Ni, bi = K[idx], N[idx], b[idx]
            last = (Ki > s.k_max) | (Ni > s.n_max)
            n = np.zeros(idx.size, dtype=np.int64)
            grid = ~last
            n[grid] = self.pt.values[t - 1, Ki[grid] - s.k_lo, Ni[grid] - s.n_lo, bi[grid] - s.b_lo]
            for i in np.flatnonzero(last):
                n[i] = self.action(int(Ki[i]), int(Ni[i]), int(bi[i]), t)[0]
            u_delta = rng.random(idx.size)
            k = np.zeros(idx.size, dtype=np.int64)
            testing = n > 0
            if testing.any():
                nt = n[testing]
                if self.mode is WorldMode.BELIEF_CONSISTENT:
                    shape = nt * (K[idx][testing] + s.alpha0)
                    rate = N[idx][testing] + s.beta0 + b[idx][testing]
                    lam = rng.standard_gamma(shape) / rate
                else:
                    lam = nt * self.lambda_true
                k[testing] = rng.poisson(lam)
            Kn = K[idx] + k
            Nn = N[idx] + n
            cdf = np.cumsum(self.dprobs)
            j = np.minimum(np.searchsorted(cdf, u_delta, side="right"), len(cdf) - 1)
            bn = b[idx] + n * self.deltas[j]
            lo = np.maximum(s.b_lo, np.floor(-(Nn + s.beta0)).astype(np.int64) + 1)
            bn = np.where(n > 0, np.clip(bn, lo, s.b_hi), b[idx])
            term = self.terminal(Kn, Nn)
            r = np.where(testing, s.eta * term - (1.0 - s.eta) * k, 0.0)
            ret[idx] += s.gamma ** (t - 1) * r
            events[idx] += k
            K[idx], N[idx], b[idx] = Kn, Nn, bn
            reached[idx] |= term & testing
            alive[idx] = ~(term & testing) & ~last
        return ret, reached, events


def _validate(pt, spec, mode, start, lambda_true, episodes):
    if episodes < 1:
        raise ValueError("episodes must be positive")
    if mode is WorldMode.FIXED_RATE and not (lambda_true is not None and lambda_true > 0):
        raise ValueError("FIXED_RATE mode requires lambda_true > 0")
    if not pt.in_grid(start.K, start.N, start.beta_I) or not spec.is_valid(start):
        raise ValueError(f"start state {start} is not a valid table state")


def default_start(spec: ProblemSpec):
    return State(spec.k_lo, spec.n_lo, 0)


def simulate(pt: PolicyTable, spec: ProblemSpec, mode=WorldMode.BELIEF_CONSISTENT, seed=0, episodes=10_000,
             start: State = None, lambda_true=None, workers=1) -> RolloutSummary:
    """Mean discounted return and related statistics of following ``pt`` from ``start`` at t = 1."""
    mode = WorldMode(mode)
    start = start or default_start(spec)
    _validate(pt, spec, mode, start, lambda_true, episodes)
    sim = _Simulator(pt, spec, mode, lambda_true)
    blocks = [(i, min(BLOCK, episodes - i * BLOCK)) for i in range(math.ceil(episodes / BLOCK))]
    if workers > 1:
        # each worker gets its own simulator so the off-grid cache is not shared
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(
                lambda bc: _Simulator(pt, spec, mode, lambda_true).run_block(seed, bc[0], bc[1], start), blocks
            ))
    else:
        parts = [sim.run_block(seed, i, c, start) for i, c in blocks]
    ret = np.concatenate([p[0] for p in parts])
    reached = np.concatenate([p[1] for p in parts])
    events = np.concatenate([p[2] for p in parts])
    mean = math.fsum(ret) / episodes
    var = math.fsum((ret - mean) ** 2) / max(episodes - 1, 1)
    return RolloutSummary(
        mean_return=mean,
        std_error=math.sqrt(var / episodes),
        terminal_rate=int(reached.sum()) / episodes,
        mean_events=int(events.sum()) / episodes,
        episodes=episodes,
        seed=seed,
        mode=mode.value,
        start=start,
        lambda_true=lambda_true,
    )


def run_episode(pt: PolicyTable, spec: ProblemSpec, start: State, rng: np.random.Generator,
                mode=WorldMode.BELIEF_CONSISTENT, lambda_true=None) -> RolloutTrace:
    """One trajectory with its per-quarter record."""
    mode = WorldMode(mode)
    _validate(pt, spec, mode, start, lambda_true, 1)
    sim = _Simulator(pt, spec, mode, lambda_true)
    trace = RolloutTrace()
    K, N, b = start.K, start.N, start.beta_I
    if sim.terminal(K, N):
        trace.terminal = True
        return trace
    for t in range(1, pt.horizon + 1):
        n, last = sim.action(K, N, b, t)
        k = 0
        if n > 0:
            if mode is WorldMode.BELIEF_CONSISTENT:
                lam = rng.standard_gamma(n * (K + spec.alpha0)) / (N + spec.beta0 + b)
            else:
                lam = n * lambda_true
            k = int(rng.poisson(lam))
            j = rng.choice(len(sim.deltas), p=sim.dprobs)
            lo = max(spec.b_lo, math.floor(-(N + n + spec.beta0)) + 1)
            b_next = min(spec.b_hi, max(lo, b + n * int(sim.deltas[j])))
        else:
            b_next = b
        term = n > 0 and bool(sim.terminal(K + k, N + n))
        r = spec.eta * term - (1.0 - spec.eta) * k if n > 0 else 0.0
        trace.quarters.append(QuarterRecord(t, State(K, N, b), n, k, b_next, r))
        trace.discounted_return += spec.gamma ** (t - 1) * r
        K, N, b = K + k, N + n, b_next
        if term:
            trace.terminal = True
            break
        if last:
            break
    return trace
