"""The batched outer loop with an ask/tell interface.

Typical use against an external expensive function::

    opt = BSMOBO(RunConfig(n=8, m=2, bounds=BoxBounds.unit(8), budget=160, init_count=60))
    while not opt.finished:
        xs = opt.ask()
        opt.tell([EvaluatedSolution(x, expensive(x)) for x in xs])
    front = opt.archive.nondominated()
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .core import Archive, BoxBounds, EvaluatedSolution, RngStream, _key, nondominated_subset
from .indicators import hypervolume, igd
from .moead import MoeadConfig, solve
from .problems import Problem
from .sampling import latin_hypercube
from .selection import greedy_select, lcb, reference_point
from .surrogate import SurrogateEnsemble, TrainingConfig, fit_ensemble

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    def __init__(self, problems: list[str]) -> None:
        super().__init__("invalid run configuration: " + "; ".join(problems))
        self.problems = problems


class ProtocolError(RuntimeError):
    """ask/tell called out of order, or told points that were not asked."""


class BudgetExhausted(RuntimeError):
    """The evaluation budget is spent; there is nothing left to ask."""


@dataclass
class RunConfig:
    n: int
    m: int
    bounds: BoxBounds
    budget: int = 160
    init_count: int = 60
    batch_size: int = 5
    population: int = 100
    mc_samples: int = 20
    use_gradients: bool = False
    training: TrainingConfig = field(default_factory=TrainingConfig)
    inner_generations: int = 100
    seed: int = 0
    ref_margin: float = 0.1
    beta: float = 1.0
    moead: MoeadConfig = field(default_factory=MoeadConfig)
    # seed the inner population with the archive's nondominated decision vectors
    seed_inner_population: bool = True

    def violations(self) -> list[str]:
        out = []
        if self.n < 1:
            out.append("n must be >= 1")
        if self.m < 2:
            out.append("m must be >= 2")
        if self.bounds.n != self.n:
            out.append(f"bounds have dimension {self.bounds.n}, expected n={self.n}")
        if self.init_count < 2:
            out.append("init_count must be >= 2")
        if self.batch_size < 1:
            out.append("batch_size must be >= 1")
        if self.init_count + self.batch_size > self.budget:
            out.append(
                f"init_count + batch_size = {self.init_count + self.batch_size} exceeds budget {self.budget}"
            )
        if self.batch_size > self.population:
            out.append("batch_size must not exceed population")
        if self.population < self.m:
            out.append("population must be >= m")
        if self.mc_samples < 2:
            out.append("mc_samples must be >= 2")
        if self.inner_generations < 1:
            out.append("inner_generations must be >= 1")
        if not 0 <= self.seed < 2**64:
            out.append("seed must be a 64-bit unsigned integer")
        return out

    def validate(self) -> None:
        problems = self.violations()
        if problems:
            raise ConfigError(problems)


@dataclass
class IterationTrace:
    iteration: int
    archive_size: int
    X: np.ndarray
    G: np.ndarray
    igd: float = float("nan")
    hypervolume: float = float("nan")
    train_losses: list[float] = field(default_factory=list)
    train_seconds: float = 0.0
    inner_seconds: float = 0.0
    select_seconds: float = 0.0


class BSMOBO:
    """Optimizer state; single writer, strictly alternating ask and tell after construction."""

    def __init__(
        self,
        cfg: RunConfig,
        reference_front: np.ndarray | None = None,
        hv_reference: np.ndarray | None = None,
    ) -> None:
        cfg.validate()
        self.cfg = cfg
        self.rng = RngStream(cfg.seed)
        self.archive = Archive()
        self.traces: list[IterationTrace] = []
        self.iteration = 0
        self.ensemble: SurrogateEnsemble | None = None
        self.reference_front = reference_front
        self.hv_reference = hv_reference
        self._initial = latin_hypercube(cfg.init_count, cfg.bounds, self.rng.child("init"))
        self._outstanding: np.ndarray | None = None
        self._pending: IterationTrace | None = None

    @property
    def remaining(self) -> int:
        return self.cfg.budget - len(self.archive)

    @property
    def finished(self) -> bool:
        return self._outstanding is None and self.remaining <= 0

    def ask(self) -> np.ndarray:
        """Next batch of decision vectors to evaluate, shape (b, n)."""
        if self._outstanding is not None:
            raise ProtocolError("a batch is still outstanding; tell its evaluations first")
        if self.remaining <= 0:
            raise BudgetExhausted(f"all {self.cfg.budget} evaluations are spent")
        if len(self.archive) == 0:
            self._outstanding = self._initial.copy()
            self._pending = None
            return self._outstanding.copy()

        cfg = self.cfg
        t = self.iteration + 1
        count = min(cfg.batch_size, self.remaining)

        ens = fit_ensemble(
            self.archive, cfg.bounds, cfg.training, self.rng.child(f"train-{t}"), cfg.mc_samples, self.ensemble
        )
        self.ensemble = ens

        t0 = time.perf_counter()
        predict_rng = self.rng.child(f"predict-{t}")

        def lcb_problem(X: np.ndarray) -> np.ndarray:
            return lcb(ens.predict_batch(X, predict_rng), cfg.beta)

        seeds = None
        if cfg.seed_inner_population:
            seeds = np.array([e.x for e in self.archive.nondominated()])
        cands = solve(
            lcb_problem, cfg.bounds, cfg.population, cfg.inner_generations, self.rng.child(f"inner-{t}"),
            cfg.moead, seeds,
        )
        t1 = time.perf_counter()
        r = reference_point(self.archive.F(), cfg.ref_margin)
        sel = greedy_select(cands, self.archive, count, r)
        X = sel.X
        if sel.shortfall:
            X = np.vstack([X, self._filler(count - len(sel), X, t)])
            log.warning("iteration %d: only %d distinct candidates, filled %d at random", t, len(sel), count - len(sel))
        t2 = time.perf_counter()

        self._pending = IterationTrace(
            iteration=t,
            archive_size=len(self.archive),
            X=X.copy(),
            G=sel.G.copy(),
            train_losses=[float(h[-1]) for h in ens.losses],
            train_seconds=ens.train_seconds,
            inner_seconds=t1 - t0,
            select_seconds=t2 - t1,
        )
        self._outstanding = X
        return X.copy()

    def _filler(self, count: int, taken: np.ndarray, t: int) -> np.ndarray:
        rng = self.rng.child(f"fill-{t}")
        out: list[np.ndarray] = []
        used = {_key(x) for x in taken}
        while len(out) < count:
            for x in latin_hypercube(count, self.cfg.bounds, rng):
                if x not in self.archive and _key(x) not in used and len(out) < count:
                    used.add(_key(x))
                    out.append(x)
        return np.array(out)

    def tell(self, evaluations: list[EvaluatedSolution]) -> IterationTrace:
        """Record the evaluations of the outstanding batch (any order) and return the iteration trace."""
        if self._outstanding is None:
            raise ProtocolError("tell called without an outstanding ask")
        asked = {_key(x): i for i, x in enumerate(self._outstanding)}
        by_slot: dict[int, EvaluatedSolution] = {}
        for ev in evaluations:
            slot = asked.get(_key(ev.x))
            if slot is None:
                raise ProtocolError(f"told a point that was not asked: {ev.x}")
            if slot in by_slot:
                raise ProtocolError(f"point told twice: {ev.x}")
            if self.cfg.use_gradients and ev.grad is None:
                raise ValueError("gradient mode requires a gradient with every evaluation")
            if ev.f.size != self.cfg.m:
                raise ValueError(f"expected {self.cfg.m} objective values, got {ev.f.size}")
            by_slot[slot] = ev if self.cfg.use_gradients else EvaluatedSolution(ev.x, ev.f)
        if len(by_slot) != len(self._outstanding):
            raise ProtocolError(f"expected {len(self._outstanding)} evaluations, got {len(by_slot)}")

        self.archive.extend(by_slot[i] for i in range(len(self._outstanding)))
        trace = self._pending or IterationTrace(0, 0, self._outstanding.copy(), np.empty((0, self.cfg.m)))
        trace.archive_size = len(self.archive)
        self._fill_metrics(trace)
        if self._pending is not None:
            self.iteration += 1
            self.traces.append(trace)
        self._outstanding = None
        self._pending = None
        return trace

    def _fill_metrics(self, trace: IterationTrace) -> None:
        if self.reference_front is None and self.hv_reference is None:
            return
        F = self.archive.F()
        front = F[nondominated_subset(F)]
        if self.reference_front is not None:
            trace.igd = igd(front, self.reference_front)
        if self.hv_reference is not None:
            trace.hypervolume = hypervolume(front, self.hv_reference)


def evaluate_batch(problem: Problem, X: np.ndarray, with_gradients: bool) -> list[EvaluatedSolution]:
    """True evaluations of a batch; each point is independent of the others."""
    out = []
    for x in X:
        if with_gradients:
            f, g = problem.evaluate_with_gradient(x)
            out.append(EvaluatedSolution(x, f, g))
        else:
            out.append(EvaluatedSolution(x, problem.evaluate(x)))
    return out


def run(
    cfg: RunConfig, problem: Problem, reference_front: np.ndarray | None = None
) -> tuple[Archive, list[IterationTrace]]:
    """Drive ask/tell against a built-in problem until exactly ``cfg.budget`` evaluations are spent."""
    if problem.n != cfg.n or problem.m != cfg.m:
        raise ConfigError([f"problem {problem.name} has n={problem.n}, m={problem.m}; config has n={cfg.n}, m={cfg.m}"])
    opt = BSMOBO(cfg, reference_front, problem.hv_reference() if reference_front is not None else None)
    while not opt.finished:
        X = opt.ask()
        trace = opt.tell(evaluate_batch(problem, X, cfg.use_gradients))
        if trace.iteration:
            log.info(
                "iter %d archive %d igd %.4g hv %.4g (train %.1fs inner %.1fs)",
                trace.iteration, trace.archive_size, trace.igd, trace.hypervolume,
                trace.train_seconds, trace.inner_seconds,
            )
    return opt.archive, opt.traces
