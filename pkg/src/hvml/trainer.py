"""The training loop: hypervolume-contribution fitness driving a CMA-ES.

Each epoch samples a population of parameter vectors, scores every candidate
on the training and validation splits, and prescribes as fitness the
candidate's hypervolume contribution computed over the population's TRAINING
loss vectors against the current reference set. Validation losses go into
the archives (full non-dominated front plus per-loss bests) and never touch
fitness; the test split is only evaluated once at the end.

The reference set starts at the unit vector and evolves each epoch to the
non-dominated union with the population's training loss vectors; candidate
fitness within an epoch is measured against the set in force when the
candidates were generated. Fitness uses the Monte Carlo estimator with one
seeded stream per (epoch, candidate) pair, switching to the exact
contribution when the combined front is small enough for exactness to be
cheap (or always, with ``exact_fitness``). Everything derives from one root
seed, so runs are bit-identical across repeats and worker counts.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import cmaes, losses, model, pareto, seeds
from .data import Dataset
from .errors import ConfigError
from .losses import LossVector

EXACT_FITNESS_MAX_POINTS = 20
LOSS_KEYS = ("l1", "l2", "l3", "l4")

STATE_FILE = "state.npz"
MODEL_FILE = "incumbent.model"
META_FILE = "checkpoint.json"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 750
    embedding: int = 20
    mc_samples: int = 10_000
    seed: int = 0
    threshold: float = 0.5
    sigma: float = 0.3
    lambda_pop: int | None = None
    mu: int | None = None
    c_cov: float | None = None
    literal_cma: bool = False
    exact_fitness: bool = False      # force exact contributions at any front size
    archive_cap: int = 512
    track_archive_hv: bool = True
    workers: int = 1
    # experimental: one-fifth success rule on sigma (success = positive fitness);
    # off by default, the step size is otherwise constant
    sigma_rule: str = "none"

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.mc_samples < 1:
            raise ConfigError("mc_samples must be >= 1")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie in (0, 1)")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.sigma_rule not in ("none", "fifth"):
            raise ConfigError(f"sigma_rule must be 'none' or 'fifth', got {self.sigma_rule!r}")


@dataclass
class CandidateRecord:
    """Per-candidate curve point: losses on both splits plus the fitness."""

    epoch: int
    candidate: int
    train: LossVector
    train_bce: float
    validation: LossVector
    validation_bce: float
    fitness: float


@dataclass
class Incumbent:
    params: model.ModelParams
    validation: LossVector
    validation_bce: float
    epoch: int
    candidate: int


@dataclass
class TrainState:
    """Everything the loop carries between epochs (and into checkpoints)."""

    cma: cmaes.CmaState
    shape: model.ModelShape
    ref_set: pareto.Front
    epoch: int
    incumbent: Incumbent
    best_per_loss: dict[str, Incumbent]
    archive: pareto.Front
    curves: list[CandidateRecord] = field(default_factory=list)
    archive_hv: list[float] = field(default_factory=list)


@dataclass
class TrainResult:
    config: TrainConfig
    shape: model.ModelShape
    final: Incumbent
    final_test: LossVector
    final_test_bce: float
    best_per_loss: dict[str, Incumbent]
    best_per_loss_test: dict[str, tuple[LossVector, float]]
    ref_set: pareto.Front
    archive: pareto.Front
    curves: list[CandidateRecord]
    archive_hv: list[float]
    epochs_run: int
    state: "TrainState" = None  # final loop state, for checkpointing


def evaluate(params: model.ModelParams, dataset: Dataset, split: str,
             threshold: float = 0.5) -> tuple[LossVector, float]:
    """Loss vector and BCE of a model on one split of a dataset."""
    x, y = dataset.rows(split)
    scores = model.forward(params, x)
    return losses.loss_vector(scores, y, threshold), losses.bce(scores, y)


def _evaluate_xy(params, x, y, threshold):
    scores = model.forward(params, x)
    return losses.loss_vector(scores, y, threshold), losses.bce(scores, y)


def _prune_archive(front: pareto.Front, cap: int) -> pareto.Front:
    """Drop the smallest exact contribution first until the front fits."""
    while len(front) > cap:
        contribs = [pareto.exact_contribution(front, t) for t in front.tags]
        drop = int(np.argmin(contribs))
        keep = [i for i in range(len(front)) if i != drop]
        front = pareto.Front(front.points[keep], tuple(front.tags[i] for i in keep))
    return front


def _update_bests(bests: dict[str, Incumbent], cand: Incumbent) -> None:
    values = dict(zip(LOSS_KEYS, (*cand.validation, cand.validation_bce)))
    for key in LOSS_KEYS:
        cur = bests.get(key)
        cur_val = None if cur is None else dict(zip(LOSS_KEYS, (*cur.validation, cur.validation_bce)))[key]
        if cur is None or values[key] < cur_val:
            bests[key] = cand


def _initial_state(dataset: Dataset, config: TrainConfig) -> TrainState:
    shape = model.ModelShape(d=dataset.d, c=config.embedding, k=dataset.k)
    cma = cmaes.CmaState.initial(
        shape.n_params, sigma=config.sigma, lambda_pop=config.lambda_pop,
        mu=config.mu, c_cov=config.c_cov, literal_updates=config.literal_cma,
    )
    params0 = model.ModelParams(cma.mean.copy(), shape)
    val_lv, val_bce = evaluate(params0, dataset, "validation", config.threshold)
    seed0 = Incumbent(params0, val_lv, val_bce, epoch=0, candidate=-1)
    bests: dict[str, Incumbent] = {}
    _update_bests(bests, seed0)
    archive = pareto.nondominated_filter([(np.asarray(val_lv), "e0")])
    state = TrainState(
        cma=cma, shape=shape,
        ref_set=pareto.Front(np.ones((1, 3)), ("r0",)),
        epoch=0, incumbent=seed0, best_per_loss=bests, archive=archive,
    )
    if config.track_archive_hv:
        state.archive_hv.append(pareto.exact_hypervolume(state.archive))
    return state


def _fitness(train_vecs: np.ndarray, config: TrainConfig,
             epoch: int, pool) -> np.ndarray:
    """Per-candidate fitness: exclusive hypervolume contribution within the
    generation's own training loss vectors, bounded by the unit vector (the
    Monte Carlo sampling space). Scoping the contribution to the generation
    keeps the selection signal alive for the whole run: the population front
    is never empty, unlike contributions measured against the all-time
    archive, which starve to zero once the archive outruns the distribution."""
    lam = train_vecs.shape[0]
    front = list(zip(train_vecs, [str(i) for i in range(lam)]))
    use_exact = config.exact_fitness or lam <= EXACT_FITNESS_MAX_POINTS

    def one(i: int) -> float:
        if use_exact:
            return pareto.exact_contribution(front, str(i))
        seed = seeds.seed_sequence(config.seed, seeds.STREAM_MC, epoch, i)
        return pareto.mc_contribution(front, str(i), g=config.mc_samples, seed=seed)

    if pool is None:
        return np.array([one(i) for i in range(lam)])
    return np.array(list(pool.map(one, range(lam))))


def train(dataset: Dataset, config: TrainConfig,
          resume_state: TrainState | None = None) -> TrainResult:
    """Run the optimization loop and return incumbents, archives, and curves."""
    if dataset.split is None:
        raise ConfigError("dataset must be split before training")
    x_tr, y_tr = dataset.rows("train")
    x_va, y_va = dataset.rows("validation")

    state = resume_state if resume_state is not None else _initial_state(dataset, config)
    cma = state.cma
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for epoch in range(state.epoch + 1, config.epochs + 1):
            population = cmaes.sample_population(
                cma, seeds.seed_sequence(config.seed, seeds.STREAM_SAMPLE, epoch))
            params = [model.ModelParams(theta, state.shape) for theta in population]

            def eval_candidate(p):
                return (_evaluate_xy(p, x_tr, y_tr, config.threshold),
                        _evaluate_xy(p, x_va, y_va, config.threshold))

            if pool is None:
                evals = [eval_candidate(p) for p in params]
            else:
                evals = list(pool.map(eval_candidate, params))
            train_vecs = np.array([np.asarray(tr[0]) for tr, _ in evals])

            fitness = _fitness(train_vecs, config, epoch, pool)

            # archives and curves use validation losses only
            for i, ((tr_lv, tr_bce), (va_lv, va_bce)) in enumerate(evals):
                state.curves.append(CandidateRecord(
                    epoch=epoch, candidate=i, train=tr_lv, train_bce=tr_bce,
                    validation=va_lv, validation_bce=va_bce, fitness=float(fitness[i])))
                cand = Incumbent(params[i], va_lv, va_bce, epoch=epoch, candidate=i)
                _update_bests(state.best_per_loss, cand)
            val_pairs = [(np.asarray(evals[i][1][0]), f"e{epoch}c{i}")
                         for i in range(len(params))]
            state.archive = pareto.update_reference_set(state.archive, val_pairs)
            state.archive = _prune_archive(state.archive, config.archive_cap)
            if config.track_archive_hv:
                state.archive_hv.append(pareto.exact_hypervolume(state.archive))

            # distribution update from the top-mu by fitness (ties: candidate order)
            order = np.argsort(-fitness, kind="stable")
            cma = cmaes.evolve(cma, population[order[: cma.mu]])
            if config.sigma_rule == "fifth":
                success = float(np.mean(fitness > 0.0))
                factor = np.exp((success - 0.2) / 3.0)
                cma = replace(cma, sigma=float(np.clip(cma.sigma * factor, 1e-8, 10.0)))

            state.ref_set = pareto.update_reference_set(
                state.ref_set, [(train_vecs[i], f"e{epoch}c{i}") for i in range(len(params))])

            best_i = int(order[0])
            state.incumbent = Incumbent(params[best_i], evals[best_i][1][0],
                                        evals[best_i][1][1], epoch=epoch, candidate=best_i)
            state.cma = cma
            state.epoch = epoch
    finally:
        if pool is not None:
            pool.shutdown()

    final_test, final_test_bce = evaluate(state.incumbent.params, dataset, "test", config.threshold)
    best_test = {
        key: evaluate(inc.params, dataset, "test", config.threshold)
        for key, inc in state.best_per_loss.items()
    }
    return TrainResult(
        config=config, shape=state.shape,
        final=state.incumbent, final_test=final_test, final_test_bce=final_test_bce,
        best_per_loss=dict(state.best_per_loss), best_per_loss_test=best_test,
        ref_set=state.ref_set, archive=state.archive,
        curves=list(state.curves), archive_hv=list(state.archive_hv),
        epochs_run=state.epoch, state=state,
    )


def emit_curves(curves: list[CandidateRecord], path) -> None:
    """Write the per-candidate loss trajectories as CSV: one row per candidate
    per split per epoch."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,candidate,split,l1,l2,l3,l4,fitness\n")
        for rec in curves:
            for split, lv, b in (("train", rec.train, rec.train_bce),
                                 ("validation", rec.validation, rec.validation_bce)):
                fh.write(f"{rec.epoch},{rec.candidate},{split},"
                         f"{lv.l1:.17g},{lv.l2:.17g},{lv.l3:.17g},{b:.17g},{rec.fitness:.17g}\n")


def read_curves(path) -> list[CandidateRecord]:
    """Parse a curves CSV back into records (inverse of emit_curves)."""
    rows: dict[tuple[int, int], dict] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        assert header == ["epoch", "candidate", "split", "l1", "l2", "l3", "l4", "fitness"]
        for line in fh:
            cells = line.strip().split(",")
            key = (int(cells[0]), int(cells[1]))
            entry = rows.setdefault(key, {"fitness": float(cells[7])})
            entry[cells[2]] = (LossVector(float(cells[3]), float(cells[4]), float(cells[5])),
                               float(cells[6]))
    out = []
    for (epoch, cand), entry in sorted(rows.items()):
        tr, tr_b = entry["train"]
        va, va_b = entry["validation"]
        out.append(CandidateRecord(epoch, cand, tr, tr_b, va, va_b, entry["fitness"]))
    return out


# ---------------------------------------------------------------------------
# checkpointing

def save_checkpoint(state: TrainState, config: TrainConfig, out_dir) -> None:
    """Write a resumable checkpoint: the incumbent in the binary model format,
    the optimizer/archive arrays, and a JSON sidecar with config and epoch."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.save_model(state.incumbent.params, out / MODEL_FILE)
    best_keys = sorted(state.best_per_loss)
    np.savez_compressed(
        out / STATE_FILE,
        mean=state.cma.mean, cov=state.cma.cov, sigma=state.cma.sigma,
        lambda_pop=state.cma.lambda_pop, mu=state.cma.mu,
        weights=state.cma.weights, c_cov=state.cma.c_cov,
        literal=state.cma.literal_updates,
        ref_points=state.ref_set.points,
        ref_tags=np.array(state.ref_set.tags, dtype=object),
        archive_points=state.archive.points,
        archive_tags=np.array(state.archive.tags, dtype=object),
        archive_hv=np.array(state.archive_hv),
        best_keys=np.array(best_keys, dtype=object),
        best_params=np.array([state.best_per_loss[k].params.flat for k in best_keys]),
        best_meta=np.array([[*state.best_per_loss[k].validation,
                             state.best_per_loss[k].validation_bce,
                             state.best_per_loss[k].epoch,
                             state.best_per_loss[k].candidate] for k in best_keys]),
        incumbent_meta=np.array([*state.incumbent.validation, state.incumbent.validation_bce,
                                 state.incumbent.epoch, state.incumbent.candidate]),
    )
    meta = {"epoch": state.epoch, "shape": [state.shape.d, state.shape.c, state.shape.k],
            "config": asdict(config)}
    (out / META_FILE).write_text(json.dumps(meta, indent=2))


def load_checkpoint(out_dir) -> tuple[TrainState, TrainConfig]:
    out = Path(out_dir)
    meta = json.loads((out / META_FILE).read_text())
    config = TrainConfig(**meta["config"])
    shape = model.ModelShape(*meta["shape"])
    blob = np.load(out / STATE_FILE, allow_pickle=True)
    cma = cmaes.CmaState(
        mean=blob["mean"], cov=blob["cov"], sigma=float(blob["sigma"]),
        lambda_pop=int(blob["lambda_pop"]), mu=int(blob["mu"]),
        weights=blob["weights"], c_cov=float(blob["c_cov"]),
        literal_updates=bool(blob["literal"]),
    )
    inc_params = model.load_model(out / MODEL_FILE)

    def unpack_meta(row, params):
        return Incumbent(params, LossVector(row[0], row[1], row[2]), float(row[3]),
                         epoch=int(row[4]), candidate=int(row[5]))

    bests = {}
    for key, flat, row in zip(blob["best_keys"], blob["best_params"], blob["best_meta"]):
        bests[str(key)] = unpack_meta(row, model.ModelParams(flat, shape))
    state = TrainState(
        cma=cma, shape=shape,
        ref_set=pareto.Front(blob["ref_points"], tuple(str(t) for t in blob["ref_tags"])),
        epoch=int(meta["epoch"]),
        incumbent=unpack_meta(blob["incumbent_meta"], inc_params),
        best_per_loss=bests,
        archive=pareto.Front(blob["archive_points"], tuple(str(t) for t in blob["archive_tags"])),
        archive_hv=list(blob["archive_hv"]),
    )
    return state, config
