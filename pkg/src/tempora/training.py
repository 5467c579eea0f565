"""Link-prediction training harness.

Runs the future-link experiment end to end: load (or generate) an
interaction network, split it chronologically, fit the time
standardizer on training-window differences, train with BCE on
chronological positive batches plus uniform negatives, and evaluate
validation/test average precision under the configured negative-sampling
strategies. One training pass keeps a separate best-validation snapshot
per strategy and reports each snapshot's test AP under its own strategy.

Evaluation negatives are drawn once, up front, from a dedicated RNG
stream, so every epoch of one run scores the exact same candidate sets
and snapshot selection compares like with like.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .datasets import SurrogateConfig, generate_interaction_network
from .graph import (SplitBoundaries, TemporalGraph, chronological_split,
                    collect_time_differences, load_edge_list)
from .metrics import average_precision
from .models import ModelConfig, build_model, count_parameters
from .optim import Adam
from .sampling import (HistoricalPairTracker, sample_historical_negatives,
                       sample_random_negatives)
from .tensor import bce_with_logits

__all__ = [
    "ExperimentConfig",
    "RunResult",
    "EvalSet",
    "load_experiment_graph",
    "graph_from_meta",
    "train_link_model",
    "run_experiment",
    "dimension_sweep",
    "export_attention_records",
    "save_checkpoint",
    "load_checkpoint",
    "evaluate_checkpoint",
    "write_metrics_csv",
    "write_result_csv",
    "write_attention_records_csv",
]

NS_STRATEGIES = ("random", "historical")
SEED_ENV_VAR = "TEMPORA_SEED"


@dataclass
class ExperimentConfig:
    """One training experiment: data source, model, and loop settings.

    Exactly one of ``dataset`` (edge-list CSV path) and ``surrogate``
    (generator settings for the built-in communication-network surrogate)
    must be given. ``eval_strategies`` controls which negative-sampling
    strategies are scored each epoch; the first one listed is also the
    early-stopping monitor.
    """

    dataset: str | None = None
    surrogate: SurrogateConfig | None = None
    model: ModelConfig = field(default_factory=ModelConfig)
    batch_size: int = 200
    lr: float = 1e-4
    epochs: int = 50
    patience: int = 20
    seeds: tuple[int, ...] = (0,)
    eval_strategies: tuple[str, ...] = ("random", "historical")
    output_dir: str | None = None

    def __post_init__(self):
        if self.dataset is not None and self.surrogate is not None:
            raise ValueError("give at most one of dataset / surrogate")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("need at least one seed")
        self.eval_strategies = tuple(self.eval_strategies)
        if not self.eval_strategies:
            raise ValueError("need at least one eval strategy")
        for s in self.eval_strategies:
            if s not in NS_STRATEGIES:
                raise ValueError(f"unknown eval strategy {s!r}; "
                                 f"choose from {NS_STRATEGIES}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "model" in d and isinstance(d["model"], dict):
            d["model"] = ModelConfig.from_dict(d["model"])
        if "surrogate" in d and isinstance(d["surrogate"], dict):
            d["surrogate"] = SurrogateConfig(**d["surrogate"])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown experiment config keys: {sorted(unknown)}")
        cfg = cls(**d)
        env_seed = os.environ.get(SEED_ENV_VAR)
        if env_seed is not None:
            cfg.seeds = (int(env_seed),)
        return cfg

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class RunResult:
    """Everything one seeded training run produced.

    ``val_ap``/``test_ap``/``best_epoch`` are keyed by strategy name; AP
    values follow the 0-100 percent convention of the metrics module.
    """

    seed: int
    train_loss: list[float]
    val_ap: dict[str, list[float]]
    test_ap: dict[str, float]
    best_epoch: dict[str, int]
    best_val_ap: dict[str, float]
    param_count: int
    param_groups: dict[str, int]
    epochs_run: int


def load_experiment_graph(cfg: ExperimentConfig) -> TemporalGraph:
    if cfg.dataset is not None:
        return load_edge_list(cfg.dataset)
    if cfg.surrogate is not None:
        return generate_interaction_network(cfg.surrogate)
    raise ValueError("config names no data source (dataset or surrogate) "
                     "and no graph object was supplied")


def _rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent, reconstructible generators for the three sources of
    randomness in a run. Consumption order off the root is fixed (model,
    then training negatives, then evaluation negatives), so tests can
    replay any stream in isolation."""
    root = np.random.default_rng(seed)
    names = ("model", "train_neg", "eval_neg")
    return {name: np.random.default_rng(root.integers(2 ** 63))
            for name in names}


def _history_budget(mc: ModelConfig) -> int:
    """Events of history a single query can see; bounds the time
    differences the standardizer should be fitted on."""
    return mc.num_neighbors if mc.architecture == "tgat" else mc.seq_budget


def fit_time_standardizer(model, g: TemporalGraph,
                          boundaries: SplitBoundaries,
                          mc: ModelConfig) -> None:
    """Fit the encoder's shift/scale on training-window differences only
    (queries before the validation boundary). No-op for families that
    consume raw differences."""
    if not model.time_encoder.requires_standardizer:
        return
    diffs = collect_time_differences(g, t_max=boundaries.t_val,
                                     k=_history_budget(mc))
    model.time_encoder.fit_standardizer(diffs)


# -- evaluation sets ----------------------------------------------------------

@dataclass
class EvalSet:
    """A frozen evaluation task: every positive of one split plus one
    pre-drawn negative per positive. AP over the union is the split
    score; freezing the negatives makes per-epoch scores comparable."""

    split: str
    strategy: str
    pos_src: np.ndarray
    pos_dst: np.ndarray
    pos_t: np.ndarray
    neg_src: np.ndarray
    neg_dst: np.ndarray
    neg_t: np.ndarray
    fallback: np.ndarray                # historical draws that fell back to random

    @property
    def fallback_fraction(self) -> float:
        return float(self.fallback.mean())


def _build_eval_set(g: TemporalGraph, idx: np.ndarray, split: str,
                    strategy: str, batch_size: int,
                    rng: np.random.Generator) -> EvalSet:
    """Draw the negatives batch by batch in chronological order.

    For historical sampling the admissible pool for a batch is the set of
    ordered pairs seen strictly before it (index-prefix convention; the
    batch itself is excluded by the sampler), which is exactly the
    protocol the training-time batches would see.
    """
    neg_src, neg_dst, neg_t, fallbacks = [], [], [], []
    tracker = None
    if strategy == "historical":
        start = int(idx[0])
        tracker = HistoricalPairTracker.from_edges(g.src[:start], g.dst[:start])
    for lo in range(0, len(idx), batch_size):
        chunk = idx[lo:lo + batch_size]
        ps, pd, pt = g.src[chunk], g.dst[chunk], g.t[chunk]
        if strategy == "random":
            nb = sample_random_negatives(ps, pd, pt, g.num_nodes, rng)
        else:
            nb = sample_historical_negatives(ps, pd, pt, tracker.pairs, rng,
                                             num_nodes=g.num_nodes)
            tracker.add_batch(ps, pd)
        neg_src.append(nb.src)
        neg_dst.append(nb.dst)
        neg_t.append(nb.t)
        fallbacks.append(nb.fallback)
    return EvalSet(
        split=split, strategy=strategy,
        pos_src=g.src[idx], pos_dst=g.dst[idx], pos_t=g.t[idx],
        neg_src=np.concatenate(neg_src), neg_dst=np.concatenate(neg_dst),
        neg_t=np.concatenate(neg_t),
        fallback=np.concatenate(fallbacks),
    )


def build_eval_sets(g: TemporalGraph, boundaries: SplitBoundaries,
                    strategies, batch_size: int,
                    rng: np.random.Generator) -> dict:
    """{(split, strategy): EvalSet} for the validation and test windows.
    Draw order is fixed (splits outer, strategies inner) so one seed
    always produces the same sets."""
    _, val_mask, test_mask = boundaries.masks(g)
    sets = {}
    for split, mask in (("val", val_mask), ("test", test_mask)):
        idx = np.flatnonzero(mask)
        for strategy in strategies:
            sets[(split, strategy)] = _build_eval_set(
                g, idx, split, strategy, batch_size, rng)
    return sets


def _batched_scores(model, g: TemporalGraph, src, dst, t,
                    chunk: int = 400) -> np.ndarray:
    out = np.empty(len(t), dtype=np.float64)
    for lo in range(0, len(t), chunk):
        out[lo:lo + chunk] = model.predict_proba(
            g, src[lo:lo + chunk], dst[lo:lo + chunk], t[lo:lo + chunk])
    return out


def evaluate_ap(model, g: TemporalGraph, ev: EvalSet) -> float:
    """Split AP in percent: positives vs. the set's frozen negatives."""
    model.eval()
    pos = _batched_scores(model, g, ev.pos_src, ev.pos_dst, ev.pos_t)
    neg = _batched_scores(model, g, ev.neg_src, ev.neg_dst, ev.neg_t)
    scores = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    return average_precision(scores, labels)


# -- training -----------------------------------------------------------------

def train_link_model(cfg: ExperimentConfig, seed: int | None = None,
                     graph: TemporalGraph | None = None,
                     verbose: bool = False) -> RunResult:
    """One seeded run of the link-prediction experiment.

    Per epoch: chronological batches of training positives, each paired
    with an equal number of uniform-random negatives, BCE loss, Adam.
    After each epoch the validation AP is computed for every configured
    strategy against its frozen negative set, and the best-so-far
    parameters per strategy are kept. Training stops early once no
    monitored strategy has improved for ``patience`` epochs. Test AP is
    reported from each strategy's own snapshot.

    A non-finite training loss aborts with a diagnostic rather than
    silently selecting from garbage.
    """
    result, _, _ = _train_single(cfg, seed=seed, graph=graph, verbose=verbose)
    return result


def _train_single(cfg: ExperimentConfig, seed: int | None = None,
                  graph: TemporalGraph | None = None,
                  verbose: bool = False):
    """Training loop proper; also hands back the live model (carrying
    the fitted standardizer) and the per-strategy snapshots so callers
    can persist them."""
    if seed is None:
        seed = cfg.seeds[0]
    if graph is None:
        graph = load_experiment_graph(cfg)
    rngs = _rng_streams(seed)
    boundaries = chronological_split(graph)
    train_mask, _, _ = boundaries.masks(graph)
    train_idx = np.flatnonzero(train_mask)

    model = build_model(cfg.model, graph.d_V, graph.d_E, rngs["model"])
    fit_time_standardizer(model, graph, boundaries, cfg.model)
    total, groups = count_parameters(model)
    eval_sets = build_eval_sets(graph, boundaries, cfg.eval_strategies,
                                cfg.batch_size, rngs["eval_neg"])

    opt = Adam(model.parameters(), lr=cfg.lr)
    neg_rng = rngs["train_neg"]
    history_loss: list[float] = []
    val_ap = {s: [] for s in cfg.eval_strategies}
    best = {s: (-1.0, None, -1) for s in cfg.eval_strategies}

    for epoch in range(cfg.epochs):
        model.train()
        losses = []
        for lo in range(0, len(train_idx), cfg.batch_size):
            chunk = train_idx[lo:lo + cfg.batch_size]
            ps, pd, pt = graph.src[chunk], graph.dst[chunk], graph.t[chunk]
            nb = sample_random_negatives(ps, pd, pt, graph.num_nodes, neg_rng)
            src = np.concatenate([ps, nb.src])
            dst = np.concatenate([pd, nb.dst])
            t = np.concatenate([pt, nb.t])
            y = np.concatenate([np.ones(len(ps)), np.zeros(len(ps))])
            model.zero_grad()
            loss = bce_with_logits(model.score(graph, src, dst, t), y)
            if not np.isfinite(loss.data):
                raise RuntimeError(
                    f"training diverged: non-finite loss {loss.data} at "
                    f"epoch {epoch}, batch {lo // cfg.batch_size}")
            loss.backward()
            opt.step()
            losses.append(float(loss.data))
        history_loss.append(float(np.mean(losses)))

        model.eval()
        for s in cfg.eval_strategies:
            ap = evaluate_ap(model, graph, eval_sets[("val", s)])
            val_ap[s].append(ap)
            if ap > best[s][0]:
                best[s] = (ap, model.state_dict(), epoch)
        if verbose:
            shown = ", ".join(f"val_ap_{s}={val_ap[s][-1]:.2f}"
                              for s in cfg.eval_strategies)
            print(f"epoch {epoch}: loss={history_loss[-1]:.4f}, {shown}")
        last_improvement = max(b[2] for b in best.values())
        if epoch - last_improvement >= cfg.patience:
            break

    test_ap, best_epoch, best_val = {}, {}, {}
    for s in cfg.eval_strategies:
        ap_s, state_s, epoch_s = best[s]
        model.load_state_dict(state_s)
        test_ap[s] = evaluate_ap(model, graph, eval_sets[("test", s)])
        best_epoch[s] = epoch_s
        best_val[s] = ap_s
    result = RunResult(
        seed=seed, train_loss=history_loss, val_ap=val_ap, test_ap=test_ap,
        best_epoch=best_epoch, best_val_ap=best_val,
        param_count=total, param_groups=groups,
        epochs_run=len(history_loss),
    )
    return result, model, best


def run_experiment(cfg: ExperimentConfig,
                   graph: TemporalGraph | None = None,
                   verbose: bool = False) -> list[RunResult]:
    """All configured seeds; writes per-seed metrics/checkpoints and the
    combined result table when an output directory is set."""
    if graph is None:
        graph = load_experiment_graph(cfg)
    results = []
    for seed in cfg.seeds:
        result, model, best = _train_single(cfg, seed=seed, graph=graph,
                                            verbose=verbose)
        results.append(result)
        if cfg.output_dir is not None:
            seed_dir = os.path.join(cfg.output_dir, f"seed_{seed}")
            os.makedirs(seed_dir, exist_ok=True)
            write_metrics_csv(result, os.path.join(seed_dir, "metrics.csv"))
            for s in cfg.eval_strategies:
                _, state_s, _ = best[s]
                meta = checkpoint_meta(cfg, graph, result, strategy=s)
                save_checkpoint(os.path.join(seed_dir, f"checkpoint_{s}.npz"),
                                state_s, meta,
                                standardizer=model.time_encoder.standardizer)
    if cfg.output_dir is not None:
        os.makedirs(cfg.output_dir, exist_ok=True)
        write_result_csv(results, cfg.eval_strategies,
                         os.path.join(cfg.output_dir, "result.csv"))
    return results


# -- persistence --------------------------------------------------------------

def checkpoint_meta(cfg: ExperimentConfig, g: TemporalGraph,
                    result: RunResult, strategy: str) -> dict:
    """Everything needed to rebuild the model and, when the experiment
    named its data source, the graph it was trained on."""
    return {
        "model": dataclasses.asdict(cfg.model),
        "d_V": g.d_V, "d_E": g.d_E, "num_nodes": g.num_nodes,
        "dataset": cfg.dataset,
        "surrogate": (None if cfg.surrogate is None
                      else dataclasses.asdict(cfg.surrogate)),
        "seed": result.seed,
        "strategy": strategy,
        "best_epoch": result.best_epoch[strategy],
        "best_val_ap": result.best_val_ap[strategy],
        "standardizer": None,
    }


def graph_from_meta(meta: dict) -> TemporalGraph:
    """Rebuild the training graph a checkpoint refers to: a dataset is
    reloaded from its path, a surrogate regenerated deterministically."""
    if meta.get("dataset"):
        return load_edge_list(meta["dataset"])
    if meta.get("surrogate"):
        return generate_interaction_network(SurrogateConfig(**meta["surrogate"]))
    raise ValueError("checkpoint does not name its data source; "
                     "pass the graph explicitly")


def save_checkpoint(path, state: dict, meta: dict,
                    standardizer=None) -> None:
    """Single-file archive: parameter arrays under their dotted names
    plus a JSON metadata blob. The fitted time standardizer travels in
    the metadata because it is data-derived, not a trainable tensor."""
    if standardizer is not None:
        meta = dict(meta)
        meta["standardizer"] = {"mu": standardizer.mu,
                                "sigma": standardizer.sigma}
    np.savez(path, __meta_json__=np.array(json.dumps(meta)), **state)


def load_checkpoint(path):
    """-> (state dict of float64 arrays, metadata dict)."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(data["__meta_json__"].item())
        state = {k: data[k].copy() for k in data.files
                 if k != "__meta_json__"}
    return state, meta


def restore_model(state: dict, meta: dict):
    """Rebuild the architecture named in the metadata and load weights.
    The construction RNG is irrelevant (every parameter is overwritten),
    but the graph's feature widths must match what was trained."""
    from .time_encoding import TimeStandardizer
    mc = ModelConfig.from_dict(meta["model"])
    model = build_model(mc, meta["d_V"], meta["d_E"],
                        np.random.default_rng(0))
    model.load_state_dict(state)
    if meta.get("standardizer") is not None:
        model.time_encoder.standardizer = TimeStandardizer(
            mu=meta["standardizer"]["mu"],
            sigma=meta["standardizer"]["sigma"])
    model.eval()
    return model, mc


def evaluate_checkpoint(path, g: TemporalGraph, strategy: str,
                        batch_size: int = 200, eval_seed: int = 0) -> dict:
    """Score a saved model on the graph's test window under one
    negative-sampling strategy. The negative draw is seeded
    independently of training, so this is a fresh evaluation, not a
    replay of the training-time test set."""
    state, meta = load_checkpoint(path)
    if (meta["d_V"], meta["d_E"]) != (g.d_V, g.d_E):
        raise ValueError(
            f"checkpoint expects feature widths d_V={meta['d_V']}, "
            f"d_E={meta['d_E']}; graph has {g.d_V}, {g.d_E}")
    model, _ = restore_model(state, meta)
    boundaries = chronological_split(g)
    _, _, test_mask = boundaries.masks(g)
    idx = np.flatnonzero(test_mask)
    ev = _build_eval_set(g, idx, "test", strategy, batch_size,
                         np.random.default_rng(eval_seed))
    ap = evaluate_ap(model, g, ev)
    return {"test_ap": ap, "strategy": strategy, "meta": meta,
            "fallback_fraction": ev.fallback_fraction}


# -- attention export ---------------------------------------------------------

def export_attention_records(model, g: TemporalGraph, src, dst, t,
                             batch_size: int = 50) -> list[tuple]:
    """Last-layer attention entries for the given query edges as
    (role, t - t_q, t - t_k, score) tuples; sequence architectures only."""
    if not hasattr(model, "collect_attention_records"):
        raise TypeError(
            "attention export needs a sequence architecture with "
            "per-position timestamps; the graph-attention model does not "
            "expose role-tagged records")
    model.eval()
    src = np.asarray(src)
    dst = np.asarray(dst)
    t = np.asarray(t, dtype=np.float64)
    records = []
    for lo in range(0, len(t), batch_size):
        model.embed_pair(g, src[lo:lo + batch_size], dst[lo:lo + batch_size],
                         t[lo:lo + batch_size], record=True)
        records.extend(model.collect_attention_records())
    return records


def sample_test_edges(g: TemporalGraph, k: int,
                      seed: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """A seeded sample of k test-window positives (all of them if the
    window is smaller), in chronological order."""
    boundaries = chronological_split(g)
    _, _, test_mask = boundaries.masks(g)
    idx = np.flatnonzero(test_mask)
    if len(idx) > k:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(idx, size=k, replace=False))
    return g.src[idx], g.dst[idx], g.t[idx]


# -- dimension sweep ----------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    dim: int
    test_ap: float
    param_count: int


def sweep_field(mc: ModelConfig) -> str:
    """Which width the sweep varies: the encoder dimension for the
    graph-attention model, the time-channel width for the sequence
    family (the transformer width 3*d_ch + d_tc follows it)."""
    return "d_T" if mc.architecture == "tgat" else "d_tc"


def dimension_sweep(cfg: ExperimentConfig, dims,
                    graph: TemporalGraph | None = None,
                    verbose: bool = False) -> list[SweepRow]:
    """Retrain the first configured seed at each dimension and report
    test AP (first strategy's snapshot) next to the exact trainable
    parameter count."""
    if graph is None:
        graph = load_experiment_graph(cfg)
    field_name = sweep_field(cfg.model)
    monitor = cfg.eval_strategies[0]
    rows = []
    for dim in dims:
        mc = dataclasses.replace(cfg.model, **{field_name: int(dim)})
        sub = dataclasses.replace(cfg, model=mc, output_dir=None)
        result = train_link_model(sub, seed=cfg.seeds[0], graph=graph,
                                  verbose=verbose)
        rows.append(SweepRow(dim=int(dim), test_ap=result.test_ap[monitor],
                             param_count=result.param_count))
    if cfg.output_dir is not None:
        os.makedirs(cfg.output_dir, exist_ok=True)
        write_sweep_csv(rows, os.path.join(cfg.output_dir, "sweep.csv"))
    return rows


# -- CSV writers --------------------------------------------------------------

def write_metrics_csv(result: RunResult, path) -> None:
    """Per-epoch curves; strategies that were not evaluated leave their
    column empty so the header stays fixed."""
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss", "val_ap_random", "val_ap_hist"])
        for e in range(result.epochs_run):
            row = [e, repr(result.train_loss[e])]
            for s in ("random", "historical"):
                row.append(repr(result.val_ap[s][e]) if s in result.val_ap
                           else "")
            w.writerow(row)


def write_result_csv(results: list[RunResult], strategies, path) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "strategy", "best_epoch", "best_val_ap",
                    "test_ap", "param_count", "epochs_run"])
        for r in results:
            for s in strategies:
                w.writerow([r.seed, s, r.best_epoch[s],
                            repr(r.best_val_ap[s]), repr(r.test_ap[s]),
                            r.param_count, r.epochs_run])


def write_attention_records_csv(records, path) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["role", "t_minus_tq", "t_minus_tk", "score"])
        for role, dtq, dtk, score in records:
            w.writerow([role, repr(dtq), repr(dtk), repr(score)])


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dim", "test_ap", "param_count"])
        for r in rows:
            w.writerow([r.dim, repr(r.test_ap), r.param_count])
