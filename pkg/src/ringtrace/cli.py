"""Command-line interface: run the detection pipeline end to end or one
stage at a time.

Stages communicate through files so each can be iterated on in isolation:
``synth`` emits a transactions CSV plus ground truth, ``graph``/``walk``/
``embed``/``cluster``/``detect`` consume the previous stage's artifact, and
``pipeline`` chains everything and writes a manifest with content hashes.
All knobs come from flags or a flat ``key = value`` config file; flags win.
One global seed feeds every stage through labeled hashing, so changing,
say, a clustering parameter never perturbs the walks.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import clustering, detect, embedding, graph, ingest, synth, walks

STAGE_EXIT_CODES = {
    "config": 2,
    "ingest": 3,
    "graph": 4,
    "walk": 5,
    "embed": 6,
    "cluster": 7,
    "detect": 8,
    "eval": 9,
    "synth": 10,
}


class StageError(Exception):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class RunSettings:
    """Every pipeline knob, resolved from defaults, config file, and flags."""

    input: str | None = None
    out_dir: str = "out"
    p: float = 1.0
    q: float = 0.5
    walk_length: int = 80
    walks_per_node: int = 10
    dims: int | None = None
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.025
    eps: float = 0.15
    min_pts: int = 5
    scale: str = "log1p"
    max_cycle_len: int = 6
    cycle_window_days: int = 30
    tolerance: float = 0.02
    seed: int = 0
    threads: int = 1
    deterministic: bool = False
    # synth-only knobs
    n_dealers: int = 500
    n_background_txs: int = 3000
    n_rings: int = 5
    ring_size_min: int = 8
    ring_size_max: int = 15
    fake_txs_per_ring: int = 40
    amount_min: int = 1000
    amount_max: int = 50000
    jitter: float = 0.02
    tax_rate: float = 0.10
    horizon_days: int = 180

    def effective_threads(self) -> int:
        return 1 if self.deterministic else self.threads

    def walk_config(self) -> walks.WalkConfig:
        return walks.WalkConfig(
            p=self.p,
            q=self.q,
            walk_length=self.walk_length,
            walks_per_node=self.walks_per_node,
            seed=derive_seed(self.seed, "walk"),
        )

    def embed_config(self) -> embedding.EmbedConfig:
        return embedding.EmbedConfig(
            dimensions=self.dims,
            window=self.window,
            negatives=self.negatives,
            epochs=self.epochs,
            learning_rate=self.lr,
            seed=derive_seed(self.seed, "embed"),
            threads=self.effective_threads(),
        )

    def dbscan_config(self) -> clustering.DbscanConfig:
        return clustering.DbscanConfig(eps=self.eps, min_pts=self.min_pts)

    def scenario_config(self) -> synth.ScenarioConfig:
        return synth.ScenarioConfig(
            n_dealers=self.n_dealers,
            n_background_txs=self.n_background_txs,
            n_rings=self.n_rings,
            ring_size_range=(self.ring_size_min, self.ring_size_max),
            fake_txs_per_ring=self.fake_txs_per_ring,
            amount_range=(self.amount_min, self.amount_max),
            fake_amount_jitter=self.jitter,
            tax_rate=self.tax_rate,
            time_horizon_days=self.horizon_days,
            seed=derive_seed(self.seed, "synth"),
        )

    def cycle_window_minutes(self) -> int:
        return self.cycle_window_days * 24 * 60

    def validate(self) -> None:
        """Build every component config so bad values fail before any
        artifact is touched."""
        if self.scale not in graph.SCALES:
            raise ValueError(f"scale must be one of {graph.SCALES}")
        if self.max_cycle_len < 2:
            raise ValueError("max_cycle_len must be at least 2")
        if self.cycle_window_days < 1:
            raise ValueError("cycle_window_days must be positive")
        if not 0.0 <= self.tolerance < 1.0:
            raise ValueError("tolerance must be in [0, 1)")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        self.walk_config()
        self.embed_config()
        self.dbscan_config()
        self.scenario_config()


def derive_seed(seed: int, label: str) -> int:
    """Stable per-stage seed from the global seed and a stage label."""
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


_BOOL_KEYS = {"deterministic"}
_INT_KEYS = {
    "walk_length", "walks_per_node", "dims", "window", "negatives", "epochs",
    "min_pts", "max_cycle_len", "cycle_window_days", "seed", "threads",
    "n_dealers", "n_background_txs", "n_rings", "ring_size_min",
    "ring_size_max", "fake_txs_per_ring", "amount_min", "amount_max",
    "horizon_days",
}
_FLOAT_KEYS = {"p", "q", "lr", "eps", "tolerance", "jitter", "tax_rate"}


def parse_config_file(path: str | Path) -> dict:
    """Flat ``key = value`` file; keys mirror the CLI flags."""
    values: dict = {}
    known = {f.name for f in dataclasses.fields(RunSettings)}
    for lineno, raw in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        if key in _BOOL_KEYS:
            values[key] = value.lower() in ("1", "true", "yes", "on")
        elif key in _INT_KEYS:
            values[key] = int(value) if value.lower() != "none" else None
        elif key in _FLOAT_KEYS:
            values[key] = float(value)
        else:
            values[key] = value
    return values


def serialize_settings(settings: RunSettings) -> str:
    lines = []
    for field in dataclasses.fields(RunSettings):
        value = getattr(settings, field.name)
        if value is None:
            value = "none"
        lines.append(f"{field.name} = {value}")
    return "\n".join(lines) + "\n"


def resolve_settings(args: argparse.Namespace) -> RunSettings:
    try:
        values: dict = {}
        if getattr(args, "config", None):
            values.update(parse_config_file(args.config))
        for field in dataclasses.fields(RunSettings):
            cli_value = getattr(args, field.name, None)
            if cli_value is not None:
                values[field.name] = cli_value
        settings = RunSettings(**values)
        settings.validate()
    except (TypeError, ValueError, OSError) as exc:
        raise StageError("config", exc) from exc
    return settings


def _add_shared_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="flat key = value config file")
    parser.add_argument("--input", help="transactions CSV")
    parser.add_argument("--out-dir", dest="out_dir", help="artifact directory (default: out)")
    parser.add_argument("--seed", type=int, help="global seed (default: 0)")
    parser.add_argument("--threads", type=int, help="worker threads (default: 1)")
    parser.add_argument(
        "--deterministic", action="store_const", const=True, default=None,
        help="force single-threaded, byte-reproducible embedding",
    )


def _add_walk_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--p", type=float, help="return parameter (default: 1)")
    parser.add_argument("--q", type=float, help="in-out parameter (default: 0.5)")
    parser.add_argument("--walk-length", dest="walk_length", type=int)
    parser.add_argument("--walks-per-node", dest="walks_per_node", type=int)
    parser.add_argument("--scale", choices=graph.SCALES, help="edge weight scaling")


def _add_embed_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dims", type=int, help="embedding dimensions (default: floor(sqrt(n)))")
    parser.add_argument("--window", type=int)
    parser.add_argument("--negatives", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--lr", type=float, help="initial learning rate")


def _add_cluster_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--eps", type=float, help="cosine-distance radius")
    parser.add_argument("--min-pts", dest="min_pts", type=int)


def _add_detect_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-cycle-len", dest="max_cycle_len", type=int)
    parser.add_argument("--cycle-window-days", dest="cycle_window_days", type=int)
    parser.add_argument("--tolerance", type=float, help="max relative amount spread")


def _add_synth_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-dealers", dest="n_dealers", type=int)
    parser.add_argument("--n-background-txs", dest="n_background_txs", type=int)
    parser.add_argument("--n-rings", dest="n_rings", type=int)
    parser.add_argument("--ring-size-min", dest="ring_size_min", type=int)
    parser.add_argument("--ring-size-max", dest="ring_size_max", type=int)
    parser.add_argument("--fake-txs-per-ring", dest="fake_txs_per_ring", type=int)
    parser.add_argument("--amount-min", dest="amount_min", type=int)
    parser.add_argument("--amount-max", dest="amount_max", type=int)
    parser.add_argument("--jitter", type=float, help="fake-cycle amount jitter")
    parser.add_argument("--tax-rate", dest="tax_rate", type=float)
    parser.add_argument("--horizon-days", dest="horizon_days", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ringtrace",
        description="Detect circular-trading communities in sales transaction data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic scenario with planted rings")
    _add_shared_flags(p_synth)
    _add_synth_flags(p_synth)

    p_ingest = sub.add_parser("ingest", help="validate and canonicalize a transactions CSV")
    _add_shared_flags(p_ingest)

    p_graph = sub.add_parser("graph", help="build and project the sales flow graph")
    _add_shared_flags(p_graph)
    _add_walk_flags(p_graph)

    p_walk = sub.add_parser("walk", help="generate biased random walks")
    _add_shared_flags(p_walk)
    _add_walk_flags(p_walk)

    p_embed = sub.add_parser("embed", help="train node embeddings from walks")
    _add_shared_flags(p_embed)
    _add_embed_flags(p_embed)
    p_embed.add_argument("--walks", help="walks file (default: OUT_DIR/walks.txt)")

    p_cluster = sub.add_parser("cluster", help="cluster embeddings with DBSCAN")
    _add_shared_flags(p_cluster)
    _add_cluster_flags(p_cluster)
    p_cluster.add_argument("--embeddings", help="embeddings CSV (default: OUT_DIR/embeddings.csv)")

    p_detect = sub.add_parser("detect", help="flag zero-value-add cycles per community")
    _add_shared_flags(p_detect)
    _add_detect_flags(p_detect)
    p_detect.add_argument("--clusters", help="clusters CSV (default: OUT_DIR/clusters.csv)")
    p_detect.add_argument("--embeddings", help="embeddings CSV for the 2-D projection")

    p_eval = sub.add_parser("eval", help="score predictions against ground truth")
    _add_shared_flags(p_eval)
    p_eval.add_argument("--pred-dir", dest="pred_dir", help="directory with clusters.csv")
    p_eval.add_argument("--truth", help="ground truth JSON")

    p_pipe = sub.add_parser("pipeline", help="run every stage end to end")
    _add_shared_flags(p_pipe)
    _add_walk_flags(p_pipe)
    _add_embed_flags(p_pipe)
    _add_cluster_flags(p_pipe)
    _add_detect_flags(p_pipe)

    return parser


def _require_input(settings: RunSettings) -> Path:
    if not settings.input:
        raise StageError("config", ValueError("--input is required"))
    return Path(settings.input)


def _out_dir(settings: RunSettings) -> Path:
    out = Path(settings.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_stage(stage: str, fn, *args):
    try:
        return fn(*args)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_synth(settings: RunSettings, args: argparse.Namespace) -> None:
    cfg = settings.scenario_config()
    out = _out_dir(settings)
    registry, txs, truth = _run_stage("synth", synth.generate_scenario, cfg)
    ingest.write_transactions(out / "transactions.csv", registry, txs)
    synth.write_ground_truth(out / "ground_truth.json", truth)
    print(
        f"synth: {len(registry)} dealers, {len(txs)} transactions, "
        f"{truth.n_rings()} rings -> {out / 'transactions.csv'}"
    )


def cmd_ingest(settings: RunSettings, args: argparse.Namespace) -> None:
    path = _require_input(settings)
    registry, txs = _run_stage("ingest", ingest.parse_transactions, path)
    out = _out_dir(settings)
    ingest.write_transactions(out / "transactions.csv", registry, txs)
    print(
        f"ingest: {len(txs)} transactions, {len(registry)} dealers "
        f"-> {out / 'transactions.csv'}"
    )


def _load_graphs(settings: RunSettings):
    registry, txs = _run_stage(
        "ingest", ingest.parse_transactions, _require_input(settings)
    )
    sfg = _run_stage("graph", graph.build_sales_flow_graph, registry, txs)
    wg = _run_stage("graph", graph.project_to_weighted, sfg, settings.scale)
    return registry, sfg, wg


def cmd_graph(settings: RunSettings, args: argparse.Namespace) -> None:
    _, _, wg = _load_graphs(settings)
    out = _out_dir(settings)
    graph.write_edgelist(out / "graph.edgelist", wg)
    stats = graph.degree_stats(wg)
    print(
        f"graph: {stats.nodes} nodes, {stats.edges} edges, "
        f"degree {stats.min_degree}/{stats.mean_degree:.2f}/{stats.max_degree}, "
        f"total weight {stats.total_weight:.2f} -> {out / 'graph.edgelist'}"
    )


def cmd_walk(settings: RunSettings, args: argparse.Namespace) -> None:
    _, _, wg = _load_graphs(settings)
    corpus = _run_stage("walk", walks.generate_walks, wg, settings.walk_config())
    out = _out_dir(settings)
    walks.write_walks(out / "walks.txt", corpus)
    print(
        f"walk: {len(corpus)} walks, {corpus.num_tokens()} tokens "
        f"-> {out / 'walks.txt'}"
    )


def cmd_embed(settings: RunSettings, args: argparse.Namespace) -> None:
    registry, _ = _run_stage(
        "ingest", ingest.parse_transactions, _require_input(settings)
    )
    out = _out_dir(settings)
    walks_path = Path(args.walks) if args.walks else out / "walks.txt"
    corpus = _run_stage("embed", walks.read_walks, walks_path)
    emb = _run_stage(
        "embed", embedding.train, corpus, len(registry), settings.embed_config()
    )
    embedding.write_embeddings(out / "embeddings.csv", emb.input_vectors)
    print(
        f"embed: {emb.input_vectors.shape[0]} x {emb.input_vectors.shape[1]} "
        f"-> {out / 'embeddings.csv'}"
    )


def cmd_cluster(settings: RunSettings, args: argparse.Namespace) -> None:
    out = _out_dir(settings)
    emb_path = Path(args.embeddings) if args.embeddings else out / "embeddings.csv"
    vectors = _run_stage("cluster", embedding.read_embeddings, emb_path)
    assignment = _run_stage(
        "cluster", clustering.dbscan, vectors, settings.dbscan_config()
    )
    clustering.write_clusters(out / "clusters.csv", assignment)
    noise = int(np.sum(assignment.labels == clustering.NOISE))
    print(
        f"cluster: {assignment.n_clusters} clusters, {noise} noise "
        f"-> {out / 'clusters.csv'}"
    )


def cmd_detect(settings: RunSettings, args: argparse.Namespace) -> None:
    registry, txs = _run_stage(
        "ingest", ingest.parse_transactions, _require_input(settings)
    )
    sfg = _run_stage("graph", graph.build_sales_flow_graph, registry, txs)
    out = _out_dir(settings)
    clusters_path = Path(args.clusters) if args.clusters else out / "clusters.csv"
    assignment = _run_stage("detect", clustering.read_clusters, clusters_path)
    communities = _run_stage("detect", detect.extract_communities, assignment, sfg)
    reports = [
        _run_stage(
            "detect",
            detect.detect_cycles,
            community,
            settings.max_cycle_len,
            settings.cycle_window_minutes(),
            settings.tolerance,
        )
        for community in communities
    ]
    detect.write_cycles_jsonl(out / "cycles.jsonl", reports)
    emb_path = Path(args.embeddings) if args.embeddings else out / "embeddings.csv"
    if emb_path.exists():
        vectors = _run_stage("detect", embedding.read_embeddings, emb_path)
        coords = _run_stage("detect", detect.project_2d, vectors)
        detect.write_projection(out / "projection.csv", coords, assignment.labels)
    total = sum(len(r.cycles) for r in reports)
    flagged = sum(len(r.flagged_cycles()) for r in reports)
    print(
        f"detect: {total} cycles, {flagged} flagged across "
        f"{len(communities)} communities -> {out / 'cycles.jsonl'}"
    )


def _evaluate(
    assignment: clustering.ClusterAssignment, truth: synth.GroundTruth
) -> detect.EvalScores:
    labels = assignment.labels
    membership = truth.ring_membership
    if len(membership) != len(labels):
        raise ValueError(
            f"ground truth covers {len(membership)} dealers, "
            f"predictions cover {len(labels)}"
        )
    mask = np.array([m is not None for m in membership])
    truth_labels = np.array([-1 if m is None else m for m in membership])
    if mask.any():
        ari = detect.adjusted_rand_index(labels[mask], truth_labels[mask])
        nmi = detect.normalized_mutual_information(labels[mask], truth_labels[mask])
    else:
        ari = nmi = 1.0
    communities = [
        set(np.flatnonzero(labels == cid)) for cid in range(assignment.n_clusters)
    ]
    rings = truth.ring_members(truth.n_rings())
    precision, recall = detect.ring_recovery(communities, rings)
    return detect.EvalScores(
        ari=ari, nmi=nmi, ring_precision=precision, ring_recall=recall
    )


def cmd_eval(settings: RunSettings, args: argparse.Namespace) -> None:
    pred_dir = Path(args.pred_dir) if args.pred_dir else Path(settings.out_dir)
    truth_path = Path(args.truth) if args.truth else pred_dir / "ground_truth.json"
    assignment = _run_stage(
        "eval", clustering.read_clusters, pred_dir / "clusters.csv"
    )
    truth = _run_stage("eval", synth.read_ground_truth, truth_path)
    scores = _run_stage("eval", _evaluate, assignment, truth)
    out = _out_dir(settings)
    payload = dataclasses.asdict(scores)
    (out / "eval.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
    for key, value in payload.items():
        print(f"{key}: {value:.4f}")


def cmd_pipeline(settings: RunSettings, args: argparse.Namespace) -> None:
    started = time.time()
    out = _out_dir(settings)
    registry, sfg, wg = _load_graphs(settings)
    corpus = _run_stage("walk", walks.generate_walks, wg, settings.walk_config())
    emb = _run_stage(
        "embed", embedding.train, corpus, len(registry), settings.embed_config()
    )
    assignment = _run_stage(
        "cluster", clustering.dbscan, emb.input_vectors, settings.dbscan_config()
    )
    communities = _run_stage("detect", detect.extract_communities, assignment, sfg)
    reports = [
        _run_stage(
            "detect",
            detect.detect_cycles,
            community,
            settings.max_cycle_len,
            settings.cycle_window_minutes(),
            settings.tolerance,
        )
        for community in communities
    ]
    coords = (
        _run_stage("detect", detect.project_2d, emb.input_vectors)
        if len(registry)
        else np.zeros((0, 2))
    )

    embedding.write_embeddings(out / "embeddings.csv", emb.input_vectors)
    clustering.write_clusters(out / "clusters.csv", assignment)
    detect.write_projection(out / "projection.csv", coords, assignment.labels)
    detect.write_cycles_jsonl(out / "cycles.jsonl", reports)
    (out / "run.cfg").write_text(serialize_settings(settings), encoding="utf-8")

    artifacts = [
        "embeddings.csv", "clusters.csv", "projection.csv", "cycles.jsonl", "run.cfg",
    ]
    manifest = {
        "version": 1,
        "settings": {
            f.name: getattr(settings, f.name) for f in dataclasses.fields(RunSettings)
        },
        "artifacts": {name: _sha256(out / name) for name in artifacts},
        "elapsed_seconds": round(time.time() - started, 3),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2), encoding="utf-8"
    )
    noise = int(np.sum(assignment.labels == clustering.NOISE))
    flagged = sum(len(r.flagged_cycles()) for r in reports)
    print(
        f"pipeline: {len(registry)} dealers, {assignment.n_clusters} clusters "
        f"({noise} noise), {flagged} flagged cycles -> {out / 'manifest.json'}"
    )


_COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "graph": cmd_graph,
    "walk": cmd_walk,
    "embed": cmd_embed,
    "cluster": cmd_cluster,
    "detect": cmd_detect,
    "eval": cmd_eval,
    "pipeline": cmd_pipeline,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = resolve_settings(args)
        _COMMANDS[args.command](settings, args)
    except StageError as exc:
        print(f"error [{exc.stage}]: {exc.cause}", file=sys.stderr)
        return STAGE_EXIT_CODES.get(exc.stage, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
