"""End-to-end acceptance checks for the full detection pipeline.

Each test exercises one acceptance criterion at its stated tolerance and
prints a single PASS/FAIL line (visible with ``pytest -s`` or ``-rA``).
"""

from __future__ import annotations

import hashlib
import json
import time

import numpy as np
from scipy import stats

from conftest import barbell_graph
from reference import brute_force_dbscan, enumerate_cycles_reference
from ringtrace import cli
from ringtrace.clustering import DbscanConfig, dbscan
from ringtrace.detect import Community, detect_cycles, jaccard
from ringtrace.embedding import EmbedConfig, sgns_gradients, sgns_pair_loss, train
from ringtrace.graph import WeightedGraph
from ringtrace.ingest import Transaction
from ringtrace.synth import expected_tax_liability, read_ground_truth
from ringtrace.walks import AliasTable, WalkConfig, generate_walks, transition_weights

DAY = 24 * 60


def _report(num: int, description: str, ok: bool, detail: str = "") -> None:
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} - {description}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


def test_criterion_1_planted_ring_recovery(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["synth", "--out-dir", str(out), "--seed", "42"]) == 0

    started = time.time()
    assert (
        cli.main(
            [
                "pipeline",
                "--input", str(out / "transactions.csv"),
                "--out-dir", str(out),
                "--seed", "42",
            ]
        )
        == 0
    )
    elapsed = time.time() - started

    assert (
        cli.main(
            [
                "eval",
                "--pred-dir", str(out),
                "--truth", str(out / "ground_truth.json"),
                "--out-dir", str(out),
            ]
        )
        == 0
    )
    scores = json.loads((out / "eval.json").read_text(encoding="utf-8"))

    truth = read_ground_truth(out / "ground_truth.json")
    rings = truth.ring_members(truth.n_rings())
    labels = [
        int(line.split(",")[1])
        for line in (out / "clusters.csv").read_text().splitlines()[1:]
    ]
    communities = [
        {i for i, lab in enumerate(labels) if lab == cid}
        for cid in range(max(labels) + 1)
    ]
    flagged_nodes = [
        set(rec["nodes"])
        for rec in map(json.loads, (out / "cycles.jsonl").read_text().splitlines())
        if rec["flagged"]
    ]
    recovered = [
        ring
        for ring in rings
        if any(jaccard(comm, ring) >= 0.5 for comm in communities)
    ]
    rings_with_flag = sum(
        1
        for ring in recovered
        if any(nodes <= ring for nodes in flagged_nodes)
    )

    ok = (
        scores["ari"] >= 0.8
        and scores["ring_recall"] >= 4 / 5
        and len(recovered) == rings_with_flag
        and len(recovered) >= 4
        and elapsed < 120.0
    )
    _report(
        1,
        "planted-ring recovery on the seed-42 scenario",
        ok,
        f"ari={scores['ari']:.3f}, recall={scores['ring_recall']:.2f}, "
        f"flagged rings {rings_with_flag}/{len(recovered)}, {elapsed:.1f}s",
    )


def test_criterion_2_dbscan_matches_brute_force():
    rng = np.random.default_rng(2024)
    failures = 0
    for _ in range(200):
        n = int(rng.integers(10, 201))
        d = int(rng.integers(2, 17))
        k = int(rng.integers(1, 5))
        centers = rng.normal(size=(k, d))
        points = np.array(
            [
                centers[rng.integers(k)] + 0.15 * rng.normal(size=d)
                if rng.random() < 0.8
                else rng.normal(size=d)
                for _ in range(n)
            ]
        )
        points[np.linalg.norm(points, axis=1) == 0] = 1.0
        cfg = DbscanConfig(
            eps=float(rng.uniform(0.02, 0.6)), min_pts=int(rng.integers(1, 11))
        )
        got = dbscan(points, cfg)
        oracle = brute_force_dbscan(points, cfg)
        if got.n_clusters != oracle.n_clusters or not np.array_equal(
            got.labels, oracle.labels
        ):
            failures += 1
    _report(
        2,
        "DBSCAN equals brute-force reference on 200 random instances",
        failures == 0,
        f"{failures} mismatches",
    )


def test_criterion_3_gradient_check():
    rng = np.random.default_rng(0)
    h = 1e-5
    worst = 0.0
    for _ in range(100):
        d = int(rng.choice([2, 8, 32]))
        k = int(rng.integers(0, 6))
        center = rng.normal(size=d)
        context = rng.normal(size=d)
        negs = rng.normal(size=(k, d))
        analytic = sgns_gradients(center, context, negs)

        def numeric(vec, rebuild):
            grad = np.zeros_like(vec)
            for i in range(vec.size):
                step = np.zeros_like(vec)
                step[i] = h
                grad[i] = (
                    sgns_pair_loss(*rebuild(vec + step))
                    - sgns_pair_loss(*rebuild(vec - step))
                ) / (2 * h)
            return grad

        checks = [
            (analytic[0], center, lambda v: (v, context, negs)),
            (analytic[1], context, lambda v: (center, v, negs)),
        ]
        for j in range(k):
            def rebuild(v, j=j):
                patched = negs.copy()
                patched[j] = v
                return center, context, patched
            checks.append((analytic[2][j], negs[j].copy(), rebuild))
        for got, vec, rebuild in checks:
            ref = numeric(vec, rebuild)
            denom = np.maximum(np.maximum(np.abs(got), np.abs(ref)), 1e-6)
            worst = max(worst, float(np.max(np.abs(got - ref) / denom)))
    _report(
        3,
        "SGNS analytic gradients match central differences on 100 instances",
        worst < 1e-4,
        f"worst relative error {worst:.2e}",
    )


def test_criterion_4_alias_sampler_fidelity():
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(20):
        k = int(rng.integers(1, 17))
        weights = rng.uniform(0.05, 1.0, size=k)
        table = AliasTable(weights)
        samples = table.sample_many(
            np.random.default_rng(int(rng.integers(2**32))), 1_000_000
        )
        empirical = np.bincount(samples, minlength=k) / 1_000_000
        tv = 0.5 * float(np.abs(empirical - weights / weights.sum()).sum())
        worst = max(worst, tv)
    _report(
        4,
        "alias sampler within total-variation 0.005 over 1e6 draws, 20 vectors",
        worst < 0.005,
        f"worst TV {worst:.4f}",
    )


def test_criterion_5_walk_bias():
    # Path graph t(0)-v(1)-w(2): at v coming from t with p=1, q=1/2 the
    # switch probabilities are 1/3 (back to t) and 2/3 (on to w).
    path = WeightedGraph(3, {(0, 1): 1.0, (1, 2): 1.0})
    table = AliasTable(transition_weights(path, 0, 1, WalkConfig(p=1.0, q=0.5)))
    samples = table.sample_many(np.random.default_rng(5), 100_000)
    freq_back = float(np.mean(samples == 0))
    path_ok = abs(freq_back - 1 / 3) < 0.01 and abs((1 - freq_back) - 2 / 3) < 0.01

    rng = np.random.default_rng(42)
    pairs = {}
    for u in range(10):
        for v in range(u + 1, 10):
            if rng.random() < 0.6:
                pairs[(u, v)] = float(rng.integers(1, 10))
    g = WeightedGraph(10, pairs)
    curr = max(range(10), key=g.degree)
    prev = int(g.neighbors(curr)[0])
    table = AliasTable(transition_weights(g, prev, curr, WalkConfig(p=1.0, q=1.0)))
    draws = 100_000
    samples = table.sample_many(np.random.default_rng(6), draws)
    observed = np.bincount(samples, minlength=g.degree(curr))
    expected = g.edge_weights(curr) / g.edge_weights(curr).sum() * draws
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    critical = float(stats.chi2.ppf(0.99, df=g.degree(curr) - 1))
    chi_ok = chi2 < critical

    _report(
        5,
        "second-order walk biases match hand values and first-order sampling",
        path_ok and chi_ok,
        f"back-freq {freq_back:.3f}, chi2 {chi2:.1f} < {critical:.1f}",
    )


def test_criterion_6_tax_arithmetic():
    txs = [
        Transaction(0, 1, 0, 1000),   # raw material dealer -> manufacturer
        Transaction(1, 2, 10, 1200),  # manufacturer -> retailer
        Transaction(2, 3, 20, 1500),  # retailer -> consumer
    ]
    liabilities = [expected_tax_liability(d, txs, 0.10) for d in range(3)]
    total = sum(liabilities)
    ok = liabilities == [100.0, 20.0, 30.0] and total == 150.0
    _report(
        6,
        "three-stage value chain yields liabilities 100/20/30 and total 150",
        ok,
        f"got {liabilities}, total {total}",
    )


def test_criterion_7_cycle_enumeration_oracle():
    rng = np.random.default_rng(777)
    mismatches = 0
    for _ in range(50):
        n = int(rng.integers(3, 16))
        txs = []
        for _ in range(int(rng.integers(n, 3 * n + 1))):
            u, v = int(rng.integers(n)), int(rng.integers(n))
            if u == v:
                continue
            txs.append(
                Transaction(
                    u, v, int(rng.integers(0, 60 * DAY)), int(rng.integers(1, 10**5))
                )
            )
        community = Community(0, frozenset(range(n)), txs)
        window = int(rng.integers(5 * DAY, 45 * DAY))
        report = detect_cycles(community, max_len=6, window=window, tolerance=0.02)
        got = {(hit.nodes, hit.tx_indices) for hit in report.cycles}
        if got != enumerate_cycles_reference(community, 6, window):
            mismatches += 1
    _report(
        7,
        "cycle detection equals exhaustive enumeration on 50 communities",
        mismatches == 0,
        f"{mismatches} mismatches",
    )


def test_criterion_8_pipeline_determinism(tmp_path):
    scenario = tmp_path / "scenario"
    assert (
        cli.main(
            [
                "synth", "--out-dir", str(scenario), "--seed", "7",
                "--n-dealers", "200", "--n-background-txs", "1200",
                "--n-rings", "3",
            ]
        )
        == 0
    )
    digests = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert (
            cli.main(
                [
                    "pipeline",
                    "--input", str(scenario / "transactions.csv"),
                    "--out-dir", str(out),
                    "--deterministic",
                    "--seed", "7",
                ]
            )
            == 0
        )
        digests.append(
            {
                artifact: hashlib.sha256((out / artifact).read_bytes()).hexdigest()
                for artifact in (
                    "embeddings.csv", "clusters.csv", "projection.csv", "cycles.jsonl",
                )
            }
        )
    _report(
        8,
        "deterministic pipeline produces byte-identical artifacts twice",
        digests[0] == digests[1],
    )


def test_criterion_9_embedding_structure():
    corpus = generate_walks(barbell_graph(), WalkConfig(seed=0))
    emb = train(corpus, 10, EmbedConfig(seed=0))
    unit = emb.input_vectors / np.linalg.norm(emb.input_vectors, axis=1, keepdims=True)
    sims = unit @ unit.T
    intra = [
        sims[i, j] for i in range(10) for j in range(i + 1, 10) if (i < 5) == (j < 5)
    ]
    inter = [
        sims[i, j] for i in range(10) for j in range(i + 1, 10) if (i < 5) != (j < 5)
    ]
    gap = float(np.mean(intra) - np.mean(inter))
    _report(
        9,
        "barbell cliques separate by >= 0.2 mean cosine similarity",
        gap >= 0.2,
        f"gap {gap:.3f}",
    )
