"""Go/no-go acceptance gate.

Each test here is one headline criterion for the engine, run at full scale
with its stated tolerance. They are intentionally redundant with the module
tests: the module tests localize failures, these prove the overall contract
in one place. Each prints a single summary line with its measured numbers.
"""

from __future__ import annotations

import datetime as dt
import json
import math
import random
import shutil
import socket
import threading
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import (
    FIG3_DSL,
    FIXTURES,
    build_scenario_graph,
    flatten_grads,
    numeric_grad,
    random_graph,
    random_query,
    relative_error,
)
from graphscout import matching, nlp, synth
from graphscout import query as querydsl
from graphscout.query import Mode
from graphscout.taxonomy import IndicatorTaxonomy


def report(line: str) -> None:
    print(f"[acceptance] {line}")


# ---------------------------------------------------------------------------
# 1. Ranker equivalence with the exhaustive oracle
# ---------------------------------------------------------------------------

def test_ranker_matches_exhaustive_oracle_on_random_graphs():
    rng = random.Random(20260819)
    started = time.monotonic()
    graphs = queries = 0
    for _ in range(100):
        g = random_graph(rng)
        graphs += 1
        for i in range(20):
            mode = Mode.INDIVIDUAL if i % 2 == 0 else Mode.NEIGHBORHOOD
            q = random_query(rng, mode=mode)
            fast = matching.ranked_results_to_dict(matching.rank(g, q))
            slow = matching.ranked_results_to_dict(
                matching.brute_force_oracle(g, q))
            assert fast == slow, (
                f"graph {graphs}, query {i}: ranker disagrees with oracle\n"
                f"query: {querydsl.print_query(q)}")
            queries += 1
    elapsed = time.monotonic() - started
    assert elapsed < 60.0, f"oracle sweep took {elapsed:.1f}s (budget 60s)"
    report(f"ranker == oracle on {graphs} graphs x {queries // graphs} "
           f"queries (both modes), exact, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 2. Hand-built scenario: scores and threshold admission
# ---------------------------------------------------------------------------

def test_scenario_scores_and_threshold_admission():
    g = build_scenario_graph()
    q = querydsl.parse(FIG3_DSL)

    everyone = matching.rank(g, q, threshold=0.0)
    scores = {r.seed: r.score for r in everyone.entries}
    assert scores["p1"] == 1.0
    assert scores["p2"] == 0.75
    assert scores["p3"] == 0.5

    admitted = matching.rank(g, q)  # query's own threshold, 0.7
    assert [(r.seed, r.score) for r in admitted.entries] == [
        ("p1", 1.0), ("p2", 0.75)]
    report("scenario scores {1.0, 0.75, 0.5} exact; "
           "threshold 0.7 admits exactly the first two")


# ---------------------------------------------------------------------------
# 3. Stratified folds stay balanced per label
# ---------------------------------------------------------------------------

def random_corpus(rng: random.Random, categories: tuple[str, ...]):
    corpus = []
    for i in range(rng.randint(12, 80)):
        labels = rng.sample(categories, rng.randint(1, 3))
        corpus.append(nlp.LabeledSnippet.make(f"snippet {i}", labels))
    return corpus


def test_stratified_folds_balanced_within_one_everywhere():
    rng = random.Random(31415)
    categories = tuple(f"C{i}" for i in range(1, 11))
    checked = 0
    for trial in range(200):
        corpus = random_corpus(rng, categories)
        totals = {c: sum(1 for s in corpus if c in s.labels)
                  for c in categories}
        for k in (5, 10):
            folds = nlp.stratified_kfold(corpus, k, seed=trial)
            for label, counts in folds.label_fold_counts(corpus).items():
                if totals[label] < k:
                    continue
                ideal = totals[label] / k
                assert all(abs(c - ideal) <= 1.0 for c in counts), (
                    f"trial {trial} k={k}: label {label} fold counts {counts} "
                    f"stray more than 1 from ideal {ideal:.2f}")
                checked += 1
    report(f"fold balance |count - total/k| <= 1 held for {checked} "
           f"(label, corpus, k) cells across 200 corpora, k in {{5, 10}}")


# ---------------------------------------------------------------------------
# 4. Classifier benchmark on a separable corpus
# ---------------------------------------------------------------------------

def benchmark_corpus(tax: IndicatorTaxonomy, seed: int = 6):
    """Separable multi-label corpus: six private keywords per label plus
    shared filler, every label with at least 40 positive snippets."""
    rng = random.Random(seed)
    vocab = {c: [f"{c.lower()}kw{j}" for j in range(6)] for c in tax.categories}
    filler = [f"filler{i}" for i in range(30)]

    def snippet(i: int, labels: list[str]) -> nlp.LabeledSnippet:
        words = []
        for label in labels:
            words.extend(rng.sample(vocab[label], 3))
        words.extend(rng.sample(filler, 2))
        rng.shuffle(words)
        return nlp.LabeledSnippet.make(" ".join(words), labels)

    corpus = []
    counts = {c: 0 for c in tax.categories}
    for i in range(300):
        size = rng.choices([1, 2, 3], weights=[5, 3, 2])[0]
        labels = rng.sample(tax.categories, size)
        corpus.append(snippet(i, labels))
        for label in labels:
            counts[label] += 1
    i = len(corpus)
    for label in tax.categories:
        while counts[label] < 40:
            corpus.append(snippet(i, [label]))
            counts[label] += 1
            i += 1
    return corpus


def test_classifier_benchmark_precision():
    tax = IndicatorTaxonomy.default()
    corpus = benchmark_corpus(tax)
    assert len(tax.categories) == 15
    positives = {c: sum(1 for s in corpus if c in s.labels)
                 for c in tax.categories}
    assert min(positives.values()) >= 40

    started = time.monotonic()
    result = nlp.evaluate_cv(corpus, tax, 10, seed=0)
    elapsed = time.monotonic() - started

    assert elapsed < 120.0, f"cross-validation took {elapsed:.1f}s (budget 120s)"
    assert result.macro_precision >= 0.90, (
        f"macro precision {result.macro_precision:.3f} < 0.90")
    worst = min(result.precision_mean, key=result.precision_mean.get)
    assert result.precision_mean[worst] >= 0.80, (
        f"label {worst} mean precision {result.precision_mean[worst]:.3f} < 0.80")
    report(f"classifier benchmark: macro {result.macro_precision:.3f} >= 0.90, "
           f"worst label mean {result.precision_mean[worst]:.3f} >= 0.80, "
           f"{len(corpus)} snippets, 10 folds, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 5. Feature mapping round trip
# ---------------------------------------------------------------------------

def test_feature_mapping_round_trip_1000_trajectories():
    rng = random.Random(4242)
    tax = IndicatorTaxonomy.default()
    base = dt.date(2014, 1, 1)
    data = []
    for i in range(1000):
        events = [
            synth.Event(base + dt.timedelta(days=rng.randint(0, 1500)), c)
            for c in tax.categories if rng.random() < 0.4
        ]
        data.append(synth.Trajectory.make(f"p{i}", events))

    mapper = synth.fit_mapper(data, tax)
    gaps = {}
    for c, cdf in mapper.cdfs.items():
        days = cdf.days
        gaps[c] = max((b - a for a, b in zip(days, days[1:])), default=0)

    worst_gap = 0
    for t in data:
        back = synth.decode_features(mapper, synth.encode_features(mapper, t))
        assert back.categories() == t.categories(), f"presence broke for {t.person}"
        originals = {e.c: e.t for e in t.events}
        for e in back.events:
            drift = abs((e.t - originals[e.c]).days)
            assert drift <= gaps[e.c], (
                f"{t.person} {e.c}: timestamp drifted {drift} days, "
                f"max support gap {gaps[e.c]}")
            worst_gap = max(worst_gap, drift)
    report(f"decode(encode(t)) presence-exact on 1000 trajectories; "
           f"worst timestamp drift {worst_gap} day(s) within per-category "
           f"support gaps")


# ---------------------------------------------------------------------------
# 6. Gradient check across 50 random configurations
# ---------------------------------------------------------------------------

def test_gradients_match_finite_differences_50_configs():
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        d_in = int(rng.integers(2, 9))
        d_lat = int(rng.integers(1, 5))
        h_enc = int(rng.integers(2, 7))
        h_disc = int(rng.integers(2, 6))
        batch = int(rng.integers(2, 7))

        enc = synth.Mlp((d_in, h_enc, d_lat), "linear", rng)
        dec = synth.Mlp((d_lat, h_enc, d_in), "sigmoid", rng)
        disc = synth.Mlp((d_lat, h_disc, 1), "linear", rng)
        x = rng.random((batch, d_in))
        z_prior = rng.standard_normal((batch, d_lat))

        _, (egw, egb), (dgw, dgb) = synth.reconstruction_phase(enc, dec, x)
        worst = max(worst, relative_error(
            flatten_grads(egw, egb),
            numeric_grad(enc, lambda: synth.reconstruction_phase(enc, dec, x)[0])))
        worst = max(worst, relative_error(
            flatten_grads(dgw, dgb),
            numeric_grad(dec, lambda: synth.reconstruction_phase(enc, dec, x)[0])))

        z_fake = enc.forward(x)[0]
        _, (cgw, cgb) = synth.discriminator_phase(disc, z_fake, z_prior)
        worst = max(worst, relative_error(
            flatten_grads(cgw, cgb),
            numeric_grad(disc, lambda: synth.discriminator_phase(
                disc, z_fake, z_prior)[0])))

        _, (ggw, ggb) = synth.generator_phase(enc, disc, x)
        worst = max(worst, relative_error(
            flatten_grads(ggw, ggb),
            numeric_grad(enc, lambda: synth.generator_phase(enc, disc, x)[0])))

    assert worst <= 1e-4, f"worst relative gradient error {worst:.2e} > 1e-4"
    report(f"analytic vs numeric gradients on 50 configs x 3 networks: "
           f"worst relative error {worst:.2e} <= 1e-4")


# ---------------------------------------------------------------------------
# 7. Adversarial autoencoder end to end
# ---------------------------------------------------------------------------

def toy_trajectories(n: int = 500, seed: int = 101) -> list[synth.Trajectory]:
    """Three categories with distinct presence rates and date shapes:
    a clustered normal, an earlier uniform block, a later uniform block."""
    rng = np.random.default_rng(seed)
    base = dt.date(2015, 1, 1)
    data = []
    for i in range(n):
        events = []
        if rng.random() < 0.95:
            day = int(np.clip(rng.normal(70, 25), 0, 364))
            events.append(synth.Event(base + dt.timedelta(days=day), "C1"))
        if rng.random() < 0.70:
            day = int(rng.integers(-180, -20))
            events.append(synth.Event(base + dt.timedelta(days=day), "C2"))
        if rng.random() < 0.45:
            day = int(rng.integers(370, 700))
            events.append(synth.Event(base + dt.timedelta(days=day), "C3"))
        data.append(synth.Trajectory.make(f"t{i}", events))
    return data


def test_adversarial_autoencoder_end_to_end():
    tax = IndicatorTaxonomy(("C1", "C2", "C3"))
    data = toy_trajectories()
    train, held = data[:400], data[400:]

    config = synth.AAEConfig(
        latent_dim=3, encoder_hidden=(96,), decoder_hidden=(96,),
        disc_hidden=(24,), epochs=1500, batch_size=64,
        recon_lr=0.2, adversarial_lr=0.06, seed=0)

    mapper = synth.fit_mapper(data, tax)
    started = time.monotonic()
    model, curve = synth.train_aae(train, mapper, config)
    elapsed = time.monotonic() - started
    assert elapsed < 300.0, f"training took {elapsed:.1f}s (budget 300s)"
    assert len(curve) == config.epochs * math.ceil(len(train) / config.batch_size)

    # (a) reconstruction: presence bits of every trajectory survive the
    # encoder/decoder round trip.
    x = np.stack([synth.encode_features(mapper, t) for t in data])
    xhat = model.decode(model.encode(x))
    accuracy = float(((xhat[:, 0::2] >= 0.5) == (x[:, 0::2] >= 0.5)).mean())
    assert accuracy >= 0.95, f"presence reconstruction accuracy {accuracy:.3f}"

    # (b) a discriminator that cannot tell held-out codes from prior draws
    # sits near chance: accuracy in [0.45, 0.65].
    held_x = np.stack([synth.encode_features(mapper, t) for t in held])
    logits_fake = model.discriminator.forward(model.encode(held_x))[0].ravel()
    prior = np.random.default_rng(999).standard_normal((100, config.latent_dim))
    logits_prior = model.discriminator.forward(prior)[0].ravel()
    disc_accuracy = ((logits_fake < 0).sum() + (logits_prior >= 0).sum()) / 200
    assert 0.45 <= disc_accuracy <= 0.65, (
        f"held-out discriminator accuracy {disc_accuracy:.3f} outside [0.45, 0.65]")

    # (c) generated samples track the real marginals.
    generated = synth.sample(model, mapper, 500, seed=77)
    fidelity = synth.fidelity_report(data, generated, tax)
    ks_worst = max(stats["ks"] for stats in fidelity.per_category.values())
    assert fidelity.presence_l1_gap <= 0.10, (
        f"presence L1 gap {fidelity.presence_l1_gap:.3f} > 0.10")
    assert ks_worst <= 0.2, f"worst per-category KS {ks_worst:.3f} > 0.2"

    report(f"aae end-to-end: trained {elapsed:.1f}s; presence accuracy "
           f"{accuracy:.3f} >= 0.95; held-out discriminator {disc_accuracy:.3f} "
           f"in [0.45, 0.65]; presence L1 {fidelity.presence_l1_gap:.3f} <= 0.10; "
           f"worst KS {ks_worst:.3f} <= 0.2")


# ---------------------------------------------------------------------------
# 8. Query language: round trips and fuzzing
# ---------------------------------------------------------------------------

def test_query_language_round_trip_and_fuzz():
    rng = random.Random(777)
    for i in range(1000):
        q = random_query(rng)
        assert querydsl.parse(querydsl.print_query(q)) == q, (
            f"round trip {i} broke:\n{querydsl.print_query(q)}")

    crashes = 0
    for i in range(10_000):
        if i % 2 == 0:
            text = rng.randbytes(rng.randint(0, 160)).decode(
                "utf-8", errors="replace")
        else:
            pieces = ['query', '{', '}', 'indicator', '"C1"', 'weight',
                      '0.5', 'threshold', 'in', 'with', 'mode', '\n', '  ',
                      '"', '\\', 'individual', '-', '1e9', '###', 'émigré']
            text = " ".join(rng.choices(pieces, k=rng.randint(0, 25)))
        try:
            querydsl.parse(text)
        except querydsl.QueryError as exc:
            assert 0 <= exc.offset <= max(len(text), 1)
        except Exception:  # noqa: BLE001 - the whole point of the fuzz
            crashes += 1
    assert crashes == 0, f"{crashes} fuzz inputs escaped QueryError"
    report("query language: 1000 parse/print round trips exact; "
           "10000 fuzz inputs, zero parser crashes")


# ---------------------------------------------------------------------------
# 9. Service contract against a live instance
# ---------------------------------------------------------------------------

LIVE_TOKEN = "acc-live-token"


@pytest.fixture(scope="module")
def live_service(tmp_path_factory):
    """A real uvicorn server on a loopback port, seeded from fixture files."""
    import uvicorn

    from graphscout.service import ServiceConfig, create_app

    tmp = tmp_path_factory.mktemp("live")
    model_dir = tmp / "models"
    model_dir.mkdir()
    corpus_path = tmp / "corpus.jsonl"
    shutil.copy(FIXTURES / "corpus.jsonl", corpus_path)

    tax = IndicatorTaxonomy.default()
    with open(FIXTURES / "corpus.jsonl", encoding="utf-8") as source:
        corpus = nlp.load_corpus(source, tax)
    model = nlp.train(corpus, tax, nlp.Hyperparams(epochs=80))
    model.save(model_dir / "classifier.json")

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]

    cfg = ServiceConfig(
        auth_token=LIVE_TOKEN,
        listen=f"127.0.0.1:{port}",
        graph_path=str(FIXTURES / "graph.jsonl"),
        gazetteer_path=str(FIXTURES / "gazetteer.json"),
        corpus_path=str(corpus_path),
        model_dir=str(model_dir),
        trajectory_path=str(FIXTURES / "trajectories.jsonl"),
        default_threshold=0.7,
    )
    server = uvicorn.Server(uvicorn.Config(
        create_app(cfg), host="127.0.0.1", port=port, log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 15
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("live service did not start in 15s")
        time.sleep(0.02)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)


def test_service_contract_against_live_instance(live_service):
    import httpx

    base = live_service
    auth = {"Authorization": f"Bearer {LIVE_TOKEN}"}
    with httpx.Client(base_url=base, timeout=60.0) as web:
        # Auth is enforced before anything else.
        assert web.post("/queries", content=FIG3_DSL).status_code == 401

        # Ingest: two nodes and one edge, counts echoed, no errors.
        lines = "\n".join([
            json.dumps({"t": "node", "id": "p7", "kind": "Person",
                        "attrs": {"name": "Indigo Vale"}}),
            json.dumps({"t": "node", "id": "i9", "kind": "Indicator",
                        "attrs": {"category": "C9"}}),
            json.dumps({"t": "edge", "src": "p7", "dst": "i9",
                        "kind": "HAS_INDICATOR", "ts": "2015-04-01"}),
        ])
        ingest = web.post("/graph/ingest", headers=auth, content=lines)
        assert ingest.status_code == 200
        assert ingest.json() == {"nodes_added": 2, "edges_added": 1,
                                 "errors": []}

        # Classification: per-sentence label probabilities plus entities.
        classify = web.post("/documents/classify", headers=auth, json={
            "text": "Avery Stone joined the syndicate on March 5, 2014. "
                    "A vehicle was rented."})
        assert classify.status_code == 200
        sentences = classify.json()["sentences"]
        assert len(sentences) == 2
        assert len(sentences[0]["labels"]) == 15
        assert all(0.0 <= l["probability"] <= 1.0
                   for s in sentences for l in s["labels"])
        assert sentences[0]["entities"]["persons"][0]["name"] == "Avery Stone"

        # Queries: post once, re-filter the stored result by threshold.
        posted = web.post("/queries", headers=auth, content=FIG3_DSL)
        assert posted.status_code == 200
        body = posted.json()
        assert [(r["subject"], r["score"]) for r in body["results"]] == [
            (["p1"], 1.0), (["p2"], 0.75)]

        def results_at(threshold: float) -> list:
            got = web.get(f"/queries/{body['id']}", headers=auth,
                          params={"threshold": threshold})
            assert got.status_code == 200
            return got.json()["results"]

        loose, default, strict = results_at(0.4), results_at(0.7), results_at(0.9)
        assert loose[:len(default)] == default  # raising the cut: prefix
        assert default[:len(strict)] == strict
        assert [r["subject"] for r in strict] == [["p1"]]
        assert [r["subject"] for r in loose] == [["p1"], ["p2"], ["p3"]]

        # Synthetic data: train a small model, then sample from it by id.
        trained = web.post("/synth/train", headers=auth, json={
            "latent_dim": 2, "encoder_hidden": [8], "decoder_hidden": [8],
            "disc_hidden": [4], "epochs": 3, "batch_size": 32})
        assert trained.status_code == 200
        model_id = trained.json()["model_id"]
        generated = web.post("/synth/generate", headers=auth, json={
            "model_id": model_id, "n": 5, "seed": 11})
        assert generated.status_code == 200
        assert len(generated.text.splitlines()) == 5

        # Feedback: appended to the corpus file, running count returned.
        feedback = web.post("/feedback", headers=auth, json={
            "text": "confirmed border crossing", "predicted": ["C2"],
            "corrected": ["C1"]})
        assert feedback.status_code == 200
        assert feedback.json() == {"appended_corpus_size": 101}

    report("service contract: live instance served ingest, classify, "
           "stored-query re-filter (prefix property), synth train/generate, "
           "and feedback under bearer auth")
