#!/usr/bin/env python3
"""Brute-force reference evaluation of the synthetic fixture.

Re-derives, without touching the C++ code, what the refinement pipeline
must produce on the fixture: the provider answers come from truth.json
(the semantic tables the mock rule files were generated from), and the
scoring, propagation, debate selection, fusion and Recall@K steps are
written out longhand.  Recall uses the slowest possible method: build
the full candidate list, sort it, slice it, count.

Usage: oracle.py FIXTURE_DIR > expected.json
"""

import itertools
import json
import math
import sys
from pathlib import Path

KS = [10, 20, 50]


def sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def load(fixture):
    vocab = [l for l in (fixture / "vocab.txt").read_text().splitlines() if l]
    preds = [json.loads(l) for l in (fixture / "predictions.jsonl").read_text().splitlines() if l]
    gts = [json.loads(l) for l in (fixture / "gt.jsonl").read_text().splitlines() if l]
    config = json.loads((fixture / "config.json").read_text())
    truth_raw = json.loads((fixture / "truth.json").read_text())
    truth = {}
    for name, t in truth_raw.items():
        truth[name] = {
            "aware": t["aware"],
            "cs": {(r, o): v for r, o, v in t["cs"]},
            "spatial": {(r, o, tuple(hb), tuple(ob)): v for r, o, hb, ob, v in t["spatial"]},
            "temporal": {(a, b, o): v for a, b, o, v in t["temporal"]},
        }
    return vocab, preds, gts, config, truth


def pid(rec):
    return (rec["pair_id"]["human_id"], rec["pair_id"]["object_id"])


class Fixture:
    def __init__(self, fixture_dir):
        self.vocab, preds, gts, self.config, self.truth = load(fixture_dir)
        self.frames = sorted({p["frame_index"] for p in preds})
        self.pairs = {}  # frame -> {pair_id: record}
        for p in preds:
            self.pairs.setdefault(p["frame_index"], {})[pid(p)] = p
        self.gt = {}
        for g in gts:
            self.gt.setdefault(g["frame_index"], set()).add(
                ((g["pair_id"]["human_id"], g["pair_id"]["object_id"]), g["relation_index"]))
        interval = self.config["keyframe_interval"]
        self.keyframes = [t for i, t in enumerate(self.frames) if i % interval == 0]
        self.providers = [p["id"] for p in self.config["providers"]]
        self.judge = self.config["judge_provider"]
        w = self.config["weights"]
        self.weights = {"cs": w["lambda_cs"], "spatial": w["lambda_s"],
                        "temporal": w["lambda_t"], "debate": w["lambda_debate"]}
        self.threshold = w["threshold"]
        self.floor = self.config["candidate_floor"]
        self.delta = self.config["disagreement_delta"]
        self.mode = self.config["debate_mode"]

    def rel(self, r):
        return self.vocab[r]

    def candidates(self, t):
        for p, rec in sorted(self.pairs[t].items()):
            for r, s in enumerate(rec["scores"]):
                if s >= self.floor:
                    yield p, r

    def argmax(self, scores):
        best = 0
        for i, s in enumerate(scores):
            if s > scores[best]:
                best = i
        return best

    def provider_scores(self, name):
        tab = self.truth[name]
        out = {"cs": {}, "spatial": {}, "temporal": {}}
        for t in self.keyframes:
            for p, r in self.candidates(t):
                rec = self.pairs[t][p]
                rel, obj = self.rel(r), rec["object_class"]
                out["cs"][(t, p, r)] = tab["cs"].get((rel, obj), 0.5)
                if tab["aware"].get(rel, False):
                    key = (rel, obj, tuple(rec["human_box"]), tuple(rec["object_box"]))
                    out["spatial"][(t, p, r)] = tab["spatial"].get(key, 0.5)
        for prev, t in zip(self.frames, self.frames[1:]):
            if t not in self.keyframes:
                continue
            for p, rec in self.pairs[t].items():
                if p not in self.pairs[prev]:
                    continue
                old = self.argmax(self.pairs[prev][p]["scores"])
                new = self.argmax(rec["scores"])
                if old != new:
                    key = (self.rel(old), self.rel(new), rec["object_class"])
                    out["temporal"][(t, p, new)] = tab["temporal"].get(key, 0.5)
        return out

    def judge_answer(self, t, p, r):
        tab = self.truth[self.judge]
        rec = self.pairs[t][p]
        rel, obj = self.rel(r), rec["object_class"]
        key = (rel, obj, tuple(rec["human_box"]), tuple(rec["object_box"]))
        if key in tab["spatial"]:
            return tab["spatial"][key]
        return tab["cs"].get((rel, obj), 0.5)

    def refine(self, enabled):
        per_provider = {name: self.provider_scores(name) for name in self.providers}
        for name in per_provider:
            for agent in ("cs", "spatial", "temporal"):
                if agent not in enabled:
                    per_provider[name][agent] = {}

        table = {}
        for agent in ("cs", "spatial", "temporal"):
            keys = set()
            for name in self.providers:
                keys |= set(per_provider[name][agent])
            for k in keys:
                vals = [per_provider[n][agent][k] for n in self.providers if k in per_provider[n][agent]]
                table.setdefault(k, {})[agent] = sum(vals) / len(vals)

        if "debate" in enabled and self.mode != "off":
            for t in self.keyframes:
                for p, r in self.candidates(t):
                    base = self.pairs[t][p]["scores"][r]
                    fused = []
                    for name in self.providers:
                        f = base
                        for agent in ("cs", "spatial", "temporal"):
                            v = per_provider[name][agent].get((t, p, r))
                            if v is not None:
                                f += self.weights[agent] * sig(v)
                        fused.append(f)
                    if self.mode == "always" or max(fused) - min(fused) > self.delta:
                        table.setdefault((t, p, r), {})["debate"] = self.judge_answer(t, p, r)

        for t in self.frames:
            if t in self.keyframes:
                continue
            for p, rec in self.pairs[t].items():
                sources = [k for k in self.keyframes if p in self.pairs[k]]
                if not sources:
                    continue
                src = min(sources, key=lambda k: (abs(k - t), k))
                for r in range(len(self.vocab)):
                    if (src, p, r) in table:
                        table[(t, p, r)] = dict(table[(src, p, r)])

        fused = {}
        for t in self.frames:
            for p, rec in self.pairs[t].items():
                for r, s in enumerate(rec["scores"]):
                    f = s
                    for agent, v in table.get((t, p, r), {}).items():
                        f += self.weights[agent] * sig(v)
                    fused[(t, p, r)] = f
        return fused

    def baseline(self):
        return {(t, p, r): s for t in self.frames for p, rec in self.pairs[t].items()
                for r, s in enumerate(rec["scores"])}

    def recall(self, fused):
        totals = {k: [] for k in KS}
        for t in self.frames:
            gt = self.gt.get(t)
            if not gt:
                continue
            pool = [(-s, p, r) for (tt, p, r), s in fused.items() if tt == t and s > self.threshold]
            pool.sort()
            for k in KS:
                top = {(p, r) for _, p, r in pool[:k]}
                totals[k].append(len(top & gt) / len(gt))
        return {k: 100.0 * sum(v) / len(v) for k, v in totals.items()}

    def distinct_cs_texts(self):
        texts = set()
        for t in self.keyframes:
            for p, r in self.candidates(t):
                texts.add((self.rel(r), self.pairs[t][p]["object_class"]))
        return len(texts)


def main():
    fixture = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent / "synthetic")
    fx = Fixture(fixture)
    result = {"baseline": fx.recall(fx.baseline())}
    chain = [("cs",), ("cs", "spatial"), ("cs", "spatial", "temporal"),
             ("cs", "spatial", "temporal", "debate")]
    result["chain"] = [{"components": list(c), "recall": fx.recall(fx.refine(set(c)))} for c in chain]
    result["ablation"] = []
    for bits in itertools.product([False, True], repeat=4):
        comps = [n for n, b in zip(("cs", "spatial", "temporal", "debate"), bits) if b]
        result["ablation"].append({"components": comps, "recall": fx.recall(fx.refine(set(comps)))})
    result["refined"] = result["chain"][-1]["recall"]
    batch = fx.config["batch_size"]
    result["distinct_cs_texts"] = fx.distinct_cs_texts()
    result["cs_calls_per_provider"] = -(-fx.distinct_cs_texts() // batch)
    json.dump(result, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
