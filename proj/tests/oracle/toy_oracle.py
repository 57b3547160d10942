#!/usr/bin/env python3
"""Independent reference evaluator for the toy fixture.

Written directly from the formulas on a dense NaN-padded matrix, sharing no
code with the C++ library. Prints the RMSE of every baseline strategy and of
review-ranked CF with K = 10; the acceptance suite freezes these values.
"""

import json
import math
import pathlib
import sys

import numpy as np


def load_jsonl(path):
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


def load_vectors(path):
    with open(path) as f:
        n, d = map(int, f.readline().split())
        out = {}
        for line in f:
            parts = line.split()
            out[parts[0]] = np.array([float(x) for x in parts[1:]])
        assert len(out) == n
        return out


def main(fixture):
    fixture = pathlib.Path(fixture)
    train = load_jsonl(fixture / "train.jsonl")
    test = load_jsonl(fixture / "test.jsonl")
    vecs = load_vectors(fixture / "sentences.vec")

    users = sorted({r["user_id"] for r in train})
    items = sorted({r["business_id"] for r in train})
    ui = {u: k for k, u in enumerate(users)}
    ii = {i: k for k, i in enumerate(items)}
    R = np.full((len(users), len(items)), np.nan)
    rid = {}
    for r in train:
        R[ui[r["user_id"]], ii[r["business_id"]]] = r["stars"]
        rid[(ui[r["user_id"]], ii[r["business_id"]])] = r["review_id"]

    def weight(a, b):
        co = [u for u in range(len(users)) if not np.isnan(R[u, a]) and not np.isnan(R[u, b])]
        if len(co) <= 1:
            return 0.0, len(co)
        x = np.array([R[u, a] for u in co])
        y = np.array([R[u, b] for u in co])
        dx, dy = x - x.mean(), y - y.mean()
        sx, sy = math.sqrt((dx * dx).sum()), math.sqrt((dy * dy).sum())
        if sx < 1e-12 or sy < 1e-12:
            return 0.0, len(co)
        return float((dx * dy).sum() / (sx * sy)), len(co)

    W = {}
    for a in range(len(items)):
        for b in range(len(items)):
            if a != b:
                W[(a, b)] = weight(a, b)

    def fallback(u_id, i_id):
        if i_id in ii:
            return float(np.nanmean(R[:, ii[i_id]]))
        if u_id in ui:
            return float(np.nanmean(R[ui[u_id], :]))
        return float(np.nanmean(R))

    def predict(u_id, i_id, neigh):
        if u_id in ui:
            u = ui[u_id]
            pairs = [(R[u, n], w) for n, w in neigh if not np.isnan(R[u, n])]
            den = sum(abs(w) for _, w in pairs)
            if pairs and den > 0:
                raw = sum(r * w for r, w in pairs) / den
                return min(5.0, max(1.0, raw))
        return min(5.0, max(1.0, fallback(u_id, i_id)))

    def order(cands):
        # (score, support, item index): score desc, support desc, index asc
        return sorted(cands, key=lambda c: (-c[1], -c[2], c[0]))

    def rmse(preds):
        return math.sqrt(sum((p - t) ** 2 for p, t in preds) / len(preds))

    strategies = [("topk:%d" % k, k) for k in range(5, 31, 5)] + [("all", None), ("nonneg", None)]
    results = {}
    for name, k in strategies:
        preds = []
        for r in test:
            neigh = []
            if r["business_id"] in ii:
                t = ii[r["business_id"]]
                cands = [(j, W[(t, j)][0], W[(t, j)][1]) for j in range(len(items)) if j != t and W[(t, j)][1] >= 1]
                if name == "nonneg":
                    cands = [c for c in cands if c[1] >= 0]
                cands = order(cands)
                if k is not None:
                    cands = cands[:k]
                neigh = [(j, w) for j, w, _ in cands]
            preds.append((predict(r["user_id"], r["business_id"], neigh), r["stars"]))
        results[name] = rmse(preds)

    def review_sim(a, b):
        sims = []
        for u in range(len(users)):
            if np.isnan(R[u, a]) or np.isnan(R[u, b]):
                continue
            va, vb = vecs.get(rid[(u, a)]), vecs.get(rid[(u, b)])
            if va is None or vb is None:
                continue
            na, nb = np.linalg.norm(va), np.linalg.norm(vb)
            if na == 0 or nb == 0:
                continue
            sims.append(float(va @ vb / (na * nb)))
        return sum(sims) / len(sims) if sims else None

    K = 10
    preds = []
    for r in test:
        neigh = []
        if r["business_id"] in ii and r["user_id"] in ui:
            t, u = ii[r["business_id"]], ui[r["user_id"]]
            cands = []
            for j in range(len(items)):
                if j == t or np.isnan(R[u, j]):
                    continue
                s = review_sim(t, j)
                if s is None:
                    continue
                w, sup = W[(t, j)]
                cands.append((j, s, sup, w))
            cands = sorted(cands, key=lambda c: (-c[1], -c[2], c[0]))[:K]
            neigh = [(j, w) for j, _, _, w in cands]
        preds.append((predict(r["user_id"], r["business_id"], neigh), r["stars"]))
    results["review:10"] = rmse(preds)

    for name, v in results.items():
        print(f"{name}\t{v:.17g}")
    best = min(v for n, v in results.items() if n != "review:10")
    print(f"best_baseline\t{best:.17g}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else pathlib.Path(__file__).resolve().parent.parent / "fixtures/toy")
