#!/usr/bin/env python3
"""Generate the synthetic toy corpus used by the test suites.

20 users x 15 restaurants in 3 latent categories. A rating is the user's
affinity for the item's category plus item bias and noise; a review vector
is the category centroid plus noise. Output goes to tests/fixtures/toy/ and
is committed; rerunning with the same seed reproduces it byte for byte.
"""

import argparse
import json
import pathlib

import numpy as np

CATEGORIES = {
    "Pizza": ["pizza", "crust", "pepperoni", "cheese", "oven", "slice", "mozzarella", "basil"],
    "Sushi": ["sushi", "rolls", "salmon", "tuna", "wasabi", "rice", "sashimi", "ginger"],
    "Mexican": ["tacos", "salsa", "burrito", "guacamole", "tortilla", "beans", "cilantro", "queso"],
}
GENERIC = ["food", "place", "service", "staff", "table", "dinner", "lunch", "menu", "price", "order",
           "waiter", "friends", "night", "visit", "portion", "drinks"]
POSITIVE = ["great", "delicious", "wonderful", "friendly", "fresh", "amazing", "tasty", "good"]
NEGATIVE = ["bland", "slow", "rude", "cold", "greasy", "disappointing", "stale", "bad"]
STOP_FILLER = ["the", "was", "and", "we", "it", "very", "with", "our"]
# Emphatic spellings that run-capping plus correction should repair.
EMPHATIC = {"good": "goooood", "great": "greeeaaat", "delicious": "deliciousss", "amazing": "amaaazing"}

N_USERS, N_ITEMS, DIM = 20, 15, 8


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--density", type=float, default=0.9)
    ap.add_argument("--user-sd", type=float, default=0.0, help="spread of per-user generosity")
    ap.add_argument("--affinity-sd", type=float, default=1.2, help="spread of per-category affinity")
    ap.add_argument("--noise-sd", type=float, default=0.5)
    ap.add_argument("--bias-sd", type=float, default=0.3)
    ap.add_argument("--vector-noise-sd", type=float, default=0.35)
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "tests/fixtures/toy"))
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    cat_names = list(CATEGORIES)
    item_cat = [i % 3 for i in range(N_ITEMS)]
    users = [f"u{u:02d}" for u in range(N_USERS)]
    items = [f"b{i:02d}" for i in range(N_ITEMS)]

    affinity = rng.normal(0.0, 1.0, size=(N_USERS, 3))
    generosity = rng.normal(0.0, 1.0, size=N_USERS)
    bias = rng.normal(0.0, args.bias_sd, size=N_ITEMS)
    centroids = rng.normal(0.0, 1.0, size=(3, DIM))

    word_vecs = {}
    for c, name in enumerate(cat_names):
        for w in CATEGORIES[name]:
            word_vecs[w] = centroids[c] + rng.normal(0.0, 0.25, size=DIM)
    for w in GENERIC + POSITIVE + NEGATIVE:
        word_vecs[w] = rng.normal(0.0, 0.3, size=DIM)

    reviews, sentence_vecs = [], []
    for u in range(N_USERS):
        for i in range(N_ITEMS):
            if rng.random() >= args.density:
                continue
            c = item_cat[i]
            score = (3.5 + args.user_sd * generosity[u] + args.affinity_sd * affinity[u, c] + bias[i]
                     + rng.normal(0.0, args.noise_sd))
            stars = int(np.clip(np.rint(score), 1, 5))
            cat_words = CATEGORIES[cat_names[c]]
            tone = POSITIVE if stars >= 3 else NEGATIVE
            words = []
            for _ in range(26):
                pick = rng.random()
                if pick < 0.45:
                    words.append(cat_words[rng.integers(len(cat_words))])
                elif pick < 0.65:
                    words.append(GENERIC[rng.integers(len(GENERIC))])
                elif pick < 0.85:
                    w = tone[rng.integers(len(tone))]
                    if w in EMPHATIC and rng.random() < 0.3:
                        w = EMPHATIC[w]
                    words.append(w)
                else:
                    words.append(STOP_FILLER[rng.integers(len(STOP_FILLER))])
            text = " ".join(words).capitalize() + "!"
            rid = f"r{u:02d}{i:02d}"
            reviews.append({
                "review_id": rid, "user_id": users[u], "business_id": items[i], "stars": float(stars),
                "date": f"2019-{1 + i % 12:02d}-{1 + u:02d} 12:00:00", "text": text,
            })
            sentence_vecs.append((rid, centroids[c] + rng.normal(0.0, args.vector_noise_sd, size=DIM)))

    # Reviews that sample selection must drop: a non-restaurant business and
    # an out-of-region restaurant.
    extras = []
    for k, biz in enumerate(["x_bar", "x_far"]):
        for u in range(3):
            extras.append({
                "review_id": f"x{k}{u:02d}", "user_id": users[u], "business_id": biz, "stars": 4.0,
                "date": "2019-06-01 12:00:00", "text": " ".join(["great"] * 25),
            })

    businesses = [{"business_id": items[i], "name": f"Toy {cat_names[item_cat[i]]} {i}", "state": "MA",
                   "categories": f"Restaurants, {cat_names[item_cat[i]]}"} for i in range(N_ITEMS)]
    businesses.append({"business_id": "x_bar", "name": "Toy Bar", "state": "MA", "categories": "Bars, Nightlife"})
    businesses.append({"business_id": "x_far", "name": "Toy Far", "state": "NV", "categories": "Restaurants"})

    order = rng.permutation(len(reviews))
    n_train = (len(reviews) * 4 + 2) // 5
    train_idx = set(order[:n_train].tolist())
    train = [r for k, r in enumerate(reviews) if k in train_idx]
    test = [r for k, r in enumerate(reviews) if k not in train_idx]

    def dump_jsonl(name, rows):
        with open(out / name, "w") as f:
            for r in rows:
                f.write(json.dumps(r, sort_keys=True) + "\n")

    dump_jsonl("reviews.jsonl", reviews + extras)
    dump_jsonl("business.jsonl", businesses)
    dump_jsonl("users.jsonl", [{"user_id": u, "name": u.upper(), "review_count": 0} for u in users])
    dump_jsonl("train.jsonl", train)
    dump_jsonl("test.jsonl", test)

    with open(out / "sentences.vec", "w") as f:
        f.write(f"{len(sentence_vecs)} {DIM}\n")
        for rid, v in sentence_vecs:
            f.write(rid + "".join(f" {x:.6g}" for x in v) + "\n")
    with open(out / "words.vec", "w") as f:
        f.write(f"{len(word_vecs)} {DIM}\n")
        for w in sorted(word_vecs):
            f.write(w + "".join(f" {x:.6g}" for x in word_vecs[w]) + "\n")

    vocab = set(word_vecs)
    counts = {w: 1000 + 37 * k for k, w in enumerate(sorted(vocab))}
    for w in ["pizzas", "taco", "roll", "restaurant", "restaurants", "wonder", "wonderfully"]:
        counts.setdefault(w, 50)
    with open(out / "freq.tsv", "w") as f:
        for w in sorted(counts):
            f.write(f"{w}\t{counts[w]}\n")
    with open(out / "lemma.tsv", "w") as f:
        for a, b in [("pizzas", "pizza"), ("rolls", "roll"), ("tacos", "taco"), ("restaurants", "restaurant"),
                     ("beans", "bean"), ("drinks", "drink"), ("friends", "friend")]:
            f.write(f"{a}\t{b}\n")

    print(f"{len(reviews)} reviews ({len(train)} train / {len(test)} test), {len(extras)} filtered extras")


if __name__ == "__main__":
    main()
