#!/usr/bin/env python3
"""Brute-force reference values for the caption metrics.

Deliberately naive: every quantity is recomputed by enumeration (all
alignments for METEOR, all candidate subsequences for the LCS, explicit
dictionaries for n-gram counts and TF-IDF vectors). Its output is frozen into
tests/data/metric_fixture.json, which the C++ suites compare against.

Usage: python3 metrics_oracle.py > ../data/metric_fixture.json
"""
import itertools
import json
import math
from collections import Counter

PAIRS = [
    ("a a b", ["a b c"]),
    ("a b c", ["a b c d e f"]),
    ("a b c", ["a b c"]),
    ("c a b", ["a b c"]),
    ("a b c d", ["a c d"]),
    ("x y z", ["p q r"]),
    ("the plane is parked at the airport",
     ["a plane is parked at an airport",
      "the airplane is at the terminal",
      "planes parked near the airport runway"]),
    ("many green trees are in a forest",
     ["a forest with many green trees",
      "many trees are in the dense forest"]),
    ("the river the river flows",
     ["a river flows through the city", "the river is long"]),
    ("buildings", ["many buildings are near a road"]),
    ("a beach with blue sea and white waves",
     ["blue sea and a yellow beach",
      "a beach with blue sea and white waves",
      "white waves on the beach",
      "the sea is next to a beach",
      "a sandy beach"]),
    ("some boats are in the harbor near the boats",
     ["boats are in the harbor",
      "some boats near a harbor",
      "the harbor has many boats"]),
    ("a b a b a b", ["b a b a"]),
    ("storage tanks stand beside factory sheds", ["storage tanks stand beside factory sheds"]),
]


def ngrams(toks, n):
    return Counter(tuple(toks[i:i + n]) for i in range(len(toks) - n + 1))


def closest_ref_len(lc, refs):
    return min((abs(len(r) - lc), len(r)) for r in refs)[1]


def bleu_stats(cand, refs, n):
    cc = ngrams(cand, n)
    clipped = 0
    for g, c in cc.items():
        clipped += min(c, max(ngrams(r, n)[g] for r in refs))
    return clipped, sum(cc.values())


def bleu_from_stats(stats, lc, lr):
    if lc == 0:
        return 0.0
    logs = 0.0
    for clipped, total in stats:
        if total == 0 or clipped == 0:
            return 0.0
        logs += (1.0 / len(stats)) * math.log(clipped / total)
    bp = 1.0 if lc > lr else math.exp(1.0 - lr / lc)
    return bp * math.exp(logs)


def bleu(cand, refs, n):
    stats = [bleu_stats(cand, refs, k) for k in range(1, n + 1)]
    return bleu_from_stats(stats, len(cand), closest_ref_len(len(cand), refs))


def corpus_bleu(pairs, n):
    stats = [[0, 0] for _ in range(n)]
    lc = lr = 0
    for cand, refs in pairs:
        for k in range(1, n + 1):
            c, t = bleu_stats(cand, refs, k)
            stats[k - 1][0] += c
            stats[k - 1][1] += t
        lc += len(cand)
        lr += closest_ref_len(len(cand), refs)
    return bleu_from_stats(stats, lc, lr)


def all_alignments(cand, ref):
    """Every injective partial map cand position -> ref position with equal words."""
    out = []

    def rec(i, used, acc):
        if i == len(cand):
            out.append(list(acc))
            return
        rec(i + 1, used, acc)
        for j, w in enumerate(ref):
            if w == cand[i] and j not in used:
                acc.append((i, j))
                rec(i + 1, used | {j}, acc)
                acc.pop()

    rec(0, frozenset(), [])
    return out


def count_chunks(al):
    al = sorted(al)
    chunks = 0
    for k, (i, j) in enumerate(al):
        if k == 0 or not (i == al[k - 1][0] + 1 and j == al[k - 1][1] + 1):
            chunks += 1
    return chunks


def meteor_single(cand, ref):
    als = all_alignments(cand, ref)
    m = max(len(a) for a in als)
    if m == 0:
        return 0.0
    ch = min(count_chunks(a) for a in als if len(a) == m)
    p = m / len(cand)
    r = m / len(ref)
    f = 10 * p * r / (r + 9 * p)
    return f * (1 - 0.5 * ch / m)


def meteor(cand, refs):
    return max(meteor_single(cand, r) for r in refs)


def lcs_brute(a, b):
    best = 0
    for mask in range(1 << len(a)):
        sub = [a[i] for i in range(len(a)) if mask >> i & 1]
        if len(sub) <= best:
            continue
        it = iter(b)
        if all(any(x == y for y in it) for x in sub):
            best = len(sub)
    return best


def rouge_l(cand, refs, beta=1.2):
    best = 0.0
    for r in refs:
        l = lcs_brute(cand, r)
        if l == 0:
            continue
        rec = l / len(r)
        prec = l / len(cand)
        f = (1 + beta ** 2) * rec * prec / (rec + beta ** 2 * prec)
        best = max(best, f)
    return best


def cider(pairs, max_n=4):
    m = len(pairs)
    scores = []
    df = [Counter() for _ in range(max_n + 1)]
    for _, refs in pairs:
        for n in range(1, max_n + 1):
            seen = set()
            for r in refs:
                seen.update(ngrams(r, n).keys())
            for g in seen:
                df[n][g] += 1

    def vec(toks, n):
        return {g: c * math.log(m / max(1, df[n][g])) for g, c in ngrams(toks, n).items()}

    def cos(u, v):
        nu = math.sqrt(sum(x * x for x in u.values()))
        nv = math.sqrt(sum(x * x for x in v.values()))
        if nu == 0 or nv == 0:
            return 0.0
        return sum(u[g] * v.get(g, 0.0) for g in u) / (nu * nv)

    for cand, refs in pairs:
        total = 0.0
        for n in range(1, max_n + 1):
            gc = vec(cand, n)
            total += sum(cos(gc, vec(r, n)) for r in refs) / len(refs) / max_n
        scores.append(total)
    return scores


def main():
    pairs = [(c.split(), [r.split() for r in refs]) for c, refs in PAIRS]
    cid = cider(pairs)
    items = []
    for (cand, refs), cs in zip(pairs, cid):
        items.append({
            "candidate": " ".join(cand),
            "references": [" ".join(r) for r in refs],
            "bleu": [bleu(cand, refs, n) for n in range(1, 5)],
            "meteor": meteor(cand, refs),
            "rouge_l": rouge_l(cand, refs),
            "cider": cs,
        })
    doc = {
        "pairs": items,
        "corpus_bleu": [corpus_bleu(pairs, n) for n in range(1, 5)],
        "cider_mean": sum(cid) / len(cid),
    }
    print(json.dumps(doc, indent=1))


if __name__ == "__main__":
    main()
