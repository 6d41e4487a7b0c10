"""Independent straight-line reference implementations used by the tests.

Written with plain Python loops on purpose: they share no code path with the
vectorized implementations they check beyond tokenization.
"""

import math

import numpy as np

from mmretrieval.textproc import terms


def bm25_brute(docs, query, k1=1.2, b=0.75):
    """Score every doc by the Okapi formula, one term at a time."""
    toks = [terms(d.text) for d in docs]
    n = len(docs)
    avgdl = sum(len(t) for t in toks) / n
    qterms = list(dict.fromkeys(terms(query)))
    df = {q: sum(1 for other in toks if q in other) for q in qterms}
    out = []
    for d, t in zip(docs, toks):
        s = 0.0
        for q in qterms:
            tf = t.count(q)
            if tf == 0:
                continue
            idf = math.log(1 + (n - df[q] + 0.5) / (df[q] + 0.5))
            s += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(t) / avgdl))
        out.append((d.id, s))
    return out


def rank_all(pairs):
    """Full sort of (id, score) pairs: score desc, id asc."""
    return sorted(pairs, key=lambda p: (-p[1], p[0]))


def dot(u, v):
    return sum(float(a) * float(b) for a, b in zip(u, v))


def mips_brute(rows, ids, q, k):
    return rank_all([(i, dot(r, q)) for i, r in zip(ids, rows)])[:k]


def fusion_brute(rows, ids, img, txt, m, k):
    top_img = {i for i, _ in mips_brute(rows, ids, img, m)}
    top_txt = {i for i, _ in mips_brute(rows, ids, txt, m)}
    summed = [(i, dot(r, img) + dot(r, txt)) for i, r in zip(ids, rows)]
    return rank_all([p for p in summed if p[0] in top_img | top_txt])[:k]


def encode_straight(token_rows, proj, bias):
    """Mean of the given embedding rows, then tanh(proj @ h + bias), all by loops."""
    d = len(bias)
    h = [sum(float(r[j]) for r in token_rows) / len(token_rows) for j in range(d)]
    return np.array([math.tanh(sum(float(proj[i][j]) * h[j] for j in range(d)) + float(bias[i])) for i in range(d)])


def contrastive_loss_straight(queries, positives, negatives, params):
    """Batch-mean softmax cross-entropy, each score computed from scratch."""
    from mmretrieval.encoder import doc_token_ids, query_token_ids

    def q_vec(q):
        text_ids, vis_ids = query_token_ids(q, params)
        rows = [params.text_emb[i] for i in text_ids] + [params.visual_emb[v] for v in vis_ids]
        return encode_straight(rows, params.query_proj, params.query_bias)

    def d_vec(d):
        rows = [params.know_emb[i] for i in doc_token_ids(d, params)]
        return encode_straight(rows, params.know_proj, params.know_bias)

    pos = [d_vec(d) for d in positives]
    total = 0.0
    for i, q in enumerate(queries):
        zq = q_vec(q)
        cands = pos + [d_vec(n) for n in (negatives[i] if negatives else ())]
        s = [dot(zq, c) for c in cands]
        top = max(s)
        total += top + math.log(sum(math.exp(x - top) for x in s)) - s[i]
    return total / len(queries)
