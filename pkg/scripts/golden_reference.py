#!/usr/bin/env python3
"""Scalar reference for the five-token golden fixture.

Recomputes the frozen decoder golden values with plain python arithmetic
(no numpy): whitening, softmax, warm start, and the alternating scan. Run
it to re-derive the constants pinned in tests/test_decoder.py and
tests/test_acceptance.py.
"""

import math

EMB = [(1.0, 0.0), (0.9, 0.1), (0.0, 1.0), (0.1, 0.9), (0.7, 0.7)]
LOGITS = [2.0, 1.5, 1.0, 0.5, 0.0]
LAM, BETA, T_SEL, NUCLEUS, EPS, ITERS = 2.2, 2.8, 1.0, 0.9, 1e-5, 3


def main():
    n, m = len(EMB), len(EMB[0])
    norms = [math.sqrt(sum(x * x for x in row)) for row in EMB]
    tilde = [[x / nr for x in row] for row, nr in zip(EMB, norms)]
    mu = [sum(tilde[i][l] for i in range(n)) / n for l in range(m)]
    var = [sum((tilde[i][l] - mu[l]) ** 2 for i in range(n)) / n for l in range(m)]
    scale = [1.0 / math.sqrt(v + EPS) for v in var]
    white = [[(tilde[i][l] - mu[l]) * scale[l] for l in range(m)] for i in range(n)]

    def dist(i, j):
        return math.sqrt(sum((white[i][l] - white[j][l]) ** 2 for l in range(m)))

    mx = max(LOGITS)
    ex = [math.exp((x - mx) / T_SEL) for x in LOGITS]
    total = sum(ex)
    p = [e / total for e in ex]
    logp = [math.log(v) for v in p]

    pool = sorted(range(n), key=lambda i: (-p[i], i))
    cum, k0 = 0.0, 0
    for rank, token in enumerate(pool, start=1):
        cum += p[token]
        k0 = rank
        if cum >= NUCLEUS:
            break
    crop = pool[:k0]
    print(f"p = {p}")
    print(f"warm start: {sorted(crop)} (size {k0})")

    c = BETA - LAM
    for it in range(ITERS):
        f = {i: -min(dist(i, j) for j in crop) for i in pool}
        phi = {i: f[i] + LAM * logp[i] for i in pool}
        order = sorted(pool, key=lambda i: (-phi[i], -p[i], i))
        best_j, best_k, gam, mass = None, None, 0.0, 0.0
        for k, token in enumerate(order, start=1):
            gam += p[token]
            mass += p[token] * phi[token]
            J = mass / gam + c * math.log(gam)
            if best_j is None or J > best_j:
                best_j, best_k = J, k
        new_crop = order[:best_k]
        print(f"iteration {it}: k* = {best_k}, J* = {best_j!r}, crop = {sorted(new_crop)}")
        converged = sorted(new_crop) == sorted(crop)
        crop = new_crop
        if converged:
            print("converged")
            break

    gamma = sum(p[t] for t in crop)
    entropy = -sum((p[t] / gamma) * math.log(p[t] / gamma) for t in crop)
    print(f"final crop (selection order): {crop}")
    print(f"gamma = {gamma!r}")
    print(f"crop entropy = {entropy!r}")
    print(f"masked logits = {[LOGITS[i] if i in crop else float('-inf') for i in range(n)]}")


if __name__ == "__main__":
    main()
