"""Reed-Solomon threshold secret sharing over a prime field.

Share ``j`` is the evaluation of the input polynomial at ``x = j``; the secret
sits in coefficient 0. Decoding is Berlekamp-Welch solved by Gaussian
elimination, so it tolerates ``e`` wrong shares and ``f`` missing ones as long
as ``2e + f < N - k + 1``.
"""

import itertools
from collections import Counter


def check_prime(p):
    if p < 2 or any(p % d == 0 for d in range(2, int(p**0.5) + 1)):
        raise ValueError(f"{p} is not prime")


def field_inv(a, p):
    a %= p
    if a == 0:
        raise ZeroDivisionError("no inverse")
    return pow(a, p - 2, p)


def poly_eval(coeffs, x, p):
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % p
    return acc


def rs_encode(coeffs, n, p):
    """Evaluate ``coeffs`` (lowest degree first) at ``1..n``."""
    if n >= p:
        raise ValueError("field too small")
    if len(coeffs) > n:
        raise ValueError("message longer than code length")
    return [poly_eval(coeffs, j, p) for j in range(1, n + 1)]


def share_secret(secret, k, n, p, rng):
    """Split ``secret`` into ``n`` shares, any ``k`` of which recover it.

    ``rng`` only needs a ``randrange`` method; ``k - 1`` draws are made.
    """
    if not 1 <= k <= n < p:
        raise ValueError(f"need 1 <= k <= N < p, got k={k} N={n} p={p}")
    if not 0 <= secret < p:
        raise ValueError("secret outside the field")
    poly = [secret] + [rng.randrange(p) for _ in range(k - 1)]
    return poly, rs_encode(poly, n, p)


def _solve(rows, p):
    """Solve an augmented linear system mod p.

    Returns one solution (free variables set to 0) or None when inconsistent.
    """
    rows = [list(r) for r in rows]
    if not rows:
        return []
    ncols = len(rows[0]) - 1
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(rows)) if rows[i][c] % p), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = field_inv(rows[r][c], p)
        rows[r] = [v * inv % p for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c]:
                factor = rows[i][c]
                rows[i] = [(a - factor * b) % p for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    for i in range(r, len(rows)):
        if rows[i][-1] % p:
            return None
    sol = [0] * ncols
    for i, c in enumerate(pivots):
        sol[c] = rows[i][-1]
    return sol


def _poly_divmod(num, den, p):
    num = list(num)
    den = list(den)
    while den and den[-1] == 0:
        den.pop()
    inv_lead = field_inv(den[-1], p)
    quot = [0] * max(len(num) - len(den) + 1, 1)
    for i in range(len(num) - len(den), -1, -1):
        coef = num[i + len(den) - 1] * inv_lead % p
        quot[i] = coef
        if coef:
            for j, d in enumerate(den):
                num[i + j] = (num[i + j] - coef * d) % p
    rem = num[: len(den) - 1]
    return quot, rem


def rs_decode(received, k, p):
    """Recover the degree < k polynomial behind ``received``.

    ``received`` maps server index (1-based) to a share value; ``None`` values
    or absent indices are erasures. Returns the coefficient list, or None when
    decoding fails (too few shares, inconsistent system, or too many errors).
    """
    points = sorted((x, y % p) for x, y in received.items() if y is not None)
    m = len(points)
    if m < k:
        return None
    e = (m - k) // 2
    # unknowns: Q has e+k coefficients, E is monic of degree e
    rows = []
    for x, y in points:
        row = [pow(x, j, p) for j in range(e + k)]
        row += [(-y * pow(x, j, p)) % p for j in range(e)]
        row.append(y * pow(x, e, p) % p)
        rows.append(row)
    sol = _solve(rows, p)
    if sol is None:
        return None
    q = sol[: e + k]
    err = sol[e + k :] + [1]
    quot, rem = _poly_divmod(q, err, p)
    if any(rem):
        return None
    quot = (quot + [0] * k)[:k]
    agree = sum(1 for x, y in points if poly_eval(quot, x, p) == y)
    if agree < m - e:
        return None
    return quot


def decode_secret(received, k, p):
    poly = rs_decode(received, k, p)
    return None if poly is None else poly[0]


def privacy_census(fixed, k, p):
    """Count, per secret, the polynomials of degree < k matching ``fixed``.

    ``fixed`` maps server index to share value. Enumerates all ``p**k``
    polynomials, so only meant for tiny fields.
    """
    counts = Counter({s: 0 for s in range(p)})
    for poly in itertools.product(range(p), repeat=k):
        if all(poly_eval(poly, x, p) == y % p for x, y in fixed.items()):
            counts[poly[0]] += 1
    return dict(counts)
