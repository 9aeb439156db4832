"""Interactive protocols on secret-shared values.

Every function here is executed symmetrically by both compute servers,
which stay in lockstep through the exchange barriers. Round costs match
the standard accounting: one round per Beaver product, 2k+1 rounds for a
division with k Newton iterations, and one round total for the masked
exponentiation regardless of input size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .offline import BeaverTriple, ExpMask, MatrixTriple
from .ring import from_signed, ring_add, ring_matmul, ring_mul, ring_neg, ring_sub, to_signed
from .session import PartyRuntime
from .sharing import SharedArray


class ProtocolError(RuntimeError):
    """Protocol-level misuse: reused material, bad dimensions, bad domain."""


@dataclass(frozen=True)
class ExpParams:
    """Public parameters of the masked exponentiation.

    Inputs must lie in [u_min, 0]; masks are drawn from [-r_max, r_max).
    The correctness condition (r_max - u_min)*log2(e) <= l_f < (l-1)/2
    is checked by analysis.validate_exp_params before a session starts.
    """

    u_min: float = -4.0
    r_max: float = 1.25

    def rmax_enc(self, lf: int) -> int:
        return int(round(self.r_max * (1 << lf)))


def _consume(material):
    if material.consumed:
        raise ProtocolError("offline material reused; every triple and mask is single-use")
    material.consumed = True
    return material


def _split(flat: np.ndarray, first_shape) -> tuple[np.ndarray, np.ndarray]:
    n = int(np.prod(first_shape, dtype=np.int64))
    return flat[:n].reshape(first_shape), flat[n:]


def _rescale(rt: PartyRuntime, x: SharedArray, bits: int | None = None,
             rounding: bool = True) -> SharedArray:
    """Drop ``bits`` fraction bits from a shared value.

    The default mode hands the masked words to the assistant, which is
    exact to 1.5 quanta for any value; "local" mode shifts each share in
    place, which costs nothing but miscarries by a large power of two
    with probability proportional to the value's magnitude.
    """
    if bits is None:
        bits = x.codec.lf
    if rt.trunc_mode == "local":
        return x.round_local(bits) if rounding else x.trunc_local(bits)
    vals = rt.trunc_values(x.values, bits, rounding)
    return SharedArray(x.party, vals, x.codec, x.scale - bits)


def ss_mul(rt: PartyRuntime, u: SharedArray, v: SharedArray,
           triple: BeaverTriple | None = None, truncate: bool = True) -> SharedArray:
    """Elementwise Beaver product of two shared arrays.

    One exchange round carrying two ring elements per element per
    direction. The result is truncated back to the inputs' common scale
    unless ``truncate`` is False, in which case the raw double-scale
    product is returned.
    """
    if u.shape != v.shape:
        u_b, v_b = np.broadcast_arrays(u.values, v.values)
        u = SharedArray(u.party, u_b.copy(), u.codec, u.scale)
        v = SharedArray(v.party, v_b.copy(), v.codec, v.scale)
    p = rt.params
    with rt.scope("ss_mul"):
        t = _consume(triple if triple is not None else rt.offline.get_triple(u.shape))
        d_mine = ring_sub(u.values, t.u, p)
        e_mine = ring_sub(v.values, t.v, p)
        theirs = rt.exchange(np.concatenate([d_mine.ravel(), e_mine.ravel()]))
        d_theirs, rest = _split(theirs, u.shape)
        e_theirs = rest.reshape(u.shape)
        d = ring_add(d_mine, d_theirs, p)
        e = ring_add(e_mine, e_theirs, p)
        z = ring_add(ring_mul(u.values, e, p), ring_mul(d, v.values, p), p)
        z = ring_add(z, t.c, p)
        if rt.party == 1:
            z = ring_sub(z, ring_mul(d, e, p), p)
        out = SharedArray(rt.party, z, u.codec, u.scale + v.scale)
        if truncate:
            out = _rescale(rt, out, v.scale)
    return out


def matmul_cost_elements(m: int, n: int, k: int) -> int:
    """Nominal transmitted-element count of one matrix product.

    This is the figure used in the communication cost model, counted as
    (m+n)*k for an (m x n)-by-(n x k) product.
    """
    return (m + n) * k


def ss_matmul(rt: PartyRuntime, u: SharedArray, v: SharedArray,
              triple: MatrixTriple | None = None, truncate: bool = True) -> SharedArray:
    """Beaver matrix product of shared (m x n) and (n x k) matrices."""
    if u.values.ndim != 2 or v.values.ndim != 2 or u.shape[1] != v.shape[0]:
        raise ProtocolError(f"matmul dimension mismatch: {u.shape} x {v.shape}")
    m, n = u.shape
    k = v.shape[1]
    p = rt.params
    with rt.scope("ss_matmul"):
        t = _consume(triple if triple is not None else rt.offline.get_matrix_triple(m, n, k))
        d_mine = ring_sub(u.values, t.a, p)
        e_mine = ring_sub(v.values, t.b, p)
        theirs = rt.exchange(np.concatenate([d_mine.ravel(), e_mine.ravel()]))
        d_theirs, rest = _split(theirs, (m, n))
        e_theirs = rest.reshape(n, k)
        d = ring_add(d_mine, d_theirs, p)
        e = ring_add(e_mine, e_theirs, p)
        z = ring_add(ring_matmul(u.values, e, p), ring_matmul(d, v.values, p), p)
        z = ring_add(z, t.c, p)
        if rt.party == 1:
            z = ring_sub(z, ring_matmul(d, e, p), p)
        out = SharedArray(rt.party, z, u.codec, u.scale + v.scale)
        if truncate:
            out = _rescale(rt, out, v.scale)
    return out


def ss_dist(rt: PartyRuntime, x: SharedArray, y: SharedArray | None = None) -> SharedArray:
    """Squared-Euclidean distance matrix between shared point sets.

    Uses ||a - b||^2 = ||a||^2 + ||b||^2 - 2 a.b with all combining done
    on raw double-scale values so that one truncation covers each output
    entry. The self-distance form cancels exactly, giving a zero diagonal
    up to the truncation's last bit.
    """
    if x.values.ndim != 2:
        raise ProtocolError("ss_dist expects 2-d point matrices")
    p = rt.params
    with rt.scope("ss_dist"):
        if y is None:
            cross = ss_matmul(rt, x, x.T, truncate=False)
            norms = SharedArray(rt.party, np.diagonal(cross.values).copy(),
                                x.codec, cross.scale)
            raw = ring_sub(ring_add(norms.values[:, None], norms.values[None, :], p),
                           ring_mul(np.uint64(2), cross.values, p), p)
        else:
            if y.values.ndim != 2 or x.shape[1] != y.shape[1]:
                raise ProtocolError(f"ss_dist feature mismatch: {x.shape} vs {y.shape}")
            sq_x = ss_mul(rt, x, x, truncate=False)
            sq_y = ss_mul(rt, y, y, truncate=False)
            cross = ss_matmul(rt, x, y.T, truncate=False)
            nx = sq_x.values.sum(axis=1, dtype=np.uint64) & p.mask
            ny = sq_y.values.sum(axis=1, dtype=np.uint64) & p.mask
            raw = ring_sub(ring_add(nx[:, None], ny[None, :], p),
                           ring_mul(np.uint64(2), cross.values, p), p)
        out = SharedArray(rt.party, raw, x.codec, 2 * x.scale)
        return _rescale(rt, out, x.scale)


def _affine_reciprocal_init(rt: PartyRuntime, v: SharedArray, lo: float, hi: float) -> SharedArray:
    """Local affine minimax first guess for 1/v on the public domain."""
    beta = 2.0 / (lo * hi + (lo + hi) ** 2 / 4.0)
    alpha = beta * (lo + hi)
    y = _rescale(rt, -v.scale_public(beta))
    return y.add_public(alpha)


def ss_reciprocal(rt: PartyRuntime, v: SharedArray, iterations: int | None = None,
                  domain: tuple[float, float] | None = None) -> SharedArray:
    """Newton reciprocal y <- y (2 - v y) on a public positive domain.

    Two rounds per iteration. The caller guarantees the reconstructed
    divisor lies in the domain; nothing is detectable online otherwise.
    """
    iterations = rt.div.iterations if iterations is None else iterations
    lo, hi = domain if domain is not None else (rt.div.lo, rt.div.hi)
    with rt.scope("ss_div"):
        y = _affine_reciprocal_init(rt, v, lo, hi)
        for _ in range(iterations):
            t = ss_mul(rt, v, y)
            y = ss_mul(rt, y, (-t).add_public(2.0))
    return y


def ss_div(rt: PartyRuntime, u: SharedArray, v: SharedArray,
           iterations: int | None = None,
           domain: tuple[float, float] | None = None) -> SharedArray:
    """Shared division u / v as one reciprocal plus one product."""
    with rt.scope("ss_div"):
        return ss_mul(rt, u, ss_reciprocal(rt, v, iterations, domain))


def ss_sqrt(rt: PartyRuntime, x: SharedArray, iterations: int | None = None,
            domain: tuple[float, float] | None = None) -> SharedArray:
    """Shared square root via inverse-square-root Newton iterations.

    z <- z (3 - x z^2) / 2 from a tangent-line first guess, then one
    product by x. Three rounds per iteration. Exact zero inputs map to
    zero since the final multiply scales the bounded iterate by x.
    """
    iterations = rt.div.sqrt_iterations if iterations is None else iterations
    lo, hi = domain if domain is not None else (rt.div.sqrt_lo, rt.div.sqrt_hi)
    x0 = hi / 2.0
    a = 1.5 / math.sqrt(x0)
    b = 0.5 / x0 ** 1.5
    with rt.scope("ss_sqrt"):
        z = _rescale(rt, -x.scale_public(b)).add_public(a)
        for _ in range(iterations):
            s = ss_mul(rt, z, z)
            t = ss_mul(rt, x, s)
            z = ss_mul(rt, z, (-t).add_public(3.0))
            z = _rescale(rt, z.scale_public(0.5))
        return ss_mul(rt, x, z)


def pp_exp(rt: PartyRuntime, u: SharedArray, params: ExpParams,
           masks: ExpMask | None = None, policy: str = "strict",
           raw: bool = False) -> SharedArray:
    """Masked exponentiation: shares of e^u for shared u in [u_min, 0].

    The servers open d = u + r for a pre-shared random mask r, evaluate
    e^{d} publicly and correct with their shares of e^{-r}. One exchange
    round and 2nl bits of online traffic for an n-element input.

    With ``raw=True`` the public factor is encoded at scale l_f and the
    output is the uncorrected double-scale product, exact on the grid
    under the Theorem-1 parameter bound. The default path encodes the
    public factor at scale 2*l_f and rescales locally, which halves the
    mask-quantization error and returns shares at scale l_f.

    ``policy`` controls out-of-range openings: "strict" rejects a public
    d outside what [u_min, 0] inputs can produce, "clamp" proceeds (the
    natural underflow of e^d keeps far-negative inputs near zero).
    """
    lf = rt.codec.lf
    p = rt.params
    rmax_enc = params.rmax_enc(lf)
    with rt.scope("pp_exp"):
        mask = _consume(masks if masks is not None else
                        rt.offline.get_exp_mask(u.shape, rmax_enc))
        d_mine = ring_add(u.values, mask.r, p)
        d_theirs = rt.exchange(d_mine)
        d = to_signed(ring_add(d_mine, d_theirs, p), p)
        d_hat = d.astype(np.float64) / (1 << lf)
        slack = 4.0 / (1 << lf)
        if policy == "strict":
            if np.any(d_hat < params.u_min - params.r_max - slack) or \
               np.any(d_hat >= params.r_max + slack):
                raise ProtocolError("opened exponent outside the configured input range")
        elif policy == "clamp":
            # Valid inputs never open above r_max; capping there keeps a
            # corrupted or out-of-domain opening finite instead of
            # overflowing e^d. Far-negative openings need no cap since
            # e^d underflows to the correct zero.
            d_hat = np.minimum(d_hat, params.r_max + slack)
        else:
            raise ValueError(f"unknown pp_exp policy {policy!r}")

        if raw:
            e_pub = from_signed(np.round(np.exp(d_hat) * (1 << lf)), p)
            out = SharedArray(rt.party, ring_mul(e_pub, mask.m, p), u.codec, 2 * lf)
            return out

        # High-precision public factor; the product and rescaling run on
        # native integers so the double-width intermediate never wraps.
        x_pub = np.round(np.exp(d_hat) * float(1 << (2 * lf)))
        x_int = [int(v) for v in np.ravel(x_pub)]
        modulus = p.modulus
        shift = 2 * lf
        half = 1 << (shift - 1)
        vals = []
        for xe, me in zip(x_int, np.ravel(mask.m)):
            if rt.party == 0:
                s = (xe * int(me) + half) >> shift
            else:
                s = -((xe * (modulus - int(me))) >> shift)
            vals.append(s % modulus)
        out_vals = np.array(vals, dtype=np.uint64).reshape(u.shape)
        return SharedArray(rt.party, out_vals, u.codec, lf)


@dataclass
class LdlFactors:
    """Shares of the unit-lower-triangular L and the pivot vector D."""

    L: SharedArray
    D: SharedArray


def _column(x: SharedArray, rows, col) -> SharedArray:
    return SharedArray(x.party, x.values[rows, col].reshape(-1, 1), x.codec, x.scale)


def pp_cholesky_ldl(rt: PartyRuntime, u: SharedArray,
                    pivot_domain: tuple[float, float] | None = None) -> LdlFactors:
    """LDL^T decomposition of a shared positive-definite matrix.

    Column k costs four product rounds (the pivot update and the column
    update) plus one division by the pivot; the first column is a single
    division and the last column needs only its pivot. Total rounds
    R_div + (n-2)(4+R_div) + 2.
    """
    n = u.shape[0]
    if u.values.ndim != 2 or u.shape[1] != n:
        raise ProtocolError("pp_cholesky_ldl expects a square matrix")
    if n < 2:
        raise ProtocolError("pp_cholesky_ldl needs n >= 2")
    codec = u.codec
    p = rt.params
    with rt.scope("pp_cholesky"):
        L = SharedArray(rt.party, np.zeros((n, n), dtype=np.uint64), codec)
        d_vals = np.zeros(n, dtype=np.uint64)

        # d_1 = u_11; first column of L by one vector division.
        d_vals[0] = u.values[0, 0]
        pivot = SharedArray(rt.party, u.values[0:1, 0:1], codec)
        col = _column(u, slice(0, n), 0)
        l_col = ss_div(rt, col, pivot, domain=pivot_domain)
        L.values[:, 0] = l_col.values[:, 0]

        for k in range(1, n):
            # Pivot: d_k = u_kk - sum_m l_km^2 d_m, two product rounds.
            lk = SharedArray(rt.party, L.values[k:k + 1, :k], codec)      # 1 x k
            dk_prev = SharedArray(rt.party, d_vals[:k].reshape(-1, 1), codec)
            lk_sq = ss_mul(rt, lk, lk)
            acc = ss_matmul(rt, lk_sq, dk_prev)                            # 1 x 1
            d_k = SharedArray(rt.party, ring_sub(u.values[k:k + 1, k:k + 1],
                                                 acc.values, p), codec)
            d_vals[k] = d_k.values[0, 0]
            if k == n - 1:
                break
            # Column: hat_l = u_{k+1:n,k} - L_{k+1:n,1:k} (l_k * d) , two rounds.
            w = ss_mul(rt, lk, SharedArray(rt.party, d_vals[:k].reshape(1, -1), codec))
            below = SharedArray(rt.party, L.values[k + 1:, :k], codec)
            acc2 = ss_matmul(rt, below, w.T)                               # (n-k-1) x 1
            hat = SharedArray(rt.party, ring_sub(u.values[k + 1:, k:k + 1],
                                                 acc2.values, p), codec)
            # One division by the shared pivot.
            l_col = ss_div(rt, hat, d_k, domain=pivot_domain)
            L.values[k + 1:, k] = l_col.values[:, 0]
            L.values[k, k] = codec.encode(1.0) if rt.party == 0 else 0

        L.values[n - 1, n - 1] = codec.encode(1.0) if rt.party == 0 else 0
        D = SharedArray(rt.party, d_vals, codec)
    return LdlFactors(L=L, D=D)


def pp_forward(rt: PartyRuntime, L: SharedArray) -> SharedArray:
    """Invert a shared unit lower-triangular matrix, one round per row.

    Row k of V = L^{-1} is v_{k,1:k-1} = -l_{k,1:k-1} V_{1:k-1,1:k-1},
    costing a single matrix product round for each k = 2..n.
    """
    n = L.shape[0]
    codec = L.codec
    one = codec.encode(1.0)
    with rt.scope("pp_forward"):
        V = SharedArray(rt.party, np.zeros((n, n), dtype=np.uint64), codec)
        V.values[0, 0] = one if rt.party == 0 else 0
        for k in range(1, n):
            lk = SharedArray(rt.party, L.values[k:k + 1, :k], codec)
            head = SharedArray(rt.party, V.values[:k, :k], codec)
            row = ss_matmul(rt, lk, head)
            V.values[k, :k] = ring_neg(row.values[0], rt.params)
            V.values[k, k] = one if rt.party == 0 else 0
    return V


def pp_backward(rt: PartyRuntime, V: SharedArray, D: SharedArray,
                pivot_domain: tuple[float, float] | None = None) -> SharedArray:
    """Combine the factors into the inverse: Lambda = V^T D^{-1} V.

    One vector division for D^{-1} (reciprocal rounds plus the product
    with V's rows) and one matrix product round.
    """
    n = V.shape[0]
    with rt.scope("pp_backward"):
        d_col = SharedArray(rt.party, D.values.reshape(-1, 1), D.codec, D.scale)
        recip = ss_reciprocal(rt, d_col, domain=pivot_domain)
        scaled = ss_mul(rt, SharedArray(rt.party, np.broadcast_to(
            recip.values, (n, n)).copy(), V.codec, recip.scale), V)
        return ss_matmul(rt, V.T, scaled)


def pp_matinv(rt: PartyRuntime, u: SharedArray,
              pivot_domain: tuple[float, float] | None = None) -> SharedArray:
    """Invert a shared positive-definite matrix via LDL^T factors.

    Total rounds (21n - 23) + (n - 1) + 18 = 22n - 6 at the default
    division budget.
    """
    with rt.scope("pp_matinv"):
        factors = pp_cholesky_ldl(rt, u, pivot_domain)
        V = pp_forward(rt, factors.L)
        return pp_backward(rt, V, factors.D, pivot_domain)
