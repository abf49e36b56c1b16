"""Jitted simulation kernels, pinned bit-for-bit to the reference engine.

The pure-Python path in ``protocol`` is the semantic source of truth; these
kernels replay the exact same integer mixing and the exact same float
operations (same association order, same libm calls), so traces agree to the
last bit. ``tests/test_backends.py`` enforces that.

All uint64 arithmetic uses pre-built uint64 constants: mixing a numba uint64
with a signed literal would promote to float64 and corrupt the PRF.
"""

from __future__ import annotations

import math

import numpy as np

from . import backend
from ._bits import GOLDEN, TAG_CRED, TAG_LADDER_CRED, TAG_SPACING
from ._bits import _M1 as M1_INT
from ._bits import _M2 as M2_INT

_U = np.uint64
_GOLD = _U(GOLDEN)
_M1 = _U(M1_INT)
_M2 = _U(M2_INT)
_S30, _S27, _S31 = _U(30), _U(27), _U(31)
_TCRED, _TSPACE, _TLCRED = _U(TAG_CRED), _U(TAG_SPACING), _U(TAG_LADDER_CRED)
_TCRED_X = _U((TAG_CRED * GOLDEN) & 0xFFFFFFFFFFFFFFFF)
_TSPACE_X = _U((TAG_SPACING * GOLDEN) & 0xFFFFFFFFFFFFFFFF)
_TLCRED_X = _U((TAG_LADDER_CRED * GOLDEN) & 0xFFFFFFFFFFFFFFFF)
_TWO_NEG52 = 2.0**-52
_S12 = _U(12)

njit = backend.njit


@njit(cache=True, nogil=True, inline="always")
def _mix(z):
    z = z ^ (z >> _S30)
    z = z * _M1
    z = z ^ (z >> _S27)
    z = z * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True, inline="always")
def _prf(k0, k1, k2, k3, msg, tag_x, index):
    z = _mix(msg ^ k0)
    z = _mix(z ^ k1 ^ tag_x)
    z = _mix(z ^ k2 ^ (index * _M1))
    return _mix(z ^ k3)


@njit(cache=True, nogil=True, inline="always")
def _stream(key, index):
    return _mix(key + (index + _U(1)) * _GOLD)


@njit(cache=True, nogil=True, inline="always")
def _unit(bits):
    return ((bits >> _S12) + 0.5) * _TWO_NEG52


@njit(cache=True, nogil=True)
def _kernel_lookahead(
    a0, a1, a2, a3, b0, b1, b2, b3, c0, c1k, c2k, c3k,
    q1, stake_key, alpha, beta, delta, depth, burn, n,
):
    seed_bits = np.empty(n, dtype=np.uint64)
    winning = np.empty(n)
    winner = np.empty(n, dtype=np.int8)
    adv_bc = np.empty(n)
    hb = np.empty(n)
    hc = np.empty(n)
    lam_out = np.empty(n)
    markov = np.empty(n, dtype=np.int8)
    reset = np.empty(n, dtype=np.bool_)
    wsize = np.empty(n, dtype=np.int16)
    fresh_out = np.empty(n, dtype=np.bool_)

    entries = np.empty(depth)
    creds = np.empty(depth, dtype=np.uint64)

    rate_b = beta * (1.0 - alpha)
    rate_c = (1.0 - beta) * (1.0 - alpha)
    c_now = (1.0 - beta) * (1.0 - alpha)
    c_next = 1.0 - alpha

    seed = q1
    pending = False
    pend_bits = _U(0)

    total = burn + n
    for r in range(total):
        if delta == 0.0:
            lam = 1.0
        else:
            u = _unit(_stream(stake_key, _U(r)))
            lam = 1.0 - delta + 2.0 * delta * u
        a_rate = alpha * lam
        b_rate = rate_b * lam
        c_rate = rate_c * lam

        if b_rate > 0.0:
            bbits = _prf(b0, b1, b2, b3, seed, _TCRED_X, _U(0))
            xb = -math.log(_unit(bbits)) / b_rate
        else:
            bbits = _U(0)
            xb = np.inf
        if c_rate > 0.0:
            cbits = _prf(c0, c1k, c2k, c3k, seed, _TCRED_X, _U(0))
            xc = -math.log(_unit(cbits)) / c_rate
        else:
            cbits = _U(0)
            xc = np.inf

        acc = 0.0
        for k in range(depth):
            u = _unit(_prf(a0, a1, a2, a3, seed, _TSPACE_X, _U(k)))
            acc += -math.log(u) / a_rate
            entries[k] = acc
            creds[k] = _prf(a0, a1, a2, a3, seed, _TLCRED_X, _U(k))

        if beta > 0.0:
            w = 0
            while w < depth and entries[w] < xb:
                w += 1
        else:
            w = depth

        fresh = not pending
        adv = np.nan
        adv_bits = _U(0)
        commit = False
        commit_bits = _U(0)
        if pending:
            pending = False
            adv = entries[0]
            adv_bits = creds[0]
        elif w > 0:
            best = -1.0
            bi = -1
            for i in range(w):
                u2 = _unit(_prf(a0, a1, a2, a3, creds[i], _TSPACE_X, _U(0)))
                s_next = -math.log(u2) / alpha
                p_now = math.exp(-c_now * entries[i])
                obj = p_now + p_now * math.exp(-c_next * s_next)
                if obj > best:
                    best = obj
                    bi = i
            adv = entries[bi]
            adv_bits = creds[bi]
            if w >= 2:
                commit = True
                commit_bits = _prf(a0, a1, a2, a3, adv_bits, _TLCRED_X, _U(0))

        who = 3
        best_s = np.inf
        if not math.isnan(adv) and adv < best_s:
            who = 0
            best_s = adv
        if xb < best_s:
            who = 1
            best_s = xb
        if xc < best_s:
            who = 2
            best_s = xc

        if who == 0:
            next_bits = adv_bits
        elif who == 1:
            next_bits = bbits
        else:
            next_bits = cbits

        new_pending = fresh and who == 0 and commit
        if r >= burn:
            i = r - burn
            seed_bits[i] = seed
            winning[i] = best_s
            winner[i] = who
            adv_bc[i] = adv
            hb[i] = xb
            hc[i] = xc
            lam_out[i] = lam
            markov[i] = 0 if fresh else 1
            reset[i] = fresh
            wsize[i] = w
            fresh_out[i] = fresh

        if new_pending:
            pending = True
            pend_bits = commit_bits
        seed = next_bits

    return (
        seed_bits, winning, winner, adv_bc, hb, hc, lam_out,
        markov, reset, wsize, fresh_out,
    )


@njit(cache=True, nogil=True)
def _kernel_plain(
    a0, a1, a2, a3, b0, b1, b2, b3, c0, c1k, c2k, c3k,
    q1, stake_key, alpha, beta, delta, burn, n, broadcast_min,
):
    """Honest (broadcast the ladder minimum) and silent (never broadcast)."""
    seed_bits = np.empty(n, dtype=np.uint64)
    winning = np.empty(n)
    winner = np.empty(n, dtype=np.int8)
    adv_bc = np.empty(n)
    hb = np.empty(n)
    hc = np.empty(n)
    lam_out = np.empty(n)

    rate_b = beta * (1.0 - alpha)
    rate_c = (1.0 - beta) * (1.0 - alpha)

    seed = q1
    total = burn + n
    for r in range(total):
        if delta == 0.0:
            lam = 1.0
        else:
            u = _unit(_stream(stake_key, _U(r)))
            lam = 1.0 - delta + 2.0 * delta * u
        a_rate = alpha * lam
        b_rate = rate_b * lam
        c_rate = rate_c * lam

        if b_rate > 0.0:
            bbits = _prf(b0, b1, b2, b3, seed, _TCRED_X, _U(0))
            xb = -math.log(_unit(bbits)) / b_rate
        else:
            bbits = _U(0)
            xb = np.inf
        if c_rate > 0.0:
            cbits = _prf(c0, c1k, c2k, c3k, seed, _TCRED_X, _U(0))
            xc = -math.log(_unit(cbits)) / c_rate
        else:
            cbits = _U(0)
            xc = np.inf

        if broadcast_min:
            u = _unit(_prf(a0, a1, a2, a3, seed, _TSPACE_X, _U(0)))
            adv = -math.log(u) / a_rate
            adv_bits = _prf(a0, a1, a2, a3, seed, _TLCRED_X, _U(0))
        else:
            adv = np.nan
            adv_bits = _U(0)

        who = 3
        best_s = np.inf
        if not math.isnan(adv) and adv < best_s:
            who = 0
            best_s = adv
        if xb < best_s:
            who = 1
            best_s = xb
        if xc < best_s:
            who = 2
            best_s = xc

        if who == 0:
            next_bits = adv_bits
        elif who == 1:
            next_bits = bbits
        else:
            next_bits = cbits

        if r >= burn:
            i = r - burn
            seed_bits[i] = seed
            winning[i] = best_s
            winner[i] = who
            adv_bc[i] = adv
            hb[i] = xb
            hc[i] = xc
            lam_out[i] = lam
        seed = next_bits

    return seed_bits, winning, winner, adv_bc, hb, hc, lam_out


def simulate(config) -> "Trace":
    """Run the jitted engine and wrap the columns in a Trace."""
    from .protocol import STATE_NA, Trace, GameContext

    ctx = GameContext.from_config(config)
    a = tuple(_U(w) for w in ctx.adversary_key.words)
    b = tuple(_U(w) for w in ctx.honest_b_key.words)
    c = tuple(_U(w) for w in ctx.honest_c_key.words)
    q1 = _U(ctx.initial_seed.bits)
    skey = _U(ctx.stake_key)
    n = config.rounds

    if config.strategy == "one-lookahead":
        out = _kernel_lookahead(
            *a, *b, *c, q1, skey,
            config.alpha, config.beta, config.delta,
            config.ladder_depth, config.burn_in, n,
        )
        (seed_bits, winning, winner, adv_bc, hb, hc, lam,
         markov, reset, wsize, fresh) = out
    else:
        out = _kernel_plain(
            *a, *b, *c, q1, skey,
            config.alpha, config.beta, config.delta,
            config.burn_in, n, config.strategy == "honest",
        )
        seed_bits, winning, winner, adv_bc, hb, hc, lam = out
        markov = np.full(n, STATE_NA, dtype=np.int8)
        reset = np.ones(n, dtype=bool)
        wsize = np.full(n, -1, dtype=np.int16)
        fresh = np.ones(n, dtype=bool)

    return Trace(
        config=config,
        seed_bits=seed_bits,
        winning_score=winning,
        winner=winner,
        adversary_broadcast=adv_bc,
        honest_b=hb,
        honest_c=hc,
        online_stake=lam,
        markov_state=markov,
        is_reset=np.asarray(reset, dtype=bool),
        w_size=wsize,
        fresh=np.asarray(fresh, dtype=bool),
    )
