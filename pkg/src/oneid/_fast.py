"""Compiled Monte Carlo kernels.

These mirror :func:`oneid.see.see_step` and the round-robin driver of
:mod:`oneid.pseeb` operation for operation, reading rewards from the same
per-arm streams, so a fast run reproduces the reference trajectory exactly.

Rewards live in one flat buffer with per-stream offsets and lengths.  A
kernel that needs a draw beyond a stream's buffer returns ``NEED_MORE`` with
the stream id; every decision before a draw is a pure function of the saved
state, so the caller extends the buffer and simply calls the kernel again.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from .confidence import _engine_phase, _radius_log

PULLED = 0
TERMINATED = 1
FAILED = 2
NEED_MORE = 3
CAPPED = 4
BROKEN = 5  # an engine invariant failed; the reference engine raises instead

EXPLORING = 0
EXPLOITING = 1
DONE = 2

radius_jit = numba.njit(cache=True)(_radius_log)
engine_phase_jit = numba.njit(cache=True)(_engine_phase)


@numba.njit(cache=True)
def _set_phase(b, k, log_delta, C, K, phase, cur):
    # cur[b] = (log ee tol, log et tol, ee limit, et limit) of phase k
    phase[b] = k
    r = engine_phase_jit(k, log_delta, C, K)
    cur[b, 0] = r[0]
    cur[b, 1] = r[1]
    cur[b, 2] = r[2]
    cur[b, 3] = r[3]


@numba.njit(cache=True)
def _ucb_ee(b, a, ee_n, ee_sum, tol):
    n = ee_n[b, a]
    if n == 0:
        return math.inf
    return ee_sum[b, a] / n + radius_jit(n, tol)


@numba.njit(cache=True)
def _lcb_ee(b, a, ee_n, ee_sum, tol, C):
    n = ee_n[b, a]
    if n == 0:
        return -math.inf
    return ee_sum[b, a] / n - C * radius_jit(n, tol)


@numba.njit(cache=True)
def _step_copy(
    b, K, mu0, log_delta, none_k, C, max_phase,
    brackets, bsize, cur,
    buf, off, length,
    phase, mode, t_ee, t_et, last, ahat, answer,
    ee_n, ee_sum, et_n, et_sum, q_has, q_val, fresh_ee, fresh_et,
    need,
):
    nbr = bsize[b]
    while True:
        k = phase[b]
        if mode[b] == EXPLOITING:
            a = ahat[b]
            if et_n[b, a] <= cur[b, 3]:
                s = (b * 2 + 1) * K + a
                idx = fresh_et[b, a]
                if idx >= length[s]:
                    need[0] = s
                    need[1] = idx + 1
                    return NEED_MORE
                x = buf[off[s] + idx]
                fresh_et[b, a] = idx + 1
                et_n[b, a] += 1
                et_sum[b, a] += x
                t_et[b] += 1
                n = et_n[b, a]
                if et_sum[b, a] / n - radius_jit(n, cur[b, 1]) > mu0:
                    mode[b] = DONE
                    answer[b] = a
                    return TERMINATED
                if et_n[b, a] > cur[b, 3]:
                    if k + 1 > max_phase:
                        mode[b] = DONE
                        return FAILED
                    _set_phase(b, k + 1, log_delta, C, K, phase, cur)
                    mode[b] = EXPLORING
                return PULLED
            if k + 1 > max_phase:
                mode[b] = DONE
                return FAILED
            _set_phase(b, k + 1, log_delta, C, K, phase, cur)
            mode[b] = EXPLORING
            continue

        la = last[b]
        if t_ee[b] >= 1 and la >= 0 and _lcb_ee(b, la, ee_n, ee_sum, cur[b, 0], C) >= mu0:
            # park the latest exploration draw of la; H_ee of la is a stream prefix
            if q_has[b, la] == 1:
                need[0] = la
                return BROKEN
            s = (b * 2) * K + la
            x = buf[off[s] + ee_n[b, la] - 1]
            ee_n[b, la] -= 1
            ee_sum[b, la] -= x
            q_has[b, la] = 1
            q_val[b, la] = x
            ahat[b] = la
            mode[b] = EXPLOITING
            continue

        all_below = True
        for i in range(nbr):
            if not (_ucb_ee(b, brackets[b, i], ee_n, ee_sum, cur[b, 0]) <= mu0):
                all_below = False
                break
        if all_below:
            if k >= none_k and nbr == K:
                mode[b] = DONE
                answer[b] = -1
                return TERMINATED
            if k + 1 > max_phase:
                mode[b] = DONE
                return FAILED
            _set_phase(b, k + 1, log_delta, C, K, phase, cur)
            continue

        lim = cur[b, 2]
        all_over = True
        for i in range(nbr):
            if not (ee_n[b, brackets[b, i]] > lim):
                all_over = False
                break
        if all_over:
            if k + 1 > max_phase:
                mode[b] = DONE
                return FAILED
            _set_phase(b, k + 1, log_delta, C, K, phase, cur)
            continue

        best = -1
        best_val = -math.inf
        for i in range(nbr):
            a = brackets[b, i]
            if ee_n[b, a] <= lim:
                u = _ucb_ee(b, a, ee_n, ee_sum, cur[b, 0])
                if best < 0 or u > best_val:
                    best = a
                    best_val = u
        a = best
        if q_has[b, a] == 1:
            last[b] = a
            ee_n[b, a] += 1
            ee_sum[b, a] += q_val[b, a]
            q_has[b, a] = 0
            continue
        s = (b * 2) * K + a
        idx = fresh_ee[b, a]
        if idx >= length[s]:
            need[0] = s
            need[1] = idx + 1
            return NEED_MORE
        last[b] = a
        x = buf[off[s] + idx]
        fresh_ee[b, a] = idx + 1
        ee_n[b, a] += 1
        ee_sum[b, a] += x
        t_ee[b] += 1
        return PULLED


@numba.njit(cache=True, nogil=True)
def run_pseeb(
    K, mu0, log_delta, none_k, C, max_phase, safety_cap,
    brackets, bsize, cur,
    buf, off, length,
    phase, mode, t_ee, t_et, last, ahat, answer,
    ee_n, ee_sum, et_n, et_sum, q_has, q_val, fresh_ee, fresh_et,
    glob, need,
):
    """Round-robin over all copies; ``glob = [round, next copy, tau, winner]``."""
    nb = bsize.shape[0]
    while True:
        b = glob[1]
        while b < nb:
            code = _step_copy(
                b, K, mu0, log_delta, none_k, C, max_phase,
                brackets, bsize, cur,
                buf, off, length,
                phase, mode, t_ee, t_et, last, ahat, answer,
                ee_n, ee_sum, et_n, et_sum, q_has, q_val, fresh_ee, fresh_et,
                need,
            )
            if code == NEED_MORE or code == BROKEN:
                glob[1] = b
                return code
            tau = 0
            for c in range(nb):
                tau += t_ee[c] + t_et[c]
            glob[2] = tau
            if code == TERMINATED or code == FAILED:
                glob[3] = b
                glob[1] = b + 1
                return code
            b += 1
            glob[1] = b
            if tau >= safety_cap:
                return CAPPED
        glob[0] += 1
        glob[1] = 0


@numba.njit(cache=True, nogil=True)
def run_uniform(K, mu0, ltol, safety_cap, buf, off, length, n, sums, glob, need):
    """Round-robin LIL baseline; ``glob = [next arm, tau, answer, rounds]``."""
    while True:
        a = glob[0]
        while a < K:
            idx = n[a]
            if idx >= length[a]:
                need[0] = a
                need[1] = idx + 1
                return NEED_MORE
            x = buf[off[a] + idx]
            n[a] = idx + 1
            sums[a] += x
            glob[1] += 1
            a += 1
            glob[0] = a
            m = n[a - 1]
            if sums[a - 1] / m - radius_jit(m, ltol) > mu0:
                glob[2] = a - 1
                return TERMINATED
            all_below = True
            for c in range(K):
                if n[c] == 0:
                    all_below = False
                    break
                if not (sums[c] / n[c] + radius_jit(n[c], ltol) < mu0):
                    all_below = False
                    break
            if all_below:
                glob[2] = -1
                return TERMINATED
            if glob[1] >= safety_cap:
                return CAPPED
        glob[0] = 0
        glob[3] += 1


class FlatStreams:
    """Flat reward buffer over a list of lazily extended per-arm streams."""

    def __init__(self, sources, minimum: int = 64):
        # sources: list of callables n -> first n rewards, or None for unused ids
        self.sources = sources
        self.minimum = minimum
        self.lengths = np.zeros(len(sources), dtype=np.int64)
        self._rebuild()

    def _rebuild(self) -> None:
        parts = []
        for src, n in zip(self.sources, self.lengths):
            if src is not None and n > 0:
                parts.append(np.asarray(src(int(n)), dtype=np.float64))
        self.offsets = np.zeros(len(self.sources), dtype=np.int64)
        if len(self.sources) > 1:
            self.offsets[1:] = np.cumsum(self.lengths)[:-1]
        self.buf = np.concatenate(parts) if parts else np.zeros(1)

    def grow(self, stream: int, needed: int) -> None:
        if self.sources[stream] is None:
            raise RuntimeError(f"kernel requested unused stream {stream}")
        self.lengths[stream] = max(int(needed), 2 * int(self.lengths[stream]), self.minimum)
        self._rebuild()
