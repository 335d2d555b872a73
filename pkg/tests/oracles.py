"""Independent reference computations used by the tests.

None of these import the package's formula code: link quantities are
evaluated in arbitrary precision, execution is simulated in fixed
microsecond steps, SoC statistics are integrated numerically or
accumulated segment by segment.
"""
from __future__ import annotations

import mpmath as mp
import numba
import numpy as np
from scipy import integrate

mp.mp.dps = 50


# ------------------------------------------------------------------- links
def link_oracle(pt, dist, alpha, noise, bandwidth, n_sub, n_tot, size, dt):
    """SINR, rate, threshold, success probability and upload time in high precision."""
    pt, dist, noise = mp.mpf(pt), mp.mpf(dist), mp.mpf(noise)
    f = pt * dist ** (-mp.mpf(alpha)) / noise
    rate = mp.mpf(bandwidth) * n_sub / n_tot * mp.log(1 + f, 2)
    eps = mp.power(2, mp.mpf(size) * n_tot / (mp.mpf(dt) * bandwidth * n_sub)) - 1
    p = mp.e ** (-eps / f)
    t_tra = mp.mpf(size) / rate
    return {"sinr": f, "rate": rate, "eps": eps, "p": p, "t_tra": t_tra}


# --------------------------------------------------------------- execution
@numba.njit(cache=True)
def _micro_loop(cycles, deadline_abs, t_sta, f, f_max, p_mode, p_max, step):
    done = 0.0
    energy = 0.0
    t = t_sta
    while True:
        # a step straddling the deadline runs at f until the deadline
        if t + step <= deadline_abs:
            w, e = f * step, p_mode * step
        elif t >= deadline_abs:
            w, e = f_max * step, p_max * step
        else:
            a = deadline_abs - t
            w = f * a + f_max * (step - a)
            e = p_mode * a + p_max * (step - a)
        if done + w >= cycles:
            frac = (cycles - done) / w
            return t + frac * step - t_sta, energy + frac * e
        done += w
        energy += e
        t += step


def micro_exec(cycles, deadline_abs, t_sta, f, f_max, p_mode, p_max, step=1e-6):
    """Run a task in fixed time steps with cycle bookkeeping.

    Frequency is ``f`` until the absolute deadline and ``f_max`` after it;
    the final step is cut where the cycle count is reached.
    Returns (execution time, energy).
    """
    return _micro_loop(float(cycles), float(deadline_abs), float(t_sta), float(f), float(f_max),
                       float(p_mode), float(p_max), float(step))


def micro_fifo(tasks, f_of, f_max, p_of, p_max, step=1e-6):
    """Serve ``tasks`` [(arrival, cycles, deadline_abs, mode)] FIFO on one core.

    Returns a list of (start, finish, energy).
    """
    out = []
    tail = 0.0
    for arrival, cycles, deadline_abs, mode in sorted(tasks, key=lambda x: x[0]):
        start = max(tail, arrival)
        t_exe, e = micro_exec(cycles, deadline_abs, start, f_of[mode], f_max, p_of[mode], p_max, step)
        out.append((start, start + t_exe, e))
        tail = start + t_exe
    return out


# ------------------------------------------------------------------ battery
def trace_levels(b0, segments):
    lv = [b0]
    for p, d in segments:
        lv.append(lv[-1] - p * d)
    return lv


def soc_function(b0, b_max, segments):
    bounds = np.concatenate([[0.0], np.cumsum([d for _, d in segments])])
    lv = trace_levels(b0, segments)

    def soc(t):
        z = min(max(int(np.searchsorted(bounds, t, side="right")) - 1, 0), len(segments) - 1)
        return (lv[z] - segments[z][0] * (t - bounds[z])) / b_max

    return soc, bounds


def soc_stats_quadrature(b0, b_max, segments):
    """(SoC_avg, SoC_dev) from adaptive quadrature of the defining integrals."""
    soc, bounds = soc_function(b0, b_max, segments)
    total = bounds[-1]
    pieces = zip(bounds[:-1], bounds[1:])
    area = sum(integrate.quad(soc, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
               for a, b in pieces)
    avg = area / total
    # the integrand is a quadratic per piece; a tiny absolute floor covers flat pieces
    sq = sum(integrate.quad(lambda t: (soc(t) - avg) ** 2, a, b, epsabs=1e-30, epsrel=1e-12,
                            limit=200)[0]
             for a, b in zip(bounds[:-1], bounds[1:]))
    return avg, 2.0 * np.sqrt(3.0 * sq / total)


class StreamingTrace:
    """Feed segments one at a time; exact integrals of each linear piece."""

    def __init__(self, b0, b_max):
        self.b, self.b_max = mp.mpf(b0), mp.mpf(b_max)
        self.b0 = self.b
        self.time = mp.mpf(0)
        self.area = mp.mpf(0)
        self.throughput = mp.mpf(0)

    def push(self, power, duration):
        p, d = mp.mpf(power), mp.mpf(duration)
        end = self.b - p * d
        self.area += (self.b + end) / 2 * d
        self.throughput += abs(p) * d
        self.b = end
        self.time += d

    def soc_avg(self):
        return self.area / self.time / self.b_max

    def cycles(self):
        """Half the absolute charge throughput over capacity."""
        return self.throughput / self.b_max / 2


def degradation_oracle(n_cyc, soc_dev, soc_avg, duration, a, b, c, d, t_life):
    n_cyc, soc_dev, soc_avg = mp.mpf(n_cyc), mp.mpf(soc_dev), mp.mpf(soc_avg)
    return (mp.mpf(a) * n_cyc * mp.e ** ((soc_dev - 1) * b)
            + mp.mpf("0.2") * duration / mp.mpf(t_life)) * c * mp.e ** (mp.mpf(d) * (soc_avg - mp.mpf("0.5")))


def random_trace(rng, b_max=1000.0, max_segments=6):
    """A random discharge trace that keeps the battery non-negative."""
    z = int(rng.integers(1, max_segments + 1))
    b0 = float(rng.uniform(0.2, 1.0) * b_max)
    segs = []
    budget = b0 * rng.uniform(0.05, 0.95)
    for _ in range(z):
        d = float(rng.uniform(0.01, 3.0))
        p = float(rng.choice([0.0, rng.uniform(0.01, 5.0)], p=[0.15, 0.85]))
        segs.append((p, d))
    used = sum(p * d for p, d in segs)
    if used > budget:
        segs = [(p * budget / used, d) for p, d in segs]
    return b0, segs


# ---------------------------------------------------------------- gradients
def central_difference(fn, x, idx, h=1e-5):
    """Central-difference derivatives of scalar ``fn`` at coordinates ``idx`` of ``x`` (in place)."""
    out = np.empty(len(idx))
    for j, i in enumerate(idx):
        keep = x[i]
        x[i] = keep + h
        up = fn()
        x[i] = keep - h
        down = fn()
        x[i] = keep
        out[j] = (up - down) / (2 * h)
    return out


def relative_error(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)
