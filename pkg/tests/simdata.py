"""Seeded series generators shared by the stats tests and the acceptance suite."""
import numpy as np

from searchcast.timeseries import WeeklySeries, diff1

START = "2010-W01"


def lead_lag_pair(seed, weeks=200, lead=2, gain=0.8):
    """Differenced (target, source) where the source leads the target by ``lead`` weeks.

    Innovations are drawn on the differenced scale, integrated to levels and
    differenced again, the same path the driver report takes.
    """
    rng = np.random.default_rng([7, seed])
    e = rng.normal(size=(2, weeks + lead))
    dx = e[0]
    dy = np.zeros(weeks + lead)
    dy[lead:] = gain * dx[:-lead] + e[1, lead:]
    src = WeeklySeries("source", START, np.cumsum(dx[lead:]))
    tgt = WeeklySeries("target", START, np.cumsum(dy[lead:]))
    return diff1(tgt), diff1(src)


def null_pair(seed, weeks=78, phi=0.5, burn=50):
    """Two independent AR(1) series, already on the differenced scale."""
    rng = np.random.default_rng([2024, seed])
    e = rng.normal(size=(2, weeks + burn))
    x = np.zeros_like(e)
    for t in range(1, weeks + burn):
        x[:, t] = phi * x[:, t - 1] + e[:, t]
    return (
        WeeklySeries("target", START, x[0, burn:]),
        WeeklySeries("source", START, x[1, burn:]),
    )
