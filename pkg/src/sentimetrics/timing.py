"""Moving-average sentiment signal, lead-return correlation scan, long/short backtest.

The signal is binary: 1 when the day's sentiment score sits strictly above its
trailing N-observation mean, else 0.  The default mean includes the current
observation; an "exclusive" mode averages the N observations before it.  Both
emit nothing until a day has N predecessors.

When signal days are matched to a trading calendar, a day that is not a
trading day rolls forward to the next trading day; if several signal days roll
to the same trading day the most recent one wins.  The trading rule holds the
market when the signal `lag` trading days earlier is 1, shorts it when 0, and
stays flat where that lagged value is undefined.
"""

from __future__ import annotations

import csv
import math
import warnings
from bisect import bisect_left
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from .sentiment import SentimentObservation

INCLUSIVE = "inclusive"
EXCLUSIVE = "exclusive"
DEFAULT_LAG = 2


@dataclass
class SignalSeries:
    n: int
    mode: str
    dates: list[date]
    values: np.ndarray  # 0/1 ints aligned with dates

    @property
    def defined_from(self) -> date | None:
        return self.dates[0] if self.dates else None


@dataclass
class ScanEntry:
    n: int
    lag: int
    r2: float | None
    corr_sign: str  # "+", "-", "0", or "" when undefined


@dataclass
class BacktestResult:
    dates: list[date]
    positions: np.ndarray  # +1 long, -1 short, 0 flat
    strategy_returns: np.ndarray
    strategy_equity: np.ndarray  # cumulative return, 0 before the first row
    benchmark_equity: np.ndarray
    outperformance: float  # terminal strategy minus terminal benchmark cumulative return
    outperformance_geometric: float


def timing_observations(
    observations: list[SentimentObservation],
) -> list[SentimentObservation]:
    """Drop undefined and exactly-zero scores.

    Zero-sentiment days carry no direction; they are absent from the signal
    series rather than padded, so trailing means run over actual signal days.
    """
    return [o for o in observations if o.score is not None and o.score != 0.0]


def build_signal(
    observations: list[SentimentObservation], n: int, mode: str = INCLUSIVE
) -> SignalSeries:
    """Binary above-trailing-mean signal over the defined-score observations."""
    if n < 1:
        raise ValueError(f"window length must be >= 1, got {n}")
    if mode not in (INCLUSIVE, EXCLUSIVE):
        raise ValueError(f"mode must be '{INCLUSIVE}' or '{EXCLUSIVE}', got {mode!r}")
    usable = [(obs.date, obs.score) for obs in observations if obs.score is not None]
    for i in range(1, len(usable)):
        if usable[i - 1][0] >= usable[i][0]:
            raise ValueError("sentiment observations must be strictly ascending by date")
    if n >= len(usable):
        warnings.warn(
            f"window length {n} >= {len(usable)} usable observations: empty signal",
            stacklevel=2,
        )
        return SignalSeries(n=n, mode=mode, dates=[], values=np.zeros(0, dtype=int))
    scores = np.array([s for _d, s in usable])
    dates = []
    values = []
    for i in range(n, len(usable)):
        window = scores[i - n + 1 : i + 1] if mode == INCLUSIVE else scores[i - n : i]
        values.append(1 if scores[i] - window.mean() > 0 else 0)
        dates.append(usable[i][0])
    return SignalSeries(n=n, mode=mode, dates=dates, values=np.array(values, dtype=int))


def signal_on_calendar(signal: SignalSeries, calendar: list[date]) -> dict[int, int]:
    """Map signal values to trading-calendar indices (forward roll, latest wins)."""
    mapped: dict[int, int] = {}
    for d, v in zip(signal.dates, signal.values):
        idx = bisect_left(calendar, d)
        if idx < len(calendar):
            mapped[idx] = int(v)
    return mapped


def lagged_signal_values(
    signal: SignalSeries, calendar: list[date], lag: int
) -> np.ndarray:
    """Per trading day, the signal value `lag` trading days earlier (NaN undefined)."""
    if lag < 0:
        raise ValueError(f"lag must be >= 0, got {lag}")
    mapped = signal_on_calendar(signal, calendar)
    out = np.full(len(calendar), np.nan)
    for i in range(len(calendar)):
        v = mapped.get(i - lag)
        if v is not None:
            out[i] = v
    return out


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(xc @ xc))
    sy = math.sqrt(float(yc @ yc))
    if sx == 0.0 or sy == 0.0:
        return None
    return float(xc @ yc) / (sx * sy)


def r2_scan(
    observations: list[SentimentObservation],
    n_values: list[int],
    calendar: list[date],
    market_returns: np.ndarray,
    lag: int = DEFAULT_LAG,
    mode: str = INCLUSIVE,
) -> list[ScanEntry]:
    """Squared correlation between the lagged signal and the market return, per N.

    An N whose signal is constant over the overlap (zero variance) gets an
    undefined r2 rather than a fabricated number.
    """
    market_returns = np.asarray(market_returns, dtype=float)
    if market_returns.shape != (len(calendar),):
        raise ValueError("market_returns must align one-to-one with the calendar")
    entries = []
    for n in n_values:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            signal = build_signal(observations, n, mode=mode)
        lagged = lagged_signal_values(signal, calendar, lag)
        mask = ~np.isnan(lagged)
        if mask.sum() < 2:
            entries.append(ScanEntry(n=n, lag=lag, r2=None, corr_sign=""))
            continue
        corr = _pearson(lagged[mask], market_returns[mask])
        if corr is None:
            entries.append(ScanEntry(n=n, lag=lag, r2=None, corr_sign=""))
        else:
            sign = "+" if corr > 0 else ("-" if corr < 0 else "0")
            entries.append(ScanEntry(n=n, lag=lag, r2=corr * corr, corr_sign=sign))
    return entries


def backtest_strategy(
    signal: SignalSeries,
    calendar: list[date],
    market_returns: np.ndarray,
    lag: int = DEFAULT_LAG,
) -> BacktestResult:
    """Daily +/-1 exposure to the market return driven by the lagged signal.

    No transaction costs.  Coverage runs from the first trading day with a
    defined lagged signal through the calendar end; interior days with an
    undefined lagged value sit flat.  Equity curves compound (1 + r) and are
    reported as cumulative returns starting from 0.
    """
    market_returns = np.asarray(market_returns, dtype=float)
    if market_returns.shape != (len(calendar),):
        raise ValueError("market_returns must align one-to-one with the calendar")
    lagged = lagged_signal_values(signal, calendar, lag)
    defined = np.flatnonzero(~np.isnan(lagged))
    if defined.size == 0:
        raise ValueError("signal and market calendar have no overlapping coverage")
    start = int(defined[0])

    dates = list(calendar[start:])
    n = len(dates)
    positions = np.zeros(n, dtype=int)
    strat_ret = np.zeros(n)
    strat_eq = np.empty(n)
    bench_eq = np.empty(n)
    strat_gross = 1.0
    bench_gross = 1.0
    for k in range(n):
        s = lagged[start + k]
        r = market_returns[start + k]
        if not math.isnan(s):
            positions[k] = 1 if s == 1.0 else -1
            strat_ret[k] = positions[k] * r
        strat_gross *= 1.0 + strat_ret[k]
        bench_gross *= 1.0 + r
        strat_eq[k] = strat_gross - 1.0
        bench_eq[k] = bench_gross - 1.0
    outperf = float(strat_eq[-1] - bench_eq[-1])
    outperf_geo = float(strat_gross / bench_gross - 1.0)
    return BacktestResult(
        dates=dates,
        positions=positions,
        strategy_returns=strat_ret,
        strategy_equity=strat_eq,
        benchmark_equity=bench_eq,
        outperformance=outperf,
        outperformance_geometric=outperf_geo,
    )


def write_signals_csv(signals: list[SignalSeries], path: str | Path) -> None:
    """Stacked signal panel, one row per (date, N)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "N", "signal"])
        for s in signals:
            for d, v in zip(s.dates, s.values):
                writer.writerow([d.isoformat(), s.n, int(v)])


def write_scan_csv(entries: list[ScanEntry], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["N", "lag", "r2", "corr_sign"])
        for e in entries:
            r2 = "" if e.r2 is None else repr(float(e.r2))
            writer.writerow([e.n, e.lag, r2, e.corr_sign])


def write_backtest_csv(result: BacktestResult, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "position", "strategy_ret", "strategy_equity", "benchmark_equity"])
        for k, d in enumerate(result.dates):
            writer.writerow(
                [
                    d.isoformat(),
                    int(result.positions[k]),
                    repr(float(result.strategy_returns[k])),
                    repr(float(result.strategy_equity[k])),
                    repr(float(result.benchmark_equity[k])),
                ]
            )
