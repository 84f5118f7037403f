"""Daily market aggregates, log returns and realized volatility."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Iterable, Sequence

from nftledger.errors import InsufficientDataError
from nftledger.model import TransactionRecord

SERIES_HEADER = ("date", "tx_count", "floor", "mean", "max", "volume")
RETURNS_HEADER = ("date", "log_return", "gap_days")
TRADING_DAYS = 252


@dataclass(frozen=True)
class DayEntry:
    date: date
    tx_count: int
    floor: float
    mean: float
    max: float
    volume: float


@dataclass(frozen=True)
class DailyMarketSeries:
    days: tuple
    price_field: str = "usd"

    def __len__(self) -> int:
        return len(self.days)

    def __iter__(self):
        return iter(self.days)


@dataclass(frozen=True)
class DailyReturn:
    date: date
    log_return: float
    gap_days: int


@dataclass(frozen=True)
class ReturnSeries:
    returns: tuple

    def __len__(self) -> int:
        return len(self.returns)

    def values(self) -> list[float]:
        return [r.log_return for r in self.returns]


@dataclass(frozen=True)
class VolatilityResult:
    realized_vol: float
    window_days: int
    n_returns: int

    @property
    def percent(self) -> float:
        return 100.0 * self.realized_vol

    def to_dict(self) -> dict:
        return {"realized_vol": self.realized_vol, "window_days": self.window_days, "n_returns": self.n_returns}


@dataclass(frozen=True)
class MarketSummary:
    trading_days: int
    calendar_days: int
    total_tx: int
    median_daily_tx: float
    std_daily_tx: float | None
    mean_daily_tx: float
    mean_daily_tx_calendar: float
    floor_min: float
    floor_mean: float
    floor_max: float
    mean_of_daily_mean: float
    mean_of_daily_max: float
    volume_total: float
    volume_daily_mean: float
    volume_daily_mean_calendar: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def daily_aggregate(records: Iterable[TransactionRecord], price_field: str = "usd") -> DailyMarketSeries:
    """Group sales by UTC calendar day; days without sales are absent."""
    by_day: dict[date, list[float]] = {}
    for r in records:
        by_day.setdefault(r.timestamp.date(), []).append(r.price(price_field))
    days = []
    for day in sorted(by_day):
        prices = by_day[day]
        volume = math.fsum(prices)
        lo, hi = min(prices), max(prices)
        mean = min(hi, max(lo, volume / len(prices)))
        days.append(DayEntry(day, len(prices), lo, mean, hi, volume))
    return DailyMarketSeries(tuple(days), price_field)


def summarize(series: DailyMarketSeries) -> MarketSummary:
    """Collection-level statistics over the daily series.

    ``mean_daily_tx`` averages over trading days only, while the
    ``*_calendar`` variants spread totals over every calendar day between the
    first and the last sale. ``std_daily_tx`` is the sample standard
    deviation and is ``None`` for a single-day series.
    """
    days = series.days
    if not days:
        raise InsufficientDataError("cannot summarize an empty series")
    counts = [d.tx_count for d in days]
    total = sum(counts)
    span = (days[-1].date - days[0].date).days + 1
    volume = math.fsum(d.volume for d in days)
    floors = [d.floor for d in days]
    return MarketSummary(
        trading_days=len(days),
        calendar_days=span,
        total_tx=total,
        median_daily_tx=statistics.median(counts),
        std_daily_tx=statistics.stdev(counts) if len(counts) > 1 else None,
        mean_daily_tx=total / len(days),
        mean_daily_tx_calendar=total / span,
        floor_min=min(floors),
        floor_mean=math.fsum(floors) / len(days),
        floor_max=max(floors),
        mean_of_daily_mean=math.fsum(d.mean for d in days) / len(days),
        mean_of_daily_max=math.fsum(d.max for d in days) / len(days),
        volume_total=volume,
        volume_daily_mean=volume / len(days),
        volume_daily_mean_calendar=volume / span,
    )


def daily_log_returns(series: DailyMarketSeries) -> ReturnSeries:
    """Log return of the daily mean price between consecutive trading days.

    Calendar gaps are bridged by a single return; ``gap_days`` records how
    many calendar days it spans.
    """
    days = series.days
    if len(days) < 2:
        raise InsufficientDataError("need at least two trading days for a return")
    for d in days:
        if not d.mean > 0:
            raise InsufficientDataError(f"non-positive mean price on {d.date}")
    returns = tuple(
        DailyReturn(cur.date, math.log(cur.mean / prev.mean), (cur.date - prev.date).days)
        for prev, cur in zip(days, days[1:])
    )
    return ReturnSeries(returns)


def realized_volatility(returns: ReturnSeries | Sequence[DailyReturn], window_days: int = 365) -> VolatilityResult:
    """Annualised volatility: sample std of the trailing window's returns times sqrt(252)."""
    rets = returns.returns if isinstance(returns, ReturnSeries) else tuple(returns)
    if window_days <= 0:
        raise ValueError("window_days must be positive")
    if not rets:
        raise InsufficientDataError("no returns")
    cutoff = rets[-1].date - timedelta(days=window_days)
    window = [r.log_return for r in rets if r.date > cutoff]
    if len(window) < 2:
        raise InsufficientDataError(f"need at least 2 returns in window, got {len(window)}")
    return VolatilityResult(statistics.stdev(window) * math.sqrt(TRADING_DAYS), window_days, len(window))


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def dump_series(series: DailyMarketSeries, fmt=_fmt) -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SERIES_HEADER)
    for d in series.days:
        writer.writerow([d.date.isoformat(), d.tx_count, fmt(d.floor), fmt(d.mean), fmt(d.max), fmt(d.volume)])
    return buf.getvalue().encode("utf-8")


def parse_series(data: bytes, price_field: str = "usd") -> DailyMarketSeries:
    reader = csv.reader(io.StringIO(data.decode("utf-8"), newline=""))
    if tuple(next(reader, ())) != SERIES_HEADER:
        raise ValueError("series CSV header mismatch")
    days = tuple(
        DayEntry(date.fromisoformat(d), int(n), float(lo), float(m), float(hi), float(v))
        for d, n, lo, m, hi, v in reader
    )
    return DailyMarketSeries(days, price_field)


def dump_returns(returns: ReturnSeries, fmt=_fmt) -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RETURNS_HEADER)
    for r in returns.returns:
        writer.writerow([r.date.isoformat(), fmt(r.log_return), r.gap_days])
    return buf.getvalue().encode("utf-8")


def parse_returns(data: bytes) -> ReturnSeries:
    reader = csv.reader(io.StringIO(data.decode("utf-8"), newline=""))
    if tuple(next(reader, ())) != RETURNS_HEADER:
        raise ValueError("returns CSV header mismatch")
    return ReturnSeries(tuple(DailyReturn(date.fromisoformat(d), float(r), int(g)) for d, r, g in reader))


def volatility_from_json(data: bytes) -> VolatilityResult:
    doc = json.loads(data)
    return VolatilityResult(float(doc["realized_vol"]), int(doc["window_days"]), int(doc["n_returns"]))
