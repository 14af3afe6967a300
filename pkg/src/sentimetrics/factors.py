"""Five-factor construction from a daily security panel, plus liquidity/macro controls.

Factors follow the standard 2x3 double-sort design: the size breakpoint is the
main-exchange median market cap, the value/profitability/investment breakpoints
are main-exchange 30th/70th percentiles, portfolios are value-weighted, and
memberships are refreshed once a year.  Sorting applies to all stocks while
breakpoints come from the main exchange only, which mirrors the usual practice
of sorting a two-exchange universe on primary-exchange breakpoints.

Conventions this module pins down (the panel interface leaves them open):

* Value weights are the market caps recorded on the same date in the panel.
  Users who want lagged weights can shift the cap column upstream.
* Memberships are formed on the first trading day of the panel and re-formed
  on the first trading day on/after July 1 of each year (configurable month/day).
* A sort cell with no members on a date is imputed the value-weighted market
  return, which keeps every factor defined and makes all long-short factors
  exactly zero in a degenerate all-identical universe.
* Characteristics at a rebalance: size = market cap, value = book equity /
  market cap, profitability = operating income / book equity, investment =
  asset growth (total assets / prior total assets - 1).  Low asset growth is
  the conservative leg.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

MAIN = "main"
SECONDARY = "secondary"
FACTOR_NAMES = ("rmrf", "smb", "hml", "rmw", "cma")


class PanelFormatError(ValueError):
    """Malformed panel, factor, or control input file."""


class DegenerateBreakpointsError(ValueError):
    """Too few main-exchange stocks at a rebalance to form sort breakpoints."""


class CalendarAlignmentError(ValueError):
    """A series cannot be aligned to the trading calendar."""


@dataclass
class PanelRow:
    daily_return: float
    market_cap: float
    exchange: str
    book_equity: float
    operating_income: float
    total_assets: float
    total_assets_prior: float


@dataclass
class SecurityPanel:
    """Daily (firm, date) panel with the trading calendar derived from its rows."""

    data: dict[str, dict[date, PanelRow]]
    calendar: list[date]
    firms: list[str] = field(init=False)
    _date_index: dict[date, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.firms = sorted(self.data)
        self._date_index = {d: i for i, d in enumerate(self.calendar)}

    def has_date(self, d: date) -> bool:
        return d in self._date_index

    def cross_section(self, d: date) -> list[tuple[str, PanelRow]]:
        """All firms with a row on date `d`, in firm-id order."""
        out = []
        for firm in self.firms:
            row = self.data[firm].get(d)
            if row is not None:
                out.append((firm, row))
        return out

    def returns_of(self, firm_id: str) -> dict[date, float]:
        return {d: row.daily_return for d, row in self.data[firm_id].items()}


@dataclass
class FactorSeries:
    """Aligned daily factor returns and the risk-free rate on a trading calendar."""

    dates: list[date]
    rmrf: np.ndarray
    smb: np.ndarray
    hml: np.ndarray
    rmw: np.ndarray
    cma: np.ndarray
    rf: np.ndarray
    _date_index: dict[date, int] = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.dates)
        for name in FACTOR_NAMES + ("rf",):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"factor series '{name}' length {arr.shape} != {n} dates")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"factor series '{name}' contains non-finite values")
            setattr(self, name, arr)
        if any(self.dates[i] >= self.dates[i + 1] for i in range(n - 1)):
            raise ValueError("factor dates must be strictly ascending")
        if np.any(self.rf < -1.0):
            raise ValueError("rf values must be >= -1")
        self._date_index = {d: i for i, d in enumerate(self.dates)}

    def index_of(self, d: date) -> int | None:
        return self._date_index.get(d)


@dataclass
class FactorDetail:
    """Per-dimension small-minus-big legs behind the reported size factor."""

    smb_value: np.ndarray
    smb_profitability: np.ndarray
    smb_investment: np.ndarray


@dataclass
class ControlSeries:
    """Macro/liquidity controls aligned to the trading calendar (NaN = not covered)."""

    dates: list[date]
    nsi: np.ndarray
    d_nsi: np.ndarray
    short_rate: np.ndarray
    pct_zero: np.ndarray


def _parse_float(value: str, path: Path, lineno: int, field_name: str) -> float:
    try:
        x = float(value)
    except ValueError:
        raise PanelFormatError(
            f"{path}: row {lineno}: field '{field_name}': not a number: {value!r}"
        ) from None
    if math.isnan(x) or math.isinf(x):
        raise PanelFormatError(f"{path}: row {lineno}: field '{field_name}': non-finite value")
    return x


PANEL_COLUMNS = [
    "firm_id",
    "date",
    "daily_return",
    "market_cap",
    "exchange",
    "book_equity",
    "operating_income",
    "total_assets",
    "total_assets_prior",
]


def load_panel(path: str | Path) -> SecurityPanel:
    """Read the security panel CSV; duplicate (firm, date) keys and nonpositive caps are errors."""
    path = Path(path)
    data: dict[str, dict[date, PanelRow]] = {}
    dates: set[date] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != PANEL_COLUMNS:
            raise PanelFormatError(f"{path}: expected header {','.join(PANEL_COLUMNS)!r}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(PANEL_COLUMNS):
                raise PanelFormatError(
                    f"{path}: row {lineno}: expected {len(PANEL_COLUMNS)} fields, got {len(row)}"
                )
            firm_id = row[0].strip()
            try:
                d = date.fromisoformat(row[1].strip())
            except ValueError:
                raise PanelFormatError(
                    f"{path}: row {lineno}: field 'date': invalid date {row[1]!r}"
                ) from None
            ret = _parse_float(row[2], path, lineno, "daily_return")
            cap = _parse_float(row[3], path, lineno, "market_cap")
            exchange = row[4].strip()
            be = _parse_float(row[5], path, lineno, "book_equity")
            oi = _parse_float(row[6], path, lineno, "operating_income")
            ta = _parse_float(row[7], path, lineno, "total_assets")
            tap = _parse_float(row[8], path, lineno, "total_assets_prior")
            if ret <= -1.0:
                raise PanelFormatError(f"{path}: row {lineno}: daily_return must be > -1")
            if cap <= 0.0:
                raise PanelFormatError(f"{path}: row {lineno}: market_cap must be positive")
            if exchange not in (MAIN, SECONDARY):
                raise PanelFormatError(
                    f"{path}: row {lineno}: exchange must be '{MAIN}' or '{SECONDARY}', got {exchange!r}"
                )
            if tap <= 0.0:
                raise PanelFormatError(f"{path}: row {lineno}: total_assets_prior must be positive")
            firm = data.setdefault(firm_id, {})
            if d in firm:
                raise PanelFormatError(f"{path}: row {lineno}: duplicate key ({firm_id}, {d})")
            firm[d] = PanelRow(ret, cap, exchange, be, oi, ta, tap)
            dates.add(d)
    if not data:
        raise PanelFormatError(f"{path}: panel is empty")
    return SecurityPanel(data=data, calendar=sorted(dates))


def _vw_return(members: list[tuple[float, float]]) -> float:
    """Value-weighted return from (return, weight) pairs; caller guarantees non-empty."""
    num = 0.0
    den = 0.0
    for ret, weight in members:
        num += ret * weight
        den += weight
    return num / den


def market_excess_return(panel: SecurityPanel, rf: dict[date, float]) -> np.ndarray:
    """Cap-weighted market return minus rf on every calendar date."""
    _require_rf_coverage(panel.calendar, rf)
    out = np.empty(len(panel.calendar))
    for i, d in enumerate(panel.calendar):
        cs = panel.cross_section(d)
        out[i] = _vw_return([(row.daily_return, row.market_cap) for _f, row in cs]) - rf[d]
    return out


def _require_rf_coverage(calendar: list[date], rf: dict[date, float]) -> None:
    missing = [d for d in calendar if d not in rf]
    if missing:
        head = ", ".join(d.isoformat() for d in missing[:5])
        raise CalendarAlignmentError(f"rf series missing {len(missing)} trading dates ({head} ...)")


def rebalance_schedule(calendar: list[date], month: int = 7, day: int = 1) -> list[date]:
    """Initial formation at the first trading day, then the first trading day
    on/after `month`/`day` of each later-or-equal year."""
    rebalances = [calendar[0]]
    for year in sorted({d.year for d in calendar}):
        cutoff = date(year, month, day)
        nxt = next((d for d in calendar if d >= cutoff), None)
        if nxt is not None and nxt not in rebalances:
            rebalances.append(nxt)
    return sorted(set(rebalances))


def _characteristics(row: PanelRow, firm_id: str, d: date) -> tuple[float, float, float, float]:
    if row.book_equity == 0.0:
        raise DegenerateBreakpointsError(
            f"zero book equity for firm {firm_id} at rebalance {d}: profitability sort undefined"
        )
    size = row.market_cap
    value = row.book_equity / row.market_cap
    profitability = row.operating_income / row.book_equity
    investment = row.total_assets / row.total_assets_prior - 1.0
    return size, value, profitability, investment


def construct_factors(
    panel: SecurityPanel,
    rf: dict[date, float],
    rebalance_month: int = 7,
    rebalance_day: int = 1,
    min_breakpoint_stocks: int = 6,
    detail: bool = False,
) -> FactorSeries | tuple[FactorSeries, FactorDetail]:
    """Build the daily five-factor series from the panel.

    Raises DegenerateBreakpointsError when a rebalance date has fewer than
    `min_breakpoint_stocks` main-exchange stocks.
    """
    _require_rf_coverage(panel.calendar, rf)
    calendar = panel.calendar
    rebalances = rebalance_schedule(calendar, rebalance_month, rebalance_day)

    # Per rebalance: for each sort dimension, firm -> (size_bucket, char_bucket).
    memberships: dict[date, dict[str, dict[str, tuple[int, int]]]] = {}
    for reb in rebalances:
        cs = panel.cross_section(reb)
        chars = {f: _characteristics(row, f, reb) for f, row in cs}
        main_firms = [f for f, row in cs if row.exchange == MAIN]
        if len(main_firms) < min_breakpoint_stocks:
            raise DegenerateBreakpointsError(
                f"rebalance {reb}: only {len(main_firms)} main-exchange stocks "
                f"(need >= {min_breakpoint_stocks})"
            )
        size_bp = float(np.median([chars[f][0] for f in main_firms]))
        dims: dict[str, dict[str, tuple[int, int]]] = {}
        for dim_idx, dim in enumerate(("value", "profitability", "investment"), start=1):
            p30, p70 = np.percentile([chars[f][dim_idx] for f in main_firms], [30.0, 70.0])
            assign = {}
            for f in chars:
                size_bucket = 0 if chars[f][0] <= size_bp else 1  # 0 small, 1 big
                c = chars[f][dim_idx]
                char_bucket = 0 if c <= p30 else (2 if c > p70 else 1)  # low/mid/high
                assign[f] = (size_bucket, char_bucket)
            dims[dim] = assign
        memberships[reb] = dims

    n = len(calendar)
    rmrf = np.empty(n)
    smb_legs = {dim: np.empty(n) for dim in ("value", "profitability", "investment")}
    hml = np.empty(n)
    rmw = np.empty(n)
    cma = np.empty(n)
    rf_arr = np.array([rf[d] for d in calendar], dtype=float)

    reb_idx = -1
    current: dict[str, dict[str, tuple[int, int]]] = {}
    for i, d in enumerate(calendar):
        while reb_idx + 1 < len(rebalances) and rebalances[reb_idx + 1] <= d:
            reb_idx += 1
            current = memberships[rebalances[reb_idx]]
        cs = panel.cross_section(d)
        market = _vw_return([(row.daily_return, row.market_cap) for _f, row in cs])
        rmrf[i] = market - rf_arr[i]

        dim_cells: dict[str, list[list[float]]] = {}
        for dim, assign in current.items():
            cells: list[list[tuple[float, float]]] = [[] for _ in range(6)]
            for f, row in cs:
                bucket = assign.get(f)
                if bucket is None:
                    continue  # entered the panel after the last rebalance
                size_b, char_b = bucket
                cells[size_b * 3 + char_b].append((row.daily_return, row.market_cap))
            cell_ret = [market if not cell else _vw_return(cell) for cell in cells]
            dim_cells[dim] = cell_ret
            small = (cell_ret[0] + cell_ret[1] + cell_ret[2]) / 3.0
            big = (cell_ret[3] + cell_ret[4] + cell_ret[5]) / 3.0
            smb_legs[dim][i] = small - big

        v = dim_cells["value"]
        hml[i] = (v[2] + v[5]) / 2.0 - (v[0] + v[3]) / 2.0
        p = dim_cells["profitability"]
        rmw[i] = (p[2] + p[5]) / 2.0 - (p[0] + p[3]) / 2.0
        inv = dim_cells["investment"]
        cma[i] = (inv[0] + inv[3]) / 2.0 - (inv[2] + inv[5]) / 2.0  # conservative = low growth

    smb = (smb_legs["value"] + smb_legs["profitability"] + smb_legs["investment"]) / 3.0
    series = FactorSeries(
        dates=list(calendar), rmrf=rmrf, smb=smb, hml=hml, rmw=rmw, cma=cma, rf=rf_arr
    )
    if detail:
        return series, FactorDetail(
            smb_value=smb_legs["value"],
            smb_profitability=smb_legs["profitability"],
            smb_investment=smb_legs["investment"],
        )
    return series


def compute_pct_zero(panel: SecurityPanel, d: date) -> float:
    """Fraction of firms with a row on `d` whose return is exactly zero."""
    if not panel.has_date(d):
        raise CalendarAlignmentError(f"{d} is not in the panel trading calendar")
    cs = panel.cross_section(d)
    zero = sum(1 for _f, row in cs if row.daily_return == 0.0)
    return zero / len(cs)


def _read_two_column_csv(path: str | Path, value_column: str) -> dict[date, float]:
    path = Path(path)
    out: dict[date, float] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["date", value_column]:
            raise PanelFormatError(f"{path}: expected header 'date,{value_column}'")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise PanelFormatError(f"{path}: row {lineno}: expected 2 fields")
            try:
                d = date.fromisoformat(row[0].strip())
            except ValueError:
                raise PanelFormatError(
                    f"{path}: row {lineno}: field 'date': invalid date {row[0]!r}"
                ) from None
            if d in out:
                raise PanelFormatError(f"{path}: row {lineno}: duplicate date {d}")
            out[d] = _parse_float(row[1], path, lineno, value_column)
    return out


def read_rf_csv(path: str | Path) -> dict[date, float]:
    """Read a ``date,rf`` series used as the risk-free leg in factor construction."""
    return _read_two_column_csv(path, "rf")


def _align_control(
    raw: dict[date, float], calendar: list[date], label: str
) -> np.ndarray:
    """Place a dated series onto the calendar; its covered span must have no gaps."""
    on_calendar = {d: v for d, v in raw.items() if d in set(calendar)}
    if not on_calendar:
        raise CalendarAlignmentError(f"{label} series has no observations on trading dates")
    lo, hi = min(on_calendar), max(on_calendar)
    gaps = [d for d in calendar if lo <= d <= hi and d not in on_calendar]
    if gaps:
        head = ", ".join(d.isoformat() for d in gaps[:5])
        raise CalendarAlignmentError(
            f"{label} series missing {len(gaps)} trading dates in its covered range ({head} ...)"
        )
    out = np.full(len(calendar), np.nan)
    for i, d in enumerate(calendar):
        if d in on_calendar:
            out[i] = on_calendar[d]
    return out


def load_controls(
    nsi_path: str | Path, short_rate_path: str | Path, panel: SecurityPanel
) -> ControlSeries:
    """Load NSI and short-rate files and align them (plus pct_zero) to the panel calendar."""
    calendar = panel.calendar
    nsi = _align_control(_read_two_column_csv(nsi_path, "nsi"), calendar, "nsi")
    short_rate = _align_control(
        _read_two_column_csv(short_rate_path, "short_rate"), calendar, "short_rate"
    )
    d_nsi = np.full(len(calendar), np.nan)
    for i in range(1, len(calendar)):
        if not math.isnan(nsi[i]) and not math.isnan(nsi[i - 1]):
            d_nsi[i] = nsi[i] - nsi[i - 1]
    pct_zero = np.array([compute_pct_zero(panel, d) for d in calendar])
    return ControlSeries(
        dates=list(calendar), nsi=nsi, d_nsi=d_nsi, short_rate=short_rate, pct_zero=pct_zero
    )


FACTOR_CSV_COLUMNS = ["date", "rmrf", "smb", "hml", "rmw", "cma", "rf"]


def read_factors_csv(path: str | Path) -> FactorSeries:
    """Ingest a pre-computed factor series (``date,rmrf,smb,hml,rmw,cma,rf``)."""
    path = Path(path)
    dates: list[date] = []
    cols: dict[str, list[float]] = {name: [] for name in FACTOR_CSV_COLUMNS[1:]}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != FACTOR_CSV_COLUMNS:
            raise PanelFormatError(f"{path}: expected header {','.join(FACTOR_CSV_COLUMNS)!r}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(FACTOR_CSV_COLUMNS):
                raise PanelFormatError(f"{path}: row {lineno}: expected {len(FACTOR_CSV_COLUMNS)} fields")
            try:
                dates.append(date.fromisoformat(row[0].strip()))
            except ValueError:
                raise PanelFormatError(
                    f"{path}: row {lineno}: field 'date': invalid date {row[0]!r}"
                ) from None
            for j, name in enumerate(FACTOR_CSV_COLUMNS[1:], start=1):
                cols[name].append(_parse_float(row[j], path, lineno, name))
    if not dates:
        raise PanelFormatError(f"{path}: factor file is empty")
    return FactorSeries(
        dates=dates,
        rmrf=np.array(cols["rmrf"]),
        smb=np.array(cols["smb"]),
        hml=np.array(cols["hml"]),
        rmw=np.array(cols["rmw"]),
        cma=np.array(cols["cma"]),
        rf=np.array(cols["rf"]),
    )


def write_factors_csv(series: FactorSeries, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FACTOR_CSV_COLUMNS)
        for i, d in enumerate(series.dates):
            writer.writerow(
                [d.isoformat()]
                + [repr(float(getattr(series, name)[i])) for name in FACTOR_CSV_COLUMNS[1:]]
            )
