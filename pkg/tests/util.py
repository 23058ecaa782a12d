"""Shared helpers for building tiny CSV fixtures."""

from datetime import date

import pandas as pd

MS_PER_DAY = 86_400_000


def day_ms(day: str) -> int:
    return (date.fromisoformat(day) - date(1970, 1, 1)).days * MS_PER_DAY


def ts(day: str, clock: str) -> int:
    """Epoch ms for 'HH:MM:SS' or 'HH:MM:SS.mmm' on a calendar day."""
    hh, mm, rest = clock.split(":")
    if "." in rest:
        ss, frac = rest.split(".")
        millis = int(frac.ljust(3, "0"))
    else:
        ss, millis = rest, 0
    return day_ms(day) + ((int(hh) * 60 + int(mm)) * 60 + int(ss)) * 1000 + millis


def write_trades(path, rows):
    """rows: (timestamp, ticker, price, size)"""
    pd.DataFrame(rows, columns=["timestamp", "ticker", "price", "size"]).to_csv(
        path, index=False
    )


def write_quotes(path, rows):
    """rows: (timestamp, ticker, bid_price, ask_price, bid_size, ask_size)"""
    pd.DataFrame(
        rows,
        columns=["timestamp", "ticker", "bid_price", "ask_price", "bid_size", "ask_size"],
    ).to_csv(path, index=False)
