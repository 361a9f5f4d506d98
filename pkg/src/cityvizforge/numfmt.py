"""Canonical number formatting for emitted text."""
import math
from decimal import Decimal


def format_number(v: float) -> str:
    """Integers bare, others to 6 significant digits, never in exponent form."""
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"cannot format non-finite number {v!r}")
    if v.is_integer():
        return str(int(v))
    d = Decimal(f"{v:.6g}")
    text = format(d, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    if text in ("-0", ""):
        text = "0"
    return text
