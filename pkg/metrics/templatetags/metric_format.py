from __future__ import annotations

from django import template

register = template.Library()


@register.filter
def plain(value) -> str:
    """Machine-readable scalar: ints as is, floats with 10 significant digits."""
    if isinstance(value, bool) or value is None:
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    try:
        return format(float(value), ".10g")
    except (TypeError, ValueError):
        return str(value)


@register.filter
def pct(fraction) -> str:
    """0.75 -> '75.000'."""
    try:
        return f"{float(fraction) * 100:.3f}"
    except (TypeError, ValueError):
        return "ERR"


@register.filter
def threshold(epsilon) -> str:
    return f"{float(epsilon):.1f}"


@register.simple_tag
def mu_delta(mu, delta, digits: int = 4) -> str:
    """Mean and spread as 'mu ± delta'."""
    return f"{float(mu):.{digits}f} ± {float(delta):.{digits}f}"
