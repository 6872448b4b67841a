"""Small input-validation helpers shared by the public constructors."""
import numbers

import numpy as np

from .exceptions import DomainError, InvalidParameterError, InvalidSizeError


def check_interval(domain, name="domain"):
    try:
        a, b = (float(v) for v in domain)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a pair of reals, got {domain!r}") from None
    if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
        raise DomainError(f"{name} must satisfy a < b, got ({a}, {b})")
    return a, b


def check_count(value, name, minimum=1, maximum=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidSizeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum or (maximum is not None and value > maximum):
        bounds = f">= {minimum}" if maximum is None else f"in [{minimum}, {maximum}]"
        raise InvalidSizeError(f"{name} must be {bounds}, got {value}")
    return value


def check_positive(value, name):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidParameterError(f"{name} must be a real number, got {value!r}") from None
    if not np.isfinite(value) or value <= 0:
        raise InvalidParameterError(f"{name} must be positive, got {value}")
    return value


def as_points(x, dim):
    """Coerce ``x`` to a float array of shape ``(n, dim)``.

    A 1D array is read as ``n`` scalar points when ``dim == 1`` and as a
    single point otherwise.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1) if dim == 1 else x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != dim:
        raise DomainError(f"expected points of dimension {dim}, got array of shape {x.shape}")
    return x
