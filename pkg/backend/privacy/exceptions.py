from trajectories.exceptions import PreconditionError, TrajpubError


class LedgerMismatchError(TrajpubError):
    """A ledger scope names a node that is not in the audited tree."""


def check_epsilon(value: float, name: str = "epsilon") -> float:
    """Budgets are plain floats; this enforces the positive-and-finite invariant."""
    try:
        value = float(value)
    except (TypeError, ValueError) as exc:
        raise PreconditionError(f"{name} must be a number, got {value!r}") from exc
    if not (value > 0 and value != float("inf")):
        raise PreconditionError(f"{name} must be positive and finite, got {value}")
    return value
