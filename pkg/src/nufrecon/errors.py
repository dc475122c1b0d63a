"""Exception types shared across the package.

Invalid arguments raise the builtin :class:`ValueError`; numerical breakdowns
raise :class:`NumericFailure`.
"""


class NumericFailure(ArithmeticError):
    """A numerical routine could not produce a trustworthy result."""
