"""Exception hierarchy shared by all toolkit modules."""


class HRISError(ValueError):
    """Base class for every error raised by the toolkit."""


class InvalidInput(HRISError):
    """A precondition on an argument or a domain object does not hold."""
