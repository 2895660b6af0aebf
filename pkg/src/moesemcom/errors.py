"""Exception types shared across the package.

Everything user-facing derives from MoeSemComError so the CLI can map any
expected failure to a single exit code.
"""


class MoeSemComError(Exception):
    pass


class ConfigError(MoeSemComError):
    """Bad or unknown configuration keys/values."""


class MissingExpertError(MoeSemComError):
    """A gate decision selected an expert kind that is not in the registry."""

    def __init__(self, kind: str, rho=None):
        self.kind = kind
        self.rho = rho
        detail = f"{kind}" if rho is None else f"{kind} (rho={rho:g})"
        super().__init__(f"required expert is not registered: {detail}")


class FrozenParameterError(MoeSemComError):
    """Attempted optimizer step on a frozen parameter set."""


class CheckpointError(MoeSemComError):
    """Checkpoint file rejected. `code` names the failure mode.

    Codes: bad_magic, bad_version, truncated, integrity.
    """

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")
