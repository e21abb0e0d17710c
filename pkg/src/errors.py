"""Exception hierarchy shared by all toolkit modules."""


class MkvBismutError(Exception):
    """Base class for every error raised by the toolkit."""


class NonCommensurate(MkvBismutError):
    """r0 or T is not an integer multiple of dt."""


class OffGrid(MkvBismutError):
    """A time query does not fall on a stored grid point."""

    def __init__(self, t: float, message: str | None = None) -> None:
        self.t = t
        super().__init__(message or f"time {t!r} is not a grid point")


class SizeMismatch(MkvBismutError):
    """Two ensembles differ in particle count or dimension."""


class TooLarge(MkvBismutError):
    """An exact O(N^2)/O(N^3) routine was asked for more particles than allowed."""


class GridMismatch(MkvBismutError):
    """Objects that must share a grid (and particle count) do not."""


class NonFinite(MkvBismutError):
    """A solver produced NaN or Inf."""

    def __init__(self, step: int, t: float, what: str = "state") -> None:
        self.step = step
        self.t = t
        super().__init__(f"non-finite {what} at step {step} (t={t:.6g}); reduce dt or check the model")


class NoConvergence(MkvBismutError):
    """A fixed-point iteration hit max_iter."""


class SingularSigma(MkvBismutError):
    """sigma sigma^* is singular or too ill-conditioned to invert."""


class SingularGram(MkvBismutError):
    """The Hamiltonian Gram matrix Q_{T-r0} is numerically singular."""


class ModelNotAdditive(MkvBismutError):
    """The additive control needs a diffusion depending on t only."""


class ModelSigmaNotStateOnly(MkvBismutError):
    """The multiplicative control needs sigma(t, xi(0))."""


class ModelNotHamiltonian(MkvBismutError):
    """The model carries no (l, m) Hamiltonian block split."""


class HorizonTooShort(MkvBismutError):
    """T is too close to r0 for the requested construction."""


class AnticipatingControl(MkvBismutError):
    """The control would depend on future information; the Ito weight does not apply."""


class ConfigInvalid(MkvBismutError):
    """An experiment configuration failed validation."""

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
