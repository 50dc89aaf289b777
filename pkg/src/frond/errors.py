"""Exception hierarchy shared by every module.

Each exception carries a module-qualified ``code`` and the process exit status
the command line runner maps it to.
"""


class FrondError(Exception):
    code = "frond.error"
    exit_status = 1

    def to_record(self) -> dict:
        return {"code": self.code, "message": str(self), "exit_status": self.exit_status}


class ConfigError(FrondError, ValueError):
    code = "cli_runner.config_error"
    exit_status = 1


class InputParseError(FrondError, ValueError):
    code = "cli_runner.parse_error"
    exit_status = 2

    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class OutputError(FrondError, OSError):
    code = "cli_runner.io_error"
    exit_status = 4


class DomainError(FrondError, ValueError):
    code = "special_fn.domain_error"
    exit_status = 1


class PoleError(DomainError):
    code = "special_fn.pole"


class GammaOverflowError(FrondError, OverflowError):
    code = "special_fn.overflow"
    exit_status = 3


class ConvergenceError(FrondError, ArithmeticError):
    code = "special_fn.non_convergence"
    exit_status = 3


class NonFiniteError(FrondError, ArithmeticError):
    """A state or right-hand side value became NaN or infinite."""

    code = "fde_solver.non_finite"
    exit_status = 3

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (first offending step {step})")
        self.step = step


class ShapeError(FrondError, ValueError):
    code = "graph_dynamics.shape_error"
    exit_status = 1


class DegenerateSamplesError(FrondError, ValueError):
    code = "graph_dynamics.degenerate_samples"
    exit_status = 1


class PerturbationError(FrondError, ValueError):
    code = "robustness_lab.invalid_perturbation"
    exit_status = 1
