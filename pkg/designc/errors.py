""" exception hierarchy shared by every stage of the design compiler """


class DesignError(Exception):
    pass


class ParseError(DesignError):
    def __init__(self, message, position=None, source=None):
        self.position = position
        self.source = source
        if position is not None:
            message = "%s (at position %d)" % (message, position)
        if source is not None:
            message = "%s: %s" % (source, message)
        super(ParseError, self).__init__(message)


class LoadError(DesignError):
    """ collects every problem found while loading, not just the first one """

    def __init__(self, message, problems=None):
        self.problems = list(problems) if problems else [message]
        if problems and len(self.problems) > 1:
            message = message + "\n  " + "\n  ".join(self.problems)
        super(LoadError, self).__init__(message)


class SchemaError(LoadError):
    pass


class DimensionError(DesignError):
    def __init__(self, message, where=None):
        self.where = where
        if where is not None:
            message = "%s in '%s'" % (message, where)
        super(DimensionError, self).__init__(message)


class GraphError(DesignError):
    pass


class EvaluationError(DesignError):
    pass


class RuleError(DesignError):
    pass


class StaleMatchError(RuleError):
    pass


class StepError(DesignError):
    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = "step %s: %s" % (step, message)
        super(StepError, self).__init__(message)


class ChainError(StepError):
    def __init__(self, message, chain=None, returncode=None, stderr=None):
        self.chain = chain
        self.returncode = returncode
        self.stderr = stderr
        if chain is not None:
            message = "chain '%s': %s" % (chain, message)
        if stderr:
            message = "%s\n%s" % (message, stderr.strip())
        super(ChainError, self).__init__(message)


class SolverError(DesignError):
    pass


class UnderdeterminedError(SolverError):
    def __init__(self, message, unmatched=(), blocking_equations=()):
        self.unmatched = list(unmatched)
        self.blocking_equations = list(blocking_equations)
        super(UnderdeterminedError, self).__init__(message)


class ConvergenceError(SolverError):
    pass


class ResidualError(SolverError):
    def __init__(self, message, equation=None, residual=None):
        self.equation = equation
        self.residual = residual
        super(ResidualError, self).__init__(message)


class ValidationFailure(DesignError):
    def __init__(self, report):
        self.report = report
        super(ValidationFailure, self).__init__(
            "final design graph is invalid:\n  " + "\n  ".join(report.violations))
