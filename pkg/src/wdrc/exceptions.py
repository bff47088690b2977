"""Exception types shared across the package."""


class WdrcError(Exception):
    """Base class for solver and configuration failures."""


class AssumptionViolated(WdrcError):
    """A structural condition required by the synthesis pipeline fails.

    ``assumption`` records which one, using the numbering documented in the
    README: 1 penalty dominance, 2 stationary nominal moments, 3 control-side
    regularity, 4 filter-side regularity.
    """

    def __init__(self, assumption, message):
        self.assumption = assumption
        super().__init__("assumption %s violated: %s" % (assumption, message))


class NoConvergence(WdrcError):
    """An iterative solver hit its cap before reaching tolerance."""


class NoAdmissibleLambda(WdrcError):
    """Every candidate penalty value on the tuning grid was inadmissible."""


class ConfigError(WdrcError):
    """Experiment configuration is malformed; ``field`` names the bad entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__("config field '%s': %s" % (field, message))
