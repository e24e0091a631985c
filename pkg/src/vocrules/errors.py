"""Exception hierarchy shared by every vocrules module."""


class VocrulesError(Exception):
    """Base class for all library errors."""


class EmptyVocabulary(VocrulesError):
    pass


class InvalidRestriction(VocrulesError):
    pass


class SchemaMismatch(VocrulesError):
    pass


class NoRuleFound(VocrulesError):
    """The learner could not find a single literal with positive gain."""


class InsufficientData(VocrulesError):
    pass


class InvalidSpec(VocrulesError):
    pass


class ConfigError(VocrulesError):
    pass


class DataError(VocrulesError):
    pass


class ParseError(VocrulesError):
    def __init__(self, message, line, column=1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
