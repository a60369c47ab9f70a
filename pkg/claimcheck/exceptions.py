from typing import Any


class ClaimCheckException(Exception):
    pass


class TripleParseException(ClaimCheckException):
    def __init__(self, line_number: int, line: str) -> None:
        super().__init__(
            f"Line {line_number} is not a head<TAB>relation<TAB>tail triple: {line!r}"
        )
        self._line_number = line_number

    @property
    def line_number(self) -> int:
        return self._line_number


class EmptyGraphException(ClaimCheckException):
    pass


class UnknownEntityException(ClaimCheckException):
    def __init__(self, entity: Any) -> None:
        super().__init__(f"Unknown entity: {entity}")
        self._entity = entity

    @property
    def entity(self) -> Any:
        return self._entity


class UnknownRelationException(ClaimCheckException):
    def __init__(self, relation: Any) -> None:
        super().__init__(f"Unknown relation: {relation}")
        self._relation = relation

    @property
    def relation(self) -> Any:
        return self._relation


class CorruptionException(ClaimCheckException):
    pass


class WalkException(ClaimCheckException):
    pass


class SplitException(ClaimCheckException):
    pass


class DimensionMismatchException(ClaimCheckException):
    pass


class NonFiniteException(ClaimCheckException):
    def __init__(self, name: str) -> None:
        super().__init__(f"Non-finite value in {name}")
        self._name = name

    @property
    def name(self) -> str:
        return self._name


class DivergenceException(ClaimCheckException):
    pass


class CalibrationException(ClaimCheckException):
    pass


class EmptySplitException(ClaimCheckException):
    pass


class MissingLabelsException(ClaimCheckException):
    pass


class StatementFormatException(ClaimCheckException):
    pass


class ConfigException(ClaimCheckException):
    pass


class ArgumentException(ClaimCheckException):
    pass


class MissingArtifactException(ClaimCheckException):
    def __init__(self, path: str) -> None:
        super().__init__(f"Missing artifact: {path}")
        self._path = path

    @property
    def path(self) -> str:
        return self._path


class CheckpointException(ClaimCheckException):
    pass


class KeyboardInterruptWithDataException(Exception):
    def __init__(self, data) -> None:
        super().__init__(None)
        self._data = data

    @property
    def data(self) -> Any:
        return self._data
