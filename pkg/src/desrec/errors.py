"""Exception types shared across the package."""


class DesrecError(Exception):
    """Base class for all package-specific errors."""


class MissingHeader(DesrecError):
    pass


class NonNumericFeature(DesrecError):
    def __init__(self, column: str, line: int | None = None):
        self.column = column
        self.line = line
        where = f" at line {line}" if line is not None else ""
        super().__init__(f"feature column {column!r} is not numeric{where}")


class RaggedRow(DesrecError):
    def __init__(self, line: int):
        self.line = line
        super().__init__(f"row at line {line} has the wrong number of fields")


class SingleClass(DesrecError):
    pass


class InvalidSpec(DesrecError):
    pass


class ClassTooSmall(DesrecError):
    def __init__(self, label: int):
        self.label = label
        super().__init__(f"class {label} is too small for the requested split")


class AllZeroWeights(DesrecError):
    pass


class KTooLarge(DesrecError):
    pass


class DegeneratePool(DesrecError):
    pass


class DselTooSmall(DesrecError):
    pass


class SingleMetaClass(DesrecError):
    pass


class MissingMetaModel(DesrecError):
    pass


class IncompleteGrid(DesrecError):
    pass


class EmptyMetaDataset(DesrecError):
    pass


class SchemaMismatch(DesrecError):
    pass


class CorpusTooSmall(DesrecError):
    pass
