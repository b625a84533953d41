"""Exception taxonomy shared by every module in the package.

All library errors derive from FeatGraphError so callers can catch one
base class at the CLI boundary.  Subclasses carry enough context to
produce a useful one-line message; none of them wrap other exceptions.
"""


class FeatGraphError(Exception):
    """Base class for every error raised by this package."""


# ---------------------------------------------------------------- tabular

class MissingLabelColumn(FeatGraphError):
    def __init__(self, column: str, available: tuple[str, ...]):
        self.column = column
        self.available = available
        super().__init__(
            f"label column {column!r} not found; header has {list(available)}"
        )


class NonNumericCell(FeatGraphError):
    def __init__(self, row: int, col: str, value: str):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(
            f"cell at data row {row}, column {col!r} is not numeric: {value!r}"
        )


class RaggedRow(FeatGraphError):
    def __init__(self, row: int, expected: int, got: int):
        self.row = row
        self.expected = expected
        self.got = got
        super().__init__(
            f"data row {row} has {got} cells, header has {expected}"
        )


class EmptyDataset(FeatGraphError):
    pass


class EmptyColumn(FeatGraphError):
    pass


class TooFewRows(FeatGraphError):
    def __init__(self, rows: int, needed: int, what: str = "split"):
        self.rows = rows
        self.needed = needed
        super().__init__(f"{what} needs at least {needed} rows, got {rows}")


# ------------------------------------------------------------ operations

class UnknownOperation(FeatGraphError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown operation {name!r}")


class ArityMismatch(FeatGraphError):
    def __init__(self, op: str, expected: int, got: int):
        self.op = op
        self.expected = expected
        self.got = got
        super().__init__(f"{op} takes {expected} operand(s), got {got}")


class LengthMismatch(FeatGraphError):
    def __init__(self, left: int, right: int):
        self.left = left
        self.right = right
        super().__init__(f"operand lengths differ: {left} vs {right}")


class FitStateMismatch(FeatGraphError):
    def __init__(self, expected: str, got: str):
        self.expected = expected
        self.got = got
        super().__init__(f"fit state belongs to {got!r}, expected {expected!r}")


class NonFiniteOutput(FeatGraphError):
    def __init__(self, op: str):
        self.op = op
        super().__init__(f"{op} produced non-finite values with guards disabled")


# ----------------------------------------------------------------- graph

class UnknownParent(FeatGraphError):
    def __init__(self, node_id: int):
        self.node_id = node_id
        super().__init__(f"parent node {node_id} does not exist")


class UnknownNode(FeatGraphError):
    def __init__(self, node_id: int):
        self.node_id = node_id
        super().__init__(f"node {node_id} does not exist")


class SchemaMismatch(FeatGraphError):
    def __init__(self, expected, got):
        self.expected = tuple(expected)
        self.got = tuple(got)
        super().__init__(
            f"column schema {list(got)} does not match graph roots {list(expected)}"
        )


class CorruptProgram(FeatGraphError):
    pass


# ------------------------------------------------------------ clustering

class ZeroVector(FeatGraphError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"embedding {index} has zero norm, cosine undefined")


class ShapeMismatch(FeatGraphError):
    pass


class NoConvergence(FeatGraphError):
    def __init__(self, sweeps: int, off_diag: float):
        self.sweeps = sweeps
        self.off_diag = off_diag
        super().__init__(
            f"eigensolver did not converge in {sweeps} sweeps"
            f" (off-diagonal norm {off_diag:.3e})"
        )


class DimensionTooLarge(FeatGraphError):
    def __init__(self, wanted: int, available: int):
        self.wanted = wanted
        self.available = available
        super().__init__(
            f"requested {wanted} spectral dimensions, matrix has {available}"
        )


class InvalidK(FeatGraphError):
    def __init__(self, k: int, n: int):
        self.k = k
        self.n = n
        super().__init__(f"cluster count {k} not in [1, {n}]")


# ---------------------------------------------------------------- agents

class NoClusters(FeatGraphError):
    pass


class NoCandidates(FeatGraphError):
    pass


# -------------------------------------------------------------- networks

class DimMismatch(FeatGraphError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"input has dimension {got}, network expects {expected}")


class UnknownRelation(FeatGraphError):
    def __init__(self, relation: int, count: int):
        self.relation = relation
        self.count = count
        super().__init__(f"relation {relation} out of range [0, {count})")


class ArchitectureMismatch(FeatGraphError):
    pass


# ------------------------------------------------------------ evaluation

class EmptyInput(FeatGraphError):
    pass


class SingleClass(FeatGraphError):
    pass


class ConstantTruth(FeatGraphError):
    pass


# ---------------------------------------------------------------- config

class MalformedConfig(FeatGraphError):
    pass


class UnknownKey(FeatGraphError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"unknown config key {key!r}")


class OutOfRange(FeatGraphError):
    def __init__(self, key: str, value, why: str):
        self.key = key
        self.value = value
        super().__init__(f"config {key}={value!r} invalid: {why}")
