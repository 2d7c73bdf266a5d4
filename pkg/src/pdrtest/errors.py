"""Exception types shared across the package."""


class DataError(ValueError):
    """Invalid or unusable input data: bad schema, missing columns, empty tables,
    constant responses, values outside a transform's domain."""


class SingularityError(ValueError):
    """A matrix that must be (numerically) invertible is not: near-singular
    covariances, collinear score columns."""
