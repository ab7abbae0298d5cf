"""Exception types raised across the package."""


class ShapeError(ValueError):
    """Operand shapes do not conform for an operation."""

    def __init__(self, kind, *shapes, detail=""):
        self.kind = kind
        self.shapes = tuple(tuple(s) for s in shapes)
        msg = f"{kind}: incompatible shapes {' and '.join(str(s) for s in self.shapes)}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class GraphError(ValueError):
    pass


class NotPSDError(ValueError):
    """A matrix that should be positive semi-definite has a clearly negative eigenvalue."""

    def __init__(self, eigenvalue, tol):
        self.eigenvalue = float(eigenvalue)
        self.tol = tol
        super().__init__(f"matrix is not PSD: eigenvalue {self.eigenvalue:.3e} below -{tol:g}")


class ThresholdUnreachable(ValueError):
    pass


class ConstructionError(ValueError):
    pass


class ConfigError(ValueError):
    """Config validation failed. ``errors`` holds (json-pointer, message) pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p or '/'}: {m}" for p, m in self.errors))
