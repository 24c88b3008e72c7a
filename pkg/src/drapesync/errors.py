"""Exception types shared across the package."""


class DrapesyncError(Exception):
    """Base class for all package errors."""


class MeshError(DrapesyncError):
    """Invalid mesh topology or geometry."""


class MeshParseError(MeshError):
    """Unreadable mesh file; carries the offending line number."""

    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class DegenerateFaceError(MeshError):
    """Faces with repeated indices or area below tolerance."""

    def __init__(self, face_ids, message="degenerate faces"):
        self.face_ids = list(face_ids)
        shown = ", ".join(str(i) for i in self.face_ids[:8])
        more = "" if len(self.face_ids) <= 8 else f" (+{len(self.face_ids) - 8} more)"
        super().__init__(f"{message}: [{shown}{more}]")


class OpenSurfaceError(MeshError):
    """Mesh expected to be closed has boundary edges."""

    def __init__(self, boundary_edges):
        self.boundary_edges = [tuple(int(v) for v in e) for e in boundary_edges]
        shown = ", ".join(str(e) for e in self.boundary_edges[:6])
        more = "" if len(self.boundary_edges) <= 6 else f" (+{len(self.boundary_edges) - 6} more)"
        super().__init__(f"surface is not closed; boundary edges: [{shown}{more}]")


class ConfigError(DrapesyncError):
    """Bad run configuration; carries the offending field name."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


class SolverError(DrapesyncError):
    """Sparse factorization or solve failure."""


class GradientError(DrapesyncError):
    """Non-finite gradient; carries the loss term of origin."""

    def __init__(self, term, message="non-finite gradient"):
        self.term = term
        super().__init__(f"{message} (term: {term})")
