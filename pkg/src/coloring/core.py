import numpy as np

from src.coloring.models import Coloring
from src.errors import AlignmentError
from src.lattice.models import LatticePatch
from src.sampler.models import FieldSample


def colorize(sample: FieldSample, patch: LatticePatch) -> Coloring:
    """Colouring Omega(f, eps T) of the patch vertices by the sign of the sample."""
    vertices = patch.points
    if sample.points.shape != vertices.shape:
        raise AlignmentError(
            f"Sample has {sample.points.shape[0]} points but the patch has {vertices.shape[0]} vertices"
        )
    mismatch = np.any(sample.points != vertices, axis=1)
    if np.any(mismatch):
        first = int(np.argmax(mismatch))
        raise AlignmentError(
            f"Sample point {tuple(sample.points[first])} does not match vertex {tuple(vertices[first])}"
        )
    return Coloring.from_values(patch, sample.values)


def exchange(coloring: Coloring) -> Coloring:
    return Coloring(coloring.patch, ~coloring.black)
