import numpy as np
from scipy import linalg

RANK_TOLERANCE = 1e-10


def find_singular_dimension(matrix: np.ndarray, tolerance: float = RANK_TOLERANCE) -> int | None:
    """Column that makes ``matrix`` rank deficient, None when it has full column rank

    Uses a column-pivoted QR decomposition; the first pivot whose diagonal entry falls
    below ``tolerance`` relative to the largest one names the dependent column.
    """
    matrix = np.atleast_2d(matrix)
    if matrix.shape[1] == 0:
        return None
    _, r, pivots = linalg.qr(matrix, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(r))
    if len(diagonal) < matrix.shape[1]:
        return int(pivots[len(diagonal)])
    if diagonal[0] == 0:
        return int(pivots[0])
    small = np.nonzero(diagonal <= tolerance * diagonal[0])[0]
    return int(pivots[small[0]]) if len(small) else None
