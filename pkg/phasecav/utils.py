import logging
import json
import hashlib
import typing
import numpy as np
import numba

# Setup logging
logger = logging.getLogger(__name__)

##########
# Errors #
##########

class NumericalError(RuntimeError):
    '''Base class of numerical failures raised by the package. Subclasses carry
    the diagnostics needed to understand the failure as attributes.
    '''
    pass

class ResourceLimitError(NumericalError):
    '''Raised when a mesh operation would exceed the configured vertex cap.

    Attributes:
        requested (int): Estimated or actual vertex count.
        allowed (int): Configured vertex cap.
    '''

    def __init__(self, requested:int, allowed:int):
        self.requested = int(requested)
        self.allowed = int(allowed)
        super().__init__(f'Mesh would contain {self.requested} vertices, exceeding the cap of {self.allowed}.')

class FactorizationError(NumericalError):
    '''Raised when a sparse linear solve fails.

    Attributes:
        diagnostics (dict): Matrix diagnostics (dimension, diagonal range,
            non-finite entries, residual).
    '''

    def __init__(self, message:str, diagnostics:dict):
        self.diagnostics = diagnostics
        super().__init__(f'{message} Diagnostics: {diagnostics}')

class NewtonConvergenceError(NumericalError):
    '''Raised when the Newton iteration does not reach the requested tolerance.

    Attributes:
        residual_history (list): Residual norm at every Newton iterate.
    '''

    def __init__(self, message:str, residual_history:typing.List[float]):
        self.residual_history = list(residual_history)
        super().__init__(message)

class StagnationError(NumericalError):
    '''Raised when the optimizer cannot find a decreasing step above the
    minimum step length.

    Attributes:
        history (list): Iteration records up to the failure.
        v (NodalField): Last accepted (feasible) phase field.
    '''

    def __init__(self, message:str, history:list, v:typing.Optional[np.ndarray]=None):
        self.history = list(history)
        self.v = v
        super().__init__(message)

###############
# Mathematics #
###############

@numba.jit(nopython=True, cache=True)
def segment_distances(points:np.ndarray, seg_a:np.ndarray, seg_b:np.ndarray) -> np.ndarray:
    """Distance from each point to the closest of a set of line segments.

    Args:
        points (:obj:`np.ndarray`): Query points, shape (n, 2)
        seg_a (:obj:`np.ndarray`): Segment start points, shape (m, 2)
        seg_b (:obj:`np.ndarray`): Segment end points, shape (m, 2)

    Returns:
        (:obj:`np.ndarray`) Minimum distance of every point, shape (n,)
    """
    n = points.shape[0]
    m = seg_a.shape[0]
    out = np.empty(n)

    for i in range(n):
        px = points[i, 0]
        py = points[i, 1]
        best = np.inf
        for j in range(m):
            ax = seg_a[j, 0]
            ay = seg_a[j, 1]
            dx = seg_b[j, 0] - ax
            dy = seg_b[j, 1] - ay
            ll = dx*dx + dy*dy
            t = 0.0
            if ll > 0.0:
                t = ((px - ax)*dx + (py - ay)*dy) / ll
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            qx = ax + t*dx - px
            qy = ay + t*dy - py
            d = qx*qx + qy*qy
            if d < best:
                best = d
        out[i] = np.sqrt(best)

    return out

def points_in_polygon(points:np.ndarray, polygon:np.ndarray) -> np.ndarray:
    '''Even-odd test of points against a closed polygon.

    Args:
        points (:obj:`np.ndarray`): Query points, shape (n, 2)
        polygon (:obj:`np.ndarray`): Polygon vertices in order, shape (m, 2).
            The closing edge is implied.

    Returns:
        np.ndarray: Boolean mask, ``True`` for points strictly inside.
    '''

    points = np.atleast_2d(np.asarray(points, dtype=float))
    polygon = np.asarray(polygon, dtype=float)

    x = points[:, 0][:, None]
    y = points[:, 1][:, None]
    xa, ya = polygon[:, 0][None, :], polygon[:, 1][None, :]
    xb, yb = np.roll(polygon[:, 0], -1)[None, :], np.roll(polygon[:, 1], -1)[None, :]

    straddle = (ya > y) != (yb > y)
    with np.errstate(divide='ignore', invalid='ignore'):
        x_cross = xa + (y - ya) * (xb - xa) / (yb - ya)
    crossings = straddle & (x < x_cross)

    return (np.count_nonzero(crossings, axis=1) % 2) == 1

def polygon_area(polygon:np.ndarray) -> float:
    '''Signed shoelace area of a polygon. Positive for counter-clockwise order.
    '''
    polygon = np.asarray(polygon, dtype=float)
    x, y = polygon[:, 0], polygon[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

###########
# Hashing #
###########

def stable_hash(payload:dict) -> str:
    '''SHA-256 of the canonical JSON serialization of a dictionary.

    Args:
        payload (dict): JSON-serializable dictionary

    Returns:
        str: Hex digest
    '''

    text = json.dumps(payload, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(text.encode('utf-8')).hexdigest()
