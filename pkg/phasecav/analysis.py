"""The analysis module extracts level-set contours of reconstructed phase fields
and compares reconstructions against a known cavity.

Conventions: v close to 1 marks conductive material and v close to 0 marks
the cavity, so the reconstructed cavity is the region {v < level}.
"""

import logging
import typing
import numba
import pydantic
import numpy as np

from phasecav.utils import segment_distances
from phasecav.mesh import Mesh
from phasecav.fem import NodalField
from phasecav.data_models.geometry import CavitySpec

logger = logging.getLogger(__name__)

SUBDIVISIONS = 8
"""Per-edge subdivision of triangles when integrating sharp indicator
functions. Each triangle contributes SUBDIVISIONS**2 sample points.
"""

######################
# Contour Extraction #
######################

@numba.jit(nopython=True, cache=True)
def _crossing_segments(above:np.ndarray, triangle_edges:np.ndarray) -> np.ndarray:
    """Mesh edges joined by the level set inside every triangle.

    Args:
        above (:obj:`np.ndarray`): Vertex flag ``v >= level`` per triangle
            vertex, shape (m, 3)
        triangle_edges (:obj:`np.ndarray`): Edge ids of local edges, shape (m, 3)

    Returns:
        (:obj:`np.ndarray`) Pairs of crossed edge ids, shape (k, 2)
    """
    m = above.shape[0]
    out = np.empty((m, 2), dtype=np.int64)
    k = 0

    for t in range(m):
        n = 0
        for e in range(3):
            if above[t, e] != above[t, (e + 1) % 3]:
                out[k, n] = triangle_edges[t, e]
                n += 1
        if n == 2:
            k += 1

    return out[:k]

def _chain(segments:np.ndarray) -> typing.List[typing.Tuple[typing.List[int], bool]]:
    '''Join segments sharing an edge id into chains of edge ids.
    '''
    adjacency: typing.Dict[int, typing.List[int]] = {}
    for s, (a, b) in enumerate(segments):
        adjacency.setdefault(int(a), []).append(s)
        adjacency.setdefault(int(b), []).append(s)

    used = np.zeros(segments.shape[0], dtype=bool)
    chains = []

    # Open chains start at edges with a single segment (mesh boundary)
    starts = sorted(e for e, segs in adjacency.items() if len(segs) == 1)
    starts += sorted(e for e, segs in adjacency.items() if len(segs) != 1)

    for start in starts:
        if all(used[s] for s in adjacency[start]):
            continue

        chain = [start]
        current = start
        while True:
            nxt = [s for s in adjacency[current] if not used[s]]
            if not nxt:
                break
            s = nxt[0]
            used[s] = True
            a, b = segments[s]
            current = int(b) if int(a) == current else int(a)
            chain.append(current)
            if current == start:
                break

        chains.append((chain, len(chain) > 2 and chain[0] == chain[-1]))

    return chains

def extract_contour(v:NodalField, level:float=0.5) -> typing.List[np.ndarray]:
    '''Marching-triangles level set of a P1 field.

    Vertices with value exactly ``level`` count as above the level. Each
    crossed mesh edge contributes one point by linear interpolation, and
    segments are chained through shared edges.

    Args:
        v (NodalField): Field
        level (float): Level in (0, 1)

    Returns:
        list: Polylines of shape (n, 2). Closed polylines repeat their first
            point. Empty if the level is not crossed.
    '''

    if not 0.0 < level < 1.0:
        raise ValueError(f'Contour level must lie in (0, 1), got {level}')

    mesh = v.mesh
    values = v.values
    above = values[mesh.triangles] >= level

    segments = _crossing_segments(np.ascontiguousarray(above), np.ascontiguousarray(mesh.triangle_edges))
    if segments.shape[0] == 0:
        return []

    edges = mesh.edges
    va = values[edges[:, 0]]
    vb = values[edges[:, 1]]
    with np.errstate(divide='ignore', invalid='ignore'):
        t = np.where(vb != va, (level - va) / (vb - va), 0.5)
    t = np.clip(t, 0.0, 1.0)
    points = (1.0 - t)[:, None] * mesh.vertices[edges[:, 0]] + t[:, None] * mesh.vertices[edges[:, 1]]

    polylines = [points[np.array(chain)] for chain, _ in _chain(segments)]
    logger.debug(f'Extracted {len(polylines)} contour polylines from {segments.shape[0]} segments at level {level}')

    return polylines

def contour_length(polylines:typing.Sequence[np.ndarray]) -> float:
    return float(sum(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1)) for p in polylines))

def is_closed(polyline:np.ndarray) -> bool:
    return polyline.shape[0] > 2 and bool(np.array_equal(polyline[0], polyline[-1]))

###########
# Metrics #
###########

def _subsample_barycentric(m:int) -> np.ndarray:
    '''Barycentric centroids of the m**2 congruent sub-triangles.
    '''
    coords = []
    for i in range(m):
        for j in range(m - i):
            coords.append(((i + 1.0/3.0) / m, (j + 1.0/3.0) / m))
            if i + j < m - 1:
                coords.append(((i + 2.0/3.0) / m, (j + 2.0/3.0) / m))
    lam = np.array(coords)
    return np.column_stack([1.0 - lam[:, 0] - lam[:, 1], lam[:, 0], lam[:, 1]])

def _samples(v:NodalField, m:int=SUBDIVISIONS) -> typing.Tuple[np.ndarray, np.ndarray, np.ndarray]:
    '''Sample points, P1 values and area weights on a uniform sub-triangulation.
    '''
    mesh = v.mesh
    bary = _subsample_barycentric(m)
    p = mesh.vertices[mesh.triangles]
    points = np.einsum('qk,tkd->tqd', bary, p).reshape(-1, 2)
    values = (v.values[mesh.triangles] @ bary.T).reshape(-1)
    weights = np.repeat(mesh.areas / bary.shape[0], bary.shape[0])
    return points, values, weights

def symmetric_difference(v:NodalField, truth:CavitySpec, level:float=0.5) -> typing.Tuple[float, float]:
    '''Area of {v < level} xor D_true and its ratio to |D_true|.

    Returns:
        tuple: ``(area, ratio)``. The ratio is ``inf`` for an empty truth with
            a nonempty reconstruction and 0 if both are empty.
    '''
    points, values, weights = _samples(v)
    rec = values < level
    true = truth.contains(points)
    area = float(np.sum(weights[rec != true]))

    if truth.area > 0.0:
        return area, area / truth.area
    return area, (np.inf if area > 0.0 else 0.0)

def hausdorff_distance(polylines:typing.Sequence[np.ndarray], truth:CavitySpec, spacing:float=1.0e-3) -> float:
    '''Hausdorff distance between contour polylines and the true cavity
    boundary, sampled at ``spacing``.
    '''
    if not polylines and truth.is_empty:
        return 0.0
    if not polylines or truth.is_empty:
        return np.inf

    points = np.vstack(polylines)
    to_truth = float(np.max(truth.boundary_distance(points)))

    seg_a = np.vstack([p[:-1] for p in polylines if p.shape[0] > 1])
    seg_b = np.vstack([p[1:] for p in polylines if p.shape[0] > 1])
    samples = np.ascontiguousarray(truth.boundary_points(spacing))
    to_contour = float(np.max(segment_distances(samples, np.ascontiguousarray(seg_a), np.ascontiguousarray(seg_b))))

    return max(to_truth, to_contour)

def interface_band(v:NodalField, eta:float=0.1) -> float:
    '''Area of the diffuse region {eta < v < 1 - eta}.
    '''
    if not 0.0 < eta < 0.5:
        raise ValueError(f'Band threshold must lie in (0, 0.5), got {eta}')
    _, values, weights = _samples(v)
    return float(np.sum(weights[(values > eta) & (values < 1.0 - eta)]))

class ReconstructionMetrics(pydantic.BaseModel):
    '''Quality measures of a reconstruction against the true cavity.
    '''
    symdiff_area: float = pydantic.Field(..., description='Area of the symmetric difference')
    symdiff_ratio: float = pydantic.Field(..., description='Symmetric difference relative to the true cavity area')
    hausdorff: float = pydantic.Field(..., description='Hausdorff distance of the 0.5 contour to the true boundary')
    contour_length: float = pydantic.Field(..., description='Total length of the 0.5 contour')
    n_contours: int = pydantic.Field(..., description='Number of contour polylines')
    all_closed: bool = pydantic.Field(..., description='Whether every contour polyline is closed')
    band_area: float = pydantic.Field(..., description='Area of {eta < v < 1 - eta}')
    band_fraction: float = pydantic.Field(..., description='Band area relative to the domain area')
    band_ratio: typing.Optional[float] = pydantic.Field(None, description='Band area relative to epsilon times the contour length')
    eta_diag: float = pydantic.Field(..., description='Band threshold')

def compute_metrics(v:NodalField, truth:CavitySpec, eta_diag:float=0.1,
                    epsilon:typing.Optional[float]=None, level:float=0.5) -> ReconstructionMetrics:
    '''Compare a reconstructed phase field with the true cavity.

    Args:
        v (NodalField): Reconstructed phase field
        truth (CavitySpec): True cavity
        eta_diag (float): Threshold of the diffuse interface band
        epsilon (float): Interface width of the final phase. The band ratio is
            only reported when given.
        level (float): Contour level

    Returns:
        ReconstructionMetrics: Metrics report
    '''

    polylines = extract_contour(v, level)
    length = contour_length(polylines)
    area, ratio = symmetric_difference(v, truth, level)
    band = interface_band(v, eta_diag)

    band_ratio = None
    if epsilon is not None:
        band_ratio = band / (epsilon * length) if length > 0.0 else np.inf

    metrics = ReconstructionMetrics(
        symdiff_area=area,
        symdiff_ratio=ratio,
        hausdorff=hausdorff_distance(polylines, truth),
        contour_length=length,
        n_contours=len(polylines),
        all_closed=all(is_closed(p) for p in polylines),
        band_area=band,
        band_fraction=band / v.mesh.area,
        band_ratio=band_ratio,
        eta_diag=eta_diag,
    )

    logger.info(f'Metrics: symmetric difference ratio {metrics.symdiff_ratio:.4f}, Hausdorff {metrics.hausdorff:.4f}, '
                f'band fraction {metrics.band_fraction:.4f}')

    return metrics
