"""The mesh module provides conforming triangulations of the disk domain, with
and without cavity holes, together with adaptive refinement and transfer of
nodal data between meshes.
"""

import enum
import math
import logging
import functools
import typing
import numpy as np
from scipy.spatial import Delaunay

import phasecav.constants as pcc
from phasecav.utils import ResourceLimitError
from phasecav.data_models.geometry import CavitySpec

logger = logging.getLogger(__name__)

class BoundaryMarker(enum.IntEnum):
    OUTER = 0
    CAVITY = 1

# Relative tolerance identifying vertices on the outer circle
OUTER_TOL = 1.0e-9

########
# Mesh #
########

class Mesh():
    '''Conforming P1 triangulation with marked boundary edges.

    Triangles are stored counter-clockwise. Local edge ``k`` of a triangle
    joins its vertices ``k`` and ``k+1 (mod 3)``. Arrays are read-only; mesh
    operations return new meshes.

    Args:
        vertices (:obj:`np.ndarray`): Vertex coordinates, shape (n, 2)
        triangles (:obj:`np.ndarray`): Vertex indices, shape (m, 3)
        boundary (:obj:`np.ndarray`): Boundary edges ``(v0, v1, marker)``,
            shape (k, 3). When omitted, edges belonging to a single triangle
            are detected and marked OUTER if both end points lie on the
            circle of radius ``radius``, CAVITY otherwise.
        radius (float): Radius of the outer boundary circle. Inferred from the
            vertices when omitted.
    '''

    def __init__(self, vertices:np.ndarray, triangles:np.ndarray,
                 boundary:typing.Optional[np.ndarray]=None, radius:typing.Optional[float]=None):

        vertices = np.array(vertices, dtype=float)
        triangles = np.array(triangles, dtype=np.int64)

        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise ValueError(f'Mesh vertices must have shape (n, 2), got {vertices.shape}')
        if triangles.ndim != 2 or triangles.shape[1] != 3 or triangles.shape[0] == 0:
            raise ValueError(f'Mesh triangles must have shape (m, 3) with m > 0, got {triangles.shape}')
        if triangles.min() < 0 or triangles.max() >= vertices.shape[0]:
            raise ValueError('Mesh triangles reference vertices out of range.')

        self._vertices = vertices
        self._triangles = triangles
        self._vertices.setflags(write=False)
        self._triangles.setflags(write=False)

        if np.any(self.areas <= 0.0):
            bad = np.flatnonzero(self.areas <= 0.0)
            raise ValueError(f'Mesh has {bad.size} triangles with non-positive signed area, first index {bad[0]}')

        counts = np.bincount(self.triangle_edges.ravel(), minlength=self.edges.shape[0])
        if np.any(counts > 2):
            raise ValueError('Mesh is not conforming: an edge is shared by more than two triangles.')

        single = np.flatnonzero(counts == 1)

        if radius is None:
            radius = float(np.max(np.linalg.norm(vertices, axis=1)))
        self.radius = float(radius)

        if boundary is None:
            be = self.edges[single]
            r = np.linalg.norm(vertices[be], axis=2)
            on_circle = np.all(np.abs(r - self.radius) < OUTER_TOL * self.radius, axis=1)
            markers = np.where(on_circle, BoundaryMarker.OUTER, BoundaryMarker.CAVITY)
            boundary = np.column_stack([be, markers])
        else:
            boundary = np.array(boundary, dtype=np.int64).reshape(-1, 3)
            ids = self.edge_ids(boundary[:, 0], boundary[:, 1])
            if np.any(ids < 0) or not np.array_equal(np.sort(ids), single):
                raise ValueError('Boundary edges do not match the edges belonging to exactly one triangle.')

        self._boundary = boundary
        self._boundary.setflags(write=False)

    def __str__(self) -> str:
        return f'<Mesh: nverts={self.nverts}, ntris={self.ntris}, radius={self.radius}>'

    def __repr__(self) -> str:
        return self.__str__()

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices

    @property
    def triangles(self) -> np.ndarray:
        return self._triangles

    @property
    def boundary_edges(self) -> np.ndarray:
        '''Boundary edges as rows ``(v0, v1, marker)``.
        '''
        return self._boundary

    @property
    def nverts(self) -> int:
        return self._vertices.shape[0]

    @property
    def ntris(self) -> int:
        return self._triangles.shape[0]

    @functools.cached_property
    def areas(self) -> np.ndarray:
        '''Signed triangle areas.
        '''
        p = self._vertices[self._triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def area(self) -> float:
        return float(np.sum(self.areas))

    @functools.cached_property
    def _edge_structure(self):
        local = self._triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        local = np.sort(local, axis=1)
        edges, inverse = np.unique(local, axis=0, return_inverse=True)
        return edges, inverse.reshape(-1, 3)

    @property
    def edges(self) -> np.ndarray:
        '''Unique edges, each sorted by vertex index.
        '''
        return self._edge_structure[0]

    @property
    def triangle_edges(self) -> np.ndarray:
        '''Edge ids of the local edges of every triangle, shape (m, 3).
        '''
        return self._edge_structure[1]

    @functools.cached_property
    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self._vertices[e[:, 1]] - self._vertices[e[:, 0]], axis=1)

    @functools.cached_property
    def element_diameters(self) -> np.ndarray:
        '''Element diameters h_K, the longest edge of every triangle.
        '''
        return np.max(self.edge_lengths[self.triangle_edges], axis=1)

    def edge_ids(self, a:np.ndarray, b:np.ndarray) -> np.ndarray:
        '''Look up edge ids of vertex pairs. Missing edges return -1.
        '''
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        keys = np.minimum(a, b) * self.nverts + np.maximum(a, b)
        table = self.edges[:, 0] * self.nverts + self.edges[:, 1]
        idx = np.searchsorted(table, keys)
        idx = np.clip(idx, 0, table.size - 1)
        return np.where(table[idx] == keys, idx, -1)

    @functools.cached_property
    def basis_gradients(self) -> np.ndarray:
        '''Constant gradients of the three P1 basis functions on every
        triangle, shape (m, 3, 2).
        '''
        p = self._vertices[self._triangles]
        # Gradient of phi_k is the rotated opposite edge over twice the area
        e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
        grads = np.stack([-e[:, :, 1], e[:, :, 0]], axis=2)
        return grads / (2.0 * self.areas[:, None, None])

    def gradient(self, values:np.ndarray) -> np.ndarray:
        '''Element-wise constant gradient of a P1 field, shape (m, 2).
        '''
        values = np.asarray(values, dtype=float)
        return np.einsum('tk,tkd->td', values[self._triangles], self.basis_gradients)

    def marker_edges(self, marker:BoundaryMarker) -> np.ndarray:
        return self._boundary[self._boundary[:, 2] == marker, :2]

    @property
    def outer_edges(self) -> np.ndarray:
        return self.marker_edges(BoundaryMarker.OUTER)

    @property
    def cavity_edges(self) -> np.ndarray:
        return self.marker_edges(BoundaryMarker.CAVITY)

    @functools.cached_property
    def outer_vertices(self) -> np.ndarray:
        '''Vertices of OUTER edges ordered by polar angle in [0, 2*pi).
        '''
        verts = np.unique(self.outer_edges)
        theta = vertex_angles(self._vertices[verts])
        return verts[np.argsort(theta, kind='stable')]

    def sigma_edges(self, arc=None) -> np.ndarray:
        '''OUTER edges whose midpoint angle lies on the accessible arc.

        Args:
            arc (ArcSpec): Boundary arc. ``None`` selects the full boundary.
        '''
        edges = self.outer_edges
        if arc is None or arc.is_full:
            return edges

        mid = 0.5 * (self._vertices[edges[:, 0]] + self._vertices[edges[:, 1]])
        return edges[arc.contains(vertex_angles(mid))]

    def sigma_vertices(self, arc=None) -> np.ndarray:
        '''Vertices of the accessible arc ordered by polar angle.
        '''
        verts = np.unique(self.sigma_edges(arc))
        theta = vertex_angles(self._vertices[verts])
        return verts[np.argsort(theta, kind='stable')]

def vertex_angles(points:np.ndarray) -> np.ndarray:
    '''Polar angles of points in [0, 2*pi).
    '''
    points = np.atleast_2d(points)
    return np.mod(np.arctan2(points[:, 1], points[:, 0]), 2.0 * math.pi)

##############
# Generation #
##############

def _estimate_vertices(radius:float, cavity:CavitySpec, target_h:float) -> int:
    interior = (math.pi * radius**2 - cavity.area) / (0.5 * math.sqrt(3.0) * target_h**2)
    boundary = 2.0 * math.pi * radius / target_h + cavity.perimeter / target_h
    return int(interior + boundary)

def generate_disk_mesh(radius:float, target_h:float, max_vertices:int=pcc.MAX_VERTICES) -> Mesh:
    '''Generate a triangulation of the disk of given radius centered at the
    origin. All boundary edges are marked OUTER.

    Args:
        radius (float): Disk radius
        target_h (float): Target element size
        max_vertices (int): Vertex cap

    Returns:
        Mesh: Conforming triangulation with element diameters bounded by
            ``MESH_DIAMETER_FACTOR * target_h``

    Raises:
        ResourceLimitError: If the mesh would exceed the vertex cap.
    '''
    return generate_cavity_mesh(radius, CavitySpec(), target_h, max_vertices=max_vertices)

def generate_cavity_mesh(radius:float, cavity:CavitySpec, target_h:float,
                         max_vertices:int=pcc.MAX_VERTICES) -> Mesh:
    '''Generate a triangulation of the disk with the cavity removed.

    Boundary points are placed on the outer circle and on the cavity
    boundary at spacing ``target_h``, interior points on a hexagonal lattice
    with the same spacing, and the point set is triangulated by Delaunay.
    Triangles with centroid inside the cavity are discarded.

    Args:
        radius (float): Disk radius
        cavity (CavitySpec): Cavity to remove. Empty specs give a disk mesh.
        target_h (float): Target element size
        max_vertices (int): Vertex cap

    Returns:
        Mesh: Triangulation with OUTER and CAVITY boundary markers

    Raises:
        ValueError: If the cavity violates the distance constraints.
        ResourceLimitError: If the mesh would exceed the vertex cap.
    '''

    if radius <= 0.0:
        raise ValueError(f'Domain radius must be positive, got {radius}')
    if target_h <= 0.0:
        raise ValueError(f'Target element size must be positive, got {target_h}')

    cavity.validate_in_domain(radius)

    estimate = _estimate_vertices(radius, cavity, target_h)
    if estimate > max_vertices:
        raise ResourceLimitError(estimate, max_vertices)

    # Outer circle
    n_b = max(8, int(math.ceil(2.0 * math.pi * radius / target_h)))
    theta = 2.0 * math.pi * np.arange(n_b) / n_b
    outer = radius * np.column_stack([np.cos(theta), np.sin(theta)])

    # Cavity boundary
    inner = cavity.boundary_points(target_h)

    # Hexagonal interior lattice
    dy = 0.5 * math.sqrt(3.0) * target_h
    ny = int(math.floor(radius / dy))
    rows = []
    for j in range(-ny, ny + 1):
        y = j * dy
        shift = 0.5 * target_h * (abs(j) % 2)
        nx = int(math.floor(radius / target_h)) + 1
        x = shift + target_h * np.arange(-nx, nx + 1)
        rows.append(np.column_stack([x, np.full(x.shape, y)]))
    lattice = np.vstack(rows)

    keep = np.linalg.norm(lattice, axis=1) < radius - 0.5 * target_h
    if not cavity.is_empty:
        keep &= ~cavity.contains(lattice)
        keep[keep] &= cavity.boundary_distance(lattice[keep]) > 0.5 * target_h
    lattice = lattice[keep]

    points = np.vstack([outer, inner, lattice])

    tri = Delaunay(points).simplices
    p = points[tri]
    centroids = p.mean(axis=1)
    signed = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                    - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))

    keep = np.abs(signed) > 1.0e-14 * target_h**2
    if not cavity.is_empty:
        keep &= ~cavity.contains(centroids)
    tri = tri[keep]
    signed = signed[keep]

    # Counter-clockwise orientation
    cw = signed < 0.0
    tri[cw] = tri[cw][:, [0, 2, 1]]

    # Compact unused vertices
    used = np.unique(tri)
    remap = np.full(points.shape[0], -1, dtype=np.int64)
    remap[used] = np.arange(used.size)

    mesh = Mesh(points[used], remap[tri], radius=radius)

    logger.debug(f'Generated mesh with {mesh.nverts} vertices and {mesh.ntris} triangles at h={target_h}')

    return mesh

##############
# Refinement #
##############

def _refinement_edges(mesh:Mesh) -> np.ndarray:
    '''Local index of the longest edge of every triangle. Ties within relative
    tolerance 1e-12 go to the smallest edge id.
    '''
    lengths = mesh.edge_lengths[mesh.triangle_edges]
    longest = lengths.max(axis=1)
    candidate = lengths >= longest[:, None] * (1.0 - 1.0e-12)
    ids = np.where(candidate, mesh.triangle_edges, np.iinfo(np.int64).max)
    return np.argmin(ids, axis=1)

def _bisect(p0, p1, p2, e0, e1, e2, mids, marked) -> list:
    '''Split triangle (p0, p1, p2) whose local edge e0 = (p0, p1) is its
    refinement edge. Children containing a marked original edge are bisected
    once more.
    '''
    m = mids[e0]
    children = []

    # Child (m, p1, p2) holds the original edge (p1, p2)
    if marked[e1]:
        children.append((m, p1, mids[e1]))
        children.append((m, mids[e1], p2))
    else:
        children.append((m, p1, p2))

    # Child (p0, m, p2) holds the original edge (p2, p0)
    if marked[e2]:
        children.append((m, p2, mids[e2]))
        children.append((m, mids[e2], p0))
    else:
        children.append((p0, m, p2))

    return children

def refine_marked(mesh:Mesh, marked, fields:typing.Sequence=(), h_min:float=pcc.H_MIN,
                  snap_to_circle:bool=False, max_vertices:int=pcc.MAX_VERTICES) -> typing.Tuple[Mesh, list]:
    '''Refine marked triangles by longest-edge bisection with conformity
    closure.

    The refinement edge of every marked triangle is marked, then the
    refinement edge of every triangle with a marked edge is marked until no
    change occurs. Each affected triangle is split into 2, 3 or 4 children.
    Triangles with diameter below ``2*h_min`` are not seeded, so every child
    has diameter at least ``h_min``.

    Args:
        mesh (Mesh): Mesh to refine
        marked (array_like): Indices or boolean mask of marked triangles
        fields (list): Nodal fields (``NodalField`` or arrays) to transfer
        h_min (float): Minimum element diameter
        snap_to_circle (bool): Project new OUTER vertices onto the circle
        max_vertices (int): Vertex cap

    Returns:
        tuple: Refined mesh and transferred fields. The input mesh and fields
            are returned unchanged when nothing is refined.

    Raises:
        ResourceLimitError: If the refined mesh would exceed the vertex cap.
    '''

    marked = np.asarray(marked)
    if marked.dtype == bool:
        marked = np.flatnonzero(marked)
    marked = np.unique(marked.astype(np.int64))

    if marked.size and (marked.min() < 0 or marked.max() >= mesh.ntris):
        raise ValueError('Marked element indices out of range.')

    fields = list(fields)

    seeds = marked[mesh.element_diameters[marked] >= 2.0 * h_min]
    if seeds.size == 0:
        return mesh, fields

    ref = _refinement_edges(mesh)
    tri_edges = mesh.triangle_edges
    rows = np.arange(mesh.ntris)

    marked_edge = np.zeros(mesh.edges.shape[0], dtype=bool)
    marked_edge[tri_edges[seeds, ref[seeds]]] = True

    while True:
        has = marked_edge[tri_edges].any(axis=1)
        need = has & ~marked_edge[tri_edges[rows, ref]]
        if not np.any(need):
            break
        marked_edge[tri_edges[need, ref[need]]] = True

    new_edges = np.flatnonzero(marked_edge)
    n_new = mesh.nverts + new_edges.size
    if n_new > max_vertices:
        raise ResourceLimitError(n_new, max_vertices)

    mids = np.full(mesh.edges.shape[0], -1, dtype=np.int64)
    mids[new_edges] = mesh.nverts + np.arange(new_edges.size)

    ends = mesh.edges[new_edges]
    midpoints = 0.5 * (mesh.vertices[ends[:, 0]] + mesh.vertices[ends[:, 1]])

    # Split boundary edges
    boundary = mesh.boundary_edges
    bids = mesh.edge_ids(boundary[:, 0], boundary[:, 1])
    split = marked_edge[bids]
    bm = mids[bids[split]]
    new_boundary = np.vstack([
        boundary[~split],
        np.column_stack([boundary[split, 0], bm, boundary[split, 2]]),
        np.column_stack([bm, boundary[split, 1], boundary[split, 2]]),
    ])

    if snap_to_circle:
        outer_split = bm[boundary[split, 2] == BoundaryMarker.OUTER] - mesh.nverts
        pts = midpoints[outer_split]
        midpoints[outer_split] = mesh.radius * pts / np.linalg.norm(pts, axis=1)[:, None]

    vertices = np.vstack([mesh.vertices, midpoints])

    # Split triangles
    refined = np.flatnonzero(marked_edge[tri_edges].any(axis=1))
    keep = np.ones(mesh.ntris, dtype=bool)
    keep[refined] = False

    children = []
    for t in refined:
        k = ref[t]
        verts = np.roll(mesh.triangles[t], -k)
        eids = np.roll(tri_edges[t], -k)
        children.extend(_bisect(verts[0], verts[1], verts[2], eids[0], eids[1], eids[2], mids, marked_edge))

    triangles = np.vstack([mesh.triangles[keep], np.asarray(children, dtype=np.int64)])

    new_mesh = Mesh(vertices, triangles, boundary=new_boundary, radius=mesh.radius)

    logger.debug(f'Refined {seeds.size} marked of {refined.size} split triangles, {mesh.nverts} -> {new_mesh.nverts} vertices')

    transferred = []
    for field in fields:
        values = np.asarray(getattr(field, 'values', field), dtype=float)
        if values.shape[0] != mesh.nverts:
            raise ValueError(f'Field length {values.shape[0]} does not match vertex count {mesh.nverts}')
        new_values = np.concatenate([values, 0.5 * (values[ends[:, 0]] + values[ends[:, 1]])])
        if isinstance(field, np.ndarray):
            transferred.append(new_values)
        else:
            transferred.append(field.__class__(new_mesh, new_values))

    return new_mesh, transferred

def mark_by_gradient(mesh:Mesh, v, fraction:float=pcc.MARK_FRACTION, h_min:float=pcc.H_MIN) -> np.ndarray:
    '''Select the elements with the steepest phase field gradient.

    Args:
        mesh (Mesh): Mesh carrying ``v``
        v (NodalField): Phase field
        fraction (float): Fraction of elements in (0, 1] to select
        h_min (float): Elements with diameter not above ``h_min`` are excluded

    Returns:
        np.ndarray: Sorted element indices with gradient magnitude at or above
            the ``1 - fraction`` quantile. Constant fields give an empty set.
    '''

    if not 0.0 < fraction <= 1.0:
        raise ValueError(f'Marking fraction must lie in (0, 1], got {fraction}')

    values = np.asarray(getattr(v, 'values', v), dtype=float)
    mag = np.linalg.norm(mesh.gradient(values), axis=1)

    if not np.any(mag > 0.0):
        return np.zeros(0, dtype=np.int64)

    threshold = np.quantile(mag, 1.0 - fraction)
    selected = (mag >= threshold) & (mag > 0.0) & (mesh.element_diameters > h_min)

    return np.flatnonzero(selected)

############
# Transfer #
############

def boundary_trace_interpolate(src_mesh:Mesh, src_field, dst_mesh:Mesh) -> np.ndarray:
    '''Interpolate the outer boundary trace of a field onto the OUTER vertices
    of another mesh of the same disk.

    Each destination vertex takes the value of the source trace at its own
    polar angle, by periodic linear interpolation between the two source
    OUTER vertices that bracket that angle. On a disk the polar angle is a
    monotone parameter of the boundary, so this matches interpolation along
    the source OUTER polyline up to the chord-versus-arc difference; no
    nearest-point search on the polyline is done.

    Args:
        src_mesh (Mesh): Source mesh
        src_field (NodalField): Field on the source mesh
        dst_mesh (Mesh): Destination mesh

    Returns:
        np.ndarray: Values at ``dst_mesh.outer_vertices``

    Raises:
        ValueError: If the outer radii differ.
    '''

    if abs(src_mesh.radius - dst_mesh.radius) > OUTER_TOL * max(src_mesh.radius, dst_mesh.radius):
        raise ValueError(f'Outer radii differ: {src_mesh.radius} vs {dst_mesh.radius}')

    values = np.asarray(getattr(src_field, 'values', src_field), dtype=float)
    src = src_mesh.outer_vertices
    dst = dst_mesh.outer_vertices

    return interpolate_periodic(vertex_angles(src_mesh.vertices[src]), values[src],
                                vertex_angles(dst_mesh.vertices[dst]))

def interpolate_periodic(theta_src:np.ndarray, values:np.ndarray, theta_dst:np.ndarray) -> np.ndarray:
    '''Linear interpolation of a 2*pi periodic function given at sorted angles.
    '''
    return np.interp(theta_dst, theta_src, values, period=2.0 * math.pi)
