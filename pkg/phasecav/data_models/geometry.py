"""The geometry module provides data model classes describing the cavity shapes
used to synthesize data and to score reconstructions.
"""

import math
import typing
import pydantic
import numpy as np

from pydantic import Field
from typing import List
from typing_extensions import Annotated, Literal

from phasecav.utils import segment_distances, points_in_polygon, polygon_area

planar_point = Annotated[List[float], Field(min_length=2, max_length=2)]

class DiskComponent(pydantic.BaseModel):
    '''Disk-shaped cavity component.
    '''
    kind: Literal['disk'] = pydantic.Field('disk', description='Component type')
    center: planar_point = pydantic.Field([0.0, 0.0], description='Disk center. Units: [domain]')
    radius: Annotated[float, Field(gt=0.0)] = pydantic.Field(..., description='Disk radius. Units: [domain]')

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    @property
    def perimeter(self) -> float:
        return 2.0 * math.pi * self.radius

    def contains(self, points:np.ndarray) -> np.ndarray:
        '''Return mask of points strictly inside the disk.
        '''
        points = np.atleast_2d(points)
        return np.linalg.norm(points - np.asarray(self.center), axis=1) < self.radius

    def boundary_distance(self, points:np.ndarray) -> np.ndarray:
        '''Unsigned distance of points to the disk boundary circle.
        '''
        points = np.atleast_2d(points)
        return np.abs(np.linalg.norm(points - np.asarray(self.center), axis=1) - self.radius)

    def boundary_points(self, spacing:float) -> np.ndarray:
        '''Counter-clockwise points on the boundary circle with arc spacing
        close to ``spacing``.
        '''
        n = max(8, int(math.ceil(self.perimeter / spacing)))
        theta = 2.0 * math.pi * np.arange(n) / n
        return np.asarray(self.center) + self.radius * np.column_stack([np.cos(theta), np.sin(theta)])

    def max_norm(self) -> float:
        '''Largest distance of a component point from the origin.
        '''
        return float(np.linalg.norm(self.center)) + self.radius

class PolygonComponent(pydantic.BaseModel):
    '''Polygonal cavity component. Vertices may be given in either orientation,
    they are stored counter-clockwise.
    '''
    kind: Literal['polygon'] = pydantic.Field('polygon', description='Component type')
    vertices: Annotated[List[planar_point], Field(min_length=3)] = pydantic.Field(..., description='Polygon vertices. Units: [domain]')

    @pydantic.field_validator('vertices')
    @classmethod
    def orient_vertices(cls, vertices):
        area = polygon_area(np.asarray(vertices))

        if area == 0.0:
            raise ValueError('Polygon cavity has zero area.')

        return vertices if area > 0 else vertices[::-1]

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    @property
    def area(self) -> float:
        return polygon_area(self.array)

    @property
    def perimeter(self) -> float:
        pts = self.array
        return float(np.sum(np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)))

    def contains(self, points:np.ndarray) -> np.ndarray:
        return points_in_polygon(points, self.array)

    def boundary_distance(self, points:np.ndarray) -> np.ndarray:
        pts = self.array
        return segment_distances(np.ascontiguousarray(np.atleast_2d(points), dtype=float),
                                 pts, np.roll(pts, -1, axis=0))

    def boundary_points(self, spacing:float) -> np.ndarray:
        pts = self.array
        out = []

        for a, b in zip(pts, np.roll(pts, -1, axis=0)):
            n = max(1, int(math.ceil(np.linalg.norm(b - a) / spacing)))
            t = np.arange(n)[:, None] / n
            out.append(a + t * (b - a))

        return np.vstack(out)

    def max_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.array, axis=1)))

CavityComponent = Annotated[typing.Union[DiskComponent, PolygonComponent], Field(discriminator='kind')]

class CavitySpec(pydantic.BaseModel):
    '''Union of disjoint cavity components inside the disk domain.

    The distance constraints are checked against the domain radius with
    :meth:`validate_in_domain`; pairwise separation is checked on construction.
    '''
    components: List[CavityComponent] = pydantic.Field([], description='Cavity components')
    d0: Annotated[float, Field(gt=0.0)] = pydantic.Field(0.05, description='Separation distance d0. Components must be d0 apart and 2*d0 from the outer boundary.')

    @pydantic.model_validator(mode='after')
    def validate_separation(self):
        for i in range(len(self.components)):
            for j in range(i + 1, len(self.components)):
                dist = component_distance(self.components[i], self.components[j], self.d0)
                if dist < self.d0:
                    raise ValueError(f'Cavity components {i} and {j} are {dist:.4g} apart, less than d0={self.d0}.')
        return self

    @property
    def area(self) -> float:
        return float(sum(c.area for c in self.components))

    @property
    def perimeter(self) -> float:
        return float(sum(c.perimeter for c in self.components))

    @property
    def is_empty(self) -> bool:
        return len(self.components) == 0

    def contains(self, points:np.ndarray) -> np.ndarray:
        '''Mask of points inside any component.
        '''
        points = np.atleast_2d(np.asarray(points, dtype=float))
        mask = np.zeros(points.shape[0], dtype=bool)
        for comp in self.components:
            mask |= comp.contains(points)
        return mask

    def boundary_distance(self, points:np.ndarray) -> np.ndarray:
        '''Distance of points to the nearest component boundary.
        '''
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.is_empty:
            return np.full(points.shape[0], np.inf)
        return np.min([c.boundary_distance(points) for c in self.components], axis=0)

    def boundary_points(self, spacing:float) -> np.ndarray:
        if self.is_empty:
            return np.zeros((0, 2))
        return np.vstack([c.boundary_points(spacing) for c in self.components])

    def validate_in_domain(self, radius:float) -> None:
        '''Check that every component lies at least 2*d0 away from the outer
        boundary of the disk of the given radius.

        Args:
            radius (float): Domain radius

        Raises:
            ValueError: If a component is too close to the outer boundary.
        '''

        for idx, comp in enumerate(self.components):
            gap = radius - comp.max_norm()
            if gap < 2.0 * self.d0:
                raise ValueError(f'Cavity component {idx} is {gap:.4g} from the outer boundary, less than 2*d0={2.0*self.d0}.')

def component_distance(a, b, d0:float) -> float:
    '''Approximate distance between two cavity components from boundary
    samples at spacing d0/20. Overlapping components have distance 0.
    '''

    if isinstance(a, DiskComponent) and isinstance(b, DiskComponent):
        gap = np.linalg.norm(np.asarray(a.center) - np.asarray(b.center)) - a.radius - b.radius
        return max(float(gap), 0.0)

    spacing = d0 / 20.0
    pa = a.boundary_points(spacing)
    pb = b.boundary_points(spacing)

    if np.any(b.contains(pa)) or np.any(a.contains(pb)):
        return 0.0

    return float(np.min(b.boundary_distance(pa)))
