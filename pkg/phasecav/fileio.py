# -*- coding: utf-8 -*-
"""The fileio module reads and writes the file formats of the package: the
plain-text mesh format, nodal field CSV files, legacy VTK exports, contour
polylines, iteration histories and measurement files.

Every writer accepts an optional configuration hash which is embedded as a
``# config_hash: ...`` header line. Floating point values are written with 17
significant digits so that files read back bit-identical.
"""

import json
import logging
import pathlib
import typing
import meshio
import numpy as np

from phasecav.mesh import Mesh
from phasecav.fem import NodalField
from phasecav.measurements import MeasurementSet
from phasecav.data_models.parameters import SourceSpec, ArcSpec

logger = logging.getLogger(__name__)

PathLike = typing.Union[str, pathlib.Path]

FLOAT_FORMAT = '.17g'
"""Format of floating point values in text outputs.
"""

#########
# Utils #
#########

def _fmt(x:float) -> str:
    return format(float(x), FLOAT_FORMAT)

def _header(fp, config_hash:typing.Optional[str], **entries):
    if config_hash is not None:
        fp.write(f'# config_hash: {config_hash}\n')
    for key, value in entries.items():
        fp.write(f'# {key}: {value}\n')

def read_header(filepath:PathLike) -> typing.Dict[str, str]:
    '''Return the ``# key: value`` header entries of a text output file.
    '''
    header = {}
    with open(filepath) as input_file:
        for line in input_file:
            if not line.startswith('#'):
                break
            key, _, value = line[1:].partition(':')
            header[key.strip()] = value.strip()
    return header

def _data_lines(filepath:PathLike) -> typing.List[str]:
    with open(filepath) as input_file:
        return [line.strip() for line in input_file if line.strip() and not line.startswith('#')]

########
# Mesh #
########

def write_mesh(mesh:Mesh, filepath:PathLike, config_hash:typing.Optional[str]=None):
    '''Write a mesh in the plain-text format with sections VERTICES
    (index, x, y), TRIANGLES (index, v0, v1, v2) and BOUNDARY (v0, v1, marker).
    Indices are zero-based.

    Args:
        mesh (Mesh): Mesh
        filepath (str): Output path
        config_hash (str): Optional configuration hash
    '''

    with open(filepath, 'w') as fp:
        _header(fp, config_hash, radius=_fmt(mesh.radius))

        fp.write(f'VERTICES {mesh.nverts}\n')
        for i, (x, y) in enumerate(mesh.vertices):
            fp.write(f'{i} {_fmt(x)} {_fmt(y)}\n')

        fp.write(f'TRIANGLES {mesh.ntris}\n')
        for i, (a, b, c) in enumerate(mesh.triangles):
            fp.write(f'{i} {a} {b} {c}\n')

        fp.write(f'BOUNDARY {mesh.boundary_edges.shape[0]}\n')
        for a, b, m in mesh.boundary_edges:
            fp.write(f'{a} {b} {m}\n')

    logger.debug(f'Wrote mesh with {mesh.nverts} vertices to {filepath}')

def read_mesh(filepath:PathLike) -> Mesh:
    '''Read a mesh written by ``write_mesh``.

    Raises:
        ValueError: If a section is missing or malformed.
    '''

    header = read_header(filepath)
    lines = _data_lines(filepath)

    sections = {}
    pos = 0
    while pos < len(lines):
        name, *count = lines[pos].split()
        if name not in ('VERTICES', 'TRIANGLES', 'BOUNDARY') or len(count) != 1:
            raise ValueError(f'Malformed mesh file {filepath}: unexpected line "{lines[pos]}"')
        n = int(count[0])
        sections[name] = [line.split() for line in lines[pos + 1:pos + 1 + n]]
        if len(sections[name]) != n:
            raise ValueError(f'Malformed mesh file {filepath}: section {name} has fewer than {n} records')
        pos += n + 1

    for name in ('VERTICES', 'TRIANGLES', 'BOUNDARY'):
        if name not in sections:
            raise ValueError(f'Malformed mesh file {filepath}: missing section {name}')

    vertices = np.array([[float(r[1]), float(r[2])] for r in sections['VERTICES']]).reshape(-1, 2)
    triangles = np.array([[int(r[1]), int(r[2]), int(r[3])] for r in sections['TRIANGLES']], dtype=np.int64).reshape(-1, 3)
    boundary = np.array([[int(c) for c in r] for r in sections['BOUNDARY']], dtype=np.int64).reshape(-1, 3)

    radius = float(header['radius']) if 'radius' in header else None

    return Mesh(vertices, triangles, boundary=boundary, radius=radius)

##########
# Fields #
##########

def write_field(v:NodalField, filepath:PathLike, config_hash:typing.Optional[str]=None, name:str='v'):
    '''Write a nodal field as CSV rows (vertex, x, y, value).
    '''

    mesh = v.mesh
    with open(filepath, 'w') as fp:
        _header(fp, config_hash, field=name)
        fp.write('vertex,x,y,value\n')
        for i, ((x, y), val) in enumerate(zip(mesh.vertices, v.values)):
            fp.write(f'{i},{_fmt(x)},{_fmt(y)},{_fmt(val)}\n')

def read_field(filepath:PathLike, mesh:Mesh) -> NodalField:
    '''Read a nodal field CSV written for ``mesh``.

    Raises:
        ValueError: If vertex count or coordinates do not match the mesh.
    '''

    rows = _data_lines(filepath)[1:]
    data = np.array([[float(c) for c in row.split(',')] for row in rows]).reshape(-1, 4)

    if data.shape[0] != mesh.nverts:
        raise ValueError(f'Field file {filepath} has {data.shape[0]} values, mesh has {mesh.nverts} vertices')

    order = data[:, 0].astype(np.int64)
    if not np.array_equal(order, np.arange(mesh.nverts)):
        raise ValueError(f'Field file {filepath} vertex indices are not 0..{mesh.nverts - 1}')

    if not np.allclose(data[:, 1:3], mesh.vertices, rtol=0.0, atol=1.0e-12):
        raise ValueError(f'Field file {filepath} coordinates do not match the mesh')

    return NodalField(mesh, data[:, 3])

def write_vtk(v:NodalField, filepath:PathLike, config_hash:typing.Optional[str]=None, name:str='v'):
    '''Export a nodal field on its mesh as a legacy ASCII VTK unstructured grid.
    The title line carries the configuration hash.
    '''

    mesh = v.mesh
    points = np.column_stack([mesh.vertices, np.zeros(mesh.nverts)])
    grid = meshio.Mesh(points=points, cells=[('triangle', np.asarray(mesh.triangles))],
                       point_data={name: np.asarray(v.values)})
    meshio.write(str(filepath), grid, file_format='vtk', binary=False)

    # Replace the writer's title line, which contains the meshio version
    with open(filepath) as fp:
        lines = fp.readlines()
    lines[1] = f'phasecav {name} config_hash={config_hash or "none"}\n'
    with open(filepath, 'w') as fp:
        fp.writelines(lines)

############
# Contours #
############

def write_contours(polylines:typing.Sequence[np.ndarray], filepath:PathLike, level:float=0.5,
                   config_hash:typing.Optional[str]=None):
    '''Write contour polylines as CSV rows (polyline, point, x, y, closed).
    A closed polyline repeats its first point at the end.
    '''
    with open(filepath, 'w') as fp:
        _header(fp, config_hash, level=_fmt(level))
        fp.write('polyline,point,x,y,closed\n')
        for k, line in enumerate(polylines):
            line = np.asarray(line)
            closed = int(line.shape[0] > 2 and np.array_equal(line[0], line[-1]))
            for j, (x, y) in enumerate(line):
                fp.write(f'{k},{j},{_fmt(x)},{_fmt(y)},{closed}\n')

def read_contours(filepath:PathLike) -> typing.List[np.ndarray]:
    rows = _data_lines(filepath)[1:]
    lines: typing.Dict[int, list] = {}
    for row in rows:
        k, _, x, y, _ = row.split(',')
        lines.setdefault(int(k), []).append((float(x), float(y)))
    return [np.array(lines[k]) for k in sorted(lines)]

###########
# History #
###########

HISTORY_COLUMNS = ('iter', 'J', 'misfit', 'reg', 'tau', 'accepted', 'nverts')
"""Columns of the iteration history CSV.
"""

def write_history(history:typing.Sequence, filepath:PathLike, config_hash:typing.Optional[str]=None):
    '''Write iteration records as CSV with columns iter, J, misfit, reg, tau,
    accepted, nverts.
    '''
    with open(filepath, 'w') as fp:
        _header(fp, config_hash)
        fp.write(','.join(HISTORY_COLUMNS) + '\n')
        for rec in history:
            fp.write(f'{rec.iter},{_fmt(rec.J)},{_fmt(rec.misfit)},{_fmt(rec.reg)},{_fmt(rec.tau)},'
                     f'{int(rec.accepted)},{rec.nverts}\n')

def read_history(filepath:PathLike) -> typing.List[dict]:
    rows = _data_lines(filepath)
    columns = rows[0].split(',')
    records = []
    for row in rows[1:]:
        values = dict(zip(columns, row.split(',')))
        records.append({
            'iter': int(values['iter']),
            'J': float(values['J']),
            'misfit': float(values['misfit']),
            'reg': float(values['reg']),
            'tau': float(values['tau']),
            'accepted': bool(int(values['accepted'])),
            'nverts': int(values['nverts']),
        })
    return records

################
# Measurements #
################

def write_measurements(data:MeasurementSet, filepath:PathLike, config_hash:typing.Optional[str]=None):
    '''Write a measurement file: ``#``-prefixed metadata lines followed by CSV
    rows (source, vertex, x, y, value).
    '''

    config_hash = config_hash if config_hash is not None else data.config_hash
    points = data.points_array()
    traces = data.trace_array()

    with open(filepath, 'w') as fp:
        _header(fp, config_hash,
                seed=data.seed,
                eta=_fmt(data.eta),
                noise_free=str(data.noise_free).lower(),
                rng=data.rng,
                sources=json.dumps(data.sources.model_dump(mode='json'), sort_keys=True),
                sigma=json.dumps(data.arc.model_dump(mode='json'), sort_keys=True),
                interpolation_error='none' if data.interpolation_error is None else _fmt(data.interpolation_error),
                support_fraction=json.dumps(data.support_fraction))
        fp.write('source,vertex,x,y,value\n')
        for i in range(data.num_sources):
            for j, vid in enumerate(data.sigma_vertices):
                fp.write(f'{i},{vid},{_fmt(points[j, 0])},{_fmt(points[j, 1])},{_fmt(traces[i, j])}\n')

    logger.debug(f'Wrote {data.num_sources} traces on {len(data.sigma_vertices)} vertices to {filepath}')

def read_measurements(filepath:PathLike) -> MeasurementSet:
    '''Read a measurement file written by ``write_measurements``.

    Raises:
        ValueError: If metadata is missing or the rows are inconsistent.
    '''

    header = read_header(filepath)
    for key in ('seed', 'eta', 'sources', 'sigma'):
        if key not in header:
            raise ValueError(f'Measurement file {filepath} is missing the "{key}" header entry')

    rows = _data_lines(filepath)[1:]
    traces: typing.Dict[int, list] = {}
    vertices: typing.Dict[int, list] = {}
    points: typing.Dict[int, list] = {}

    for row in rows:
        s, vid, x, y, value = row.split(',')
        s = int(s)
        traces.setdefault(s, []).append(float(value))
        vertices.setdefault(s, []).append(int(vid))
        points.setdefault(s, []).append([float(x), float(y)])

    if not traces:
        raise ValueError(f'Measurement file {filepath} contains no traces')

    first = min(traces)
    for s in traces:
        if vertices[s] != vertices[first]:
            raise ValueError(f'Measurement file {filepath}: source {s} uses different arc vertices')

    interp = header.get('interpolation_error', 'none')
    support = json.loads(header.get('support_fraction', 'null'))

    return MeasurementSet(
        traces=[traces[s] for s in sorted(traces)],
        sigma_vertices=vertices[first],
        sigma_points=points[first],
        sources=SourceSpec.model_validate(json.loads(header['sources'])),
        arc=ArcSpec.model_validate(json.loads(header['sigma'])),
        eta=float(header['eta']),
        seed=int(header['seed']),
        rng=header.get('rng', 'PCG64'),
        interpolation_error=None if interp == 'none' else float(interp),
        support_fraction=support,
        config_hash=header.get('config_hash'),
    )
