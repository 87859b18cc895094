# Test Imports
import pytest
from pytest import approx
import numpy as np
import meshio

# Modules Under Test
from phasecav.fem import NodalField
from phasecav.optimizer import IterationRecord
from phasecav.fileio import *

def test_mesh_file(disk_cavity_mesh, tmp_path):
    path = tmp_path / 'mesh.txt'
    write_mesh(disk_cavity_mesh, path, config_hash='abc123')

    header = read_header(path)
    assert header['config_hash'] == 'abc123'
    assert float(header['radius']) == disk_cavity_mesh.radius

    mesh = read_mesh(path)
    assert np.array_equal(mesh.vertices, disk_cavity_mesh.vertices)
    assert np.array_equal(mesh.triangles, disk_cavity_mesh.triangles)
    assert np.array_equal(mesh.boundary_edges, disk_cavity_mesh.boundary_edges)
    assert mesh.radius == disk_cavity_mesh.radius
    assert mesh.cavity_edges.shape == disk_cavity_mesh.cavity_edges.shape

def test_mesh_file_malformed(coarse_mesh, tmp_path):
    path = tmp_path / 'mesh.txt'
    write_mesh(coarse_mesh, path)

    text = path.read_text()
    path.write_text(text[:text.index('BOUNDARY')])
    with pytest.raises(ValueError):
        read_mesh(path)

    path.write_text('FACES 0\n')
    with pytest.raises(ValueError):
        read_mesh(path)

def test_field_file(coarse_mesh, tmp_path):
    v = NodalField.interpolate(coarse_mesh, lambda p: np.sin(p[:, 0]) / 3.0 + 0.5)
    path = tmp_path / 'v.csv'
    write_field(v, path, config_hash='abc123')

    assert read_header(path)['config_hash'] == 'abc123'
    assert np.array_equal(read_field(path, coarse_mesh).values, v.values)

def test_field_file_mismatch(coarse_mesh, disk_mesh, tmp_path):
    path = tmp_path / 'v.csv'
    write_field(NodalField.constant(coarse_mesh, 0.5), path)

    with pytest.raises(ValueError):
        read_field(path, disk_mesh)

    # Same vertex count, shifted coordinates
    lines = path.read_text().splitlines()
    i, x, y, val = lines[-1].split(',')
    lines[-1] = f'{i},{float(x) + 0.1},{y},{val}'
    path.write_text('\n'.join(lines) + '\n')
    with pytest.raises(ValueError):
        read_field(path, coarse_mesh)

def test_vtk(coarse_mesh, tmp_path):
    v = NodalField.interpolate(coarse_mesh, lambda p: p[:, 0]**2)
    path = tmp_path / 'v.vtk'
    write_vtk(v, path, config_hash='abc123')

    lines = path.read_text().splitlines()
    assert lines[0].startswith('# vtk DataFile')
    assert lines[1] == 'phasecav v config_hash=abc123'
    assert 'ASCII' in lines[2]

    grid = meshio.read(str(path))
    assert grid.points.shape == (coarse_mesh.nverts, 3)
    assert np.asarray(grid.point_data['v']).reshape(-1) == approx(v.values)

def test_contours(tmp_path):
    closed = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    open_line = np.array([[0.5, 0.5], [0.25, 0.75]])
    path = tmp_path / 'contour.csv'
    write_contours([closed, open_line], path, level=0.5, config_hash='abc123')

    assert float(read_header(path)['level']) == 0.5
    rows = path.read_text().splitlines()
    assert rows[2] == 'polyline,point,x,y,closed'
    assert rows[3].endswith(',1') and rows[-1].endswith(',0')

    lines = read_contours(path)
    assert len(lines) == 2
    assert np.array_equal(lines[0], closed)
    assert np.array_equal(lines[1], open_line)

def test_empty_contours(tmp_path):
    path = tmp_path / 'contour.csv'
    write_contours([], path)
    assert read_contours(path) == []

def test_history(tmp_path):
    history = [
        IterationRecord(iter=0, J=0.1, misfit=0.1, reg=0.0, tau=1.0, accepted=True, nverts=100),
        IterationRecord(iter=1, J=0.2, misfit=0.2, reg=1.0/3.0, tau=1.0, accepted=False, nverts=100),
        IterationRecord(iter=2, J=0.05, misfit=0.04, reg=1.0e-7, tau=0.5, accepted=True, nverts=130, phase=1),
    ]
    path = tmp_path / 'history.csv'
    write_history(history, path, config_hash='abc123')

    rows = path.read_text().splitlines()
    assert rows[1] == ','.join(HISTORY_COLUMNS)

    records = read_history(path)
    assert [r['iter'] for r in records] == [0, 1, 2]
    assert [r['accepted'] for r in records] == [True, False, True]
    assert records[1]['reg'] == 1.0/3.0
    assert records[2]['nverts'] == 130

def test_measurement_file(noisy_measurements, tmp_path):
    path = tmp_path / 'measurements.csv'
    data = noisy_measurements.model_copy(update={'support_fraction': [0.9, 0.9, 0.9, 0.9]})
    write_measurements(data, path, config_hash='abc123')

    header = read_header(path)
    assert header['seed'] == '7'
    assert header['noise_free'] == 'false'
    assert header['rng'] == 'PCG64'

    loaded = read_measurements(path)
    assert loaded.config_hash == 'abc123'
    assert loaded.model_copy(update={'config_hash': None}) == data

def test_measurement_file_missing_header(noisy_measurements, tmp_path):
    path = tmp_path / 'measurements.csv'
    write_measurements(noisy_measurements, path)

    path.write_text('\n'.join(l for l in path.read_text().splitlines() if not l.startswith('# seed')) + '\n')
    with pytest.raises(ValueError):
        read_measurements(path)
