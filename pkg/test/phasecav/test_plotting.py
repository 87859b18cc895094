# Test Imports
import pytest
import numpy as np

# Modules Under Test
from phasecav.fem import NodalField
from phasecav.plotting import plot_reconstruction

def test_plot_reconstruction(coarse_mesh, disk_cavity, tmp_path):
    pytest.importorskip('matplotlib')

    v = NodalField.interpolate(coarse_mesh, lambda p: np.clip(np.linalg.norm(p, axis=1) / 0.6, 0.0, 1.0))
    filepath = tmp_path / 'reconstruction.png'

    plot_reconstruction(v, filepath, truth=disk_cavity, title='phase 0')

    assert filepath.exists()
    assert filepath.read_bytes()[:8] == b'\x89PNG\r\n\x1a\n'
