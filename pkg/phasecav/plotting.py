"""Optional figures of reconstructed phase fields. Requires matplotlib, which
is imported on first use (see requirements/requirements-plots.txt).
"""

import logging
import pathlib
import typing
import numpy as np

from phasecav.fem import NodalField
from phasecav.analysis import extract_contour
from phasecav.data_models.geometry import CavitySpec

logger = logging.getLogger(__name__)

def _pyplot():
    try:
        import matplotlib
        matplotlib.use('Agg')
        import matplotlib.pyplot as plt
    except ImportError as error:
        raise RuntimeError('Plotting requires matplotlib. Install it with "pip install -r requirements/requirements-plots.txt".') from error
    return plt

def plot_reconstruction(v:NodalField, filepath:typing.Union[str, pathlib.Path],
                        truth:typing.Optional[CavitySpec]=None, level:float=0.5, title:str=''):
    '''Write a PNG with the filled phase field, its ``level`` contour and the
    true cavity boundary dashed when given.
    '''

    plt = _pyplot()
    mesh = v.mesh

    fig, ax = plt.subplots(1, 1, figsize=(6, 6))
    filled = ax.tricontourf(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles, v.values,
                            levels=np.linspace(0.0, 1.0, 21), cmap='viridis')
    fig.colorbar(filled, ax=ax, shrink=0.8)

    for line in extract_contour(v, level):
        ax.plot(line[:, 0], line[:, 1], 'w-', linewidth=1.5)

    if truth is not None:
        for comp in truth.components:
            pts = comp.boundary_points(mesh.radius * 1.0e-2)
            pts = np.vstack([pts, pts[:1]])
            ax.plot(pts[:, 0], pts[:, 1], 'r--', linewidth=1.0)

    theta = np.linspace(0.0, 2.0 * np.pi, 361)
    ax.plot(mesh.radius * np.cos(theta), mesh.radius * np.sin(theta), 'k-', linewidth=0.8)
    ax.set_aspect('equal')
    ax.set_title(title)
    ax.axis('off')

    fig.savefig(filepath, dpi=150, bbox_inches='tight')
    plt.close(fig)

    logger.info(f'Wrote figure {filepath}')
