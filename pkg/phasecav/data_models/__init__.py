from .geometry import (
    DiskComponent,
    PolygonComponent,
    CavitySpec,
)

from .parameters import (
    Potential,
    AdjointWeight,
    LinearSolver,
    Scheme,
    NewtonParams,
    FictitiousParams,
    PhaseFieldParams,
    StepController,
    StoppingSpec,
    Schedule,
    SourceSpec,
    ArcSpec,
    MeshSettings,
)

from .config import (
    RunConfig
)
