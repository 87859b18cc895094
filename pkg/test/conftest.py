from .fixtures.meshes import *
from .fixtures.measurements import *
from .fixtures.configs import *
