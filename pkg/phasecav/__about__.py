__version__      = "0.1.0"
__author__       = "Duncan Eddy"
__author_email__ = "duncan.eddy@gmail.com"
__description__  = "A Python phase-field library for reconstructing insulating cavities from boundary measurements."
__url__          = "https://github.com/duncaneddy/phasecav"
