from .sosgate import main
