from .routes import inference
from .models import *

__all__ = ['inference']
