"""Instance/background relation attention for visual question answering.

Pipeline: decode grid-cell instance masks, suppress duplicates with
Matrix-NMS, split the image into instance and background views, and answer
with a two-stage bilinear relation attention model trained by SGD.
"""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
