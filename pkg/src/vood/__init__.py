"""vood: mixup-trained classifiers with an auxiliary outlier class,
out-of-distribution detector benchmarks, and an exact MAC/memory cost
profiler, all on a small taped autodiff engine."""

from ._kernels import BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"
