import os

# Pin BLAS to one thread before numpy loads anywhere, so training and
# evaluation are bit-reproducible (acceptance runs single-threaded).
for _var in (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
):
    os.environ.setdefault(_var, "1")
