"""GEMM problem instances."""

from dataclasses import dataclass

# ids follow the evaluation table: square, short-fat, rank-K, transposed pair, mid
_BUILTIN = (
    ("I", (8192, 8192, 8192)),
    ("II", (1024, 1024, 8192)),
    ("III", (8, 8, 8192)),
    ("IV", (8, 8192, 1024)),
    ("V", (8192, 8, 1024)),
    ("VI", (512, 256, 256)),
)

MLP_LAYERS = (784, 512, 256, 128, 10)

_U64_MAX = 2**64 - 1


@dataclass(frozen=True)
class GemmWorkload:
    """C[m][n] += A[m][k] * B[k][n]."""

    m: int
    n: int
    k: int

    def __post_init__(self):
        for name in ("m", "n", "k"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ValueError(f"workload dimension {name} must be a positive integer, got {v!r}")
        if self.m * self.n * self.k > _U64_MAX:
            raise ValueError("MAC count does not fit in 64 bits")

    @property
    def dims(self):
        return (self.m, self.n, self.k)

    @property
    def mac_count(self):
        return self.m * self.n * self.k

    def transposed(self):
        """The (n, m, k) problem: computes C^T = B^T A^T."""
        return GemmWorkload(self.n, self.m, self.k)

    def to_dict(self):
        return {"m": self.m, "n": self.n, "k": self.k}

    def __str__(self):
        return f"{self.m}x{self.n}x{self.k}"


def workload_gflops(w):
    # one MAC counts as one FLOP, matching the published workload table
    return w.mac_count / 1e9


def builtin_workloads():
    return [(wid, GemmWorkload(*dims)) for wid, dims in _BUILTIN]


def builtin_workload(wid):
    for key, w in builtin_workloads():
        if key == wid.upper():
            return w
    raise KeyError(f"unknown workload id {wid!r}; expected one of {[k for k, _ in _BUILTIN]}")


def mlp_workloads(batch):
    """Fully-connected layers of the 784-512-256-128-10 MLP at a given batch size."""
    if not isinstance(batch, int) or batch < 1:
        raise ValueError(f"batch must be a positive integer, got {batch!r}")
    return [GemmWorkload(batch, n_out, n_in) for n_in, n_out in zip(MLP_LAYERS, MLP_LAYERS[1:])]
