import os

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from flashx.hardware import HardwareConfig
from flashx.mapping import Directive, Mapping
from flashx.workload import GemmWorkload

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", max_examples=600, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@st.composite
def workloads(draw, hi=7):
    return GemmWorkload(*(draw(st.integers(1, hi)) for _ in range(3)))


@st.composite
def arbitrary_mappings(draw, pe_max=12):
    """Structurally legal mappings with no style constraint, plus a PE count."""
    pes = draw(st.integers(1, pe_max))
    lam = draw(st.integers(1, pes))
    oo = draw(st.permutations("MNK"))
    io = draw(st.permutations("MNK"))
    s = draw(st.sampled_from("MNK"))
    q = draw(st.sampled_from([d for d in "MNK" if d != s] + [None]))
    outer_sz = {d: draw(st.integers(1, 8)) for d in "MNK"}
    inner_sz = {d: draw(st.integers(1, outer_sz[d])) for d in "MNK"}
    outer = tuple(Directive("S" if d == s else "T", d, outer_sz[d]) for d in oo)
    inner = tuple(Directive("S" if d == q else "T", d, inner_sz[d]) for d in io)
    return Mapping(outer, lam, inner), pes


def roomy_hw(pes, bw=4.0):
    return HardwareConfig(pe_count=pes, s1_bytes=512, s2_bytes=4096, noc_bandwidth_bytes_per_cycle=bw)


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE_LINES = []


def record(num, title, ok, detail=""):
    line = f"acceptance {num:02d} {title}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
