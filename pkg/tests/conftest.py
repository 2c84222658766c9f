"""Shared fixtures and the acceptance summary printed after the run."""

import numpy as np
import pytest

import rdpsi
from rdpsi.info_measures import mutual_information
from rdpsi.prob_core import Channel

_ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def record_check():
    """Collect one summary line per acceptance check for the final report."""

    def _record(number: int, passed: bool, detail: str) -> None:
        status = "PASS" if passed else "FAIL"
        _ACCEPTANCE_LINES[number] = f"[{status}] check {number:02d}: {detail}"

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("-", "acceptance checks")
    for number in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[number])


@pytest.fixture(scope="session")
def dsbs_operating_point():
    """Frozen DSBS(0.2) operating point used by the pipeline checks.

    Encoder: BSC(0.05) from X to V. Decoder: emit V with probability 0.3,
    else copy Z; symmetric, so the output marginal is exactly uniform and
    the realism gap is zero. Distortion 0.155, I(Z;V) about 0.222 bits.
    epsilon is picked so the planned virtual-message rate lands at 0.126
    bits, which floors to 2 candidates at n=8 and 4 at n=16.
    """
    source = rdpsi.SourceSpec.dsbs(0.2)
    alpha, w = 0.05, 0.7
    enc = Channel(
        (("X", 2),), (("V", 2),),
        np.array([[1 - alpha, alpha], [alpha, 1 - alpha]]),
    )
    dec_probs = np.zeros((2, 2, 2))
    for z in range(2):
        for v in range(2):
            dec_probs[z, v, v] += 1 - w
            dec_probs[z, v, z] += w
    dec = Channel((("Z", 2), ("V", 2)), (("Y", 2),), dec_probs)
    point = rdpsi.assemble(source, enc, dec)
    region = rdpsi.evaluate(point, source)
    i_zv = mutual_information(point.joint, ["Z"], ["V"])
    epsilon = 2.0 * (i_zv - 0.126)
    return source, point, region, epsilon
