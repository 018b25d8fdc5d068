"""Optional external SDP backend speaking the sparse SDPA file format.

The problem is written as a .dat-s file whose dual is our feasibility
problem: find block-diagonal Y >= 0 with tr(F_k Y) = b_k, maximizing
tr(F0 Y) where F0 carries the (negated) trace regularization.  Free scalar
unknowns become a y+ / y- split inside one extra diagonal block, with a tiny
objective weight that keeps the split bounded.  The solution reader
understands the csdp output layout: one line of dual values, then sparse
"matno blkno i j value" entries where matno 2 is the primal matrix.

The adapter shares the builtin solver's interface; status is re-derived
from an independently computed residual, never trusted from the subprocess.
"""

from __future__ import annotations

import subprocess
import tempfile
from pathlib import Path

import numpy as np

from .sdp import SdpProblem, SdpSolution, SdpStatus

FREE_SPLIT_WEIGHT = 1e-8


def write_sdpa(prob: SdpProblem, path: str | Path, trace_reg: float = 1e-6) -> None:
    """Write the problem in sparse SDPA (.dat-s) format."""
    m = prob.constraint_count
    dims = list(prob.block_dims)
    f = prob.free_count
    blocks = [d for d in dims]
    if f:
        blocks.append(-2 * f)  # diagonal block for the free-variable split

    lines = [str(m), str(len(blocks))]
    lines.append(" ".join(str(d) for d in blocks))
    lines.append(" ".join(repr(float(v)) for v in prob.rhs))

    entries: list[str] = []

    def emit(matno: int, blkno: int, i: int, j: int, value: float) -> None:
        if value != 0.0:
            entries.append(f"{matno} {blkno} {i} {j} {value!r}")

    # F0 = -C: maximizing tr(F0 Y) minimizes the trace regularization.
    for b, d in enumerate(dims):
        for i in range(d):
            emit(0, b + 1, i + 1, i + 1, -trace_reg)
    if f:
        for i in range(2 * f):
            emit(0, len(dims) + 1, i + 1, i + 1, -FREE_SPLIT_WEIGHT)

    for k in range(m):
        for b, d in enumerate(dims):
            Ab = prob.A[b][k]
            for i in range(d):
                for j in range(i, d):
                    emit(k + 1, b + 1, i + 1, j + 1, float(Ab[i, j]))
        if f:
            for i in range(f):
                coeff = float(prob.E[k, i])
                emit(k + 1, len(dims) + 1, i + 1, i + 1, coeff)
                emit(k + 1, len(dims) + 1, f + i + 1, f + i + 1, -coeff)

    Path(path).write_text("\n".join(lines + entries) + "\n")


def read_solution(path: str | Path, prob: SdpProblem) -> tuple[list[np.ndarray], np.ndarray]:
    """Read a csdp-style solution file back into block values and free values."""
    text = Path(path).read_text().split("\n")
    dims = list(prob.block_dims)
    f = prob.free_count
    blocks = [np.zeros((d, d)) for d in dims]
    split = np.zeros(2 * f)
    for line in text[1:]:  # first line is the dual vector
        parts = line.split()
        if len(parts) != 5:
            continue
        matno, blkno, i, j = (int(x) for x in parts[:4])
        value = float(parts[4])
        if matno != 2:
            continue
        if blkno <= len(dims):
            blocks[blkno - 1][i - 1, j - 1] = value
            blocks[blkno - 1][j - 1, i - 1] = value
        elif f and i == j:
            split[i - 1] = value
    free = split[:f] - split[f:] if f else np.zeros(0)
    return blocks, free


class ExternalSdpSolver:
    """Adapter with the builtin solve() signature, backed by a subprocess."""

    def __init__(self, binary: str):
        self.binary = binary

    def solve(self, prob: SdpProblem, tol: float = 1e-8, max_iter: int = 200,
              trace_reg: float = 1e-6, deadline: float | None = None) -> SdpSolution:
        with tempfile.TemporaryDirectory(prefix="psatz-sdpa-") as tmp:
            dat = Path(tmp) / "problem.dat-s"
            out = Path(tmp) / "problem.sol"
            write_sdpa(prob, dat, trace_reg)
            try:
                proc = subprocess.run(
                    [self.binary, str(dat), str(out)],
                    capture_output=True,
                    text=True,
                    timeout=max(1.0, 30.0 * max_iter / 200),
                )
            except (OSError, subprocess.TimeoutExpired) as exc:
                return SdpSolution([], np.zeros(prob.free_count),
                                   SdpStatus.NUMERICAL_FAILURE, float("inf"),
                                   float("-inf"), 0, f"external solver: {exc}")
            if not out.exists():
                return SdpSolution([], np.zeros(prob.free_count),
                                   SdpStatus.NUMERICAL_FAILURE, float("inf"),
                                   float("-inf"), 0,
                                   f"external solver wrote no solution (exit {proc.returncode})")
            blocks, free = read_solution(out, prob)
            residual = prob.residual(blocks, free)
            min_eig = min(
                (float(np.min(np.linalg.eigvalsh(B))) for B in blocks), default=0.0
            )
            if residual <= tol and min_eig >= -tol:
                status = SdpStatus.FEASIBLE
            elif proc.returncode in (1, 2):  # csdp: primal/dual infeasible
                status = SdpStatus.INFEASIBLE
            else:
                status = SdpStatus.MAX_ITERATIONS
            return SdpSolution(blocks, free, status, residual, min_eig, 0,
                               f"external exit {proc.returncode}")
