#!/usr/bin/env python3
"""Smoke test for the repack Python extension.

Builds the extension if needed, imports it, and runs each binding once
against known-good values. Run from the repository root:

    python3 python/smoke_test.py
"""

import shutil
import subprocess
import sys
import sysconfig
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def build_extension() -> Path:
    lib = REPO / "target" / "release" / "librepack.so"
    if not lib.exists():
        subprocess.run(
            ["cargo", "build", "--release", "-p", "repack-python"],
            cwd=REPO,
            check=True,
        )
    if not lib.exists():
        sys.exit(f"expected extension at {lib}")
    return lib


def import_module(lib: Path):
    staging = Path(tempfile.mkdtemp(prefix="repack_py_"))
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    shutil.copy2(lib, staging / f"repack{suffix}")
    sys.path.insert(0, str(staging))
    import repack  # noqa: E402

    return repack


def main() -> None:
    repack = import_module(build_extension())
    failures = 0

    def check(name, condition):
        nonlocal failures
        status = "ok" if condition else "FAIL"
        if not condition:
            failures += 1
        print(f"[smoke] {name}: {status}")

    # Golden reachability: impossible at capacity 10, solvable at 12.
    tight = repack.Instance(10, [[1, 1, 2, 6], [2, 3, 5]], [[1, 3, 6], [1, 2, 2, 5]])
    check("brute infeasible at capacity 10",
          repack.brute_force(tight)["verdict"] == "infeasible")

    loose = repack.Instance(12, [[1, 1, 2, 6], [2, 3, 5]], [[1, 3, 6], [1, 2, 2, 5]])
    result = repack.brute_force(loose)
    check("brute feasible at capacity 12", result["verdict"] == "feasible")
    check("brute witness verifies",
          repack.verify(loose, result["moves"])["ok"])

    # Powers of 2: the largest item that must move has size 16.
    p2 = repack.Instance(
        64,
        [[32, 16], [4, 4, 2], [], []],
        [[32, 4, 4, 2], [16], [], []],
    )
    feas = repack.pow2_feasible(p2)
    check("pow2 largest unsettled is 16", feas["largest_unsettled"] == 16)
    check("pow2 feasible with spare slack", feas["feasible"])
    check("pow2 sequence verifies", repack.verify(p2, repack.solve_pow2(p2))["ok"])

    # Small items: six size-4 items at capacity 12, alpha 3.
    small = repack.Instance(
        12,
        [[4], [4], [4], [4], [4], [4]],
        [[4, 4], [4], [4], [4], [4], []],
    )
    moves = repack.solve_small_items(small, 3)
    check("small-items sequence verifies", repack.verify(small, moves)["ok"])

    # Partition-bounded decision on the worked two-part example.
    ex = repack.Instance(
        9,
        [[1, 2, 5], [2, 2, 3], [1, 1, 3, 3], [4, 4]],
        [[1, 5], [2, 2, 2, 3], [1, 3, 3], [1, 4, 4]],
    )
    decision = repack.decide_partition(ex, 2)
    check("decide yes on worked example", decision["yes"])
    check("decide witness verifies", repack.verify(ex, decision["moves"])["ok"])
    check("decide partition is 2-bounded",
          all(bunches <= 2 for _, bunches in decision["parts"]))

    # Hardness generator round trip.
    hard = repack.gen_hard([1, 1, 1, 1], 1, 4)
    check("gen-hard capacity", hard.capacity == 24)
    witness = repack.gen_hard_witness([1, 1, 1, 1], 1, 4)
    check("gen-hard witness verifies",
          witness is not None and repack.verify(hard, witness)["ok"])
    check("gen-hard no-instance has no witness",
          repack.gen_hard_witness([1, 1, 1, 1], 1, 2) is None)

    # JSON round trip.
    check("instance json round trip",
          repack.Instance.from_json(loose.to_json()).to_json() == loose.to_json())

    if failures:
        sys.exit(f"{failures} smoke check(s) failed")
    print("[smoke] all checks passed")


if __name__ == "__main__":
    main()
