"""Builds the pytubalkit extension with cargo and exercises it.

Usage: python3 python/smoke_test.py [--no-build]
"""

import importlib.util
import math
import shutil
import subprocess
import sys
import sysconfig
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "tubalkit-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )


def load_module(tmp):
    lib = ROOT / "target" / "release" / "libpytubalkit.so"
    if not lib.exists():
        lib = ROOT / "target" / "release" / "libpytubalkit.dylib"
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    dest = Path(tmp) / ("pytubalkit" + suffix)
    shutil.copy(lib, dest)
    module_spec = importlib.util.spec_from_file_location("pytubalkit", dest)
    mod = importlib.util.module_from_spec(module_spec)
    module_spec.loader.exec_module(mod)
    return mod


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    if "--no-build" not in sys.argv:
        build()
    with tempfile.TemporaryDirectory() as tmp:
        tk = load_module(tmp)

        # f-diagonal fixture: both Fourier slices are diag(3, 1)
        x = tk.Tensor([2, 2, 2], [3.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0])
        assert x.dims == [2, 2, 2]
        assert close(tk.tnn(x), 4.0)
        assert close(tk.spectral_norm(x), 3.0)
        assert tk.tubal_rank(x) == 2

        p, sigma, escalated = tk.project_tnn(x, 1.5)
        assert close(sigma, 1.5) and not escalated
        assert close(tk.tnn(p), 1.5)
        assert tk.tubal_rank(p) == 1
        holds, value = tk.certificate(x, 1.5, 1)
        assert holds and close(value, 2.0)
        holds, _ = tk.certificate(x, 3.0, 1)
        assert not holds

        u, s, v = tk.tsvd(x)
        rec = (u @ s) @ v.t_transpose()
        assert rec.distance(x) <= 1e-12

        same, sigma, _ = tk.project_tnn(x, 10.0)
        assert sigma == 0.0 and same.data == x.data

        try:
            tk.Tensor([2, 2], [1.0] * 3)
        except ValueError:
            pass
        else:
            raise AssertionError("bad shape accepted")

        inst = tk.completion_instance([6, 6, 3], 1, 0.6, 1)
        assert inst["truth"].dims == [6, 6, 3]
        assert tk.tnn(inst["init"]) <= inst["tau"] * (1 + 1e-9)
        gap = tk.dual_gap_smooth(inst["init"], inst["init_gradient"], inst["tau"])
        assert gap >= -1e-9

        runs = tk.run_experiment("dims = 4x4x4\nr = 1\n", [("seeds", "1,2"), ("iterations", "50")])
        assert [r["seed"] for r in runs] == [1, 2]
        for r in runs:
            assert math.isfinite(r["recovery_error"]) and r["recovery_error"] >= 0.0

        try:
            tk.run_experiment("r = -3\n")
        except ValueError as e:
            assert "line 1" in str(e)
        else:
            raise AssertionError("bad config accepted")

        rp = tk.rpca_instance(8, 2, 0.05, 3)
        assert rp["corrupted"].dims == [8, 8, 8]

    print("python smoke test passed")


if __name__ == "__main__":
    main()
