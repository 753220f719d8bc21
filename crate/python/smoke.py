"""Smoke test for the `nsc` Python extension.

Build the extension first:

    cargo build -p nsc-py --release

then run `python3 python/smoke.py`. Set NSC_LIB to point at a specific
build of the shared library. Pass a hypernetwork checkpoint as the first
argument to also exercise compilation.
"""

import math
import os
import random
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def find_library():
    env = os.environ.get("NSC_LIB")
    if env:
        return Path(env)
    for profile in ("release", "debug"):
        for name in ("libnsc.so", "libnsc.dylib", "nsc.dll"):
            p = ROOT / "target" / profile / name
            if p.exists():
                return p
    sys.exit("nsc extension not built; run `cargo build -p nsc-py --release`")


def load(workdir):
    lib = find_library()
    suffix = ".pyd" if lib.suffix == ".dll" else ".so"
    shutil.copy(lib, Path(workdir) / f"nsc{suffix}")
    sys.path.insert(0, str(workdir))
    import nsc

    return nsc


def write_ppm(path, width, height, rng):
    pixels = bytearray()
    for y in range(height):
        for x in range(width):
            base = (x * 255 // max(width - 1, 1), y * 255 // max(height - 1, 1), 128)
            pixels.extend(min(255, max(0, c + rng.randint(-20, 20))) for c in base)
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (width, height))
        f.write(pixels)


def main():
    with tempfile.TemporaryDirectory() as tmp:
        nsc = load(tmp)
        rng = random.Random(0)

        toks = nsc.tokenize("float f(float x){return 2.0f*x;}")
        assert toks[:3] == ["float", "f", "("], toks
        progs = nsc.synth_corpus("affine", 3, 7)
        assert len(progs) == 3 and all(p.startswith("float f(") for p in progs)

        assert nsc.kernel_eval("kmeans", [0.2, 0.4, 0.6] * 2) == 0.0
        assert "sobel" in nsc.kernel_names()
        assert abs(nsc.geomean([2.0, 8.0]) - 4.0) < 1e-12
        assert nsc.mpi([2.0, 3.0]) == 0

        net = nsc.SurrogateNet.random(3)
        assert len(net.params()) == 65 == len(net)
        assert net.inputs == 9 and net.outputs == 1
        xs = [[rng.uniform(-1, 1)] for _ in range(256)]
        ys = [math.sin(3 * x[0]) for x in xs]
        tuned, loss = net.finetune(xs[:192], ys[:192], xs[192:], ys[192:], epochs=300, lr=0.01)
        start = sum((net.forward(x + [0.0] * 8)[0] - y) ** 2 for x, y in zip(xs[192:], ys[192:])) / 64
        assert loss < start, (loss, start)
        path = Path(tmp) / "p.vec"
        tuned.save(str(path))
        assert nsc.SurrogateNet.load(str(path)).params() == tuned.params()

        img = Path(tmp) / "in.ppm"
        write_ppm(img, 32, 24, rng)
        report = nsc.quantize_ppm(str(img), str(Path(tmp) / "out.ppm"), k=4)
        assert len(report["palette"]) == 4 and 0.0 < report["ssim"] <= 1.0, report

        if len(sys.argv) > 1:
            model = nsc.Hypernet.load(sys.argv[1])
            compiled = model.compile("float f(float x){return 0.5f*x + 0.1f;}")
            assert len(compiled.params()) == 65

        print(f"smoke ok: finetune loss {start:.4f} -> {loss:.4f}, quantize ssim {report['ssim']:.3f}")


if __name__ == "__main__":
    main()
