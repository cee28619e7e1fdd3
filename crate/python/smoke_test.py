"""Smoke test for the shapeflow_py extension module."""

import math
import pathlib
import sys
import tempfile

import shapeflow_py as sf

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"


def main() -> int:
    cfg = sf.Config.load(str(CONFIGS / "testcase1.toml"))
    problem = cfg.problem()
    q0 = cfg.initial_shape()
    assert len(q0) == 6

    j1, j2, j3, jl = problem.evaluate(q0)
    assert j3 == 0.0 and math.isclose(jl, 0.4 * j1 + 0.3 * j2, rel_tol=1e-12)
    print(f"start: J1={j1:.4f} J2={j2:.4f} J={jl:.4f} side={problem.side(q0)}")

    g = problem.gradient(q0)
    h = 1e-6
    for i in range(len(q0)):
        up, down = list(q0), list(q0)
        up[i] += h
        down[i] -= h
        fd = (problem.evaluate(up)[3] - problem.evaluate(down)[3]) / (2 * h)
        assert abs(g[i] - fd) <= 1e-4 * max(1.0, abs(fd)), (i, g[i], fd)

    assert all(passed for _, passed, _ in sf.check(cfg))

    small = cfg.to_toml().replace("steps = 250", "steps = 20").replace("max_iter = 200", "max_iter = 10")
    small = sf.Config.from_toml(small)
    with tempfile.TemporaryDirectory() as tmp:
        results = sf.run(small, tmp)
        for name, s in results.items():
            print(f"{name}: J={s['j_lambda']:.4f} after {s['steps']} steps ({s['termination']}, {s['side']})")
        front, filtered = sf.trace(small, results["hamiltonian"]["q"], str(pathlib.Path(tmp) / "trace"))
        assert len(filtered) <= len(front)
        print(f"front: {len(front)} points, {len(filtered)} undominated")

    try:
        sf.Config.from_toml("[weights]\nlambda = [0.4, 0.3, 0.3]\npenalty = 100.0\n")
    except ValueError as e:
        print(f"config error raised as expected: {e}")
    else:
        raise AssertionError("missing obstacle accepted")

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
