"""Smoke test for the genfrac Python module.

Build and run from the repository root:

    cargo build --release -p genfrac-py --features extension-module
    cp target/release/libgenfrac_py.so python/genfrac.so
    python3 python/smoke.py
"""

import math

import genfrac


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b} (tol {tol})"


def main():
    grid = genfrac.Grid(0.0, 1.0, 64)
    t = grid.nodes()
    assert len(grid) == 65 and len(t) == 65

    # order-1/2 integral of t^2 is 2 t^2.5 / Gamma(3.5)
    fine = genfrac.Grid(0.0, 1.0, 256)
    op = genfrac.Operator(genfrac.Kernel.builtin("power_integral", alpha=0.5), fine)
    k = op.k([s * s for s in fine.nodes()])
    close(k[-1], 2.0 / math.gamma(3.5), 1e-4)
    close(op.k_at([s * s for s in fine.nodes()], 0.3), 2.0 * 0.3**2.5 / math.gamma(3.5), 1e-4)
    assert op.dual().lam == 0.0 and op.dual().mu == 1.0

    # the tracking extremal for exp(-(t - tau)) is y = -1 - t
    expo = genfrac.Operator(genfrac.Kernel.builtin("exponential", rate=-1.0), grid)
    tracking = genfrac.Lagrangian.builtin("tracking")
    sol = genfrac.solve(tracking, expo, -1.0, -2.0)
    close(max(abs(y + 1.0 + s) for s, y in zip(sol["t"], sol["y"])), 0.0, 1e-3)
    check = genfrac.el_check(tracking, expo, [-1.0 - s for s in t])
    close(check["max_abs"], 0.0, 5e-4)

    # the same problem as a polynomial: (x2 + t)^2
    poly = genfrac.Lagrangian.polynomial([(1.0, [0, 2, 0, 0, 0]), (2.0, [0, 1, 0, 0, 1]), (1.0, [0, 0, 0, 0, 2])])
    close(poly.value(0.0, 0.5, 0.0, 0.0, 0.25), 0.5625, 1e-15)

    # isoperimetric: multiplier 2 xi with xi = 2
    cosine = genfrac.Operator(genfrac.Kernel.builtin("cosine", frequency=0.3), grid)
    iso = genfrac.solve_isoperimetric(
        tracking, cosine, 1.0, 1.045, [(genfrac.Lagrangian.builtin("weighted_integral"), 1.0 / 3.0)]
    )
    close(iso["multipliers"][0], 4.0, 5e-2)

    # translation invariance and a constant conserved quantity
    caputo = genfrac.Operator(genfrac.Kernel.builtin("power_derivative", alpha=0.5), fine)
    f = genfrac.Lagrangian.builtin("caputo_tracking", alpha=0.5)
    extremal = genfrac.solve(f, caputo, 0.0, 1.0)["y"]
    noether = genfrac.noether(f, caputo, extremal)
    assert noether["exact"]
    close(noether["relative_stdev"], 0.0, 1e-3)

    # int exp(-(t - tau)) y dtau = t - t^2/2 has y = 1 - t^2/2; the resolvent of exp(-s) is 1
    kernel = genfrac.Kernel.builtin("exponential", rate=-1.0)
    y = genfrac.volterra_first_kind(kernel, grid, [s - 0.5 * s * s for s in t])
    close(max(abs(v - 1.0 + 0.5 * s * s) for s, v in zip(t, y)), 0.0, 1e-3)
    u = genfrac.resolvent(kernel, grid)
    close(max(abs(v - 1.0) for v in u), 0.0, 1e-4)

    # harmonic field exp(x) sin(y) on a 2D grid
    axes = [genfrac.Operator(genfrac.Kernel.builtin("constant", value=1.0), genfrac.Grid(0.0, 1.0, 32)) for _ in range(2)]
    nodes = axes[0].grid.nodes()
    values = [math.exp(x) * math.sin(y) for x in nodes for y in nodes]
    harmonic = genfrac.dirichlet_residual(axes, values, margin=2)
    assert harmonic["shape"] == [33, 33]
    close(harmonic["max_abs_within_margin"], 0.0, 1e-2)

    try:
        genfrac.Grid(1.0, 0.0, 4)
    except ValueError:
        pass
    else:
        raise AssertionError("reversed interval accepted")
    try:
        genfrac.solve(f, caputo, None, 1.0, max_iterations=2)
    except genfrac.NumericalError:
        pass
    else:
        raise AssertionError("two iterations converged")

    print("python smoke: ok")


if __name__ == "__main__":
    main()
