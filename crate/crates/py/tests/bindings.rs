use pgdm::pgdm as pymod;
use pyo3::prelude::*;

fn run(code: &std::ffi::CStr) {
    static INIT: std::sync::Once = std::sync::Once::new();
    INIT.call_once(|| {
        pyo3::append_to_inittab!(pymod);
        Python::initialize();
    });
    Python::attach(|py| {
        if let Err(e) = py.run(code, None, None) {
            e.display(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn grid_field_and_interpolation() {
    run(c"
import pgdm
g = pgdm.Grid(2, 8)
assert g.shape == [7, 7] and len(g) == 49
u = pgdm.Field(g, [float(i % 7) for i in range(49)])
up = pgdm.csi_upsample(u, 16)
assert up.grid.shape == [15, 15]
back = pgdm.restrict(up, 8)
assert max(abs(x - y) for x, y in zip(back.values(), u.values())) < 1e-12
");
}

#[test]
fn poisson_solve_and_refine() {
    run(c"
import pgdm
g = pgdm.Grid(2, 16)
a = pgdm.grf_sample(g, 7.0, 1.6, seed=3)
eq = pgdm.Equation.poisson()
u = pgdm.solve(eq, a)
assert pgdm.residual_norm(eq, u, a) < 1e-5
v = pgdm.Field(g, [0.9 * x for x in u.values()])
r0 = pgdm.residual_norm(eq, v, a)
v1 = pgdm.gauss_newton(eq, v, a, steps=2)
assert pgdm.residual_norm(eq, v1, a) < 1e-2 * r0
assert pgdm.relative_l2_error(u, u) == 0.0
");
}

#[test]
fn errors_map_to_python_exceptions() {
    run(c"
import pgdm
try:
    pgdm.Grid(2, 8, boundary='neumann')
    raise AssertionError('expected ValueError')
except ValueError:
    pass
try:
    pgdm.Field(pgdm.Grid(2, 8), [0.0])
    raise AssertionError('expected ValueError')
except ValueError:
    pass
try:
    pgdm.Denoiser.load('/nonexistent/model.ckpt')
    raise AssertionError('expected OSError')
except OSError:
    pass
");
}

#[test]
fn schedule_is_decreasing() {
    run(c"
import pgdm
ab = pgdm.linear_schedule(400)
assert len(ab) == 401 and ab[0] == 1.0
assert all(x > y for x, y in zip(ab, ab[1:]))
assert 0.015 < ab[-1] < 0.02
");
}
