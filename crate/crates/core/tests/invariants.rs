//! Property tests for the invariants of each module.

use proptest::prelude::*;

use pgdm_core::diffusion::{
    ddim_step, denoising_loss, forward_noising, linear_beta_schedule, NoiseSchedule,
};
use pgdm_core::field::{csi_upsample, relative_l2_error, restrict, Boundary, Field, GridSpec};
use pgdm_core::grf::{grf_from_noise, noise_len, GRFConfig};
use pgdm_core::nlsolve::{gauss_newton_step, levenberg_marquardt_traced, LMConfig};
use pgdm_core::operators::{
    discrete_laplacian_apply, poisson_residual, EquationSpec, PdeSystem, ResidualSystem,
};

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::DirichletZero), Just(Boundary::Periodic)]
}

fn grid(dim: usize, cells: usize, b: Boundary) -> GridSpec {
    GridSpec::new(dim, cells, b).unwrap()
}

fn field(g: GridSpec, seed: &[f64]) -> Field {
    let v = (0..g.len()).map(|i| seed[i % seed.len()] * (1.0 + (i as f64 * 0.37).sin())).collect();
    Field::from_vec(g, v).unwrap()
}

fn dot(a: &Field, b: &Field) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn csi_is_linear(
        b in boundary(),
        dim in 2usize..=3,
        su in prop::collection::vec(-2.0f64..2.0, 7..20),
        sv in prop::collection::vec(-2.0f64..2.0, 7..20),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
    ) {
        let (coarse, fine) = (grid(dim, 8, b), grid(dim, 32, b));
        let (u, v) = (field(coarse, &su), field(coarse, &sv));
        let combo = u.scale(alpha).axpy(beta, &v).unwrap();
        let lhs = csi_upsample(&combo, &fine).unwrap();
        let rhs = csi_upsample(&u, &fine).unwrap().scale(alpha)
            .axpy(beta, &csi_upsample(&v, &fine).unwrap()).unwrap();
        let diff = lhs.axpy(-1.0, &rhs).unwrap().norm();
        prop_assert!(diff <= 1e-12 * rhs.norm().max(1.0));
    }

    #[test]
    fn csi_then_restrict_is_identity(
        b in boundary(),
        dim in 2usize..=3,
        ratio in prop_oneof![Just(2usize), Just(4)],
        s in prop::collection::vec(-2.0f64..2.0, 5..30),
    ) {
        let coarse = grid(dim, 4, b);
        let u = field(coarse, &s);
        let up = csi_upsample(&u, &grid(dim, 4 * ratio, b)).unwrap();
        let back = restrict(&up, &coarse).unwrap();
        prop_assert!(back.axpy(-1.0, &u).unwrap().max_abs() <= 1e-12 * u.max_abs().max(1.0));
    }

    #[test]
    fn relative_error_is_scale_invariant(
        su in prop::collection::vec(-2.0f64..2.0, 3..10),
        sr in prop::collection::vec(0.5f64..2.0, 3..10),
        c in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
    ) {
        let g = grid(2, 8, Boundary::Periodic);
        let (u, r) = (field(g, &su), field(g, &sr));
        let e1 = relative_l2_error(&u, &r).unwrap();
        let e2 = relative_l2_error(&u.scale(c), &r.scale(c)).unwrap();
        prop_assert!((e1 - e2).abs() <= 1e-12 * e1.max(1e-300));
    }

    #[test]
    fn laplacian_is_symmetric_and_nonpositive(
        b in boundary(),
        dim in 2usize..=3,
        su in prop::collection::vec(-2.0f64..2.0, 3..15),
        sv in prop::collection::vec(-2.0f64..2.0, 3..15),
    ) {
        let g = grid(dim, 8, b);
        let (u, v) = (field(g, &su), field(g, &sv));
        let (lu, lv) = (discrete_laplacian_apply(&u).unwrap(), discrete_laplacian_apply(&v).unwrap());
        let (a, c) = (dot(&lu, &v), dot(&u, &lv));
        prop_assert!((a - c).abs() <= 1e-12 * a.abs().max(c.abs()).max(1.0));
        let q = dot(&lu, &u);
        match b {
            Boundary::DirichletZero => prop_assert!(q < 0.0 || u.norm() == 0.0),
            Boundary::Periodic => prop_assert!(q <= 1e-9 * u.norm().powi(2)),
        }
    }

    #[test]
    fn poisson_residual_is_additive_in_source(
        su in prop::collection::vec(-1.0f64..1.0, 3..10),
        sa in prop::collection::vec(-5.0f64..5.0, 3..10),
        sb in prop::collection::vec(-5.0f64..5.0, 3..10),
    ) {
        let g = grid(2, 8, Boundary::DirichletZero);
        let eq = EquationSpec::poisson();
        let u = field(g, &su);
        let (a, b) = (field(g, &sa), field(g, &sb));
        let ra = poisson_residual(&eq, &u, &a).unwrap().axpy(1.0, &a).unwrap();
        let rb = poisson_residual(&eq, &u, &b).unwrap().axpy(1.0, &b).unwrap();
        prop_assert!(ra.axpy(-1.0, &rb).unwrap().max_abs() <= 1e-12 * ra.max_abs().max(1.0));
    }

    #[test]
    fn jvp_matches_central_differences(
        which in 0usize..3,
        cells in prop_oneof![Just(8usize), Just(16)],
        su in prop::collection::vec(-1.0f64..1.0, 3..12),
        sv in prop::collection::vec(-1.0f64..1.0, 3..12),
        sp in prop::collection::vec(-1.0f64..1.0, 3..12),
    ) {
        let sys = match which {
            0 => PdeSystem::static_problem(
                &EquationSpec::poisson(),
                &field(grid(2, cells, Boundary::DirichletZero), &sp),
            ),
            1 => PdeSystem::implicit_step(
                &EquationSpec::allen_cahn(5.0),
                &field(grid(2, cells, Boundary::Periodic), &sp),
            ),
            _ => PdeSystem::implicit_step(
                &EquationSpec::navier_stokes(1e-4),
                &field(grid(2, cells, Boundary::Periodic), &sp),
            ),
        }
        .unwrap();
        let g = *sys.grid();
        let (u, v) = (field(g, &su), field(g, &sv));
        let eps = 1e-6;
        let rp = sys.residual(u.axpy(eps, &v).unwrap().values());
        let rm = sys.residual(u.axpy(-eps, &v).unwrap().values());
        let jv = sys.jvp(u.values(), v.values());
        let err: f64 = rp.iter().zip(&rm).zip(&jv)
            .map(|((p, m), j)| ((p - m) / (2.0 * eps) - j).powi(2))
            .sum::<f64>()
            .sqrt();
        prop_assert!(err / v.norm() <= 1e-5, "{err}");
    }

    #[test]
    fn gauss_newton_solves_the_linear_heat_step_from_any_start(
        sp in prop::collection::vec(-1.0f64..1.0, 3..12),
        s1 in prop::collection::vec(-5.0f64..5.0, 3..12),
        s2 in prop::collection::vec(-5.0f64..5.0, 3..12),
    ) {
        let g = grid(2, 8, Boundary::Periodic);
        let eq = EquationSpec::allen_cahn(0.0);
        let sys = PdeSystem::implicit_step(&eq, &field(g, &sp)).unwrap();
        let a = gauss_newton_step(&sys, &field(g, &s1)).unwrap();
        let b = gauss_newton_step(&sys, &field(g, &s2)).unwrap();
        prop_assert!(a.axpy(-1.0, &b).unwrap().max_abs() <= 1e-10);
        prop_assert!(sys.residual_norm(&a).unwrap() <= 1e-10);
    }

    #[test]
    fn lm_on_poisson_is_monotone_and_converges(sa in prop::collection::vec(-20.0f64..20.0, 3..10)) {
        let a = field(grid(2, 8, Boundary::DirichletZero), &sa);
        let sys = PdeSystem::static_problem(&EquationSpec::poisson(), &a).unwrap();
        let out = levenberg_marquardt_traced(&sys, &vec![0.0; sys.len()], &LMConfig::default()).unwrap();
        prop_assert!(out.residual_norm < 1e-5);
        prop_assert!(out.accepted_norms.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn grf_is_linear_in_the_noise(
        b in boundary(),
        dim in 2usize..=3,
        s in prop::collection::vec(-3.0f64..3.0, 3..20),
        c in 0.5f64..3.0,
    ) {
        let g = grid(dim, 8, b);
        let cfg = GRFConfig::new(7.0, c, b, 0).unwrap();
        let xi: Vec<f64> = (0..noise_len(&g)).map(|i| s[i % s.len()]).collect();
        let xi2: Vec<f64> = xi.iter().map(|v| 2.0 * v).collect();
        let f1 = grf_from_noise(&cfg, &g, &xi).unwrap();
        let f2 = grf_from_noise(&cfg, &g, &xi2).unwrap();
        prop_assert!(f2.axpy(-2.0, &f1).unwrap().max_abs() <= 1e-12 * f2.max_abs().max(1e-300));
    }

    #[test]
    fn alpha_bar_is_the_running_product(
        steps in 2usize..600,
        beta0 in 1e-5f64..1e-3,
        spread in 0.0f64..0.05,
    ) {
        let s = linear_beta_schedule(steps, beta0, beta0 + spread).unwrap();
        let mut prod = 1.0;
        for t in 1..=steps {
            prod *= s.alpha(t);
            prop_assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
            prop_assert!((s.alpha_bar(t) - prod).abs() <= 1e-14);
            let var = s.sigma(t).powi(2);
            prop_assert!(var >= 0.0 && var <= 1.0 - s.alpha(t) + 1e-15);
        }
    }

    #[test]
    fn ddim_equal_levels_is_identity(
        x in prop::collection::vec(-5.0f64..5.0, 1..8),
        s in prop::collection::vec(-5.0f64..5.0, 8),
        ab in 0.001f64..1.0,
    ) {
        let mut y = x.clone();
        ddim_step(&mut y, &s[..x.len()], ab, ab);
        prop_assert_eq!(y, x);
    }

    #[test]
    fn negative_noise_inverts_forward_noising(
        x0 in prop::collection::vec(-3.0f64..3.0, 9),
        eps in prop::collection::vec(-3.0f64..3.0, 9),
        t in 1usize..=400,
    ) {
        let s: NoiseSchedule = linear_beta_schedule(400, 1e-4, 0.02).unwrap();
        let g = grid(2, 4, Boundary::DirichletZero);
        let (x0f, ef) = (Field::from_vec(g, x0.clone()).unwrap(), Field::from_vec(g, eps.clone()).unwrap());
        let mut x = forward_noising(&x0f, t, &ef, &s).unwrap().into_values();
        // a perfect network returns -eps; one DDIM jump to level 0 gives x0 back
        let score: Vec<f64> = eps.iter().map(|e| -e).collect();
        ddim_step(&mut x, &score, 1.0, s.alpha_bar(t));
        for (a, b) in x.iter().zip(&x0) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        prop_assert!(denoising_loss(&[ef.scale(-1.0)], std::slice::from_ref(&ef)).unwrap() == 0.0);
    }

    #[test]
    fn loss_is_invariant_under_batch_permutation(
        outs in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 9), 2..6),
        rot in 0usize..6,
    ) {
        let g = grid(2, 4, Boundary::DirichletZero);
        let s: Vec<Field> = outs.iter().map(|v| Field::from_vec(g, v.clone()).unwrap()).collect();
        let e: Vec<Field> = outs.iter().map(|v| Field::from_vec(g, v.iter().map(|x| x * 0.5 - 0.1).collect()).unwrap()).collect();
        let k = rot % s.len();
        let (mut sp, mut ep) = (s.clone(), e.clone());
        sp.rotate_left(k);
        ep.rotate_left(k);
        let (l1, l2) = (denoising_loss(&s, &e).unwrap(), denoising_loss(&sp, &ep).unwrap());
        prop_assert!((l1 - l2).abs() <= 1e-12 * l1.max(1.0));
    }
}
