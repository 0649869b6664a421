use proptest::prelude::*;
use stt_core::synthesis::{certify, make_sampling_plan, solve_sop, verify_dense, SolverOptions, SopProblem};
use stt_core::{Ball2, BasisSpec, Environment, Obstacle, Rect, Shape, Vec2, Workspace};

fn options(seed: u64) -> SolverOptions {
    SolverOptions {
        starts: 2,
        iterations: 600,
        seed,
        ..SolverOptions::default()
    }
}

/// Square room with random disc obstacles kept clear of the start and target.
fn environment() -> impl Strategy<Value = Environment> {
    let disc = ((2.5..7.5, 2.5..7.5), 0.3..1.0);
    (prop::collection::vec(disc, 0..3), 8.0..14.0).prop_filter_map("start or target blocked", |(discs, t_c)| {
        let ws = Workspace::Rect(Rect::new(Vec2::new(0.0, 0.0), Vec2::new(10.0, 10.0)).unwrap());
        let start = Ball2::new(Vec2::new(1.5, 1.5), 0.9).unwrap();
        let target = Ball2::new(Vec2::new(8.5, 8.5), 0.9).unwrap();
        let obstacles = discs
            .into_iter()
            .map(|((x, y), r)| Obstacle::fixed(Shape::Disc(Ball2::new(Vec2::new(x, y), r).unwrap())))
            .collect();
        Environment::new(ws, start, target, obstacles, t_c).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn certified_tubes_pass_dense_verification(env in environment(), seed in 0u64..100) {
        let plan = make_sampling_plan(env.horizon, 0.1).unwrap();
        let problem = SopProblem::new(env.clone(), BasisSpec::new(6, env.horizon).unwrap(), plan, 0.4).unwrap();
        let out = solve_sop(&problem, &options(seed));

        let (c0, c1) = (out.tube.eval_center(0.0).unwrap(), out.tube.eval_center(env.horizon).unwrap());
        prop_assert!((c0 - env.start.center).norm() <= 1e-12);
        prop_assert!((c1 - env.target.center).norm() <= 1e-12);
        prop_assert!((out.tube.eval_radius(0.0).unwrap() - env.start.radius).abs() <= 1e-12);
        prop_assert!((out.tube.eval_radius(env.horizon).unwrap() - env.target.radius).abs() <= 1e-12);

        prop_assert!(out.incumbent_history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(out.eta_star, problem.eta(&out.tube));

        let certificate = certify(&out.tube, &problem, out.eta_star);
        if certificate.valid {
            let report = verify_dense(&out.tube, &env, 10 * problem.plan.len());
            prop_assert!(report.worst() <= 1e-6, "{report:?}");
        }
    }

    #[test]
    fn solver_is_deterministic(env in environment(), seed in 0u64..100) {
        let plan = make_sampling_plan(env.horizon, 0.2).unwrap();
        let problem = SopProblem::new(env.clone(), BasisSpec::new(5, env.horizon).unwrap(), plan, 0.4).unwrap();
        let a = solve_sop(&problem, &options(seed));
        let b = solve_sop(&problem, &options(seed));
        prop_assert_eq!(a.coefficients, b.coefficients);
        prop_assert_eq!(a.eta_star.to_bits(), b.eta_star.to_bits());
    }
}
