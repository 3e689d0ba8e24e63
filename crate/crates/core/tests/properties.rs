use proptest::prelude::*;

use indep_decomp::approx::residual;
use indep_decomp::barycenter::{barycenter_1d, objective, WeightedLaw};
use indep_decomp::compress::compress;
use indep_decomp::generate::{generate, GeneratorKind, GeneratorSpec};
use indep_decomp::io::{format_g17, parse_instance, serialize_instance};
use indep_decomp::ot::{brute_force_w2, check_monotone_support, transport_lp};
use indep_decomp::verify::{all_passed, verify_approximation, verify_decomposition};
use indep_decomp::{
    best_approximation, decompose, solve_w2, ApproxOptions, ConditionedVariable, DecompositionOptions, DiscreteMeasure,
    WeightedPoint,
};

fn measure(dim: usize, max_points: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((prop::collection::vec(-3.0f64..3.0, dim), 0.05f64..1.0), 1..=max_points).prop_map(
        move |raw| {
            let total: f64 = raw.iter().map(|p| p.1).sum();
            DiscreteMeasure::new(dim, raw.into_iter().map(|(x, w)| WeightedPoint::new(x, w / total)).collect()).unwrap()
        },
    )
}

fn uniform_pair(dim: usize) -> impl Strategy<Value = (DiscreteMeasure, DiscreteMeasure)> {
    (1usize..=6).prop_flat_map(move |n| {
        let pts = || prop::collection::vec(prop::collection::vec(-3.0f64..3.0, dim), n);
        (pts(), pts()).prop_map(move |(a, b)| {
            let u = |v: Vec<Vec<f64>>| DiscreteMeasure::uniform(dim, v.into_iter().map(Into::into).collect()).unwrap();
            (u(a), u(b))
        })
    })
}

fn instance(dim: usize) -> impl Strategy<Value = ConditionedVariable> {
    let kinds = prop::sample::select(vec![GeneratorKind::GaussMixtureSampled, GeneratorKind::RandomUniform]);
    (kinds, 1usize..=4, 1usize..=5, any::<u64>())
        .prop_map(move |(kind, atoms, points, seed)| generate(&GeneratorSpec { kind, dim, atoms, points, seed }).unwrap())
}

/// Reference transport cost from a generic LP solver.
fn lp_reference(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<_>> = mu
        .points()
        .iter()
        .map(|a| nu.points().iter().map(|b| p.add_var(a.x.dist_sq(&b.x), (0.0, f64::INFINITY))).collect())
        .collect();
    for (i, a) in mu.points().iter().enumerate() {
        p.add_constraint(vars[i].iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, a.w);
    }
    for (j, b) in nu.points().iter().enumerate() {
        p.add_constraint(vars.iter().map(|row| (row[j], 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, b.w);
    }
    p.solve().unwrap().objective()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonicalize_is_idempotent(m in measure(2, 8)) {
        prop_assert_eq!(m.canonicalize().unwrap(), m.clone());
        prop_assert!((m.total_mass() - 1.0).abs() < 1e-12);
        prop_assert!(m.points().windows(2).all(|w| w[0].x.lex_cmp(&w[1].x).is_lt()));
    }

    #[test]
    fn l1_norm_bounded_by_l2(cv in instance(2)) {
        prop_assert!(cv.norm_l1().powi(2) <= cv.norm_l2_sq() * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn transport_matches_brute_force((mu, nu) in uniform_pair(2)) {
        let brute = brute_force_w2(&mu, &nu).unwrap().cost;
        prop_assert!((transport_lp(&mu, &nu).unwrap().cost - brute).abs() <= 1e-10 * (1.0 + brute));
    }

    #[test]
    fn transport_matches_generic_lp(mu in measure(2, 6), nu in measure(2, 6)) {
        let r = transport_lp(&mu, &nu).unwrap();
        let reference = lp_reference(&mu, &nu);
        prop_assert!((r.cost - reference).abs() <= 1e-9 * (1.0 + reference), "{} vs {}", r.cost, reference);
        prop_assert!(r.coupling.marginal_residual() <= 1e-12);
        prop_assert!((r.coupling.cost() - r.cost).abs() <= 1e-12 * (1.0 + r.cost));
        // A basic solution has at most n + m − 1 entries.
        prop_assert!(r.coupling.entries.len() < mu.len() + nu.len());
    }

    #[test]
    fn cost_is_symmetric_and_below_product_coupling(mu in measure(3, 6), nu in measure(3, 6)) {
        let ab = solve_w2(&mu, &nu).unwrap().cost;
        let ba = solve_w2(&nu, &mu).unwrap().cost;
        prop_assert!((ab - ba).abs() <= 1e-10 * (1.0 + ab));
        let product: f64 = mu.points().iter()
            .flat_map(|a| nu.points().iter().map(move |b| a.w * b.w * a.x.dist_sq(&b.x)))
            .sum();
        prop_assert!(ab <= product + 1e-12);
    }

    #[test]
    fn optimal_support_is_monotone(mu in measure(2, 7), nu in measure(2, 7)) {
        let r = solve_w2(&mu, &nu).unwrap();
        prop_assert!(check_monotone_support(&r.coupling, 1e-9).is_empty());
    }

    #[test]
    fn one_dimensional_paths_agree(mu in measure(1, 8), nu in measure(1, 8)) {
        let sweep = solve_w2(&mu, &nu).unwrap().cost;
        prop_assert!((transport_lp(&mu, &nu).unwrap().cost - sweep).abs() <= 1e-12 * (1.0 + sweep));
    }

    #[test]
    fn exact_barycenter_beats_its_inputs(laws in prop::collection::vec(measure(1, 5), 1..=4)) {
        let w = 1.0 / laws.len() as f64;
        let atoms: Vec<WeightedLaw> = laws.into_iter().map(|law| WeightedLaw { weight: w, law }).collect();
        let r = barycenter_1d(&atoms).unwrap();
        prop_assert!((objective(&r.nu0, &atoms).unwrap() - r.objective).abs() <= 1e-10);
        for a in &atoms {
            prop_assert!(r.objective <= objective(&a.law, &atoms).unwrap() + 1e-10);
        }
    }

    #[test]
    fn approximation_passes_every_check(cv in instance(1)) {
        let r = best_approximation(&cv, &ApproxOptions::default()).unwrap();
        let checks = verify_approximation(&cv, &r);
        prop_assert!(all_passed(&checks), "{:#?}", checks.iter().filter(|c| !c.ok()).collect::<Vec<_>>());
        prop_assert!(checks.iter().all(|c| c.asserted));
        prop_assert!(residual(&r.refined).unwrap().is_centered());
    }

    #[test]
    fn two_dimensional_asserted_checks_pass(cv in instance(2)) {
        let r = best_approximation(&cv, &ApproxOptions::default()).unwrap();
        prop_assert!(all_passed(&verify_approximation(&cv, &r)));
    }

    #[test]
    fn decomposition_is_monotone_and_telescopes(cv in instance(1)) {
        let opts = DecompositionOptions { max_terms: 12, ..Default::default() };
        let r = decompose(&cv, &opts).unwrap();
        prop_assert!(r.residual_norms_sq.windows(2).all(|w| w[1] <= w[0]));
        let n1 = r.norm_x1_sq();
        prop_assert!(r.cumulative_norms().iter().all(|&c| c <= n1 * (1.0 + 1e-12)));
        prop_assert!(r.telescope_slack.iter().all(|&s| s <= 1e-7 * n1));
        prop_assert!(all_passed(&verify_decomposition(&r)));
    }

    #[test]
    fn instances_round_trip(cv in instance(3)) {
        let text = serialize_instance(&cv);
        prop_assert_eq!(parse_instance(&text).unwrap(), cv);
    }

    #[test]
    fn g17_round_trips(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        prop_assert_eq!(format_g17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn compression_preserves_mean_and_accounts_loss(m in measure(2, 40), target in 1usize..20, budget in 0.0f64..0.5) {
        let c = compress(&m, target, budget).unwrap();
        prop_assert!(c.loss <= budget + 1e-15);
        prop_assert!(c.law.mean().sub(&m.mean()).max_abs() <= 1e-12);
        prop_assert!((m.second_moment() - c.law.second_moment() - c.loss).abs() <= 1e-12);
        prop_assert_eq!(c.map.len(), m.len());
        prop_assert!(c.map.iter().all(|&k| k < c.law.len()));
    }
}
