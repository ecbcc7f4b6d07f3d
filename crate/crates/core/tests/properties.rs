use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ramiflow_core::experiments::random::{decreasing_step, tree_network, tree_plan};
use ramiflow_core::frechet::param_free_distance;
use ramiflow_core::geometry::{arc_length_reparam, paths_equivalent, Point, PolylinePath};
use ramiflow_core::lagrangian::{good_paths, multiplicity, psa, ApproxOptions, PlanStructure};
use ramiflow_core::law::{Gauge, GaugeTerm, LawSpec, PsiLaw, WeightLaw};
use ramiflow_core::network::{Branch, BranchedNetwork};
use ramiflow_core::ode::{solve_backward, Quadrature, SolveMethod};
use ramiflow_core::step::StepFunction;
use ramiflow_core::tree::{compute_weights, weighted_cost};

fn polyline(max_pts: usize) -> impl Strategy<Value = PolylinePath> {
    prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 2..max_pts).prop_filter_map("degenerate", |pts| {
        PolylinePath::from_coords(pts.into_iter().map(|(x, y)| vec![x, y])).ok()
    })
}

fn power_law() -> impl Strategy<Value = WeightLaw> {
    (0.0..2.0f64, 0.1..=1.0f64).prop_map(|(c, b)| WeightLaw::power(c, b).unwrap())
}

fn scaled_network(net: &BranchedNetwork, lambda: f64) -> BranchedNetwork {
    let branches = net
        .branches()
        .iter()
        .map(|b| Branch {
            id: b.id,
            parent: b.parent,
            geometry: b.geometry.scaled(lambda),
            multiplicity: b.multiplicity.scaled_domain(lambda),
            node_mass: b.node_mass,
        })
        .collect();
    BranchedNetwork::new(net.root().clone(), branches).unwrap()
}

fn relabelled(net: &BranchedNetwork, shift: u64) -> BranchedNetwork {
    let mut branches: Vec<Branch> = net
        .branches()
        .iter()
        .map(|b| Branch {
            id: 1000 + shift * b.id % 97 + b.id * 131,
            parent: b.parent.map(|p| 1000 + shift * p % 97 + p * 131),
            ..b.clone()
        })
        .collect();
    branches.reverse();
    BranchedNetwork::new(net.root().clone(), branches).unwrap()
}

fn cost_of(net: &BranchedNetwork, law: &LawSpec) -> f64 {
    let w = compute_weights(net, &law.f).unwrap();
    weighted_cost(net, &w, law, Quadrature::ClosedForm).unwrap().total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reparam_is_idempotent(p in polyline(8)) {
        let once = arc_length_reparam(&p);
        prop_assert_eq!(arc_length_reparam(&once), once);
    }

    #[test]
    fn equivalence_under_subdivision(p in polyline(6), t in 0.05..0.95f64) {
        // inserting a vertex on a segment gives the same curve
        let s = t * p.length();
        let mut pts: Vec<Point> = p.vertices().to_vec();
        let k = p.segment_index(s);
        pts.insert(k + 1, p.point_at(s));
        if let Ok(q) = PolylinePath::new(pts) {
            prop_assert!(paths_equivalent(&p, &p, 0.0));
            prop_assert!(paths_equivalent(&p, &q, 1e-12));
            prop_assert!(paths_equivalent(&q, &p, 1e-12));
            let r = arc_length_reparam(&q);
            prop_assert!(paths_equivalent(&q, &r, 1e-12) && paths_equivalent(&p, &r, 1e-12));
        }
    }

    #[test]
    fn frechet_triangle(p in polyline(5), q in polyline(5), r in polyline(5)) {
        let pq = param_free_distance(&p, &q);
        let pr = param_free_distance(&p, &r);
        let rq = param_free_distance(&r, &q);
        prop_assert!(pq >= 0.0);
        prop_assert!(pq <= pr + rq + 1e-9);
        prop_assert!((pq - param_free_distance(&q, &p)).abs() <= 1e-9);
    }

    #[test]
    fn conservation_after_construction(seed in any::<u64>(), n in 1usize..12) {
        let net = tree_network(&mut ChaCha8Rng::seed_from_u64(seed), n);
        for b in net.branches() {
            let out: f64 = net.children(b.id).iter().map(|c| net.branch(*c).unwrap().inflow()).sum();
            prop_assert!((b.tip_multiplicity() - out - b.node_mass).abs() <= 1e-12 * b.tip_multiplicity().max(1.0));
        }
    }

    #[test]
    fn rk4_tracks_closed_form(seed in any::<u64>(), f in power_law(), t in 0.2..10.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pieces = rng.gen_range(1..=4);
        let m = decreasing_step(&mut rng, t, pieces, 0.1, 3.0);
        let exact = solve_backward(&f, &m, t, 0.0, SolveMethod::ClosedForm).unwrap();
        let rk = solve_backward(&f, &m, t, 0.0, SolveMethod::Rk4 { step: Some(1e-4) }).unwrap();
        for k in 0..=50 {
            let s = t * k as f64 / 50.0;
            let (a, b) = (exact.eval(s), rk.eval(s));
            prop_assert!((a - b).abs() <= 1e-8 * a, "s={} closed={} rk4={}", s, a, b);
        }
    }

    #[test]
    fn solution_shape(seed in any::<u64>(), f in power_law(), extra in 0.0..2.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = rng.gen_range(0.5..4.0);
        let pieces = rng.gen_range(1..=5);
        let m = decreasing_step(&mut rng, t, pieces, 0.1, 3.0);
        let w = solve_backward(&f, &m, t, extra, SolveMethod::ClosedForm).unwrap();
        for (a, b, _) in m.pieces() {
            let mut prev = f64::INFINITY;
            for k in 1..=20 {
                let s = a + (b - a) * k as f64 / 20.0;
                let x = w.eval(s);
                prop_assert!(x >= m.eval(s) + extra - 1e-12);
                prop_assert!(x <= prev + 1e-12);
                prev = x;
            }
        }
        for &k in &m.knots()[1..m.knots().len() - 1] {
            let jump = w.eval(k) - w.eval(k + 1e-13);
            let m_jump = m.eval(k) - m.right_limit(k);
            prop_assert!((jump - m_jump).abs() <= 1e-9 * w.eval(k).max(1.0), "jump {} vs {}", jump, m_jump);
        }
    }

    #[test]
    fn gauge_homogeneous_and_convex(
        norm in 0.0..2.0f64,
        w in 0.0..2.0f64,
        d in (-1.0..1.0f64, -1.0..1.0f64),
        u in (-3.0..3.0f64, -3.0..3.0f64),
        v in (-3.0..3.0f64, -3.0..3.0f64),
        k in -8i32..8,
        lam in 0.0..=1.0f64,
    ) {
        prop_assume!(d.0.abs() + d.1.abs() > 1e-3);
        let g = match WeightLaw::directional(
            Gauge { norm, terms: vec![GaugeTerm { weight: w, direction: vec![d.0, d.1] }] },
            0.5,
        ).unwrap() {
            WeightLaw::Directional { gauge, .. } => gauge,
            _ => unreachable!(),
        };
        let r = 2f64.powi(k);
        prop_assert_eq!(g.eval(&[r * u.0, r * u.1]), r * g.eval(&[u.0, u.1]));
        let mix = [lam * u.0 + (1.0 - lam) * v.0, lam * u.1 + (1.0 - lam) * v.1];
        let rhs = lam * g.eval(&[u.0, u.1]) + (1.0 - lam) * g.eval(&[v.0, v.1]);
        prop_assert!(g.eval(&mix) <= rhs + 1e-12);
        prop_assert!(g.eval(&[u.0, u.1]) >= 0.0);
    }

    #[test]
    fn weights_ignore_branch_ids(seed in any::<u64>(), n in 1usize..10, f in power_law(), shift in 1u64..50) {
        let net = tree_network(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let law = LawSpec::new(f, PsiLaw::power(0.5).unwrap()).unwrap();
        let a = cost_of(&net, &law);
        let b = cost_of(&relabelled(&net, shift), &law);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn simpson_agrees_with_closed_form(seed in any::<u64>(), n in 1usize..8, f in power_law(), alpha in 0.1..=1.0f64) {
        let net = tree_network(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let law = LawSpec::new(f, PsiLaw::power(alpha).unwrap()).unwrap();
        let w = compute_weights(&net, &law.f).unwrap();
        let a = weighted_cost(&net, &w, &law, Quadrature::ClosedForm).unwrap().total;
        let b = weighted_cost(&net, &w, &law, Quadrature::Simpson { tol: 1e-12 }).unwrap().total;
        prop_assert!((a - b).abs() <= 1e-8 * a);
    }

    #[test]
    fn heavier_tip_never_lowers_weights(seed in any::<u64>(), n in 1usize..8, f in power_law(), bump in 0.01..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = tree_network(&mut rng, n);
        let pick = net.branches()[rng.gen_range(0..net.len())].id;
        // add mass at the tip of `pick`, raising the flow on it and every ancestor
        let mut ancestors = vec![pick];
        while let Some(p) = net.branch(*ancestors.last().unwrap()).unwrap().parent {
            ancestors.push(p);
        }
        let branches: Vec<Branch> = net
            .branches()
            .iter()
            .map(|b| {
                let mut b = b.clone();
                if ancestors.contains(&b.id) {
                    b.multiplicity = b.multiplicity.shifted(bump).unwrap();
                }
                if b.id == pick {
                    b.node_mass += bump;
                }
                b
            })
            .collect();
        let heavier = BranchedNetwork::new(net.root().clone(), branches).unwrap();
        let law = LawSpec::new(f, PsiLaw::power(0.5).unwrap()).unwrap();
        let w0 = compute_weights(&net, &law.f).unwrap();
        let w1 = compute_weights(&heavier, &law.f).unwrap();
        for b in net.branches() {
            for k in 0..=16 {
                let s = b.length() * k as f64 / 16.0;
                prop_assert!(w1[&b.id].eval(s) >= w0[&b.id].eval(s) - 1e-12);
            }
        }
        prop_assert!(cost_of(&heavier, &law) >= cost_of(&net, &law) - 1e-12);
    }

    #[test]
    fn geometric_scaling(seed in any::<u64>(), n in 1usize..8, lambda in 0.1..5.0f64, alpha in 0.1..=1.0f64, c in 0.1..2.0f64, beta in 0.1..=1.0f64) {
        let net = tree_network(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let big = scaled_network(&net, lambda);
        let gilbert = LawSpec::new(WeightLaw::Zero, PsiLaw::power(alpha).unwrap()).unwrap();
        let a = cost_of(&net, &gilbert);
        prop_assert!((cost_of(&big, &gilbert) - lambda * a).abs() <= 1e-12 * lambda * a.max(1.0));
        let f = WeightLaw::power(c, beta).unwrap();
        let g = WeightLaw::power(c / lambda, beta).unwrap();
        let w = compute_weights(&net, &f).unwrap();
        let wb = compute_weights(&big, &g).unwrap();
        for b in net.branches() {
            let (x, y) = (w[&b.id].terminal(), wb[&b.id].terminal());
            prop_assert!((x - y).abs() <= 1e-10 * x.max(1.0));
            let (x, y) = (w[&b.id].initial(), wb[&b.id].initial());
            prop_assert!((x - y).abs() <= 1e-10 * x.max(1.0));
        }
    }

    #[test]
    fn multiplicity_profile_shape(seed in any::<u64>(), nodes in 2usize..8, groups in 1usize..8) {
        let plan = tree_plan(&mut ChaCha8Rng::seed_from_u64(seed), nodes, groups);
        let s = PlanStructure::new(&plan, 1e-9);
        for g in 0..plan.len() {
            let len = plan.groups()[g].path.length();
            let prof = s.profile(g).unwrap();
            let mut prev = f64::INFINITY;
            for k in 0..=40 {
                let t = len * k as f64 / 40.0;
                let m = multiplicity(&plan, g, t, 1e-9).unwrap();
                prop_assert!(m <= prev + 1e-12);
                prop_assert!(m >= plan.groups()[g].mass - 1e-12);
                prev = m;
            }
            // left-continuous at every knot
            for &k in &prof.knots()[1..] {
                prop_assert_eq!(prof.eval(k), prof.eval(k - 1e-12 * k.max(1.0)));
            }
        }
    }

    #[test]
    fn psa_reassembles_maximal_paths(seed in any::<u64>(), nodes in 2usize..8, groups in 1usize..8, frac in 0.05..1.0f64) {
        let plan = tree_plan(&mut ChaCha8Rng::seed_from_u64(seed), nodes, groups);
        let eps = frac * plan.total_mass();
        let goods = good_paths(&plan, eps, 1e-9).unwrap();
        prop_assert!(goods.len() as f64 <= plan.total_mass() / eps);
        prop_assume!(!goods.is_empty());
        let dec = psa(&goods, 1e-9).unwrap();
        for (j, gp) in goods.iter().enumerate() {
            let back = dec.reassemble(j, 1e-9).unwrap();
            prop_assert!(paths_equivalent(&back, &gp.geometry, 1e-9));
        }
        let net = dec.to_network().unwrap();
        prop_assert_eq!(net.len(), dec.len());
    }
}

#[test]
fn approximate_weights_are_reproducible() {
    let plan = tree_plan(&mut ChaCha8Rng::seed_from_u64(11), 6, 6);
    let f = WeightLaw::power(0.8, 0.5).unwrap();
    let a = ramiflow_core::lagrangian::approx_weights(&plan, 0.3, &f, &ApproxOptions::default()).unwrap();
    let b = ramiflow_core::lagrangian::approx_weights(&plan, 0.3, &f, &ApproxOptions::default()).unwrap();
    for g in 0..plan.len() {
        assert_eq!(a.eval(g, 0.1).unwrap(), b.eval(g, 0.1).unwrap());
    }
}

#[test]
fn perturbation_converges_at_first_order() {
    use ramiflow_core::ode::{profile_l1_distance, solve_backward_masked};
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let t = rng.gen_range(0.5..2.0);
        let f = WeightLaw::power(rng.gen_range(0.2..2.0), rng.gen_range(0.2..1.0)).unwrap();
        let m = decreasing_step(&mut rng, t, 3, 0.2, 2.0);
        let x0 = rng.gen_range(0.0..t - 0.1);
        let a = 0.5 * t;
        let w = solve_backward(&f, &m, t, 0.0, SolveMethod::ClosedForm).unwrap();
        let deltas: Vec<f64> = (0..8).map(|k| 0.1 * 0.5f64.powi(k)).collect();
        let errs: Vec<f64> = deltas
            .iter()
            .map(|&d| {
                let r = m.refined(&[a]);
                let vals = r.pieces().map(|(lo, _, v)| if lo < a { v + d / a } else { v }).collect();
                let mn = StepFunction::new(r.knots().to_vec(), vals).unwrap();
                let wn = solve_backward_masked(&f, &mn, t, 0.0, SolveMethod::ClosedForm, &[(x0, x0 + d)]).unwrap();
                profile_l1_distance(&wn, &w, 1e-14)
            })
            .collect();
        let order = (errs[6] / errs[7]).log2();
        let c = errs.iter().zip(&deltas).map(|(e, d)| e / d).fold(0.0, f64::max);
        assert!(order >= 0.95 && c.is_finite(), "order {order} constant {c} errors {errs:?}");
    }
}
