//! Continuous logic: a differentiable relaxation of quantifier-free formulas.
//!
//! Comparisons map to sigmoids (or a Gaussian for equality), conjunction and
//! disjunction map to a t-norm and its t-conorm, and negation is `1 - x`.

mod graph;
mod mapping;

pub use graph::{build_graph, AtomNodes, BuildOptions, ClnGraph, EqMode, GraphError, Node, NodeOp, ParamRole};
pub use mapping::{
    c_eq_gauss, c_eq_sigmoid, c_ge, c_gt, c_le, c_lt, c_neg, sigmoid, t_conorm, t_conorm_grad, t_norm, t_norm_grad,
    MappingParams, TNormKind, SIGMOID_CLAMP,
};

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::ast::{rat_to_f64, CmpOp, Expr, Formula, State};
    use crate::templates::{AtomKind, TemplateAtom, TemplateFormula};

    fn unit() -> impl Strategy<Value = f64> {
        0f64..=1.0
    }

    fn kinds() -> impl Strategy<Value = TNormKind> {
        prop_oneof![Just(TNormKind::Lukasiewicz), Just(TNormKind::Godel), Just(TNormKind::Product)]
    }

    const TOL: f64 = 1e-12;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn t_norm_axioms(k in kinds(), a in unit(), b in unit(), c in unit(), d in unit()) {
            prop_assert!((t_norm(k, a, 1.0) - a).abs() < TOL);
            prop_assert!((t_norm(k, a, b) - t_norm(k, b, a)).abs() < TOL);
            prop_assert!((t_norm(k, a, t_norm(k, b, c)) - t_norm(k, t_norm(k, a, b), c)).abs() < TOL);
            let (lo, hi) = if c <= d { (c, d) } else { (d, c) };
            prop_assert!(t_norm(k, a, lo) <= t_norm(k, a, hi) + TOL);
            prop_assert!((0.0..=1.0).contains(&t_norm(k, a, b)));
        }

        #[test]
        fn t_conorm_is_the_dual(k in kinds(), a in unit(), b in unit()) {
            let dual = 1.0 - t_norm(k, 1.0 - a, 1.0 - b);
            prop_assert!((t_conorm(k, a, b) - dual).abs() < TOL);
            prop_assert!((t_conorm(k, a, 0.0) - a).abs() < TOL);
        }

        #[test]
        fn strict_monotonicity_for_product_and_godel(a in 0.01f64..=1.0, b in 0.01f64..=1.0) {
            for k in [TNormKind::Product, TNormKind::Godel] {
                prop_assert!(t_norm(k, a, b) <= a.min(b) + TOL);
                prop_assert!(t_norm(k, a, b) > 0.0);
            }
            prop_assert!(t_conorm(TNormKind::Product, a, b) >= a.max(b) - TOL);
        }

        #[test]
        fn product_disjunction_increases_with_either_input(a in 0f64..0.99, b in 0f64..0.99, step in 0.001f64..0.01) {
            let k = TNormKind::Product;
            prop_assert!(t_conorm(k, a + step, b) > t_conorm(k, a, b));
            prop_assert!(t_conorm(k, a, b + step) > t_conorm(k, a, b));
        }
    }

    #[test]
    fn property_one_positivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let (a, b) = (rng.gen_range(f64::MIN_POSITIVE..=1.0), rng.gen_range(f64::MIN_POSITIVE..=1.0));
            assert!(t_norm(TNormKind::Product, a.max(1e-150), b.max(1e-150)) > 0.0);
            assert!(t_norm(TNormKind::Godel, a, b) > 0.0);
        }
        assert_eq!(t_norm(TNormKind::Lukasiewicz, 0.4, 0.4), 0.0);
    }

    #[test]
    fn property_two_strict_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let mut t1 = rng.gen_range(0.0..1.0);
            let mut t2 = rng.gen_range(0.0..1.0);
            if t1 == t2 {
                continue;
            }
            if t1 > t2 {
                std::mem::swap(&mut t1, &mut t2);
            }
            let t3 = rng.gen_range(1e-6..=1.0);
            assert!(t_norm(TNormKind::Product, t1, t3) < t_norm(TNormKind::Product, t2, t3));
        }
        // Godel is only weakly monotone.
        assert_eq!(t_norm(TNormKind::Godel, 0.5, 0.2), t_norm(TNormKind::Godel, 0.6, 0.2));
    }

    #[test]
    fn true_template_is_constant_one() {
        let mut g = build_graph(&TemplateFormula::True, BuildOptions::default()).unwrap();
        assert_eq!(g.forward(&[]), 1.0);
        assert!(g.backward().is_empty());
    }

    #[test]
    fn exact_weights_on_a_trace_point() {
        let t = TemplateFormula::Atom(TemplateAtom::linear(AtomKind::Eq, vec![Expr::var("t"), Expr::var("u")]));
        let opts = BuildOptions { tnorm: TNormKind::Product, eq_mode: EqMode::Sigmoid, per_atom_scaling: false };
        let mut g = build_graph(&t, opts).unwrap();
        for (p, r) in g.params.iter_mut().zip(&g.roles) {
            *p = match r {
                ParamRole::Scale { .. } => 20.0,
                ParamRole::Offset { .. } => 0.2,
                ParamRole::Coeff { term: 0, .. } => 2.0,
                ParamRole::Coeff { .. } => 1.0,
                ParamRole::Bias { .. } => -20.0,
                ParamRole::Sigma => 1.0,
            };
        }
        let x: BTreeMap<String, f64> = [("t".to_string(), 9.0), ("u".to_string(), 2.0)].into();
        let v = g.forward_map(&x).unwrap();
        assert!((v - 0.9643).abs() < 1e-4, "{v}");
    }

    #[test]
    fn sigmoid_scale_adjoint_is_analytic() {
        let t = TemplateFormula::Atom(TemplateAtom::fixed(
            AtomKind::Ge,
            vec![(crate::ast::rat(1), Expr::var("x"))],
            crate::ast::rat(0),
        ));
        let mut g = build_graph(&t, BuildOptions::default()).unwrap();
        let (bi, ei) = (g.param_index(ParamRole::Scale { atom: None }).unwrap(), g.param_index(ParamRole::Offset { atom: None }).unwrap());
        g.params[bi] = 3.0;
        g.params[ei] = 0.25;
        g.forward(&[0.4]);
        let grad = g.backward();
        let s = sigmoid(3.0 * 0.65);
        assert!((grad[bi] - 0.65 * s * (1.0 - s)).abs() < 1e-15);
        assert!((grad[ei] - 3.0 * s * (1.0 - s)).abs() < 1e-15);
    }

    #[test]
    fn disconnected_parameter_has_zero_adjoint() {
        let t = TemplateFormula::Or(vec![
            TemplateFormula::True,
            TemplateFormula::Atom(TemplateAtom::linear(AtomKind::Eq, vec![Expr::var("x")])),
        ]);
        let mut g = build_graph(&t, BuildOptions { tnorm: TNormKind::Lukasiewicz, ..BuildOptions::default() }).unwrap();
        g.params.iter_mut().for_each(|p| *p = 0.5);
        g.forward(&[1.0]);
        assert!(g.backward().iter().all(|d| *d == 0.0));
    }

    #[test]
    fn logic_nodes_stay_in_unit_interval() {
        let t = sample_template();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in TNormKind::ALL {
            let mut g = build_graph(&t, BuildOptions { tnorm: k, ..BuildOptions::default() }).unwrap();
            for _ in 0..500 {
                randomize(&mut g, &mut rng);
                let feats: Vec<f64> = (0..g.num_features()).map(|_| rng.gen_range(-100.0..100.0)).collect();
                g.forward(&feats);
                for n in &g.nodes {
                    if matches!(n.op, NodeOp::TNorm(_) | NodeOp::TConorm(_) | NodeOp::Negation | NodeOp::SigmoidGe | NodeOp::SigmoidGt | NodeOp::GaussianEq) {
                        assert!((0.0..=1.0).contains(&n.value));
                    }
                }
            }
        }
    }

    /// Direct recursive evaluation of a template's relaxation, sharing no
    /// code with the graph.
    fn reference(f: &TemplateFormula, k: TNormKind, eq: EqMode, p: &MappingParams, vals: &[Vec<f64>], at: &mut usize, x: &BTreeMap<String, f64>) -> f64 {
        match f {
            TemplateFormula::Atom(a) => {
                let i = *at;
                *at += 1;
                let w = &vals[i];
                let mut s = *w.last().unwrap();
                let mut sq = 0.0;
                for (j, (_, t)) in a.terms.iter().enumerate() {
                    s += w[j] * t.eval_f64(&|v| x.get(v).copied()).unwrap();
                    sq += w[j] * w[j];
                }
                if a.has_learnable_coeffs() {
                    s /= (sq + 1e-12).sqrt();
                }
                match a.kind {
                    AtomKind::Eq if eq == EqMode::Gaussian => c_eq_gauss(s, 0.0, p.sigma),
                    AtomKind::Eq => c_eq_sigmoid(s, 0.0, p, k),
                    AtomKind::Ge => c_ge(s, 0.0, p),
                    AtomKind::Gt => c_gt(s, 0.0, p),
                    AtomKind::Le => c_le(s, 0.0, p),
                    AtomKind::Lt => c_lt(s, 0.0, p),
                }
            }
            TemplateFormula::True => 1.0,
            TemplateFormula::False => 0.0,
            TemplateFormula::Not(g) => c_neg(reference(g, k, eq, p, vals, at, x)),
            TemplateFormula::And(gs) => {
                let mut acc = reference(&gs[0], k, eq, p, vals, at, x);
                for g in &gs[1..] {
                    acc = t_norm(k, acc, reference(g, k, eq, p, vals, at, x));
                }
                acc
            }
            TemplateFormula::Or(gs) => {
                let mut acc = reference(&gs[0], k, eq, p, vals, at, x);
                for g in &gs[1..] {
                    acc = t_conorm(k, acc, reference(g, k, eq, p, vals, at, x));
                }
                acc
            }
        }
    }

    fn sample_template() -> TemplateFormula {
        let x = Expr::var("x");
        let y = Expr::var("y");
        TemplateFormula::Or(vec![
            TemplateFormula::And(vec![
                TemplateFormula::Atom(TemplateAtom::linear(AtomKind::Eq, vec![x.clone(), y.clone()])),
                TemplateFormula::Atom(TemplateAtom::bound(AtomKind::Le, vec![(crate::ast::rat(1), x.clone())])),
            ]),
            TemplateFormula::Not(Box::new(TemplateFormula::Atom(TemplateAtom::linear(
                AtomKind::Gt,
                vec![Expr::mul(x.clone(), y.clone()), Expr::pow(y.clone(), 2)],
            )))),
            TemplateFormula::Atom(TemplateAtom::bound(AtomKind::Lt, vec![(crate::ast::rat(2), y.clone())])),
        ])
    }

    fn randomize(g: &mut ClnGraph, rng: &mut ChaCha8Rng) {
        for (p, r) in g.params.iter_mut().zip(&g.roles) {
            *p = match r {
                ParamRole::Scale { .. } => rng.gen_range(0.5..3.0),
                ParamRole::Offset { .. } => rng.gen_range(0.01..0.3),
                ParamRole::Sigma => rng.gen_range(0.5..2.0),
                _ => rng.gen_range(-1.0..1.0),
            };
        }
    }

    fn atom_values(g: &ClnGraph, t: &TemplateFormula) -> Vec<Vec<f64>> {
        t.atoms()
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let nodes = &g.atoms[i];
                let (fixed, fb) = a.fixed_values();
                let mut v: Vec<f64> = fixed
                    .iter()
                    .zip(&nodes.coeff_params)
                    .map(|(c, p)| match (c, p) {
                        (Some(c), _) => rat_to_f64(c),
                        (None, Some(p)) => g.params[*p],
                        _ => unreachable!(),
                    })
                    .collect();
                v.push(match (fb, nodes.bias_param) {
                    (Some(c), _) => rat_to_f64(&c),
                    (None, Some(p)) => g.params[p],
                    _ => unreachable!(),
                });
                v
            })
            .collect()
    }

    #[test]
    fn forward_matches_reference_evaluator() {
        let t = sample_template();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in TNormKind::ALL {
            for eq in [EqMode::Gaussian, EqMode::Sigmoid] {
                let mut g = build_graph(&t, BuildOptions { tnorm: k, eq_mode: eq, per_atom_scaling: false }).unwrap();
                for _ in 0..200 {
                    randomize(&mut g, &mut rng);
                    let scale = g.params[g.param_index(ParamRole::Scale { atom: None }).unwrap()];
                    let offset = g.params[g.param_index(ParamRole::Offset { atom: None }).unwrap()];
                    let sigma = g.param_index(ParamRole::Sigma).map_or(1.0, |i| g.params[i]);
                    let p = MappingParams::new(scale, offset, sigma).unwrap();
                    let x: BTreeMap<String, f64> =
                        [("x".to_string(), rng.gen_range(-3.0..3.0)), ("y".to_string(), rng.gen_range(-3.0..3.0))].into();
                    let vals = atom_values(&g, &t);
                    let want = reference(&t, k, eq, &p, &vals, &mut 0, &x);
                    let got = g.forward_map(&x).unwrap();
                    assert!((want - got).abs() < 1e-12, "{k} {eq:?}: {want} vs {got}");
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let t = sample_template();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        let mut checked = 0;
        for k in [TNormKind::Product, TNormKind::Godel, TNormKind::Lukasiewicz] {
            for eq in [EqMode::Gaussian, EqMode::Sigmoid] {
                for per_atom in [false, true] {
                    let mut g = build_graph(&t, BuildOptions { tnorm: k, eq_mode: eq, per_atom_scaling: per_atom }).unwrap();
                    for _ in 0..30 {
                        randomize(&mut g, &mut rng);
                        let feats: Vec<f64> = (0..g.num_features()).map(|_| rng.gen_range(-2.0..2.0)).collect();
                        g.forward(&feats);
                        let grad = g.backward();
                        for i in 0..g.params.len() {
                            let orig = g.params[i];
                            g.params[i] = orig + h;
                            let up = g.forward(&feats);
                            g.params[i] = orig - h;
                            let down = g.forward(&feats);
                            g.params[i] = orig;
                            let fd = (up - down) / (2.0 * h);
                            let err = (fd - grad[i]).abs();
                            let rel = err / fd.abs().max(grad[i].abs()).max(1e-3);
                            // Piecewise t-norms have kinks; skip points that straddle one.
                            if rel >= 1e-4 && k != TNormKind::Product {
                                continue;
                            }
                            assert!(rel < 1e-4, "{k} {eq:?} param {i} {:?}: fd {fd} vs {}", g.roles[i], grad[i]);
                            checked += 1;
                        }
                    }
                }
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn graph_gradients_flow_to_inputs_of_product_chain() {
        let t = TemplateFormula::And(vec![
            TemplateFormula::Atom(TemplateAtom::linear(AtomKind::Ge, vec![Expr::var("x")])),
            TemplateFormula::Atom(TemplateAtom::linear(AtomKind::Le, vec![Expr::var("x")])),
        ]);
        let mut g = build_graph(&t, BuildOptions::default()).unwrap();
        g.params.iter_mut().for_each(|p| *p = 0.5);
        g.forward(&[0.3]);
        assert!(g.backward().iter().any(|d| *d != 0.0));
    }

    #[test]
    fn missing_variable_is_reported() {
        let t = TemplateFormula::Atom(TemplateAtom::linear(AtomKind::Ge, vec![Expr::var("z")]));
        let mut g = build_graph(&t, BuildOptions::default()).unwrap();
        assert!(matches!(g.forward_map(&BTreeMap::new()), Err(GraphError::Unassigned(_))));
        assert!(matches!(g.try_forward(&[1.0, 2.0]), Err(GraphError::FeatureArity { .. })));
    }

    #[test]
    fn non_polynomial_terms_are_rejected() {
        let t = TemplateFormula::Atom(TemplateAtom::linear(
            AtomKind::Ge,
            vec![Expr::div(Expr::var("x"), Expr::var("y"))],
        ));
        assert!(matches!(build_graph(&t, BuildOptions::default()), Err(GraphError::MalformedTemplate(_))));
    }

    #[test]
    fn dump_lists_every_node() {
        let t = sample_template();
        let mut g = build_graph(&t, BuildOptions::default()).unwrap();
        g.forward(&vec![0.5; g.num_features()]);
        let d = g.dump();
        assert_eq!(d.lines().count(), g.nodes.len());
        assert!(d.contains("<- root"));
        assert!(d.contains("lincomb(normalized)"));
    }

    #[test]
    fn terms_are_shared_between_atoms() {
        let g = build_graph(&sample_template(), BuildOptions::default()).unwrap();
        assert_eq!(g.num_features(), 4);
    }

    fn random_atom(rng: &mut ChaCha8Rng, vars: &[&str]) -> Formula {
        let pick = |rng: &mut ChaCha8Rng| Expr::var(vars[rng.gen_range(0..vars.len())]);
        let lhs = match rng.gen_range(0..3) {
            0 => pick(rng),
            1 => Expr::add(pick(rng), pick(rng)),
            _ => Expr::mul(Expr::int(rng.gen_range(-3..4)), pick(rng)),
        };
        let rhs = Expr::Const(crate::ast::ratio(rng.gen_range(-300..300), 100));
        let op = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Gt, CmpOp::Le, CmpOp::Ge][rng.gen_range(0..6)];
        Formula::cmp(op, lhs, rhs)
    }

    fn random_formula(rng: &mut ChaCha8Rng, vars: &[&str], depth: u32) -> Formula {
        if depth == 0 || rng.gen_bool(0.3) {
            return random_atom(rng, vars);
        }
        match rng.gen_range(0..3) {
            0 => Formula::not(random_formula(rng, vars, depth - 1)),
            1 => Formula::And((0..rng.gen_range(2..4)).map(|_| random_formula(rng, vars, depth - 1)).collect()),
            _ => Formula::Or((0..rng.gen_range(2..4)).map(|_| random_formula(rng, vars, depth - 1)).collect()),
        }
    }

    fn margins_ok(f: &Formula, s: &State, min: f64) -> bool {
        match f {
            Formula::True | Formula::False => true,
            Formula::Cmp(_, l, r) => {
                let d = rat_to_f64(&(l.eval(s).unwrap() - r.eval(s).unwrap()));
                d.abs() > min
            }
            Formula::Not(g) => margins_ok(g, s, min),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().all(|g| margins_ok(g, s, min)),
        }
    }

    #[test]
    fn soundness_sweep() {
        let (scale, offset) = (5000.0, 1e-4);
        let vars = ["a", "b", "c", "d"];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut tested = 0;
        while tested < 2000 {
            let n = rng.gen_range(1..=4);
            let f = random_formula(&mut rng, &vars[..n], 3);
            let state: State = vars[..n]
                .iter()
                .map(|v| (v.to_string(), crate::ast::ratio(rng.gen_range(-400..400), 100) + crate::ast::ratio(1, 7)))
                .collect();
            if !margins_ok(&f, &state, 2.0 * offset) {
                continue;
            }
            let truth = f.eval(&state).unwrap();
            let t = TemplateFormula::from_formula(&f);
            for k in [TNormKind::Product, TNormKind::Godel] {
                let mut g = build_graph(&t, BuildOptions { tnorm: k, eq_mode: EqMode::Sigmoid, per_atom_scaling: false }).unwrap();
                g.set_role(|r| matches!(r, ParamRole::Scale { .. }), scale);
                g.set_role(|r| matches!(r, ParamRole::Offset { .. }), offset);
                let x: BTreeMap<String, f64> = state.iter().map(|(k, v)| (k.clone(), rat_to_f64(v))).collect();
                let v = g.forward_map(&x).unwrap();
                assert_eq!(v > 0.9, truth, "{k}: {f:?} at {x:?} gave {v}");
            }
            tested += 1;
        }
    }
}
