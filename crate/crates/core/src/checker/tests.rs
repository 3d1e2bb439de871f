use super::*;
use crate::ast::{rat, Expr};
use crate::frontend::{parse, parse_formula};
use crate::tracer::{count_nondet, exec_body_indexed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIG1: &str = "pre: t == 10 && u == 0; while (t != 0) { t = t - 1; u = u + 2; } post: u == 20;";
const GOLDEN_IND: &str = include_str!("../../tests/golden/fig1_ind_vc.smt2");

fn solver_available() -> bool {
    Command::new("z3").arg("-version").output().is_ok()
}

fn fig1_vcs(inv: &str) -> VcSet {
    encode_in(&parse(FIG1).unwrap(), &parse_formula(inv).unwrap(), Domain::Real).unwrap()
}

#[test]
fn fig1_inductive_query_matches_golden_file() {
    let vcs = fig1_vcs("2 * t + u == 20");
    assert_eq!(emit_smtlib(&vcs.ind_vc, vcs.domain), GOLDEN_IND);
}

#[test]
fn transition_uses_one_definition_per_variable() {
    let p = parse("pre: x == 0; while (x < 5) { if (unknown()) { x = x + 1; } else { y = x; } if (x > 2) { x = x + 2; } } post: x >= 5;")
        .unwrap();
    let tr = Transition::of(&p).unwrap();
    assert_eq!(tr.defs.iter().map(|(v, _)| v.as_str()).collect::<Vec<_>>(), p.vars.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(tr.nondet, vec!["unknown!0"]);
    let s: State = [("x".to_string(), rat(2)), ("y".to_string(), rat(7))].into_iter().collect();
    let next = tr.apply(&s, &[true]).unwrap();
    assert_eq!(next["x"], rat(5));
    assert_eq!(next["y"], rat(7));
    let next = tr.apply(&s, &[false]).unwrap();
    assert_eq!(next["x"], rat(2));
    assert_eq!(next["y"], rat(2));
}

#[test]
fn unknown_invariant_variable_is_rejected() {
    let p = parse(FIG1).unwrap();
    assert_eq!(encode(&p, &parse_formula("z == 0").unwrap()), Err(EncodeError::UnknownVariable("z".into())));
}

#[test]
fn missing_solver_is_an_error() {
    let cfg = SolverConfig { command: "/nonexistent/solver-binary".into(), ..SolverConfig::default() };
    let r = check(&fig1_vcs("2 * t + u == 20"), &cfg);
    assert!(matches!(r.status, Status::SolverError(_)), "{:?}", r.status);
    assert_eq!(r.solver_calls, 1);
    let r = check(&fig1_vcs("true"), &SolverConfig { command: "   ".into(), ..SolverConfig::default() });
    assert!(matches!(r.status, Status::SolverError(_)));
}

#[test]
fn garbage_output_is_an_error() {
    let r = check(&fig1_vcs("true"), &SolverConfig { command: "echo".into(), ..SolverConfig::default() });
    assert!(matches!(r.status, Status::SolverError(_)), "{:?}", r.status);
}

#[test]
fn slow_solver_times_out_as_unknown() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("slow.sh");
    std::fs::write(&script, "#!/bin/sh\nsleep 5\necho unsat\n").unwrap();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
        let cfg = SolverConfig { command: script.display().to_string(), timeout: Duration::from_millis(200) };
        let t = Instant::now();
        let r = check(&fig1_vcs("true"), &cfg);
        assert!(t.elapsed() < Duration::from_secs(4));
        assert!(matches!(r.status, Status::SolverUnknown { condition: Condition::Pre, .. }), "{:?}", r.status);
        assert_eq!(r.solver_calls, 3);
    }
}

#[test]
fn fig1_true_invariant_holds_everywhere() {
    if !solver_available() {
        return;
    }
    let r = check(&fig1_vcs("2 * t + u == 20"), &SolverConfig::default());
    assert_eq!(r.status, Status::Valid);
    assert_eq!(r.solver_calls, 3);
}

#[test]
fn fig1_wrong_invariants_are_refuted() {
    if !solver_available() {
        return;
    }
    // Holds initially (10 + 0 == 10) but is not preserved by the body.
    let r = check(&fig1_vcs("t + u == 10"), &SolverConfig::default());
    match &r.status {
        Status::Refuted { condition: Condition::Inductive, model } => {
            assert_eq!(&model["t"] + &model["u"], rat(10));
            assert_ne!(&model["t'"] + &model["u'"], rat(10));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(r.solver_calls, 2);
    let r = check(&fig1_vcs("t + u == 20"), &SolverConfig::default());
    let expected: State = [("t".to_string(), rat(10)), ("u".to_string(), rat(0))].into_iter().collect();
    assert_eq!(r.status, Status::Refuted { condition: Condition::Pre, model: expected });
    assert_eq!(r.solver_calls, 1);
}

#[test]
fn trivial_invariants() {
    if !solver_available() {
        return;
    }
    let r = check(&fig1_vcs("true"), &SolverConfig::default());
    match r.status {
        Status::Refuted { condition: Condition::Post, model } => {
            assert_eq!(model["t"], rat(0));
            assert_ne!(model["u"], rat(20));
        }
        other => panic!("{other:?}"),
    }
    let r = check(&fig1_vcs("false"), &SolverConfig::default());
    assert!(matches!(r.status, Status::Refuted { condition: Condition::Pre, .. }));
}

#[test]
fn contradiction_is_unsat() {
    if !solver_available() {
        return;
    }
    let p = Prop::from_formula(&parse_formula("x > 0 && x < 0").unwrap(), &BTreeMap::new());
    assert_eq!(query(&p, Domain::Real, &SolverConfig::default()), Answer::Unsat);
    let q = Prop::from_formula(&parse_formula("x * x == 2").unwrap(), &BTreeMap::new());
    assert!(emit_smtlib(&q, Domain::Real).starts_with("(set-logic QF_NRA)"));
    assert!(matches!(query(&q, Domain::Real, &SolverConfig::default()), Answer::Sat(_)));
}

#[test]
fn rational_constants_reach_the_solver() {
    if !solver_available() {
        return;
    }
    let p = Prop::from_formula(&parse_formula("3 * x == 1 && x != 1/3").unwrap(), &BTreeMap::new());
    assert_eq!(query(&p, Domain::Real, &SolverConfig::default()), Answer::Unsat);
    let q = Prop::from_formula(&parse_formula("3 * x == 1").unwrap(), &BTreeMap::new());
    match query(&q, Domain::Real, &SolverConfig::default()) {
        Answer::Sat(m) => assert_eq!(m["x"], crate::ast::ratio(1, 3)),
        other => panic!("{other:?}"),
    }
}

fn random_expr(rng: &mut ChaCha8Rng, vars: &[&str], depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.35) {
        return if rng.gen_bool(0.6) { Expr::var(vars[rng.gen_range(0..vars.len())]) } else { Expr::int(rng.gen_range(-5..=5)) };
    }
    let a = random_expr(rng, vars, depth - 1);
    let b = random_expr(rng, vars, depth - 1);
    match rng.gen_range(0..4) {
        0 => Expr::add(a, b),
        1 => Expr::sub(a, b),
        2 => Expr::mul(a, b),
        _ => Expr::add(a, Expr::int(rng.gen_range(1..4))),
    }
}

fn random_formula(rng: &mut ChaCha8Rng, vars: &[&str]) -> Formula {
    let ops = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];
    let atom = |rng: &mut ChaCha8Rng| Formula::cmp(ops[rng.gen_range(0..6)], random_expr(rng, vars, 2), random_expr(rng, vars, 1));
    match rng.gen_range(0..4) {
        0 => Formula::And(vec![atom(rng), atom(rng)]),
        1 => Formula::Or(vec![atom(rng), atom(rng)]),
        2 => Formula::not(atom(rng)),
        _ => atom(rng),
    }
}

fn random_body(rng: &mut ChaCha8Rng, vars: &[&str], depth: u32) -> Vec<Stmt> {
    let n = rng.gen_range(1..=3);
    (0..n)
        .map(|_| {
            if depth > 0 && rng.gen_bool(0.4) {
                let cond = if rng.gen_bool(0.4) { Cond::Nondet } else { Cond::Formula(random_formula(rng, vars)) };
                Stmt::IfElse {
                    cond,
                    then_branch: random_body(rng, vars, depth - 1),
                    else_branch: if rng.gen_bool(0.7) { random_body(rng, vars, depth - 1) } else { Vec::new() },
                }
            } else {
                let target = vars[rng.gen_range(0..vars.len())].to_string();
                Stmt::Assign { target, expr: random_expr(rng, vars, 2) }
            }
        })
        .collect()
}

#[test]
fn transition_agrees_with_the_interpreter() {
    let vars = ["x", "y", "z"];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut compared = 0;
    while compared < 500 {
        let body = random_body(&mut rng, &vars, 2);
        let p = Program {
            name: "random".into(),
            vars: vars.iter().map(|v| v.to_string()).collect(),
            pre: Formula::True,
            loop_cond: Formula::True,
            body,
            post: Formula::True,
        };
        let tr = Transition::of(&p).unwrap();
        assert_eq!(tr.nondet.len(), count_nondet(&p.body));
        let state: State = vars.iter().map(|v| (v.to_string(), rat(rng.gen_range(-20..=20)))).collect();
        let choices: Vec<bool> = (0..tr.nondet.len()).map(|_| rng.gen_bool(0.5)).collect();
        let mut run = state.clone();
        exec_body_indexed(&p.body, &mut run, &mut |i| choices[i]).unwrap();
        assert_eq!(tr.apply(&state, &choices).unwrap(), run, "body {:?}", p.body);
        compared += 1;
    }
}
