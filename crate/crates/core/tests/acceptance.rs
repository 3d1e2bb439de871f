//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use loopinv::ast::{rat, rat_to_f64, ratio, CmpOp, Cond, Domain, Expr, Formula, Program, State, Stmt};
use loopinv::checker::{
    check, encode_in, infer_loop, query, side_vc, Answer, InferConfig, InferOutcome, Prop, SolverConfig, Transition,
};
use loopinv::cli::{compare_tnorms, Settings};
use loopinv::clogic::{build_graph, t_norm, BuildOptions, EqMode, ParamRole, TNormKind};
use loopinv::frontend::{parse, parse_formula, print_formula};
use loopinv::templates::{reconstruct, strengthen, AtomKind, Discharge, Family, Template, TemplateAtom, TemplateFormula};
use loopinv::tracer::{count_nondet, exec_body_indexed};
use loopinv::trainer::{extract, train, ExtractionConfig, TrainConfig};

type Outcome = Result<String, String>;

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn load(name: &str) -> Program {
    let path = corpus_dir().join(format!("{name}.loop"));
    parse(&std::fs::read_to_string(&path).expect("corpus file")).expect("corpus file parses")
}

fn solver() -> SolverConfig {
    SolverConfig::default()
}

fn equivalent(a: &Formula, b: &Formula, domain: Domain) -> bool {
    let differ = Formula::Or(vec![
        Formula::And(vec![a.clone(), Formula::not(b.clone())]),
        Formula::And(vec![Formula::not(a.clone()), b.clone()]),
    ]);
    query(&Prop::from_formula(&differ, &BTreeMap::new()), domain, &solver()) == Answer::Unsat
}

fn valid_on(p: &Program, f: &Formula) -> bool {
    encode_in(p, f, p.natural_domain()).is_ok_and(|vcs| check(&vcs, &solver()).is_valid())
}

struct Run {
    name: String,
    program: Program,
    result: Result<InferOutcome, String>,
    time: Duration,
}

fn run_corpus(static_only: bool) -> Vec<Run> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "loop"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|path| {
            let name = path.file_stem().unwrap().to_string_lossy().into_owned();
            let program = load(&name);
            let mut cfg = InferConfig { budget: Duration::from_secs(600), ..InferConfig::default() };
            cfg.plan.static_only = static_only;
            let start = Instant::now();
            let result = infer_loop(&program, &cfg).map_err(|e| e.to_string());
            Run { name, program, result, time: start.elapsed() }
        })
        .collect()
}

fn find<'a>(runs: &'a [Run], name: &str) -> &'a Run {
    runs.iter().find(|r| r.name == name).expect("problem in corpus")
}

fn end_to_end(runs: &[Run], name: &str, expected: &str, limit: Duration) -> Outcome {
    let r = find(runs, name);
    let out = r.result.as_ref().map_err(|e| format!("{name}: {e}"))?;
    let want = parse_formula(expected).unwrap();
    let inv = print_formula(&out.invariant);
    if !out.result.is_valid() || !valid_on(&r.program, &out.invariant) {
        return Err(format!("{inv} is not valid"));
    }
    if !equivalent(&out.invariant, &want, r.program.natural_domain()) {
        return Err(format!("{inv} is not equivalent to {expected}"));
    }
    if r.time >= limit {
        return Err(format!("{inv} took {:.1}s (limit {}s)", r.time.as_secs_f64(), limit.as_secs()));
    }
    Ok(format!("{inv} in {:.2}s", r.time.as_secs_f64()))
}

fn criterion_4(runs: &[Run]) -> Outcome {
    let failed: Vec<&str> = runs.iter().filter(|r| r.result.is_err() || r.time > Duration::from_secs(600)).map(|r| r.name.as_str()).collect();
    let total: f64 = runs.iter().map(|r| r.time.as_secs_f64()).sum();
    if runs.len() != 12 {
        return Err(format!("corpus has {} problems", runs.len()));
    }
    if failed.is_empty() {
        Ok(format!("12/12 solved, {total:.1}s total"))
    } else {
        Err(format!("unsolved: {}", failed.join(", ")))
    }
}

fn criterion_5(full: &[Run], stat: &[Run]) -> Outcome {
    let solved = |rs: &[Run]| rs.iter().filter(|r| r.result.is_ok()).map(|r| r.name.clone()).collect::<Vec<_>>();
    let (f, s) = (solved(full), solved(stat));
    if !s.iter().all(|n| f.contains(n)) || s.len() >= f.len() {
        return Err(format!("static_only solved {s:?}, full solved {} problems", f.len()));
    }
    for p in ["problem1", "problem2"] {
        if s.iter().any(|n| n == p) {
            return Err(format!("{p} solved in static_only mode"));
        }
    }
    Ok(format!("static_only solves {}/{} ({}), both learned-constraint problems fail", s.len(), stat.len(), s.join(", ")))
}

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let seeds: Vec<u64> = (0..5).collect();
    let r = compare_tnorms(&corpus_dir().join("problem1.loop"), &Settings::default(), &seeds, dir.path()).map_err(|e| e.to_string())?;
    let mean = |k| r.mean_iterations(k).unwrap_or(f64::INFINITY);
    let (p, g, l) = (mean(TNormKind::Product), mean(TNormKind::Godel), mean(TNormKind::Lukasiewicz));
    let line = format!("mean epochs product {p:.1}, godel {g:.1}, lukasiewicz {l:.1} over {} seeds", seeds.len());
    if p <= g && p <= l {
        Ok(line)
    } else {
        Err(line)
    }
}

/// Uniform samples on the dyadic grid k / 2^24, where sums and products of
/// two samples are exact in f64.
fn grid(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0..=(1u32 << 24)) as f64 / (1u32 << 24) as f64
}

fn criterion_7() -> Outcome {
    const N: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = Vec::new();
    for k in TNormKind::ALL {
        let assoc_tol = if k == TNormKind::Product { 1e-12 } else { 0.0 };
        let mut bad = [0usize; 4];
        for _ in 0..N {
            let (a, b, c) = (grid(&mut rng), grid(&mut rng), grid(&mut rng));
            if t_norm(k, a, b) != t_norm(k, b, a) {
                bad[0] += 1;
            }
            if (t_norm(k, a, t_norm(k, b, c)) - t_norm(k, t_norm(k, a, b), c)).abs() > assoc_tol {
                bad[1] += 1;
            }
            let (lo, hi) = if b <= c { (b, c) } else { (c, b) };
            if t_norm(k, a, lo) > t_norm(k, a, hi) {
                bad[2] += 1;
            }
            if t_norm(k, a, 1.0) != a || t_norm(k, a, 0.0) != 0.0 {
                bad[3] += 1;
            }
        }
        for (axiom, n) in ["commutativity", "associativity", "monotonicity", "consistency"].iter().zip(bad) {
            if n > 0 {
                violations.push(format!("{k} {axiom}: {n}"));
            }
        }
    }
    let mut luk_witness = None;
    for _ in 0..N {
        let (a, b) = (grid(&mut rng).max(f64::EPSILON), grid(&mut rng).max(f64::EPSILON));
        for k in [TNormKind::Product, TNormKind::Godel] {
            if t_norm(k, a, b) <= 0.0 {
                violations.push(format!("property 1 fails for {k} at ({a}, {b})"));
            }
        }
        if luk_witness.is_none() && t_norm(TNormKind::Lukasiewicz, a, b) == 0.0 {
            luk_witness = Some((a, b));
        }
        let (mut t1, mut t2, t3) = (grid(&mut rng), grid(&mut rng), grid(&mut rng).max(f64::EPSILON));
        if t1 > t2 {
            std::mem::swap(&mut t1, &mut t2);
        }
        if t1 < t2 && t_norm(TNormKind::Product, t1, t3) >= t_norm(TNormKind::Product, t2, t3) {
            violations.push(format!("property 2 fails for product at ({t1}, {t2}, {t3})"));
        }
    }
    let Some((a, b)) = luk_witness else { return Err("no lukasiewicz witness for property 1".into()) };
    if violations.is_empty() {
        Ok(format!("4 axioms x 3 kinds x {N} checks, 0 violations; lukasiewicz property 1 witness ({a:.4}, {b:.4})"))
    } else {
        Err(violations.join("; "))
    }
}

fn random_atom(rng: &mut ChaCha8Rng, vars: &[&str]) -> Formula {
    let pick = |rng: &mut ChaCha8Rng| Expr::var(vars[rng.gen_range(0..vars.len())]);
    let lhs = match rng.gen_range(0..3) {
        0 => pick(rng),
        1 => Expr::add(pick(rng), pick(rng)),
        _ => Expr::mul(Expr::int(rng.gen_range(-3..4)), pick(rng)),
    };
    let rhs = Expr::Const(ratio(rng.gen_range(-300..300), 100));
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

fn margins_exceed(f: &Formula, s: &State, min: f64) -> bool {
    match f {
        Formula::True | Formula::False => true,
        Formula::Cmp(_, l, r) => rat_to_f64(&(l.eval(s).unwrap() - r.eval(s).unwrap())).abs() > min,
        Formula::Not(g) => margins_exceed(g, s, min),
        Formula::And(gs) | Formula::Or(gs) => gs.iter().all(|g| margins_exceed(g, s, min)),
    }
}

fn criterion_8() -> Outcome {
    let (scale, offset) = (5000.0, 1e-4);
    let vars = ["a", "b", "c", "d"];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut tested, mut agree, mut true_cases) = (0, 0, 0);
    while tested < 1000 {
        let n = rng.gen_range(1..=4);
        let f = random_formula(&mut rng, &vars[..n], 3);
        let state: State = vars[..n].iter().map(|v| (v.to_string(), ratio(rng.gen_range(-400..400), 100) + ratio(1, 7))).collect();
        if !margins_exceed(&f, &state, 2.0 * offset) {
            continue;
        }
        tested += 1;
        let truth = f.eval(&state).unwrap();
        true_cases += usize::from(truth);
        let t = TemplateFormula::from_formula(&f);
        let x: BTreeMap<String, f64> = state.iter().map(|(k, v)| (k.clone(), rat_to_f64(v))).collect();
        let mut all = true;
        for k in [TNormKind::Product, TNormKind::Godel] {
            let mut g = build_graph(&t, BuildOptions { tnorm: k, eq_mode: EqMode::Sigmoid, per_atom_scaling: false }).unwrap();
            g.set_role(|r| matches!(r, ParamRole::Scale { .. }), scale);
            g.set_role(|r| matches!(r, ParamRole::Offset { .. }), offset);
            let v = g.forward_map(&x).unwrap();
            all &= (v > 0.9) == truth && (v < 0.1) == !truth;
        }
        agree += usize::from(all);
    }
    let line = format!("{agree}/{tested} formulas agree under product and godel ({true_cases} true)");
    if agree == tested {
        Ok(line)
    } else {
        Err(line)
    }
}

fn random_template(rng: &mut ChaCha8Rng, depth: u32) -> TemplateFormula {
    let terms = [Expr::var("x"), Expr::var("y"), Expr::mul(Expr::var("x"), Expr::var("y")), Expr::pow(Expr::var("x"), 2)];
    if depth == 0 || rng.gen_bool(0.3) {
        let kind = [AtomKind::Eq, AtomKind::Ge, AtomKind::Gt, AtomKind::Le, AtomKind::Lt][rng.gen_range(0..5)];
        let n = rng.gen_range(1..=terms.len());
        let chosen: Vec<Expr> = terms[..n].to_vec();
        return if rng.gen_bool(0.7) {
            TemplateFormula::Atom(TemplateAtom::linear(kind, chosen))
        } else {
            TemplateFormula::Atom(TemplateAtom::bound(kind, chosen.into_iter().map(|t| (rat(rng.gen_range(-2..=2)), t)).collect()))
        };
    }
    match rng.gen_range(0..3) {
        0 => TemplateFormula::Not(Box::new(random_template(rng, depth - 1))),
        1 => TemplateFormula::And((0..rng.gen_range(2..4)).map(|_| random_template(rng, depth - 1)).collect()),
        _ => TemplateFormula::Or((0..rng.gen_range(2..4)).map(|_| random_template(rng, depth - 1)).collect()),
    }
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (h, floor) = (1e-6, 1e-3);
    let (mut graphs, mut checked, mut skipped, mut worst) = (0, 0, 0, 0.0f64);
    while graphs < 500 {
        let t = random_template(&mut rng, 3);
        let k = TNormKind::ALL[rng.gen_range(0..3)];
        let eq = if rng.gen_bool(0.5) { EqMode::Gaussian } else { EqMode::Sigmoid };
        let Ok(mut g) = build_graph(&t, BuildOptions { tnorm: k, eq_mode: eq, per_atom_scaling: rng.gen_bool(0.3) }) else { continue };
        if g.params.is_empty() {
            continue;
        }
        graphs += 1;
        for (p, r) in g.params.iter_mut().zip(g.roles.clone()) {
            *p = match r {
                ParamRole::Scale { .. } => rng.gen_range(0.5..3.0),
                ParamRole::Offset { .. } => rng.gen_range(0.01..0.3),
                ParamRole::Sigma => rng.gen_range(0.5..2.0),
                _ => rng.gen_range(-1.0..1.0),
            };
        }
        let feats: Vec<f64> = (0..g.num_features()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        g.forward(&feats);
        let grad = g.backward();
        for i in 0..g.params.len() {
            let orig = g.params[i];
            let mut diff = |step: f64| {
                g.params[i] = orig + step;
                let up = g.forward(&feats);
                g.params[i] = orig - step;
                let down = g.forward(&feats);
                g.params[i] = orig;
                (up - down) / (2.0 * step)
            };
            let (fd, fd_half) = (diff(h), diff(h / 2.0));
            // Two step sizes disagree only across a tie of min/max or a clip.
            if (fd - fd_half).abs() > 1e-6 * fd.abs().max(1.0) {
                skipped += 1;
                continue;
            }
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(floor);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    let line = format!("{graphs} graphs, {checked} adjoints checked ({skipped} at kinks), max relative error {worst:.2e}");
    if worst < 1e-4 && checked > 0 {
        Ok(line)
    } else {
        Err(line)
    }
}

/// Coefficients (per variable, then constant) of an equality `l == r`.
fn linear_row(f: &Formula, vars: &[&str]) -> Option<Vec<f64>> {
    let Formula::Cmp(CmpOp::Eq, l, r) = f else { return None };
    let at = |s: &State| Some(rat_to_f64(&(l.eval(s).ok()? - r.eval(s).ok()?)));
    let zero: State = vars.iter().map(|v| (v.to_string(), rat(0))).collect();
    let c = at(&zero)?;
    let mut row: Vec<f64> = vars
        .iter()
        .map(|v| {
            let mut s = zero.clone();
            s.insert(v.to_string(), rat(1));
            at(&s).map(|x| x - c)
        })
        .collect::<Option<_>>()?;
    row.push(c);
    Some(row)
}

fn orthonormal(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        let mut u = r.clone();
        for q in &basis {
            let d: f64 = u.iter().zip(q).map(|(a, b)| a * b).sum();
            u.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            basis.push(u.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

/// Smallest cosine between a row of `a` and its projection onto the span of `b`.
fn span_cosine(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let q = orthonormal(b);
    a.iter()
        .map(|r| {
            let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            let proj: f64 = q.iter().map(|v| r.iter().zip(v).map(|(x, y)| x * y).sum::<f64>().powi(2)).sum::<f64>().sqrt();
            proj / n
        })
        .fold(1.0, f64::min)
}

fn criterion_10() -> Outcome {
    let vars = ["a", "b", "c", "d"];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut good = 0;
    for run in 0..100u64 {
        let m = rng.gen_range(2..=3);
        let free = vars.len() - m;
        // Dependent variable j is an integer combination of the free ones.
        let defs: Vec<(Vec<i64>, i64)> =
            (0..m).map(|_| ((0..free).map(|_| rng.gen_range(-3..=3)).collect(), rng.gen_range(-5..=5))).collect();
        let data: Vec<State> = (0..30)
            .map(|_| {
                let xs: Vec<i64> = (0..free).map(|_| rng.gen_range(-10..=10)).collect();
                let mut s: State = xs.iter().enumerate().map(|(i, x)| (vars[i].to_string(), rat(*x))).collect();
                for (j, (c, b)) in defs.iter().enumerate() {
                    let v: i64 = c.iter().zip(&xs).map(|(c, x)| c * x).sum::<i64>() + b;
                    s.insert(vars[free + j].to_string(), rat(v));
                }
                s
            })
            .collect();
        let truth: Vec<Vec<f64>> = defs
            .iter()
            .enumerate()
            .map(|(j, (c, b))| {
                let mut row: Vec<f64> = c.iter().map(|&x| x as f64).collect();
                row.extend((0..m).map(|i| if i == j { -1.0 } else { 0.0 }));
                row.push(*b as f64);
                row
            })
            .collect();
        let atom = || TemplateFormula::Atom(TemplateAtom::linear(AtomKind::Eq, vars.iter().map(|v| Expr::var(*v)).collect()));
        let template = Template::new(TemplateFormula::And((0..m).map(|_| atom()).collect()), Family::Conjunction);
        let Ok(model) = train(&template, &data, &TrainConfig { seed: run, ..TrainConfig::default() }) else { continue };
        let Ok(f) = extract(&model, &template.formula, &ExtractionConfig::default()) else { continue };
        let parts = match &f {
            Formula::And(gs) => gs.clone(),
            other => vec![other.clone()],
        };
        let rows: Option<Vec<Vec<f64>>> = parts.iter().filter(|g| **g != Formula::True).map(|g| linear_row(g, &vars)).collect();
        let Some(rows) = rows else { continue };
        if orthonormal(&rows).len() == m && span_cosine(&truth, &rows) > 0.999 && span_cosine(&rows, &truth) > 0.999 {
            good += 1;
        }
    }
    let line = format!("{good}/100 runs recover the ground-truth equality space");
    if good >= 95 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn random_expr(rng: &mut ChaCha8Rng, vars: &[&str], depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.35) {
        return if rng.gen_bool(0.6) { Expr::var(vars[rng.gen_range(0..vars.len())]) } else { Expr::int(rng.gen_range(-5..=5)) };
    }
    let (a, b) = (random_expr(rng, vars, depth - 1), random_expr(rng, vars, depth - 1));
    match rng.gen_range(0..3) {
        0 => Expr::add(a, b),
        1 => Expr::sub(a, b),
        _ => Expr::mul(a, b),
    }
}

fn random_body(rng: &mut ChaCha8Rng, vars: &[&str], depth: u32) -> Vec<Stmt> {
    (0..rng.gen_range(1..=3))
        .map(|_| {
            if depth > 0 && rng.gen_bool(0.4) {
                let cond = if rng.gen_bool(0.4) {
                    Cond::Nondet
                } else {
                    let op = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge][rng.gen_range(0..6)];
                    Cond::Formula(Formula::cmp(op, random_expr(rng, vars, 2), random_expr(rng, vars, 1)))
                };
                Stmt::IfElse {
                    cond,
                    then_branch: random_body(rng, vars, depth - 1),
                    else_branch: if rng.gen_bool(0.7) { random_body(rng, vars, depth - 1) } else { Vec::new() },
                }
            } else {
                Stmt::Assign { target: vars[rng.gen_range(0..vars.len())].to_string(), expr: random_expr(rng, vars, 2) }
            }
        })
        .collect()
}

fn criterion_11() -> Outcome {
    let vars = ["x", "y", "z"];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mismatches = 0;
    for _ in 0..500 {
        let p = Program {
            name: "random".into(),
            vars: vars.iter().map(|v| v.to_string()).collect(),
            pre: Formula::True,
            loop_cond: Formula::True,
            body: random_body(&mut rng, &vars, 2),
            post: Formula::True,
        };
        let tr = Transition::of(&p).map_err(|e| e.to_string())?;
        let state: State = vars.iter().map(|v| (v.to_string(), rat(rng.gen_range(-20..=20)))).collect();
        let choices: Vec<bool> = (0..count_nondet(&p.body)).map(|_| rng.gen_bool(0.5)).collect();
        let mut stepped = state.clone();
        exec_body_indexed(&p.body, &mut stepped, &mut |i| choices[i]).map_err(|e| e.to_string())?;
        if tr.apply(&state, &choices).ok() != Some(stepped) {
            mismatches += 1;
        }
    }
    if mismatches == 0 {
        Ok("500/500 interpreter steps equal the transition relation".into())
    } else {
        Err(format!("{mismatches}/500 mismatches"))
    }
}

fn criterion_12(runs: &[Run]) -> Outcome {
    let mut failures = Vec::new();
    for r in runs {
        let Ok(out) = &r.result else {
            failures.push(format!("{}: unsolved", r.name));
            continue;
        };
        let domain = r.program.natural_domain();
        if query(&side_vc(&r.program), domain, &solver()) != Answer::Unsat {
            failures.push(format!("{}: side condition not discharged", r.name));
            continue;
        }
        let sp = strengthen(&r.program);
        let inner = valid_on(&sp.strengthened, &out.invariant);
        let proof = Discharge { side_condition_valid: true, invariant_valid: inner };
        match reconstruct(&out.invariant, &sp, proof) {
            Ok(full) if valid_on(&r.program, &full) => {}
            Ok(full) => failures.push(format!("{}: {} fails the original conditions", r.name, print_formula(&full))),
            Err(e) => failures.push(format!("{}: {e}", r.name)),
        }
    }
    if failures.is_empty() {
        Ok(format!("{}/{} problems: side condition discharged, reconstruction verified", runs.len(), runs.len()))
    } else {
        Err(failures.join("; "))
    }
}

fn main() {
    if std::process::Command::new(&solver().command).arg("-version").output().is_err() {
        println!("acceptance: solver `{}` not found, skipping", solver().command);
        return;
    }
    let full = run_corpus(false);
    let stat = run_corpus(true);
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("fig1 end to end", Box::new(|| end_to_end(&full, "fig1", "2 * t + u == 20", Duration::from_secs(60)))),
        (
            "problem 1 end to end",
            Box::new(|| end_to_end(&full, "problem1", "(t + u == 0 || t - u == 0) && t <= 0", Duration::from_secs(300))),
        ),
        (
            "problem 2 end to end",
            Box::new(|| end_to_end(&full, "problem2", "t + u == 0 && v + w == 0 && u + w >= 0", Duration::from_secs(300))),
        ),
        ("bundled corpus, full mode", Box::new(|| criterion_4(&full))),
        ("static-only ablation", Box::new(|| criterion_5(&full, &stat))),
        ("t-norm convergence ordering", Box::new(criterion_6)),
        ("t-norm axioms and properties", Box::new(criterion_7)),
        ("soundness sweep", Box::new(criterion_8)),
        ("gradient correctness", Box::new(criterion_9)),
        ("equality recovery", Box::new(criterion_10)),
        ("encoding differential test", Box::new(criterion_11)),
        ("strengthening round trip", Box::new(|| criterion_12(&full))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
