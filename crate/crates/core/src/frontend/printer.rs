//! Pretty-printer for the mini language. Output parses back to the same tree.

use std::fmt::Write;

use num_traits::Signed;

use crate::ast::{fmt_rational, Cond, Expr, Formula, Program, Stmt};

pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    expr_at(e, 0, &mut out);
    out
}

fn expr_at(e: &Expr, level: u8, out: &mut String) {
    let (my, text) = match e {
        Expr::Var(v) => {
            out.push_str(v);
            return;
        }
        Expr::Const(c) => {
            if c.is_integer() && !c.is_negative() {
                out.push_str(&fmt_rational(c));
            } else {
                let _ = write!(out, "({})", fmt_rational(c));
            }
            return;
        }
        Expr::Add(a, b) => (1, (a, b, " + ")),
        Expr::Sub(a, b) => (1, (a, b, " - ")),
        Expr::Mul(a, b) => (2, (a, b, " * ")),
        Expr::Div(a, b) => (2, (a, b, " / ")),
        Expr::Pow(a, n) => {
            let wrap = level > 3;
            if wrap {
                out.push('(');
            }
            expr_at(a, 4, out);
            let _ = write!(out, " ^ {n}");
            if wrap {
                out.push(')');
            }
            return;
        }
    };
    let (a, b, op) = text;
    let wrap = level > my;
    if wrap {
        out.push('(');
    }
    expr_at(a, my, out);
    out.push_str(op);
    expr_at(b, my + 1, out);
    if wrap {
        out.push(')');
    }
}

pub fn print_formula(f: &Formula) -> String {
    let mut out = String::new();
    formula_at(f, 0, &mut out);
    out
}

fn formula_at(f: &Formula, level: u8, out: &mut String) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Cmp(op, l, r) => {
            let wrap = level > 3;
            if wrap {
                out.push('(');
            }
            expr_at(l, 0, out);
            let _ = write!(out, " {} ", op.symbol());
            expr_at(r, 0, out);
            if wrap {
                out.push(')');
            }
        }
        Formula::Not(inner) => {
            out.push('!');
            formula_at(inner, 4, out);
        }
        Formula::And(fs) | Formula::Or(fs) => {
            let (my, sep) = if matches!(f, Formula::Or(_)) { (1, " || ") } else { (2, " && ") };
            let wrap = level > my;
            if wrap {
                out.push('(');
            }
            for (i, g) in fs.iter().enumerate() {
                if i > 0 {
                    out.push_str(sep);
                }
                formula_at(g, my + 1, out);
            }
            if wrap {
                out.push(')');
            }
        }
    }
}

fn stmts(body: &[Stmt], indent: usize, out: &mut String) {
    let pad = "    ".repeat(indent);
    for s in body {
        match s {
            Stmt::Assign { target, expr } => {
                let _ = writeln!(out, "{pad}{target} = {};", print_expr(expr));
            }
            Stmt::IfElse { cond, then_branch, else_branch } => {
                let c = match cond {
                    Cond::Nondet => "unknown()".to_string(),
                    Cond::Formula(f) => print_formula(f),
                };
                let _ = writeln!(out, "{pad}if ({c}) {{");
                stmts(then_branch, indent + 1, out);
                let _ = writeln!(out, "{pad}}} else {{");
                stmts(else_branch, indent + 1, out);
                let _ = writeln!(out, "{pad}}}");
            }
        }
    }
}

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "program {};", p.name);
    if !p.vars.is_empty() {
        let _ = writeln!(out, "vars {};", p.vars.join(", "));
    }
    let _ = writeln!(out, "pre: {};", print_formula(&p.pre));
    let _ = writeln!(out, "while ({}) {{", print_formula(&p.loop_cond));
    stmts(&p.body, 1, &mut out);
    out.push_str("}\n");
    let _ = writeln!(out, "post: {};", print_formula(&p.post));
    out
}
