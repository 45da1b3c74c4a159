//! Characteristic vectors: counts of syntax-node kinds over a block.
//!
//! Dimensions, in order: assignment, loop, call, additive operator,
//! multiplicative operator, array access, scalar reference, constant.
//! Identifiers never enter the vector, so renaming leaves it unchanged.
//! A loop header contributes one loop plus its init and bound expressions.

use serde::Serialize;

use crate::ir::*;

pub const DIMENSIONS: usize = 8;

pub type CharVector = [u64; DIMENSIONS];

const ASSIGN: usize = 0;
const LOOP: usize = 1;
const CALL: usize = 2;
const ADDITIVE: usize = 3;
const MULTIPLICATIVE: usize = 4;
const ARRAY: usize = 5;
const SCALAR: usize = 6;
const CONSTANT: usize = 7;

pub const DIMENSION_NAMES: [&str; DIMENSIONS] =
    ["assignment", "loop", "call", "additive", "multiplicative", "array_access", "scalar_ref", "constant"];

/// The block a vector is computed over.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Subtree {
    Region(RegionId),
    Loop(LoopId),
}

pub fn characteristic_vector(model: &ProgramModel, subtree: Subtree) -> CharVector {
    let mut v = [0; DIMENSIONS];
    match subtree {
        Subtree::Region(r) => add_region(model, r, &mut v),
        Subtree::Loop(l) => add_loop(model, l, &mut v),
    }
    v
}

pub fn characteristic_vector_of_region(model: &ProgramModel, region: RegionId) -> CharVector {
    characteristic_vector(model, Subtree::Region(region))
}

/// `1 - L1(p, q) / (|p| + |q|)`; 1.0 for two zero vectors.
pub fn similarity(p: &CharVector, q: &CharVector) -> f64 {
    let norm: u64 = p.iter().chain(q).sum();
    if norm == 0 {
        return 1.0;
    }
    let dist: u64 = p.iter().zip(q).map(|(a, b)| a.abs_diff(*b)).sum();
    1.0 - dist as f64 / norm as f64
}

fn add_region(model: &ProgramModel, region: RegionId, v: &mut CharVector) {
    for (k, stmt) in model.region(region).statements.iter().enumerate() {
        match stmt {
            Stmt::Assign { target, value } => {
                v[ASSIGN] += 1;
                match &target.index {
                    Some(i) => {
                        v[ARRAY] += 1;
                        add_expr(i, v);
                    }
                    None => v[SCALAR] += 1,
                }
                add_expr(value, v);
            }
            Stmt::Loop { id } => add_loop(model, *id, v),
            Stmt::Call { call } => {
                v[CALL] += 1;
                for a in &model.calls()[call.0].args {
                    add_expr(a, v);
                }
            }
            Stmt::Replaced(b) => {
                v[CALL] += 1;
                v[SCALAR] += b.args.len() as u64;
            }
            Stmt::Func { body, .. } => add_region(model, *body, v),
            Stmt::Opaque { .. } => {
                for o in model.occurrences_in(region).filter(|o| o.stmt == Some(k)) {
                    if model.variable(o.var).is_array() {
                        v[ARRAY] += 1;
                    } else {
                        v[SCALAR] += 1;
                    }
                }
            }
            Stmt::Decl { .. } | Stmt::Pure { .. } => {}
        }
    }
}

fn add_loop(model: &ProgramModel, id: LoopId, v: &mut CharVector) {
    let l = model.loop_node(id);
    v[LOOP] += 1;
    add_expr(&l.header.init, v);
    add_expr(&l.header.bound, v);
    add_region(model, l.body, v);
}

fn add_expr(e: &Expr, v: &mut CharVector) {
    match e {
        Expr::Num(_) => v[CONSTANT] += 1,
        Expr::Var(_) => v[SCALAR] += 1,
        Expr::Index { index, .. } => {
            v[ARRAY] += 1;
            add_expr(index, v);
        }
        Expr::Binary { op, lhs, rhs } => {
            match op {
                BinOp::Add | BinOp::Sub => v[ADDITIVE] += 1,
                BinOp::Mul | BinOp::Div => v[MULTIPLICATIVE] += 1,
            }
            add_expr(lhs, v);
            add_expr(rhs, v);
        }
        Expr::Neg(e) => add_expr(e, v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_mini_source, parse_snippet};

    fn snippet_vec(s: &str) -> CharVector {
        let m = parse_snippet(s).unwrap();
        characteristic_vector_of_region(&m, m.functions()[0].1)
    }

    #[test]
    fn empty_region_is_zero() {
        let m = parse_mini_source("void main() { }").unwrap();
        assert_eq!(characteristic_vector_of_region(&m, m.functions()[0].1), [0; DIMENSIONS]);
    }

    #[test]
    fn counts_by_hand() {
        // loop(1) + init const + bound scalar; assign; a[i] array + scalar; b[i] array + scalar; * ; 2.0 const
        let v = snippet_vec("for (i = 0; i < n; i++) { a[i] = b[i] * 2.0; }");
        assert_eq!(v, [1, 1, 0, 0, 1, 2, 3, 2]);
    }

    #[test]
    fn rename_invariant() {
        let a = snippet_vec("for (i = 0; i < n; i++) { c[i] = a[i] + b[i] - 1; }");
        let b = snippet_vec("for (q = 0; q < len; q++) { out[q] = x[q] + y[q] - 1; }");
        assert_eq!(a, b);
    }

    #[test]
    fn similarity_bounds() {
        let a = [1, 2, 0, 0, 0, 0, 0, 0];
        let b = [0, 0, 3, 0, 0, 0, 0, 0];
        assert_eq!(similarity(&a, &a), 1.0);
        assert_eq!(similarity(&a, &b), 0.0);
        // L1 = 1, norm sum = 5
        let c = [1, 1, 0, 0, 0, 0, 0, 0];
        assert!((similarity(&a, &c) - (1.0 - 1.0 / 5.0)).abs() < 1e-12);
        assert_eq!(similarity(&a, &c), similarity(&c, &a));
    }
}
