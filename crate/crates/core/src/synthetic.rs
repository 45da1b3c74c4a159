//! Random mini-language programs for property tests and search benchmarks.
//!
//! Programs are generated as source text and parsed, so they exercise the
//! frontend as well. Loop bounds are small constants; some loops run once.

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::frontend::parse_mini_source;
use crate::ir::ProgramModel;

#[derive(Clone, Debug)]
pub struct SyntheticParams {
    /// Deepest loop nest.
    pub max_depth: usize,
    /// Declared variables, loop indices included.
    pub max_vars: usize,
    pub max_loops: usize,
    /// Items per statement list.
    pub max_items: usize,
    /// Chance that a loop writes a scalar (and so fails the screen).
    pub scalar_write_rate: f64,
    /// Chance that a GPU placement of a loop is marked invalid.
    pub invalid_rate: f64,
    /// Chance that a statement list item is a call.
    pub call_rate: f64,
    /// Chance that an array write is subscripted by every enclosing index
    /// rather than the innermost one, which keeps outer loops parallelizable.
    pub nest_write_rate: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            max_depth: 4,
            max_vars: 6,
            max_loops: 8,
            max_items: 3,
            scalar_write_rate: 0.2,
            invalid_rate: 0.0,
            call_rate: 0.1,
            nest_write_rate: 0.5,
        }
    }
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    p: &'a SyntheticParams,
    arrays: Vec<String>,
    scalars: Vec<String>,
    indices: Vec<String>,
    loops: usize,
    out: String,
}

impl Gen<'_> {
    fn data_vars(&self) -> Vec<String> {
        self.arrays.iter().chain(&self.scalars).cloned().collect()
    }

    fn subscript(&mut self, scope: &[usize]) -> String {
        match scope.choose(&mut self.rng) {
            Some(&d) => self.indices[d].clone(),
            None => "0".into(),
        }
    }

    fn operand(&mut self, scope: &[usize]) -> String {
        let vars = self.data_vars();
        if vars.is_empty() || self.rng.gen_bool(0.2) {
            return format!("{}.5", self.rng.gen_range(0..4));
        }
        let v = vars.choose(&mut self.rng).unwrap().clone();
        if self.arrays.contains(&v) {
            format!("{v}[{}]", self.subscript(scope))
        } else {
            v
        }
    }

    fn statement(&mut self, scope: &[usize], indent: usize) {
        let pad = "    ".repeat(indent);
        if self.rng.gen_bool(self.p.call_rate) {
            let arg = self.data_vars().choose(&mut self.rng).cloned().unwrap_or_default();
            let cost = self.rng.gen_range(1..20);
            let _ = writeln!(self.out, "{pad}report({arg}) [cpu={cost}.0];");
            return;
        }
        let write_scalar = !self.scalars.is_empty() && (self.arrays.is_empty() || self.rng.gen_bool(self.p.scalar_write_rate));
        let lhs = if write_scalar {
            self.scalars.choose(&mut self.rng).unwrap().clone()
        } else {
            let a = self.arrays.choose(&mut self.rng).unwrap().clone();
            let sub = if scope.is_empty() {
                "0".to_string()
            } else if self.rng.gen_bool(self.p.nest_write_rate) {
                scope.iter().map(|&d| self.indices[d].as_str()).collect::<Vec<_>>().join(" + ")
            } else {
                self.indices[*scope.last().unwrap()].clone()
            };
            format!("{a}[{sub}]")
        };
        let mut rhs = self.operand(scope);
        for _ in 0..self.rng.gen_range(0..3) {
            let op = if self.rng.gen_bool(0.5) { "+" } else { "*" };
            rhs = format!("{rhs} {op} {}", self.operand(scope));
        }
        let _ = writeln!(self.out, "{pad}{lhs} = {rhs};");
    }

    fn block(&mut self, scope: &mut Vec<usize>, indent: usize) {
        let n = self.rng.gen_range(1..=self.p.max_items);
        for _ in 0..n {
            let depth = scope.len();
            let can_loop = depth < self.p.max_depth && depth < self.indices.len() && self.loops < self.p.max_loops;
            if can_loop && self.rng.gen_bool(if depth == 0 { 0.8 } else { 0.5 }) {
                self.loops += 1;
                let i = self.indices[depth].clone();
                let trip = if self.rng.gen_bool(0.15) { 1 } else { self.rng.gen_range(2..=6) };
                let cpu = self.rng.gen_range(1..=20) * 5;
                let gpu = self.rng.gen_range(1..=20) * 5;
                let valid = !self.rng.gen_bool(self.p.invalid_rate);
                let pad = "    ".repeat(indent);
                let _ = writeln!(
                    self.out,
                    "{pad}for ({i} = 0; {i} < {trip}; {i}++) [cpu={}.{}, gpu={}.{:02}, valid={valid}] {{",
                    cpu / 10,
                    cpu % 10,
                    gpu / 100,
                    gpu % 100
                );
                scope.push(depth);
                self.block(scope, indent + 1);
                scope.pop();
                let _ = writeln!(self.out, "{pad}}}");
            } else {
                self.statement(scope, indent);
            }
        }
    }
}

/// Source text of a random program; the same seed gives the same text.
pub fn generate_source(seed: u64, params: &SyntheticParams) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.gen_range(1..=params.max_depth.max(1));
    let n_index = depth.min(params.max_vars.saturating_sub(2)).max(1);
    let n_data = params.max_vars.saturating_sub(n_index).max(1);
    let n_arrays = rng.gen_range(1..=n_data);
    let n_scalars = rng.gen_range(0..=n_data - n_arrays);
    let mut g = Gen {
        rng,
        p: params,
        arrays: (0..n_arrays).map(|k| format!("a{k}")).collect(),
        scalars: (0..n_scalars).map(|k| format!("s{k}")).collect(),
        indices: (0..n_index).map(|k| format!("i{k}")).collect(),
        loops: 0,
        out: String::new(),
    };
    for a in g.arrays.clone() {
        let size = 1usize << g.rng.gen_range(3..9);
        let _ = writeln!(g.out, "float {a}[{size}];");
    }
    for s in g.scalars.clone() {
        let _ = writeln!(g.out, "float {s};");
    }
    for i in g.indices.clone() {
        let _ = writeln!(g.out, "int {i};");
    }
    g.out.push_str("\nvoid main() {\n");
    let mut scope = Vec::new();
    g.block(&mut scope, 1);
    g.out.push_str("}\n");
    g.out
}

pub fn generate_model(seed: u64, params: &SyntheticParams) -> ProgramModel {
    let src = generate_source(seed, params);
    match parse_mini_source(&src) {
        Ok(m) => m,
        Err(e) => panic!("generated source does not parse: {e}\n{src}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_models_respect_bounds() {
        let p = SyntheticParams::default();
        for seed in 0..200 {
            let m = generate_model(seed, &p);
            assert!(m.variables().len() <= p.max_vars);
            assert!(m.loops().len() <= p.max_loops);
            assert!(m.loops().iter().all(|l| m.loop_ancestors(l.id).unwrap().len() < p.max_depth));
        }
        assert_eq!(generate_source(7, &p), generate_source(7, &p));
    }
}
