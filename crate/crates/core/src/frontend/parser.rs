//! Recursive-descent parser for the mini language. Lowers directly into
//! [`ModelParts`], assigning ids in document order.

use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{tokenize, Tok, Token};
use crate::error::ParseError;
use crate::ir::*;

/// Default trip count for loops whose bounds cannot be resolved.
pub const DEFAULT_TRIP_COUNT: u64 = 1000;
/// GPU per-iteration cost as a fraction of the CPU cost when not given.
pub const DEFAULT_GPU_COST_RATIO: f64 = 0.1;
pub const DEFAULT_CALL_COST: f64 = 1.0;

#[derive(Clone, Debug)]
pub struct ParseOptions {
    /// Values for symbolic loop bounds, by identifier.
    pub symbols: BTreeMap<String, i64>,
    pub default_trip_count: u64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { symbols: BTreeMap::new(), default_trip_count: DEFAULT_TRIP_COUNT }
    }
}

pub fn parse_mini_source(text: &str) -> Result<ProgramModel, ParseError> {
    parse_mini_source_with(text, &ParseOptions::default())
}

pub fn parse_mini_source_with(text: &str, opts: &ParseOptions) -> Result<ProgramModel, ParseError> {
    let mut p = Parser::new(tokenize(text)?, opts, false);
    p.program()?;
    Ok(ProgramModel::new(p.finish())?)
}

/// Parses a statement-list fragment (as stored in pattern DB records).
/// Undeclared identifiers are declared on first use: indexed names as float
/// arrays, everything else as int scalars. The statements end up in the body
/// of a single function named `snippet`.
pub fn parse_snippet(text: &str) -> Result<ProgramModel, ParseError> {
    let opts = ParseOptions::default();
    let mut p = Parser::new(tokenize(text)?, &opts, true);
    let body = p.new_region(None);
    p.push_stmt(ROOT_REGION, Stmt::Func { name: "snippet".into(), body });
    while !p.at_eof() {
        p.stmt(body)?;
    }
    Ok(ProgramModel::new(p.finish())?)
}

struct Parser<'o> {
    toks: Vec<Token>,
    pos: usize,
    opts: &'o ParseOptions,
    auto_declare: bool,
    parts: ModelParts,
    names: BTreeMap<String, VarId>,
    inits: BTreeMap<VarId, String>,
    pure: BTreeSet<String>,
}

#[derive(Default)]
struct Attrs {
    cpu: Option<f64>,
    gpu: Option<f64>,
    valid: Option<bool>,
}

impl<'o> Parser<'o> {
    fn new(toks: Vec<Token>, opts: &'o ParseOptions, auto_declare: bool) -> Self {
        let parts = ModelParts {
            source_language: SourceLanguage::CLike,
            variables: Vec::new(),
            regions: vec![Region { id: ROOT_REGION, enclosing_loop: None, statements: Vec::new() }],
            loops: Vec::new(),
            calls: Vec::new(),
            occurrences: Vec::new(),
        };
        Parser {
            toks,
            pos: 0,
            opts,
            auto_declare,
            parts,
            names: BTreeMap::new(),
            inits: BTreeMap::new(),
            pure: BTreeSet::new(),
        }
    }

    fn finish(self) -> ModelParts {
        self.parts
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.column)
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let (line, column) = self.here();
        Err(ParseError::Syntax { line, column, message: message.into() })
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Num(s) => format!("number `{s}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn eat(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat(p) {
            Ok(())
        } else {
            self.syntax(format!("expected `{p}`, found {}", Self::describe(self.peek())))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.pos += 1;
                Ok(s)
            }
            other => self.syntax(format!("expected identifier, found {}", Self::describe(&other))),
        }
    }

    fn number(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Num(s) => {
                self.pos += 1;
                Ok(s)
            }
            other => self.syntax(format!("expected number, found {}", Self::describe(&other))),
        }
    }

    fn new_region(&mut self, enclosing_loop: Option<LoopId>) -> RegionId {
        let id = RegionId(self.parts.regions.len());
        self.parts.regions.push(Region { id, enclosing_loop, statements: Vec::new() });
        id
    }

    fn push_stmt(&mut self, region: RegionId, stmt: Stmt) -> usize {
        let stmts = &mut self.parts.regions[region.0].statements;
        stmts.push(stmt);
        stmts.len() - 1
    }

    fn occ(&mut self, var: VarId, kind: OccurrenceKind, region: RegionId, stmt: Option<usize>, index_vars: Vec<VarId>) {
        let size_bytes = self.parts.variables[var.0].size_bytes;
        self.parts.occurrences.push(VariableOccurrence { var, kind, region, stmt, size_bytes, index_vars });
    }

    fn read_occs(&mut self, e: &Expr, region: RegionId, stmt: Option<usize>) {
        match e {
            Expr::Num(_) => {}
            Expr::Var(v) => self.occ(*v, OccurrenceKind::Read, region, stmt, Vec::new()),
            Expr::Index { var, index } => {
                self.occ(*var, OccurrenceKind::Read, region, stmt, index.vars());
                self.read_occs(index, region, stmt);
            }
            Expr::Binary { lhs, rhs, .. } => {
                self.read_occs(lhs, region, stmt);
                self.read_occs(rhs, region, stmt);
            }
            Expr::Neg(e) => self.read_occs(e, region, stmt),
        }
    }

    fn declare(&mut self, name: String, elem: ElemType, len: Option<u64>) -> VarId {
        let id = VarId(self.parts.variables.len());
        let size_bytes = match len {
            Some(n) => n.saturating_mul(elem.size_bytes()),
            None => SCALAR_SIZE_BYTES,
        };
        self.parts.variables.push(VariableDecl { id, name: name.clone(), elem, len, size_bytes });
        self.names.insert(name, id);
        id
    }

    fn resolve(&mut self, name: &str, line: usize, column: usize, indexed: bool) -> Result<VarId, ParseError> {
        if let Some(&v) = self.names.get(name) {
            return Ok(v);
        }
        if self.auto_declare {
            let v = if indexed {
                self.declare(name.to_string(), ElemType::Float, Some(1))
            } else {
                self.declare(name.to_string(), ElemType::Int, None)
            };
            let k = self.push_stmt(ROOT_REGION, Stmt::Decl { var: v, init: None });
            self.occ(v, OccurrenceKind::Define, ROOT_REGION, Some(k), Vec::new());
            return Ok(v);
        }
        Err(ParseError::Semantic { line, column, message: format!("use of undeclared identifier `{name}`") })
    }

    fn program(&mut self) -> Result<(), ParseError> {
        while !self.at_eof() {
            match self.peek().clone() {
                Tok::Ident(kw) if kw == "void" => self.func()?,
                Tok::Ident(kw) if kw == "pure" => {
                    self.pos += 1;
                    let name = self.ident()?;
                    self.expect(";")?;
                    self.pure.insert(name.clone());
                    self.push_stmt(ROOT_REGION, Stmt::Pure { name });
                }
                Tok::Ident(kw) if elem_type(&kw).is_some() => self.decl()?,
                other => return self.syntax(format!("expected declaration or function, found {}", Self::describe(&other))),
            }
        }
        Ok(())
    }

    fn decl(&mut self) -> Result<(), ParseError> {
        let elem = elem_type(&self.ident()?).expect("checked by caller");
        let (line, column) = self.here();
        let name = self.ident()?;
        if self.names.contains_key(&name) {
            return Err(ParseError::Semantic { line, column, message: format!("redeclaration of `{name}`") });
        }
        let len = if self.eat("[") {
            let n = self.number()?;
            let Ok(n) = n.parse::<u64>() else {
                return self.syntax(format!("array length must be a non-negative integer, found `{n}`"));
            };
            self.expect("]")?;
            Some(n)
        } else {
            None
        };
        let init = if len.is_none() && self.eat("=") {
            let neg = self.eat("-");
            let n = self.number()?;
            Some(if neg { format!("-{n}") } else { n })
        } else {
            None
        };
        self.expect(";")?;
        let var = self.declare(name, elem, len);
        if let Some(i) = &init {
            self.inits.insert(var, i.clone());
        }
        let k = self.push_stmt(ROOT_REGION, Stmt::Decl { var, init });
        self.occ(var, OccurrenceKind::Define, ROOT_REGION, Some(k), Vec::new());
        Ok(())
    }

    fn func(&mut self) -> Result<(), ParseError> {
        self.ident()?; // void
        let name = self.ident()?;
        self.expect("(")?;
        self.expect(")")?;
        let body = self.new_region(None);
        self.push_stmt(ROOT_REGION, Stmt::Func { name, body });
        self.block(body)
    }

    fn block(&mut self, region: RegionId) -> Result<(), ParseError> {
        self.expect("{")?;
        while !self.eat("}") {
            if self.at_eof() {
                return self.syntax("expected `}`, found end of input");
            }
            self.stmt(region)?;
        }
        Ok(())
    }

    fn stmt(&mut self, region: RegionId) -> Result<(), ParseError> {
        if self.is_keyword("for") {
            return self.for_loop(region);
        }
        let (line, column) = self.here();
        let name = self.ident()?;
        match self.peek() {
            Tok::Punct("(") => self.call(region, name),
            Tok::Punct("[") | Tok::Punct("=") => {
                let indexed = matches!(self.peek(), Tok::Punct("["));
                let var = self.resolve(&name, line, column, indexed)?;
                let index = if self.eat("[") {
                    let e = self.expr()?;
                    self.expect("]")?;
                    Some(e)
                } else {
                    None
                };
                self.expect("=")?;
                let value = self.expr()?;
                self.expect(";")?;
                let target = LValue { var, index };
                let k = self.push_stmt(region, Stmt::Assign { target: target.clone(), value: value.clone() });
                let index_vars = target.index.as_ref().map(Expr::vars).unwrap_or_default();
                self.occ(var, OccurrenceKind::Set, region, Some(k), index_vars);
                if let Some(i) = &target.index {
                    self.read_occs(i, region, Some(k));
                }
                self.read_occs(&value, region, Some(k));
                Ok(())
            }
            other => {
                let other = other.clone();
                self.syntax(format!("expected `=`, `[` or `(` after `{name}`, found {}", Self::describe(&other)))
            }
        }
    }

    fn call(&mut self, region: RegionId, callee: String) -> Result<(), ParseError> {
        self.expect("(")?;
        let mut args = Vec::new();
        if !self.eat(")") {
            loop {
                args.push(self.expr()?);
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        let attrs = self.attrs(&["cpu"])?;
        self.expect(";")?;
        let id = CallId(self.parts.calls.len());
        let k = self.push_stmt(region, Stmt::Call { call: id });
        let pure = self.pure.contains(&callee);
        let arg_types = args.iter().map(|a| self.expr_type(a)).collect();
        for a in &args {
            match a {
                Expr::Var(v) if self.parts.variables[v.0].is_array() => {
                    self.occ(*v, OccurrenceKind::Read, region, Some(k), Vec::new());
                    if !pure {
                        self.occ(*v, OccurrenceKind::Set, region, Some(k), Vec::new());
                    }
                }
                other => self.read_occs(other, region, Some(k)),
            }
        }
        self.parts.calls.push(FunctionBlockCall {
            id,
            callee_name: callee,
            region,
            stmt: k,
            args,
            arg_types,
            return_type: "void".into(),
            pure,
            cpu_cost: attrs.cpu.unwrap_or(DEFAULT_CALL_COST),
            explicit_cost: attrs.cpu.is_some(),
        });
        Ok(())
    }

    fn for_loop(&mut self, region: RegionId) -> Result<(), ParseError> {
        self.pos += 1; // for
        self.expect("(")?;
        let (line, column) = self.here();
        let name = self.ident()?;
        let var = self.resolve(&name, line, column, false)?;
        self.expect("=")?;
        let init = self.expr()?;
        self.expect(";")?;
        self.expect_same_ident(&name)?;
        self.expect("<")?;
        let bound = self.expr()?;
        self.expect(";")?;
        self.expect_same_ident(&name)?;
        self.expect("++")?;
        self.expect(")")?;
        let attrs = self.attrs(&["cpu", "gpu", "valid"])?;

        let id = LoopId(self.parts.loops.len());
        let parent = self.parts.regions[region.0].enclosing_loop;
        let body = self.new_region(Some(id));
        let iter_count = self.trip_count(&init, &bound);
        self.parts.loops.push(LoopNode {
            id,
            parent,
            body,
            header: LoopHeader { var, init: init.clone(), bound: bound.clone() },
            iter_count,
            cpu_cost_per_iter: 0.0,
            gpu_cost_per_iter: 0.0,
            gpu_valid: true,
            explicit_costs: false,
        });
        self.push_stmt(region, Stmt::Loop { id });
        self.read_occs(&init, body, None);
        self.occ(var, OccurrenceKind::Set, body, None, Vec::new());
        self.occ(var, OccurrenceKind::Read, body, None, Vec::new());
        self.read_occs(&bound, body, None);

        self.block(body)?;

        let work = self.parts.regions[body.0]
            .statements
            .iter()
            .map(|s| match s {
                Stmt::Assign { value, target } => {
                    1 + count_ops(value) + target.index.as_ref().map_or(0, count_ops)
                }
                Stmt::Call { .. } => 1,
                _ => 0,
            })
            .sum::<usize>();
        let cpu = attrs.cpu.unwrap_or_else(|| (work as f64).max(1.0));
        let gpu = attrs.gpu.unwrap_or(cpu * DEFAULT_GPU_COST_RATIO);
        let l = &mut self.parts.loops[id.0];
        l.cpu_cost_per_iter = cpu;
        l.gpu_cost_per_iter = gpu;
        l.gpu_valid = attrs.valid.unwrap_or(true);
        l.explicit_costs = attrs.cpu.is_some() || attrs.gpu.is_some() || attrs.valid.is_some();
        Ok(())
    }

    fn expect_same_ident(&mut self, name: &str) -> Result<(), ParseError> {
        let got = self.ident()?;
        if got != name {
            self.pos -= 1;
            return self.syntax(format!("loop header must use `{name}` throughout, found `{got}`"));
        }
        Ok(())
    }

    fn attrs(&mut self, allowed: &[&str]) -> Result<Attrs, ParseError> {
        let mut a = Attrs::default();
        if !self.eat("[") {
            return Ok(a);
        }
        loop {
            let key = self.ident()?;
            if !allowed.contains(&key.as_str()) {
                self.pos -= 1;
                return self.syntax(format!("unknown attribute `{key}`"));
            }
            self.expect("=")?;
            if key == "valid" {
                match self.ident()?.as_str() {
                    "true" => a.valid = Some(true),
                    "false" => a.valid = Some(false),
                    _ => {
                        self.pos -= 1;
                        return self.syntax("`valid` takes `true` or `false`");
                    }
                }
            } else {
                let n = self.number()?;
                let v: f64 = n.parse().expect("lexer validated number");
                if key == "cpu" {
                    a.cpu = Some(v);
                } else {
                    a.gpu = Some(v);
                }
            }
            if self.eat("]") {
                return Ok(a);
            }
            self.expect(",")?;
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat("+") {
                BinOp::Add
            } else if self.eat("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat("*") {
                BinOp::Mul
            } else if self.eat("/") {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let (line, column) = self.here();
        match self.peek().clone() {
            Tok::Num(n) => {
                self.pos += 1;
                Ok(Expr::Num(n))
            }
            Tok::Ident(name) => {
                self.pos += 1;
                let indexed = matches!(self.peek(), Tok::Punct("["));
                let var = self.resolve(&name, line, column, indexed)?;
                if self.eat("[") {
                    let index = self.expr()?;
                    self.expect("]")?;
                    Ok(Expr::Index { var, index: Box::new(index) })
                } else {
                    Ok(Expr::Var(var))
                }
            }
            Tok::Punct("(") => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            other => self.syntax(format!("expected expression, found {}", Self::describe(&other))),
        }
    }

    fn expr_type(&self, e: &Expr) -> String {
        fn rank(t: &str) -> u8 {
            match t {
                "int" => 0,
                "float" => 1,
                _ => 2,
            }
        }
        match e {
            Expr::Num(n) => {
                if n.contains(['.', 'e', 'E']) {
                    "double".into()
                } else {
                    "int".into()
                }
            }
            Expr::Var(v) => self.parts.variables[v.0].semantic_type(),
            Expr::Index { var, .. } => self.parts.variables[var.0].elem.keyword().into(),
            Expr::Neg(e) => self.expr_type(e),
            Expr::Binary { lhs, rhs, .. } => {
                let (l, r) = (self.expr_type(lhs), self.expr_type(rhs));
                if rank(&l) >= rank(&r) {
                    l
                } else {
                    r
                }
            }
        }
    }

    fn trip_count(&self, init: &Expr, bound: &Expr) -> u64 {
        match (self.eval(init), self.eval(bound)) {
            (Some(lo), Some(hi)) => {
                let n = (hi - lo).floor();
                if n.is_finite() && n >= 1.0 {
                    n.min(u64::MAX as f64) as u64
                } else {
                    1
                }
            }
            _ => self.opts.default_trip_count.max(1),
        }
    }

    fn eval(&self, e: &Expr) -> Option<f64> {
        let v = match e {
            Expr::Num(n) => n.parse().ok()?,
            Expr::Var(v) => {
                let name = &self.parts.variables[v.0].name;
                if let Some(&x) = self.opts.symbols.get(name) {
                    x as f64
                } else {
                    self.inits.get(v)?.parse().ok()?
                }
            }
            Expr::Index { .. } => return None,
            Expr::Neg(e) => -self.eval(e)?,
            Expr::Binary { op, lhs, rhs } => {
                let (a, b) = (self.eval(lhs)?, self.eval(rhs)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div if b != 0.0 => a / b,
                    BinOp::Div => return None,
                }
            }
        };
        v.is_finite().then_some(v)
    }
}

fn elem_type(kw: &str) -> Option<ElemType> {
    match kw {
        "int" => Some(ElemType::Int),
        "float" => Some(ElemType::Float),
        "double" => Some(ElemType::Double),
        _ => None,
    }
}

fn count_ops(e: &Expr) -> usize {
    match e {
        Expr::Num(_) | Expr::Var(_) => 0,
        Expr::Index { index, .. } => count_ops(index),
        Expr::Binary { lhs, rhs, .. } => 1 + count_ops(lhs) + count_ops(rhs),
        Expr::Neg(e) => 1 + count_ops(e),
    }
}
