//! Language-independent program model.
//!
//! A [`ProgramModel`] is a tree of regions. Each region is an ordered list of
//! statements; `for` loops own a body region, function definitions own a body
//! region. Variable accesses are recorded as flat [`VariableOccurrence`]
//! records pointing back at the statement (or loop header) that performs them,
//! classified as `define` (declaration), `set` (write) or `read`.
//!
//! Ids are dense indices. Loops are numbered in document (pre-order) order.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident, $prefix:literal) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub usize);

        impl $name {
            pub fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(
    /// Index into [`ProgramModel::loops`].
    LoopId,
    "loop"
);
id_type!(
    /// Index into [`ProgramModel::regions`]. Region 0 is the root.
    RegionId,
    "region"
);
id_type!(VarId, "var");
id_type!(CallId, "call");

pub const ROOT_REGION: RegionId = RegionId(0);

/// Scalars are modeled with a fixed transfer size.
pub const SCALAR_SIZE_BYTES: u64 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceLanguage {
    CLike,
    PythonLike,
    JavaLike,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElemType {
    Int,
    Float,
    Double,
}

impl ElemType {
    pub fn keyword(self) -> &'static str {
        match self {
            ElemType::Int => "int",
            ElemType::Float => "float",
            ElemType::Double => "double",
        }
    }

    pub fn size_bytes(self) -> u64 {
        match self {
            ElemType::Int | ElemType::Float => 4,
            ElemType::Double => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDecl {
    pub id: VarId,
    pub name: String,
    pub elem: ElemType,
    /// Declared length for 1-D arrays, `None` for scalars.
    pub len: Option<u64>,
    pub size_bytes: u64,
}

impl VariableDecl {
    pub fn is_array(&self) -> bool {
        self.len.is_some()
    }

    /// Semantic type name used for interface comparison, e.g. `float[]`.
    pub fn semantic_type(&self) -> String {
        if self.is_array() {
            format!("{}[]", self.elem.keyword())
        } else {
            self.elem.keyword().to_string()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Expr {
    /// Numeric literal, kept as written.
    Num(String),
    Var(VarId),
    Index {
        var: VarId,
        index: Box<Expr>,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Neg(Box<Expr>),
}

impl Expr {
    /// Calls `f` on every variable referenced anywhere in the expression.
    pub fn visit_vars(&self, f: &mut impl FnMut(VarId)) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => f(*v),
            Expr::Index { var, index } => {
                f(*var);
                index.visit_vars(f);
            }
            Expr::Binary { lhs, rhs, .. } => {
                lhs.visit_vars(f);
                rhs.visit_vars(f);
            }
            Expr::Neg(e) => e.visit_vars(f),
        }
    }

    pub fn vars(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        self.visit_vars(&mut |v| {
            if !out.contains(&v) {
                out.push(v)
            }
        });
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LValue {
    pub var: VarId,
    pub index: Option<Expr>,
}

/// A function block that has been swapped for a device library call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplacedBlock {
    pub record_id: String,
    pub replacement_name: String,
    pub speedup_hint: f64,
    /// CPU cost of one execution of the original block, in cost units.
    pub original_cpu_time: f64,
    /// Variables the original block touched, in first-occurrence order.
    pub args: Vec<VarId>,
    /// Human-readable description of what was replaced.
    pub origin: String,
}

impl ReplacedBlock {
    pub fn replaced_time(&self) -> f64 {
        self.original_cpu_time / self.speedup_hint
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Stmt {
    Decl {
        var: VarId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        init: Option<String>,
    },
    /// Marks a callee as side-effect free.
    Pure {
        name: String,
    },
    Func {
        name: String,
        body: RegionId,
    },
    Assign {
        target: LValue,
        value: Expr,
    },
    Call {
        call: CallId,
    },
    Loop {
        id: LoopId,
    },
    Replaced(ReplacedBlock),
    /// Statement text from an external frontend; its effects are given only
    /// by the occurrence list.
    Opaque {
        text: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub id: RegionId,
    pub enclosing_loop: Option<LoopId>,
    pub statements: Vec<Stmt>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopHeader {
    pub var: VarId,
    pub init: Expr,
    pub bound: Expr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopNode {
    pub id: LoopId,
    pub parent: Option<LoopId>,
    pub body: RegionId,
    pub header: LoopHeader,
    pub iter_count: u64,
    pub cpu_cost_per_iter: f64,
    pub gpu_cost_per_iter: f64,
    /// `false` marks a loop whose GPU execution yields wrong results.
    pub gpu_valid: bool,
    /// Whether cost metadata was written explicitly in the source.
    #[serde(default)]
    pub explicit_costs: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OccurrenceKind {
    Define,
    Set,
    Read,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableOccurrence {
    pub var: VarId,
    pub kind: OccurrenceKind,
    pub region: RegionId,
    /// Statement index within `region`; `None` for the header of the loop
    /// whose body is `region`.
    pub stmt: Option<usize>,
    pub size_bytes: u64,
    /// Variables appearing in the subscript, for array accesses.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub index_vars: Vec<VarId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionBlockCall {
    pub id: CallId,
    pub callee_name: String,
    /// Call site.
    pub region: RegionId,
    pub stmt: usize,
    pub args: Vec<Expr>,
    pub arg_types: Vec<String>,
    pub return_type: String,
    pub pure: bool,
    /// CPU cost of one call, in cost units.
    pub cpu_cost: f64,
    #[serde(default)]
    pub explicit_cost: bool,
}

/// Serializable content of a model; [`ProgramModel`] adds validated indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParts {
    pub source_language: SourceLanguage,
    pub variables: Vec<VariableDecl>,
    pub regions: Vec<Region>,
    pub loops: Vec<LoopNode>,
    pub calls: Vec<FunctionBlockCall>,
    pub occurrences: Vec<VariableOccurrence>,
}

#[derive(Clone, Debug, Default)]
struct Derived {
    /// Statement that owns each region, `None` for the root.
    region_owner: Vec<Option<(RegionId, usize)>>,
    /// Document-order number of every statement.
    stmt_order: Vec<Vec<u32>>,
    /// Where each loop statement sits.
    loop_site: Vec<(RegionId, usize)>,
    loop_end: Vec<u32>,
    occurrences_by_region: Vec<Vec<usize>>,
}

/// Immutable, validated program model.
#[derive(Clone, Debug)]
pub struct ProgramModel {
    parts: ModelParts,
    derived: Derived,
}

impl PartialEq for ProgramModel {
    fn eq(&self, other: &Self) -> bool {
        self.parts == other.parts
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct VarSets {
    pub defined: BTreeSet<VarId>,
    pub set: BTreeSet<VarId>,
    pub read: BTreeSet<VarId>,
}

impl ProgramModel {
    pub fn new(parts: ModelParts) -> Result<Self, ModelError> {
        let derived = validate(&parts)?;
        Ok(ProgramModel { parts, derived })
    }

    pub fn parts(&self) -> &ModelParts {
        &self.parts
    }

    pub fn into_parts(self) -> ModelParts {
        self.parts
    }

    pub fn source_language(&self) -> SourceLanguage {
        self.parts.source_language
    }

    pub fn variables(&self) -> &[VariableDecl] {
        &self.parts.variables
    }

    pub fn variable(&self, id: VarId) -> &VariableDecl {
        &self.parts.variables[id.0]
    }

    pub fn regions(&self) -> &[Region] {
        &self.parts.regions
    }

    pub fn region(&self, id: RegionId) -> &Region {
        &self.parts.regions[id.0]
    }

    pub fn loops(&self) -> &[LoopNode] {
        &self.parts.loops
    }

    pub fn loop_node(&self, id: LoopId) -> &LoopNode {
        &self.parts.loops[id.0]
    }

    pub fn calls(&self) -> &[FunctionBlockCall] {
        &self.parts.calls
    }

    pub fn occurrences(&self) -> &[VariableOccurrence] {
        &self.parts.occurrences
    }

    pub fn root_region(&self) -> RegionId {
        ROOT_REGION
    }

    pub fn check_loop(&self, id: LoopId) -> Result<(), ModelError> {
        if id.0 < self.parts.loops.len() {
            Ok(())
        } else {
            Err(ModelError::integrity(format!("unknown loop id {}", id.0)))
        }
    }

    pub fn check_region(&self, id: RegionId) -> Result<(), ModelError> {
        if id.0 < self.parts.regions.len() {
            Ok(())
        } else {
            Err(ModelError::integrity(format!("unknown region id {}", id.0)))
        }
    }

    /// Occurrences recorded in `region` (not in nested regions).
    pub fn occurrences_in(&self, region: RegionId) -> impl Iterator<Item = &VariableOccurrence> {
        self.derived.occurrences_by_region[region.0]
            .iter()
            .map(move |&i| &self.parts.occurrences[i])
    }

    /// Union of occurrences over the given regions, grouped by kind.
    pub fn region_var_sets<'a>(
        &self,
        regions: impl IntoIterator<Item = &'a RegionId>,
    ) -> Result<VarSets, ModelError> {
        let mut sets = VarSets::default();
        for &r in regions {
            self.check_region(r)?;
            for occ in self.occurrences_in(r) {
                let bucket = match occ.kind {
                    OccurrenceKind::Define => &mut sets.defined,
                    OccurrenceKind::Set => &mut sets.set,
                    OccurrenceKind::Read => &mut sets.read,
                };
                bucket.insert(occ.var);
            }
        }
        Ok(sets)
    }

    /// Enclosing loops of `id`, outermost first, excluding the loop itself.
    pub fn loop_ancestors(&self, id: LoopId) -> Result<Vec<LoopId>, ModelError> {
        self.check_loop(id)?;
        let mut chain = Vec::new();
        let mut cur = self.loop_node(id).parent;
        while let Some(p) = cur {
            chain.push(p);
            cur = self.loop_node(p).parent;
        }
        chain.reverse();
        Ok(chain)
    }

    /// Loops enclosing `region`, innermost first.
    pub fn enclosing_loops(&self, region: RegionId) -> Vec<LoopId> {
        let mut out = Vec::new();
        let mut cur = self.region(region).enclosing_loop;
        while let Some(l) = cur {
            out.push(l);
            cur = self.loop_node(l).parent;
        }
        out
    }

    /// True if `region` lies inside the body subtree of `loop_id`.
    pub fn region_in_loop(&self, region: RegionId, loop_id: LoopId) -> bool {
        let mut cur = self.region(region).enclosing_loop;
        while let Some(l) = cur {
            if l == loop_id {
                return true;
            }
            cur = self.loop_node(l).parent;
        }
        false
    }

    pub fn loop_in_subtree(&self, inner: LoopId, outer: LoopId) -> bool {
        let mut cur = Some(inner);
        while let Some(l) = cur {
            if l == outer {
                return true;
            }
            cur = self.loop_node(l).parent;
        }
        false
    }

    /// All loops in the subtree rooted at `id`, including `id`, in document order.
    pub fn loop_subtree(&self, id: LoopId) -> Vec<LoopId> {
        // Pre-order numbering makes a subtree a contiguous id range.
        let mut out = vec![id];
        for l in (id.0 + 1)..self.parts.loops.len() {
            let l = LoopId(l);
            if self.loop_in_subtree(l, id) {
                out.push(l);
            } else {
                break;
            }
        }
        out
    }

    /// Regions inside the loop body subtree, including the body itself.
    pub fn loop_regions(&self, id: LoopId) -> Vec<RegionId> {
        self.loop_subtree(id)
            .into_iter()
            .map(|l| self.loop_node(l).body)
            .collect()
    }

    pub fn children(&self, id: LoopId) -> Vec<LoopId> {
        self.parts
            .loops
            .iter()
            .filter(|l| l.parent == Some(id))
            .map(|l| l.id)
            .collect()
    }

    /// Product of trip counts of the loops strictly enclosing `id`.
    pub fn loop_multiplicity(&self, id: LoopId) -> u64 {
        match self.loop_node(id).parent {
            Some(p) => self.region_multiplicity(self.loop_node(p).body),
            None => 1,
        }
    }

    /// Product of trip counts of all loops enclosing `region`.
    pub fn region_multiplicity(&self, region: RegionId) -> u64 {
        self.enclosing_loops(region)
            .into_iter()
            .fold(1u64, |acc, l| acc.saturating_mul(self.loop_node(l).iter_count))
    }

    pub fn loop_site(&self, id: LoopId) -> (RegionId, usize) {
        self.derived.loop_site[id.0]
    }

    /// Statement that owns `region`, `None` for the root.
    pub fn region_owner(&self, region: RegionId) -> Option<(RegionId, usize)> {
        self.derived.region_owner[region.0]
    }

    pub fn stmt_order(&self, region: RegionId, stmt: usize) -> u32 {
        self.derived.stmt_order[region.0][stmt]
    }

    /// Document-order span `[header, end]` covered by a loop.
    pub fn loop_span(&self, id: LoopId) -> (u32, u32) {
        let (r, s) = self.loop_site(id);
        (self.stmt_order(r, s), self.derived.loop_end[id.0])
    }

    /// Document-order position of an occurrence.
    pub fn occurrence_order(&self, occ: &VariableOccurrence) -> u32 {
        match occ.stmt {
            Some(s) => self.stmt_order(occ.region, s),
            None => {
                let l = self.region(occ.region).enclosing_loop.expect("header occurrence in loop body");
                self.loop_span(l).0
            }
        }
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.parts.variables.iter().find(|v| v.name == name).map(|v| v.id)
    }

    /// Loop index variables of `id` and all loops nested inside it.
    pub fn subtree_index_vars(&self, id: LoopId) -> BTreeSet<VarId> {
        self.loop_subtree(id)
            .into_iter()
            .map(|l| self.loop_node(l).header.var)
            .collect()
    }

    /// Every replaced block in the model with its site.
    pub fn replaced_blocks(&self) -> Vec<(RegionId, usize, &ReplacedBlock)> {
        let mut out = Vec::new();
        for region in &self.parts.regions {
            for (i, s) in region.statements.iter().enumerate() {
                if let Stmt::Replaced(b) = s {
                    out.push((region.id, i, b));
                }
            }
        }
        out.sort_by_key(|(r, i, _)| self.stmt_order(*r, *i));
        out
    }

    /// Function definitions, `(name, body)` in document order.
    pub fn functions(&self) -> Vec<(&str, RegionId)> {
        self.region(ROOT_REGION)
            .statements
            .iter()
            .filter_map(|s| match s {
                Stmt::Func { name, body } => Some((name.as_str(), *body)),
                _ => None,
            })
            .collect()
    }
}

fn validate(parts: &ModelParts) -> Result<Derived, ModelError> {
    let err = |m: String| Err(ModelError::integrity(m));
    for (i, v) in parts.variables.iter().enumerate() {
        if v.id.0 != i {
            return err(format!("variables[{i}] has id {}", v.id.0));
        }
        if v.name.is_empty() {
            return err(format!("variables[{i}] has an empty name"));
        }
    }
    for (i, r) in parts.regions.iter().enumerate() {
        if r.id.0 != i {
            return err(format!("regions[{i}] has id {}", r.id.0));
        }
    }
    for (i, l) in parts.loops.iter().enumerate() {
        if l.id.0 != i {
            return err(format!("loops[{i}] has id {}", l.id.0));
        }
        if l.iter_count < 1 {
            return err(format!("loop {i} has iter_count 0"));
        }
        for (name, c) in [("cpu_cost_per_iter", l.cpu_cost_per_iter), ("gpu_cost_per_iter", l.gpu_cost_per_iter)] {
            if !(c.is_finite() && c >= 0.0) {
                return err(format!("loop {i} has invalid {name} {c}"));
            }
        }
        if let Some(p) = l.parent {
            if p.0 >= parts.loops.len() {
                return err(format!("loop {i} references unknown parent {}", p.0));
            }
        }
        if l.body.0 >= parts.regions.len() {
            return err(format!("loop {i} references unknown body region {}", l.body.0));
        }
    }
    for (i, c) in parts.calls.iter().enumerate() {
        if c.id.0 != i {
            return err(format!("calls[{i}] has id {}", c.id.0));
        }
        if c.callee_name.is_empty() {
            return err(format!("call {i} has an empty callee name"));
        }
        if !(c.cpu_cost.is_finite() && c.cpu_cost >= 0.0) {
            return err(format!("call {i} has invalid cpu_cost"));
        }
    }
    if parts.regions.is_empty() {
        return err("model has no root region".into());
    }
    if parts.regions[0].enclosing_loop.is_some() {
        return err("root region must not be enclosed by a loop".into());
    }

    let nvars = parts.variables.len();
    let check_var = |v: VarId, ctx: &str| -> Result<(), ModelError> {
        if v.0 < nvars {
            Ok(())
        } else {
            Err(ModelError::integrity(format!("{ctx} references undeclared variable {}", v.0)))
        }
    };
    let check_expr = |e: &Expr, ctx: &str| -> Result<(), ModelError> {
        let mut bad = None;
        e.visit_vars(&mut |v| {
            if v.0 >= nvars {
                bad = Some(v);
            }
        });
        match bad {
            Some(v) => Err(ModelError::integrity(format!("{ctx} references undeclared variable {}", v.0))),
            None => Ok(()),
        }
    };

    let mut d = Derived {
        region_owner: vec![None; parts.regions.len()],
        stmt_order: parts.regions.iter().map(|r| vec![0; r.statements.len()]).collect(),
        loop_site: vec![(RegionId(usize::MAX), 0); parts.loops.len()],
        loop_end: vec![0; parts.loops.len()],
        occurrences_by_region: vec![Vec::new(); parts.regions.len()],
    };
    let mut visited = vec![false; parts.regions.len()];
    let mut loop_seq = 0usize;
    let mut counter = 0u32;

    struct Walk<'a> {
        parts: &'a ModelParts,
        d: &'a mut Derived,
        visited: &'a mut [bool],
        loop_seq: &'a mut usize,
        counter: &'a mut u32,
    }

    fn walk(w: &mut Walk<'_>, region: RegionId) -> Result<(), ModelError> {
        let err = |m: String| Err(ModelError::integrity(m));
        if w.visited[region.0] {
            return err(format!("region {} is reachable twice", region.0));
        }
        w.visited[region.0] = true;
        let enclosing = w.parts.regions[region.0].enclosing_loop;
        for (k, stmt) in w.parts.regions[region.0].statements.iter().enumerate() {
            w.d.stmt_order[region.0][k] = *w.counter;
            *w.counter += 1;
            match stmt {
                Stmt::Loop { id } => {
                    let Some(l) = w.parts.loops.get(id.0) else {
                        return err(format!("region {} references unknown loop {}", region.0, id.0));
                    };
                    if id.0 != *w.loop_seq {
                        return err(format!("loop {} is out of document order (expected {})", id.0, w.loop_seq));
                    }
                    *w.loop_seq += 1;
                    if l.parent != enclosing {
                        return err(format!("loop {} parent does not match its enclosing region", id.0));
                    }
                    if w.parts.regions[l.body.0].enclosing_loop != Some(*id) {
                        return err(format!("body region of loop {} is not enclosed by it", id.0));
                    }
                    w.d.loop_site[id.0] = (region, k);
                    w.d.region_owner[l.body.0] = Some((region, k));
                    walk(w, l.body)?;
                    w.d.loop_end[id.0] = *w.counter - 1;
                }
                Stmt::Func { body, name } => {
                    if region != ROOT_REGION {
                        return err(format!("function {name} defined outside the root region"));
                    }
                    let Some(b) = w.parts.regions.get(body.0) else {
                        return err(format!("function {name} references unknown region {}", body.0));
                    };
                    if b.enclosing_loop.is_some() {
                        return err(format!("function {name} body is enclosed by a loop"));
                    }
                    w.d.region_owner[body.0] = Some((region, k));
                    walk(w, *body)?;
                }
                Stmt::Call { call } => {
                    let Some(c) = w.parts.calls.get(call.0) else {
                        return err(format!("region {} references unknown call {}", region.0, call.0));
                    };
                    if c.region != region || c.stmt != k {
                        return err(format!("call {} site does not match its statement", call.0));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    {
        let mut w = Walk { parts, d: &mut d, visited: &mut visited, loop_seq: &mut loop_seq, counter: &mut counter };
        walk(&mut w, ROOT_REGION)?;
    }
    if let Some(r) = visited.iter().position(|v| !v) {
        return err(format!("region {r} is not reachable from the root"));
    }
    if loop_seq != parts.loops.len() {
        return err(format!("{} loops declared but {} reachable", parts.loops.len(), loop_seq));
    }

    for region in &parts.regions {
        for (k, stmt) in region.statements.iter().enumerate() {
            let ctx = format!("region {} statement {k}", region.id.0);
            match stmt {
                Stmt::Decl { var, .. } => check_var(*var, &ctx)?,
                Stmt::Assign { target, value } => {
                    check_var(target.var, &ctx)?;
                    if let Some(i) = &target.index {
                        check_expr(i, &ctx)?;
                    }
                    check_expr(value, &ctx)?;
                }
                Stmt::Replaced(b) => {
                    for v in &b.args {
                        check_var(*v, &ctx)?;
                    }
                    if !(b.speedup_hint.is_finite() && b.speedup_hint > 0.0) {
                        return err(format!("{ctx}: speedup_hint must be positive"));
                    }
                }
                _ => {}
            }
        }
    }
    for l in &parts.loops {
        let ctx = format!("loop {} header", l.id.0);
        check_var(l.header.var, &ctx)?;
        check_expr(&l.header.init, &ctx)?;
        check_expr(&l.header.bound, &ctx)?;
    }
    for c in &parts.calls {
        let ctx = format!("call {}", c.id.0);
        match parts.regions.get(c.region.0).and_then(|r| r.statements.get(c.stmt)) {
            Some(Stmt::Call { call }) if *call == c.id => {}
            _ => return err(format!("{ctx} site is not a call statement")),
        }
        for a in &c.args {
            check_expr(a, &ctx)?;
        }
    }
    for (i, o) in parts.occurrences.iter().enumerate() {
        let ctx = format!("occurrences[{i}]");
        check_var(o.var, &ctx)?;
        for v in &o.index_vars {
            check_var(*v, &ctx)?;
        }
        let Some(r) = parts.regions.get(o.region.0) else {
            return err(format!("{ctx} references unknown region {}", o.region.0));
        };
        match o.stmt {
            Some(s) if s >= r.statements.len() => {
                return err(format!("{ctx} references missing statement {s} of region {}", o.region.0));
            }
            None if r.enclosing_loop.is_none() || d.region_owner[o.region.0].is_none() => {
                return err(format!("{ctx} is a header occurrence outside a loop body"));
            }
            None => {
                let l = r.enclosing_loop.unwrap();
                if parts.loops[l.0].body != o.region {
                    return err(format!("{ctx} is a header occurrence outside a loop body"));
                }
            }
            _ => {}
        }
        d.occurrences_by_region[o.region.0].push(i);
    }
    Ok(d)
}
