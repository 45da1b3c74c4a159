//! Pretty printing of a [`ProgramModel`] in three surface syntaxes.
//!
//! The mini syntax is the canonical form: `parse ∘ print` is the identity on
//! models produced by the parser. Python and Java renderings exist for the
//! marker-based emission backends.

use crate::ir::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Syntax {
    Mini,
    Python,
    Java,
}

/// Hook used by code emission to add lines around loops.
pub trait Annotator {
    fn header(&self) -> Vec<String> {
        Vec::new()
    }
    /// Lines placed directly above the loop header, at the loop's indentation.
    fn before_loop(&self, _id: LoopId) -> Vec<String> {
        Vec::new()
    }
    fn after_loop(&self, _id: LoopId) -> Vec<String> {
        Vec::new()
    }
    /// Render the loop as a parallel construct (Java only).
    fn parallel(&self, _id: LoopId) -> bool {
        false
    }
}

pub struct Plain;

impl Annotator for Plain {}

pub fn pretty_print(model: &ProgramModel, syntax: Syntax) -> String {
    print_annotated(model, syntax, &Plain)
}

pub fn print_annotated(model: &ProgramModel, syntax: Syntax, ann: &dyn Annotator) -> String {
    let mut p = Printer { model, syntax, ann, out: String::new() };
    for line in ann.header() {
        p.line(0, &line);
    }
    let base = match syntax {
        Syntax::Java => {
            p.line(0, "import java.util.stream.IntStream;");
            p.line(0, "");
            p.line(0, "public class Candidate {");
            1
        }
        _ => 0,
    };
    let root = &model.region(ROOT_REGION).statements;
    let mut prev_func: Option<bool> = None;
    for (k, stmt) in root.iter().enumerate() {
        let is_func = matches!(stmt, Stmt::Func { .. });
        if let Some(prev) = prev_func {
            if prev || is_func {
                p.line(0, "");
            }
        }
        prev_func = Some(is_func);
        p.stmt(ROOT_REGION, k, base);
    }
    if syntax == Syntax::Java {
        p.line(0, "}");
    }
    p.out
}

struct Printer<'a> {
    model: &'a ProgramModel,
    syntax: Syntax,
    ann: &'a dyn Annotator,
    out: String,
}

impl Printer<'_> {
    fn line(&mut self, indent: usize, text: &str) {
        if !text.is_empty() {
            for _ in 0..indent {
                self.out.push_str("    ");
            }
            self.out.push_str(text);
        }
        self.out.push('\n');
    }

    fn name(&self, v: VarId) -> &str {
        &self.model.variable(v).name
    }

    fn semi(&self) -> &'static str {
        if self.syntax == Syntax::Python {
            ""
        } else {
            ";"
        }
    }

    fn body(&mut self, region: RegionId, indent: usize) {
        let n = self.model.region(region).statements.len();
        if n == 0 && self.syntax == Syntax::Python {
            self.line(indent, "pass");
        }
        for k in 0..n {
            self.stmt(region, k, indent);
        }
    }

    fn stmt(&mut self, region: RegionId, k: usize, indent: usize) {
        let model = self.model;
        match &model.region(region).statements[k] {
            Stmt::Decl { var, init } => {
                let v = model.variable(*var);
                let text = match self.syntax {
                    Syntax::Mini => match (v.len, init) {
                        (Some(n), _) => format!("{} {}[{n}];", v.elem.keyword(), v.name),
                        (None, Some(i)) => format!("{} {} = {i};", v.elem.keyword(), v.name),
                        (None, None) => format!("{} {};", v.elem.keyword(), v.name),
                    },
                    Syntax::Python => {
                        let zero = if v.elem == ElemType::Int { "0" } else { "0.0" };
                        match (v.len, init) {
                            (Some(n), _) => format!("{} = [{zero}] * {n}", v.name),
                            (None, Some(i)) => format!("{} = {i}", v.name),
                            (None, None) => format!("{} = {zero}", v.name),
                        }
                    }
                    Syntax::Java => match (v.len, init) {
                        (Some(n), _) => {
                            let t = v.elem.keyword();
                            format!("static {t}[] {} = new {t}[{n}];", v.name)
                        }
                        (None, Some(i)) => format!("static {} {} = {i};", v.elem.keyword(), v.name),
                        (None, None) => format!("static {} {};", v.elem.keyword(), v.name),
                    },
                };
                self.line(indent, &text);
            }
            Stmt::Pure { name } => {
                let text = match self.syntax {
                    Syntax::Mini => format!("pure {name};"),
                    Syntax::Python => format!("# pure: {name}"),
                    Syntax::Java => format!("// pure: {name}"),
                };
                self.line(indent, &text);
            }
            Stmt::Func { name, body } => match self.syntax {
                Syntax::Mini => {
                    self.line(indent, &format!("void {name}() {{"));
                    self.body(*body, indent + 1);
                    self.line(indent, "}");
                }
                Syntax::Python => {
                    self.line(indent, &format!("def {name}():"));
                    self.body(*body, indent + 1);
                }
                Syntax::Java => {
                    self.line(indent, &format!("static void {name}() {{"));
                    self.body(*body, indent + 1);
                    self.line(indent, "}");
                }
            },
            Stmt::Assign { target, value } => {
                let lhs = match &target.index {
                    Some(i) => format!("{}[{}]", self.name(target.var), self.expr(i, 0)),
                    None => self.name(target.var).to_string(),
                };
                let text = format!("{lhs} = {}{}", self.expr(value, 0), self.semi());
                self.line(indent, &text);
            }
            Stmt::Call { call } => {
                let c = &model.calls()[call.0];
                let args: Vec<String> = c.args.iter().map(|a| self.expr(a, 0)).collect();
                let attrs = if self.syntax == Syntax::Mini && c.explicit_cost {
                    format!(" [cpu={:?}]", c.cpu_cost)
                } else {
                    String::new()
                };
                let text = format!("{}({}){attrs}{}", c.callee_name, args.join(", "), self.semi());
                self.line(indent, &text);
            }
            Stmt::Replaced(b) => {
                let args: Vec<&str> = b.args.iter().map(|v| self.name(*v)).collect();
                let attrs = if self.syntax == Syntax::Mini {
                    format!(" [cpu={:?}]", b.replaced_time())
                } else {
                    String::new()
                };
                let text = format!("{}({}){attrs}{}", b.replacement_name, args.join(", "), self.semi());
                self.line(indent, &text);
            }
            Stmt::Opaque { text } => {
                let text = text.clone();
                self.line(indent, &text);
            }
            Stmt::Loop { id } => self.for_loop(*id, indent),
        }
    }

    fn for_loop(&mut self, id: LoopId, indent: usize) {
        let l = self.model.loop_node(id);
        for line in self.ann.before_loop(id) {
            self.line(indent, &line);
        }
        let var = self.name(l.header.var).to_string();
        let init = self.expr(&l.header.init, 0);
        let bound = self.expr(&l.header.bound, 0);
        match self.syntax {
            Syntax::Mini => {
                let attrs = if l.explicit_costs {
                    format!(
                        " [cpu={:?}, gpu={:?}, valid={}]",
                        l.cpu_cost_per_iter, l.gpu_cost_per_iter, l.gpu_valid
                    )
                } else {
                    String::new()
                };
                self.line(indent, &format!("for ({var} = {init}; {var} < {bound}; {var}++){attrs} {{"));
                self.body(l.body, indent + 1);
                self.line(indent, "}");
            }
            Syntax::Python => {
                self.line(indent, &format!("for {var} in range({init}, {bound}):"));
                self.body(l.body, indent + 1);
            }
            Syntax::Java => {
                if self.ann.parallel(id) {
                    self.line(indent, &format!("IntStream.range({init}, {bound}).parallel().forEach({var} -> {{"));
                    self.body(l.body, indent + 1);
                    self.line(indent, "});");
                } else {
                    self.line(indent, &format!("for ({var} = {init}; {var} < {bound}; {var}++) {{"));
                    self.body(l.body, indent + 1);
                    self.line(indent, "}");
                }
            }
        }
        for line in self.ann.after_loop(id) {
            self.line(indent, &line);
        }
    }

    /// Renders with the minimum parentheses needed to re-parse to the same tree.
    fn expr(&self, e: &Expr, min_prec: u8) -> String {
        match e {
            Expr::Num(n) => n.clone(),
            Expr::Var(v) => self.name(*v).to_string(),
            Expr::Index { var, index } => format!("{}[{}]", self.name(*var), self.expr(index, 0)),
            Expr::Neg(inner) => format!("-{}", self.expr(inner, 3)),
            Expr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                let s = format!("{} {} {}", self.expr(lhs, p), op.symbol(), self.expr(rhs, p + 1));
                if p < min_prec {
                    format!("({s})")
                } else {
                    s
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_mini_source;

    #[test]
    fn minimal_parens_round_trip() {
        let src = "float a; float b; float c; void main() { a = (b - (c - 1)) * -(b + c) / (2 * c); }";
        let m = parse_mini_source(src).unwrap();
        let text = pretty_print(&m, Syntax::Mini);
        assert!(text.contains("a = (b - (c - 1)) * -(b + c) / (2 * c);"), "{text}");
        assert_eq!(parse_mini_source(&text).unwrap(), m);
    }

    #[test]
    fn python_and_java_loops() {
        let m = parse_mini_source("int i; float a[4]; void main() { for (i = 0; i < 4; i++) { a[i] = 1; } }").unwrap();
        let py = pretty_print(&m, Syntax::Python);
        assert!(py.contains("    for i in range(0, 4):\n        a[i] = 1\n"), "{py}");
        let java = pretty_print(&m, Syntax::Java);
        assert!(java.contains("static float[] a = new float[4];"), "{java}");
        assert!(java.contains("        for (i = 0; i < 4; i++) {"), "{java}");
    }
}
