mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::*;
use offload_core::block::{characteristic_vector, similarity, Subtree};
use offload_core::codegen::{emit_annotated, strip_annotations, Backend};
use offload_core::eval::{cost_model_time, CostModelParams, EvaluationRequest};
use offload_core::frontend::{dump_ir_document, load_ir_document, parse_mini_source, screen_all};
use offload_core::ga::{exhaustive_search, run_search, GaParams, SearchContext};
use offload_core::eval::CostModel;
use offload_core::ir::ProgramModel;
use offload_core::pattern::{build_genome_space, Genome, GenomeSpace, OffloadPattern};
use offload_core::printer::{pretty_print, Syntax};
use offload_core::synthetic::{generate_model, generate_source, SyntheticParams};
use offload_core::transfer::{hoist_transfers, required_transfers, unhoisted_plan};

fn all_loops(m: &ProgramModel) -> GenomeSpace {
    GenomeSpace::from_loops(m.loops().iter().map(|l| l.id).collect())
}

fn model_and_genome() -> impl Strategy<Value = (ProgramModel, Genome)> {
    (any::<u64>(), any::<u64>()).prop_map(|(seed, bits)| {
        let m = generate_model(seed, &SyntheticParams::default());
        let g = Genome::from_index(bits, m.loops().len());
        (m, g)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn print_parse_is_a_fixed_point(seed in any::<u64>()) {
        let src = generate_source(seed, &SyntheticParams::default());
        let m = parse_mini_source(&src).unwrap();
        let printed = pretty_print(&m, Syntax::Mini);
        let again = parse_mini_source(&printed).unwrap();
        prop_assert_eq!(&again, &m);
        prop_assert_eq!(pretty_print(&again, Syntax::Mini), printed);
    }

    #[test]
    fn ir_document_round_trips(seed in any::<u64>()) {
        let m = generate_model(seed, &SyntheticParams::default());
        let doc = dump_ir_document(&m);
        prop_assert_eq!(load_ir_document(doc.as_bytes()).unwrap(), m);
    }

    #[test]
    fn var_sets_grow_with_the_region_set(seed in any::<u64>()) {
        let m = generate_model(seed, &SyntheticParams::default());
        for l in m.loops() {
            let outer = m.region_var_sets(&m.loop_regions(l.id)).unwrap();
            for c in m.children(l.id) {
                let inner = m.region_var_sets(&m.loop_regions(c)).unwrap();
                prop_assert!(inner.read.is_subset(&outer.read));
                prop_assert!(inner.set.is_subset(&outer.set));
                prop_assert!(inner.defined.is_subset(&outer.defined));
            }
        }
    }

    #[test]
    fn multiplicity_is_the_ancestor_product(seed in any::<u64>()) {
        let m = generate_model(seed, &SyntheticParams::default());
        for l in m.loops() {
            let anc = oracle_ancestors(&m, l.id);
            let want: u64 = anc.iter().map(|a| m.loop_node(*a).iter_count).product();
            prop_assert_eq!(m.loop_multiplicity(l.id), want);
            let mut lib = m.loop_ancestors(l.id).unwrap();
            lib.reverse();
            prop_assert_eq!(lib, anc);
        }
    }

    #[test]
    fn transfers_match_the_trace_oracle((m, g) in model_and_genome()) {
        let space = all_loops(&m);
        let p = OffloadPattern::new(&m, &space, g.clone()).unwrap();
        let got: BTreeSet<_> = required_transfers(&m, &p).unwrap().into_iter().map(|t| (t.var, t.direction, t.gpu_loop)).collect();
        prop_assert_eq!(got, oracle_required_transfers(&m, &space, &g));
    }

    #[test]
    fn hoisting_is_minimal_and_never_costs_more((m, g) in model_and_genome()) {
        let space = all_loops(&m);
        let p = OffloadPattern::new(&m, &space, g.clone()).unwrap();
        let raw = required_transfers(&m, &p).unwrap();
        let plan = hoist_transfers(&m, &p, &raw);
        let roots = oracle_roots(&m, &space, &g);
        for t in &raw {
            let d = plan.directives.iter().find(|d| d.var == t.var && d.direction == t.direction && d.gpu_loops.contains(&t.gpu_loop));
            prop_assert!(d.is_some(), "no directive for {:?}", t);
            prop_assert_eq!(d.unwrap().multiplicity, oracle_min_multiplicity(&m, &roots, t.var, t.direction, t.gpu_loop));
        }
        let unhoisted = unhoisted_plan(&m, &raw);
        prop_assert!(plan.weighted_bytes(&m) <= unhoisted.weighted_bytes(&m));
        prop_assert!(cost_time(&m, &p, &plan).unwrap() <= cost_time(&m, &p, &unhoisted).unwrap());
    }

    #[test]
    fn cost_grows_with_transfer_price((m, g) in model_and_genome(), k in 1.0f64..1e6) {
        let space = all_loops(&m);
        let p = OffloadPattern::new(&m, &space, g).unwrap();
        let plan = hoist_transfers(&m, &p, &required_transfers(&m, &p).unwrap());
        let code = offload_core::codegen::EmittedCode { backend: Backend::COpenacc, text: String::new() };
        let req = EvaluationRequest { model: &m, pattern: &p, plan: &plan, code: &code, replaced_blocks: &[] };
        let base = CostModelParams::default();
        let dear = CostModelParams { transfer_cost_per_byte: base.transfer_cost_per_byte * k, ..base };
        let (a, b) = (cost_model_time(&req, &base).time_seconds.unwrap(), cost_model_time(&req, &dear).time_seconds.unwrap());
        prop_assert!(a <= b);
    }

    #[test]
    fn similarity_is_symmetric_and_bounded(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (a, b) = (generate_model(s1, &SyntheticParams::default()), generate_model(s2, &SyntheticParams::default()));
        let va = characteristic_vector(&a, Subtree::Region(a.root_region()));
        let vb = characteristic_vector(&b, Subtree::Region(b.root_region()));
        let s = similarity(&va, &vb);
        prop_assert_eq!(s, similarity(&vb, &va));
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(similarity(&va, &va), 1.0);
    }

    #[test]
    fn stripping_annotations_restores_the_source((m, g) in model_and_genome()) {
        let space = all_loops(&m);
        let p = OffloadPattern::new(&m, &space, g).unwrap();
        let plan = hoist_transfers(&m, &p, &required_transfers(&m, &p).unwrap());
        for backend in [Backend::COpenacc, Backend::PythonCudaMarker] {
            let text = emit_annotated(&m, &p, &plan, backend).unwrap();
            prop_assert_eq!(strip_annotations(&text, backend), pretty_print(&m, backend.syntax()));
        }
    }

    #[test]
    fn genome_text_round_trips(bits in proptest::collection::vec(any::<bool>(), 0..40)) {
        let g = Genome::new(bits);
        prop_assert_eq!(g.to_string().parse::<Genome>().unwrap(), g);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exhaustive_never_loses_to_the_ga(seed in any::<u64>(), ga_seed in any::<u64>()) {
        let m = generate_model(seed, &SyntheticParams { max_loops: 8, invalid_rate: 0.2, ..Default::default() });
        let Ok(space) = build_genome_space(&m, &screen_all(&m)) else { return Ok(()) };
        let ev = CostModel::default();
        let ctx = SearchContext::new(&m, space, &ev);
        let ex = exhaustive_search(&ctx, 10).unwrap();
        let params = GaParams { seed: ga_seed, ..Default::default() };
        let ga = run_search(&ctx, &params).unwrap();
        let inf = f64::INFINITY;
        prop_assert!(ex.best_time.unwrap_or(inf) <= ga.best_time.unwrap_or(inf));
        // Same seed, same result.
        let again = run_search(&ctx, &params).unwrap();
        prop_assert_eq!(&again.best_genome, &ga.best_genome);
        prop_assert_eq!(again.evaluations_performed, ga.evaluations_performed);
        if let Some(t) = ga.best_time {
            let f = ctx.evaluate(&ga.best_genome).unwrap();
            prop_assert_eq!(f.time, Some(t));
        }
    }
}

#[test]
fn ir_document_keeps_every_float_bit() {
    let src = "float a[8]; int i;
        void main() { for (i = 0; i < 8; i++) [cpu=5.5, gpu=0.9500000000000001, valid=true] { a[i] = 0.30000000000000004; } }";
    let m = parse_mini_source(src).unwrap();
    assert_eq!(m.loops()[0].gpu_cost_per_iter, 0.9500000000000001);
    assert_eq!(load_ir_document(dump_ir_document(&m).as_bytes()).unwrap(), m);
}
