//! JSON interchange format for externally produced program models.

use serde::{Deserialize, Serialize};

use crate::error::LoadError;
use crate::ir::*;

pub const IR_DOCUMENT_VERSION: i64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IrDocument {
    version: i64,
    source_language: SourceLanguage,
    variables: Vec<VariableDecl>,
    regions: Vec<Region>,
    loops: Vec<LoopNode>,
    calls: Vec<FunctionBlockCall>,
    occurrences: Vec<VariableOccurrence>,
}

pub fn load_ir_document(bytes: &[u8]) -> Result<ProgramModel, LoadError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let doc: IrDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        LoadError::Schema { path, message: e.into_inner().to_string() }
    })?;
    if doc.version != IR_DOCUMENT_VERSION {
        return Err(LoadError::Version(doc.version));
    }
    let parts = ModelParts {
        source_language: doc.source_language,
        variables: doc.variables,
        regions: doc.regions,
        loops: doc.loops,
        calls: doc.calls,
        occurrences: doc.occurrences,
    };
    Ok(ProgramModel::new(parts)?)
}

pub fn dump_ir_document(model: &ProgramModel) -> String {
    let p = model.parts().clone();
    let doc = IrDocument {
        version: IR_DOCUMENT_VERSION,
        source_language: p.source_language,
        variables: p.variables,
        regions: p.regions,
        loops: p.loops,
        calls: p.calls,
        occurrences: p.occurrences,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("model serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_mini_source;

    const F1: &str = include_str!("../../fixtures/f1.mini");
    const F1_DOC: &str = include_str!("../../fixtures/f1.ir.json");
    const F2: &str = include_str!("../../fixtures/f2.mini");

    #[test]
    fn f2_round_trip() {
        let m = parse_mini_source(F2).unwrap();
        let back = load_ir_document(dump_ir_document(&m).as_bytes()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn hand_written_f1_matches_parser() {
        let doc = load_ir_document(F1_DOC.as_bytes()).unwrap();
        assert_eq!(doc, parse_mini_source(F1).unwrap());
    }

    #[test]
    fn dangling_parent_is_integrity_error() {
        let mut v: serde_json::Value = serde_json::from_str(F1_DOC).unwrap();
        v["loops"][1]["parent"] = serde_json::json!(7);
        let err = load_ir_document(v.to_string().as_bytes()).unwrap_err();
        assert!(matches!(err, LoadError::Model(_)), "{err}");
    }

    #[test]
    fn schema_violation_names_path() {
        let mut v: serde_json::Value = serde_json::from_str(F1_DOC).unwrap();
        v["loops"][1]["iter_count"] = serde_json::json!("many");
        match load_ir_document(v.to_string().as_bytes()).unwrap_err() {
            LoadError::Schema { path, .. } => assert_eq!(path, "loops[1].iter_count"),
            other => panic!("unexpected {other}"),
        }
        v["loops"][1]["iter_count"] = serde_json::json!(4);
        v["bogus"] = serde_json::json!(1);
        assert!(matches!(load_ir_document(v.to_string().as_bytes()), Err(LoadError::Schema { .. })));
    }

    #[test]
    fn wrong_version() {
        let mut v: serde_json::Value = serde_json::from_str(F1_DOC).unwrap();
        v["version"] = serde_json::json!(2);
        assert!(matches!(load_ir_document(v.to_string().as_bytes()), Err(LoadError::Version(2))));
    }
}
