//! File-based pattern DB: a UTF-8 JSON array of records.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::vector::{characteristic_vector_of_region, CharVector};
use crate::error::DbError;
use crate::frontend::parse_snippet;

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.85;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interface {
    /// Semantic argument types such as `float[]` or `int`.
    pub args: Vec<String>,
    #[serde(default = "void")]
    pub ret: String,
}

fn void() -> String {
    "void".into()
}

fn default_threshold() -> f64 {
    DEFAULT_SIMILARITY_THRESHOLD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternRecord {
    pub id: String,
    #[serde(default)]
    pub trigger_names: Vec<String>,
    /// Mini-language statements compared against candidate blocks.
    #[serde(default)]
    pub comparison_snippet: Option<String>,
    pub replacement_name: String,
    pub replacement_interface: Interface,
    #[serde(default = "default_threshold")]
    pub similarity_threshold: f64,
    pub speedup_hint: f64,
    #[serde(skip)]
    pub snippet_vector: Option<CharVector>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PatternDb {
    pub records: Vec<PatternRecord>,
}

impl PatternDb {
    pub fn from_records(records: Vec<PatternRecord>) -> Result<Self, DbError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(records.len());
        for (index, mut r) in records.into_iter().enumerate() {
            let bad = |message: String| DbError::Record { index, message };
            if r.id.trim().is_empty() {
                return Err(bad("empty id".into()));
            }
            if !seen.insert(r.id.clone()) {
                return Err(bad(format!("duplicate id `{}`", r.id)));
            }
            if r.trigger_names.is_empty() && r.comparison_snippet.is_none() {
                return Err(bad("needs trigger_names or a comparison_snippet".into()));
            }
            if r.trigger_names.iter().any(|n| n.is_empty()) {
                return Err(bad("empty trigger name".into()));
            }
            if r.replacement_name.is_empty() {
                return Err(bad("empty replacement_name".into()));
            }
            if !(0.0..=1.0).contains(&r.similarity_threshold) {
                return Err(bad(format!("similarity_threshold {} outside [0, 1]", r.similarity_threshold)));
            }
            if !(r.speedup_hint.is_finite() && r.speedup_hint > 0.0) {
                return Err(bad(format!("speedup_hint must be positive, got {}", r.speedup_hint)));
            }
            if let Some(s) = &r.comparison_snippet {
                let m = parse_snippet(s).map_err(|e| bad(format!("comparison_snippet: {e}")))?;
                let (_, body) = m.functions()[0];
                r.snippet_vector = Some(characteristic_vector_of_region(&m, body));
            }
            out.push(r);
        }
        Ok(PatternDb { records: out })
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, DbError> {
        let items: Vec<serde_json::Value> = serde_json::from_slice(bytes).map_err(|e| DbError::Format(e.to_string()))?;
        let records = items
            .into_iter()
            .enumerate()
            .map(|(index, v)| {
                serde_json::from_value::<PatternRecord>(v).map_err(|e| DbError::Record { index, message: e.to_string() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_records(records)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&PatternRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

/// An empty (or whitespace-only) file is an empty DB.
pub fn load_pattern_db(path: &Path) -> Result<PatternDb, DbError> {
    let bytes = std::fs::read(path).map_err(|source| DbError::Io { path: path.display().to_string(), source })?;
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(PatternDb::default());
    }
    PatternDb::from_json_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = include_str!("../../fixtures/sample_db.json");

    #[test]
    fn sample_has_three_records() {
        let db = PatternDb::from_json_bytes(SAMPLE.as_bytes()).unwrap();
        assert_eq!(db.len(), 3);
        let ids: Vec<&str> = db.records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["fft", "matmul", "histogram"]);
        assert!(db.get("matmul").unwrap().snippet_vector.is_some());
    }

    #[test]
    fn empty_file_is_empty_db() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("db.json");
        std::fs::write(&p, "").unwrap();
        assert!(load_pattern_db(&p).unwrap().is_empty());
        std::fs::write(&p, "[]").unwrap();
        assert!(load_pattern_db(&p).unwrap().is_empty());
        assert!(matches!(load_pattern_db(&dir.path().join("missing.json")), Err(DbError::Io { .. })));
    }

    fn rec(id: &str) -> String {
        format!(
            r#"{{"id":"{id}","trigger_names":["f"],"replacement_name":"g","replacement_interface":{{"args":[]}},"speedup_hint":2}}"#
        )
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = format!("[{},{}]", rec("a"), rec("a"));
        assert!(matches!(PatternDb::from_json_bytes(text.as_bytes()), Err(DbError::Record { index: 1, .. })));
    }

    #[test]
    fn malformed_record_reports_index() {
        let text = format!(r#"[{}, {{"id": 3}}]"#, rec("a"));
        assert!(matches!(PatternDb::from_json_bytes(text.as_bytes()), Err(DbError::Record { index: 1, .. })));
        assert!(matches!(PatternDb::from_json_bytes(b"{}"), Err(DbError::Format(_))));
        let bad_snippet = r#"[{"id":"x","comparison_snippet":"for (","replacement_name":"g","replacement_interface":{"args":[]},"speedup_hint":2}]"#;
        assert!(matches!(PatternDb::from_json_bytes(bad_snippet.as_bytes()), Err(DbError::Record { index: 0, .. })));
        let neither = r#"[{"id":"x","replacement_name":"g","replacement_interface":{"args":[]},"speedup_hint":2}]"#;
        assert!(PatternDb::from_json_bytes(neither.as_bytes()).is_err());
    }
}
