#![no_main]

use libfuzzer_sys::fuzz_target;
use offload_core::block::PatternDb;

// Same decoder `load_pattern_db` applies to the file contents.
fuzz_target!(|data: &[u8]| {
    let _ = PatternDb::from_json_bytes(data);
});
