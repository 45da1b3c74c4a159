#![no_main]

use libfuzzer_sys::fuzz_target;
use offload_core::frontend::{dump_ir_document, load_ir_document, screen_all};

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = load_ir_document(data) {
        screen_all(&m);
        let again = load_ir_document(dump_ir_document(&m).as_bytes()).expect("dumped document loads");
        assert_eq!(again, m);
    }
});
