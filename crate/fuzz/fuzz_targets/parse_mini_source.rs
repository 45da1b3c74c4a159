#![no_main]

use libfuzzer_sys::fuzz_target;
use offload_core::frontend::{parse_mini_source, parse_snippet, screen_all};
use offload_core::printer::{pretty_print, Syntax};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_mini_source(text) {
        screen_all(&m);
        // Printed output must parse back to the same model.
        let printed = pretty_print(&m, Syntax::Mini);
        let again = parse_mini_source(&printed).expect("printed source parses");
        assert_eq!(again, m);
    }
    let _ = parse_snippet(text);
});
