#![no_main]

use libfuzzer_sys::fuzz_target;
use pfs_core::symbolkit::FourierTaylorSymbol;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = FourierTaylorSymbol::from_json_str(text) {
        let again = FourierTaylorSymbol::from_json_str(&s.to_json_value().to_string()).expect("re-parse");
        assert_eq!(s, again);
    }
});
