#![no_main]

use libfuzzer_sys::fuzz_target;
use pfs_core::birkhoff::NormalFormResult;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(nf) = NormalFormResult::from_json_str(text) {
        let _ = nf.truncated(nf.order);
    }
});
