#![no_main]

use libfuzzer_sys::fuzz_target;
use pfs_core::scenario::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ScenarioConfig::from_json_str(text) {
        let again = ScenarioConfig::from_json_str(&cfg.canonical_json()).expect("canonical form parses");
        assert_eq!(cfg, again);
        let _ = cfg.h_values();
    }
});
