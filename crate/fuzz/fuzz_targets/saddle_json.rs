#![no_main]

use libfuzzer_sys::fuzz_target;
use pfs_core::barriertop::{harmonic_average, ResonantSaddle};

fuzz_target!(|data: &[u8]| {
    let Ok(saddle) = serde_json::from_slice::<ResonantSaddle>(data) else { return };
    if saddle.validate().is_ok() {
        let _ = harmonic_average(&saddle.p3, saddle.lambdas);
    }
});
