#![no_main]

use fadesched::channel::ModelSpec;
use fadesched::stats::derive_all;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = ModelSpec::from_json(text) else { return };
    let Ok(models) = spec.build() else { return };
    // Stay fast: only derive statistics for small state spaces.
    if models.iter().all(|m| m.joint_outcomes() <= 4096) {
        let _ = derive_all(&models);
    }
});
