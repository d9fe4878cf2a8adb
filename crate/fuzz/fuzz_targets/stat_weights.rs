#![no_main]

use fadesched::policy::StatWeights;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(weights) = StatWeights::from_json(text) {
        assert!(weights.users() > 0);
        let written = serde_json::to_string(&weights).expect("weights serialise");
        assert_eq!(StatWeights::from_json(&written).expect("written weights parse"), weights);
    }
});
