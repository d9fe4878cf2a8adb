#![no_main]

use fadesched::experiment::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = ExperimentConfig::from_json(text) else { return };
    let _ = cfg.validate();
    let again = ExperimentConfig::from_json(&cfg.to_json()).expect("written configs parse");
    assert_eq!(again, cfg);
});
