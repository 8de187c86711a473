#![no_main]

use leo_dmimo::harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
        // a config that parses must validate, echo and re-parse without panicking
        let _ = cfg.validate();
        let echoed = cfg.resolved().to_toml_string();
        ExperimentConfig::from_toml_str(&echoed).expect("echoed config parses");
    }
});
