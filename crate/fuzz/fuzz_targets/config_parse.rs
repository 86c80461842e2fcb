#![no_main]

use libfuzzer_sys::fuzz_target;
use logconvex::cli::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ExperimentConfig::load(text, None) {
        // A config that loads must reload from its normal form unchanged.
        let normal = cfg.normal_form();
        let again = ExperimentConfig::load(&normal, None).expect("normal form must load");
        assert_eq!(again, cfg);
        assert_eq!(again.normal_form(), normal);
    }
});
