#![no_main]

use leo_dmimo::harness::records::summary_rows;
use leo_dmimo::harness::ExperimentResult;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(result) = ExperimentResult::from_jsonl(text) {
        let _ = summary_rows(&result);
        let again = ExperimentResult::from_jsonl(&result.to_jsonl()).expect("serialized result parses");
        assert_eq!(again.se.len(), result.se.len());
    }
});
