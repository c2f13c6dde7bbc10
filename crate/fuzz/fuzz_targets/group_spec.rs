#![no_main]

use libfuzzer_sys::fuzz_target;
use mcissa::GroupingSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = GroupingSpec::parse(text) else {
        return;
    };
    let again = GroupingSpec::parse(&spec.to_string()).expect("display output must parse");
    assert_eq!(spec, again);
    for (l, m) in [(2, 1), (12, 3), (96, 9)] {
        let _ = spec.resolve(l, m);
    }
});
