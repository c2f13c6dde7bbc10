#![no_main]

use libfuzzer_sys::fuzz_target;
use mcissa::{read_panel, write_panel, IngestOptions};

fuzz_target!(|data: &[u8]| {
    let Ok(panel) = read_panel(data, &IngestOptions::default()) else {
        return;
    };
    // Whatever parses must survive a write/read round trip unchanged.
    let mut buf = Vec::new();
    write_panel(&panel, &mut buf).expect("write");
    let back = read_panel(buf.as_slice(), &IngestOptions::default()).expect("re-read");
    assert_eq!(back.values(), panel.values());
    assert_eq!(back.names(), panel.names());
});
