#![no_main]

use libfuzzer_sys::fuzz_target;
use stprbh::instance::{parse_stp, write_stp};

// anything the reader accepts must survive a write and a second read
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(instance) = parse_stp(text) else { return };
    let written = write_stp(&instance);
    let again = parse_stp(&written).expect("canonical output parses");
    assert_eq!(again, instance);
    assert_eq!(write_stp(&again), written);
});
