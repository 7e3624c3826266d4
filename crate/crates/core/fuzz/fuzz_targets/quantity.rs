#![no_main]

use fenand::units::{parse_quantity, parse_unit, ElectricField, Time, Voltage};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let _ = parse_unit(s);
    let _ = parse_quantity(s);
    if let Ok(v) = s.parse::<Voltage>() {
        assert_eq!(v.to_string().parse::<Voltage>().unwrap(), v);
    }
    if let Ok(t) = s.parse::<Time>() {
        assert_eq!(t.to_string().parse::<Time>().unwrap(), t);
    }
    if let Ok(e) = s.parse::<ElectricField>() {
        assert_eq!(e.to_string().parse::<ElectricField>().unwrap(), e);
    }
});
