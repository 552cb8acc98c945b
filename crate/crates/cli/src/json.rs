use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

/// Compact JSON with every float written to 17 significant digits.
#[derive(Debug, Default, Clone, Copy)]
pub struct FixedDigits;

impl Formatter for FixedDigits {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedDigits);
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(to_json(&[1.0 / 3.0]), "[3.3333333333333331e-1]");
        assert_eq!(to_json(&0.1f64), "1.0000000000000001e-1");
        let back: f64 = serde_json::from_str(&to_json(&(2.0f64).sqrt())).unwrap();
        assert_eq!(back, 2.0f64.sqrt());
    }

    #[test]
    fn non_finite_is_null() {
        assert_eq!(to_json(&[f64::NAN, f64::INFINITY]), "[null,null]");
    }
}
