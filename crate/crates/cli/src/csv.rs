//! Minimal CSV writing with fixed numeric formatting.

use std::fmt::Write as _;

/// Nine significant digits, plain decimal where reasonable.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("exponent");
    if (-5..9).contains(&exp) {
        format!("{:.*}", (8 - exp).max(0) as usize, x)
    } else {
        sci
    }
}

pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: header.join(",") + "\n",
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(num(0.0), "0");
        assert_eq!(num(1.0), "1.00000000");
        assert_eq!(num(-12.3456789012), "-12.3456789");
        assert_eq!(num(9.9999999996), "10.0000000");
        assert_eq!(num(0.000123456789012), "0.000123456789");
        assert_eq!(num(1.5e-9), "1.50000000e-9");
        assert_eq!(num(123456789.4), "123456789");
        assert_eq!(num(2.5e12), "2.50000000e12");
    }

    #[test]
    fn header_then_rows() {
        let mut t = Table::new(&["a", "b"]);
        t.row(&["x".into(), num(0.5)]);
        assert_eq!(t.into_string(), "a,b\nx,0.500000000\n");
    }
}
