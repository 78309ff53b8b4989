//! Fixed-point encoding into the ring `Z_{2^64}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointCodec {
    pub frac_bits: u8,
}

impl Default for FixedPointCodec {
    fn default() -> Self {
        FixedPointCodec { frac_bits: 16 }
    }
}

impl FixedPointCodec {
    pub fn new(frac_bits: u8) -> Result<Self> {
        if frac_bits > 52 {
            return Err(Error::param(format!("frac_bits={frac_bits} exceeds 52")));
        }
        Ok(FixedPointCodec { frac_bits })
    }

    pub fn scale(&self) -> f64 {
        (self.frac_bits as f64).exp2()
    }

    /// `round(v·2^f)` in two's complement.
    pub fn encode(&self, v: f64) -> Result<u64> {
        let x = (v * self.scale()).round();
        if !x.is_finite() || x.abs() >= 9.223_372_036_854_776e18 {
            return Err(Error::Range(format!("{v} does not fit {} fractional bits", self.frac_bits)));
        }
        Ok(x as i64 as u64)
    }

    pub fn decode(&self, u: u64) -> f64 {
        u as i64 as f64 / self.scale()
    }

    /// Largest round-trip error for a representable value.
    pub fn resolution(&self) -> f64 {
        0.5 / self.scale()
    }

    /// Checks `log₂(n·s·η·2^f) < 63`, so that no partial or final sum of the
    /// transform over values bounded by `eta` can wrap.
    pub fn check_range(&self, n: usize, s: usize, eta: f64) -> Result<()> {
        let bits = (n as f64 * s as f64 * eta * self.scale()).log2();
        if bits < 63.0 {
            Ok(())
        } else {
            Err(Error::Range(format!(
                "n·s·eta·2^f needs {bits:.2} bits (n={n}, s={s}, eta={eta}, f={}); reduce frac_bits",
                self.frac_bits
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn fixed_examples() {
        let c = FixedPointCodec::default();
        assert_eq!(c.encode(0.0).unwrap(), 0);
        assert_eq!(c.decode(0), 0.0);
        assert_eq!(c.encode(1.5).unwrap(), 98304);
        assert_eq!(c.decode(98304), 1.5);
        assert_eq!(c.encode(-1.0).unwrap(), 65536u64.wrapping_neg());
        assert_eq!(c.decode(65536u64.wrapping_neg()), -1.0);
    }

    #[test]
    fn round_trip_error_is_half_an_ulp() {
        let c = FixedPointCodec::default();
        let mut rng = stream_rng(0, 0);
        for _ in 0..100_000 {
            let v: f64 = rng.random_range(-3.0..3.0);
            assert!((c.decode(c.encode(v).unwrap()) - v).abs() <= c.resolution());
        }
    }

    #[test]
    fn overflow_is_a_range_error() {
        let c = FixedPointCodec::new(16).unwrap();
        assert!(matches!(c.encode(1e15), Err(Error::Range(_))));
        assert!(c.check_range(1_000_000, 1, 65537.0).is_ok());
        assert!(matches!(c.check_range(1 << 40, 1, 1e3), Err(Error::Range(_))));
    }
}
