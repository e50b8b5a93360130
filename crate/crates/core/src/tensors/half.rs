use half::f16;

const HALF_MAX: f64 = 65504.0;

/// Nearest binary16 value (ties to even). Magnitudes beyond the largest
/// finite half saturate to ±65504; NaN propagates.
pub fn round_to_half(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    f16::from_f64(x.clamp(-HALF_MAX, HALF_MAX)).to_f64()
}

pub fn round_to_half_f32(x: f32) -> f32 {
    if x.is_nan() {
        return x;
    }
    f16::from_f32(x.clamp(-HALF_MAX as f32, HALF_MAX as f32)).to_f32()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Enumerates every finite binary16 value and returns the nearest one,
    /// breaking ties toward the even significand.
    fn nearest_by_enumeration(x: f64) -> f64 {
        let mut best = (f64::INFINITY, 0.0f64, 0u16);
        for bits in 0u16..=u16::MAX {
            let h = f16::from_bits(bits);
            if !h.is_finite() {
                continue;
            }
            let v = h.to_f64();
            let d = (v - x).abs();
            let even = bits & 1 == 0;
            if d < best.0 || (d == best.0 && even && best.2 & 1 == 1) {
                best = (d, v, bits);
            }
        }
        best.1
    }

    #[test]
    fn examples() {
        assert_eq!(round_to_half(1.0), 1.0);
        assert_eq!(nearest_by_enumeration(2049.0), 2048.0);
        assert_eq!(round_to_half(2049.0), 2048.0);
        assert_eq!(round_to_half(2051.0), 2052.0);
        assert_eq!(round_to_half(70000.0), 65504.0);
        assert_eq!(round_to_half(-1e9), -65504.0);
        assert!(round_to_half(f64::NAN).is_nan());
        assert_eq!(round_to_half_f32(70000.0), 65504.0);
    }

    #[test]
    fn matches_enumeration_on_sample() {
        for x in [0.1f64, -0.3333, 1e-6, 3.0e-8, 1234.567, -65519.0, 65520.0, 5.96e-8, 2.98e-8] {
            let want = nearest_by_enumeration(x.clamp(-65504.0, 65504.0));
            assert_eq!(round_to_half(x), want, "x = {x}");
        }
    }

    proptest! {
        #[test]
        fn idempotent(x in -1.0e6f64..1.0e6) {
            let once = round_to_half(x);
            prop_assert_eq!(round_to_half(once), once);
            prop_assert_eq!(round_to_half_f32(once as f32) as f64, once);
        }
    }
}
