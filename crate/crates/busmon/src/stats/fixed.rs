//! Fixed-point model of the on-chip estimation datapath.
//!
//! The hardware computes the Hurst exponent with 64-bit two's-complement
//! arithmetic: adders and subtractors for the mean and the cumulative
//! deviation, a shifter for divisions by power-of-two block lengths, a
//! non-restoring square root for the standard deviation, and a small ROM
//! for log10. This module reproduces that dataflow so the golden
//! floating-point estimator and the hardware path can be compared
//! differentially.
//!
//! Values are held in a Q(64-f).f word; every stage checks that its result
//! still fits the 64-bit word and reports the failing stage on overflow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{HurstEstimate, ObservationSeries};

/// Partition of the 64-bit datapath word into integer and fraction fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    pub integer_bits: u32,
    pub fraction_bits: u32,
}

impl FixedPointConfig {
    pub fn new(integer_bits: u32, fraction_bits: u32) -> Result<Self> {
        if integer_bits == 0 || fraction_bits == 0 || integer_bits + fraction_bits != 64 {
            return Err(Error::invalid_input(format!(
                "integer_bits + fraction_bits must equal 64, got {integer_bits} + {fraction_bits}"
            )));
        }
        Ok(Self { integer_bits, fraction_bits })
    }
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self { integer_bits: 48, fraction_bits: 16 }
    }
}

/// Integer square root with the non-restoring schedule: one trial bit per
/// iteration, 32 iterations for a 64-bit radicand. Returns `floor(sqrt(x))`.
pub fn isqrt_nonrestoring(x: u64) -> u64 {
    let mut remainder: i64 = 0;
    let mut root: i64 = 0;
    for i in (0..32).rev() {
        let pair = ((x >> (2 * i)) & 0b11) as i64;
        if remainder >= 0 {
            remainder = (remainder << 2) | pair;
            remainder -= (root << 2) | 1;
        } else {
            remainder = (remainder << 2) | pair;
            remainder += (root << 2) | 3;
        }
        if remainder >= 0 {
            root = (root << 1) | 1;
        } else {
            root <<= 1;
        }
    }
    root as u64
}

/// log10(2) in Q16.
const LOG10_2_Q16: i64 = 19728;

/// log10(1 + i/256) in Q16, 257 entries so the last interval interpolates
/// against log10(2). ROM contents for the hardware lookup.
const LOG10_LUT: [i64; 257] = [
    0, 111, 221, 332, 441, 551, 659, 768,
    876, 983, 1091, 1197, 1304, 1410, 1515, 1621,
    1725, 1830, 1934, 2038, 2141, 2244, 2347, 2449,
    2551, 2652, 2753, 2854, 2954, 3054, 3154, 3253,
    3352, 3451, 3549, 3647, 3745, 3842, 3939, 4036,
    4132, 4228, 4324, 4419, 4514, 4609, 4703, 4797,
    4891, 4985, 5078, 5171, 5263, 5356, 5447, 5539,
    5631, 5722, 5812, 5903, 5993, 6083, 6173, 6262,
    6351, 6440, 6528, 6617, 6705, 6792, 6880, 6967,
    7054, 7141, 7227, 7313, 7399, 7484, 7570, 7655,
    7740, 7824, 7909, 7993, 8077, 8160, 8244, 8327,
    8409, 8492, 8574, 8657, 8739, 8820, 8902, 8983,
    9064, 9145, 9225, 9305, 9385, 9465, 9545, 9624,
    9703, 9782, 9861, 9940, 10018, 10096, 10174, 10252,
    10329, 10406, 10483, 10560, 10637, 10713, 10789, 10865,
    10941, 11017, 11092, 11167, 11242, 11317, 11392, 11466,
    11540, 11614, 11688, 11762, 11835, 11909, 11982, 12054,
    12127, 12200, 12272, 12344, 12416, 12488, 12560, 12631,
    12702, 12773, 12844, 12915, 12985, 13056, 13126, 13196,
    13266, 13335, 13405, 13474, 13543, 13612, 13681, 13750,
    13818, 13887, 13955, 14023, 14091, 14159, 14226, 14293,
    14361, 14428, 14495, 14561, 14628, 14694, 14761, 14827,
    14893, 14958, 15024, 15090, 15155, 15220, 15285, 15350,
    15415, 15480, 15544, 15608, 15672, 15737, 15800, 15864,
    15928, 15991, 16055, 16118, 16181, 16244, 16306, 16369,
    16432, 16494, 16556, 16618, 16680, 16742, 16804, 16865,
    16927, 16988, 17049, 17110, 17171, 17232, 17292, 17353,
    17413, 17473, 17533, 17593, 17653, 17713, 17773, 17832,
    17891, 17951, 18010, 18069, 18128, 18186, 18245, 18303,
    18362, 18420, 18478, 18536, 18594, 18652, 18710, 18767,
    18825, 18882, 18939, 18996, 19053, 19110, 19167, 19224,
    19280, 19336, 19393, 19449, 19505, 19561, 19617, 19673,
    19728,
];

/// Narrow an i128 intermediate back into the 64-bit word.
fn fit(value: i128, stage: &'static str) -> Result<i64> {
    i64::try_from(value).map_err(|_| Error::Overflow { stage })
}

/// Divide a raw sum by a block length: a shift when the length is a power
/// of two (the hardware shifter), plain integer division otherwise.
fn div_by_len(sum: i64, len: usize) -> i64 {
    debug_assert!(sum >= 0);
    if len.is_power_of_two() {
        sum >> len.trailing_zeros()
    } else {
        sum / len as i64
    }
}

/// Q16 log10 of a positive raw fixed-point value, via the mantissa ROM with
/// linear interpolation. `frac` is the input's fraction-bit count.
fn log10_q16(raw: i64, frac: u32) -> i64 {
    debug_assert!(raw > 0);
    let bits = raw as u64;
    let msb = 63 - bits.leading_zeros();
    let exponent = msb as i64 - frac as i64;
    // Top 24 mantissa bits below the leading one: 8 index the ROM, the
    // remaining 16 weight the interpolation.
    let frac24 = if msb >= 24 {
        (bits >> (msb - 24)) & 0xff_ffff
    } else {
        (bits << (24 - msb)) & 0xff_ffff
    };
    let index = (frac24 >> 16) as usize;
    let weight = (frac24 & 0xffff) as i64;
    let lo = LOG10_LUT[index];
    let hi = LOG10_LUT[index + 1];
    let mantissa_log = lo + (((hi - lo) * weight) >> 16);
    mantissa_log + exponent * LOG10_2_Q16
}

/// Rescale a Q16 value to the configured fraction width.
fn q16_to_frac(value: i64, frac: u32) -> i64 {
    match frac.cmp(&16) {
        std::cmp::Ordering::Greater => value << (frac - 16),
        std::cmp::Ordering::Less => value >> (16 - frac),
        std::cmp::Ordering::Equal => value,
    }
}

struct FixedRs {
    ratio: i64,
}

/// One R/S block in raw fixed-point arithmetic.
fn rs_fixed(samples: &[i64], frac: u32) -> Result<FixedRs> {
    let len = samples.len();
    let mut sum: i128 = 0;
    for &x in samples {
        sum += x as i128;
    }
    let sum = fit(sum, "mean accumulation")?;
    let mean = div_by_len(sum, len);

    // Variance: mean of squared deviations, products widened then renarrowed.
    let mut var_acc: i128 = 0;
    for &x in samples {
        let d = (x - mean) as i128;
        var_acc += (d * d) >> frac;
    }
    let var_acc = fit(var_acc, "variance accumulation")?;
    let variance = div_by_len(var_acc, len);

    // stddev = isqrt(variance << frac) keeps the fraction width.
    let shifted = (variance as i128) << frac;
    let shifted = u64::try_from(shifted).map_err(|_| Error::Overflow { stage: "stddev" })?;
    let stddev = isqrt_nonrestoring(shifted) as i64;

    // Cumulative deviation, tracked with running extremes. The accumulator
    // and the range must both fit the word.
    let mut cum: i128 = 0;
    let mut max = i128::MIN;
    let mut min = i128::MAX;
    for &x in samples {
        cum += (x - mean) as i128;
        max = max.max(cum);
        min = min.min(cum);
    }
    fit(max, "cumulative deviation")?;
    fit(min, "cumulative deviation")?;
    let range = fit(max - min, "range")?;

    let ratio = if stddev == 0 {
        0
    } else {
        let scaled = (range as i128) << frac;
        fit(scaled / stddev as i128, "ratio division")?
    };
    Ok(FixedRs { ratio })
}

/// Fixed-point three-block Hurst estimation.
///
/// The dataflow is identical to [`crate::stats::hurst_three_block`] with all
/// arithmetic in the configured fixed-point word. On in-range inputs
/// (counts below 2^16 with the default word) the result stays within 0.02
/// of the floating-point path.
pub fn hurst_fixedpoint(
    series: &ObservationSeries,
    cfg: &FixedPointConfig,
) -> Result<HurstEstimate> {
    let n = series.len();
    if n < 8 || n % 4 != 0 {
        return Err(Error::invalid_input(format!(
            "three-block estimation needs a length divisible by 4 and >= 8, got {n}"
        )));
    }
    FixedPointConfig::new(cfg.integer_bits, cfg.fraction_bits)?;
    let frac = cfg.fraction_bits;

    let mut raw = Vec::with_capacity(n);
    for &x in series.samples() {
        let value = (x as i128) << frac;
        raw.push(fit(value, "input load")?);
    }

    let e0 = rs_fixed(&raw, frac)?.ratio;
    let half = n / 2;
    let halves = rs_fixed(&raw[..half], frac)?.ratio as i128
        + rs_fixed(&raw[half..], frac)?.ratio as i128;
    let e1 = fit(halves >> 1, "block average")?;
    let quarter = n / 4;
    let mut quarter_sum = 0i128;
    for i in 0..4 {
        quarter_sum += rs_fixed(&raw[i * quarter..(i + 1) * quarter], frac)?.ratio as i128;
    }
    let e2 = fit(quarter_sum >> 2, "block average")?;
    let expected_rs = fit((e0 as i128 + e1 as i128 + e2 as i128) / 3, "block average")?;

    if expected_rs == 0 {
        return Ok(HurstEstimate { value: 0.0, degenerate: true });
    }

    let log_rs = q16_to_frac(log10_q16(expected_rs, frac), frac);
    let log_n = q16_to_frac(log10_q16((n as i64) << frac, frac), frac);
    let h_raw = (((log_rs as i128) << frac) / log_n as i128) as i64;
    let one = 1i64 << frac;
    let clamped = h_raw.clamp(0, one);
    Ok(HurstEstimate {
        value: clamped as f64 / one as f64,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::hurst_three_block;

    #[test]
    fn isqrt_small_cases() {
        assert_eq!(isqrt_nonrestoring(0), 0);
        assert_eq!(isqrt_nonrestoring(1), 1);
        assert_eq!(isqrt_nonrestoring(17), 4);
        assert_eq!(isqrt_nonrestoring(1_048_576), 1024);
        assert_eq!(isqrt_nonrestoring(u64::MAX), u32::MAX as u64);
    }

    #[test]
    fn isqrt_floor_property_sampled() {
        let mut state = 0xdead_beef_cafe_f00du64;
        for _ in 0..10_000 {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let q = isqrt_nonrestoring(state) as u128;
            let x = state as u128;
            assert!(q * q <= x);
            assert!((q + 1) * (q + 1) > x);
        }
    }

    #[test]
    fn config_must_partition_the_word() {
        assert!(FixedPointConfig::new(48, 16).is_ok());
        assert!(FixedPointConfig::new(40, 16).is_err());
        assert!(FixedPointConfig::new(64, 0).is_err());
        let d = FixedPointConfig::default();
        assert_eq!((d.integer_bits, d.fraction_bits), (48, 16));
    }

    #[test]
    fn log10_rom_accuracy() {
        // Error budget for the log10 stage is 0.004.
        for raw in [1i64 << 16, 3 << 16, 100 << 16, 65535 << 16, (1 << 16) + 7, 12345] {
            let got = log10_q16(raw, 16) as f64 / 65536.0;
            let want = (raw as f64 / 65536.0).log10();
            assert!(
                (got - want).abs() < 0.004,
                "log10({raw}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn all_zero_series_degenerate() {
        let s = ObservationSeries::new(vec![0; 512], 100).unwrap();
        let h = hurst_fixedpoint(&s, &FixedPointConfig::default()).unwrap();
        assert_eq!(h.value, 0.0);
        assert!(h.degenerate);
    }

    #[test]
    fn matches_float_path_on_seeded_series() {
        let mut state = 7u64;
        let samples: Vec<u64> = (0..512)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                state % (1 << 16)
            })
            .collect();
        let s = ObservationSeries::new(samples, 100).unwrap();
        let fixed = hurst_fixedpoint(&s, &FixedPointConfig::default()).unwrap();
        let float = hurst_three_block(&s).unwrap();
        assert!(
            (fixed.value - float.value).abs() <= 0.02,
            "fixed {} vs float {}",
            fixed.value,
            float.value
        );
    }

    #[test]
    fn oversized_count_overflows_input_stage() {
        let mut samples = vec![1u64; 512];
        samples[0] = 1 << 48;
        let s = ObservationSeries::new(samples, 100).unwrap();
        match hurst_fixedpoint(&s, &FixedPointConfig::default()) {
            Err(Error::Overflow { stage }) => assert_eq!(stage, "input load"),
            other => panic!("expected input-load overflow, got {other:?}"),
        }
    }
}
