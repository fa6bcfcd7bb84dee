//! Globally adaptive Gauss-Kronrod (10/21-point) quadrature.
//!
//! The integrator bisects the sub-interval with the largest error estimate
//! until the summed estimate drops below `max(abs_tol, rel_tol * |I|)`.
//! Callers with multi-scale integrands pass explicit breakpoints so that the
//! first pass never straddles features far smaller than the interval.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Stopping rule for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    /// Upper bound on the number of live sub-intervals.
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64) -> Self {
        Tolerance {
            rel,
            abs,
            max_intervals: 4000,
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::new(1e-6, 1e-9)
    }
}

/// A value together with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub const ZERO: Estimate = Estimate { value: 0.0, error: 0.0 };

    pub fn exact(value: f64) -> Self {
        Estimate { value, error: 0.0 }
    }

    /// `exp(-scale * self)`, with the error propagated to first order.
    pub fn exp_neg(self, scale: f64) -> Estimate {
        let value = (-scale * self.value).exp();
        Estimate {
            value,
            error: value * scale * self.error,
        }
    }

    pub fn scaled(self, factor: f64) -> Estimate {
        Estimate {
            value: self.value * factor,
            error: self.error * factor.abs(),
        }
    }

    /// Product of two independent estimates (first-order error).
    pub fn times(self, other: Estimate) -> Estimate {
        Estimate {
            value: self.value * other.value,
            error: self.error * other.value.abs() + other.error * self.value.abs(),
        }
    }

    pub fn plus(self, other: Estimate) -> Estimate {
        Estimate {
            value: self.value + other.value,
            error: self.error + other.error,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lower: f64,
    upper: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, lower: f64, upper: f64) -> Segment {
    let center = 0.5 * (lower + upper);
    let half = 0.5 * (upper - lower);
    let f_center = f(center);
    let mut kronrod = f_center * WGK[10];
    let mut gauss = 0.0;
    let mut abs_sum = kronrod.abs();
    let mut values = [(0.0, 0.0); 10];
    for (j, slot) in values.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        *slot = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = kronrod * 0.5;
    let mut asc = WGK[10] * (f_center - mean).abs();
    for (j, (f1, f2)) in values.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let value = kronrod * half;
    let abs_sum = abs_sum * half.abs();
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_sum);
    }
    Segment {
        lower,
        upper,
        value,
        error,
    }
}

/// Integrates `f` over `[lower, upper]`. Reversed bounds negate the result.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lower: f64, upper: f64, tol: &Tolerance) -> Result<Estimate> {
    integrate_with_breakpoints(f, &[lower, upper], tol)
}

/// Integrates `f` over `[points[0], points[last]]`, seeding the adaptive
/// subdivision with the supplied (sorted, ascending) breakpoints.
pub fn integrate_with_breakpoints<F: Fn(f64) -> f64>(f: F, points: &[f64], tol: &Tolerance) -> Result<Estimate> {
    if points.len() < 2 {
        return Ok(Estimate::ZERO);
    }
    let (lo, hi) = (points[0], points[points.len() - 1]);
    if lo == hi {
        return Ok(Estimate::ZERO);
    }
    if lo > hi {
        let reversed: Vec<f64> = points.iter().rev().copied().collect();
        let est = integrate_with_breakpoints(f, &reversed, tol)?;
        return Ok(Estimate {
            value: -est.value,
            error: est.error,
        });
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("bounds", "integration bounds must be finite"));
    }

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_error = 0.0;
    for pair in points.windows(2) {
        if pair[1] > pair[0] {
            let seg = kronrod21(&f, pair[0], pair[1]);
            total += seg.value;
            total_error += seg.error;
            heap.push(seg);
        }
    }

    while total_error > tol.target(total) && heap.len() < tol.max_intervals {
        let worst = heap.pop().expect("heap is never empty here");
        let mid = 0.5 * (worst.lower + worst.upper);
        if mid <= worst.lower || mid >= worst.upper {
            // Interval can no longer be split in floating point.
            heap.push(worst);
            break;
        }
        let left = kronrod21(&f, worst.lower, mid);
        let right = kronrod21(&f, mid, worst.upper);
        total += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    // Re-sum to shed the drift from incremental updates.
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    if !value.is_finite() || error > tol.target(value) * 10.0 {
        return Err(Error::Quadrature {
            lower: lo,
            upper: hi,
            value,
            error,
        });
    }
    Ok(Estimate { value, error })
}

/// Breakpoints `lower, anchor*2^j..., upper` for integrands whose features
/// sit around the scale `anchor` but whose range may span many decades.
pub fn geometric_breakpoints(lower: f64, upper: f64, anchor: f64) -> Vec<f64> {
    let mut points = vec![lower];
    if upper > lower && anchor > 0.0 && anchor.is_finite() {
        let mut x = anchor;
        let mut halvings = 0;
        while x > lower && halvings < 6 {
            x *= 0.5;
            halvings += 1;
        }
        while x < upper {
            if x > lower {
                points.push(x);
            }
            x *= 2.0;
        }
    }
    points.push(upper);
    points
}
