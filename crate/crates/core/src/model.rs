//! Closed-form timing model `t_image(n) = a/n + b*n`.
//!
//! `a` is the time one processing module needs for every window of an image,
//! `b` is the per-module overhead each image pays on the ring. Times are in
//! seconds.

use num_traits::{Float, ToPrimitive};

use crate::error::{config_err, Error, Result};

const REFERENCE_CSV: &str = include_str!("../data/table2.csv");

/// One row of measured throughput.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub n: usize,
    pub images_per_sec: f64,
    pub pixel_clock_mhz: f64,
    pub vectors_per_sec: f64,
}

/// The embedded hardware measurements for one to six processing modules.
pub fn reference_table() -> Vec<ReferenceRow> {
    parse_reference(REFERENCE_CSV).expect("embedded reference table is valid")
}

/// Parses `n,images_per_sec,pixel_clock_mhz,vectors_per_sec` rows. Lines
/// starting with `#` and the header line are skipped.
pub fn parse_reference(text: &str) -> Result<Vec<ReferenceRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("n,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let err = || Error::Input(format!("reference line {}: '{line}'", lineno + 1));
        if fields.len() != 4 {
            return Err(err());
        }
        let n: usize = fields[0].parse().map_err(|_| err())?;
        let nums: Vec<f64> = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| err()))
            .collect::<Result<_>>()?;
        if n == 0 || nums.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(err());
        }
        rows.push(ReferenceRow {
            n,
            images_per_sec: nums[0],
            pixel_clock_mhz: nums[1],
            vectors_per_sec: nums[2],
        });
    }
    Ok(rows)
}

/// Result of a saturation search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Saturation {
    pub n: usize,
    /// `false` when the search hit its cap without the gain dropping below
    /// the threshold.
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingModel<F> {
    pub a: F,
    pub b: F,
}

fn cast<F: Float, T: ToPrimitive>(v: T) -> F {
    F::from(v).expect("value representable in float type")
}

impl<F: Float> TimingModel<F> {
    pub fn new(a: F, b: F) -> Self {
        TimingModel { a, b }
    }

    /// Builds the model from cycle costs on a processing clock of `f_mhz`.
    pub fn from_cycles(window_count: usize, t_corr: F, hop_cost: F, f_mhz: F) -> Self {
        let hz = f_mhz * cast(1e6);
        TimingModel {
            a: cast::<F, _>(window_count) * t_corr / hz,
            b: hop_cost / hz,
        }
    }

    /// Inverse of [`from_cycles`](Self::from_cycles): `(t_corr, hop_cost)`.
    pub fn to_cycles(&self, window_count: usize, f_mhz: F) -> (F, F) {
        let hz = f_mhz * cast(1e6);
        (self.a * hz / cast(window_count), self.b * hz)
    }

    pub fn image_time(&self, n: usize) -> F {
        let n: F = cast(n);
        self.a / n + self.b * n
    }

    pub fn images_per_sec(&self, n: usize) -> F {
        self.image_time(n).recip()
    }

    pub fn speedup(&self, n: usize) -> F {
        self.images_per_sec(n) / self.images_per_sec(1)
    }

    /// Continuous throughput optimum `sqrt(a/b)`; `None` without overhead.
    pub fn optimum(&self) -> Option<F> {
        (self.b > F::zero()).then(|| (self.a / self.b).sqrt())
    }

    /// Least-squares fit on relative error to `(n, images_per_sec)` samples.
    /// A negative overhead is clamped to zero and `a` refit alone.
    pub fn fit(samples: &[(usize, F)]) -> Result<Self> {
        let mut distinct: Vec<usize> = samples.iter().map(|s| s.0).collect();
        distinct.sort_unstable();
        distinct.dedup();
        if samples.len() < 2 || distinct.len() < 2 {
            return Err(Error::InsufficientData { rows: samples.len() });
        }
        if samples.iter().any(|&(n, r)| n == 0 || r.is_nan() || r <= F::zero()) {
            return Err(config_err("reference rows need n >= 1 and positive rates"));
        }
        // residual_i = (a/n + b n) / t_i - 1, linear in (a, b)
        let (mut suu, mut suv, mut svv, mut su, mut sv) =
            (F::zero(), F::zero(), F::zero(), F::zero(), F::zero());
        for &(n, rate) in samples {
            let nf: F = cast(n);
            let u = rate / nf;
            let v = rate * nf;
            suu = suu + u * u;
            suv = suv + u * v;
            svv = svv + v * v;
            su = su + u;
            sv = sv + v;
        }
        let det = suu * svv - suv * suv;
        let mut a = (su * svv - sv * suv) / det;
        let mut b = (suu * sv - suv * su) / det;
        if b.is_nan() || b <= a * cast(1e-9) {
            b = F::zero();
            a = su / suu;
        }
        Ok(TimingModel { a, b })
    }

    /// Relative error of the model against each sample.
    pub fn relative_errors(&self, samples: &[(usize, F)]) -> Vec<F> {
        samples
            .iter()
            .map(|&(n, rate)| self.images_per_sec(n) / rate - F::one())
            .collect()
    }

    /// Smallest `n` for which one more module adds less than
    /// `threshold * rate(1)` images per second, searched up to `cap`.
    pub fn saturation(&self, threshold: F, cap: usize) -> Saturation {
        let base = self.images_per_sec(1);
        // keep rounding noise on a linear model from looking like saturation
        let limit = threshold * base * (F::one() - cast(1e-9));
        for n in 1..cap {
            if self.images_per_sec(n + 1) - self.images_per_sec(n) < limit {
                return Saturation { n, saturated: true };
            }
        }
        Saturation {
            n: cap,
            saturated: false,
        }
    }
}

impl<F: Float> TimingModel<F> {
    pub fn fit_reference(rows: &[ReferenceRow]) -> Result<Self> {
        let samples: Vec<(usize, F)> = rows.iter().map(|r| (r.n, cast(r.images_per_sec))).collect();
        Self::fit(&samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<(usize, f64)> {
        reference_table().iter().map(|r| (r.n, r.images_per_sec)).collect()
    }

    #[test]
    fn reference_table_loads() {
        let rows = reference_table();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0].images_per_sec, 204.0);
        assert_eq!(rows[5].vectors_per_sec, 85106.0);
    }

    #[test]
    fn fit_matches_oracle() {
        // values from an independent weighted least-squares solve
        let m = TimingModel::<f64>::fit(&samples()).unwrap();
        assert!((m.a * 1e3 - 4.93310).abs() < 1e-4, "a = {}", m.a);
        assert!((m.b * 1e3 - 0.0202647).abs() < 1e-6, "b = {}", m.b);
        assert!((m.optimum().unwrap() - 15.60).abs() < 0.01);
        for e in m.relative_errors(&samples()) {
            assert!(e.abs() < 0.03, "{e}");
        }
    }

    #[test]
    fn two_row_fit_predicts_row_four() {
        let s = samples();
        let m = TimingModel::<f64>::fit(&[s[0], s[5]]).unwrap();
        assert!((m.a * 1e3 - 4.8807).abs() < 0.001);
        assert!((m.b * 1e3 - 0.02121).abs() < 0.0001);
        assert!((m.images_per_sec(4) / 757.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn linear_data_gives_zero_overhead() {
        let s: Vec<(usize, f64)> = (1..=6).map(|n| (n, 200.0 * n as f64)).collect();
        let m = TimingModel::fit(&s).unwrap();
        assert_eq!(m.b, 0.0);
        assert!((m.a - 1.0 / 200.0).abs() < 1e-15);
        for n in 1..=6 {
            assert!((m.images_per_sec(n) - n as f64 * m.images_per_sec(1)).abs() < 1e-9);
        }
    }

    #[test]
    fn fit_needs_two_module_counts() {
        assert!(matches!(
            TimingModel::<f64>::fit(&[(3, 500.0)]),
            Err(Error::InsufficientData { rows: 1 })
        ));
        assert!(matches!(
            TimingModel::<f64>::fit(&[(3, 500.0), (3, 510.0)]),
            Err(Error::InsufficientData { rows: 2 })
        ));
    }

    #[test]
    fn saturation_cases() {
        let m = TimingModel::<f64>::fit(&samples()).unwrap();
        assert_eq!(m.saturation(0.05, 64), Saturation { n: 14, saturated: true });
        assert_eq!(m.saturation(1.0, 64).n, 1);
        let linear = TimingModel::new(m.a, 0.0);
        assert_eq!(linear.saturation(0.05, 64), Saturation { n: 64, saturated: false });
    }

    #[test]
    fn cycles_round_trip_and_f32() {
        let m = TimingModel::<f64>::from_cycles(80, 6152.0, 2054.0, 100.0);
        assert!((m.a - 80.0 * 6152.0 / 1e8).abs() < 1e-15);
        let (t, h) = m.to_cycles(80, 100.0);
        assert!((t - 6152.0).abs() < 1e-9 && (h - 2054.0).abs() < 1e-9);
        let m32 = TimingModel::<f32>::fit_reference(&reference_table()).unwrap();
        assert!((m32.a as f64 * 1e3 - 4.93310).abs() < 1e-3);
    }
}
