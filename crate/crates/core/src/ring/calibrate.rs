use super::config::SimConfig;
use super::sim::predict_throughput;
use crate::error::Result;
use crate::model::ReferenceRow;
use crate::ThroughputModel;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    pub n: usize,
    pub reference: f64,
    pub predicted: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// Base config with the fitted `t_corr` and `hop_cost`.
    pub config: SimConfig,
    /// The unrounded fit.
    pub model: ThroughputModel,
    /// Images-per-second agreement after rounding to whole cycles.
    pub rows: Vec<CalibrationRow>,
}

impl Calibration {
    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_error.abs()).fold(0.0, f64::max)
    }
}

/// Fits `t_corr` and `hop_cost` of `base` to measured image rates.
pub fn calibrate(base: &SimConfig, rows: &[ReferenceRow]) -> Result<Calibration> {
    base.validate()?;
    let model = ThroughputModel::fit_reference(rows)?;
    let (t_corr, hop) = model.to_cycles(base.window_count(), base.processing.freq_mhz);
    let config = SimConfig {
        t_corr: (t_corr.round() as u64).max(1),
        hop_cost: hop.round().max(0.0) as u64,
        ..base.clone()
    };
    let rows = rows
        .iter()
        .map(|r| {
            let predicted = predict_throughput(&config, r.n).images_per_sec;
            CalibrationRow {
                n: r.n,
                reference: r.images_per_sec,
                predicted,
                rel_error: predicted / r.images_per_sec - 1.0,
            }
        })
        .collect();
    Ok(Calibration { config, model, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_table;

    #[test]
    fn reference_fit_reproduces_defaults() {
        let c = calibrate(&SimConfig::default(), &reference_table()).unwrap();
        assert_eq!((c.config.t_corr, c.config.hop_cost), (6166, 2026));
        assert_eq!(c.config, SimConfig::default());
        assert!(c.max_error() < 0.03, "{}", c.max_error());
    }

    #[test]
    fn linear_reference_gives_zero_hop_cost() {
        let rows: Vec<ReferenceRow> = (1..=6)
            .map(|n| ReferenceRow {
                n,
                images_per_sec: 250.0 * n as f64,
                pixel_clock_mhz: 0.0,
                vectors_per_sec: 0.0,
            })
            .collect();
        let c = calibrate(&SimConfig::default(), &rows).unwrap();
        assert_eq!(c.config.hop_cost, 0);
        assert_eq!(c.config.t_corr, 5000);
        assert!(c.max_error() < 1e-12);
    }
}
