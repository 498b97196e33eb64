use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputReport {
    pub n_processing: usize,
    pub images_per_sec: f64,
    pub pixel_clock_mhz: f64,
    pub vectors_per_sec: f64,
    /// Fraction of the measured interval each processing module spent
    /// correlating.
    pub utilization: Vec<f64>,
    /// Mean fraction of link latches holding a frame; not defined for the
    /// analytic model.
    pub ring_occupancy: Option<f64>,
}

impl ThroughputReport {
    pub const CSV_HEADER: &'static str = "n,images_per_sec,pixel_clock_mhz,vectors_per_sec,utilization,ring_occupancy";

    /// Derives the pixel-clock and vector-rate columns from the image rate.
    pub fn from_image_rate(
        n_processing: usize,
        images_per_sec: f64,
        pixels: usize,
        window_count: usize,
        utilization: Vec<f64>,
        ring_occupancy: Option<f64>,
    ) -> Self {
        ThroughputReport {
            n_processing,
            images_per_sec,
            pixel_clock_mhz: images_per_sec * pixels as f64 / 1e6,
            vectors_per_sec: images_per_sec * window_count as f64,
            utilization,
            ring_occupancy,
        }
    }

    pub fn mean_utilization(&self) -> f64 {
        if self.utilization.is_empty() {
            return 0.0;
        }
        self.utilization.iter().sum::<f64>() / self.utilization.len() as f64
    }

    pub fn csv_row(&self) -> String {
        let occ = self.ring_occupancy.map(|o| format!("{o:.4}")).unwrap_or_default();
        format!(
            "{},{:.3},{:.3},{:.1},{:.4},{}",
            self.n_processing,
            self.images_per_sec,
            self.pixel_clock_mhz,
            self.vectors_per_sec,
            self.mean_utilization(),
            occ
        )
    }
}

pub fn write_reports<W: Write>(reports: &[ThroughputReport], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", ThroughputReport::CSV_HEADER)?;
    for r in reports {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}
