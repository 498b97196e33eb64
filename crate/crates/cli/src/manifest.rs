use std::time::{SystemTime, UNIX_EPOCH};

/// `#` comment block written at the top of every output file.
pub struct RunManifest {
    pub command: String,
    pub seed: Option<u64>,
    pub extra: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            seed: None,
            extra: Vec::new(),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.to_string(), value.to_string()));
        self
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "# RunManifest\n# tool = ringpiv {}\n# command = {}\n",
            env!("CARGO_PKG_VERSION"),
            self.command
        );
        if let Some(seed) = self.seed {
            s += &format!("# seed = {seed}\n");
        }
        for (k, v) in &self.extra {
            s += &format!("# {k} = {v}\n");
        }
        s += &format!("# created_unix = {}\n", timestamp());
        s
    }
}

/// Seconds since the epoch, pinned by `SOURCE_DATE_EPOCH` when set.
fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}
