//! Optional TOML config file.
//!
//! ```toml
//! format = "json"
//!
//! [rate]
//! M = 4
//! L = 1
//! eta = 1e-5
//! mu = "auto"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::args::{AsymptoticArgs, Format, RateArgs, ScanArgs, SimulateArgs, ThresholdArgs, VerifyArgs};
use crate::range::ParseError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub verify: Option<VerifyArgs>,
    pub rate: Option<RateArgs>,
    pub asymptotic: Option<AsymptoticArgs>,
    pub scan: Option<ScanArgs>,
    pub threshold: Option<ThresholdArgs>,
    pub simulate: Option<SimulateArgs>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        toml::from_str(text).map_err(|e| ParseError(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, ParseError> {
        let text = std::fs::read_to_string(path).map_err(|e| ParseError(format!("config {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::range::AutoOr;

    #[test]
    fn parses_tables() {
        let cfg = FileConfig::parse(
            "format = \"csv\"\n[rate]\nM = 4\nL = 1\nmu = \"auto\"\neta = 1e-5\n[threshold]\nK = 3\nTheta = [\"pi/8\", 0.4]\n",
        )
        .unwrap();
        assert_eq!(cfg.format, Some(Format::Csv));
        let rate = cfg.rate.unwrap();
        assert_eq!((rate.m, rate.l, rate.mu), (Some(4), Some(1), Some(AutoOr::Auto)));
        assert_eq!(cfg.threshold.unwrap().theta.unwrap().len(), 2);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(FileConfig::parse("[rate]\nMM = 4\n").is_err());
        assert!(FileConfig::parse("[nope]\n").is_err());
        assert!(FileConfig::parse("[rate]\nmu = \"fast\"\n").is_err());
    }
}
