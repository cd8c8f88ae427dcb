use crate::crossbar::{Bits, ConductanceRange};
use crate::perf::{EnergyParams, TimingParams};
use crate::slicer::Structure;
use crate::{Error, Result};
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// How a sweep point is detected: the digital oracle or the analog circuit
/// at a given memristor precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(try_from = "String")]
pub enum Precision {
    Digital,
    Memristor(Bits),
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precision::Digital => f.write_str("digital"),
            Precision::Memristor(b) => write!(f, "{b}"),
        }
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "digital" => Ok(Precision::Digital),
            other => other.parse().map(Precision::Memristor),
        }
    }
}

impl TryFrom<String> for Precision {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// BER sweep configuration, loadable from TOML.
///
/// ```toml
/// users = 8
/// antennas = 16
/// modulation = 16
/// snr_db = [8.0, 12.0, 16.0]
/// precisions = ["4", "6", "8", "digital"]
/// trials = 20000
/// seed = 1
/// structure = "direct"
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub users: usize,
    pub antennas: usize,
    pub modulation: usize,
    pub snr_db: Vec<f64>,
    pub precisions: Vec<Precision>,
    /// Trials per SNR point (upper bound when `max_errors` is set).
    pub trials: u64,
    /// Stop a point once every precision has at least this many bit errors.
    pub max_errors: Option<u64>,
    pub seed: u64,
    pub structure: Structure,
    pub conductance_min_us: f64,
    pub conductance_max_us: f64,
    /// Volts per symbol unit (slicer reference voltage).
    pub voltage_scale: f64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub csv: Option<PathBuf>,
    pub plot_csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    /// Desk-scale 8×16, 16-QAM sweep.
    fn default() -> Self {
        Self {
            users: 8,
            antennas: 16,
            modulation: 16,
            snr_db: vec![8.0, 12.0, 16.0],
            precisions: vec![
                Precision::Memristor(Bits::Finite(4)),
                Precision::Memristor(Bits::Finite(6)),
                Precision::Memristor(Bits::Finite(8)),
                Precision::Digital,
            ],
            trials: 20_000,
            max_errors: None,
            seed: 1,
            structure: Structure::DirectSelect,
            conductance_min_us: 0.1,
            conductance_max_us: 30.0,
            voltage_scale: 0.1,
            threads: 0,
            csv: None,
            plot_csv: None,
            svg: None,
        }
    }
}

impl ExperimentConfig {
    /// The long-running 32×64 reproduction.
    pub fn full_scale() -> Self {
        Self {
            users: 32,
            antennas: 64,
            snr_db: vec![4.0, 6.0, 8.0, 10.0, 12.0, 14.0],
            precisions: vec![
                Precision::Memristor(Bits::Finite(4)),
                Precision::Memristor(Bits::Finite(5)),
                Precision::Memristor(Bits::Finite(6)),
                Precision::Memristor(Bits::Finite(7)),
                Precision::Memristor(Bits::Finite(8)),
                Precision::Digital,
            ],
            trials: 5_000,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_empty() {
            return Err(Error::Config("SNR grid must not be empty".into()));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR values must be finite".into()));
        }
        if self.precisions.is_empty() {
            return Err(Error::Config("precision list must not be empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.voltage_scale > 0.0) {
            return Err(Error::Config("voltage scale must be positive".into()));
        }
        self.range()?;
        crate::mimo::MimoConfig::equal_power(self.users, self.antennas, 0.0, self.modulation)?;
        Ok(())
    }

    pub fn range(&self) -> Result<ConductanceRange> {
        ConductanceRange::new(self.conductance_min_us * 1e-6, self.conductance_max_us * 1e-6)
    }

    pub fn bits_per_trial(&self) -> u64 {
        (self.users * self.modulation.trailing_zeros() as usize) as u64
    }
}

/// Performance report configuration, loadable from TOML.
///
/// Timing and energy parameters live in `[timing]` and `[energy]` tables
/// (seconds and watts). When `flops` is absent the 32×64 system uses the
/// reference count and any other size uses the convention count.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerfConfig {
    pub users: usize,
    pub antennas: usize,
    pub modulation: usize,
    /// Operating point used for the memristor Joule term.
    pub snr_db: f64,
    pub seed: u64,
    pub structure: Structure,
    pub bits: Bits,
    pub flops: Option<f64>,
    pub timing: TimingParams,
    pub energy: EnergyParams,
}

impl Default for PerfConfig {
    fn default() -> Self {
        Self {
            users: 32,
            antennas: 64,
            modulation: 16,
            snr_db: 20.0,
            seed: 1,
            structure: Structure::DirectSelect,
            bits: Bits::Infinite,
            flops: None,
            timing: TimingParams::default(),
            energy: EnergyParams::default(),
        }
    }
}

impl PerfConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// FLOP count the headline figures use.
    pub fn headline_flops(&self) -> f64 {
        self.flops.unwrap_or_else(|| {
            if (self.users, self.antennas) == (32, 64) {
                crate::perf::IMPLIED_FLOPS_32X64
            } else {
                crate::sic::flop_count_dims(self.users, self.antennas) as f64
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            users = 4
            antennas = 8
            modulation = 4
            snr_db = [0, 5.5]
            precisions = ["digital", "inf", "3"]
            trials = 10
            max_errors = 50
            seed = 9
            structure = "indirect"
            svg = "out.svg"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.users, 4);
        assert_eq!(cfg.snr_db, vec![0.0, 5.5]);
        assert_eq!(
            cfg.precisions,
            vec![
                Precision::Digital,
                Precision::Memristor(Bits::Infinite),
                Precision::Memristor(Bits::Finite(3))
            ]
        );
        assert_eq!(cfg.structure, Structure::IndirectSelect);
        assert_eq!(cfg.max_errors, Some(50));
        assert_eq!(cfg.bits_per_trial(), 8);
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(ExperimentConfig::from_toml_str("snr_db = []").is_err());
        assert!(ExperimentConfig::from_toml_str("trials = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("precisions = [\"seven\"]").is_err());
        assert!(ExperimentConfig::from_toml_str("modulation = 8").is_err());
        assert!(ExperimentConfig::from_toml_str("users = 16\nantennas = 16").is_err());
        assert!(ExperimentConfig::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn perf_config_tables() {
        let cfg = PerfConfig::from_toml_str(
            r#"
            users = 4
            antennas = 4
            [timing]
            comparator_delay = 10e-9
            mux_delay = 150e-9
            [energy]
            comparator_power = 0.02
            "#,
        )
        .unwrap();
        assert_eq!(cfg.timing.mux_delay, 150e-9);
        assert_eq!(cfg.timing.t2, 130e-9);
        assert_eq!(cfg.energy.comparator_power, 0.02);
        assert_eq!(cfg.energy.oa_power, 12e-6);
        assert_eq!(cfg.headline_flops(), crate::sic::flop_count_dims(4, 4) as f64);
        assert_eq!(PerfConfig::default().headline_flops(), 2.68e7);
    }
}
