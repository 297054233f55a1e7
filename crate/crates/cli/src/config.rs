use std::path::{Path, PathBuf};

use lagcal_core::{Error, HomogeneousPolynomial, Hypersurface, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub hypersurface: HypersurfaceSection,
    pub sampling: SamplingSection,
    pub bergman: BergmanSection,
    #[serde(default)]
    pub assumption: AssumptionSection,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub homotopy: HomotopySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HypersurfaceSection {
    /// Polynomial record file, relative to the config file.
    pub polynomial: PathBuf,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub complex: usize,
    pub real: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BergmanSection {
    pub m_min: u32,
    pub m_max: u32,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AssumptionSection {
    pub points: usize,
}

impl Default for AssumptionSection {
    fn default() -> Self {
        Self { points: 1000 }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub comass_points: usize,
    pub comass_frames: usize,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            comass_points: 20,
            comass_frames: 1000,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HomotopySection {
    pub m: u32,
    pub vertices: usize,
    pub steps: usize,
    pub count: usize,
    pub max_amplitude: f64,
    pub guard_floor: f64,
}

impl Default for HomotopySection {
    fn default() -> Self {
        Self {
            m: 2,
            vertices: 512,
            steps: 10,
            count: 20,
            max_amplitude: 0.8,
            guard_floor: lagcal_core::homotopy::DEFAULT_GUARD_FLOOR,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("lagcal-out"),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

impl ExperimentConfig {
    /// Reads and validates a config; relative paths are resolved against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            line: 0,
            msg: format!("{}: {e}", path.display()),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.hypersurface.polynomial.is_relative() {
            cfg.hypersurface.polynomial = base.join(&cfg.hypersurface.polynomial);
        }
        if cfg.output.dir.is_relative() {
            cfg.output.dir = base.join(&cfg.output.dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.bergman;
        if b.m_min < 1 || b.m_max < b.m_min {
            return Err(invalid(format!("need 1 <= m_min <= m_max, got {}..{}", b.m_min, b.m_max)));
        }
        for (name, n) in [
            ("sampling.complex", self.sampling.complex),
            ("sampling.real", self.sampling.real),
            ("assumption.points", self.assumption.points),
            ("calibration.comass_frames", self.calibration.comass_frames),
            ("homotopy.vertices", self.homotopy.vertices),
        ] {
            if n < 100 {
                return Err(invalid(format!("{name} must be at least 100, got {n}")));
            }
        }
        let h = &self.homotopy;
        if h.m < 1 || h.steps < 1 || h.count < 1 || self.calibration.comass_points < 1 {
            return Err(invalid("homotopy m, steps, count and calibration.comass_points must be positive"));
        }
        if !(h.max_amplitude >= 0.0 && h.max_amplitude.is_finite()) || !(h.guard_floor >= 0.0) {
            return Err(invalid("homotopy amplitude and guard floor must be non-negative"));
        }
        if !self.hypersurface.polynomial.is_file() {
            return Err(invalid(format!("polynomial file {} does not exist", self.hypersurface.polynomial.display())));
        }
        Ok(())
    }

    pub fn hypersurface(&self) -> Result<Hypersurface> {
        let text = std::fs::read_to_string(&self.hypersurface.polynomial)
            .map_err(|e| invalid(format!("cannot read {}: {e}", self.hypersurface.polynomial.display())))?;
        Hypersurface::new(HomogeneousPolynomial::parse(&text)?)
    }

    pub fn powers(&self) -> impl Iterator<Item = u32> {
        self.bergman.m_min..=self.bergman.m_max
    }
}
