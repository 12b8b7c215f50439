//! Pipeline configuration read from a TOML file.
//!
//! Every key is optional and defaults to the reference parameters. Unknown
//! keys are rejected so typos surface instead of silently running defaults.
//!
//! ```toml
//! sigma = 1.5
//! workers = 4
//!
//! [correction]
//! radius = 7
//! lambda_t = 20.0
//!
//! [fit]
//! step = 1.0
//! mode = "smooth_closed"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::correction::{ArgmaxMode, CorrectionParams};
use crate::error::{Error, Result};
use crate::eval::{default_tolerance, MatchMode};
use crate::refit::{ClassFit, FitMode, FitParams};

/// Environment variable holding the default config path for the CLI.
pub const CONFIG_ENV: &str = "CELLEDGE_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Gaussian smoothing before differentiation, in pixels.
    pub sigma: f64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub correction: CorrectionSection,
    pub fit: FitSection,
    pub raster: RasterSection,
    pub eval: EvalSection,
    pub prep: PrepSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sigma: 1.5,
            workers: 0,
            correction: CorrectionSection::default(),
            fit: FitSection::default(),
            raster: RasterSection::default(),
            eval: EvalSection::default(),
            prep: PrepSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgmaxSetting {
    Weighted,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectionSection {
    pub radius: u32,
    /// Defaults to `radius / 2`.
    pub bandwidth: Option<f64>,
    pub lambda_t: f64,
    pub candidate_step: f64,
    pub argmax: ArgmaxSetting,
}

impl Default for CorrectionSection {
    fn default() -> Self {
        Self {
            radius: 7,
            bandwidth: None,
            lambda_t: 20.0,
            candidate_step: 1.0,
            argmax: ArgmaxSetting::Weighted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModeSetting {
    SmoothClosed,
    Stitched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassSection {
    pub a: f64,
    pub divisor: f64,
    pub min_group: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub step: f64,
    pub mode: FitModeSetting,
    /// Overlap half-width `n_d` for stitched mode; a multiple of 0.5.
    pub overlap: f64,
    pub c_divisor: f64,
    pub cytoplasm: ClassSection,
    pub nucleus: ClassSection,
}

impl Default for FitSection {
    fn default() -> Self {
        let d = FitParams::<f64>::default();
        let class = |c: ClassFit<f64>| ClassSection {
            a: c.a,
            divisor: c.divisor,
            min_group: c.min_group,
        };
        Self {
            step: d.step,
            mode: FitModeSetting::SmoothClosed,
            overlap: 1.0,
            c_divisor: d.c_divisor,
            cytoplasm: class(d.cytoplasm),
            nucleus: class(d.nucleus),
        }
    }
}

impl Default for ClassSection {
    fn default() -> Self {
        FitSection::default().cytoplasm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RasterSection {
    /// Also write the uncorrected polygon edge map.
    pub write_original: bool,
    /// Also write the gradient field as a 16-bit PNG.
    pub dump_gradient: bool,
}

impl Default for RasterSection {
    fn default() -> Self {
        Self {
            write_original: true,
            dump_gradient: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchSetting {
    Greedy,
    Augmented,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Fixed matching distance in pixels; overrides `tolerance_fraction`.
    pub tolerance: Option<f64>,
    /// Matching distance as a fraction of the image diagonal.
    pub tolerance_fraction: f64,
    pub thresholds: usize,
    pub matching: MatchSetting,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            tolerance: None,
            tolerance_fraction: 0.0075,
            thresholds: 33,
            matching: MatchSetting::Augmented,
        }
    }
}

impl EvalSection {
    pub fn tolerance_for(&self, width: u32, height: u32) -> f64 {
        self.tolerance
            .unwrap_or_else(|| default_tolerance(width, height) / 0.0075 * self.tolerance_fraction)
    }

    pub fn match_mode(&self) -> MatchMode {
        match self.matching {
            MatchSetting::Greedy => MatchMode::Greedy,
            MatchSetting::Augmented => MatchMode::Augmented,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrepSection {
    pub seed: u64,
    pub source_width: u32,
    pub source_height: u32,
    pub grid_cols: u32,
    pub grid_rows: u32,
}

impl Default for PrepSection {
    fn default() -> Self {
        Self {
            seed: 0,
            source_width: 2048,
            source_height: 1536,
            grid_cols: 4,
            grid_rows: 4,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        self.correction_params().validate().map_err(wrap)?;
        self.fit_params().map_err(wrap)?.validate().map_err(wrap)?;
        if self.eval.thresholds == 0 {
            return Err(Error::Config("eval.thresholds must be >= 1".into()));
        }
        if let Some(t) = self.eval.tolerance {
            if !(t >= 0.0) {
                return Err(Error::Config("eval.tolerance must be >= 0".into()));
            }
        }
        if !(self.eval.tolerance_fraction >= 0.0) {
            return Err(Error::Config("eval.tolerance_fraction must be >= 0".into()));
        }
        Ok(())
    }

    pub fn correction_params(&self) -> CorrectionParams<f64> {
        let c = &self.correction;
        CorrectionParams {
            radius: c.radius,
            bandwidth: c.bandwidth.unwrap_or(f64::from(c.radius) / 2.0),
            lambda_t: c.lambda_t,
            candidate_step: c.candidate_step,
            argmax: match c.argmax {
                ArgmaxSetting::Weighted => ArgmaxMode::Weighted,
                ArgmaxSetting::Raw => ArgmaxMode::Raw,
            },
        }
    }

    pub fn fit_params(&self) -> Result<FitParams<f64>> {
        let f = &self.fit;
        let class = |c: &ClassSection| ClassFit {
            a: c.a,
            divisor: c.divisor,
            min_group: c.min_group,
        };
        Ok(FitParams {
            step: f.step,
            cytoplasm: class(&f.cytoplasm),
            nucleus: class(&f.nucleus),
            c_divisor: f.c_divisor,
            mode: match f.mode {
                FitModeSetting::SmoothClosed => FitMode::SmoothClosed,
                FitModeSetting::Stitched => FitMode::stitched(f.overlap)?,
            },
        })
    }
}
