use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::RetrievalParams;
use crate::scene::NoiseModel;
use crate::triangulate::RansacParams;

/// Every knob of the localization pipeline. Stored as flat `key = value` text.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub k: usize,
    pub d_lo: f64,
    pub d_hi: f64,
    pub alpha_max: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub dir_sigma_deg: f64,
    pub rot_sigma_deg: f64,
    pub scale_rel_sigma: f64,
    pub outlier_prob: f64,
    pub outlier_per_sample: bool,
    pub sigma_spread: f64,
    pub mc_samples: usize,
    pub use_scale: bool,
    pub use_uncertainty: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let r = RetrievalParams::default();
        let p = RansacParams::default();
        let nm = NoiseModel::noiseless();
        Self {
            k: r.k,
            d_lo: r.min_spacing,
            d_hi: r.max_spacing,
            alpha_max: p.alpha_max,
            s_min: p.s_min,
            s_max: p.s_max,
            dir_sigma_deg: nm.dir_sigma_deg,
            rot_sigma_deg: nm.rot_sigma_deg,
            scale_rel_sigma: nm.scale_rel_sigma,
            outlier_prob: nm.outlier_prob,
            outlier_per_sample: nm.outlier_per_sample,
            sigma_spread: nm.sigma_spread,
            mc_samples: nm.mc_samples,
            use_scale: true,
            use_uncertainty: true,
            seed: nm.seed,
        }
    }
}

impl PipelineConfig {
    pub fn retrieval(&self) -> RetrievalParams {
        RetrievalParams {
            k: self.k,
            min_spacing: self.d_lo,
            max_spacing: self.d_hi,
        }
    }

    pub fn ransac(&self) -> RansacParams {
        RansacParams {
            alpha_max: self.alpha_max,
            s_min: self.s_min,
            s_max: self.s_max,
            scale_test: self.use_scale,
            uncertainty_tiebreak: self.use_uncertainty,
        }
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            dir_sigma_deg: self.dir_sigma_deg,
            rot_sigma_deg: self.rot_sigma_deg,
            scale_rel_sigma: self.scale_rel_sigma,
            outlier_prob: self.outlier_prob,
            outlier_per_sample: self.outlier_per_sample,
            sigma_spread: self.sigma_spread,
            mc_samples: self.mc_samples,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidArgument("k must be >= 2".into()));
        }
        if !(self.d_lo >= 0.0 && self.d_lo <= self.d_hi) {
            return Err(Error::InvalidArgument("need 0 <= d_lo <= d_hi".into()));
        }
        self.ransac().validate()?;
        self.noise().validate()
    }

    /// Parses `key = value` lines; missing keys take their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }
}
