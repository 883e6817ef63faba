//! Run configuration shared by every pipeline stage, with layered
//! overrides: explicit values > config file > seed environment variable >
//! defaults.

use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisConfig, FitRange, DEFAULT_T0};
use crate::error::{Error, Result};
use crate::reverb::ScaleRange;
use crate::synthesis::{SynthesisConfig, TargetRanges, DEFAULT_RETRY_CAP};

/// Environment variable consulted for the seed when nothing else sets it.
pub const SEED_ENV: &str = "REVERB_FORGE_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Early tolerance window half-width, seconds.
    pub t_0: f64,
    pub t60_min: f64,
    pub t60_max: f64,
    pub drr_min: f64,
    pub drr_max: f64,
    pub p_apply: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub fit_upper_db: f64,
    pub fit_lower_db: f64,
    pub grid_t60_bins: usize,
    pub grid_drr_bins: usize,
    /// Reshape decay per octave band when possible.
    pub per_band: bool,
    pub retry_cap: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ranges = TargetRanges::default();
        let scale = ScaleRange::default();
        let fit = FitRange::default();
        Self {
            seed: 0,
            t_0: DEFAULT_T0,
            t60_min: ranges.t60.0,
            t60_max: ranges.t60.1,
            drr_min: ranges.drr.0,
            drr_max: ranges.drr.1,
            p_apply: 0.99,
            scale_min: scale.lo,
            scale_max: scale.hi,
            fit_upper_db: fit.upper_db,
            fit_lower_db: fit.lower_db,
            grid_t60_bins: 8,
            grid_drr_bins: 8,
            per_band: true,
            retry_cap: DEFAULT_RETRY_CAP,
        }
    }
}

/// A partial configuration: every field optional. Used for the config file
/// and for command-line overrides alike.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverlay {
    pub seed: Option<u64>,
    pub t_0: Option<f64>,
    pub t60_min: Option<f64>,
    pub t60_max: Option<f64>,
    pub drr_min: Option<f64>,
    pub drr_max: Option<f64>,
    pub p_apply: Option<f64>,
    pub scale_min: Option<f64>,
    pub scale_max: Option<f64>,
    pub fit_upper_db: Option<f64>,
    pub fit_lower_db: Option<f64>,
    pub grid_t60_bins: Option<usize>,
    pub grid_drr_bins: Option<usize>,
    pub per_band: Option<bool>,
    pub retry_cap: Option<usize>,
}

macro_rules! overlay_fields {
    ($target:ident, $overlay:ident, $($f:ident),*) => {
        $(if let Some(v) = $overlay.$f { $target.$f = v; })*
    };
}

impl RunConfig {
    pub fn apply(&mut self, overlay: &ConfigOverlay) {
        let o = overlay.clone();
        overlay_fields!(
            self, o, seed, t_0, t60_min, t60_max, drr_min, drr_max, p_apply, scale_min, scale_max, fit_upper_db,
            fit_lower_db, grid_t60_bins, grid_drr_bins, per_band, retry_cap
        );
    }

    /// Defaults, then the seed from `env_seed` (the raw environment value,
    /// if set), then each overlay in order of increasing precedence.
    pub fn layered(env_seed: Option<&str>, overlays: &[&ConfigOverlay]) -> Result<Self> {
        let mut config = Self::default();
        if let Some(raw) = env_seed {
            config.seed =
                raw.trim().parse().map_err(|_| Error::invalid(format!("{SEED_ENV}={raw:?} is not a 64-bit seed")))?;
        }
        for o in overlays {
            config.apply(o);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_0 > 0.0 && self.t_0.is_finite()) {
            return Err(Error::invalid(format!("t_0 {} must be positive", self.t_0)));
        }
        self.target_ranges().validate()?;
        if !(0.0..=1.0).contains(&self.p_apply) {
            return Err(Error::invalid(format!("p_apply {} outside [0, 1]", self.p_apply)));
        }
        self.scale_range().validate()?;
        FitRange::new(self.fit_upper_db, self.fit_lower_db)?;
        if self.grid_t60_bins == 0 || self.grid_drr_bins == 0 {
            return Err(Error::invalid("grid bins must be positive"));
        }
        if self.retry_cap == 0 {
            return Err(Error::invalid("retry_cap must be positive"));
        }
        Ok(())
    }

    pub fn target_ranges(&self) -> TargetRanges {
        TargetRanges { t60: (self.t60_min, self.t60_max), drr: (self.drr_min, self.drr_max) }
    }

    pub fn scale_range(&self) -> ScaleRange {
        ScaleRange { lo: self.scale_min, hi: self.scale_max }
    }

    pub fn fit(&self) -> FitRange {
        FitRange { upper_db: self.fit_upper_db, lower_db: self.fit_lower_db }
    }

    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig { t_0: self.t_0, fit: self.fit(), bands: true }
    }

    pub fn synthesis(&self) -> SynthesisConfig {
        SynthesisConfig {
            analysis: AnalysisConfig { bands: false, ..self.analysis() },
            per_band: self.per_band,
            retry_cap: self.retry_cap,
            ranges: self.target_ranges(),
        }
    }
}
