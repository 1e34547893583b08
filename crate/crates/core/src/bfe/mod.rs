//! Binary forward exploration (BFE) and its relatives.
//!
//! Every optimizer here picks its learning rate by looking *ahead*: it probes the loss
//! (or the gradient) at candidate future points and rescales η by a fixed factor until
//! a full step and a chain of smaller steps agree within tolerance.
//!
//! - [`improved_bfe_step`]: loss comparison with zoom-in (halve η while the probes
//!   disagree) and zoom-out (double η while they agree), refreshing the comparison at
//!   the accepted point.
//! - [`bfe_zoom_in_only_step`]: η restarts from η0 every step, zoom-in only.
//! - [`mfe_step`]: the same search with an integer factor `m` instead of 2.
//! - [`bfe_gradient_change_step`]: compares gradient directions before and after a
//!   step via the angle between them.
//! - [`adaptive_bfe_gradient_change_step`]: the gradient-change search run separately
//!   on every coordinate with its own η.
//!
//! All steps are pure: search state goes in and comes back out.

mod gradient_change;
mod loss_search;
mod probe;

pub use gradient_change::{
    adaptive_bfe_gradient_change_step, bfe_gradient_change_step, gradient_angle,
    AdaptiveReport, AdaptiveState,
};
pub use loss_search::{bfe_zoom_in_only_step, improved_bfe_step, mfe_step};
pub use probe::{zoom_in_probe, zoom_out_probe, ProbeResult};

use serde::{Deserialize, Serialize};

use crate::error::{BfeError, Result};

/// How the acceptance threshold ε_val is derived from the two probe losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ToleranceRule {
    /// `0.5 * (|loss2| + |loss1|) * eps`
    MeanScaled { eps: f64 },
    /// `min(|loss2| * eps, |loss1| * eps)`
    MinScaled { eps: f64 },
    /// A fixed threshold.
    Constant { value: f64 },
    /// `0.5 * (|loss2| + |loss1|) * eps / (t + t_decay)`
    DecayMeanScaled { eps: f64, t_decay: u64 },
}

impl Default for ToleranceRule {
    fn default() -> Self {
        ToleranceRule::MeanScaled { eps: 0.001 }
    }
}

impl ToleranceRule {
    pub fn evaluate(&self, loss1: f64, loss2: f64, t: usize) -> f64 {
        match *self {
            ToleranceRule::MeanScaled { eps } => 0.5 * (loss2.abs() + loss1.abs()) * eps,
            ToleranceRule::MinScaled { eps } => (loss2.abs() * eps).min(loss1.abs() * eps),
            ToleranceRule::Constant { value } => value,
            ToleranceRule::DecayMeanScaled { eps, t_decay } => {
                0.5 * (loss2.abs() + loss1.abs()) * eps / (t as f64 + t_decay as f64)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ToleranceRule::MeanScaled { eps }
            | ToleranceRule::MinScaled { eps }
            | ToleranceRule::DecayMeanScaled { eps, .. } => eps > 0.0 && eps.is_finite(),
            ToleranceRule::Constant { value } => value > 0.0 && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(BfeError::InvalidConfig(format!("tolerance parameters must be positive: {self:?}")))
        }
    }

    pub fn label(&self) -> String {
        match *self {
            ToleranceRule::MeanScaled { eps } => format!("mean_scaled(eps={eps})"),
            ToleranceRule::MinScaled { eps } => format!("min_scaled(eps={eps})"),
            ToleranceRule::Constant { value } => format!("constant({value})"),
            ToleranceRule::DecayMeanScaled { eps, t_decay } => {
                format!("decay_mean_scaled(eps={eps},t_decay={t_decay})")
            }
        }
    }
}

/// Reduction of per-coordinate gradient angles to one ε_comp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleAggregation {
    #[default]
    Max,
    Mean,
}

impl AngleAggregation {
    pub fn reduce(&self, angles: &[f64]) -> f64 {
        match self {
            AngleAggregation::Max => angles.iter().copied().fold(0.0, f64::max),
            AngleAggregation::Mean => angles.iter().sum::<f64>() / angles.len() as f64,
        }
    }
}

/// One degree, the default angle threshold for the gradient-change variants.
pub const ONE_DEGREE: f64 = std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BfeConfig {
    pub eta0: f64,
    pub tolerance: ToleranceRule,
    pub eta_min: f64,
    pub eta_max: f64,
    pub max_inner: usize,
    /// Radians. Only used by the gradient-change variants.
    pub angle_threshold: f64,
    pub aggregation: AngleAggregation,
    /// Rescaling factor `m` for multiple forward exploration; 2 is plain BFE.
    pub factor: u32,
}

impl Default for BfeConfig {
    fn default() -> Self {
        Self {
            eta0: 0.001,
            tolerance: ToleranceRule::default(),
            eta_min: 1e-12,
            eta_max: 1e6,
            max_inner: 60,
            angle_threshold: ONE_DEGREE,
            aggregation: AngleAggregation::Max,
            factor: 2,
        }
    }
}

impl BfeConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(BfeError::InvalidConfig(msg));
        if !(self.eta_min > 0.0 && self.eta_min <= self.eta0 && self.eta0 <= self.eta_max)
            || !self.eta_max.is_finite()
        {
            return fail(format!(
                "need 0 < eta_min <= eta0 <= eta_max, got {} / {} / {}",
                self.eta_min, self.eta0, self.eta_max
            ));
        }
        if self.max_inner == 0 {
            return fail("max_inner must be at least 1".into());
        }
        if !(self.angle_threshold > 0.0 && self.angle_threshold < std::f64::consts::FRAC_PI_2) {
            return fail(format!(
                "angle_threshold must lie in (0, pi/2), got {}",
                self.angle_threshold
            ));
        }
        if self.factor < 2 {
            return fail(format!("factor must be at least 2, got {}", self.factor));
        }
        self.tolerance.validate()
    }

    pub(crate) fn check_eta(&self, eta: f64) -> Result<()> {
        if eta >= self.eta_min && eta <= self.eta_max {
            Ok(())
        } else {
            Err(BfeError::InvalidConfig(format!(
                "learning rate {eta} outside [{}, {}]",
                self.eta_min, self.eta_max
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    ZoomIn,
    ZoomOut,
    /// No search was run (baseline optimizers).
    None,
    /// Per-coordinate searches went both ways (adaptive variant).
    Mixed,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::ZoomIn => "zoom_in",
            Branch::ZoomOut => "zoom_out",
            Branch::None => "none",
            Branch::Mixed => "mixed",
        }
    }

    pub fn parse(s: &str) -> Option<Branch> {
        match s {
            "zoom_in" => Some(Branch::ZoomIn),
            "zoom_out" => Some(Branch::ZoomOut),
            "none" => Some(Branch::None),
            "mixed" => Some(Branch::Mixed),
            _ => None,
        }
    }
}

/// Telemetry for one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Probes evaluated inside the zoom loop; the bootstrap and refresh probes are
    /// not counted.
    pub inner_loops: usize,
    pub branch: Branch,
    pub eta_in: f64,
    pub eta_out: f64,
    /// Batch loss at the accepted point.
    pub loss_accepted: f64,
    pub safeguard_hit: bool,
}

/// ε_comp / ε_val measured at the end of the previous step, deciding the next branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Carried {
    pub eps_comp: f64,
    pub eps_val: f64,
}

impl Carried {
    /// Stand-in for a probe that hit a non-finite value: forces the zoom-in branch.
    pub const VIOLATED: Carried = Carried {
        eps_comp: f64::INFINITY,
        eps_val: f64::INFINITY,
    };

    /// The zoom-in condition `ε_comp >= ε_val`; a tie zooms in.
    pub fn violated(&self) -> bool {
        self.eps_comp >= self.eps_val
    }
}

/// Learning rate and carried comparison of a scalar-η search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchState {
    pub eta: f64,
    /// `None` before the first step; the first step bootstraps it with one probe.
    pub carried: Option<Carried>,
}

impl SearchState {
    pub fn new(eta0: f64) -> Self {
        Self {
            eta: eta0,
            carried: None,
        }
    }
}
