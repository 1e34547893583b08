use crate::batch::Batch;
use crate::bfe::{BfeConfig, Branch, Carried, SearchState, StepReport};
use crate::error::{BfeError, Result};
use crate::param::{GradVector, ParamVector};
use crate::problem::Problem;

/// Angle in radians between two lines with slopes `g` and `g_star`, in `[0, π/2]`.
///
/// Evaluated as `arctan |(g* − g) / (1 + g*·g)|`; perpendicular slopes give π/2.
pub fn gradient_angle(g: f64, g_star: f64) -> f64 {
    let denom = 1.0 + g_star * g;
    if denom == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let angle = ((g_star - g) / denom).abs().atan();
    if angle.is_nan() {
        // inf/inf for huge slopes; fall back to the difference of inclinations
        let diff = (g_star.atan() - g.atan()).abs();
        return if diff > std::f64::consts::FRAC_PI_2 {
            std::f64::consts::PI - diff
        } else {
            diff
        };
    }
    angle
}

fn angle_or_violated(g: f64, g_star: f64) -> f64 {
    if g_star.is_finite() {
        gradient_angle(g, g_star)
    } else {
        f64::INFINITY
    }
}

/// θ* = θ − η g and the aggregated angle between g and ∇f(θ*).
fn angle_probe<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    theta: &ParamVector,
    grad: &GradVector,
    eta: f64,
    cfg: &BfeConfig,
) -> (ParamVector, Carried) {
    let theta_star = theta.descend(eta, grad);
    let grad_star = problem.gradient(&theta_star, batch);
    let angles: Vec<f64> = grad
        .iter()
        .zip(grad_star.iter())
        .map(|(&g, &gs)| angle_or_violated(g, gs))
        .collect();
    let carried = Carried {
        eps_comp: cfg.aggregation.reduce(&angles),
        eps_val: cfg.angle_threshold,
    };
    (theta_star, carried)
}

fn refresh<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    theta: &ParamVector,
    eta: f64,
    cfg: &BfeConfig,
) -> Carried {
    let grad = problem.gradient(theta, batch);
    if !grad.is_finite() {
        return Carried {
            eps_comp: f64::INFINITY,
            eps_val: cfg.angle_threshold,
        };
    }
    angle_probe(problem, batch, theta, &grad, eta, cfg).1
}

fn gradient_checked<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    theta: &ParamVector,
) -> Result<GradVector> {
    theta.ensure_dim(problem.dimension())?;
    if !theta.is_finite() {
        return Err(BfeError::NonFinite { what: "parameter" });
    }
    let grad = problem.gradient(theta, batch);
    if !grad.is_finite() {
        return Err(BfeError::NonFinite { what: "gradient" });
    }
    Ok(grad)
}

/// One step of BFE on gradient change (scalar η shared by all coordinates).
///
/// η is rescaled at the head of each inner iteration: zoom-in halves it until the
/// angle between g and the gradient at θ − ηg drops below the threshold and takes
/// that θ*; zoom-out doubles it while the angle stays below, then backs off one
/// doubling. The angle is re-measured at the accepted point for the next step.
pub fn bfe_gradient_change_step<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    theta: &ParamVector,
    state: &SearchState,
    cfg: &BfeConfig,
) -> Result<(ParamVector, SearchState, StepReport)> {
    cfg.validate()?;
    cfg.check_eta(state.eta)?;
    let grad = gradient_checked(problem, batch, theta)?;
    let eta_in = state.eta;
    let mut eta = state.eta;
    let carried = state
        .carried
        .unwrap_or_else(|| angle_probe(problem, batch, theta, &grad, eta, cfg).1);

    let mut inner = 0;
    let mut safeguard_hit = false;
    let (accepted, branch) = if carried.violated() {
        let mut last = None;
        let mut passed = false;
        while !passed {
            if inner >= cfg.max_inner || eta / 2.0 < cfg.eta_min {
                safeguard_hit = true;
                break;
            }
            eta /= 2.0;
            let (theta_star, c) = angle_probe(problem, batch, theta, &grad, eta, cfg);
            inner += 1;
            passed = !c.violated();
            last = Some(theta_star);
        }
        (last.unwrap_or_else(|| theta.clone()), Branch::ZoomIn)
    } else {
        let mut passed = true;
        while passed {
            if inner >= cfg.max_inner || 2.0 * eta > cfg.eta_max {
                safeguard_hit = true;
                break;
            }
            eta *= 2.0;
            let (_, c) = angle_probe(problem, batch, theta, &grad, eta, cfg);
            inner += 1;
            passed = !c.violated();
        }
        if !passed {
            eta /= 2.0;
        }
        (theta.descend(eta, &grad), Branch::ZoomOut)
    };

    let carried = refresh(problem, batch, &accepted, eta, cfg);
    let report = StepReport {
        inner_loops: inner,
        branch,
        eta_in,
        eta_out: eta,
        loss_accepted: problem.loss(&accepted, batch),
        safeguard_hit,
    };
    Ok((
        accepted,
        SearchState {
            eta,
            carried: Some(carried),
        },
        report,
    ))
}

/// Per-coordinate learning rates and carried angle comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveState {
    pub etas: Vec<f64>,
    /// ε_{c,i} / ε_{v,i}; `None` until the first step bootstraps them.
    pub carried: Option<Vec<Carried>>,
}

impl AdaptiveState {
    pub fn new(dim: usize, eta0: f64) -> Self {
        Self {
            etas: vec![eta0; dim],
            carried: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.etas.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveReport {
    pub coordinates: Vec<StepReport>,
    /// Deepest per-coordinate search of the step.
    pub inner_loops: usize,
    pub branch: Branch,
    pub loss_accepted: f64,
    pub safeguard_hit: bool,
}

/// Angle along coordinate `i` only: θ* moves coordinate `i` by −η g_i and the angle is
/// taken between g_i and the i-th gradient component at θ*.
fn coordinate_probe<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    theta: &ParamVector,
    grad: &GradVector,
    i: usize,
    eta: f64,
    cfg: &BfeConfig,
) -> Carried {
    let theta_star = theta.descend_coordinate(i, eta, grad[i]);
    let g_star = problem.gradient(&theta_star, batch)[i];
    Carried {
        eps_comp: angle_or_violated(grad[i], g_star),
        eps_val: cfg.angle_threshold,
    }
}

struct CoordinateOutcome {
    value: f64,
    eta: f64,
    inner: usize,
    branch: Branch,
    safeguard_hit: bool,
}

#[allow(clippy::too_many_arguments)]
fn coordinate_search<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    theta: &ParamVector,
    grad: &GradVector,
    i: usize,
    eta_in: f64,
    carried: Carried,
    cfg: &BfeConfig,
) -> CoordinateOutcome {
    let mut eta = eta_in;
    let mut inner = 0;
    let mut safeguard_hit = false;
    if carried.violated() {
        let mut value = None;
        let mut passed = false;
        while !passed {
            if inner >= cfg.max_inner || eta / 2.0 < cfg.eta_min {
                safeguard_hit = true;
                break;
            }
            eta /= 2.0;
            let c = coordinate_probe(problem, batch, theta, grad, i, eta, cfg);
            inner += 1;
            passed = !c.violated();
            value = Some(theta[i] - eta * grad[i]);
        }
        CoordinateOutcome {
            value: value.unwrap_or(theta[i]),
            eta,
            inner,
            branch: Branch::ZoomIn,
            safeguard_hit,
        }
    } else {
        let mut passed = true;
        while passed {
            if inner >= cfg.max_inner || 2.0 * eta > cfg.eta_max {
                safeguard_hit = true;
                break;
            }
            eta *= 2.0;
            let c = coordinate_probe(problem, batch, theta, grad, i, eta, cfg);
            inner += 1;
            passed = !c.violated();
        }
        if !passed {
            eta /= 2.0;
        }
        CoordinateOutcome {
            value: theta[i] - eta * grad[i],
            eta,
            inner,
            branch: Branch::ZoomOut,
            safeguard_hit,
        }
    }
}

/// One step of adaptive BFE on gradient change.
///
/// Each coordinate runs the gradient-change search independently on its own η_i,
/// probing by displacing that coordinate alone. All coordinates then move together
/// from θ, and every ε_{c,i} is re-measured at the new point with the accepted η_i.
/// A safeguard stop in one coordinate leaves the others untouched.
pub fn adaptive_bfe_gradient_change_step<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    theta: &ParamVector,
    state: &AdaptiveState,
    cfg: &BfeConfig,
) -> Result<(ParamVector, AdaptiveState, AdaptiveReport)> {
    cfg.validate()?;
    let dim = problem.dimension();
    if state.dim() != dim {
        return Err(BfeError::DimensionMismatch {
            expected: dim,
            actual: state.dim(),
        });
    }
    if let Some(carried) = &state.carried {
        if carried.len() != dim {
            return Err(BfeError::DimensionMismatch {
                expected: dim,
                actual: carried.len(),
            });
        }
    }
    for &eta in &state.etas {
        cfg.check_eta(eta)?;
    }
    let grad = gradient_checked(problem, batch, theta)?;
    let carried: Vec<Carried> = match &state.carried {
        Some(c) => c.clone(),
        None => (0..dim)
            .map(|i| coordinate_probe(problem, batch, theta, &grad, i, state.etas[i], cfg))
            .collect(),
    };

    let outcomes: Vec<CoordinateOutcome> = (0..dim)
        .map(|i| coordinate_search(problem, batch, theta, &grad, i, state.etas[i], carried[i], cfg))
        .collect();
    let accepted = ParamVector::new(outcomes.iter().map(|o| o.value).collect());
    let etas: Vec<f64> = outcomes.iter().map(|o| o.eta).collect();

    let refreshed: Vec<Carried> = match problem.gradient(&accepted, batch) {
        g if g.is_finite() => (0..dim)
            .map(|i| coordinate_probe(problem, batch, &accepted, &g, i, etas[i], cfg))
            .collect(),
        _ => vec![
            Carried {
                eps_comp: f64::INFINITY,
                eps_val: cfg.angle_threshold,
            };
            dim
        ],
    };

    let loss_accepted = problem.loss(&accepted, batch);
    let coordinates: Vec<StepReport> = outcomes
        .iter()
        .zip(&state.etas)
        .map(|(o, &eta_in)| StepReport {
            inner_loops: o.inner,
            branch: o.branch,
            eta_in,
            eta_out: o.eta,
            loss_accepted,
            safeguard_hit: o.safeguard_hit,
        })
        .collect();
    let branch = match coordinates.first().map(|r| r.branch) {
        Some(b) if coordinates.iter().all(|r| r.branch == b) => b,
        Some(_) => Branch::Mixed,
        None => Branch::None,
    };
    let report = AdaptiveReport {
        inner_loops: coordinates.iter().map(|r| r.inner_loops).max().unwrap_or(0),
        branch,
        loss_accepted,
        safeguard_hit: coordinates.iter().any(|r| r.safeguard_hit),
        coordinates,
    };
    Ok((
        accepted,
        AdaptiveState {
            etas,
            carried: Some(refreshed),
        },
        report,
    ))
}
