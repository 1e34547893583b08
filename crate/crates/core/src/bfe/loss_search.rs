use crate::batch::Batch;
use crate::bfe::probe::{ProbeCtx, ProbeResult};
use crate::bfe::{BfeConfig, Branch, Carried, SearchState, StepReport};
use crate::error::{BfeError, Result};
use crate::param::{GradVector, ParamVector};
use crate::problem::Problem;

/// Lowest-loss1 θ* seen by a zoom-in loop; what a safeguard stop falls back to.
#[derive(Default)]
struct BestProbe {
    best: Option<(f64, ParamVector, f64)>,
}

impl BestProbe {
    fn offer(&mut self, probe: &ProbeResult, eta: f64) {
        if self.best.as_ref().is_none_or(|(loss, _, _)| probe.loss1 < *loss) {
            self.best = Some((probe.loss1, probe.theta_star.clone(), eta));
        }
    }

    fn take(self) -> Option<(ParamVector, f64)> {
        self.best.map(|(_, theta, eta)| (theta, eta))
    }
}

fn prepare<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    theta: &ParamVector,
    cfg: &BfeConfig,
) -> Result<GradVector> {
    cfg.validate()?;
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

/// Carried comparison measured at `theta`, or the violated sentinel if the probe
/// could not be evaluated.
fn measure<P: Problem + ?Sized>(
    ctx: &ProbeCtx<'_, P>,
    theta: &ParamVector,
    eta: f64,
    zoom_in: bool,
) -> Carried {
    let grad = ctx.problem.gradient(theta, ctx.batch);
    if !grad.is_finite() {
        return Carried::VIOLATED;
    }
    let probe = if zoom_in {
        ctx.zoom_in(theta, &grad, eta)
    } else {
        ctx.zoom_out(theta, &grad, eta)
    };
    probe.map(|p| p.carried()).unwrap_or(Carried::VIOLATED)
}

/// Shared body of the loss-comparison search with factor `m` (2 for BFE).
fn forward_exploration<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    theta: &ParamVector,
    state: &SearchState,
    t: usize,
    cfg: &BfeConfig,
    m: u32,
) -> Result<(ParamVector, SearchState, StepReport)> {
    let grad = prepare(problem, batch, theta, cfg)?;
    cfg.check_eta(state.eta)?;
    let ctx = ProbeCtx {
        problem,
        batch,
        tolerance: cfg.tolerance,
        t,
        factor: m,
    };
    let factor = m as f64;
    let eta_in = state.eta;
    let mut eta = state.eta;
    let carried = match state.carried {
        Some(c) => c,
        None => measure(&ctx, theta, eta, true),
    };

    let mut inner = 0;
    let mut safeguard_hit = false;
    let (accepted, branch) = if carried.violated() {
        let mut best = BestProbe::default();
        let mut accepted = None;
        while accepted.is_none() {
            if inner >= cfg.max_inner || eta < cfg.eta_min {
                safeguard_hit = true;
                break;
            }
            let probe = ctx.zoom_in(theta, &grad, eta);
            inner += 1;
            if let Ok(p) = &probe {
                best.offer(p, eta);
            }
            eta /= factor;
            if let Ok(p) = probe {
                if p.passed() {
                    accepted = Some(p.theta_star);
                }
            }
        }
        eta *= factor;
        let accepted = accepted
            .or_else(|| best.take().map(|(theta_star, _)| theta_star))
            .unwrap_or_else(|| theta.clone());
        (accepted, Branch::ZoomIn)
    } else {
        let mut last: Option<ProbeResult> = None;
        let mut passed = true;
        while passed {
            if inner >= cfg.max_inner || eta > cfg.eta_max {
                safeguard_hit = true;
                break;
            }
            let probe = ctx.zoom_out(theta, &grad, eta).ok();
            inner += 1;
            passed = probe.as_ref().is_some_and(ProbeResult::passed);
            last = probe;
            eta *= factor;
        }
        eta /= factor;
        let accepted = match last {
            Some(p) => p.chain.into_iter().next().expect("non-empty chain"),
            None => theta.descend(eta, &grad),
        };
        (accepted, Branch::ZoomOut)
    };

    let refreshed = measure(&ctx, &accepted, eta, branch == Branch::ZoomIn);
    let report = StepReport {
        inner_loops: inner,
        branch,
        eta_in,
        eta_out: eta,
        loss_accepted: problem.loss(&accepted, batch),
        safeguard_hit,
    };
    let next = SearchState {
        eta,
        carried: Some(refreshed),
    };
    Ok((accepted, next, report))
}

/// One step of improved BFE.
///
/// The branch is chosen by the comparison carried over from the previous step (the
/// first step measures it with a zoom-in probe at the current η). Zoom-in halves η
/// until a full step and two half steps agree, then keeps the last probed η and its
/// θ*. Zoom-out doubles η while two steps of η and one of 2η agree, then steps by the
/// last probed η. Either way the comparison is re-measured at the accepted point and
/// carried in the returned state.
pub fn improved_bfe_step<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    theta: &ParamVector,
    state: &SearchState,
    t: usize,
    cfg: &BfeConfig,
) -> Result<(ParamVector, SearchState, StepReport)> {
    forward_exploration(problem, batch, theta, state, t, cfg, 2)
}

/// Multiple forward exploration: [`improved_bfe_step`] with η divided and multiplied by
/// `cfg.factor` and probes built from `cfg.factor` sub-steps.
pub fn mfe_step<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    theta: &ParamVector,
    state: &SearchState,
    t: usize,
    cfg: &BfeConfig,
) -> Result<(ParamVector, SearchState, StepReport)> {
    forward_exploration(problem, batch, theta, state, t, cfg, cfg.factor)
}

/// Zoom-in-only BFE: η restarts from `cfg.eta0`, probes once, and halves while the
/// full step and the two half steps disagree. Returns the accepted θ* and the η it was
/// probed with.
pub fn bfe_zoom_in_only_step<P: Problem + ?Sized>(
    problem: &P,
    batch: &Batch,
    theta: &ParamVector,
    t: usize,
    cfg: &BfeConfig,
) -> Result<(ParamVector, f64, StepReport)> {
    let grad = prepare(problem, batch, theta, cfg)?;
    let ctx = ProbeCtx {
        problem,
        batch,
        tolerance: cfg.tolerance,
        t,
        factor: 2,
    };
    let mut eta = cfg.eta0;
    let mut best = BestProbe::default();

    let first = ctx.zoom_in(theta, &grad, eta);
    let mut inner = 1;
    if let Ok(p) = &first {
        best.offer(p, eta);
    }
    let mut accepted = match first {
        Ok(p) if p.passed() => Some((p.theta_star, eta)),
        _ => None,
    };
    let mut safeguard_hit = false;
    while accepted.is_none() {
        if inner >= cfg.max_inner || eta < cfg.eta_min {
            safeguard_hit = true;
            break;
        }
        let probe = ctx.zoom_in(theta, &grad, eta);
        inner += 1;
        if let Ok(p) = &probe {
            best.offer(p, eta);
        }
        if let Ok(p) = probe {
            if p.passed() {
                accepted = Some((p.theta_star, eta));
            }
        }
        eta /= 2.0;
    }
    let (accepted, eta_used) = accepted
        .or_else(|| best.take())
        .unwrap_or_else(|| (theta.clone(), cfg.eta0));

    let report = StepReport {
        inner_loops: inner,
        branch: Branch::ZoomIn,
        eta_in: cfg.eta0,
        eta_out: eta_used,
        loss_accepted: problem.loss(&accepted, batch),
        safeguard_hit,
    };
    Ok((accepted, eta_used, report))
}
