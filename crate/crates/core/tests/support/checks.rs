//! Checks shared by this crate's tests and the harness acceptance suite. Each returns
//! `Err` with a description of the first mismatch instead of panicking.

use bfe_core::bfe::{
    adaptive_bfe_gradient_change_step, bfe_gradient_change_step, bfe_zoom_in_only_step, gradient_angle,
    improved_bfe_step, mfe_step, AdaptiveState, AngleAggregation, BfeConfig, Branch, Carried, SearchState,
    ToleranceRule,
};
use bfe_core::problems::{make_quadratic, make_regression, QuadraticSpec, RegressionSpec};
use bfe_core::{finite_difference_gradient, run, Batch, OptimizerKind, ParamVector, Problem, RunOptions, StopRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::transcription::{self as tr, Aggregate, Guards, LossState};

pub type Check<T = ()> = Result<T, String>;

macro_rules! same {
    ($a:expr, $b:expr, $($ctx:tt)+) => {{
        let (a, b) = (&$a, &$b);
        if a != b {
            return Err(format!("{}: {} = {:?} but expected {:?}", format!($($ctx)+), stringify!($a), a, b));
        }
    }};
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

pub const ORACLE_INSTANCES: u64 = 24;
const ORACLE_STEPS: usize = 15;

/// What an oracle comparison covered.
#[derive(Debug, Default)]
pub struct Coverage {
    pub instances: u64,
    pub steps: usize,
    pub safeguards: usize,
    pub zoom_in: usize,
    pub zoom_out: usize,
}

/// Seeded search configuration: η0 spread over many octaves, a random tolerance
/// rule, and a tight `max_inner` a quarter of the time so safeguards fire.
pub fn oracle_config(seed: u64) -> BfeConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    BfeConfig {
        eta0: 2f64.powi(rng.random_range(-10..=1)) * rng.random_range(0.6..1.4),
        tolerance: super::random_tolerance(&mut rng),
        max_inner: if rng.random_bool(0.25) { rng.random_range(2..=4) } else { 60 },
        aggregation: if rng.random_bool(0.5) { AngleAggregation::Max } else { AngleAggregation::Mean },
        ..BfeConfig::default()
    }
}

fn guards(cfg: &BfeConfig) -> Guards {
    Guards { eta_min: cfg.eta_min, eta_max: cfg.eta_max, max_inner: cfg.max_inner }
}

fn loss_state(s: &SearchState) -> LossState {
    LossState { eta: s.eta, eps: s.carried.map(|c| (c.eps_comp, c.eps_val)) }
}

fn both_branches(c: Coverage) -> Check<Coverage> {
    ensure!(c.zoom_in > 0 && c.zoom_out > 0, "both branches must be exercised: {c:?}");
    Ok(c)
}

/// Improved BFE (`m = 2`) or multiple forward exploration (`m = 3`) against the
/// transcription, step by step.
pub fn loss_search_matches_oracle(m: u32) -> Check<Coverage> {
    let mut cov = Coverage::default();
    for seed in 0..ORACLE_INSTANCES {
        let inst = super::instance(seed, ORACLE_STEPS);
        let cfg = BfeConfig { factor: m, ..oracle_config(seed) };
        let mut theta = inst.theta0.clone();
        let mut state = SearchState::new(cfg.eta0);
        for (i, batch) in inst.batches.iter().enumerate() {
            let t = i + 1;
            let step = if m == 2 { improved_bfe_step } else { mfe_step };
            let (next, next_state, report) =
                step(&*inst.problem, batch, &theta, &state, t, &cfg).map_err(|e| e.to_string())?;
            let oracle = if m == 2 { tr::binary_step } else { tr::triple_step };
            let want = oracle(&*inst.problem, batch, &theta, loss_state(&state), t, &cfg.tolerance, &guards(&cfg));
            let c = next_state.carried.unwrap();
            same!(next.as_slice(), want.theta.as_slice(), "m={m} seed={seed} t={t}");
            same!(next_state.eta, want.eta, "m={m} seed={seed} t={t}");
            same!((c.eps_comp, c.eps_val), (want.ec, want.ev), "m={m} seed={seed} t={t}");
            same!(report.inner_loops, want.inner, "m={m} seed={seed} t={t}");
            same!(report.safeguard_hit, want.safeguard, "m={m} seed={seed} t={t}");
            same!(report.branch == Branch::ZoomIn, want.zoom_in, "m={m} seed={seed} t={t}");
            cov.steps += 1;
            cov.safeguards += report.safeguard_hit as usize;
            if want.zoom_in { cov.zoom_in += 1 } else { cov.zoom_out += 1 }
            theta = next;
            state = next_state;
        }
        cov.instances += 1;
    }
    ensure!(cov.safeguards > 0, "no instance exercised a safeguard");
    both_branches(cov)
}

pub fn zoom_in_only_matches_oracle() -> Check<Coverage> {
    let mut cov = Coverage::default();
    for seed in 0..ORACLE_INSTANCES {
        let inst = super::instance(seed, ORACLE_STEPS);
        let cfg = oracle_config(seed);
        let mut theta = inst.theta0.clone();
        for (i, batch) in inst.batches.iter().enumerate() {
            let t = i + 1;
            let (next, eta, report) =
                bfe_zoom_in_only_step(&*inst.problem, batch, &theta, t, &cfg).map_err(|e| e.to_string())?;
            let want = tr::zoom_in_only_step(&*inst.problem, batch, &theta, cfg.eta0, t, &cfg.tolerance, &guards(&cfg));
            same!(next.as_slice(), want.theta.as_slice(), "seed={seed} t={t}");
            same!(eta, want.eta, "seed={seed} t={t}");
            same!(report.inner_loops, want.inner, "seed={seed} t={t}");
            same!(report.safeguard_hit, want.safeguard, "seed={seed} t={t}");
            cov.steps += 1;
            cov.zoom_in += 1;
            cov.safeguards += report.safeguard_hit as usize;
            theta = next;
        }
        cov.instances += 1;
    }
    Ok(cov)
}

fn aggregate(cfg: &BfeConfig) -> Aggregate {
    match cfg.aggregation {
        AngleAggregation::Max => Aggregate::Max,
        AngleAggregation::Mean => Aggregate::Mean,
    }
}

pub fn gradient_change_matches_oracle() -> Check<Coverage> {
    let mut cov = Coverage::default();
    for seed in 0..ORACLE_INSTANCES {
        let inst = super::instance(seed, ORACLE_STEPS);
        let cfg = oracle_config(seed);
        let mut theta = inst.theta0.clone();
        let mut state = SearchState::new(cfg.eta0);
        for (i, batch) in inst.batches.iter().enumerate() {
            let t = i + 1;
            let (next, next_state, report) =
                bfe_gradient_change_step(&*inst.problem, batch, &theta, &state, &cfg).map_err(|e| e.to_string())?;
            let want = tr::gradient_change_step(
                &*inst.problem,
                batch,
                &theta,
                loss_state(&state),
                cfg.angle_threshold,
                aggregate(&cfg),
                &guards(&cfg),
            );
            let c = next_state.carried.unwrap();
            same!(next.as_slice(), want.theta.as_slice(), "seed={seed} t={t}");
            same!(next_state.eta, want.eta, "seed={seed} t={t}");
            same!((c.eps_comp, c.eps_val), (want.ec, want.ev), "seed={seed} t={t}");
            same!(report.inner_loops, want.inner, "seed={seed} t={t}");
            same!(report.safeguard_hit, want.safeguard, "seed={seed} t={t}");
            same!(report.branch == Branch::ZoomIn, want.zoom_in, "seed={seed} t={t}");
            cov.steps += 1;
            cov.safeguards += report.safeguard_hit as usize;
            if want.zoom_in { cov.zoom_in += 1 } else { cov.zoom_out += 1 }
            theta = next;
            state = next_state;
        }
        cov.instances += 1;
    }
    both_branches(cov)
}

pub fn adaptive_matches_oracle() -> Check<Coverage> {
    let mut cov = Coverage::default();
    for seed in 0..ORACLE_INSTANCES {
        let inst = super::instance(seed, ORACLE_STEPS);
        let cfg = oracle_config(seed);
        let mut theta = inst.theta0.clone();
        let mut state = AdaptiveState::new(theta.dim(), cfg.eta0);
        for (i, batch) in inst.batches.iter().enumerate() {
            let t = i + 1;
            let (next, next_state, report) = adaptive_bfe_gradient_change_step(&*inst.problem, batch, &theta, &state, &cfg)
                .map_err(|e| e.to_string())?;
            let eps = state.carried.as_ref().map(|c: &Vec<Carried>| {
                (c.iter().map(|c| c.eps_comp).collect(), c.iter().map(|c| c.eps_val).collect())
            });
            let want = tr::adaptive_step(&*inst.problem, batch, &theta, &state.etas, eps, cfg.angle_threshold, &guards(&cfg));
            let carried = next_state.carried.as_ref().unwrap();
            let ec: Vec<f64> = carried.iter().map(|c| c.eps_comp).collect();
            let inner: Vec<usize> = report.coordinates.iter().map(|r| r.inner_loops).collect();
            let safeguards: Vec<bool> = report.coordinates.iter().map(|r| r.safeguard_hit).collect();
            same!(next.as_slice(), want.theta.as_slice(), "seed={seed} t={t}");
            same!(next_state.etas, want.etas, "seed={seed} t={t}");
            same!(ec, want.ec, "seed={seed} t={t}");
            same!(inner, want.inner, "seed={seed} t={t}");
            same!(safeguards, want.safeguard, "seed={seed} t={t}");
            same!(report.inner_loops, *want.inner.iter().max().unwrap(), "seed={seed} t={t}");
            for r in &report.coordinates {
                if r.branch == Branch::ZoomIn { cov.zoom_in += 1 } else { cov.zoom_out += 1 }
            }
            cov.steps += 1;
            theta = next;
            state = next_state;
        }
        cov.instances += 1;
    }
    both_branches(cov)
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

pub const GRADIENT_POINTS: usize = 100;
pub const FD_STEP: f64 = 1e-6;
pub const GRADIENT_REL_TOL: f64 = 1e-5;

/// ‖fd − g‖ / ‖g‖, with the denominator floored at 1e-3 so that a point sitting on a
/// stationary point does not turn round-off into a failure.
fn relative_error(problem: &dyn Problem, theta: &ParamVector, batch: &Batch) -> Check<f64> {
    let analytic = problem.gradient(theta, batch);
    let numeric = finite_difference_gradient(problem, theta, batch, FD_STEP).map_err(|e| e.to_string())?;
    let diff = analytic.iter().zip(numeric.iter()).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    Ok(diff / analytic.norm().max(1e-3))
}

/// Worst relative error of the regression gradient over seeded datasets and points.
pub fn regression_gradient_error() -> Check<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for k in 0..GRADIENT_POINTS {
        let n_features = 1 + k % 3;
        let true_weights: Vec<f64> = (0..=n_features).map(|_| rng.random_range(-3.0..3.0)).collect();
        let spec = RegressionSpec {
            true_weights,
            noise_std: 0.1,
            n_samples: 64,
            feature_range: (-1.0, 1.0),
            seed: k as u64,
        };
        let (data, problem) = make_regression(&spec).map_err(|e| e.to_string())?;
        let theta = ParamVector::new((0..=n_features).map(|_| rng.random_range(-4.0..4.0)).collect());
        worst = worst.max(relative_error(&problem, &theta, &data)?);
    }
    Ok(worst)
}

/// Worst relative error of the quadratic gradient over seeded bowls and points.
pub fn quadratic_gradient_error() -> Check<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..GRADIENT_POINTS {
        let (q, theta) = super::random_quadratic(&mut rng);
        worst = worst.max(relative_error(&q, &theta, &Batch::unit())?);
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Invariants
// ---------------------------------------------------------------------------

fn regression(seed: u64) -> (Batch, bfe_core::problems::Regression) {
    make_regression(&RegressionSpec {
        true_weights: vec![2.0, -1.0, 0.5],
        seed,
        n_samples: 512,
        ..RegressionSpec::default()
    })
    .unwrap()
}

/// η/η0 is an exact power of two for BFE and a power of `m` (to 1e-9) for m = 3, 4, 5.
pub fn eta_on_power_grid() -> Check<usize> {
    let mut checked = 0;
    for seed in 0..32u64 {
        let inst = super::instance(seed, 20);
        for m in 2..=5u32 {
            let cfg = BfeConfig { eta0: 0.7 * 2f64.powi(seed as i32 % 12 - 10), factor: m, ..BfeConfig::default() };
            let mut theta = inst.theta0.clone();
            let mut state = SearchState::new(cfg.eta0);
            for (i, batch) in inst.batches.iter().enumerate() {
                let (next, ns, _) = mfe_step(&*inst.problem, batch, &theta, &state, i + 1, &cfg).map_err(|e| e.to_string())?;
                let power = (ns.eta / cfg.eta0).ln() / (m as f64).ln();
                if m == 2 {
                    let p = (ns.eta / cfg.eta0).log2();
                    ensure!(p == p.round(), "seed {seed}: η ratio 2^{p} is not a power of two");
                } else {
                    ensure!((power - power.round()).abs() < 1e-9, "seed {seed} m={m}: η ratio {m}^{power}");
                }
                checked += 1;
                theta = next;
                state = ns;
            }
        }
    }
    Ok(checked)
}

/// Range [0, π/2], symmetry in its arguments, and zero for equal slopes.
pub fn angle_properties() -> Check<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    for _ in 0..2000 {
        let scale = 10f64.powi(rng.random_range(-3..=6));
        let (a, b) = (rng.random_range(-scale..scale), rng.random_range(-scale..scale));
        let ab = gradient_angle(a, b);
        ensure!((0.0..=std::f64::consts::FRAC_PI_2).contains(&ab), "angle({a}, {b}) = {ab}");
        ensure!(ab == gradient_angle(b, a), "angle not symmetric at ({a}, {b})");
        ensure!(gradient_angle(a, a) == 0.0, "angle({a}, {a}) != 0");
        checked += 1;
    }
    Ok(checked)
}

/// Every search step stops within `max_inner` probes, including on a loss where no
/// probe ever passes.
pub fn zoom_in_bounded() -> Check<usize> {
    let mut checked = 0;
    for seed in 0..ORACLE_INSTANCES {
        let inst = super::instance(seed, ORACLE_STEPS);
        for max_inner in [1, 3, 60] {
            let cfg = BfeConfig { max_inner, ..oracle_config(seed) };
            let mut theta = inst.theta0.clone();
            let mut state = SearchState::new(cfg.eta0);
            for (i, batch) in inst.batches.iter().enumerate() {
                let (next, ns, r) = improved_bfe_step(&*inst.problem, batch, &theta, &state, i + 1, &cfg)
                    .map_err(|e| e.to_string())?;
                ensure!(r.inner_loops <= max_inner, "seed {seed}: {} inner loops > {max_inner}", r.inner_loops);
                let (_, _, z) = bfe_zoom_in_only_step(&*inst.problem, batch, &theta, i + 1, &cfg).map_err(|e| e.to_string())?;
                ensure!(z.inner_loops <= max_inner, "seed {seed}: zoom-in only took {} > {max_inner}", z.inner_loops);
                checked += 2;
                theta = next;
                state = ns;
            }
        }
    }
    // a tolerance no probe within five halvings can meet
    let q = make_quadratic(QuadraticSpec::isotropic(2, 1.0)).unwrap();
    let cfg = BfeConfig {
        eta0: 1.0,
        tolerance: ToleranceRule::Constant { value: 1e-300 },
        max_inner: 5,
        ..BfeConfig::default()
    };
    let theta = ParamVector::new(vec![1.0, 1.0]);
    let (_, _, r) = bfe_zoom_in_only_step(&q, &Batch::unit(), &theta, 1, &cfg).map_err(|e| e.to_string())?;
    ensure!(r.safeguard_hit && r.inner_loops == cfg.max_inner, "unmeetable tolerance: {r:?}");
    Ok(checked + 1)
}

/// Full-batch BFE on 10 random SPD quadratics never increases the loss before the
/// gradient norm falls below 1e-6.
pub fn monotone_descent() -> Check<usize> {
    let mut steps = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (q, theta0) = super::random_quadratic(&mut rng);
        let options = RunOptions { batch_size: 1, seed, stop: StopRule { max_steps: 5000, grad_norm_tol: 1e-6 } };
        let trace = run(&q, &Batch::unit(), &OptimizerKind::ImprovedBfe(BfeConfig::default()), &theta0, &options)
            .map_err(|e| e.to_string())?;
        let mut previous = trace.initial_loss;
        for r in &trace.records {
            ensure!(r.loss < previous, "seed {seed}: loss rose at step {} ({previous} -> {})", r.t, r.loss);
            previous = r.loss;
        }
        ensure!(
            matches!(trace.termination, bfe_core::Termination::Converged { .. }),
            "seed {seed}: no convergence in 5000 steps"
        );
        steps += trace.len();
    }
    Ok(steps)
}

/// Rotating the coordinates of a separable bowl rotates the adaptive step's output
/// and learning rates, bit for bit.
pub fn adaptive_permutation_equivariance() -> Check<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0;
    for _ in 0..50 {
        let dim = rng.random_range(2..=5);
        let shift = rng.random_range(1..dim);
        let perm = |v: &[f64]| -> Vec<f64> { (0..v.len()).map(|i| v[(i + shift) % v.len()]).collect() };
        let curv: Vec<f64> = (0..dim).map(|_| rng.random_range(0.05..20.0)).collect();
        let start: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let cfg = BfeConfig { eta0: 0.01, ..BfeConfig::default() };
        let q = make_quadratic(QuadraticSpec::diagonal(curv.clone())).unwrap();
        let qp = make_quadratic(QuadraticSpec::diagonal(perm(&curv))).unwrap();
        let batch = Batch::unit();
        let (mut a, mut b) = (ParamVector::new(start.clone()), ParamVector::new(perm(&start)));
        let (mut sa, mut sb) = (AdaptiveState::new(dim, cfg.eta0), AdaptiveState::new(dim, cfg.eta0));
        for step in 0..10 {
            let (na, nsa, _) = adaptive_bfe_gradient_change_step(&q, &batch, &a, &sa, &cfg).map_err(|e| e.to_string())?;
            let (nb, nsb, _) = adaptive_bfe_gradient_change_step(&qp, &batch, &b, &sb, &cfg).map_err(|e| e.to_string())?;
            same!(perm(na.as_slice()), nb.as_slice().to_vec(), "step {step}");
            same!(perm(&nsa.etas), nsb.etas, "step {step}");
            (a, b, sa, sb) = (na, nb, nsa, nsb);
            checked += 1;
        }
    }
    Ok(checked)
}

/// Two runs with the same seed give identical traces, for every optimizer kind.
pub fn determinism() -> Check<usize> {
    let (data, problem) = regression(9);
    let theta0 = ParamVector::zeros(3);
    let options = RunOptions { batch_size: 64, seed: 3, stop: StopRule { max_steps: 200, grad_norm_tol: 0.0 } };
    let bfe = BfeConfig::default();
    let kinds = [
        OptimizerKind::ImprovedBfe(bfe),
        OptimizerKind::ZoomInOnly(BfeConfig { eta0: 0.5, ..bfe }),
        OptimizerKind::GradientChange(bfe),
        OptimizerKind::AdaptiveGradientChange(bfe),
        OptimizerKind::Mfe(BfeConfig { factor: 3, ..bfe }),
        OptimizerKind::Sgd(bfe_core::baselines::MomentumConfig { eta: 0.01, beta: 0.9, nesterov: true }),
        OptimizerKind::Adam(Default::default()),
    ];
    for kind in &kinds {
        let a = run(&problem, &data, kind, &theta0, &options).map_err(|e| e.to_string())?;
        let b = run(&problem, &data, kind, &theta0, &options).map_err(|e| e.to_string())?;
        ensure!(a == b, "{} traces differ between reruns", kind.kind_name());
    }
    Ok(kinds.len())
}

/// MFE with factor 2 and improved BFE produce identical traces over `steps` steps.
pub fn mfe2_trace_identity(steps: usize) -> Check<usize> {
    let (data, problem) = regression(8);
    let theta0 = ParamVector::zeros(3);
    let cfg = BfeConfig::default();
    let options = RunOptions { batch_size: 64, seed: 3, stop: StopRule { max_steps: steps, grad_norm_tol: 0.0 } };
    let bfe = run(&problem, &data, &OptimizerKind::ImprovedBfe(cfg), &theta0, &options).map_err(|e| e.to_string())?;
    let mfe = run(&problem, &data, &OptimizerKind::Mfe(BfeConfig { factor: 2, ..cfg }), &theta0, &options)
        .map_err(|e| e.to_string())?;
    ensure!(bfe.len() == steps, "BFE trace has {} steps", bfe.len());
    if let Some(r) = bfe.records.iter().zip(&mfe.records).find(|(a, b)| a != b) {
        return Err(format!("traces first differ at step {}", r.0.t));
    }
    ensure!(bfe == mfe, "traces differ");
    Ok(bfe.len())
}
