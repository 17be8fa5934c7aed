//! Numerical checks of the inequalities behind the existence and uniqueness
//! argument, plus the degenerate example with `f(σ) = −|σ|²`, `g = 0`.
//!
//! Every check is deterministic given its seed: trial `i` draws from its own
//! ChaCha stream, so sequential and parallel runs agree bit for bit.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::functionals::{assemble_derivative, fd_gradient_check, DualVector};
use crate::galerkin::{Field, GalerkinSpace, Subspace};
use crate::integrand::{empirical_lipschitz, Integrand, IntegrandKind, IntegrandSpec};
use crate::solvers::{
    compute_delta, inner_minimize, max_pairwise_distance, penalized_multistart, solve_sphere,
    trial_rng, v0_condition, DeltaReport, DeltaStatus, InnerStatus, Problem, Sense,
    SolverSettings, V0Report,
};

pub const STRONG_MONOTONICITY_TOL: f64 = 1e-10;
pub const DERIVATIVE_LIPSCHITZ_TOL: f64 = 1e-8;
pub const UNIQUENESS_SPREAD: f64 = 1e-5;
pub const MONOTONE_TOL: f64 = 1e-9;
pub const FD_TOL: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-5;
/// Random test fields have H¹ norm drawn uniformly from `(0, FIELD_NORM_MAX]`.
pub const FIELD_NORM_MAX: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyReport {
    pub name: String,
    pub n_trials: usize,
    /// Smallest margin observed; the property holds when this is at least
    /// `-tolerance`.
    pub worst_slack: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub status: PropertyStatus,
    /// Inputs of the worst trial, or the reason for skipping.
    pub witness: Value,
}

impl PropertyReport {
    fn judged(name: impl Into<String>, n_trials: usize, worst_slack: f64, tolerance: f64, witness: Value) -> Self {
        let pass = worst_slack >= -tolerance;
        Self {
            name: name.into(),
            n_trials,
            worst_slack,
            tolerance,
            pass,
            status: if pass {
                PropertyStatus::Pass
            } else {
                PropertyStatus::Fail
            },
            witness,
        }
    }

    fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            n_trials: 0,
            worst_slack: 0.0,
            tolerance: 0.0,
            pass: true,
            status: PropertyStatus::Skipped,
            witness: json!({ "reason": reason.into() }),
        }
    }
}

fn run_trials<T, F>(n: usize, parallel: bool, trial: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(trial).collect()
    } else {
        (0..n).map(trial).collect()
    }
}

/// Smallest slack with its trial index; NaN slacks count as failures.
fn worst_of(slacks: &[f64]) -> (f64, usize) {
    slacks
        .iter()
        .enumerate()
        .fold((f64::INFINITY, 0), |acc, (i, &s)| {
            if s.is_nan() || s < acc.0 {
                (if s.is_nan() { f64::NEG_INFINITY } else { s }, i)
            } else {
                acc
            }
        })
}

fn random_pair(problem: &Problem, seed: u64, index: usize) -> Result<(Field, Field)> {
    use rand::Rng;
    let mut rng = trial_rng(seed, index);
    let nu = rng.random_range(0.0..FIELD_NORM_MAX);
    let nv = rng.random_range(0.0..FIELD_NORM_MAX);
    Ok((
        problem.random_start(nu, &mut rng)?,
        problem.random_start(nv, &mut rng)?,
    ))
}

/// Derivative of `I + μJ`.
fn perturbation_derivative(problem: &Problem, mu: f64, u: &Field) -> Result<DualVector> {
    let di = assemble_derivative(&problem.space, &problem.g, u)?;
    Ok(di.add_scaled(mu, &assemble_derivative(&problem.space, &problem.f, u)?))
}

/// `⟨E′(u) − E′(v), u − v⟩ ≥ (2 − ν − μL)‖u − v‖²` for `E = Φ + I + μJ`.
///
/// The reported slack is normalized by `1 + ‖u − v‖²`.
pub fn check_strong_monotonicity(
    problem: &Problem,
    mu: f64,
    n_trials: usize,
    seed: u64,
    parallel: bool,
) -> Result<PropertyReport> {
    let mu_bar = problem.mu_bar();
    if !(mu >= 0.0 && mu <= mu_bar * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!(
            "strong monotonicity needs 0 <= mu <= (2 - nu)/L = {mu_bar}, got {mu}"
        )));
    }
    let modulus = 2.0 - problem.lip_g() - mu * problem.lip_f();
    let space = &problem.space;
    let slacks = run_trials(n_trials, parallel, |i| {
        let (u, v) = random_pair(problem, seed, i)?;
        let diff = u.sub(&v);
        let dist_sq = space.h1_norm_sq(&diff)?;
        let eu = DualVector::new(space.gram_mul(&u)? * 2.0)
            .add_scaled(1.0, &perturbation_derivative(problem, mu, &u)?);
        let ev = DualVector::new(space.gram_mul(&v)? * 2.0)
            .add_scaled(1.0, &perturbation_derivative(problem, mu, &v)?);
        let pairing = eu.sub(&ev).pair(&diff);
        Ok((pairing - modulus * dist_sq) / (1.0 + dist_sq))
    })?;
    let (worst, at) = worst_of(&slacks);
    Ok(PropertyReport::judged(
        format!("strong_monotonicity(mu={mu})"),
        n_trials,
        worst,
        STRONG_MONOTONICITY_TOL,
        json!({ "seed": seed, "trial": at, "mu": mu, "modulus": modulus }),
    ))
}

/// `‖(I + μJ)′(u) − (I + μJ)′(v)‖ ≤ (ν + μL)‖u − v‖` in the H¹ dual norm.
pub fn check_derivative_lipschitz(
    problem: &Problem,
    mu: f64,
    n_trials: usize,
    seed: u64,
    parallel: bool,
) -> Result<PropertyReport> {
    if !(mu >= 0.0) {
        return Err(Error::Precondition(format!("mu must be non-negative, got {mu}")));
    }
    let bound = problem.lip_g() + mu * problem.lip_f();
    let space = &problem.space;
    let slacks = run_trials(n_trials, parallel, |i| {
        let (u, v) = random_pair(problem, seed, i)?;
        let dist = space.h1_distance(&u, &v)?;
        let d = perturbation_derivative(problem, mu, &u)?
            .sub(&perturbation_derivative(problem, mu, &v)?);
        let lhs = space.h1_norm(&d.riesz(space)?)?;
        Ok(bound * dist - lhs)
    })?;
    let (worst, at) = worst_of(&slacks);
    Ok(PropertyReport::judged(
        format!("derivative_lipschitz(mu={mu})"),
        n_trials,
        worst,
        DERIVATIVE_LIPSCHITZ_TOL,
        json!({ "seed": seed, "trial": at, "mu": mu, "bound": bound }),
    ))
}

/// Re-solves the penalized problem at the certified `λ*` from random starts of
/// H¹ norm up to `10√r` and measures how far apart the minimizers land.
pub fn multistart_uniqueness(
    problem: &Problem,
    r: f64,
    sense: Sense,
    n_starts: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<PropertyReport> {
    use rand::Rng;
    let name = format!("uniqueness({}, r={r})", sense.name());
    let saddle = match solve_sphere(problem, r, sense, settings) {
        Ok(s) => s,
        Err(Error::RadiusTooLarge { c_min, .. }) => {
            return Ok(PropertyReport::skipped(
                name,
                format!("uncertified: radius too large (c(lambda_min) = {c_min})"),
            ))
        }
        Err(e) => return Err(e),
    };
    if !saddle.certified {
        return Ok(PropertyReport::skipped(
            name,
            format!("uncertified: lambda* = {} at the boundary", saddle.lambda_star),
        ));
    }
    let mut minimizers = run_trials(n_starts, settings.parallel, |i| {
        let mut rng = trial_rng(seed, i);
        let norm = 10.0 * r.sqrt() * rng.random_range(0.0..=1.0);
        let start = problem.random_start(norm, &mut rng)?;
        let res = inner_minimize(problem, sense, saddle.lambda_star, &start, settings)?;
        if res.status != InnerStatus::Converged {
            return Err(Error::Inconclusive(format!(
                "uniqueness re-solve from start {i} ended with {:?}",
                res.status
            )));
        }
        Ok(res.u)
    })?;
    minimizers.push(saddle.u_star.clone());
    let spread = max_pairwise_distance(&problem.space, &minimizers)?;
    Ok(PropertyReport::judged(
        name,
        n_starts,
        UNIQUENESS_SPREAD - spread,
        0.0,
        json!({ "seed": seed, "lambda_star": saddle.lambda_star, "spread": spread }),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub r: f64,
    pub lambda_star: Option<f64>,
    pub j_value: f64,
    pub certified: bool,
    pub residual: f64,
    /// `"dual"` for the saddle solve, `"penalty"` for the uncertified fallback.
    pub method: &'static str,
}

/// Extremal value of `J` on `C_r`: the dual solve when `r` is in range, the
/// penalized multistart (uncertified) otherwise.
pub fn extremal_value(
    problem: &Problem,
    r: f64,
    sense: Sense,
    n_starts: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<SweepPoint> {
    match solve_sphere(problem, r, sense, settings) {
        Ok(s) => Ok(SweepPoint {
            r,
            lambda_star: Some(s.lambda_star),
            j_value: s.j_value,
            certified: s.certified,
            residual: s.constraint_residual,
            method: "dual",
        }),
        Err(Error::RadiusTooLarge { .. }) => {
            let p = penalized_multistart(problem, r, sense, n_starts, seed, settings)?;
            Ok(SweepPoint {
                r,
                lambda_star: None,
                j_value: p.j_value,
                certified: false,
                residual: p.constraint_residual,
                method: "penalty",
            })
        }
        Err(e) => Err(e),
    }
}

/// Monotonicity of the extremal value along an increasing radius grid:
/// non-decreasing for maxima, non-increasing for minima.
///
/// Only certified points are judged; uncertified ones are listed in the
/// witness.
pub fn sup_sweep(
    problem: &Problem,
    r_grid: &[f64],
    sense: Sense,
    n_starts: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<(PropertyReport, Vec<SweepPoint>)> {
    if r_grid.windows(2).any(|w| !(w[0] < w[1])) || r_grid.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Precondition("radius grid must be positive and increasing".into()));
    }
    let points = run_trials(r_grid.len(), settings.parallel, |i| {
        extremal_value(problem, r_grid[i], sense, n_starts, seed, settings)
    })?;
    let direction = -sense.sign();
    let certified: Vec<&SweepPoint> = points.iter().filter(|p| p.certified).collect();
    let slacks: Vec<f64> = certified
        .windows(2)
        .map(|w| direction * (w[1].j_value - w[0].j_value))
        .collect();
    let (worst, at) = if slacks.is_empty() {
        (0.0, 0)
    } else {
        worst_of(&slacks)
    };
    let uncertified: Vec<f64> = points.iter().filter(|p| !p.certified).map(|p| p.r).collect();
    let report = PropertyReport::judged(
        format!("monotone_extremum({})", sense.name()),
        points.len(),
        worst,
        MONOTONE_TOL,
        json!({ "worst_pair": at, "uncertified_r": uncertified }),
    );
    Ok((report, points))
}

/// `c(λ)` must be non-increasing along an increasing multiplier grid.
/// Divergent inner solves count as `c = +∞`.
pub fn dual_monotonicity(
    problem: &Problem,
    sense: Sense,
    lambdas: &[f64],
    settings: &SolverSettings,
) -> Result<(PropertyReport, Vec<(f64, f64)>)> {
    if lambdas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Precondition("multiplier grid must be increasing".into()));
    }
    let mut values = Vec::with_capacity(lambdas.len());
    let mut warm = problem.space.zero_field();
    for &lambda in lambdas {
        let res = inner_minimize(problem, sense, lambda, &warm, settings)?;
        let c = match res.status {
            InnerStatus::Converged => {
                warm = res.u.clone();
                problem.constraint(&res.u)?
            }
            InnerStatus::Diverged => f64::INFINITY,
            InnerStatus::MaxIters => {
                return Err(Error::Inconclusive(format!(
                    "inner solve at lambda = {lambda} hit max_iters"
                )))
            }
        };
        values.push((lambda, c));
    }
    let slacks: Vec<f64> = values
        .windows(2)
        .map(|w| {
            if w[0].1 == f64::INFINITY {
                0.0
            } else {
                w[0].1 - w[1].1
            }
        })
        .collect();
    let (worst, at) = if slacks.is_empty() {
        (0.0, 0)
    } else {
        worst_of(&slacks)
    };
    let report = PropertyReport::judged(
        format!("dual_monotonicity({})", sense.name()),
        lambdas.len(),
        worst,
        MONOTONE_TOL,
        json!({ "worst_pair": at }),
    );
    Ok((report, values))
}

/// Finite-difference check of the assembled derivatives of `J` and `I`.
pub fn check_gradients(
    problem: &Problem,
    n_fields: usize,
    seed: u64,
    parallel: bool,
) -> Result<PropertyReport> {
    use rand::Rng;
    let errors = run_trials(n_fields, parallel, |i| {
        let mut rng = trial_rng(seed, i);
        let norm = rng.random_range(0.1..FIELD_NORM_MAX);
        let u = problem.space.random_field(&Subspace::Full, norm, &mut rng)?;
        let ef = fd_gradient_check(&problem.space, &problem.f, &u, FD_STEP, seed ^ i as u64)?;
        let eg = fd_gradient_check(&problem.space, &problem.g, &u, FD_STEP, seed ^ i as u64)?;
        Ok(ef.max(eg))
    })?;
    let slacks: Vec<f64> = errors.iter().map(|e| FD_TOL - e).collect();
    let (worst, at) = worst_of(&slacks);
    Ok(PropertyReport::judged(
        "gradient_fd",
        n_fields,
        worst,
        0.0,
        json!({ "seed": seed, "trial": at, "max_rel_error": FD_TOL - worst }),
    ))
}

/// Sampled gradient-Lipschitz ratios never exceed the certified constants.
pub fn check_lipschitz_constants(problem: &Problem, n_samples: usize, seed: u64) -> Result<PropertyReport> {
    let mut slacks = Vec::new();
    for (k, spec) in [&problem.f, &problem.g].into_iter().enumerate() {
        let certified = spec.lipschitz();
        let observed = empirical_lipschitz(spec, n_samples, 10.0, seed.wrapping_add(k as u64))?;
        slacks.push(certified * (1.0 + 1e-9) - observed);
    }
    let (worst, at) = worst_of(&slacks);
    Ok(PropertyReport::judged(
        "lipschitz_constants",
        n_samples,
        worst,
        0.0,
        json!({ "integrand": if at == 0 { "f" } else { "g" } }),
    ))
}

/// `v₀` condition versus threshold: if the functional vanishes on `V` then
/// `0 ∈ S` (δ = 0, or `S = ∅` is impossible to distinguish by sampling), and
/// if it does not vanish a finite `δ` is strictly positive.
pub fn check_v0_delta_link(v0: &V0Report, delta: &DeltaReport) -> PropertyReport {
    let consistent = if v0.holds {
        delta.status != DeltaStatus::FlatAtZero
    } else {
        delta.status != DeltaStatus::Finite
    };
    PropertyReport::judged(
        format!("v0_delta_link({})", delta.sense.name()),
        1,
        if consistent { 0.0 } else { -1.0 },
        0.0,
        json!({ "v0_holds": v0.holds, "delta_status": delta.status, "delta": if delta.delta.is_finite() { json!(delta.delta) } else { json!("inf") } }),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct Remark1Report {
    pub v0: V0Report,
    pub delta: DeltaReport,
    pub delta_max: DeltaReport,
    /// The two exhibited members of `S`.
    pub u1: Field,
    pub u2: Field,
    /// `‖u‖² + ((2−ν)/L) J(u)` at `u1` and `u2`.
    pub objective_u1: f64,
    pub objective_u2: f64,
    pub distinct_minimizers_spread: f64,
    pub properties: Vec<PropertyReport>,
}

/// The degenerate case `f(ξ, η) = −(ξ² + η²)`, `g = 0`: `∇f(0) = 0`, the
/// convexified functional vanishes identically, every field minimizes it and
/// `δ = 0`.
pub fn demo_remark1(
    space: &GalerkinSpace,
    subspace: &Subspace,
    n_starts: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<Remark1Report> {
    let f = IntegrandSpec::f(IntegrandKind::NegNormSq)?;
    let problem = Problem::new(space.clone(), subspace.clone(), f, IntegrandSpec::zero_g())?;
    let v0 = v0_condition(space, subspace, &problem.f)?;
    let delta = compute_delta(&problem, Sense::Min, n_starts, seed, settings)?;
    let delta_max = compute_delta(&problem, Sense::Max, n_starts, seed, settings)?;

    let u1 = space.zero_field();
    let one = subspace.project(space, &space.constant(1.0))?;
    let norm = space.h1_norm(&one)?;
    let u2 = if norm > 0.0 { one.scaled(1.0 / norm) } else { one };
    let objective = |u: &Field| -> Result<f64> {
        Ok(space.h1_norm_sq(u)? + problem.mu_bar() * problem.j(u)?)
    };
    let objective_u1 = objective(&u1)?;
    let objective_u2 = objective(&u2)?;
    let spread = space.h1_distance(&u1, &u2)?;

    let properties = vec![
        PropertyReport::judged(
            "remark1_v0_fails",
            1,
            if v0.holds { -1.0 } else { 0.0 },
            0.0,
            json!({ "functional_norm": v0.functional_norm }),
        ),
        PropertyReport::judged(
            "remark1_delta_zero",
            1,
            if delta.status == DeltaStatus::FlatAtZero { 0.0 } else { -1.0 },
            0.0,
            json!({ "status": delta.status }),
        ),
        PropertyReport::judged(
            "remark1_non_unique",
            1,
            spread - 0.1,
            0.0,
            json!({ "objective_u1": objective_u1, "objective_u2": objective_u2 }),
        ),
    ];
    Ok(Remark1Report {
        v0,
        delta,
        delta_max,
        u1,
        u2,
        objective_u1,
        objective_u2,
        distinct_minimizers_spread: spread,
        properties,
    })
}

/// Options for [`run_all`].
#[derive(Debug, Clone)]
pub struct VerifyPlan {
    pub n_trials: usize,
    pub n_starts: usize,
    pub seed: u64,
    pub r_list: Vec<f64>,
}

/// Runs every property applicable to `problem`.
pub fn run_all(problem: &Problem, plan: &VerifyPlan, settings: &SolverSettings) -> Result<Vec<PropertyReport>> {
    let seed = plan.seed;
    let parallel = settings.parallel;
    let mut reports = vec![
        check_gradients(problem, 10, seed, parallel)?,
        check_lipschitz_constants(problem, 10_000, seed)?,
        check_strong_monotonicity(problem, 0.9 * problem.mu_bar(), plan.n_trials, seed, parallel)?,
        check_strong_monotonicity(problem, problem.mu_bar(), plan.n_trials, seed, parallel)?,
    ];
    for mu in [0.0, 1.0, 2.0] {
        reports.push(check_derivative_lipschitz(problem, mu, plan.n_trials, seed, parallel)?);
    }

    let v0 = v0_condition(&problem.space, &problem.subspace, &problem.f)?;
    let mut delta1 = f64::INFINITY;
    for sense in [Sense::Min, Sense::Max] {
        let delta = compute_delta(problem, sense, plan.n_starts, seed, settings)?;
        reports.push(check_v0_delta_link(&v0, &delta));
        delta1 = delta1.min(delta.delta);

        let lambda_bar = problem.lambda_bar();
        let grid: Vec<f64> = (1..=20).map(|k| lambda_bar * (1.0 + 0.25 * k as f64)).collect();
        reports.push(dual_monotonicity(problem, sense, &grid, settings)?.0);
    }

    let radii: Vec<f64> = if !plan.r_list.is_empty() {
        plan.r_list.clone()
    } else if delta1.is_finite() && delta1 > 0.0 {
        vec![0.5 * delta1]
    } else if delta1 == f64::INFINITY {
        vec![0.1]
    } else {
        Vec::new()
    };
    if radii.is_empty() {
        reports.push(PropertyReport::skipped("uniqueness", "delta1 = 0: no admissible radius"));
    }
    for &r in &radii {
        for sense in [Sense::Min, Sense::Max] {
            reports.push(multistart_uniqueness(problem, r, sense, plan.n_starts, seed, settings)?);
        }
    }
    let mut sorted = radii.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() >= 2 {
        for sense in [Sense::Min, Sense::Max] {
            reports.push(sup_sweep(problem, &sorted, sense, plan.n_starts, seed, settings)?.0);
        }
    }
    Ok(reports)
}
