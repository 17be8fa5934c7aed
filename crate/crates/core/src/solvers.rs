//! Threshold computation, the inner convex solve and the dual saddle solve.
//!
//! Everything is phrased through the Lagrangian
//!
//! ```text
//! Ψ(u, λ) = J(u) + λ (‖u‖² + I(u) − r),    λ ≥ λ̄ = L / (2 − ν).
//! ```
//!
//! For `λ > λ̄` the map `u ↦ J(u) + λ(‖u‖² + I(u))` has an H¹-Lipschitz
//! derivative with constant `2λ + λν + L` and is strongly convex with modulus
//! `2λ − λν − L`; at `λ = λ̄` it is only convex. The same inner solver is used
//! at `λ̄` to locate the set `S` (and `δ`) and above it for the saddle solve.
//! Maxima are obtained by running the whole machinery on `−f`.

use std::cell::Cell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::serialize_extended;
use crate::error::{Error, Result};
use crate::functionals::{assemble_derivative, eval_functional, DualVector};
use crate::galerkin::{Field, GalerkinSpace, Subspace};
use crate::integrand::{validate_g, Integrand, IntegrandSpec, Scaled};

/// Relative offset of the lowest multiplier tried above `λ̄`.
pub const LAMBDA_MIN_OFFSET: f64 = 1e-8;
/// Relative margin by which `λ*` must exceed `λ̄` to certify uniqueness.
pub const CERTIFICATE_MARGIN: f64 = 1e-6;
/// Below this value the computed `δ` is reported as exactly zero.
pub const FLAT_DELTA_TOL: f64 = 1e-8;
/// H¹ norm of the functional `v ↦ ∫(f_ξ(0)v + f_η(0)v′)` above which it is
/// considered non-zero on `V`.
pub const V0_TOL: f64 = 1e-10;
/// Random starts for the δ multistart have H¹ norm drawn from this range.
pub const DELTA_START_NORMS: (f64, f64) = (0.1, 2.0);

const MAX_DOUBLINGS: usize = 200;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

impl Sense {
    /// Factor applied to `f` so that every problem becomes a minimization.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sense::Min => "min",
            Sense::Max => "max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    /// H¹ norm of the projected Riesz gradient at which the inner solve stops.
    pub tol_g: f64,
    /// Relative tolerance on the constraint `‖u‖² + I(u) = r`.
    pub tol_r: f64,
    pub max_iters: usize,
    /// Iterates with H¹ norm above this are declared divergent.
    pub r_max_guard: f64,
    #[serde(skip)]
    pub parallel: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_g: 1e-10,
            tol_r: 1e-8,
            max_iters: 20_000,
            r_max_guard: 1e6,
            parallel: false,
        }
    }
}

/// Discretized instance: `Ω`, `V`, `f` and `g`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub space: GalerkinSpace,
    pub subspace: Subspace,
    pub f: IntegrandSpec,
    pub g: IntegrandSpec,
}

impl Problem {
    /// Checks `L > 0` for `f` and the hypotheses on `g` (`g ≥ 0`, `g(0) = 0`,
    /// `ν < 2`).
    pub fn new(
        space: GalerkinSpace,
        subspace: Subspace,
        f: IntegrandSpec,
        g: IntegrandSpec,
    ) -> Result<Self> {
        if !(f.lipschitz() > 0.0 && f.lipschitz().is_finite()) {
            return Err(Error::InvalidIntegrand(format!(
                "f = {} must have a non-constant Lipschitz gradient",
                f.name()
            )));
        }
        let report = validate_g(&g);
        if let Some(v) = report.violation {
            return Err(Error::InvalidG(format!(
                "{} at ({}, {}): value {}",
                v.reason, v.point.0, v.point.1, v.value
            )));
        }
        if let Subspace::Custom { basis } = &subspace {
            space.check_len(basis.nrows())?;
        }
        Ok(Self {
            space,
            subspace,
            f,
            g,
        })
    }

    /// `L`, Lipschitz constant of `∇f`.
    pub fn lip_f(&self) -> f64 {
        self.f.lipschitz()
    }

    /// `ν`, Lipschitz constant of `∇g`.
    pub fn lip_g(&self) -> f64 {
        self.g.lipschitz()
    }

    /// `λ̄ = L / (2 − ν)`.
    pub fn lambda_bar(&self) -> f64 {
        self.lip_f() / (2.0 - self.lip_g())
    }

    /// `μ̄ = (2 − ν) / L`.
    pub fn mu_bar(&self) -> f64 {
        (2.0 - self.lip_g()) / self.lip_f()
    }

    pub fn oriented_f(&self, sense: Sense) -> Scaled<&IntegrandSpec> {
        Scaled {
            inner: &self.f,
            factor: sense.sign(),
        }
    }

    /// `J(u)` with the original (un-negated) `f`.
    pub fn j(&self, u: &Field) -> Result<f64> {
        eval_functional(&self.space, &self.f, u)
    }

    pub fn i(&self, u: &Field) -> Result<f64> {
        eval_functional(&self.space, &self.g, u)
    }

    /// `‖u‖² + I(u)`.
    pub fn constraint(&self, u: &Field) -> Result<f64> {
        Ok(self.space.h1_norm_sq(u)? + self.i(u)?)
    }

    /// Derivative of `‖u‖² + I(u)`.
    pub fn constraint_derivative(&self, u: &Field) -> Result<DualVector> {
        let phi = DualVector::new(self.space.gram_mul(u)? * 2.0);
        Ok(phi.add_scaled(1.0, &assemble_derivative(&self.space, &self.g, u)?))
    }

    /// `±J(u) + λ(‖u‖² + I(u))`.
    pub fn penalized_value(&self, sense: Sense, lambda: f64, u: &Field) -> Result<f64> {
        let j = eval_functional(&self.space, &self.oriented_f(sense), u)?;
        Ok(j + lambda * self.constraint(u)?)
    }

    pub fn penalized_derivative(&self, sense: Sense, lambda: f64, u: &Field) -> Result<DualVector> {
        let dj = assemble_derivative(&self.space, &self.oriented_f(sense), u)?;
        Ok(dj.add_scaled(lambda, &self.constraint_derivative(u)?))
    }

    /// Riesz representative of `dual` projected onto `V`.
    pub fn gradient_in_v(&self, dual: &DualVector) -> Result<Field> {
        let w = dual.riesz(&self.space)?;
        self.subspace.project(&self.space, &w)
    }

    pub fn random_start<R: Rng + ?Sized>(&self, norm: f64, rng: &mut R) -> Result<Field> {
        self.space.random_field(&self.subspace, norm, rng)
    }
}

/// Independent, reproducible random stream for trial `index`.
pub(crate) fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub(crate) fn max_pairwise_distance(space: &GalerkinSpace, fields: &[Field]) -> Result<f64> {
    let mut worst = 0.0_f64;
    for (i, u) in fields.iter().enumerate() {
        for v in &fields[i + 1..] {
            worst = worst.max(space.h1_distance(u, v)?);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStatus {
    Converged,
    Diverged,
    MaxIters,
}

#[derive(Debug, Clone, Serialize)]
pub struct InnerSolveResult {
    pub u: Field,
    pub value: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub status: InnerStatus,
}

impl InnerSolveResult {
    pub fn converged(&self) -> bool {
        self.status == InnerStatus::Converged
    }
}

/// Minimizes `u ↦ ±J(u) + λ(‖u‖² + I(u))` over `V`.
///
/// Gradients are taken in the H¹ metric (Riesz representative projected onto
/// `V`) with the fixed step `1/(2λ + λν + L)`. Nesterov momentum with
/// gradient-based restarts keeps the iteration fast near `λ̄`, where the
/// objective is barely convex, and makes unbounded directions reach the
/// divergence guard quickly.
pub fn inner_minimize(
    problem: &Problem,
    sense: Sense,
    lambda: f64,
    start: &Field,
    settings: &SolverSettings,
) -> Result<InnerSolveResult> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Precondition(format!(
            "multiplier must be finite and non-negative, got {lambda}"
        )));
    }
    let space = &problem.space;
    let lipschitz = 2.0 * lambda + lambda * problem.lip_g() + problem.lip_f();
    let step = 1.0 / lipschitz;

    let mut x = problem.subspace.project(space, start)?;
    let mut y = x.clone();
    let mut momentum = 1.0_f64;
    let mut iters = 0;
    let status = loop {
        let norm = space.h1_norm(&y)?;
        if !(norm <= settings.r_max_guard) || !y.is_finite() {
            break InnerStatus::Diverged;
        }
        let grad = problem.gradient_in_v(&problem.penalized_derivative(sense, lambda, &y)?)?;
        let grad_norm = space.h1_norm(&grad)?;
        if grad_norm <= settings.tol_g {
            break InnerStatus::Converged;
        }
        if iters >= settings.max_iters {
            break InnerStatus::MaxIters;
        }
        iters += 1;

        let x_next = y.add_scaled(-step, &grad);
        let moved = x_next.sub(&x);
        if space.h1_inner(&grad, &moved)? > 0.0 {
            momentum = 1.0;
            y = x_next.clone();
        } else {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            y = x_next.add_scaled((momentum - 1.0) / next, &moved);
            momentum = next;
        }
        x = x_next;
    };

    let u = if status == InnerStatus::Diverged { x } else { y };
    let grad_norm = if u.is_finite() {
        let grad = problem.gradient_in_v(&problem.penalized_derivative(sense, lambda, &u)?)?;
        space.h1_norm(&grad)?
    } else {
        f64::NAN
    };
    let value = if u.is_finite() {
        problem.penalized_value(sense, lambda, &u)?
    } else {
        f64::NAN
    };
    Ok(InnerSolveResult {
        u,
        value,
        grad_norm,
        iters,
        status,
    })
}

/// `c(λ) = ‖u_λ‖² + I(u_λ)` at the inner minimizer `u_λ`.
#[derive(Debug, Clone, Serialize)]
pub struct ConstraintEval {
    pub lambda: f64,
    pub c: f64,
    pub inner: InnerSolveResult,
}

/// Evaluates the constraint at the minimizer of the penalized functional.
/// Fails unless the inner solve converges.
pub fn constraint_value(
    problem: &Problem,
    sense: Sense,
    lambda: f64,
    start: Option<&Field>,
    settings: &SolverSettings,
) -> Result<ConstraintEval> {
    let zero = problem.space.zero_field();
    let inner = inner_minimize(problem, sense, lambda, start.unwrap_or(&zero), settings)?;
    if !inner.converged() {
        return Err(Error::Inconclusive(format!(
            "inner solve at lambda = {lambda} ended with status {:?} (grad norm {:e})",
            inner.status, inner.grad_norm
        )));
    }
    Ok(ConstraintEval {
        lambda,
        c: problem.constraint(&inner.u)?,
        inner,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SaddleResult {
    pub u_star: Field,
    pub lambda_star: f64,
    /// `|‖u*‖² + I(u*) − r|`
    pub constraint_residual: f64,
    /// `J(u*)` with the original `f`.
    pub j_value: f64,
    pub certified: bool,
    pub sense: Sense,
    pub r: f64,
    pub lambda_bar: f64,
    /// Number of inner solves performed.
    pub evaluations: usize,
}

struct DualPoint {
    lambda: f64,
    /// `+∞` when the inner solve diverged.
    c: f64,
    u: Option<Field>,
}

/// Solves `min` (or `max`) of `J` on `C_r` by bisection on the multiplier.
///
/// The dual function `λ ↦ inf_u Ψ(u, λ)` is concave, so `c(λ)` is
/// non-increasing; the root of `c(λ) = r` above `λ̄` gives the saddle point.
/// `certified` is set when `λ* > λ̄ (1 + 1e-6)`, in which case `u*` is the
/// unique global extremum on `C_r`.
pub fn solve_sphere(
    problem: &Problem,
    r: f64,
    sense: Sense,
    settings: &SolverSettings,
) -> Result<SaddleResult> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Precondition(format!("radius must be positive, got {r}")));
    }
    let lambda_bar = problem.lambda_bar();
    let tol = settings.tol_r * r;
    let evaluations = Cell::new(0);

    let evaluate = |lambda: f64, start: &Field| -> Result<DualPoint> {
        evaluations.set(evaluations.get() + 1);
        let inner = inner_minimize(problem, sense, lambda, start, settings)?;
        match inner.status {
            InnerStatus::Converged => Ok(DualPoint {
                lambda,
                c: problem.constraint(&inner.u)?,
                u: Some(inner.u),
            }),
            InnerStatus::Diverged => Ok(DualPoint {
                lambda,
                c: f64::INFINITY,
                u: None,
            }),
            InnerStatus::MaxIters => Err(Error::Inconclusive(format!(
                "inner solve at lambda = {lambda} hit max_iters (grad norm {:e})",
                inner.grad_norm
            ))),
        }
    };

    let zero = problem.space.zero_field();
    let lambda_min = lambda_bar * (1.0 + LAMBDA_MIN_OFFSET);
    let first = evaluate(lambda_min, &zero)?;
    if first.c.is_finite() {
        if (first.c - r).abs() <= tol {
            return finish(problem, first, r, sense, evaluations.get());
        }
        if first.c < r {
            return Err(Error::RadiusTooLarge { r, c_min: first.c });
        }
    } else {
        log::info!(
            "{} side: inner solve diverges at lambda_min = {lambda_min} (S empty), bracketing from above",
            sense.name()
        );
    }

    // Bracket: `lo` has c > r, `hi` has c < r.
    let mut lo = first;
    let mut trial = 2.0 * lambda_bar;
    let mut hi = None;
    for _ in 0..MAX_DOUBLINGS {
        let start = lo.u.clone().unwrap_or_else(|| zero.clone());
        let p = evaluate(trial, &start)?;
        if (p.c - r).abs() <= tol {
            return finish(problem, p, r, sense, evaluations.get());
        }
        if p.c > r {
            lo = p;
            trial *= 2.0;
        } else {
            hi = Some(p);
            break;
        }
    }
    let mut hi = hi.ok_or_else(|| {
        Error::Inconclusive(format!("could not bracket c(lambda) = {r} from above"))
    })?;

    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo.lambda + hi.lambda);
        if !(mid > lo.lambda && mid < hi.lambda) {
            break;
        }
        let start = hi.u.clone().unwrap_or_else(|| zero.clone());
        let p = evaluate(mid, &start)?;
        if (p.c - r).abs() <= tol {
            return finish(problem, p, r, sense, evaluations.get());
        }
        if p.c > r {
            lo = p;
        } else {
            hi = p;
        }
    }
    Err(Error::Inconclusive(format!(
        "bisection stalled in [{}, {}] with c = {} and {} for r = {r}",
        lo.lambda, hi.lambda, lo.c, hi.c
    )))
}

fn finish(
    problem: &Problem,
    point: DualPoint,
    r: f64,
    sense: Sense,
    evaluations: usize,
) -> Result<SaddleResult> {
    let lambda_bar = problem.lambda_bar();
    let u_star = point
        .u
        .expect("accepted dual points always carry a converged minimizer");
    Ok(SaddleResult {
        j_value: problem.j(&u_star)?,
        constraint_residual: (point.c - r).abs(),
        certified: point.lambda > lambda_bar * (1.0 + CERTIFICATE_MARGIN),
        lambda_star: point.lambda,
        u_star,
        sense,
        r,
        lambda_bar,
        evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaStatus {
    Finite,
    /// The convexified functional is unbounded below: `S = ∅`, `δ = +∞`.
    SEmpty,
    /// `0 ∈ S`: `δ = 0`.
    FlatAtZero,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaReport {
    pub sense: Sense,
    #[serde(serialize_with = "serialize_extended")]
    pub delta: f64,
    pub minimizer: Option<Field>,
    pub status: DeltaStatus,
    /// Largest H¹ distance between the minimizers found from different starts.
    pub multistart_spread: f64,
    pub n_runs: usize,
}

/// Estimates `δ = inf_{u ∈ S} (‖u‖² + I(u))`, where `S` is the set of global
/// minimizers over `V` of `Φ + I + ((2−ν)/L) J` (or of `Φ + I − ((2−ν)/L) J`
/// for `sense = Max`, the set `S₁`).
///
/// Equivalently minimizes `±J + λ̄ (Φ + I)` from the zero field plus
/// `n_starts` random starts. Any divergent run proves `S` empty.
pub fn compute_delta(
    problem: &Problem,
    sense: Sense,
    n_starts: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<DeltaReport> {
    let lambda_bar = problem.lambda_bar();
    let run = |index: usize| -> Result<InnerSolveResult> {
        let start = if index == 0 {
            problem.space.zero_field()
        } else {
            let mut rng = trial_rng(seed, index);
            let norm = rng.random_range(DELTA_START_NORMS.0..=DELTA_START_NORMS.1);
            problem.random_start(norm, &mut rng)?
        };
        inner_minimize(problem, sense, lambda_bar, &start, settings)
    };
    let runs: Vec<InnerSolveResult> = if settings.parallel {
        (0..=n_starts).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..=n_starts).map(run).collect::<Result<_>>()?
    };

    if runs.iter().any(|r| r.status == InnerStatus::Diverged) {
        return Ok(DeltaReport {
            sense,
            delta: f64::INFINITY,
            minimizer: None,
            status: DeltaStatus::SEmpty,
            multistart_spread: 0.0,
            n_runs: runs.len(),
        });
    }
    if let Some(bad) = runs.iter().find(|r| r.status == InnerStatus::MaxIters) {
        return Err(Error::Inconclusive(format!(
            "delta ({} side): inner solve at lambda_bar hit max_iters with grad norm {:e}; raise max_iters or tol_g",
            sense.name(),
            bad.grad_norm
        )));
    }

    let minimizers: Vec<Field> = runs.into_iter().map(|r| r.u).collect();
    let mut best = (f64::INFINITY, 0);
    for (i, u) in minimizers.iter().enumerate() {
        let c = problem.constraint(u)?;
        if c < best.0 {
            best = (c, i);
        }
    }
    let spread = max_pairwise_distance(&problem.space, &minimizers)?;
    let (delta, status) = if best.0 < FLAT_DELTA_TOL {
        (0.0, DeltaStatus::FlatAtZero)
    } else {
        (best.0, DeltaStatus::Finite)
    };
    Ok(DeltaReport {
        sense,
        delta,
        minimizer: Some(minimizers[best.1].clone()),
        status,
        multistart_spread: spread,
        n_runs: minimizers.len(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Thresholds {
    #[serde(serialize_with = "serialize_extended")]
    pub delta: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub delta1: f64,
    pub min_side: DeltaReport,
    pub max_side: DeltaReport,
}

/// `δ` (minima) and `δ₁ = min(δ, inf_{S₁}(‖u‖² + I(u)))` (minima and maxima).
pub fn compute_thresholds(
    problem: &Problem,
    n_starts: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<Thresholds> {
    let min_side = compute_delta(problem, Sense::Min, n_starts, seed, settings)?;
    let max_side = compute_delta(problem, Sense::Max, n_starts, seed, settings)?;
    Ok(Thresholds {
        delta: min_side.delta,
        delta1: min_side.delta.min(max_side.delta),
        min_side,
        max_side,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct V0Report {
    pub holds: bool,
    pub functional_norm: f64,
    /// Unit-norm element of `V` on which the functional is positive (zero
    /// field when the condition fails).
    pub witness: Field,
}

/// Checks that `v ↦ ∫(f_ξ(0) v + f_η(0) v′)` does not vanish on `V`.
pub fn v0_condition<I: Integrand + ?Sized>(
    space: &GalerkinSpace,
    subspace: &Subspace,
    f: &I,
) -> Result<V0Report> {
    let ell = assemble_derivative(space, f, &space.zero_field())?;
    let representative = subspace.project(space, &ell.riesz(space)?)?;
    let norm = space.h1_norm(&representative)?;
    let holds = norm > V0_TOL;
    let witness = if holds {
        representative.scaled(1.0 / norm)
    } else {
        space.zero_field()
    };
    Ok(V0Report {
        holds,
        functional_norm: norm,
        witness,
    })
}

/// Penalty weights swept by [`penalized_multistart`].
const PENALTY_WEIGHTS: [f64; 6] = [1e1, 1e2, 1e3, 1e4, 1e5, 1e6];
const PENALTY_ITERS: usize = 500;

#[derive(Debug, Clone, Serialize)]
pub struct PenaltyResult {
    pub u: Field,
    /// `J(u)` with the original `f`.
    pub j_value: f64,
    pub constraint_residual: f64,
}

/// Uncertified approximation of the extremum of `J` on `C_r` for radii where
/// the dual solve does not apply: minimizes `±J + (ρ/2)(‖u‖² + I(u) − r)²`
/// for increasing `ρ` with backtracking H¹ gradient descent, from several
/// random starts, and keeps the best nearly feasible point.
pub fn penalized_multistart(
    problem: &Problem,
    r: f64,
    sense: Sense,
    n_starts: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<PenaltyResult> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Precondition(format!("radius must be positive, got {r}")));
    }
    let space = &problem.space;
    let oriented = problem.oriented_f(sense);
    let merit = |u: &Field, rho: f64| -> Result<f64> {
        let gap = problem.constraint(u)? - r;
        Ok(eval_functional(space, &oriented, u)? + 0.5 * rho * gap * gap)
    };

    let run = |index: usize| -> Result<(Field, f64, f64)> {
        let mut rng = trial_rng(seed, index);
        let mut u = problem.random_start(r.sqrt(), &mut rng)?;
        if space.h1_norm(&u)? == 0.0 {
            return Ok((u, f64::INFINITY, r));
        }
        for _ in 0..3 {
            let c = problem.constraint(&u)?;
            u = u.scaled((r / c).sqrt());
        }
        for rho in PENALTY_WEIGHTS {
            let mut step = 1.0 / (rho * r).max(1.0);
            for _ in 0..PENALTY_ITERS {
                let gap = problem.constraint(&u)? - r;
                let dual = assemble_derivative(space, &oriented, &u)?
                    .add_scaled(rho * gap, &problem.constraint_derivative(&u)?);
                let grad = problem.gradient_in_v(&dual)?;
                let grad_sq = space.h1_norm_sq(&grad)?;
                if grad_sq.sqrt() <= settings.tol_g {
                    break;
                }
                let current = merit(&u, rho)?;
                let mut accepted = false;
                for _ in 0..60 {
                    let candidate = u.add_scaled(-step, &grad);
                    if merit(&candidate, rho)? <= current - 0.5 * step * grad_sq {
                        u = candidate;
                        accepted = true;
                        step *= 2.0;
                        break;
                    }
                    step *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
        }
        let residual = (problem.constraint(&u)? - r).abs();
        Ok((u.clone(), eval_functional(space, &oriented, &u)?, residual))
    };

    let runs: Vec<(Field, f64, f64)> = if settings.parallel {
        (0..n_starts.max(1)).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..n_starts.max(1)).map(run).collect::<Result<_>>()?
    };
    let feasible = |res: f64| res <= 1e-4 * r;
    let best = runs
        .into_iter()
        .min_by(|a, b| {
            feasible(b.2)
                .cmp(&feasible(a.2))
                .then(a.1.total_cmp(&b.1))
        })
        .expect("at least one start");
    Ok(PenaltyResult {
        j_value: problem.j(&best.0)?,
        constraint_residual: best.2,
        u: best.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrand::IntegrandKind;
    use nalgebra::DMatrix;

    fn problem_on(subspace: Subspace, f: IntegrandKind, g: IntegrandKind) -> Problem {
        Problem::new(
            GalerkinSpace::new(0.0, 1.0, 64).unwrap(),
            subspace,
            IntegrandSpec::f(f).unwrap(),
            IntegrandSpec::g(g).unwrap(),
        )
        .unwrap()
    }

    /// Ω = (0, 1), f = ξ + ξ²/2, g = 0, V = H¹. Every minimizer in sight is
    /// a constant, which the P1 space represents exactly.
    fn p_quad() -> Problem {
        problem_on(
            Subspace::Full,
            IntegrandKind::AffineQuadratic { a: 1.0, c: 1.0 },
            IntegrandKind::Zero,
        )
    }

    fn p_rem1() -> Problem {
        problem_on(Subspace::Full, IntegrandKind::NegNormSq, IntegrandKind::Zero)
    }

    fn settings() -> SolverSettings {
        SolverSettings::default()
    }

    #[test]
    fn problem_rejects_bad_g() {
        let err = Problem::new(
            GalerkinSpace::new(0.0, 1.0, 4).unwrap(),
            Subspace::Full,
            IntegrandSpec::f(IntegrandKind::SinCos).unwrap(),
            IntegrandSpec::g(IntegrandKind::QuadraticG { c: 2.5 }).unwrap(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("ν<2 violated"));
    }

    #[test]
    fn inner_quadratic_minimum() {
        // Euler–Lagrange: 1 + u + 2λu = 0 for constants, u = −1/(1 + 2λ).
        let p = p_quad();
        let res = inner_minimize(&p, Sense::Min, 2.0, &p.space.zero_field(), &settings()).unwrap();
        assert_eq!(res.status, InnerStatus::Converged);
        assert!(res.u.max_abs_deviation(-0.2) < 1e-9);
        assert!((res.value - (-0.10)).abs() < 1e-12, "{}", res.value);
        assert!(res.grad_norm <= settings().tol_g);
    }

    #[test]
    fn inner_flat_objective_returns_start() {
        let p = p_rem1();
        let start = p.space.interpolate(|x| (4.0 * x).sin() + 0.3);
        let res = inner_minimize(&p, Sense::Min, 1.0, &start, &settings()).unwrap();
        assert_eq!(res.status, InnerStatus::Converged);
        assert_eq!(res.iters, 0);
        assert_eq!(res.u, start);
        assert!(res.grad_norm <= settings().tol_g);
    }

    #[test]
    fn inner_detects_non_coercivity() {
        // λ‖u‖² − ∫(u + u²/2) is unbounded below along constants for λ < 1/2.
        let p = p_quad();
        let res = inner_minimize(&p, Sense::Max, 0.4, &p.space.zero_field(), &settings()).unwrap();
        assert_eq!(res.status, InnerStatus::Diverged);
    }

    #[test]
    fn inner_reports_max_iters() {
        let p = p_quad();
        let s = SolverSettings {
            max_iters: 2,
            tol_g: 1e-14,
            ..settings()
        };
        let start = p.space.interpolate(|x| x * x);
        let res = inner_minimize(&p, Sense::Min, 2.0, &start, &s).unwrap();
        assert_eq!(res.status, InnerStatus::MaxIters);
        assert!(inner_minimize(&p, Sense::Min, -1.0, &start, &s).is_err());
    }

    #[test]
    fn constraint_value_examples() {
        let p = p_quad();
        let c2 = constraint_value(&p, Sense::Min, 2.0, None, &settings()).unwrap();
        assert!((c2.c - 0.04).abs() < 1e-10);
        let c05 = constraint_value(&p, Sense::Min, 0.5, None, &settings()).unwrap();
        assert!((c05.c - 0.25).abs() < 1e-10);
        let c = |l| constraint_value(&p, Sense::Min, l, None, &settings()).unwrap().c;
        assert!(c(100.0) < c(10.0) && c(10.0) < c(1.0));
        assert!(constraint_value(&p, Sense::Max, 0.4, None, &settings()).is_err());
    }

    #[test]
    fn solve_sphere_min() {
        // c(λ) = 1/(1 + 2λ)² = r gives λ* = (1/√r − 1)/2 = 2 at r = 0.04.
        let p = p_quad();
        let s = solve_sphere(&p, 0.04, Sense::Min, &settings()).unwrap();
        assert!((s.lambda_star - 2.0).abs() < 1e-6, "{}", s.lambda_star);
        assert!(s.u_star.max_abs_deviation(-0.2) < 1e-6);
        assert!((s.j_value + 0.18).abs() < 1e-8);
        assert!(s.certified);
        assert!(s.constraint_residual <= 1e-8 * 0.04);
    }

    #[test]
    fn solve_sphere_max() {
        // On −f: u = 1/(2λ − 1), c = 1/(2λ − 1)² = 0.04 at λ = 3.
        let p = p_quad();
        let s = solve_sphere(&p, 0.04, Sense::Max, &settings()).unwrap();
        assert!((s.lambda_star - 3.0).abs() < 1e-6, "{}", s.lambda_star);
        assert!(s.u_star.max_abs_deviation(0.2) < 1e-6);
        assert!((s.j_value - 0.22).abs() < 1e-8);
        assert!(s.certified);
    }

    #[test]
    fn solve_sphere_radius_too_large() {
        let p = p_quad();
        match solve_sphere(&p, 0.3, Sense::Min, &settings()) {
            Err(Error::RadiusTooLarge { r, c_min }) => {
                assert_eq!(r, 0.3);
                assert!((c_min - 0.25).abs() < 1e-7);
            }
            other => panic!("expected radius-too-large, got {other:?}"),
        }
        assert!(matches!(
            solve_sphere(&p, 0.0, Sense::Min, &settings()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn delta_examples() {
        let p = p_quad();
        let d = compute_delta(&p, Sense::Min, 4, 1, &settings()).unwrap();
        assert_eq!(d.status, DeltaStatus::Finite);
        assert!((d.delta - 0.25).abs() < 1e-9);
        assert!(d.minimizer.unwrap().max_abs_deviation(-0.5) < 1e-9);
        assert!(d.multistart_spread < 1e-8);

        let d = compute_delta(&p, Sense::Max, 4, 1, &settings()).unwrap();
        assert_eq!(d.status, DeltaStatus::SEmpty);
        assert_eq!(d.delta, f64::INFINITY);

        let d = compute_delta(&p_rem1(), Sense::Min, 4, 1, &settings()).unwrap();
        assert_eq!(d.status, DeltaStatus::FlatAtZero);
        assert_eq!(d.delta, 0.0);
        assert!(d.multistart_spread > 0.1);
    }

    #[test]
    fn thresholds_examples() {
        let t = compute_thresholds(&p_quad(), 2, 0, &settings()).unwrap();
        assert!((t.delta - 0.25).abs() < 1e-9);
        assert!((t.delta1 - 0.25).abs() < 1e-9);
        let t = compute_thresholds(&p_rem1(), 2, 0, &settings()).unwrap();
        assert_eq!((t.delta, t.delta1), (0.0, 0.0));
    }

    #[test]
    fn thresholds_with_quadratic_g_match_dense_solve() {
        // E = (1 + c/2)‖u‖² ± μ̄ J with μ̄ = (2 − ν)/L. Stationarity:
        // ((2 + c) G ± μ̄ M) u = ∓ μ̄ M·1, solved densely with LU.
        let c = 0.5;
        let p = problem_on(
            Subspace::Full,
            IntegrandKind::AffineQuadratic { a: 1.0, c: 1.0 },
            IntegrandKind::QuadraticG { c },
        );
        let mu = (2.0 - c) / 1.0;
        let g = p.space.gram();
        let m = p.space.mass();
        let ones = nalgebra::DVector::from_element(p.space.n_nodes(), 1.0);
        let oracle = |sign: f64| {
            let a: DMatrix<f64> = &g * (2.0 + c) + &m * (sign * mu);
            let rhs = &m * &ones * (-sign * mu);
            let u = Field::new(a.lu().solve(&rhs).unwrap());
            p.constraint(&u).unwrap()
        };
        let t = compute_thresholds(&p, 3, 5, &settings()).unwrap();
        assert!(t.delta > 0.0 && t.delta1 > 0.0);
        assert!((t.delta - oracle(1.0)).abs() < 1e-9, "{} vs {}", t.delta, oracle(1.0));
        assert!((t.max_side.delta - oracle(-1.0)).abs() < 1e-9);
        assert!((t.delta1 - oracle(1.0).min(oracle(-1.0))).abs() < 1e-9);
    }

    #[test]
    fn v0_examples() {
        let p = p_quad();
        let r = v0_condition(&p.space, &Subspace::Full, &p.f).unwrap();
        assert!(r.holds);
        assert!((r.functional_norm - 1.0).abs() < 1e-12);
        assert!(r.witness.max_abs_deviation(1.0) < 1e-12);

        let nn = IntegrandSpec::f(IntegrandKind::NegNormSq).unwrap();
        for sub in [Subspace::Full, Subspace::ZeroBoundary] {
            let r = v0_condition(&p.space, &sub, &nn).unwrap();
            assert!(!r.holds);
            assert_eq!(r.functional_norm, 0.0);
        }

        let empty = Subspace::custom(&p.space, DMatrix::zeros(65, 0)).unwrap();
        let r = v0_condition(&p.space, &empty, &p.f).unwrap();
        assert!(!r.holds);
        assert_eq!(r.functional_norm, 0.0);
    }

    #[test]
    fn zero_boundary_subspace_solves() {
        let p = problem_on(
            Subspace::ZeroBoundary,
            IntegrandKind::AffineQuadratic { a: 1.0, c: 1.0 },
            IntegrandKind::Zero,
        );
        let s = solve_sphere(&p, 0.01, Sense::Min, &settings()).unwrap();
        assert!(s.certified);
        assert_eq!(s.u_star.coeffs[0], 0.0);
        assert_eq!(s.u_star.coeffs[64], 0.0);
        assert!((p.constraint(&s.u_star).unwrap() - 0.01).abs() <= 1e-10);
    }

    #[test]
    fn parallel_delta_is_deterministic() {
        let p = problem_on(Subspace::Full, IntegrandKind::SinCos, IntegrandKind::CosineWell { c: 0.5 });
        let seq = compute_delta(&p, Sense::Min, 3, 7, &settings()).unwrap();
        let par = compute_delta(
            &p,
            Sense::Min,
            3,
            7,
            &SolverSettings {
                parallel: true,
                ..settings()
            },
        )
        .unwrap();
        assert_eq!(seq.delta.to_bits(), par.delta.to_bits());
        assert_eq!(seq.multistart_spread.to_bits(), par.multistart_spread.to_bits());
    }
}
