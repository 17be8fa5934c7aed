//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; the test
//! fails if any criterion fails.
//!
//! Reference values are closed forms for the quadratic fixture on (0, 1):
//! `f(ξ, η) = ξ + ξ²/2`, `g = 0`, `V = H¹`. Minimizers of the penalized
//! problems are constants, `c(λ) = 1/(1 + 2λ)²` on the minimum side and
//! `1/(2λ − 1)²` on the maximum side, so `J_max(r) = √r + r/2`.

use std::time::{Duration, Instant};

use spherex::galerkin::{GalerkinSpace, Subspace};
use spherex::integrand::{IntegrandKind, IntegrandSpec};
use spherex::solvers::{
    compute_thresholds, solve_sphere, Problem, Sense, SolverSettings,
};
use spherex::verify::{
    check_derivative_lipschitz, check_strong_monotonicity, demo_remark1, dual_monotonicity,
    multistart_uniqueness, sup_sweep,
};
use spherex::{fd_gradient_check, DeltaStatus, Error};

fn problem(n: usize, f: IntegrandKind, g: IntegrandKind) -> Problem {
    Problem::new(
        GalerkinSpace::new(0.0, 1.0, n).unwrap(),
        Subspace::Full,
        IntegrandSpec::f(f).unwrap(),
        IntegrandSpec::g(g).unwrap(),
    )
    .unwrap()
}

fn p_quad() -> Problem {
    problem(64, IntegrandKind::AffineQuadratic { a: 1.0, c: 1.0 }, IntegrandKind::Zero)
}

fn p_sincos() -> Problem {
    problem(64, IntegrandKind::SinCos, IntegrandKind::Zero)
}

fn catalog() -> Vec<(IntegrandKind, IntegrandKind)> {
    use IntegrandKind::*;
    vec![
        (AffineQuadratic { a: 1.0, c: 1.0 }, Zero),
        (AffineQuadratic { a: -2.0, c: 0.5 }, QuadraticG { c: 0.5 }),
        (NegNormSq, Zero),
        (SinCos, CosineWell { c: 0.5 }),
        (SinCos, QuadraticG { c: 1.5 }),
    ]
}

type Criterion = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn thresholds() -> Outcome {
    let p = p_quad();
    let start = Instant::now();
    let t = compute_thresholds(&p, 8, 0, &SolverSettings::default()).unwrap();
    let elapsed = start.elapsed();
    let dev = t
        .min_side
        .minimizer
        .as_ref()
        .map_or(f64::INFINITY, |u| u.max_abs_deviation(-0.5));
    let pass = (t.delta - 0.25).abs() <= 1e-6
        && (t.delta1 - 0.25).abs() <= 1e-6
        && dev <= 1e-6
        && within(elapsed, 1.0);
    outcome(
        pass,
        format!("delta={} delta1={} |u+0.5|={dev:.1e} t={elapsed:?}", t.delta, t.delta1),
    )
}

fn saddle(sense: Sense, lambda: f64, u: f64, j: f64) -> Outcome {
    let p = p_quad();
    let start = Instant::now();
    let s = solve_sphere(&p, 0.04, sense, &SolverSettings::default()).unwrap();
    let elapsed = start.elapsed();
    let dev = s.u_star.max_abs_deviation(u);
    let pass = (s.lambda_star - lambda).abs() <= 1e-6
        && dev <= 1e-6
        && (s.j_value - j).abs() <= 1e-8
        && s.certified
        && within(elapsed, 1.0);
    outcome(
        pass,
        format!(
            "lambda*={} |u-u*|={dev:.1e} J={} certified={} t={elapsed:?}",
            s.lambda_star, s.j_value, s.certified
        ),
    )
}

fn radius_boundary() -> Outcome {
    let p = p_quad();
    let settings = SolverSettings::default();
    let inside = solve_sphere(&p, 0.2499, Sense::Min, &settings);
    let outside = solve_sphere(&p, 0.2501, Sense::Min, &settings);
    let pass = matches!(&inside, Ok(s) if s.certified)
        && matches!(outside, Err(Error::RadiusTooLarge { .. }));
    outcome(
        pass,
        format!(
            "r=0.2499 certified={:?}, r=0.2501 radius_too_large={}",
            inside.as_ref().map(|s| s.certified).ok(),
            matches!(outside, Err(Error::RadiusTooLarge { .. }))
        ),
    )
}

fn remark1() -> Outcome {
    let space = GalerkinSpace::new(0.0, 1.0, 64).unwrap();
    let r = demo_remark1(&space, &Subspace::Full, 8, 0, &SolverSettings::default()).unwrap();
    let pass = !r.v0.holds
        && r.delta.delta == 0.0
        && r.delta.status == DeltaStatus::FlatAtZero
        && r.distinct_minimizers_spread > 0.1;
    outcome(
        pass,
        format!(
            "v0={} delta={} spread={}",
            r.v0.holds, r.delta.delta, r.distinct_minimizers_spread
        ),
    )
}

fn strong_monotonicity() -> Outcome {
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    for p in [p_quad(), p_sincos()] {
        let rep = check_strong_monotonicity(&p, 0.9 * p.mu_bar(), 1000, 0, false).unwrap();
        worst = worst.min(rep.worst_slack);
    }
    let elapsed = start.elapsed();
    outcome(
        worst >= -1e-10 && within(elapsed, 5.0),
        format!("worst slack={worst:.3e} t={elapsed:?}"),
    )
}

fn derivative_lipschitz() -> Outcome {
    let mut worst = f64::INFINITY;
    for (f, g) in catalog() {
        let p = problem(64, f, g);
        for mu in [0.0, 1.0, 2.0] {
            let rep = check_derivative_lipschitz(&p, mu, 1000, 0, false).unwrap();
            worst = worst.min(rep.worst_slack);
        }
    }
    let p = problem(64, IntegrandKind::NegNormSq, IntegrandKind::Zero);
    let mut saturation = 0.0f64;
    for mu in [1.0, 2.0] {
        let rep = check_derivative_lipschitz(&p, mu, 1000, 0, false).unwrap();
        saturation = saturation.max(rep.worst_slack.abs());
    }
    outcome(
        worst >= -1e-8 && saturation <= 1e-9,
        format!("worst slack={worst:.3e} neg_norm_sq gap={saturation:.3e}"),
    )
}

fn uniqueness() -> Outcome {
    let settings = SolverSettings::default();
    let cases = [
        (p_quad(), 0.04, Sense::Min),
        (p_quad(), 0.04, Sense::Max),
        (p_sincos(), 0.01, Sense::Min),
        (p_sincos(), 0.04, Sense::Min),
    ];
    let mut worst_spread = 0.0f64;
    let mut all_judged = true;
    for (p, r, sense) in cases {
        let rep = multistart_uniqueness(&p, r, sense, 20, 0, &settings).unwrap();
        all_judged &= rep.status == spherex::verify::PropertyStatus::Pass;
        worst_spread = worst_spread.max(rep.witness["spread"].as_f64().unwrap_or(f64::INFINITY));
    }
    outcome(
        all_judged && worst_spread < 1e-5,
        format!("max spread={worst_spread:.3e}"),
    )
}

fn dual_curve() -> Outcome {
    let p = p_quad();
    let lambdas: Vec<f64> = (0..50).map(|k| 0.55 + k as f64 * (20.0 - 0.55) / 49.0).collect();
    let (rep, values) = dual_monotonicity(&p, Sense::Min, &lambdas, &SolverSettings::default()).unwrap();
    let err = values
        .iter()
        .map(|(l, c)| (c - 1.0 / (1.0 + 2.0 * l).powi(2)).abs())
        .fold(0.0, f64::max);
    outcome(
        rep.pass && err <= 1e-8,
        format!("worst slack={:.3e} max |c - closed form|={err:.3e}", rep.worst_slack),
    )
}

fn gradients() -> Outcome {
    use rand::SeedableRng;
    let mut worst = 0.0f64;
    for n in [8, 64] {
        let space = GalerkinSpace::new(0.0, 1.0, n).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(n as u64);
        for (f, g) in catalog() {
            let specs = [IntegrandSpec::f(f).unwrap(), IntegrandSpec::g(g).unwrap()];
            for k in 0..10u64 {
                let u = space.random_field(&Subspace::Full, 0.5 + k as f64 * 0.3, &mut rng).unwrap();
                for spec in &specs {
                    worst = worst.max(fd_gradient_check(&space, spec, &u, 1e-5, k).unwrap());
                }
            }
        }
    }
    outcome(worst < 1e-6, format!("max relative error={worst:.3e}"))
}

fn monotone_maximum() -> Outcome {
    let p = p_quad();
    let grid: Vec<f64> = (0..10).map(|k| 0.01 + k as f64 * (0.2 - 0.01) / 9.0).collect();
    let (_, points) = sup_sweep(&p, &grid, Sense::Max, 8, 0, &SolverSettings::default()).unwrap();
    let increasing = points.windows(2).all(|w| w[1].j_value > w[0].j_value);
    let err = points
        .iter()
        .map(|pt| (pt.j_value - (pt.r.sqrt() + pt.r / 2.0)).abs())
        .fold(0.0, f64::max);
    let certified = points.iter().all(|pt| pt.certified);
    outcome(
        increasing && certified && err <= 1e-6,
        format!("increasing={increasing} certified={certified} max error={err:.3e}"),
    )
}

#[test]
fn acceptance() {
    let suite_start = Instant::now();
    let criteria: Vec<(&str, Criterion)> = vec![
        ("thresholds on the quadratic fixture", thresholds),
        ("minimum on the sphere r=0.04", || saddle(Sense::Min, 2.0, -0.2, -0.18)),
        ("maximum on the sphere r=0.04", || saddle(Sense::Max, 3.0, 0.2, 0.22)),
        ("certificate boundary at delta", radius_boundary),
        ("degenerate integrand without v0", remark1),
        ("strong monotonicity below mu_bar", strong_monotonicity),
        ("derivative Lipschitz bound", derivative_lipschitz),
        ("uniqueness of constrained extrema", uniqueness),
        ("dual curve c(lambda)", dual_curve),
        ("finite-difference gradients", gradients),
        ("monotone maximum over radii", monotone_maximum),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2} {name}: {}", i + 1, o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    let elapsed = suite_start.elapsed();
    let in_time = within(elapsed, 60.0);
    println!(
        "[{}] suite wall time {elapsed:?}",
        if in_time { "PASS" } else { "FAIL" }
    );
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
    assert!(in_time, "suite took {elapsed:?}");
}
