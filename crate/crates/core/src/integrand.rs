//! Integrands `f(ξ, η)` and `g(ξ, η)` with analytic gradients and certified
//! Lipschitz constants of those gradients.
//!
//! The catalog is closed: every entry ships an exact Hessian bound, so the
//! constants `L` and `ν` the solvers rely on are never estimated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pointwise integrand with a globally Lipschitz gradient.
pub trait Integrand: Send + Sync {
    fn value(&self, xi: f64, eta: f64) -> f64;

    /// `(∂f/∂ξ, ∂f/∂η)`.
    fn gradient(&self, xi: f64, eta: f64) -> (f64, f64);

    /// Global Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;
}

impl<T: Integrand + ?Sized> Integrand for &T {
    fn value(&self, xi: f64, eta: f64) -> f64 {
        (**self).value(xi, eta)
    }

    fn gradient(&self, xi: f64, eta: f64) -> (f64, f64) {
        (**self).gradient(xi, eta)
    }

    fn lipschitz(&self) -> f64 {
        (**self).lipschitz()
    }
}

/// `factor * inner`.
#[derive(Debug, Clone, Copy)]
pub struct Scaled<I> {
    pub inner: I,
    pub factor: f64,
}

impl<I: Integrand> Integrand for Scaled<I> {
    fn value(&self, xi: f64, eta: f64) -> f64 {
        self.factor * self.inner.value(xi, eta)
    }

    fn gradient(&self, xi: f64, eta: f64) -> (f64, f64) {
        let (gx, ge) = self.inner.gradient(xi, eta);
        (self.factor * gx, self.factor * ge)
    }

    fn lipschitz(&self) -> f64 {
        self.factor.abs() * self.inner.lipschitz()
    }
}

/// `first + second`; the Lipschitz constant is the (possibly loose) sum.
#[derive(Debug, Clone, Copy)]
pub struct Sum<A, B> {
    pub first: A,
    pub second: B,
}

impl<A: Integrand, B: Integrand> Integrand for Sum<A, B> {
    fn value(&self, xi: f64, eta: f64) -> f64 {
        self.first.value(xi, eta) + self.second.value(xi, eta)
    }

    fn gradient(&self, xi: f64, eta: f64) -> (f64, f64) {
        let (a0, a1) = self.first.gradient(xi, eta);
        let (b0, b1) = self.second.gradient(xi, eta);
        (a0 + b0, a1 + b1)
    }

    fn lipschitz(&self) -> f64 {
        self.first.lipschitz() + self.second.lipschitz()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    F,
    G,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntegrandKind {
    /// `a ξ + (c/2) ξ²`
    AffineQuadratic { a: f64, c: f64 },
    /// `−(ξ² + η²)`
    NegNormSq,
    /// `sin ξ + cos η`
    SinCos,
    /// `(c/2)(ξ² + η²)`
    QuadraticG { c: f64 },
    /// `c (1 − cos ξ)`
    CosineWell { c: f64 },
    Zero,
}

impl IntegrandKind {
    /// Builds a catalog entry from its name and positional parameters.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let expect = |n: usize| -> Result<()> {
            if params.len() != n {
                return Err(Error::InvalidIntegrand(format!(
                    "{name} takes {n} parameter(s), got {}",
                    params.len()
                )));
            }
            Ok(())
        };
        let kind = match name {
            "affine_quadratic" => {
                expect(2)?;
                IntegrandKind::AffineQuadratic {
                    a: params[0],
                    c: params[1],
                }
            }
            "neg_norm_sq" => {
                expect(0)?;
                IntegrandKind::NegNormSq
            }
            "sincos" => {
                expect(0)?;
                IntegrandKind::SinCos
            }
            "quadratic_g" => {
                expect(1)?;
                IntegrandKind::QuadraticG { c: params[0] }
            }
            "cosine_well" => {
                expect(1)?;
                IntegrandKind::CosineWell { c: params[0] }
            }
            "zero" => {
                expect(0)?;
                IntegrandKind::Zero
            }
            other => {
                return Err(Error::InvalidIntegrand(format!(
                    "unknown integrand kind `{other}`"
                )))
            }
        };
        Ok(kind)
    }

    pub fn name(&self) -> &'static str {
        match self {
            IntegrandKind::AffineQuadratic { .. } => "affine_quadratic",
            IntegrandKind::NegNormSq => "neg_norm_sq",
            IntegrandKind::SinCos => "sincos",
            IntegrandKind::QuadraticG { .. } => "quadratic_g",
            IntegrandKind::CosineWell { .. } => "cosine_well",
            IntegrandKind::Zero => "zero",
        }
    }

    fn params(&self) -> Vec<f64> {
        match *self {
            IntegrandKind::AffineQuadratic { a, c } => vec![a, c],
            IntegrandKind::QuadraticG { c } | IntegrandKind::CosineWell { c } => vec![c],
            IntegrandKind::NegNormSq | IntegrandKind::SinCos | IntegrandKind::Zero => vec![],
        }
    }
}

/// A catalog integrand tagged with the role it plays (`f` or `g`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrandSpec {
    pub kind: IntegrandKind,
    pub role: Role,
}

impl IntegrandSpec {
    /// Rejects non-finite parameters, and `f`-role entries whose gradient is
    /// constant (`L = 0`).
    pub fn new(kind: IntegrandKind, role: Role) -> Result<Self> {
        if kind.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidIntegrand(format!(
                "{} has non-finite parameters",
                kind.name()
            )));
        }
        let spec = Self { kind, role };
        if role == Role::F && !(spec.lipschitz() > 0.0) {
            return Err(Error::InvalidIntegrand(format!(
                "{} has a constant gradient (L = 0); f needs L > 0",
                kind.name()
            )));
        }
        Ok(spec)
    }

    pub fn f(kind: IntegrandKind) -> Result<Self> {
        Self::new(kind, Role::F)
    }

    pub fn g(kind: IntegrandKind) -> Result<Self> {
        Self::new(kind, Role::G)
    }

    pub fn zero_g() -> Self {
        Self {
            kind: IntegrandKind::Zero,
            role: Role::G,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }
}

impl Integrand for IntegrandSpec {
    fn value(&self, xi: f64, eta: f64) -> f64 {
        match self.kind {
            IntegrandKind::AffineQuadratic { a, c } => a * xi + 0.5 * c * xi * xi,
            IntegrandKind::NegNormSq => -(xi * xi + eta * eta),
            IntegrandKind::SinCos => xi.sin() + eta.cos(),
            IntegrandKind::QuadraticG { c } => 0.5 * c * (xi * xi + eta * eta),
            IntegrandKind::CosineWell { c } => {
                // 1 − cos ξ = 2 sin²(ξ/2) without cancellation near 0.
                let s = (0.5 * xi).sin();
                2.0 * c * s * s
            }
            IntegrandKind::Zero => 0.0,
        }
    }

    fn gradient(&self, xi: f64, eta: f64) -> (f64, f64) {
        match self.kind {
            IntegrandKind::AffineQuadratic { a, c } => (a + c * xi, 0.0),
            IntegrandKind::NegNormSq => (-2.0 * xi, -2.0 * eta),
            IntegrandKind::SinCos => (xi.cos(), -eta.sin()),
            IntegrandKind::QuadraticG { c } => (c * xi, c * eta),
            IntegrandKind::CosineWell { c } => (c * xi.sin(), 0.0),
            IntegrandKind::Zero => (0.0, 0.0),
        }
    }

    /// Spectral-norm bound of the Hessian, exact for every catalog entry.
    fn lipschitz(&self) -> f64 {
        match self.kind {
            // diag(c, 0)
            IntegrandKind::AffineQuadratic { c, .. } => c.abs(),
            // −2 I
            IntegrandKind::NegNormSq => 2.0,
            // diag(−sin ξ, −cos η)
            IntegrandKind::SinCos => 1.0,
            IntegrandKind::QuadraticG { c } => c.abs(),
            // diag(c cos ξ, 0)
            IntegrandKind::CosineWell { c } => c.abs(),
            IntegrandKind::Zero => 0.0,
        }
    }
}

/// Largest observed `|∇f(p) − ∇f(q)| / |p − q|` over `n_samples` random pairs
/// drawn uniformly from the disk of the given radius.
pub fn empirical_lipschitz<I: Integrand + ?Sized>(
    integrand: &I,
    n_samples: usize,
    radius: f64,
    seed: u64,
) -> Result<f64> {
    if n_samples < 2 || !(radius > 0.0) {
        return Err(Error::Precondition(
            "empirical_lipschitz needs n_samples >= 2 and radius > 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut disk = move || {
        let rho = radius * rng.random::<f64>().sqrt();
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        (rho * theta.cos(), rho * theta.sin())
    };
    let mut worst = 0.0_f64;
    for _ in 0..n_samples {
        let p = disk();
        let q = disk();
        let dist = (p.0 - q.0).hypot(p.1 - q.1);
        if dist == 0.0 {
            continue;
        }
        let gp = integrand.gradient(p.0, p.1);
        let gq = integrand.gradient(q.0, q.1);
        worst = worst.max((gp.0 - gq.0).hypot(gp.1 - gq.1) / dist);
    }
    Ok(worst)
}

/// Number of quasi-random probes used by [`validate_g`].
pub const G_PROBES: usize = 10_000;
/// Radius of the probing disk used by [`validate_g`].
pub const G_PROBE_RADIUS: f64 = 100.0;
/// Most negative `g` value tolerated at a probe.
pub const G_NEGATIVITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GViolation {
    pub reason: String,
    pub point: (f64, f64),
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GValidation {
    pub pass: bool,
    pub nu: f64,
    pub violation: Option<GViolation>,
}

fn radical_inverse(mut index: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * inv;
        index /= base;
        inv /= base as f64;
    }
    out
}

/// Checks the hypotheses on `g`: `g(0) = 0`, `g ≥ 0` (sampled on a Halton
/// set in a disk of radius 100) and `ν < 2`.
pub fn validate_g<I: Integrand + ?Sized>(g: &I) -> GValidation {
    let nu = g.lipschitz();
    let fail = |reason: &str, point: (f64, f64), value: f64| GValidation {
        pass: false,
        nu,
        violation: Some(GViolation {
            reason: reason.to_string(),
            point,
            value,
        }),
    };

    let at_origin = g.value(0.0, 0.0);
    if at_origin != 0.0 {
        return fail("g(0) = 0 violated", (0.0, 0.0), at_origin);
    }
    if !(nu < 2.0) {
        return fail("ν<2 violated", (0.0, 0.0), nu);
    }
    for i in 1..=G_PROBES {
        let rho = G_PROBE_RADIUS * radical_inverse(i, 2).sqrt();
        let theta = std::f64::consts::TAU * radical_inverse(i, 3);
        let p = (rho * theta.cos(), rho * theta.sin());
        let value = g.value(p.0, p.1);
        if !(value >= -G_NEGATIVITY_TOL) {
            return fail("g >= 0 violated", p, value);
        }
    }
    GValidation {
        pass: true,
        nu,
        violation: None,
    }
}
