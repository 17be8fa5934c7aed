//! Integral functionals `u ↦ ∫ f(u, u′)` and their derivatives.
//!
//! The derivative of `J` at `u` is the linear functional
//! `v ↦ ∫ (f_ξ(u, u′) v + f_η(u, u′) v′)`, assembled against the hat basis.
//! The result is a [`DualVector`]; turning it into an H¹ direction goes
//! through [`GalerkinSpace::riesz`].

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::galerkin::{Field, GalerkinSpace, Subspace};
use crate::integrand::Integrand;

/// Assembled linear functional: `entries[i] = ℓ(φ_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    pub entries: DVector<f64>,
}

impl DualVector {
    pub fn new(entries: DVector<f64>) -> Self {
        Self { entries }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(DVector::zeros(len))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `ℓ(v)`.
    pub fn pair(&self, v: &Field) -> f64 {
        self.entries.dot(&v.coeffs)
    }

    /// `self + factor * other`
    pub fn add_scaled(&self, factor: f64, other: &DualVector) -> Self {
        Self::new(&self.entries + &other.entries * factor)
    }

    pub fn sub(&self, other: &DualVector) -> Self {
        Self::new(&self.entries - &other.entries)
    }

    /// H¹ representative of the functional.
    pub fn riesz(&self, space: &GalerkinSpace) -> Result<Field> {
        space.riesz(&self.entries)
    }

    /// Dual (H¹) norm, i.e. the H¹ norm of the Riesz representative.
    pub fn dual_norm(&self, space: &GalerkinSpace) -> Result<f64> {
        Ok(self.entries.dot(&self.riesz(space)?.coeffs).max(0.0).sqrt())
    }
}

/// `∫ f(u(x), u′(x)) dx` by element-wise Gauss quadrature.
pub fn eval_functional<I: Integrand + ?Sized>(
    space: &GalerkinSpace,
    integrand: &I,
    u: &Field,
) -> Result<f64> {
    Ok(space
        .eval_at_quad(u)?
        .iter()
        .map(|s| s.weight * integrand.value(s.value, s.slope))
        .sum())
}

/// Entries `∫ (f_ξ(u, u′) φ_i + f_η(u, u′) φ_i′) dx`.
pub fn assemble_derivative<I: Integrand + ?Sized>(
    space: &GalerkinSpace,
    integrand: &I,
    u: &Field,
) -> Result<DualVector> {
    let inv_h = 1.0 / space.element_length();
    let mut entries = DVector::zeros(space.n_nodes());
    for s in space.eval_at_quad(u)? {
        let (d_xi, d_eta) = integrand.gradient(s.value, s.slope);
        // φ_left = 1 − t, φ_right = t; slopes −1/h and +1/h.
        entries[s.elem] += s.weight * (d_xi * (1.0 - s.t) - d_eta * inv_h);
        entries[s.elem + 1] += s.weight * (d_xi * s.t + d_eta * inv_h);
    }
    Ok(DualVector::new(entries))
}

/// Number of random directions probed by [`fd_gradient_check`].
pub const FD_DIRECTIONS: usize = 20;

/// Worst relative disagreement between `⟨J′(u), d⟩` and the central
/// difference `(J(u + hd) − J(u − hd)) / 2h` over random unit directions `d`.
///
/// The relative error is measured against `max(|analytic|, |numeric|)`, with
/// a floor of `1e-8 (1 + |J(u)|)` so that rounding in near-zero directional
/// derivatives is not amplified. Both sides vanishing counts as error 0.
pub fn fd_gradient_check<I: Integrand + ?Sized>(
    space: &GalerkinSpace,
    integrand: &I,
    u: &Field,
    h: f64,
    seed: u64,
) -> Result<f64> {
    let derivative = assemble_derivative(space, integrand, u)?;
    let base = eval_functional(space, integrand, u)?;
    let floor = 1e-8 * (1.0 + base.abs());
    let at_u = space.eval_at_quad(u)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..FD_DIRECTIONS {
        let d = space.random_field(&Subspace::Full, 1.0, &mut rng)?;
        let analytic = derivative.pair(&d);
        // Differencing per quadrature point keeps the cancellation local.
        let numeric: f64 = at_u
            .iter()
            .zip(space.eval_at_quad(&d)?)
            .map(|(s, t)| {
                let plus = integrand.value(s.value + h * t.value, s.slope + h * t.slope);
                let minus = integrand.value(s.value - h * t.value, s.slope - h * t.slope);
                s.weight * (plus - minus)
            })
            .sum::<f64>()
            / (2.0 * h);
        let diff = (analytic - numeric).abs();
        if diff == 0.0 {
            continue;
        }
        let scale = analytic.abs().max(numeric.abs()).max(floor);
        worst = worst.max(diff / scale);
    }
    Ok(worst)
}
