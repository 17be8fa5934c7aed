//! P1 finite-element discretization of H¹(a, b).
//!
//! Fields are stored by nodal values on a uniform mesh. The H¹ inner product
//! `⟨u, v⟩ = ∫ (u′v′ + uv)` is represented by the Gram matrix `G = M + K`.
//! All three matrices are tridiagonal; dense copies are kept for inspection
//! while the hot paths (products, Riesz solves) work on the bands.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Gauss order used by [`GalerkinSpace::new`].
pub const DEFAULT_QUAD_ORDER: usize = 4;

/// Residual above which a Riesz solve is reported as failed.
pub const RIESZ_RESIDUAL_TOL: f64 = 1e-10;

/// Gauss–Legendre rule on the reference interval [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(order: usize) -> Result<Self> {
        // Nodes and weights on [-1, 1].
        let (nodes, weights): (&[f64], &[f64]) = match order {
            1 => (&[0.0], &[2.0]),
            2 => (
                &[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8],
                &[1.0, 1.0],
            ),
            3 => (
                &[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
                &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0],
            ),
            4 => (
                &[
                    -0.861_136_311_594_052_6,
                    -0.339_981_043_584_856_3,
                    0.339_981_043_584_856_3,
                    0.861_136_311_594_052_6,
                ],
                &[
                    0.347_854_845_137_453_8,
                    0.652_145_154_862_546_1,
                    0.652_145_154_862_546_1,
                    0.347_854_845_137_453_8,
                ],
            ),
            5 => (
                &[
                    -0.906_179_845_938_664,
                    -0.538_469_310_105_683_1,
                    0.0,
                    0.538_469_310_105_683_1,
                    0.906_179_845_938_664,
                ],
                &[
                    0.236_926_885_056_189_1,
                    0.478_628_670_499_366_5,
                    0.568_888_888_888_888_9,
                    0.478_628_670_499_366_5,
                    0.236_926_885_056_189_1,
                ],
            ),
            other => return Err(Error::QuadratureOrder(other)),
        };
        Ok(Self {
            points: nodes.iter().map(|s| 0.5 * (1.0 + s)).collect(),
            weights: weights.iter().map(|w| 0.5 * w).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Symmetric tridiagonal matrix with a cached Cholesky factor.
#[derive(Debug, Clone)]
struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
    chol_diag: Vec<f64>,
    chol_sub: Vec<f64>,
}

impl Tridiagonal {
    fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        let n = diag.len();
        let mut chol_diag = vec![0.0; n];
        let mut chol_sub = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut d = diag[i];
            if i > 0 {
                d -= chol_sub[i - 1] * chol_sub[i - 1];
            }
            chol_diag[i] = d.sqrt();
            if i + 1 < n {
                chol_sub[i] = off[i] / chol_diag[i];
            }
        }
        Self {
            diag,
            off,
            chol_diag,
            chol_sub,
        }
    }

    fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.diag.len();
        DVector::from_fn(n, |i, _| {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            s
        })
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = self.diag.len();
        let mut y = rhs.clone();
        for i in 0..n {
            if i > 0 {
                y[i] -= self.chol_sub[i - 1] * y[i - 1];
            }
            y[i] /= self.chol_diag[i];
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                y[i] -= self.chol_sub[i] * y[i + 1];
            }
            y[i] /= self.chol_diag[i];
        }
        y
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.diag.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if i + 1 == j {
                self.off[i]
            } else if j + 1 == i {
                self.off[j]
            } else {
                0.0
            }
        })
    }
}

/// Discrete function: nodal coefficients in the P1 hat basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub coeffs: DVector<f64>,
}

impl Serialize for Field {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.coeffs.iter())
    }
}

impl Field {
    pub fn new(coeffs: DVector<f64>) -> Self {
        Self { coeffs }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self::new(DVector::from_vec(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(DVector::zeros(len))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(&self.coeffs * factor)
    }

    /// `self + factor * other`
    pub fn add_scaled(&self, factor: f64, other: &Field) -> Self {
        Self::new(&self.coeffs + &other.coeffs * factor)
    }

    pub fn sub(&self, other: &Field) -> Self {
        Self::new(&self.coeffs - &other.coeffs)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn max_abs_deviation(&self, value: f64) -> f64 {
        self.coeffs
            .iter()
            .fold(0.0_f64, |m, c| m.max((c - value).abs()))
    }
}

/// One quadrature point of [`GalerkinSpace::eval_at_quad`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSample {
    pub elem: usize,
    /// Local coordinate in [0, 1] within the element.
    pub t: f64,
    pub x: f64,
    /// Physical weight (reference weight times element length).
    pub weight: f64,
    pub value: f64,
    pub slope: f64,
}

/// Uniform P1 discretization of H¹(a, b).
#[derive(Debug, Clone)]
pub struct GalerkinSpace {
    a: f64,
    b: f64,
    n_elems: usize,
    h: f64,
    nodes: Vec<f64>,
    mass: Tridiagonal,
    stiffness: Tridiagonal,
    gram: Tridiagonal,
    quad: GaussRule,
}

impl GalerkinSpace {
    pub fn new(a: f64, b: f64, n_elems: usize) -> Result<Self> {
        Self::with_quadrature(a, b, n_elems, DEFAULT_QUAD_ORDER)
    }

    pub fn with_quadrature(a: f64, b: f64, n_elems: usize, quad_order: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidDomain { a, b });
        }
        if n_elems == 0 {
            return Err(Error::EmptyMesh);
        }
        let quad = GaussRule::new(quad_order)?;
        let n = n_elems + 1;
        let h = (b - a) / n_elems as f64;
        let nodes = (0..n)
            .map(|i| if i == n_elems { b } else { a + i as f64 * h })
            .collect();

        // Element matrices: mass h/6 [2 1; 1 2], stiffness 1/h [1 -1; -1 1].
        let mut m_diag = vec![0.0; n];
        let mut k_diag = vec![0.0; n];
        for e in 0..n_elems {
            m_diag[e] += h / 3.0;
            m_diag[e + 1] += h / 3.0;
            k_diag[e] += 1.0 / h;
            k_diag[e + 1] += 1.0 / h;
        }
        let m_off = vec![h / 6.0; n_elems];
        let k_off = vec![-1.0 / h; n_elems];
        let g_diag = m_diag.iter().zip(&k_diag).map(|(m, k)| m + k).collect();
        let g_off = m_off.iter().zip(&k_off).map(|(m, k)| m + k).collect();

        Ok(Self {
            a,
            b,
            n_elems,
            h,
            nodes,
            mass: Tridiagonal::new(m_diag, m_off.clone()),
            stiffness: Tridiagonal::new(k_diag, k_off.clone()),
            gram: Tridiagonal::new(g_diag, g_off),
            quad,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn measure(&self) -> f64 {
        self.b - self.a
    }

    pub fn n_elems(&self) -> usize {
        self.n_elems
    }

    pub fn n_nodes(&self) -> usize {
        self.n_elems + 1
    }

    pub fn element_length(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn quadrature(&self) -> &GaussRule {
        &self.quad
    }

    pub fn mass(&self) -> DMatrix<f64> {
        self.mass.to_dense()
    }

    pub fn stiffness(&self) -> DMatrix<f64> {
        self.stiffness.to_dense()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        self.gram.to_dense()
    }

    pub fn mass_mul(&self, u: &Field) -> Result<DVector<f64>> {
        self.check(u)?;
        Ok(self.mass.mul(&u.coeffs))
    }

    pub fn stiffness_mul(&self, u: &Field) -> Result<DVector<f64>> {
        self.check(u)?;
        Ok(self.stiffness.mul(&u.coeffs))
    }

    pub fn gram_mul(&self, u: &Field) -> Result<DVector<f64>> {
        self.check(u)?;
        Ok(self.gram.mul(&u.coeffs))
    }

    pub fn check(&self, u: &Field) -> Result<()> {
        self.check_len(u.len())
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_nodes() {
            return Err(Error::Shape {
                expected: self.n_nodes(),
                got: len,
            });
        }
        Ok(())
    }

    pub fn zero_field(&self) -> Field {
        Field::zeros(self.n_nodes())
    }

    pub fn constant(&self, value: f64) -> Field {
        Field::new(DVector::from_element(self.n_nodes(), value))
    }

    /// Nodal interpolant of `func`.
    pub fn interpolate(&self, func: impl Fn(f64) -> f64) -> Field {
        Field::from_vec(self.nodes.iter().map(|&x| func(x)).collect())
    }

    /// `⟨u, v⟩ = uᵀ G v`.
    pub fn h1_inner(&self, u: &Field, v: &Field) -> Result<f64> {
        self.check(v)?;
        Ok(self.gram_mul(u)?.dot(&v.coeffs))
    }

    /// `‖u‖² = ∫ (|u′|² + |u|²)`.
    pub fn h1_norm_sq(&self, u: &Field) -> Result<f64> {
        // Rounding can leave a tiny negative value for near-zero fields.
        Ok(self.h1_inner(u, u)?.max(0.0))
    }

    pub fn h1_norm(&self, u: &Field) -> Result<f64> {
        Ok(self.h1_norm_sq(u)?.sqrt())
    }

    pub fn h1_distance(&self, u: &Field, v: &Field) -> Result<f64> {
        self.check(v)?;
        self.h1_norm(&u.sub(v))
    }

    /// Values and slopes at every quadrature point, element by element.
    pub fn eval_at_quad(&self, u: &Field) -> Result<Vec<QuadSample>> {
        self.check(u)?;
        let mut out = Vec::with_capacity(self.n_elems * self.quad.len());
        for e in 0..self.n_elems {
            let (u0, u1) = (u.coeffs[e], u.coeffs[e + 1]);
            let slope = (u1 - u0) / self.h;
            for (&t, &w) in self.quad.points.iter().zip(&self.quad.weights) {
                out.push(QuadSample {
                    elem: e,
                    t,
                    x: self.nodes[e] + t * self.h,
                    weight: w * self.h,
                    value: (1.0 - t) * u0 + t * u1,
                    slope,
                });
            }
        }
        Ok(out)
    }

    /// Solves `G w = dual`, so that `⟨w, v⟩ = dualᵀ v` for every field `v`.
    pub fn riesz(&self, dual: &DVector<f64>) -> Result<Field> {
        self.check_len(dual.len())?;
        let w = self.gram.solve(dual);
        let scale = dual.amax();
        if scale > 0.0 {
            let residual = (self.gram.mul(&w) - dual).amax() / scale;
            if !(residual <= RIESZ_RESIDUAL_TOL) {
                return Err(Error::SolverFailure { residual });
            }
        } else if !w.iter().all(|x| x.is_finite()) {
            return Err(Error::SolverFailure {
                residual: f64::NAN,
            });
        }
        Ok(Field::new(w))
    }

    /// Standard-normal nodal coefficients, projected onto `subspace` and
    /// rescaled to H¹ norm `norm`. Returns the zero field if the projection
    /// vanishes.
    pub fn random_field<R: Rng + ?Sized>(
        &self,
        subspace: &Subspace,
        norm: f64,
        rng: &mut R,
    ) -> Result<Field> {
        let raw = Field::from_vec(
            (0..self.n_nodes())
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
        let projected = subspace.project(self, &raw)?;
        let current = self.h1_norm(&projected)?;
        if current == 0.0 {
            return Ok(projected);
        }
        Ok(projected.scaled(norm / current))
    }
}

/// Closed linear subspace `V` of the discrete H¹ space.
#[derive(Debug, Clone, PartialEq)]
pub enum Subspace {
    /// The whole space, no boundary conditions.
    Full,
    /// First and last nodal values fixed to zero.
    ZeroBoundary,
    /// Span of G-orthonormal columns.
    Custom { basis: DMatrix<f64> },
}

/// Allowed deviation of `QᵀGQ` from the identity for custom bases.
pub const ORTHONORMAL_TOL: f64 = 1e-12;

impl Subspace {
    /// Wraps a basis whose columns must already be G-orthonormal.
    pub fn custom(space: &GalerkinSpace, basis: DMatrix<f64>) -> Result<Self> {
        space.check_len(basis.nrows())?;
        if basis.ncols() > 0 {
            let mut gq = DMatrix::zeros(basis.nrows(), basis.ncols());
            for (j, c) in basis.column_iter().enumerate() {
                gq.set_column(j, &space.gram.mul(&c.into_owned()));
            }
            let gram = basis.transpose() * gq;
            let deviation = (gram - DMatrix::identity(basis.ncols(), basis.ncols())).amax();
            if !(deviation <= ORTHONORMAL_TOL) {
                return Err(Error::NotOrthonormal { deviation });
            }
        }
        Ok(Subspace::Custom { basis })
    }

    /// G-orthonormalizes `vectors` (Gram–Schmidt, two passes) and drops
    /// numerically dependent ones.
    pub fn from_spanning(space: &GalerkinSpace, vectors: &[Field]) -> Result<Self> {
        let mut columns: Vec<DVector<f64>> = Vec::new();
        for v in vectors {
            space.check(v)?;
            let original = space.h1_norm(v)?;
            let mut w = v.coeffs.clone();
            for _ in 0..2 {
                for q in &columns {
                    let coef = space.gram.mul(q).dot(&w);
                    w -= q * coef;
                }
            }
            let norm = space.gram.mul(&w).dot(&w).max(0.0).sqrt();
            if norm > 1e-10 * original.max(f64::MIN_POSITIVE) {
                columns.push(w / norm);
            }
        }
        let basis = if columns.is_empty() {
            DMatrix::zeros(space.n_nodes(), 0)
        } else {
            DMatrix::from_columns(&columns)
        };
        Self::custom(space, basis)
    }

    /// G-orthogonal projection of `u` onto the subspace.
    pub fn project(&self, space: &GalerkinSpace, u: &Field) -> Result<Field> {
        space.check(u)?;
        match self {
            Subspace::Full => Ok(u.clone()),
            Subspace::ZeroBoundary => {
                // P u = u − G⁻¹B (BᵀG⁻¹B)⁻¹ Bᵀu with B = [e_first, e_last].
                let n = space.n_nodes();
                let last = n - 1;
                let mut e0 = DVector::zeros(n);
                e0[0] = 1.0;
                let mut e1 = DVector::zeros(n);
                e1[last] = 1.0;
                let z0 = space.gram.solve(&e0);
                let z1 = space.gram.solve(&e1);
                let (s00, s01, s11) = (z0[0], z0[last], z1[last]);
                let det = s00 * s11 - s01 * s01;
                let (b0, b1) = (u.coeffs[0], u.coeffs[last]);
                let y0 = (s11 * b0 - s01 * b1) / det;
                let y1 = (s00 * b1 - s01 * b0) / det;
                let mut out = &u.coeffs - z0 * y0 - z1 * y1;
                out[0] = 0.0;
                out[last] = 0.0;
                Ok(Field::new(out))
            }
            Subspace::Custom { basis } => {
                space.check_len(basis.nrows())?;
                if basis.ncols() == 0 {
                    return Ok(space.zero_field());
                }
                let coords = basis.transpose() * space.gram.mul(&u.coeffs);
                Ok(Field::new(basis * coords))
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Subspace::Full => "full",
            Subspace::ZeroBoundary => "zero_boundary",
            Subspace::Custom { .. } => "custom",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn single_element_matrices() {
        let space = GalerkinSpace::new(0.0, 1.0, 1).unwrap();
        let m = space.mass();
        let k = space.stiffness();
        let expected_m = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]];
        let expected_k = [[1.0, -1.0], [-1.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_close(m[(i, j)], expected_m[i][j], 1e-15);
                assert_close(k[(i, j)], expected_k[i][j], 1e-15);
            }
        }
    }

    #[test]
    fn mass_partition_of_unity() {
        let space = GalerkinSpace::new(0.0, 1.0, 64).unwrap();
        assert_close(space.mass().sum(), 1.0, 1e-14);
    }

    #[test]
    fn stiffness_kills_constants() {
        let space = GalerkinSpace::new(0.0, 2.0, 8).unwrap();
        let k1 = space.stiffness_mul(&space.constant(1.0)).unwrap();
        assert!(k1.amax() < 1e-13);
    }

    #[test]
    fn gram_is_spd() {
        let space = GalerkinSpace::new(-1.0, 3.0, 16).unwrap();
        let g = space.gram();
        assert_eq!(g, g.transpose());
        assert!(g.cholesky().is_some());
    }

    #[test]
    fn invalid_domains() {
        assert!(matches!(
            GalerkinSpace::new(1.0, 1.0, 4),
            Err(Error::InvalidDomain { .. })
        ));
        assert!(matches!(
            GalerkinSpace::new(f64::NAN, 1.0, 4),
            Err(Error::InvalidDomain { .. })
        ));
        assert!(matches!(
            GalerkinSpace::new(0.0, f64::INFINITY, 4),
            Err(Error::InvalidDomain { .. })
        ));
        assert!(matches!(GalerkinSpace::new(0.0, 1.0, 0), Err(Error::EmptyMesh)));
        assert!(matches!(
            GalerkinSpace::with_quadrature(0.0, 1.0, 4, 7),
            Err(Error::QuadratureOrder(7))
        ));
    }

    #[test]
    fn norm_examples() {
        let space = GalerkinSpace::new(0.0, 1.0, 32).unwrap();
        assert_eq!(space.h1_norm_sq(&space.zero_field()).unwrap(), 0.0);
        assert_close(space.h1_norm_sq(&space.constant(3.0)).unwrap(), 9.0, 1e-12);
        // ∫ (1 + x²) dx = 4/3, exact for the P1 interpolant of x.
        let x = space.interpolate(|x| x);
        assert_close(space.h1_norm_sq(&x).unwrap(), 4.0 / 3.0, 1e-12);
    }

    #[test]
    fn inner_examples() {
        let space = GalerkinSpace::new(0.0, 1.0, 10).unwrap();
        let u = space.interpolate(|x| x.sin());
        assert_eq!(space.h1_inner(&u, &space.zero_field()).unwrap(), 0.0);
        assert_close(
            space
                .h1_inner(&space.constant(2.0), &space.constant(-1.5))
                .unwrap(),
            -3.0,
            1e-12,
        );
        assert_close(
            space.h1_inner(&u, &u).unwrap(),
            space.h1_norm_sq(&u).unwrap(),
            1e-15,
        );
    }

    #[test]
    fn shape_errors() {
        let space = GalerkinSpace::new(0.0, 1.0, 4).unwrap();
        let bad = Field::zeros(3);
        assert!(matches!(
            space.h1_norm_sq(&bad),
            Err(Error::Shape {
                expected: 5,
                got: 3
            })
        ));
        assert!(space.h1_inner(&space.zero_field(), &bad).is_err());
        assert!(space.eval_at_quad(&bad).is_err());
        assert!(space.riesz(&DVector::zeros(2)).is_err());
        assert!(Subspace::Full.project(&space, &bad).is_err());
    }

    #[test]
    fn quadrature_samples() {
        let space = GalerkinSpace::new(0.0, 1.0, 8).unwrap();
        for s in space.eval_at_quad(&space.constant(5.0)).unwrap() {
            assert_close(s.value, 5.0, 1e-15);
            assert_eq!(s.slope, 0.0);
        }
        let x = space.interpolate(|x| x);
        let samples = space.eval_at_quad(&x).unwrap();
        assert_eq!(samples.len(), 8 * 4);
        for s in &samples {
            assert_close(s.slope, 1.0, 1e-12);
            assert_close(s.value, s.x, 1e-15);
        }
        let total: f64 = samples.iter().map(|s| s.weight).sum();
        assert_close(total, 1.0, 1e-14);

        let single = GalerkinSpace::new(0.0, 0.25, 1).unwrap();
        let ramp = Field::from_vec(vec![0.0, 1.0]);
        for s in single.eval_at_quad(&ramp).unwrap() {
            assert_close(s.slope, 4.0, 1e-14);
        }
    }

    #[test]
    fn quadrature_reproduces_mass_matrix() {
        let space = GalerkinSpace::new(-0.5, 1.5, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = space.random_field(&Subspace::Full, 2.0, &mut rng).unwrap();
        let v = space.random_field(&Subspace::Full, 1.0, &mut rng).unwrap();
        let su = space.eval_at_quad(&u).unwrap();
        let sv = space.eval_at_quad(&v).unwrap();
        let quad: f64 = su.iter().zip(&sv).map(|(a, b)| a.weight * a.value * b.value).sum();
        let exact = space.mass_mul(&u).unwrap().dot(&v.coeffs);
        assert_close(quad, exact, 1e-13);
    }

    #[test]
    fn riesz_examples() {
        let space = GalerkinSpace::new(0.0, 1.0, 16).unwrap();
        let w = space.riesz(&DVector::zeros(17)).unwrap();
        assert_eq!(w.coeffs.amax(), 0.0);

        // ℓ(v) = ∫ v is represented by the constant 1.
        let ell = space.mass_mul(&space.constant(1.0)).unwrap();
        let w = space.riesz(&ell).unwrap();
        assert!(w.max_abs_deviation(1.0) < 1e-12);

        let c = space.interpolate(|x| (3.0 * x).cos() - x * x);
        let w = space.riesz(&space.gram_mul(&c).unwrap()).unwrap();
        assert!(w.sub(&c).coeffs.amax() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let space = GalerkinSpace::new(0.0, 1.0, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = space.random_field(&Subspace::Full, 1.0, &mut rng).unwrap();

        assert_eq!(Subspace::Full.project(&space, &u).unwrap(), u);

        let p = Subspace::ZeroBoundary.project(&space, &u).unwrap();
        assert_eq!(p.coeffs[0], 0.0);
        assert_eq!(p.coeffs[10], 0.0);
        let pp = Subspace::ZeroBoundary.project(&space, &p).unwrap();
        assert!(pp.sub(&p).coeffs.amax() < 1e-12);
        // G-closest: the residual is G-orthogonal to every interior hat.
        let residual = space.gram_mul(&u.sub(&p)).unwrap();
        for i in 1..10 {
            assert!(residual[i].abs() < 1e-12);
        }

        let empty = Subspace::custom(&space, DMatrix::zeros(11, 0)).unwrap();
        assert_eq!(empty.project(&space, &u).unwrap(), space.zero_field());
    }

    #[test]
    fn single_element_zero_boundary_is_trivial() {
        let space = GalerkinSpace::new(0.0, 1.0, 1).unwrap();
        let p = Subspace::ZeroBoundary
            .project(&space, &Field::from_vec(vec![2.0, -1.0]))
            .unwrap();
        assert_eq!(p, space.zero_field());
    }

    #[test]
    fn custom_subspace_validation() {
        let space = GalerkinSpace::new(0.0, 1.0, 6).unwrap();
        let raw = DMatrix::from_element(7, 1, 1.0);
        // Constant 1 has unit norm on (0, 1): accepted.
        assert!(Subspace::custom(&space, raw).is_ok());
        let raw = DMatrix::from_element(7, 1, 2.0);
        assert!(matches!(
            Subspace::custom(&space, raw),
            Err(Error::NotOrthonormal { .. })
        ));
        assert!(matches!(
            Subspace::custom(&space, DMatrix::zeros(5, 1)),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn spanning_set_is_orthonormalized() {
        let space = GalerkinSpace::new(0.0, 2.0, 20).unwrap();
        let vectors = vec![
            space.constant(3.0),
            space.interpolate(|x| x),
            space.interpolate(|x| 2.0 * x + 1.0),
            space.interpolate(|x| x * x),
        ];
        let sub = Subspace::from_spanning(&space, &vectors).unwrap();
        let Subspace::Custom { basis } = &sub else {
            panic!("expected custom subspace");
        };
        assert_eq!(basis.ncols(), 3);
        let u = space.interpolate(|x| 1.0 - 4.0 * x);
        let p = sub.project(&space, &u).unwrap();
        assert!(p.sub(&u).coeffs.amax() < 1e-10);
    }
}
