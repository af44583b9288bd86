//! Pointwise quaternionic and exterior algebra on `R^{4n}`.
//!
//! Conventions:
//! * 2-forms are stored with both indices lowered, `psi[(a, b)] = psi(e_a, e_b)`.
//! * Endomorphisms act on column vectors, `A[(i, j)] = (A e_j)^i`.
//! * A form and an endomorphism are identified by `g(A X, Y) = psi(X, Y)`.
//! * The inner product on `Λ²` is normalised so that
//!   `<X∧Y, Z∧V> = g(X,Z) g(Y,V) - g(X,V) g(Y,Z)`, i.e.
//!   `<a, b> = 1/2 a_{kl} b^{kl}`. With this choice every Kähler form has
//!   squared norm `2n`.
//! * Coordinates are grouped `(x, x_i, x_j, x_k)` per quaternionic factor.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use log::warn;
use nalgebra::{DMatrix, DVector, Matrix3, Quaternion};

use crate::{QkError, Result};

/// Chart coordinates of a point.
pub type Point = DVector<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct TangentVec(pub DVector<f64>);

/// A covector, kept apart from [`TangentVec`] so that index placement is
/// visible in signatures.
#[derive(Debug, Clone, PartialEq)]
pub struct OneForm(pub DVector<f64>);

/// Antisymmetric bilinear form with lowered indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoForm(DMatrix<f64>);

/// Endomorphism of the tangent space (one index up, one down).
#[derive(Debug, Clone, PartialEq)]
pub struct Endo(pub DMatrix<f64>);

impl TangentVec {
    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[k] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl OneForm {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl TwoForm {
    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    /// Antisymmetric part of an arbitrary square matrix. Exact
    /// antisymmetry holds bit-for-bit afterwards.
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "two-form needs a square matrix");
        let t = m.transpose();
        Self((m - t) * 0.5)
    }

    /// `e^a ∧ e^b` in coordinates (flat normalisation).
    pub fn elementary(dim: usize, a: usize, b: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(a, b)] += 1.0;
        m[(b, a)] -= 1.0;
        Self(m)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn eval(&self, x: &TangentVec, y: &TangentVec) -> f64 {
        x.0.dot(&(&self.0 * &y.0))
    }

    /// `psi(A·, A·)`.
    pub fn pullback(&self, a: &DMatrix<f64>) -> TwoForm {
        TwoForm::from_matrix(a.transpose() * &self.0 * a)
    }

    /// Coordinate Frobenius norm; not the `Λ²` norm (see [`Metric::norm`]).
    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    /// Upper-triangular components, the natural flat parametrisation.
    pub fn upper_components(&self) -> Vec<f64> {
        let m = self.dim();
        let mut out = Vec::with_capacity(m * (m - 1) / 2);
        for a in 0..m {
            for b in a + 1..m {
                out.push(self.0[(a, b)]);
            }
        }
        out
    }

    pub fn from_upper_components(dim: usize, c: &[f64]) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        let mut it = c.iter();
        for a in 0..dim {
            for b in a + 1..dim {
                let v = *it.next().expect("too few components");
                m[(a, b)] = v;
                m[(b, a)] = -v;
            }
        }
        Self(m)
    }
}

impl Add for TwoForm {
    type Output = TwoForm;
    fn add(self, rhs: TwoForm) -> TwoForm {
        TwoForm(self.0 + rhs.0)
    }
}

impl Add<&TwoForm> for &TwoForm {
    type Output = TwoForm;
    fn add(self, rhs: &TwoForm) -> TwoForm {
        TwoForm(&self.0 + &rhs.0)
    }
}

impl AddAssign<&TwoForm> for TwoForm {
    fn add_assign(&mut self, rhs: &TwoForm) {
        self.0 += &rhs.0;
    }
}

impl Sub for TwoForm {
    type Output = TwoForm;
    fn sub(self, rhs: TwoForm) -> TwoForm {
        TwoForm(self.0 - rhs.0)
    }
}

impl Sub<&TwoForm> for &TwoForm {
    type Output = TwoForm;
    fn sub(self, rhs: &TwoForm) -> TwoForm {
        TwoForm(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for TwoForm {
    type Output = TwoForm;
    fn mul(self, s: f64) -> TwoForm {
        TwoForm(self.0 * s)
    }
}

impl Mul<f64> for &TwoForm {
    type Output = TwoForm;
    fn mul(self, s: f64) -> TwoForm {
        TwoForm(&self.0 * s)
    }
}

impl Neg for TwoForm {
    type Output = TwoForm;
    fn neg(self) -> TwoForm {
        TwoForm(-self.0)
    }
}

/// Riemannian metric at a point together with its inverse and a
/// `g`-orthonormal frame.
#[derive(Debug, Clone)]
pub struct Metric {
    g: DMatrix<f64>,
    inv: DMatrix<f64>,
    /// Columns are the frame vectors `e_k`.
    frame: DMatrix<f64>,
}

impl Metric {
    /// Validates symmetry (relative 1e-12) and positivity; the frame is
    /// `L^{-T}` for the Cholesky factor `g = L L^T`.
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        if !g.is_square() {
            return Err(QkError::DimensionMismatch { expected: g.nrows(), got: g.ncols() });
        }
        let scale = g.amax().max(f64::MIN_POSITIVE);
        let asym = (&g - g.transpose()).amax() / scale;
        if asym > 1e-12 {
            return Err(QkError::MetricNotSymmetric(asym));
        }
        let chol = nalgebra::Cholesky::new(g.clone()).ok_or(QkError::MetricNotPositive)?;
        let l = chol.l();
        let dim = g.nrows();
        let l_inv = l
            .solve_lower_triangular(&DMatrix::identity(dim, dim))
            .ok_or(QkError::MetricNotPositive)?;
        let frame = l_inv.transpose();
        let inv = chol.inverse();
        Ok(Self { g, inv, frame })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            g: DMatrix::identity(dim, dim),
            inv: DMatrix::identity(dim, dim),
            frame: DMatrix::identity(dim, dim),
        }
    }

    /// Same metric, different orthonormal frame. Fails if the columns of
    /// `frame` are not `g`-orthonormal to 1e-10.
    pub fn with_frame(&self, frame: DMatrix<f64>) -> Result<Self> {
        let dim = self.dim();
        let gram = frame.transpose() * &self.g * &frame;
        let res = (gram - DMatrix::<f64>::identity(dim, dim)).amax();
        if res > 1e-10 {
            return Err(QkError::Precondition(format!("frame is not orthonormal (residual {res:e})")));
        }
        Ok(Self { frame, ..self.clone() })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inv
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn frame_vec(&self, k: usize) -> TangentVec {
        TangentVec(self.frame.column(k).into_owned())
    }

    pub fn dot(&self, x: &TangentVec, y: &TangentVec) -> f64 {
        x.0.dot(&(&self.g * &y.0))
    }

    pub fn vec_norm(&self, x: &TangentVec) -> f64 {
        self.dot(x, x).max(0.0).sqrt()
    }

    pub fn lower(&self, x: &TangentVec) -> OneForm {
        OneForm(&self.g * &x.0)
    }

    pub fn raise(&self, a: &OneForm) -> TangentVec {
        TangentVec(&self.inv * &a.0)
    }

    /// `<a, b> = 1/2 a_{kl} b^{kl}`.
    pub fn inner(&self, a: &TwoForm, b: &TwoForm) -> f64 {
        let raised = &self.inv * b.matrix() * &self.inv;
        0.5 * a.matrix().component_mul(&raised).sum()
    }

    pub fn norm(&self, a: &TwoForm) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    /// Endomorphism `A` with `g(A X, Y) = psi(X, Y)`.
    pub fn form_to_endo(&self, psi: &TwoForm) -> Endo {
        Endo(&self.inv * psi.matrix().transpose())
    }

    /// Inverse of [`Metric::form_to_endo`]; the antisymmetric part is kept.
    pub fn endo_to_form(&self, a: &Endo) -> TwoForm {
        TwoForm::from_matrix(a.0.transpose() * &self.g)
    }

    /// Relative deviation of `A` from being `g`-skew.
    pub fn skewness(&self, a: &Endo) -> f64 {
        let ga = &self.g * &a.0;
        let res = (&ga + ga.transpose()).amax();
        res / ga.amax().max(f64::MIN_POSITIVE)
    }
}

/// `<a, b>` with dimension checks.
pub fn lambda2_inner(g: &Metric, a: &TwoForm, b: &TwoForm) -> Result<f64> {
    for d in [a.dim(), b.dim()] {
        if d != g.dim() {
            return Err(QkError::DimensionMismatch { expected: g.dim(), got: d });
        }
    }
    Ok(g.inner(a, b))
}

/// Convenience wrapper for `form_to_endo`.
pub fn form_endo_convert(g: &Metric, psi: &TwoForm) -> Endo {
    g.form_to_endo(psi)
}

/// `X ∧ Y` with both vectors lowered by `g`.
pub fn wedge(x: &TangentVec, y: &TangentVec, g: &Metric) -> TwoForm {
    wedge_covectors(&g.lower(x), &g.lower(y))
}

pub fn wedge_covectors(a: &OneForm, b: &OneForm) -> TwoForm {
    let m = &a.0 * b.0.transpose();
    let t = m.transpose();
    TwoForm(m - t)
}

/// `i_X psi = psi(X, ·)`.
pub fn interior(x: &TangentVec, psi: &TwoForm) -> OneForm {
    OneForm(psi.matrix().tr_mul(&x.0))
}

/// The 2-form of the commutator `[A, Psi]`, i.e.
/// `([A, psi])(X, Y) = -psi(AX, Y) - psi(X, AY)` when `A` is `g`-skew.
pub fn endo_bracket_on_form(a: &Endo, psi: &TwoForm, g: &Metric) -> TwoForm {
    let skew = g.skewness(a);
    if skew > 1e-8 {
        warn!("endo_bracket_on_form: endomorphism is not g-skew (relative residual {skew:e})");
    }
    let p = g.form_to_endo(psi);
    let c = &a.0 * &p.0 - &p.0 * &a.0;
    g.endo_to_form(&Endo(c))
}

/// Residuals of the admissible-basis invariants.
#[derive(Debug, Clone, Copy, Default)]
pub struct BasisResiduals {
    pub square: f64,
    pub anticommute: f64,
    pub product: f64,
    pub compatible: f64,
    pub kahler_norm: f64,
}

impl BasisResiduals {
    pub fn max(&self) -> f64 {
        self.square
            .max(self.anticommute)
            .max(self.product)
            .max(self.compatible)
            .max(self.kahler_norm)
    }
}

/// A local admissible basis `(J1, J2, J3)` of the quaternionic bundle with
/// its Kähler forms `omega_a = g(J_a ·, ·)`.
#[derive(Debug, Clone)]
pub struct AdmissibleBasis {
    pub j: [Endo; 3],
    pub omega: [TwoForm; 3],
}

impl AdmissibleBasis {
    /// Build from the three complex structures and validate every invariant
    /// against `tol`.
    pub fn new(g: &Metric, j: [DMatrix<f64>; 3], tol: f64) -> Result<Self> {
        for ja in &j {
            if ja.nrows() != g.dim() {
                return Err(QkError::DimensionMismatch { expected: g.dim(), got: ja.nrows() });
            }
        }
        if g.dim() % 4 != 0 || g.dim() < 8 {
            return Err(QkError::DimensionTooSmall(g.dim() / 4));
        }
        let [j1, j2, j3] = j;
        let j = [Endo(j1), Endo(j2), Endo(j3)];
        let omega = [g.endo_to_form(&j[0]), g.endo_to_form(&j[1]), g.endo_to_form(&j[2])];
        let basis = Self { j, omega };
        basis.validate(g, tol)?;
        Ok(basis)
    }

    /// Build from Kähler forms (raised with `g`).
    pub fn from_forms(g: &Metric, omega: [TwoForm; 3], tol: f64) -> Result<Self> {
        let j = [
            g.form_to_endo(&omega[0]).0,
            g.form_to_endo(&omega[1]).0,
            g.form_to_endo(&omega[2]).0,
        ];
        Self::new(g, j, tol)
    }

    pub fn dim(&self) -> usize {
        self.j[0].0.nrows()
    }

    pub fn n(&self) -> usize {
        self.dim() / 4
    }

    pub fn residuals(&self, g: &Metric) -> BasisResiduals {
        let dim = self.dim();
        let id = DMatrix::<f64>::identity(dim, dim);
        let j = |a: usize| &self.j[a].0;
        let mut r = BasisResiduals::default();
        for a in 0..3 {
            r.square = r.square.max((j(a) * j(a) + &id).amax());
            for b in a + 1..3 {
                r.anticommute = r.anticommute.max((j(a) * j(b) + j(b) * j(a)).amax());
            }
            let pulled = j(a).transpose() * g.matrix() * j(a);
            r.compatible = r.compatible.max((pulled - g.matrix()).amax() / g.matrix().amax());
        }
        r.product = (j(0) * j(1) - j(2)).amax();
        let two_n = (dim / 2) as f64;
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { two_n } else { 0.0 };
                let got = g.inner(&self.omega[a], &self.omega[b]);
                r.kahler_norm = r.kahler_norm.max((got - want).abs() / two_n);
            }
        }
        r
    }

    pub fn validate(&self, g: &Metric, tol: f64) -> Result<()> {
        let r = self.residuals(g);
        let checks = [
            ("J_a^2 = -Id", r.square),
            ("J_a J_b + J_b J_a = 0", r.anticommute),
            ("J3 = J1 J2", r.product),
            ("g(J_a., J_a.) = g", r.compatible),
            ("<omega_a, omega_b> = 2n delta_ab", r.kahler_norm),
        ];
        for (name, residual) in checks {
            if !(residual <= tol) {
                return Err(QkError::InvalidBasis { name, residual, tol });
            }
        }
        Ok(())
    }

    /// The basis `J'_a = Σ_b rot[(a, b)] J_b` for `rot ∈ SO(3)`.
    pub fn rotated(&self, g: &Metric, rot: &Matrix3<f64>) -> Self {
        let dim = self.dim();
        let mut j: [DMatrix<f64>; 3] = std::array::from_fn(|_| DMatrix::zeros(dim, dim));
        for (a, ja) in j.iter_mut().enumerate() {
            for b in 0..3 {
                *ja += &self.j[b].0 * rot[(a, b)];
            }
        }
        let [j1, j2, j3] = j;
        let j = [Endo(j1), Endo(j2), Endo(j3)];
        let omega = [g.endo_to_form(&j[0]), g.endo_to_form(&j[1]), g.endo_to_form(&j[2])];
        Self { j, omega }
    }

    /// Gram matrix `<omega_a, other.omega_b> / 2n`.
    pub fn overlap(&self, other: &AdmissibleBasis, g: &Metric) -> Matrix3<f64> {
        let two_n = (self.dim() / 2) as f64;
        Matrix3::from_fn(|a, b| g.inner(&self.omega[a], &other.omega[b]) / two_n)
    }

    /// Rotate within `SO(3)` to best match `reference` (orthogonal
    /// Procrustes on the overlap matrix).
    pub fn aligned_to(&self, reference: &AdmissibleBasis, g: &Metric) -> Self {
        let m = reference.overlap(self, g);
        let svd = m.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let d = (u * vt).determinant().signum();
        let fix = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, d));
        let rot = u * fix * vt;
        self.rotated(g, &rot)
    }
}

/// Right multiplication by a quaternion on `H^n ≅ R^{4n}`.
pub fn right_multiplication(n: usize, u: Quaternion<f64>) -> DMatrix<f64> {
    let dim = 4 * n;
    let mut m = DMatrix::zeros(dim, dim);
    for block in 0..n {
        for c in 0..4 {
            let e = quaternion_unit(c);
            let img = e * u;
            let comps = [img.w, img.i, img.j, img.k];
            for (r, v) in comps.iter().enumerate() {
                m[(4 * block + r, 4 * block + c)] = *v;
            }
        }
    }
    m
}

/// `1, i, j, k` for `c = 0, 1, 2, 3`.
pub fn quaternion_unit(c: usize) -> Quaternion<f64> {
    match c {
        0 => Quaternion::new(1.0, 0.0, 0.0, 0.0),
        1 => Quaternion::new(0.0, 1.0, 0.0, 0.0),
        2 => Quaternion::new(0.0, 0.0, 1.0, 0.0),
        3 => Quaternion::new(0.0, 0.0, 0.0, 1.0),
        _ => panic!("quaternion unit index {c} out of range"),
    }
}

/// Flat model: identity metric; `J1`, `J2` are right multiplication by
/// `i`, `j` and `J3 = J1 J2` (right multiplication by `-k`).
pub fn standard_flat_basis(n: usize) -> Result<(Metric, AdmissibleBasis)> {
    if n < 2 {
        return Err(QkError::DimensionTooSmall(n));
    }
    let g = Metric::identity(4 * n);
    let j1 = right_multiplication(n, quaternion_unit(1));
    let j2 = right_multiplication(n, quaternion_unit(2));
    let j3 = &j1 * &j2;
    let basis = AdmissibleBasis::new(&g, [j1, j2, j3], 1e-12)?;
    Ok((g, basis))
}

/// The three-way splitting `psi = s2h + s2e + hw`.
#[derive(Debug, Clone)]
pub struct SplitForm {
    pub s2h: TwoForm,
    pub s2e: TwoForm,
    pub hw: TwoForm,
}

impl SplitForm {
    pub fn compatible(&self) -> TwoForm {
        &self.s2h + &self.s2e
    }
}

/// Coefficients `c_i = 1/(4n) Σ_k psi(e_k, J_i e_k)` over the metric's
/// orthonormal frame, so that `psi^{S²H} = Σ_i c_i omega_i`.
pub fn s2h_coefficients(psi: &TwoForm, basis: &AdmissibleBasis, g: &Metric) -> [f64; 3] {
    let dim = g.dim() as f64;
    let e = g.frame();
    let et_psi = e.transpose() * psi.matrix();
    std::array::from_fn(|i| (&et_psi * &basis.j[i].0 * e).trace() / dim)
}

pub fn s2h_part(psi: &TwoForm, basis: &AdmissibleBasis, g: &Metric) -> TwoForm {
    let c = s2h_coefficients(psi, basis, g);
    let mut out = TwoForm::zeros(psi.dim());
    for i in 0..3 {
        out += &(&basis.omega[i] * c[i]);
    }
    out
}

/// `1/4 (psi + Σ_i psi(J_i ·, J_i ·))`.
pub fn s2e_part(psi: &TwoForm, basis: &AdmissibleBasis) -> TwoForm {
    let mut acc = psi.matrix().clone();
    for j in &basis.j {
        acc += j.0.transpose() * psi.matrix() * &j.0;
    }
    TwoForm::from_matrix(acc * 0.25)
}

pub fn project(psi: &TwoForm, basis: &AdmissibleBasis, g: &Metric) -> SplitForm {
    let s2h = s2h_part(psi, basis, g);
    let s2e = s2e_part(psi, basis);
    let hw = &(psi - &s2h) - &s2e;
    SplitForm { s2h, s2e, hw }
}

/// Orthonormal basis `{e^k ∧ e^l}_{k<l}` of `Λ²` built from the metric's frame.
pub fn lambda2_basis(g: &Metric) -> Vec<TwoForm> {
    let dim = g.dim();
    let lowered = g.matrix() * g.frame();
    let mut out = Vec::with_capacity(dim * (dim - 1) / 2);
    for k in 0..dim {
        for l in k + 1..dim {
            let a = OneForm(lowered.column(k).into_owned());
            let b = OneForm(lowered.column(l).into_owned());
            out.push(wedge_covectors(&a, &b));
        }
    }
    out
}

/// Orthonormal basis of `S²H ⊕ S²E`: first the three normalised Kähler
/// forms, then `n(2n+1)` forms spanning `S²E`.
pub fn compatible_basis(g: &Metric, basis: &AdmissibleBasis) -> Vec<TwoForm> {
    let n = basis.n();
    let scale = 1.0 / ((2 * n) as f64).sqrt();
    let mut out: Vec<TwoForm> = basis.omega.iter().map(|w| w * scale).collect();
    out.extend(s2e_basis(g, basis));
    out
}

/// Orthonormal basis of `S²E` (dimension `n(2n+1)`).
pub fn s2e_basis(g: &Metric, basis: &AdmissibleBasis) -> Vec<TwoForm> {
    let lam = lambda2_basis(g);
    let k = lam.len();
    let images: Vec<TwoForm> = lam.iter().map(|b| s2e_part(b, basis)).collect();
    let proj = DMatrix::from_fn(k, k, |a, b| g.inner(&images[b], &lam[a]));
    let sym = (&proj + proj.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let n = basis.n();
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    idx.into_iter()
        .take(n * (2 * n + 1))
        .map(|c| {
            let mut f = TwoForm::zeros(g.dim());
            for (a, la) in lam.iter().enumerate() {
                f += &(la * eig.eigenvectors[(a, c)]);
            }
            f
        })
        .collect()
}

/// Dense totally antisymmetric tensor of arbitrary degree with lowered
/// indices, stored in full (`dim^degree` entries).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseForm {
    pub degree: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl DenseForm {
    pub fn zeros(degree: usize, dim: usize) -> Self {
        Self { degree, dim, data: vec![0.0; dim.pow(degree as u32)] }
    }

    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let i = self.index(idx);
        self.data[i] = v;
    }

    /// `(alpha ∧ beta)(a,b,c) = alpha(a) beta(b,c) + alpha(b) beta(c,a) + alpha(c) beta(a,b)`.
    pub fn one_wedge_two(alpha: &OneForm, beta: &TwoForm) -> Self {
        let dim = alpha.dim();
        let b = beta.matrix();
        let mut out = Self::zeros(3, dim);
        for x in 0..dim {
            for y in 0..dim {
                for z in 0..dim {
                    let v = alpha.0[x] * b[(y, z)] + alpha.0[y] * b[(z, x)] + alpha.0[z] * b[(x, y)];
                    out.data[(x * dim + y) * dim + z] = v;
                }
            }
        }
        out
    }

    pub fn axpy(&mut self, s: f64, other: &DenseForm) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Norm `(1/k! T_{a..} T^{a..})^{1/2}`, evaluated in the metric's
    /// orthonormal frame.
    pub fn norm(&self, g: &Metric) -> f64 {
        let t = transform_slots(&self.data, self.dim, self.degree, g.frame());
        let fact: f64 = (1..=self.degree).map(|x| x as f64).product();
        (t.iter().map(|v| v * v).sum::<f64>() / fact).sqrt()
    }
}

/// `T'_{i1..ik} = Σ A_{p1 i1} .. A_{pk ik} T_{p1..pk}` for a dense tensor of
/// the given degree (row-major, every slot of length `dim`).
pub fn transform_slots(data: &[f64], dim: usize, degree: usize, a: &DMatrix<f64>) -> Vec<f64> {
    let mut t = data.to_vec();
    let mut next = vec![0.0; t.len()];
    for slot in 0..degree {
        let stride = dim.pow((degree - 1 - slot) as u32);
        for (flat, out) in next.iter_mut().enumerate() {
            let k = (flat / stride) % dim;
            let base = flat - k * stride;
            let mut s = 0.0;
            for i in 0..dim {
                s += a[(i, k)] * t[base + i * stride];
            }
            *out = s;
        }
        std::mem::swap(&mut t, &mut next);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_rotation3, random_two_form, seeded};
    use proptest::prelude::*;

    fn flat(n: usize) -> (Metric, AdmissibleBasis) {
        standard_flat_basis(n).unwrap()
    }

    #[test]
    fn flat_basis_quaternion_action() {
        let (_, b) = flat(2);
        let j1 = &b.j[0].0;
        // J1 e0 = e1, J1 e1 = -e0, J1 e4 = e5
        assert_eq!(j1[(1, 0)], 1.0);
        assert_eq!(j1[(0, 1)], -1.0);
        assert_eq!(j1[(5, 4)], 1.0);
        assert_eq!(&b.j[0].0 * &b.j[1].0, b.j[2].0);
    }

    #[test]
    fn rejects_small_n() {
        assert!(matches!(standard_flat_basis(1), Err(QkError::DimensionTooSmall(1))));
    }

    #[test]
    fn kahler_norms() {
        for n in 2..=4 {
            let (g, b) = flat(n);
            assert!((g.inner(&b.omega[0], &b.omega[0]) - 2.0 * n as f64).abs() < 1e-14);
            assert!(g.inner(&b.omega[0], &b.omega[1]).abs() < 1e-14);
        }
        let (g, b) = flat(2);
        assert_eq!(g.inner(&b.omega[2], &b.omega[2]), 4.0);
    }

    #[test]
    fn decomposable_inner_products() {
        let g = Metric::identity(8);
        let e01 = TwoForm::elementary(8, 0, 1);
        let e23 = TwoForm::elementary(8, 2, 3);
        assert_eq!(lambda2_inner(&g, &e01, &e01).unwrap(), 1.0);
        assert_eq!(lambda2_inner(&g, &e01, &e23).unwrap(), 0.0);
        assert!(lambda2_inner(&g, &e01, &TwoForm::zeros(4)).is_err());
    }

    #[test]
    fn kahler_form_spans_s2h() {
        let (g, b) = flat(2);
        let s = project(&b.omega[0], &b, &g);
        assert!((&s.s2h - &b.omega[0]).frobenius() < 1e-14);
        assert!(s.s2e.frobenius() < 1e-14);
        assert!(s.hw.frobenius() < 1e-14);
    }

    #[test]
    fn elementary_form_s2h_coefficient() {
        let (g, b) = flat(2);
        let c = s2h_coefficients(&TwoForm::elementary(8, 0, 1), &b, &g);
        assert!((c[0] - 0.25).abs() < 1e-15);
        assert!(c[1].abs() < 1e-15 && c[2].abs() < 1e-15);
    }

    #[test]
    fn splitting_is_orthogonal_and_complete() {
        let (g, b) = flat(2);
        let mut rng = seeded(11);
        for _ in 0..50 {
            let psi = random_two_form(8, &mut rng);
            let s = project(&psi, &b, &g);
            let rebuilt = &(&s.s2h + &s.s2e) + &s.hw;
            assert!((&rebuilt - &psi).frobenius() <= 1e-12 * psi.frobenius());
            let scale = g.inner(&psi, &psi);
            assert!(g.inner(&s.s2h, &s.s2e).abs() < 1e-10 * scale);
            assert!(g.inner(&s.s2h, &s.hw).abs() < 1e-10 * scale);
            assert!(g.inner(&s.s2e, &s.hw).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn projections_are_idempotent() {
        let (g, b) = flat(2);
        let mut rng = seeded(12);
        let psi = random_two_form(8, &mut rng);
        let s = project(&psi, &b, &g);
        let e2 = project(&s.s2e, &b, &g);
        assert!((&e2.s2e - &s.s2e).frobenius() < 1e-12);
        assert!(e2.s2h.frobenius() < 1e-12 && e2.hw.frobenius() < 1e-12);
        let h2 = project(&s.s2h, &b, &g);
        assert!((&h2.s2h - &s.s2h).frobenius() < 1e-12);
        assert!(h2.s2e.frobenius() < 1e-12 && h2.hw.frobenius() < 1e-12);
        let w2 = project(&s.hw, &b, &g);
        assert!((&w2.hw - &s.hw).frobenius() < 1e-12);
    }

    #[test]
    fn s2e_is_type_one_one() {
        let (g, b) = flat(2);
        let mut rng = seeded(13);
        let s = project(&random_two_form(8, &mut rng), &b, &g);
        for j in &b.j {
            assert!((&s.s2e.pullback(&j.0) - &s.s2e).frobenius() < 1e-12);
        }
        // and a generic hw form is not
        assert!((&s.hw.pullback(&b.j[0].0) - &s.hw).frobenius() > 1e-3);
    }

    #[test]
    fn splitting_dimensions() {
        let (g, b) = flat(2);
        assert_eq!(s2e_basis(&g, &b).len(), 10);
        let cb = compatible_basis(&g, &b);
        assert_eq!(cb.len(), 13);
        for (i, x) in cb.iter().enumerate() {
            for (j, y) in cb.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g.inner(x, y) - want).abs() < 1e-12);
            }
            assert!(project(x, &b, &g).hw.frobenius() < 1e-12);
        }
    }

    #[test]
    fn form_endo_round_trip() {
        let (g, b) = flat(2);
        assert_eq!(g.form_to_endo(&b.omega[0]).0, b.j[0].0);
        assert_eq!(g.form_to_endo(&TwoForm::zeros(8)).0, DMatrix::zeros(8, 8));
        // non-flat metric
        let mut rng = seeded(5);
        let a = DMatrix::from_fn(8, 8, |_, _| rand::Rng::gen_range(&mut rng, -0.3..0.3));
        let gm = Metric::new(DMatrix::identity(8, 8) + &a * a.transpose()).unwrap();
        for _ in 0..20 {
            let psi = random_two_form(8, &mut rng);
            let back = gm.endo_to_form(&gm.form_to_endo(&psi));
            assert!((&back - &psi).frobenius() < 1e-12 * psi.frobenius());
        }
    }

    #[test]
    fn brackets_of_kahler_forms() {
        let (g, b) = flat(2);
        let zero = endo_bracket_on_form(&b.j[0], &b.omega[0], &g);
        assert!(zero.frobenius() < 1e-14);
        let two_w3 = endo_bracket_on_form(&b.j[0], &b.omega[1], &g);
        assert!((&two_w3 - &(&b.omega[2] * 2.0)).frobenius() < 1e-14);
        // brute-force commutator on the endomorphisms
        let c = &b.j[0].0 * &b.j[1].0 - &b.j[1].0 * &b.j[0].0;
        assert!((g.endo_to_form(&Endo(c)) - two_w3).frobenius() < 1e-14);
    }

    #[test]
    fn bracket_is_antisymmetric() {
        let (g, _) = flat(2);
        let mut rng = seeded(14);
        let a = random_two_form(8, &mut rng);
        let p = random_two_form(8, &mut rng);
        let ab = endo_bracket_on_form(&g.form_to_endo(&a), &p, &g);
        let ba = endo_bracket_on_form(&g.form_to_endo(&p), &a, &g);
        assert!((ab + ba).frobenius() < 1e-12);
    }

    #[test]
    fn wedge_and_interior() {
        let g = Metric::identity(8);
        let e0 = TangentVec::basis(8, 0);
        let i = interior(&e0, &TwoForm::elementary(8, 0, 1));
        assert_eq!(i.0, TangentVec::basis(8, 1).0);
        assert_eq!(wedge(&e0, &e0, &g).frobenius(), 0.0);
    }

    #[test]
    fn frame_independence_and_so3_invariance() {
        let (g, b) = flat(2);
        let mut rng = seeded(15);
        let psi = random_two_form(8, &mut rng);
        let base = project(&psi, &b, &g);
        for _ in 0..5 {
            let frame = crate::sampling::random_orthogonal(8, &mut rng);
            let g2 = g.with_frame(frame).unwrap();
            let s = project(&psi, &b, &g2);
            assert!((&s.s2h - &base.s2h).frobenius() < 1e-10);
            let rot = random_rotation3(&mut rng);
            let b2 = b.rotated(&g, &rot);
            b2.validate(&g, 1e-10).unwrap();
            let s = project(&psi, &b2, &g);
            assert!((&s.s2h - &base.s2h).frobenius() < 1e-10);
            assert!((&s.s2e - &base.s2e).frobenius() < 1e-10);
        }
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let (g, b) = flat(2);
        let mut rng = seeded(16);
        let rot = random_rotation3(&mut rng);
        let aligned = b.rotated(&g, &rot).aligned_to(&b, &g);
        for a in 0..3 {
            assert!((&aligned.j[a].0 - &b.j[a].0).amax() < 1e-12);
        }
    }

    #[test]
    fn one_wedge_two_is_alternating() {
        let mut rng = seeded(17);
        let a = OneForm(DVector::from_fn(8, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0)));
        let t = DenseForm::one_wedge_two(&a, &random_two_form(8, &mut rng));
        assert!((t.get(&[1, 2, 3]) + t.get(&[2, 1, 3])).abs() < 1e-14);
        assert!((t.get(&[1, 2, 3]) - t.get(&[2, 3, 1])).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn wedge_interior_duality(seed in any::<u64>()) {
            let mut rng = seeded(seed);
            let a = DMatrix::from_fn(8, 8, |_, _| rand::Rng::gen_range(&mut rng, -0.3..0.3));
            let g = Metric::new(DMatrix::identity(8, 8) + &a * a.transpose()).unwrap();
            let x = TangentVec(DVector::from_fn(8, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0)));
            let y = TangentVec(DVector::from_fn(8, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0)));
            let psi = random_two_form(8, &mut rng);
            let lhs = g.inner(&wedge(&x, &y, &g), &psi);
            prop_assert!((lhs - psi.eval(&x, &y)).abs() <= 1e-12 * (1.0 + lhs.abs()));
            let ix = interior(&x, &psi);
            prop_assert!((ix.0.dot(&y.0) - psi.eval(&x, &y)).abs() < 1e-12);
        }

        #[test]
        fn splitting_reconstructs(seed in any::<u64>()) {
            let (g, b) = standard_flat_basis(2).unwrap();
            let mut rng = seeded(seed);
            let b = b.rotated(&g, &random_rotation3(&mut rng));
            let psi = random_two_form(8, &mut rng);
            let s = project(&psi, &b, &g);
            let rebuilt = &(&s.s2h + &s.s2e) + &s.hw;
            prop_assert!((&rebuilt - &psi).frobenius() <= 1e-12 * psi.frobenius().max(1.0));
        }
    }
}
