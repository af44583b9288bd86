//! Seeded random generators shared by checks, tests and the CLI.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::qalg::{standard_flat_basis, AdmissibleBasis, Metric, TangentVec, TwoForm};

pub type Rng64 = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Components uniform in `[-1, 1]`.
pub fn random_vector(dim: usize, rng: &mut Rng64) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_tangent(dim: usize, rng: &mut Rng64) -> TangentVec {
    TangentVec(random_vector(dim, rng))
}

pub fn random_two_form(dim: usize, rng: &mut Rng64) -> TwoForm {
    let mut m = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in a + 1..dim {
            let v = rng.gen_range(-1.0..1.0);
            m[(a, b)] = v;
            m[(b, a)] = -v;
        }
    }
    TwoForm::from_matrix(m)
}

/// Point uniformly distributed in the ball of the given radius.
pub fn random_point_in_ball(dim: usize, radius: f64, rng: &mut Rng64) -> DVector<f64> {
    loop {
        let v = random_vector(dim, rng);
        if v.norm() <= 1.0 {
            return v * radius;
        }
    }
}

/// Haar-ish orthogonal matrix (QR of a Gaussian-like matrix, sign fixed).
pub fn random_orthogonal(dim: usize, rng: &mut Rng64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..dim {
        if r[(k, k)] < 0.0 {
            let col = -q.column(k);
            q.set_column(k, &col);
        }
    }
    q
}

/// Random element of `SO(3)` from a random unit quaternion.
pub fn random_rotation3(rng: &mut Rng64) -> Matrix3<f64> {
    let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let angle = rng.gen_range(0.0..std::f64::consts::PI);
    let axis = nalgebra::Unit::new_normalize(axis);
    *nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix()
}

/// A random metric `g = AᵀA` with a random admissible basis for it: the
/// flat structure conjugated by `A` after a random orthogonal change and a
/// random rotation of the triple.
pub fn random_structure(n: usize, rng: &mut Rng64) -> crate::Result<(Metric, AdmissibleBasis)> {
    let dim = 4 * n;
    let (g0, b0) = standard_flat_basis(n)?;
    let o = random_orthogonal(dim, rng);
    let rotated = b0.rotated(&g0, &random_rotation3(rng));
    let a = DMatrix::identity(dim, dim) + DMatrix::from_fn(dim, dim, |_, _| 0.3 * rng.gen_range(-1.0..1.0));
    let ai = a.clone().try_inverse().ok_or_else(|| crate::QkError::Precondition("singular conjugator".into()))?;
    let g = Metric::new(a.transpose() * &a)?;
    let j = rotated.j.clone().map(|j| &ai * &o * j.0 * o.transpose() * &a);
    let basis = AdmissibleBasis::new(&g, j, 1e-9)?;
    Ok((g, basis))
}
