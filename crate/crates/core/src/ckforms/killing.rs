use nalgebra::{DMatrix, Quaternion};
use serde::{Deserialize, Serialize};

use super::fields::{Provenance, VecField};
use crate::fd::FdScheme;
use crate::manifolds::ChartModel;
use crate::qalg::{project, quaternion_unit, Point, TangentVec, TwoForm};
use crate::Result;

/// Square quaternionic matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QuatMatrix {
    pub size: usize,
    pub entries: Vec<Quaternion<f64>>,
}

impl QuatMatrix {
    pub fn zeros(size: usize) -> Self {
        Self { size, entries: vec![Quaternion::new(0.0, 0.0, 0.0, 0.0); size * size] }
    }

    pub fn get(&self, r: usize, c: usize) -> Quaternion<f64> {
        self.entries[r * self.size + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Quaternion<f64>) {
        self.entries[r * self.size + c] = v;
    }

    pub fn mul(&self, other: &QuatMatrix) -> QuatMatrix {
        let s = self.size;
        let mut out = QuatMatrix::zeros(s);
        for r in 0..s {
            for c in 0..s {
                let mut acc = Quaternion::new(0.0, 0.0, 0.0, 0.0);
                for k in 0..s {
                    acc += self.get(r, k) * other.get(k, c);
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    /// `AB - BA`.
    pub fn commutator(&self, other: &QuatMatrix) -> QuatMatrix {
        let ab = self.mul(other);
        let ba = other.mul(self);
        QuatMatrix { size: self.size, entries: ab.entries.iter().zip(&ba.entries).map(|(a, b)| a - b).collect() }
    }

    /// Real components, four per entry.
    pub fn to_real(&self) -> Vec<f64> {
        self.entries.iter().flat_map(|q| [q.w, q.i, q.j, q.k]).collect()
    }

    /// `max |Ā^T + A|`.
    pub fn antihermitian_residual(&self) -> f64 {
        let s = self.size;
        let mut worst: f64 = 0.0;
        for r in 0..s {
            for c in 0..s {
                let d = self.get(c, r).conjugate() + self.get(r, c);
                worst = worst.max(d.coords.amax());
            }
        }
        worst
    }

    /// `v ↦ A v` on a quaternionic column.
    pub fn apply(&self, v: &[Quaternion<f64>]) -> Vec<Quaternion<f64>> {
        (0..self.size)
            .map(|r| (0..self.size).fold(Quaternion::new(0.0, 0.0, 0.0, 0.0), |acc, c| acc + self.get(r, c) * v[c]))
            .collect()
    }
}

/// Basis of `sp(n+1)`: imaginary diagonal entries, then off-diagonal pairs
/// `(x, -x̄)` for `x ∈ {1, i, j, k}`.
pub fn sp_basis(n: usize) -> Vec<QuatMatrix> {
    let s = n + 1;
    let mut out = Vec::new();
    for d in 0..s {
        for c in 1..4 {
            let mut a = QuatMatrix::zeros(s);
            a.set(d, d, quaternion_unit(c));
            out.push(a);
        }
    }
    for r in 0..s {
        for c in r + 1..s {
            for u in 0..4 {
                let x = quaternion_unit(u);
                let mut a = QuatMatrix::zeros(s);
                a.set(r, c, x);
                a.set(c, r, -x.conjugate());
                out.push(a);
            }
        }
    }
    out
}

/// A Killing field of `HP^n` with its generating matrix.
#[derive(Debug, Clone)]
pub struct KillingField {
    pub label: String,
    pub matrix: QuatMatrix,
    pub field: VecField,
}

fn to_quats(p: &Point) -> Vec<Quaternion<f64>> {
    (0..p.len() / 4).map(|a| Quaternion::new(p[4 * a], p[4 * a + 1], p[4 * a + 2], p[4 * a + 3])).collect()
}

/// `X_A(q) = head(A q̂) - q tail(A q̂)`, `q̂ = (q, 1)`: the infinitesimal
/// action of `A` on the chart `q ↦ [q : 1]` (right module convention).
pub fn killing_vector(a: &QuatMatrix, p: &Point) -> TangentVec {
    let n = a.size - 1;
    let mut qh = to_quats(p);
    qh.push(Quaternion::new(1.0, 0.0, 0.0, 0.0));
    let img = a.apply(&qh);
    let t = img[n];
    let mut out = nalgebra::DVector::zeros(4 * n);
    for r in 0..n {
        let v = img[r] - qh[r] * t;
        out[4 * r] = v.w;
        out[4 * r + 1] = v.i;
        out[4 * r + 2] = v.j;
        out[4 * r + 3] = v.k;
    }
    TangentVec(out)
}

/// The `(n+1)(2n+3)` Killing fields induced by [`sp_basis`].
pub fn killing_fields_hpn(n: usize) -> Vec<KillingField> {
    sp_basis(n)
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            let m = a.clone();
            KillingField {
                label: format!("X{i}"),
                matrix: a,
                field: VecField::new(Provenance::closed_form("sp(n+1) action"), move |p| Ok(killing_vector(&m, p))),
            }
        })
        .collect()
}

/// Killing diagnostics of a vector field at a point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KillingReport {
    /// `max |(L_X g)_{ij}|`.
    pub lie_derivative: f64,
    pub divergence: f64,
    /// Relative size of the `hw` part of the 2-form `∇X`.
    pub hw_part: f64,
}

pub fn killing_check(model: &ChartModel, x: &VecField, p: &Point, scheme: FdScheme) -> Result<KillingReport> {
    let nx: DMatrix<f64> = model.nabla_vec(|q| x.eval(q), p, scheme)?;
    let geo = model.point_geometry(p)?;
    let low = nx.transpose() * geo.g.matrix();
    let lie = (&low + low.transpose()).amax();
    let form = TwoForm::from_matrix(low);
    let norm = geo.g.norm(&form);
    let hw = geo.g.norm(&project(&form, &geo.basis, &geo.g).hw);
    Ok(KillingReport { lie_derivative: lie, divergence: nx.trace().abs(), hw_part: if norm > 0.0 { hw / norm } else { 0.0 } })
}
