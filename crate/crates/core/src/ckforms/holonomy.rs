use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::transport::{transport_many, PathSpec};
use crate::curvalg::ProlongSection;
use crate::exec::Exec;
use crate::manifolds::ChartModel;
use crate::qalg::{compatible_basis, Metric, Point, TangentVec, TwoForm};
use crate::sampling::{random_point_in_ball, seeded, Rng64};
use crate::Result;

#[derive(Debug, Clone, Copy)]
pub struct HolonomyOptions {
    pub loops: usize,
    pub steps_per_segment: usize,
    /// Waypoints stay within this distance of the base point.
    pub radius: f64,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for HolonomyOptions {
    fn default() -> Self {
        Self { loops: 64, steps_per_segment: 200, radius: 0.3, seed: 0, exec: Exec::Parallel }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolonomyReport {
    pub loop_count: usize,
    /// Singular values of the stacked `H_j - I`, ascending.
    pub singular_values: Vec<f64>,
    pub fixed_dim: usize,
    pub gap_ratio: f64,
    /// Values below this count as fixed directions.
    pub threshold: f64,
    /// Largest singular value of the stacked `H_j` (the scale of the test).
    pub reference: f64,
    pub max_drift: f64,
    pub max_basis_mismatch: f64,
}

/// Closed polyline from `base` through 3 to 5 random waypoints, resampled
/// until every waypoint (with `margin`) lies in the chart.
pub fn random_loop(model: &ChartModel, base: &Point, radius: f64, steps: usize, margin: f64, rng: &mut Rng64) -> PathSpec {
    let inner = rng.gen_range(3..=5);
    let mut pts = vec![base.clone()];
    while pts.len() < inner + 1 {
        let w = base + random_point_in_ball(base.len(), radius, rng);
        let fresh = pts.iter().all(|p| (p - &w).norm() > 1e-3 * radius);
        if fresh && model.contains(&w, margin) {
            pts.push(w);
        }
    }
    pts.push(base.clone());
    PathSpec::new(pts, steps)
}

/// Orthonormal-ish coordinates on the fiber `S²H ⊕ S²E ⊕ TM` at a point.
struct FiberCoords {
    forms: Vec<TwoForm>,
    gram_inv: DMatrix<f64>,
    g: Metric,
}

impl FiberCoords {
    fn new(g: &Metric, forms: Vec<TwoForm>) -> Self {
        let k = forms.len();
        let gram = DMatrix::from_fn(k, k, |a, b| g.inner(&forms[a], &forms[b]));
        let gram_inv = gram.try_inverse().expect("compatible basis is independent");
        Self { forms, gram_inv, g: g.clone() }
    }

    fn rank(&self) -> usize {
        self.forms.len() + self.g.dim()
    }

    fn section(&self, i: usize) -> ProlongSection {
        let m = self.g.dim();
        if i < self.forms.len() {
            ProlongSection { psi: self.forms[i].clone(), x: TangentVec::zeros(m) }
        } else {
            ProlongSection { psi: TwoForm::zeros(m), x: self.g.frame_vec(i - self.forms.len()) }
        }
    }

    fn coords(&self, s: &ProlongSection) -> DVector<f64> {
        let k = self.forms.len();
        let proj = DVector::from_iterator(k, self.forms.iter().map(|f| self.g.inner(f, &s.psi)));
        let a = &self.gram_inv * proj;
        let x = self.g.frame().transpose() * self.g.matrix() * &s.x.0;
        DVector::from_iterator(self.rank(), a.iter().cloned().chain(x.iter().cloned()))
    }
}

/// Holonomy matrices of random loops at a base point, in the coordinates
/// of the fiber basis (compatible forms, then frame vectors).
#[derive(Debug, Clone)]
pub struct HolonomyMatrices {
    pub matrices: Vec<DMatrix<f64>>,
    pub max_drift: f64,
    pub max_basis_mismatch: f64,
}

pub fn holonomy_matrices(model: &ChartModel, base: &Point, opts: HolonomyOptions) -> Result<HolonomyMatrices> {
    let geo = model.point_geometry(base)?;
    let fiber = FiberCoords::new(&geo.g, compatible_basis(&geo.g, &geo.basis));
    let r = fiber.rank();
    let mut rng = seeded(opts.seed);
    let margin = 0.05;
    let loops: Vec<PathSpec> =
        (0..opts.loops).map(|_| random_loop(model, base, opts.radius, opts.steps_per_segment, margin, &mut rng)).collect();
    let init: Vec<ProlongSection> = (0..r).map(|i| fiber.section(i)).collect();
    let results: Vec<Result<(DMatrix<f64>, f64, f64)>> = opts.exec.map(loops, |path| {
        let out = transport_many(model, &path, init.clone())?;
        let mut h = DMatrix::zeros(r, r);
        for (c, s) in out.sections.iter().enumerate() {
            h.set_column(c, &fiber.coords(s));
        }
        Ok((h, out.drift, out.basis_mismatch))
    });
    let mut out = HolonomyMatrices { matrices: Vec::with_capacity(opts.loops), max_drift: 0.0, max_basis_mismatch: 0.0 };
    for res in results {
        let (h, d, mm) = res?;
        out.max_drift = out.max_drift.max(d);
        out.max_basis_mismatch = out.max_basis_mismatch.max(mm);
        out.matrices.push(h);
    }
    Ok(out)
}

/// Count `𝒟`-parallel sections by transporting the whole fiber basis
/// around random loops and measuring the common fixed space.
pub fn holonomy_dimension(model: &ChartModel, base: &Point, opts: HolonomyOptions) -> Result<HolonomyReport> {
    let hm = holonomy_matrices(model, base, opts)?;
    let r = hm.matrices.first().map_or(0, |h| h.nrows());
    let mut stacked = DMatrix::zeros(r * opts.loops, r);
    let mut stacked_h = DMatrix::zeros(r * opts.loops, r);
    for (j, h) in hm.matrices.iter().enumerate() {
        stacked.view_mut((j * r, 0), (r, r)).copy_from(&(h - DMatrix::identity(r, r)));
        stacked_h.view_mut((j * r, 0), (r, r)).copy_from(h);
    }
    Ok(fixed_space_report(&stacked, &stacked_h, opts.loops, hm.max_drift, hm.max_basis_mismatch))
}

fn fixed_space_report(stacked: &DMatrix<f64>, stacked_h: &DMatrix<f64>, loops: usize, drift: f64, mismatch: f64) -> HolonomyReport {
    let mut sv: Vec<f64> = stacked.clone().svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(f64::total_cmp);
    let reference = stacked_h.clone().svd(false, false).singular_values.max();
    let threshold = 1e-6 * reference;
    let floor = 1e-15 * reference;
    let fixed_dim = sv.iter().filter(|s| **s < threshold).count();
    let above = sv.get(fixed_dim).cloned().unwrap_or(reference);
    let below = if fixed_dim == 0 { floor } else { sv[fixed_dim - 1].max(floor) };
    HolonomyReport {
        loop_count: loops,
        singular_values: sv,
        fixed_dim,
        gap_ratio: above / below,
        threshold,
        reference,
        max_drift: drift,
        max_basis_mismatch: mismatch,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_space_counts_identity_blocks() {
        let r = 4;
        let mut h = DMatrix::identity(r, r);
        h[(3, 3)] = 2.0;
        let stacked = &h - DMatrix::identity(r, r);
        let rep = fixed_space_report(&stacked, &h, 1, 0.0, 0.0);
        assert_eq!(rep.fixed_dim, 3);
        assert!(rep.gap_ratio > 1e10);
        assert!(rep.singular_values.windows(2).all(|w| w[0] <= w[1]));
    }
}
