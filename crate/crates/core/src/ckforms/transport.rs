use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fields::{FormField, Provenance, VecField};
use crate::curvalg::ProlongSection;
use crate::manifolds::{ChartModel, Christoffel, PointGeometry};
use crate::qalg::{project, AdmissibleBasis, Endo, Point, TangentVec, TwoForm};
use crate::{QkError, Result};

/// A piecewise straight path in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub waypoints: Vec<Vec<f64>>,
    pub steps_per_segment: usize,
}

/// Accumulated `hw` drift beyond which transport is abandoned.
pub const DRIFT_LIMIT: f64 = 1e-5;

impl PathSpec {
    pub fn new(waypoints: Vec<Point>, steps_per_segment: usize) -> Self {
        Self { waypoints: waypoints.iter().map(|p| p.as_slice().to_vec()).collect(), steps_per_segment }
    }

    pub fn segment(a: &Point, b: &Point, steps: usize) -> Self {
        Self::new(vec![a.clone(), b.clone()], steps)
    }

    pub fn points(&self) -> Vec<Point> {
        self.waypoints.iter().map(|w| DVector::from_vec(w.clone())).collect()
    }

    pub fn is_closed(&self) -> bool {
        match (self.waypoints.first(), self.waypoints.last()) {
            (Some(a), Some(b)) => self.waypoints.len() > 1 && a == b,
            _ => false,
        }
    }

    pub fn check(&self, model: &ChartModel) -> Result<()> {
        if self.waypoints.len() < 2 || self.steps_per_segment == 0 {
            return Err(QkError::Precondition("a path needs two waypoints and at least one step".into()));
        }
        for w in self.points() {
            model.check_point(&w, 0.0)?;
        }
        Ok(())
    }
}

/// Sections transported to the end of a path.
#[derive(Debug, Clone)]
pub struct TransportOutcome {
    pub sections: Vec<ProlongSection>,
    /// Largest accumulated relative `hw` component removed on the way.
    pub drift: f64,
    /// Largest deviation between the carried quaternionic structure and
    /// the one recovered from curvature, checked at every waypoint.
    pub basis_mismatch: f64,
    pub steps: usize,
    pub end: Point,
    pub end_geometry: PointGeometry,
}

/// Metric, connection and admissible basis at an RK4 node, with the
/// products the right-hand side needs precomputed for a fixed direction.
struct Frame {
    geo: PointGeometry,
    nu: f64,
    n: usize,
    /// `Γ(v, ·)`.
    mm: DMatrix<f64>,
    /// `g J_i`.
    gj: [DMatrix<f64>; 3],
    /// `g^{-1} ω_i g^{-1}` (dual of `ω_i` for the `Λ²` inner product).
    wdual: [DMatrix<f64>; 3],
    v: DVector<f64>,
    /// lowered `v` and `J_i v`.
    gv: DVector<f64>,
    gjv: [DVector<f64>; 3],
    /// `J_i v` and `ω_iᵀ v`.
    jv: [DVector<f64>; 3],
    wtv: [DVector<f64>; 3],
}

fn frame(model: &ChartModel, p: &Point, gamma: &Christoffel, j: &[DMatrix<f64>; 3], v: &TangentVec) -> Result<Frame> {
    let g = model.metric_at(p)?;
    let gm = g.matrix();
    let gi = g.inverse();
    let omega = [
        g.endo_to_form(&Endo(j[0].clone())),
        g.endo_to_form(&Endo(j[1].clone())),
        g.endo_to_form(&Endo(j[2].clone())),
    ];
    let gj = [gm * &j[0], gm * &j[1], gm * &j[2]];
    let wdual = [gi * omega[0].matrix() * gi, gi * omega[1].matrix() * gi, gi * omega[2].matrix() * gi];
    let gv = gm * &v.0;
    let gjv = [&gj[0] * &v.0, &gj[1] * &v.0, &gj[2] * &v.0];
    let mm = gamma.along(&v.0);
    let jv = [&j[0] * &v.0, &j[1] * &v.0, &j[2] * &v.0];
    let wtv = [omega[0].matrix().tr_mul(&v.0), omega[1].matrix().tr_mul(&v.0), omega[2].matrix().tr_mul(&v.0)];
    let basis = AdmissibleBasis { j: [Endo(j[0].clone()), Endo(j[1].clone()), Endo(j[2].clone())], omega };
    Ok(Frame {
        geo: PointGeometry { p: p.clone(), g, gamma: gamma.clone(), basis, gap_ratio: f64::INFINITY },
        nu: model.nu(),
        n: model.n(),
        mm,
        v: v.0.clone(),
        gj,
        wdual,
        gv,
        gjv,
        jv,
        wtv,
    })
}

fn rank2(out: &mut DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>, s: f64) {
    out.ger(s, a, b, 1.0);
    out.ger(-s, b, a, 1.0);
}

/// `out = alpha · op(a) · b + beta · out` with `op(a) = aᵀ` when `ta`;
/// plain loops beat the blocked kernel at these sizes.
fn gemm_small(out: &mut DMatrix<f64>, alpha: f64, a: &DMatrix<f64>, ta: bool, b: &DMatrix<f64>, beta: f64) {
    let (m, k) = (out.nrows(), b.nrows());
    let (a_s, b_s) = (a.as_slice(), b.as_slice());
    for (oj, bj) in out.as_mut_slice().chunks_exact_mut(m).zip(b_s.chunks_exact(k)) {
        if ta {
            for (o, ai) in oj.iter_mut().zip(a_s.chunks_exact(k)) {
                let acc: f64 = ai.iter().zip(bj).map(|(x, y)| x * y).sum();
                *o = if beta == 0.0 { alpha * acc } else { alpha * acc + beta * *o };
            }
        } else {
            if beta == 0.0 {
                oj.fill(0.0);
            } else {
                oj.iter_mut().for_each(|o| *o *= beta);
            }
            for (al, blj) in a_s.chunks_exact(m).zip(bj) {
                let w = alpha * blj;
                for (o, x) in oj.iter_mut().zip(al) {
                    *o += w * x;
                }
            }
        }
    }
}

/// `out += a · x`.
fn maxpy(out: &mut DMatrix<f64>, a: f64, x: &DMatrix<f64>) {
    for (o, v) in out.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *o += a * v;
    }
}

/// Scratch buffers for the section updates.
struct Work {
    k: [DMatrix<f64>; 4],
    kx: [DVector<f64>; 4],
    stage: DMatrix<f64>,
    stage_x: DVector<f64>,
    t1: DMatrix<f64>,
    t2: DMatrix<f64>,
    v1: DVector<f64>,
    v2: DVector<f64>,
}

impl Work {
    fn new(m: usize) -> Self {
        let z = || DMatrix::zeros(m, m);
        let zv = || DVector::zeros(m);
        Self { k: [z(), z(), z(), z()], kx: [zv(), zv(), zv(), zv()], stage: z(), stage_x: zv(), t1: z(), t2: z(), v1: zv(), v2: zv() }
    }
}

/// Derivative along `v` of a `𝒟`-parallel section (same formulas as
/// `dcoeff_form` / `dcoeff_vec` with `W = 0`, written out for speed).
fn rhs(
    f: &Frame,
    psi: &DMatrix<f64>,
    x: &DVector<f64>,
    out: &mut DMatrix<f64>,
    out_x: &mut DVector<f64>,
    v1: &mut DVector<f64>,
    v2: &mut DVector<f64>,
) {
    let n = f.n;
    let c = 1.0 / (4 * n - 1) as f64;
    // Γ terms
    gemm_small(out, 1.0, &f.mm, true, psi, 0.0);
    gemm_small(out, 1.0, psi, false, &f.mm, 1.0);
    v1.gemv(1.0, f.geo.g.matrix(), x, 0.0);
    rank2(out, v1, &f.gv, c);
    for i in 0..3 {
        v2.gemv(1.0, &f.gj[i], x, 0.0);
        rank2(out, v2, &f.gjv[i], c);
        // ω_i(X, v) = g(J_i X, v)
        let wv = v2.dot(&f.v);
        maxpy(out, -c * wv, f.geo.basis.omega[i].matrix());
    }
    // dcoeff_vec: (4n-1)/4 · i_v(ν ψ^{S²E} - 2ν ψ^{S²H}), raised; the
    // projections are only needed contracted with v
    v1.gemv_tr(1.0, psi, &f.v, 0.0);
    let mut coeff = [0.0; 3];
    for i in 0..3 {
        v2.gemv_tr(1.0, psi, &f.jv[i], 0.0);
        v1.gemv_tr(1.0, &f.geo.basis.j[i].0, v2, 1.0);
        coeff[i] = psi.dot(&f.wdual[i]) / (4 * n) as f64;
    }
    *v1 *= 0.25 * f.nu;
    for i in 0..3 {
        v1.axpy(-2.0 * f.nu * coeff[i], &f.wtv[i], 1.0);
    }
    out_x.gemv(-1.0, &f.mm, x, 0.0);
    out_x.gemv((4 * n - 1) as f64 / 4.0, f.geo.g.inverse(), v1, 1.0);
}

/// One RK4 step of a section followed by re-projection onto the
/// compatible forms at the end node; returns the relative size of the
/// removed part.
fn step_section(frames: [&Frame; 4], fe: &Frame, h: f64, psi: &mut DMatrix<f64>, x: &mut DVector<f64>, w: &mut Work) -> f64 {
    let Work { k, kx, stage, stage_x, t1, t2, v1, v2 } = w;
    let [k0, k1, k2, k3] = k;
    let [kx0, kx1, kx2, kx3] = kx;
    rhs(frames[0], psi, x, k0, kx0, v1, v2);
    let mut stage_rhs = |f: &Frame, hh: f64, kin: &DMatrix<f64>, kxin: &DVector<f64>, kout: &mut DMatrix<f64>, kxout: &mut DVector<f64>| {
        stage.copy_from(psi);
        maxpy(stage, hh, kin);
        stage_x.copy_from(x);
        stage_x.axpy(hh, kxin, 1.0);
        rhs(f, stage, stage_x, kout, kxout, v1, v2);
    };
    stage_rhs(frames[1], 0.5 * h, k0, kx0, k1, kx1);
    stage_rhs(frames[2], 0.5 * h, k1, kx1, k2, kx2);
    stage_rhs(frames[3], h, k2, kx2, k3, kx3);
    for (wt, kk, kkx) in [(h / 6.0, &*k0, &*kx0), (h / 3.0, &*k1, &*kx1), (h / 3.0, &*k2, &*kx2), (h / 6.0, &*k3, &*kx3)] {
        maxpy(psi, wt, kk);
        x.axpy(wt, kkx, 1.0);
    }
    // compatible part: Σ c_i ω_i + ¼(ψ + Σ J_iᵀ ψ J_i)
    t2.copy_from(psi);
    *t2 *= 0.25;
    for i in 0..3 {
        let ji = &fe.geo.basis.j[i].0;
        gemm_small(t1, 1.0, psi, false, ji, 0.0);
        gemm_small(t2, 0.25, ji, true, t1, 1.0);
        let ci = psi.dot(&fe.wdual[i]) / (4 * fe.n) as f64;
        maxpy(t2, ci, fe.geo.basis.omega[i].matrix());
    }
    let gi = fe.geo.g.inverse();
    let norm_sq = |a: &DMatrix<f64>, s1: &mut DMatrix<f64>, s2: &mut DMatrix<f64>| {
        gemm_small(s1, 1.0, gi, false, a, 0.0);
        gemm_small(s2, 1.0, s1, false, gi, 0.0);
        0.5 * a.dot(s2)
    };
    let total = (norm_sq(psi, k0, k1).max(0.0) + fe.geo.g.matrix().dot(&(x.clone() * x.transpose()))).sqrt();
    t1.copy_from(psi);
    *t1 -= &*t2;
    let removed = norm_sq(t1, k0, k1).max(0.0).sqrt();
    // keep ψ exactly antisymmetric
    let m = psi.nrows();
    for a in 0..m {
        for b in 0..m {
            psi[(a, b)] = 0.5 * (t2[(a, b)] - t2[(b, a)]);
        }
    }
    if total > 0.0 {
        removed / total
    } else {
        0.0
    }
}

/// Derivative of a Levi-Civita parallel endomorphism: `J' = JM - MJ`.
fn rhs_j(mm: &DMatrix<f64>, j: &[DMatrix<f64>; 3]) -> [DMatrix<f64>; 3] {
    [&j[0] * mm - mm * &j[0], &j[1] * mm - mm * &j[1], &j[2] * mm - mm * &j[2]]
}

fn jaxpy(j: &[DMatrix<f64>; 3], h: f64, d: &[DMatrix<f64>; 3]) -> [DMatrix<f64>; 3] {
    [&j[0] + &d[0] * h, &j[1] + &d[1] * h, &j[2] + &d[2] * h]
}

fn structure_mismatch(model: &ChartModel, p: &Point, carried: &AdmissibleBasis, g: &crate::qalg::Metric) -> Result<f64> {
    let geo = model.point_geometry(p)?;
    let sv = carried.overlap(&geo.basis, g).svd(false, false).singular_values;
    Ok(sv.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max))
}

/// Transport several sections along the same path.
///
/// The quaternionic structure is parallel for the Levi-Civita connection,
/// so the admissible basis is carried along with the sections (the
/// curvature-recovered basis is only used at the start and as a check at
/// every waypoint). Each step is followed by re-projection onto the
/// compatible forms; the removed fraction is accumulated as drift.
pub fn transport_many(model: &ChartModel, path: &PathSpec, init: Vec<ProlongSection>) -> Result<TransportOutcome> {
    path.check(model)?;
    let pts = path.points();
    let n = path.steps_per_segment;
    let start = model.point_geometry(&pts[0])?;
    let mut state = Vec::with_capacity(init.len());
    for s in init {
        let split = project(&s.psi, &start.basis, &start.g);
        let scale = s.norm(&start.g);
        let off = start.g.norm(&split.hw);
        if off > 1e-6 * scale.max(1.0) {
            return Err(QkError::Precondition(format!("initial form is not compatible (hw part {off:e})")));
        }
        state.push((split.compatible().into_matrix(), s.x.0));
    }
    let mut work = Work::new(model.dim());
    let mut drift = vec![0.0f64; state.len()];
    let mut mismatch: f64 = 0.0;
    let mut steps = 0;
    let mut j = [start.basis.j[0].0.clone(), start.basis.j[1].0.clone(), start.basis.j[2].0.clone()];
    let mut gamma = start.gamma.clone();
    let mut last_geo = None;
    for w in pts.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let v = TangentVec(b - a);
        let h = 1.0 / n as f64;
        let mut last = frame(model, a, &gamma, &j, &v)?;
        for k in 0..n {
            let t0 = k as f64 * h;
            let pm = a + &v.0 * (t0 + 0.5 * h);
            let pe = a + &v.0 * (t0 + h);
            let gm = model.christoffels(&pm)?;
            let ge = model.christoffels(&pe)?;
            let (m0, mmid, mend) = (last.mm.clone(), gm.along(&v.0), ge.along(&v.0));
            // the basis first: its stages feed the section stages
            let kj1 = rhs_j(&m0, &j);
            let j2 = jaxpy(&j, 0.5 * h, &kj1);
            let kj2 = rhs_j(&mmid, &j2);
            let j3 = jaxpy(&j, 0.5 * h, &kj2);
            let kj3 = rhs_j(&mmid, &j3);
            let j4 = jaxpy(&j, h, &kj3);
            let kj4 = rhs_j(&mend, &j4);
            let mut jn = j.clone();
            for i in 0..3 {
                jn[i] += (&kj1[i] + &kj2[i] * 2.0 + &kj3[i] * 2.0 + &kj4[i]) * (h / 6.0);
            }
            let f2 = frame(model, &pm, &gm, &j2, &v)?;
            let f3 = frame(model, &pm, &gm, &j3, &v)?;
            let f4 = frame(model, &pe, &ge, &j4, &v)?;
            let fe = frame(model, &pe, &ge, &jn, &v)?;
            for ((psi, x), dr) in state.iter_mut().zip(drift.iter_mut()) {
                *dr += step_section([&last, &f2, &f3, &f4], &fe, h, psi, x, &mut work);
            }
            steps += 1;
            let worst = drift.iter().cloned().fold(0.0, f64::max);
            if worst > DRIFT_LIMIT {
                return Err(QkError::Drift { drift: worst, limit: DRIFT_LIMIT });
            }
            j = jn;
            gamma = ge;
            last = fe;
        }
        mismatch = mismatch.max(structure_mismatch(model, b, &last.geo.basis, &last.geo.g)?);
        last_geo = Some(last.geo);
    }
    Ok(TransportOutcome {
        sections: state.into_iter().map(|(psi, x)| ProlongSection { psi: TwoForm::from_matrix(psi), x: TangentVec(x) }).collect(),
        drift: drift.into_iter().fold(0.0, f64::max),
        basis_mismatch: mismatch,
        steps,
        end: pts.last().cloned().expect("checked"),
        end_geometry: last_geo.expect("at least one segment"),
    })
}

/// `𝒟`-parallel transport of one section.
pub fn prolong_transport(model: &ChartModel, path: &PathSpec, init: ProlongSection) -> Result<TransportOutcome> {
    transport_many(model, path, vec![init])
}

/// A section transported from a base point, evaluated anywhere by a
/// further straight-line transport with a fixed number of steps (so the
/// values depend smoothly on the evaluation point).
#[derive(Clone)]
pub struct TransportedSection {
    model: ChartModel,
    origin: Point,
    section: ProlongSection,
    steps: usize,
    memo: Arc<Mutex<HashMap<Vec<u64>, ProlongSection>>>,
    provenance: Provenance,
}

impl TransportedSection {
    pub fn new(model: &ChartModel, origin: Point, section: ProlongSection, steps: usize) -> Self {
        let provenance = Provenance::Transported { waypoints: vec![origin.as_slice().to_vec()], steps_per_segment: steps };
        Self { model: model.clone(), origin, section, steps, memo: Arc::default(), provenance }
    }

    /// Transport `init` along `path` and keep the result as a field based
    /// at the path's end.
    pub fn from_path(model: &ChartModel, path: &PathSpec, init: ProlongSection, steps: usize) -> Result<Self> {
        let out = prolong_transport(model, path, init)?;
        let mut s = Self::new(model, out.end, out.sections.into_iter().next().expect("one section"), steps);
        let mut wps = path.waypoints.clone();
        if let Provenance::Transported { waypoints, .. } = &mut s.provenance {
            std::mem::swap(waypoints, &mut wps);
        }
        Ok(s)
    }

    pub fn eval(&self, q: &Point) -> Result<ProlongSection> {
        if *q == self.origin {
            return Ok(self.section.clone());
        }
        let key: Vec<u64> = q.iter().map(|v| (v + 0.0).to_bits()).collect();
        if let Some(v) = self.memo.lock().expect("memo poisoned").get(&key) {
            return Ok(v.clone());
        }
        let path = PathSpec::segment(&self.origin, q, self.steps);
        let out = prolong_transport(&self.model, &path, self.section.clone())?;
        let v = out.sections.into_iter().next().expect("one section");
        let mut memo = self.memo.lock().expect("memo poisoned");
        if memo.len() > 50_000 {
            memo.clear();
        }
        memo.insert(key, v.clone());
        Ok(v)
    }

    pub fn psi_field(&self) -> FormField {
        let me = self.clone();
        FormField::new(self.provenance.clone(), move |q| Ok(me.eval(q)?.psi))
    }

    pub fn x_field(&self) -> VecField {
        let me = self.clone();
        VecField::new(self.provenance.clone(), move |q| Ok(me.eval(q)?.x))
    }
}
