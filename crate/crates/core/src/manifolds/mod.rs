//! Chart models with finite-difference geometry: flat `H^n` and an affine
//! chart of `HP^n`, plus selection of the algebraic `Gr_2(C^4)` point model.

mod cache;
mod hpn;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::curvalg::{base_curvature, recover_nu, weylq_grassmannian, CurvatureOp, QKContext};
use crate::fd::FdScheme;
use crate::qalg::{standard_flat_basis, AdmissibleBasis, Metric, Point, TangentVec, TwoForm};
use crate::{QkError, Result};

pub use cache::GeometryCache;

/// Finite-difference steps for the two derivative levels of the geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryScheme {
    /// Metric → Christoffel symbols.
    pub gamma: FdScheme,
    /// Christoffel symbols → curvature.
    pub curvature: FdScheme,
}

impl GeometryScheme {
    /// Second order, steps `1e-4` and `1e-3`.
    pub const STANDARD: Self = Self { gamma: FdScheme::central2(1e-4), curvature: FdScheme::central2(1e-3) };

    /// Fourth order, steps `1e-3` and `1e-2`; used where derivatives of
    /// geometric data are nested several levels deep.
    pub const ACCURATE: Self = Self { gamma: FdScheme::central4(1e-3), curvature: FdScheme::central4(1e-2) };

    pub fn reach(&self) -> f64 {
        self.gamma.reach() + self.curvature.reach()
    }
}

impl Default for GeometryScheme {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// Christoffel symbols `Γ^k_{ij}`, stored `[k][i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim.pow(3)] }
    }

    /// `Γ^k_{ij} = 1/2 g^{kl}(∂_i g_{lj} + ∂_j g_{li} - ∂_l g_{ij})` from the
    /// coordinate partials of the metric (`dg[k]` is `∂_k g`, row-major).
    pub fn from_metric_partials(ginv: &DMatrix<f64>, dg: &[Vec<f64>]) -> Self {
        let m = ginv.nrows();
        let mut lowered = vec![0.0; m * m * m]; // [l][i][j]
        for l in 0..m {
            for i in 0..m {
                for j in 0..m {
                    lowered[(l * m + i) * m + j] =
                        0.5 * (dg[i][l * m + j] + dg[j][l * m + i] - dg[l][i * m + j]);
                }
            }
        }
        let mut data = vec![0.0; m * m * m];
        for k in 0..m {
            for l in 0..m {
                let gkl = ginv[(k, l)];
                if gkl == 0.0 {
                    continue;
                }
                for ij in 0..m * m {
                    data[k * m * m + ij] += gkl * lowered[l * m * m + ij];
                }
            }
        }
        Self { dim: m, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    /// `M[(l, i)] = Σ_k z^k Γ^l_{ki}`, so that `∇_Z X = ∂_Z X + M X`.
    pub fn along(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let m = self.dim;
        DMatrix::from_fn(m, m, |l, i| (0..m).map(|k| z[k] * self.get(l, k, i)).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `max |Γ^k_{ij} - Γ^k_{ji}|`.
    pub fn asymmetry(&self) -> f64 {
        let m = self.dim;
        let mut r: f64 = 0.0;
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    r = r.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        r
    }
}

/// Metric, connection and quaternionic basis at one point (the data that
/// downstream operators need; cached per point).
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub p: Point,
    pub g: Metric,
    pub gamma: Christoffel,
    pub basis: AdmissibleBasis,
    /// Spectral gap ratio of the basis recovery (infinite when exact).
    pub gap_ratio: f64,
}

/// Full geometric sample including the curvature.
#[derive(Debug, Clone)]
pub struct GeometrySample {
    pub p: Point,
    pub g: Metric,
    pub basis: AdmissibleBasis,
    pub gamma: Christoffel,
    pub rg: CurvatureOp,
    /// Model value of the reduced scalar curvature.
    pub nu: f64,
    /// `ν` recovered from the Ricci tensor at this point.
    pub nu_local: f64,
    /// Relative deviation of `Ric` from a multiple of `g`.
    pub einstein_residual: f64,
    /// Relative size of the part removed by symmetrising the raw curvature.
    pub riemann_asymmetry: f64,
    pub gap_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Flat,
    Hpn,
}

/// A quaternionic-Kähler manifold given on one chart.
#[derive(Debug, Clone)]
pub struct ChartModel {
    kind: ModelKind,
    n: usize,
    domain: f64,
    scheme: GeometryScheme,
    nu: f64,
    reference: AdmissibleBasis,
    flat_metric: Metric,
    cache: Arc<GeometryCache>,
}

/// Self-validation of the `HP^n` chart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelValidation {
    pub nu_center: f64,
    /// `max |ν(p) - ν(0)| / |ν(0)|` over the probe points.
    pub nu_spread: f64,
    /// `max ‖R - R_ν‖ / ‖R‖` over the probe points.
    pub weyl_residual: f64,
    pub einstein_residual: f64,
    pub min_gap_ratio: f64,
}

pub const HPN_DOMAIN: f64 = 0.8;
pub const HPN_VALIDATION_TOL: f64 = 1e-4;

impl ChartModel {
    pub fn flat(n: usize) -> Result<Self> {
        let (g, basis) = standard_flat_basis(n)?;
        Ok(Self {
            kind: ModelKind::Flat,
            n,
            domain: f64::INFINITY,
            scheme: GeometryScheme::STANDARD,
            nu: 0.0,
            reference: basis,
            flat_metric: g,
            cache: Arc::new(GeometryCache::new(0)),
        })
    }

    /// `HP^n` chart with the standard finite-difference scheme.
    pub fn hpn(n: usize) -> Result<Self> {
        Self::hpn_with_scheme(n, GeometryScheme::STANDARD)
    }

    /// `HP^n` chart; measures `ν` at the centre and runs the mandatory
    /// self-validation at ten fixed probe points.
    pub fn hpn_with_scheme(n: usize, scheme: GeometryScheme) -> Result<Self> {
        let (g0, flat_basis) = standard_flat_basis(n)?;
        let mut model = Self {
            kind: ModelKind::Hpn,
            n,
            domain: HPN_DOMAIN,
            scheme,
            nu: 0.0,
            reference: flat_basis,
            flat_metric: g0,
            cache: Arc::new(GeometryCache::new(50_000)),
        };
        let origin = DVector::zeros(4 * n);
        let r0 = model.riemann(&origin)?.0;
        let g = model.metric_at(&origin)?;
        let (nu, _) = recover_nu(&r0, &g);
        if nu.abs() < 1e-8 {
            return Err(QkError::ZeroScalarCurvature);
        }
        model.nu = nu;
        // the quaternionic structure at the centre, aligned with the flat one
        let (b0, gap) = hpn::spectral_basis(&r0, &g, Some(&model.reference))?;
        let overlap = model.reference.overlap(&b0, &g).svd(false, false).singular_values;
        let dev = overlap.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
        if dev > 1e-5 {
            return Err(QkError::SelfValidation { check: "hpn centre structure".into(), residual: dev, tol: 1e-5 });
        }
        let _ = gap;
        model.reference = b0;
        let v = model.validate()?;
        log::debug!("hpn model validated: {v:?}");
        Ok(model)
    }

    /// Recomputes the self-validation report at ten fixed probe points.
    pub fn validate(&self) -> Result<ModelValidation> {
        let origin = DVector::zeros(self.dim());
        let mut probes = vec![origin];
        let mut rng = crate::sampling::seeded(0x6870_6e);
        for _ in 0..10 {
            probes.push(crate::sampling::random_point_in_ball(self.dim(), 0.5, &mut rng));
        }
        let mut v = ModelValidation {
            nu_center: self.nu,
            nu_spread: 0.0,
            weyl_residual: 0.0,
            einstein_residual: 0.0,
            min_gap_ratio: f64::INFINITY,
        };
        for p in &probes {
            let s = self.sample(p)?;
            if self.nu != 0.0 {
                v.nu_spread = v.nu_spread.max((s.nu_local - self.nu).abs() / self.nu.abs());
            }
            let base = base_curvature(&s.g, &s.basis, s.nu_local);
            let w = s.rg.minus(&base).norm(&s.g) / s.rg.norm(&s.g).max(f64::MIN_POSITIVE);
            v.weyl_residual = v.weyl_residual.max(w);
            v.einstein_residual = v.einstein_residual.max(s.einstein_residual);
            v.min_gap_ratio = v.min_gap_ratio.min(s.gap_ratio);
        }
        if self.kind == ModelKind::Hpn {
            for (check, residual) in [
                ("hpn nu constancy", v.nu_spread),
                ("hpn W^Q = 0", v.weyl_residual),
                ("hpn einstein", v.einstein_residual),
            ] {
                if !(residual <= HPN_VALIDATION_TOL) {
                    return Err(QkError::SelfValidation { check: check.into(), residual, tol: HPN_VALIDATION_TOL });
                }
            }
        }
        Ok(v)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::Flat => "flat",
            ModelKind::Hpn => "hpn",
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        4 * self.n
    }

    pub fn domain(&self) -> f64 {
        self.domain
    }

    pub fn scheme(&self) -> GeometryScheme {
        self.scheme
    }

    /// Reduced scalar curvature (measured at the chart centre for `HP^n`).
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Basis used to fix the `SO(3)` freedom of the spectral recovery.
    pub fn reference_basis(&self) -> &AdmissibleBasis {
        &self.reference
    }

    pub fn cache(&self) -> &GeometryCache {
        &self.cache
    }

    pub fn check_point(&self, p: &Point, margin: f64) -> Result<()> {
        if p.len() != self.dim() {
            return Err(QkError::DimensionMismatch { expected: self.dim(), got: p.len() });
        }
        let r = p.norm();
        if !(r + margin < self.domain) {
            return Err(QkError::OutsideDomain { radius: r + margin, domain: self.domain });
        }
        Ok(())
    }

    /// Whether the ball of radius `margin` about `p` lies in the chart.
    pub fn contains(&self, p: &Point, margin: f64) -> bool {
        self.check_point(p, margin).is_ok()
    }

    pub fn metric_at(&self, p: &Point) -> Result<Metric> {
        self.check_point(p, 0.0)?;
        match self.kind {
            ModelKind::Flat => Ok(self.flat_metric.clone()),
            ModelKind::Hpn => Metric::new(hpn::metric(p.as_slice())),
        }
    }

    fn metric_matrix(&self, p: &Point) -> Result<DMatrix<f64>> {
        self.check_point(p, 0.0)?;
        Ok(match self.kind {
            ModelKind::Flat => DMatrix::identity(self.dim(), self.dim()),
            ModelKind::Hpn => hpn::metric(p.as_slice()),
        })
    }

    /// Christoffel symbols by central differences of the metric.
    pub fn christoffels(&self, p: &Point) -> Result<Christoffel> {
        self.christoffels_with(p, self.scheme.gamma)
    }

    pub fn christoffels_with(&self, p: &Point, scheme: FdScheme) -> Result<Christoffel> {
        if self.kind == ModelKind::Flat {
            self.check_point(p, 0.0)?;
            return Ok(Christoffel::zeros(self.dim()));
        }
        self.check_point(p, scheme.reach())?;
        let g = self.metric_at(p)?;
        let dg = scheme.partials(p, |q| Ok(self.metric_matrix(q)?.transpose().as_slice().to_vec()))?;
        Ok(Christoffel::from_metric_partials(g.inverse(), &dg))
    }

    /// Curvature by central differences of the Christoffel symbols,
    /// symmetrised; also returns the relative size of what the
    /// symmetrisation removed.
    pub fn riemann(&self, p: &Point) -> Result<(CurvatureOp, f64)> {
        let m = self.dim();
        if self.kind == ModelKind::Flat {
            self.check_point(p, 0.0)?;
            return Ok((CurvatureOp::zeros(m), 0.0));
        }
        self.check_point(p, self.scheme.reach())?;
        let g = self.metric_matrix(p)?;
        let gamma = self.christoffels(p)?;
        let dgamma = self.scheme.curvature.partials(p, |q| Ok(self.christoffels(q)?.data))?;
        let dga = |i: usize, l: usize, j: usize, k: usize| dgamma[i][(l * m + j) * m + k];
        // R^l_{ijk} then lower the last index
        let mut up = vec![0.0; m.pow(4)]; // [i][j][k][l]
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let mut s = dga(i, l, j, k) - dga(j, l, i, k);
                        for mm in 0..m {
                            s += gamma.get(l, i, mm) * gamma.get(mm, j, k)
                                - gamma.get(l, j, mm) * gamma.get(mm, i, k);
                        }
                        up[((i * m + j) * m + k) * m + l] = s;
                    }
                }
            }
        }
        let raw = CurvatureOp::from_fn(m, |i, j, k, d| {
            let base = ((i * m + j) * m + k) * m;
            (0..m).map(|l| g[(d, l)] * up[base + l]).sum()
        });
        Ok(raw.symmetrized())
    }

    /// Admissible basis at `p`: constant for the flat model, recovered
    /// from the `S²H` eigenspace of the curvature for `HP^n` and aligned
    /// with `align_to` (default: the centre basis).
    pub fn basis_field(&self, p: &Point, align_to: Option<&AdmissibleBasis>) -> Result<(AdmissibleBasis, f64)> {
        match self.kind {
            ModelKind::Flat => {
                self.check_point(p, 0.0)?;
                Ok((self.reference.clone(), f64::INFINITY))
            }
            ModelKind::Hpn => {
                let (r, _) = self.riemann(p)?;
                let g = self.metric_at(p)?;
                hpn::spectral_basis(&r, &g, Some(align_to.unwrap_or(&self.reference)))
            }
        }
    }

    /// Point geometry, computed without the cache.
    pub fn point_geometry_uncached(&self, p: &Point) -> Result<PointGeometry> {
        let g = self.metric_at(p)?;
        let gamma = self.christoffels(p)?;
        let (basis, gap_ratio) = self.basis_field(p, None)?;
        Ok(PointGeometry { p: p.clone(), g, gamma, basis, gap_ratio })
    }

    /// Point geometry with the basis aligned to `prev` instead of the centre
    /// basis (continuity along paths); never cached.
    pub fn point_geometry_aligned(&self, p: &Point, prev: &AdmissibleBasis) -> Result<PointGeometry> {
        let g = self.metric_at(p)?;
        let gamma = self.christoffels(p)?;
        let (basis, gap_ratio) = self.basis_field(p, Some(prev))?;
        Ok(PointGeometry { p: p.clone(), g, gamma, basis, gap_ratio })
    }

    /// Point geometry through the per-model cache.
    pub fn point_geometry(&self, p: &Point) -> Result<Arc<PointGeometry>> {
        if let Some(hit) = self.cache.get(p) {
            return Ok(hit);
        }
        let geo = Arc::new(self.point_geometry_uncached(p)?);
        self.cache.insert(p, geo.clone());
        Ok(geo)
    }

    /// Full sample including curvature diagnostics.
    pub fn sample(&self, p: &Point) -> Result<GeometrySample> {
        let g = self.metric_at(p)?;
        let gamma = self.christoffels(p)?;
        let (rg, riemann_asymmetry) = self.riemann(p)?;
        let (basis, gap_ratio) = match self.kind {
            ModelKind::Flat => (self.reference.clone(), f64::INFINITY),
            ModelKind::Hpn => hpn::spectral_basis(&rg, &g, Some(&self.reference))?,
        };
        let (nu_local, einstein_residual) =
            if self.kind == ModelKind::Flat { (0.0, 0.0) } else { recover_nu(&rg, &g) };
        Ok(GeometrySample {
            p: p.clone(),
            g,
            basis,
            gamma,
            rg,
            nu: self.nu,
            nu_local,
            einstein_residual,
            riemann_asymmetry,
            gap_ratio,
        })
    }

    /// Context at `p` with `W^Q = 0` (both chart models are validated
    /// against this) and `ν` the model value.
    pub fn context_at(&self, p: &Point) -> Result<QKContext> {
        let geo = self.point_geometry(p)?;
        QKContext::without_weyl(geo.g.clone(), geo.basis.clone(), self.nu)
    }

    /// `∇_{∂_k} psi` for every coordinate direction `k`.
    pub fn nabla_form<F>(&self, field: F, p: &Point, scheme: FdScheme) -> Result<Vec<TwoForm>>
    where
        F: Fn(&Point) -> Result<TwoForm>,
    {
        let m = self.dim();
        let geo = self.point_geometry(p)?;
        self.check_point(p, scheme.reach())?;
        let psi = field(p)?;
        let parts = scheme.partials(p, |q| Ok(field(q)?.upper_components()))?;
        Ok((0..m)
            .map(|k| {
                let d = TwoForm::from_upper_components(m, &parts[k]);
                let mk = geo.gamma.along(&TangentVec::basis(m, k).0);
                let corr = mk.transpose() * psi.matrix() + psi.matrix() * &mk;
                TwoForm::from_matrix(d.into_matrix() - corr)
            })
            .collect())
    }

    /// `∇_Z psi`.
    pub fn covariant_derivative_form<F>(&self, field: F, p: &Point, z: &TangentVec, scheme: FdScheme) -> Result<TwoForm>
    where
        F: Fn(&Point) -> Result<TwoForm>,
    {
        let m = self.dim();
        let geo = self.point_geometry(p)?;
        self.check_point(p, scheme.reach())?;
        let psi = field(p)?;
        let d = scheme.directional(p, &z.0, |q| Ok(field(q)?.upper_components()))?;
        let mz = geo.gamma.along(&z.0);
        let corr = mz.transpose() * psi.matrix() + psi.matrix() * &mz;
        Ok(TwoForm::from_matrix(TwoForm::from_upper_components(m, &d).into_matrix() - corr))
    }

    /// `(∇X)` as a matrix with column `k` equal to `∇_{∂_k} X`.
    pub fn nabla_vec<F>(&self, field: F, p: &Point, scheme: FdScheme) -> Result<DMatrix<f64>>
    where
        F: Fn(&Point) -> Result<TangentVec>,
    {
        let m = self.dim();
        let geo = self.point_geometry(p)?;
        self.check_point(p, scheme.reach())?;
        let x = field(p)?;
        let parts = scheme.partials(p, |q| Ok(field(q)?.0.as_slice().to_vec()))?;
        let mut out = DMatrix::zeros(m, m);
        for k in 0..m {
            let col = DVector::from_vec(parts[k].clone()) + geo.gamma.along(&TangentVec::basis(m, k).0) * &x.0;
            out.set_column(k, &col);
        }
        Ok(out)
    }

    /// `∇_Z X`.
    pub fn covariant_derivative_vec<F>(&self, field: F, p: &Point, z: &TangentVec, scheme: FdScheme) -> Result<TangentVec>
    where
        F: Fn(&Point) -> Result<TangentVec>,
    {
        let geo = self.point_geometry(p)?;
        self.check_point(p, scheme.reach())?;
        let x = field(p)?;
        let d = scheme.directional(p, &z.0, |q| Ok(field(q)?.0.as_slice().to_vec()))?;
        Ok(TangentVec(DVector::from_vec(d) + geo.gamma.along(&z.0) * &x.0))
    }

    /// Metricity residual `max |∇_k g_{ij}|` with `g` differentiated by
    /// `scheme`.
    pub fn metricity_residual(&self, p: &Point, scheme: FdScheme) -> Result<f64> {
        let m = self.dim();
        let gamma = self.christoffels(p)?;
        let g = self.metric_matrix(p)?;
        let dg = scheme.partials(p, |q| Ok(self.metric_matrix(q)?.transpose().as_slice().to_vec()))?;
        let mut worst: f64 = 0.0;
        for k in 0..m {
            let mk = gamma.along(&TangentVec::basis(m, k).0);
            let corr = mk.transpose() * &g + &g * &mk;
            let d = DMatrix::from_row_slice(m, m, &dg[k]);
            worst = worst.max((d - corr).amax());
        }
        Ok(worst)
    }
}

/// Result of resolving a model name.
#[derive(Debug, Clone)]
pub enum Model {
    Chart(ChartModel),
    /// The algebraic point model: context and full curvature.
    Grassmannian(Box<QKContext>, CurvatureOp),
}

/// `"flat" | "hpn" | "gr2"`.
pub fn select_model(name: &str, n: usize) -> Result<Model> {
    match name {
        "flat" => Ok(Model::Chart(ChartModel::flat(n)?)),
        "hpn" => Ok(Model::Chart(ChartModel::hpn(n)?)),
        "gr2" => {
            if n != 2 {
                return Err(QkError::Precondition("the gr2 model exists only for n = 2".into()));
            }
            let (ctx, r) = weylq_grassmannian()?;
            Ok(Model::Grassmannian(Box::new(ctx), r))
        }
        other => Err(QkError::Unknown { what: "model", name: other.to_string() }),
    }
}
