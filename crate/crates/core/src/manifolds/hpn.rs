//! The affine chart `q ↦ [q : 1]` of `HP^n`.

use nalgebra::{DMatrix, Quaternion};

use crate::curvalg::CurvatureOp;
use crate::qalg::{lambda2_basis, quaternion_unit, AdmissibleBasis, Metric, TwoForm};
use crate::{QkError, Result};

/// `g_q(v, w) = Re[ Σ v̄_a w_a / (1+|q|²) - (Σ v̄_a q_a)(Σ q̄_b w_b) / (1+|q|²)² ]`
/// on coordinate vectors; with `c_i = ū_i q_{a(i)}` for the `i`-th real
/// coordinate direction this is `δ_ij/s - <c_i, c_j>/s²`.
pub fn metric(p: &[f64]) -> DMatrix<f64> {
    let dim = p.len();
    let s = 1.0 + p.iter().map(|x| x * x).sum::<f64>();
    let c: Vec<Quaternion<f64>> = (0..dim)
        .map(|i| {
            let a = i / 4;
            let q = Quaternion::new(p[4 * a], p[4 * a + 1], p[4 * a + 2], p[4 * a + 3]);
            quaternion_unit(i % 4).conjugate() * q
        })
        .collect();
    let s2 = s * s;
    DMatrix::from_fn(dim, dim, |i, j| {
        let delta = if i == j { 1.0 / s } else { 0.0 };
        delta - c[i].coords.dot(&c[j].coords) / s2
    })
}

/// Recover `Q` as the isolated three-dimensional eigenspace of the
/// curvature acting on `Λ²`. Returns the basis and the gap ratio
/// `gap / max(spread, floor)`.
pub fn spectral_basis(r: &CurvatureOp, g: &Metric, align_to: Option<&AdmissibleBasis>) -> Result<(AdmissibleBasis, f64)> {
    let m = g.dim();
    let n = m / 4;
    let mat = r.lambda2_matrix(g);
    let eig = mat.clone().symmetric_eigen();
    let k = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let ev = |i: usize| eig.eigenvalues[order[i]];
    let scale = (0..k).map(|i| ev(i).abs()).fold(0.0, f64::max);
    let floor = 1e-14 * scale.max(f64::MIN_POSITIVE);
    let low = (ev(3) - ev(2), (ev(2) - ev(0)).max(floor));
    let high = (ev(k - 3) - ev(k - 4), (ev(k - 1) - ev(k - 3)).max(floor));
    let (idx, gap_ratio): (Vec<usize>, f64) = if low.0 / low.1 >= high.0 / high.1 {
        ((0..3).map(|i| order[i]).collect(), low.0 / low.1)
    } else {
        ((k - 3..k).map(|i| order[i]).collect(), high.0 / high.1)
    };
    if !(gap_ratio >= 1e3) {
        return Err(QkError::SpectralGap { gap_ratio, required: 1e3 });
    }
    let lam = lambda2_basis(g);
    let norm = ((2 * n) as f64).sqrt();
    let mut forms: Vec<TwoForm> = idx
        .iter()
        .map(|&c| {
            let mut f = TwoForm::zeros(m);
            for (a, la) in lam.iter().enumerate() {
                f += &(la * eig.eigenvectors[(a, c)]);
            }
            f * norm
        })
        .collect();
    let j: Vec<DMatrix<f64>> = forms.iter().map(|f| g.form_to_endo(f).0).collect();
    let prod = &j[0] * &j[1];
    if (&prod + &j[2]).amax() < (&prod - &j[2]).amax() {
        forms[2] = -forms[2].clone();
    }
    let [f1, f2, f3]: [TwoForm; 3] = forms.try_into().expect("three forms");
    let basis = AdmissibleBasis::from_forms(g, [f1, f2, f3], 1e-5)?;
    let basis = match align_to {
        Some(reference) => basis.aligned_to(reference, g),
        None => basis,
    };
    Ok((basis, gap_ratio))
}
