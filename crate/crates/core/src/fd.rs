//! Central finite-difference stencils.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::Result;

/// Order of accuracy of a central stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FdOrder {
    Second,
    Fourth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdScheme {
    pub step: f64,
    pub order: FdOrder,
}

const SECOND: [(f64, f64); 2] = [(-1.0, -0.5), (1.0, 0.5)];
const FOURTH: [(f64, f64); 4] = [
    (-2.0, 1.0 / 12.0),
    (-1.0, -8.0 / 12.0),
    (1.0, 8.0 / 12.0),
    (2.0, -1.0 / 12.0),
];

impl FdScheme {
    pub const fn central2(step: f64) -> Self {
        Self { step, order: FdOrder::Second }
    }

    pub const fn central4(step: f64) -> Self {
        Self { step, order: FdOrder::Fourth }
    }

    /// (offset in units of `step`, weight in units of `1/step`).
    pub fn taps(&self) -> &'static [(f64, f64)] {
        match self.order {
            FdOrder::Second => &SECOND,
            FdOrder::Fourth => &FOURTH,
        }
    }

    /// Largest distance a stencil point lies from its centre.
    pub fn reach(&self) -> f64 {
        match self.order {
            FdOrder::Second => self.step,
            FdOrder::Fourth => 2.0 * self.step,
        }
    }

    pub fn with_step(self, step: f64) -> Self {
        Self { step, ..self }
    }

    /// Derivative of a vector-valued function along `dir` at `p`.
    pub fn directional<F>(&self, p: &DVector<f64>, dir: &DVector<f64>, mut f: F) -> Result<Vec<f64>>
    where
        F: FnMut(&DVector<f64>) -> Result<Vec<f64>>,
    {
        let mut acc: Option<Vec<f64>> = None;
        for &(off, w) in self.taps() {
            let q = p + dir * (off * self.step);
            let v = f(&q)?;
            let acc = acc.get_or_insert_with(|| vec![0.0; v.len()]);
            for (a, b) in acc.iter_mut().zip(&v) {
                *a += w * b;
            }
        }
        let mut out = acc.unwrap_or_default();
        for a in &mut out {
            *a /= self.step;
        }
        Ok(out)
    }

    /// All coordinate partials `∂_k f(p)`, indexed by `k`.
    pub fn partials<F>(&self, p: &DVector<f64>, mut f: F) -> Result<Vec<Vec<f64>>>
    where
        F: FnMut(&DVector<f64>) -> Result<Vec<f64>>,
    {
        let dim = p.len();
        (0..dim)
            .map(|k| {
                let mut dir = DVector::zeros(dim);
                dir[k] = 1.0;
                self.directional(p, &dir, &mut f)
            })
            .collect()
    }
}

/// Step-halving diagnostic for values `q(h), q(h/2), q(h/4)`: returns
/// the ratio of successive differences and the implied convergence order.
pub fn richardson(values: [f64; 3]) -> (f64, f64) {
    let d1 = values[0] - values[1];
    let d2 = values[1] - values[2];
    let ratio = d1 / d2;
    (ratio, ratio.abs().log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_order_is_exact_on_quadratics() {
        let p = DVector::from_vec(vec![0.3, -0.2]);
        let f = |q: &DVector<f64>| Ok(vec![q[0] * q[0] + 3.0 * q[0] * q[1] - q[1]]);
        let d = FdScheme::central2(1e-2).partials(&p, f).unwrap();
        assert!((d[0][0] - (0.6 - 0.6)).abs() < 1e-12);
        assert!((d[1][0] - (0.9 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn fourth_order_is_exact_on_quartics() {
        let p = DVector::from_vec(vec![0.7]);
        let f = |q: &DVector<f64>| Ok(vec![q[0].powi(4)]);
        let d = FdScheme::central4(0.05).partials(&p, f).unwrap();
        assert!((d[0][0] - 4.0 * 0.7f64.powi(3)).abs() < 1e-11);
    }

    #[test]
    fn error_ratios_match_order() {
        let p = DVector::from_vec(vec![0.4]);
        let f = |q: &DVector<f64>| Ok(vec![q[0].sin()]);
        let exact = 0.4f64.cos();
        for (scheme, ratio) in [(FdScheme::central2(0.1), 4.0), (FdScheme::central4(0.1), 16.0)] {
            let e1 = (scheme.partials(&p, f).unwrap()[0][0] - exact).abs();
            let e2 = (scheme.with_step(0.05).partials(&p, f).unwrap()[0][0] - exact).abs();
            assert!(((e1 / e2) - ratio).abs() < 0.1 * ratio, "{}", e1 / e2);
        }
    }
}
