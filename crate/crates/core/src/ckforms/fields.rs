use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::qalg::{OneForm, Point, TangentVec, TwoForm};
use crate::Result;

/// How a field was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm { description: String },
    Transported { waypoints: Vec<Vec<f64>>, steps_per_segment: usize },
    Constructed { description: String },
}

impl Provenance {
    pub fn closed_form(d: &str) -> Self {
        Self::ClosedForm { description: d.to_string() }
    }

    pub fn constructed(d: &str) -> Self {
        Self::Constructed { description: d.to_string() }
    }
}

struct Memo<T> {
    capacity: usize,
    map: Mutex<HashMap<Vec<u64>, T>>,
}

impl<T: Clone> Memo<T> {
    fn new(capacity: usize) -> Self {
        Self { capacity, map: Mutex::new(HashMap::new()) }
    }

    fn key(p: &Point) -> Vec<u64> {
        p.iter().map(|v| (v + 0.0).to_bits()).collect()
    }

    fn get_or(&self, p: &Point, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let k = Self::key(p);
        if let Some(v) = self.map.lock().expect("memo poisoned").get(&k) {
            return Ok(v.clone());
        }
        let v = f()?;
        let mut map = self.map.lock().expect("memo poisoned");
        if map.len() >= self.capacity {
            map.clear();
        }
        map.insert(k, v.clone());
        Ok(v)
    }
}

macro_rules! field_type {
    ($name:ident, $value:ty, $doc:literal) => {
        #[doc = $doc]
        #[derive(Clone)]
        pub struct $name {
            f: Arc<dyn Fn(&Point) -> Result<$value> + Send + Sync>,
            provenance: Provenance,
        }

        impl $name {
            pub fn new(provenance: Provenance, f: impl Fn(&Point) -> Result<$value> + Send + Sync + 'static) -> Self {
                Self { f: Arc::new(f), provenance }
            }

            pub fn eval(&self, p: &Point) -> Result<$value> {
                (self.f)(p)
            }

            pub fn provenance(&self) -> &Provenance {
                &self.provenance
            }

            /// Cache values by exact point; useful when nested stencils
            /// revisit points.
            pub fn memoized(self, capacity: usize) -> Self {
                let memo = Arc::new(Memo::<$value>::new(capacity));
                let inner = self.f.clone();
                Self {
                    f: Arc::new(move |p: &Point| memo.get_or(p, || inner(p))),
                    provenance: self.provenance,
                }
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.debug_struct(stringify!($name)).field("provenance", &self.provenance).finish()
            }
        }
    };
}

field_type!(FormField, TwoForm, "A 2-form field on a chart.");
field_type!(VecField, TangentVec, "A vector field on a chart.");
field_type!(OneFormField, OneForm, "A 1-form field on a chart.");

impl VecField {
    /// `Σ c_i X_i`.
    pub fn combination(fields: &[VecField], coeffs: &[f64]) -> VecField {
        let fields = fields.to_vec();
        let coeffs = coeffs.to_vec();
        VecField::new(Provenance::constructed("linear combination"), move |p| {
            let mut acc = nalgebra::DVector::zeros(p.len());
            for (f, c) in fields.iter().zip(&coeffs) {
                if *c != 0.0 {
                    acc += f.eval(p)?.0 * *c;
                }
            }
            Ok(TangentVec(acc))
        })
    }
}

impl FormField {
    pub fn constant(psi: TwoForm) -> Self {
        Self::new(Provenance::closed_form("constant"), move |_| Ok(psi.clone()))
    }

    /// `Σ c_i psi_i`.
    pub fn combination(fields: &[FormField], coeffs: &[f64]) -> FormField {
        let fields = fields.to_vec();
        let coeffs = coeffs.to_vec();
        FormField::new(Provenance::constructed("linear combination"), move |p| {
            let mut acc = TwoForm::zeros(p.len());
            for (f, c) in fields.iter().zip(&coeffs) {
                if *c != 0.0 {
                    acc += &(f.eval(p)? * *c);
                }
            }
            Ok(acc)
        })
    }
}
