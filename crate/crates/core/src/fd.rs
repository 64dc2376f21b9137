//! Central differences with one Richardson level on a coordinate stencil.

use nalgebra::DVector;

/// Chart step used for every measured derivative.
pub const FD_STEP: f64 = 1e-3;

/// Points `x`, `x +- h e_k`, `x +- h/2 e_k` in that order.
#[derive(Clone, Debug)]
pub struct Stencil {
    center: DVector<f64>,
    step: f64,
}

impl Stencil {
    pub fn new(center: DVector<f64>, step: f64) -> Self {
        Self { center, step }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn len(&self) -> usize {
        4 * self.dim() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn points(&self) -> Vec<DVector<f64>> {
        let n = self.dim();
        let mut out = Vec::with_capacity(self.len());
        out.push(self.center.clone());
        for k in 0..n {
            for h in [self.step, -self.step, 0.5 * self.step, -0.5 * self.step] {
                let mut p = self.center.clone();
                p[k] += h;
                out.push(p);
            }
        }
        out
    }

    /// Derivative columns `d/dx_k` from values listed in [`Stencil::points`] order.
    pub fn derivative(&self, values: &[Vec<f64>]) -> Vec<Vec<f64>> {
        assert_eq!(values.len(), self.len(), "one value per stencil point");
        let h = self.step;
        (0..self.dim())
            .map(|k| {
                let base = 1 + 4 * k;
                let (p, m, ph, mh) = (
                    &values[base],
                    &values[base + 1],
                    &values[base + 2],
                    &values[base + 3],
                );
                (0..p.len())
                    .map(|i| {
                        let d_full = (p[i] - m[i]) / (2.0 * h);
                        let d_half = (ph[i] - mh[i]) / h;
                        (4.0 * d_half - d_full) / 3.0
                    })
                    .collect()
            })
            .collect()
    }
}

/// Richardson-extrapolated central derivative of a scalar function of one variable.
pub fn derivative_1d<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let d_full = (f(x + h) - f(x - h)) / (2.0 * h);
    let d_half = (f(x + 0.5 * h) - f(x - 0.5 * h)) / h;
    (4.0 * d_half - d_full) / 3.0
}
