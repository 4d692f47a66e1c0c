//! Cost fields `h: ℝⁿ → ℝ` with a known minimizer.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{check_dim, config, Result};

pub type CostFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub enum CostKind {
    /// `h(x) = (x − x*)ᵀ Q (x − x*) + c`
    ShiftedQuadratic {
        minimizer: Vec<f64>,
        curvature: DMatrix<f64>,
        offset: f64,
    },
    Custom {
        eval: CostFn,
        grad: Option<GradFn>,
        minimizer: Vec<f64>,
    },
}

impl fmt::Debug for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostKind::ShiftedQuadratic {
                minimizer,
                curvature,
                offset,
            } => f
                .debug_struct("ShiftedQuadratic")
                .field("minimizer", minimizer)
                .field("curvature", &curvature.as_slice())
                .field("offset", offset)
                .finish(),
            CostKind::Custom {
                grad, minimizer, ..
            } => f
                .debug_struct("Custom")
                .field("analytic_gradient", &grad.is_some())
                .field("minimizer", minimizer)
                .finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CostField {
    kind: CostKind,
    dim: usize,
}

impl CostField {
    pub fn shifted_quadratic(
        minimizer: Vec<f64>,
        curvature: DMatrix<f64>,
        offset: f64,
    ) -> Result<Self> {
        let n = minimizer.len();
        if n == 0 {
            return config("cost dimension must be positive");
        }
        if curvature.nrows() != n || curvature.ncols() != n {
            return config(format!(
                "curvature must be {n}×{n}, got {}×{}",
                curvature.nrows(),
                curvature.ncols()
            ));
        }
        if minimizer.iter().chain(curvature.iter()).any(|v| !v.is_finite()) || !offset.is_finite() {
            return config("cost parameters must be finite");
        }
        let scale = curvature.amax().max(1.0);
        if (&curvature - curvature.transpose()).amax() > 1e-12 * scale {
            return config("curvature matrix must be symmetric");
        }
        if curvature.clone().cholesky().is_none() {
            return config("curvature matrix must be positive definite");
        }
        if offset <= 0.0 {
            log::warn!(
                "quadratic cost with offset {offset} reaches zero or below; \
                 schemes that read h = 0 as a missing measurement will misbehave"
            );
        }
        Ok(Self {
            kind: CostKind::ShiftedQuadratic {
                minimizer,
                curvature,
                offset,
            },
            dim: n,
        })
    }

    /// `h(x) = (x − 2)² + 10` on the real line.
    pub fn case_study() -> Self {
        Self::shifted_quadratic(vec![2.0], DMatrix::from_element(1, 1, 1.0), 10.0)
            .expect("case-study cost is valid")
    }

    pub fn custom(
        dim: usize,
        minimizer: Vec<f64>,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: Option<GradFn>,
    ) -> Result<Self> {
        if dim == 0 {
            return config("cost dimension must be positive");
        }
        check_dim(dim, minimizer.len())?;
        Ok(Self {
            kind: CostKind::Custom {
                eval: Arc::new(eval),
                grad,
                minimizer,
            },
            dim,
        })
    }

    pub fn kind(&self) -> &CostKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn minimizer(&self) -> &[f64] {
        match &self.kind {
            CostKind::ShiftedQuadratic { minimizer, .. } => minimizer,
            CostKind::Custom { minimizer, .. } => minimizer,
        }
    }

    /// True when `h` may evaluate to zero somewhere.
    pub fn may_vanish(&self) -> bool {
        match &self.kind {
            CostKind::ShiftedQuadratic { offset, .. } => *offset <= 0.0,
            CostKind::Custom { .. } => true,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.value(x))
    }

    /// `h(x)` without the dimension check.
    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            CostKind::ShiftedQuadratic {
                minimizer,
                curvature,
                offset,
            } => {
                let n = minimizer.len();
                if n == 1 {
                    let d = x[0] - minimizer[0];
                    return curvature[(0, 0)] * d * d + offset;
                }
                let mut acc = 0.0;
                for i in 0..n {
                    let di = x[i] - minimizer[i];
                    for j in 0..n {
                        acc += di * curvature[(i, j)] * (x[j] - minimizer[j]);
                    }
                }
                acc + offset
            }
            CostKind::Custom { eval, .. } => eval(x),
        }
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let mut out = vec![0.0; self.dim];
        self.grad_into(x, &mut out);
        Ok(out)
    }

    /// Analytic gradient when available, central differences otherwise.
    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            CostKind::ShiftedQuadratic {
                minimizer,
                curvature,
                ..
            } => {
                let n = minimizer.len();
                for i in 0..n {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += curvature[(i, j)] * (x[j] - minimizer[j]);
                    }
                    out[i] = 2.0 * s;
                }
            }
            CostKind::Custom {
                grad: Some(grad), ..
            } => grad(x, out),
            CostKind::Custom { eval, .. } => central_difference(|p| eval(p), x, out),
        }
    }

    /// Finite-difference gradient, regardless of any analytic one.
    pub fn numeric_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let mut out = vec![0.0; self.dim];
        central_difference(|p| self.value(p), x, &mut out);
        Ok(out)
    }
}

/// Central differences with step `1e-6·(1 + ‖x‖)`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], out: &mut [f64]) {
    let step = 1e-6 * (1.0 + norm(x));
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = f(&probe);
        probe[i] = x[i] - step;
        let down = f(&probe);
        probe[i] = x[i];
        out[i] = (up - down) / (2.0 * step);
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut r = 0.0;
    while index > 0 {
        r += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    r
}

/// Halton points mapped into the ball of `radius` around `center`.
///
/// Component `i` uses the `i`-th prime as base, indices start at 1 so the
/// sequence is seedless and reproducible. Points outside the ball or at the
/// center are skipped.
pub fn halton_ball(center: &[f64], radius: f64, count: usize) -> Vec<Vec<f64>> {
    let n = center.len();
    assert!(n <= PRIMES.len(), "Halton sampling supports up to {} dimensions", PRIMES.len());
    let mut out = Vec::with_capacity(count);
    let mut index = 1_u64;
    while out.len() < count {
        let unit: Vec<f64> = (0..n)
            .map(|i| 2.0 * radical_inverse(index, PRIMES[i]) - 1.0)
            .collect();
        index += 1;
        let r = norm(&unit);
        if r > 1.0 || r == 0.0 {
            continue;
        }
        out.push(center.iter().zip(&unit).map(|(c, u)| c + radius * u).collect());
    }
    out
}

#[derive(Debug, Clone)]
pub struct MonotoneReport {
    pub samples: usize,
    pub radius: f64,
    /// Points where ∇h(x)ᵀ(x − x*) ≤ 0.
    pub violations: Vec<Vec<f64>>,
}

impl MonotoneReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks ∇h(x)ᵀ(x − x*) > 0 on quasi-random points around the minimizer.
pub fn validate_monotone(cost: &CostField, samples: usize, radius: f64) -> Result<MonotoneReport> {
    if samples < 100 {
        return config(format!("at least 100 samples are required, got {samples}"));
    }
    if !(radius > 0.0) {
        return config(format!("radius must be positive, got {radius}"));
    }
    let star = cost.minimizer().to_vec();
    let mut g = vec![0.0; cost.dim()];
    let mut violations = Vec::new();
    for p in halton_ball(&star, radius, samples) {
        cost.grad_into(&p, &mut g);
        let s: f64 = g.iter().zip(p.iter().zip(&star)).map(|(gi, (pi, si))| gi * (pi - si)).sum();
        if s <= 0.0 {
            violations.push(p);
        }
    }
    Ok(MonotoneReport {
        samples,
        radius,
        violations,
    })
}
