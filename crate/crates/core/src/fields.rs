//! Vector-field families `f_i: ℝ → ℝⁿ` fed with the measured cost.
//!
//! Fields are indexed from 0 here; field `i` pairs with dither `i` of the
//! bank. For `n > 1` the built-in families are replicated per axis: axis `m`
//! (0-based) owns fields `2m` and `2m+1` and is paired with the cos/sin
//! dithers at multiplier `m+1` (see [`DitherBank::per_axis`]). Each axis pair
//! is scaled by `m+1` so that its Lie bracket still yields `−ρ` on that axis.
//!
//! [`DitherBank::per_axis`]: crate::signals::DitherBank::per_axis

use std::fmt;
use std::sync::Arc;

use crate::error::{config, contract, Result};
use crate::signals::GammaMatrix;

pub type ScalarMap = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub enum FieldKind {
    /// `f₁(y) = 2ρy`, `f₂(y) = 1`
    Affine { rho: f64 },
    /// `f₁(y) = √(2ρ)·cos y`, `f₂(y) = −√(2ρ)·sin y`
    Trig { rho: f64 },
    Custom {
        maps: Vec<ScalarMap>,
        derivatives: Option<Vec<ScalarMap>>,
    },
}

impl fmt::Debug for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldKind::Affine { rho } => f.debug_struct("Affine").field("rho", rho).finish(),
            FieldKind::Trig { rho } => f.debug_struct("Trig").field("rho", rho).finish(),
            FieldKind::Custom { maps, derivatives } => f
                .debug_struct("Custom")
                .field("fields", &maps.len())
                .field("analytic_derivatives", &derivatives.is_some())
                .finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FieldFamily {
    kind: FieldKind,
    dim: usize,
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        config(format!("ρ must be positive, got {rho}"))
    }
}

impl FieldFamily {
    pub fn affine(rho: f64, dim: usize) -> Result<Self> {
        check_rho(rho)?;
        if dim == 0 {
            return config("field dimension must be positive");
        }
        Ok(Self {
            kind: FieldKind::Affine { rho },
            dim,
        })
    }

    pub fn trig(rho: f64, dim: usize) -> Result<Self> {
        check_rho(rho)?;
        if dim == 0 {
            return config("field dimension must be positive");
        }
        Ok(Self {
            kind: FieldKind::Trig { rho },
            dim,
        })
    }

    /// Arbitrary fields; derivatives fall back to central differences.
    pub fn custom(dim: usize, maps: Vec<ScalarMap>, derivatives: Option<Vec<ScalarMap>>) -> Result<Self> {
        if dim == 0 {
            return config("field dimension must be positive");
        }
        if maps.len() < 2 {
            return config("a field family needs at least two fields");
        }
        if let Some(d) = &derivatives {
            if d.len() != maps.len() {
                return config("one derivative per field is required");
            }
        }
        Ok(Self {
            kind: FieldKind::Custom { maps, derivatives },
            dim,
        })
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    /// Number of fields `l`.
    pub fn len(&self) -> usize {
        match &self.kind {
            FieldKind::Affine { .. } | FieldKind::Trig { .. } => 2 * self.dim,
            FieldKind::Custom { maps, .. } => maps.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Output dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            contract(format!("field index {i} out of range for {} fields", self.len()))
        }
    }

    pub fn value(&self, i: usize, y: f64) -> Result<Vec<f64>> {
        self.check_index(i)?;
        let mut out = vec![0.0; self.dim];
        self.accumulate(i, y, 1.0, &mut out);
        Ok(out)
    }

    pub fn derivative(&self, i: usize, y: f64) -> Result<Vec<f64>> {
        self.check_index(i)?;
        let mut out = vec![0.0; self.dim];
        match &self.kind {
            FieldKind::Affine { rho } => {
                let (axis, scale) = (i / 2, (i / 2 + 1) as f64);
                if i.is_multiple_of(2) {
                    out[axis] = 2.0 * rho * scale;
                }
            }
            FieldKind::Trig { rho } => {
                let (axis, scale) = (i / 2, (i / 2 + 1) as f64);
                let amp = (2.0 * rho * scale).sqrt();
                out[axis] = if i.is_multiple_of(2) { -amp * y.sin() } else { -amp * y.cos() };
            }
            FieldKind::Custom {
                derivatives: Some(d),
                ..
            } => d[i](y, &mut out),
            FieldKind::Custom { maps, .. } => {
                let step = 1e-6;
                let mut up = vec![0.0; self.dim];
                let mut down = vec![0.0; self.dim];
                maps[i](y + step, &mut up);
                maps[i](y - step, &mut down);
                for ((o, u), d) in out.iter_mut().zip(&up).zip(&down) {
                    *o = (u - d) / (2.0 * step);
                }
            }
        }
        Ok(out)
    }

    /// `out += weight · f_i(y)`; `i` must be in range.
    #[inline]
    pub fn accumulate(&self, i: usize, y: f64, weight: f64, out: &mut [f64]) {
        match &self.kind {
            FieldKind::Affine { rho } => {
                let (axis, scale) = (i / 2, (i / 2 + 1) as f64);
                out[axis] += weight * if i.is_multiple_of(2) { 2.0 * rho * scale * y } else { 1.0 };
            }
            FieldKind::Trig { rho } => {
                let (axis, scale) = (i / 2, (i / 2 + 1) as f64);
                let amp = (2.0 * rho * scale).sqrt();
                out[axis] += weight * if i.is_multiple_of(2) { amp * y.cos() } else { -amp * y.sin() };
            }
            FieldKind::Custom { maps, .. } => {
                let mut tmp = vec![0.0; self.dim];
                maps[i](y, &mut tmp);
                for (o, v) in out.iter_mut().zip(&tmp) {
                    *o += weight * v;
                }
            }
        }
    }

    /// Sup-norm bound of `f_i(y)` over |y| ≤ `y_max` for the built-ins.
    pub fn bound(&self, i: usize, y_max: f64) -> Option<f64> {
        let scale = (i / 2 + 1) as f64;
        match &self.kind {
            FieldKind::Affine { rho } => Some(if i.is_multiple_of(2) { 2.0 * rho * scale * y_max } else { 1.0 }),
            FieldKind::Trig { rho } => Some((2.0 * rho * scale).sqrt()),
            FieldKind::Custom { .. } => None,
        }
    }
}

/// `f_i(y)` with 0-based index.
pub fn field_value(fam: &FieldFamily, i: usize, y: f64) -> Result<Vec<f64>> {
    fam.value(i, y)
}

#[derive(Debug, Clone)]
pub struct ResidualReport {
    /// `(y, ‖R(y)‖_F)` for every sampled `y`.
    pub samples: Vec<(f64, f64)>,
    pub max: f64,
}

/// Frobenius norm of
/// `Σ_{i<j} (Df_j(y)·f_iᵀ(y) − Df_i(y)·f_jᵀ(y))·γ_ij + ρI` at each sample.
///
/// The pair set is the strict upper triangle `{(i, j): i < j}`.
pub fn assumption4_residual(
    fam: &FieldFamily,
    gamma: &GammaMatrix,
    rho: f64,
    y_samples: &[f64],
) -> Result<ResidualReport> {
    let l = fam.len();
    if gamma.size() != l {
        return config(format!("γ matrix is {0}×{0} but there are {l} fields", gamma.size()));
    }
    let n = fam.dim();
    let mut samples = Vec::with_capacity(y_samples.len());
    let mut max: f64 = 0.0;
    for &y in y_samples {
        let f: Vec<Vec<f64>> = (0..l).map(|i| fam.value(i, y)).collect::<Result<_>>()?;
        let df: Vec<Vec<f64>> = (0..l).map(|i| fam.derivative(i, y)).collect::<Result<_>>()?;
        let mut r = vec![0.0; n * n];
        for i in 0..l {
            for j in i + 1..l {
                let g = gamma.get(i, j);
                if g == 0.0 {
                    continue;
                }
                for a in 0..n {
                    for b in 0..n {
                        r[a * n + b] += (df[j][a] * f[i][b] - df[i][a] * f[j][b]) * g;
                    }
                }
            }
        }
        for a in 0..n {
            r[a * n + a] += rho;
        }
        let fro = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        max = max.max(fro);
        samples.push((y, fro));
    }
    Ok(ResidualReport { samples, max })
}

/// Evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}
