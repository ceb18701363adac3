use serde::{Deserialize, Serialize};

use crate::error::PdeError;

/// Uniform node grid on `[-lx, lx] × [0, ly]`; row `j = 0` is the road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lx: f64,
    pub ly: f64,
    pub h: f64,
    #[serde(default = "GridSpec::default_cfl")]
    pub cfl: f64,
}

fn is_multiple(len: f64, h: f64) -> bool {
    let n = len / h;
    (n - n.round()).abs() < 1e-9 * n.max(1.0)
}

impl GridSpec {
    pub const DEFAULT_CFL: f64 = 0.4;

    fn default_cfl() -> f64 {
        Self::DEFAULT_CFL
    }

    pub fn new(lx: f64, ly: f64, h: f64) -> Result<Self, PdeError> {
        let g = Self { lx, ly, h, cfl: Self::DEFAULT_CFL };
        g.validate()?;
        Ok(g)
    }

    pub fn with_cfl(self, cfl: f64) -> Result<Self, PdeError> {
        let g = Self { cfl, ..self };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), PdeError> {
        let Self { lx, ly, h, cfl } = *self;
        if !(h.is_finite() && h > 0.0) {
            return Err(PdeError::Grid(format!("h must be positive, got {h}")));
        }
        if !(cfl > 0.0 && cfl <= 0.5) {
            return Err(PdeError::Grid(format!("cfl must lie in (0, 0.5], got {cfl}")));
        }
        for (name, len) in [("lx", lx), ("ly", ly)] {
            if !(len.is_finite() && len >= h) {
                return Err(PdeError::Grid(format!("{name} must be at least h, got {len}")));
            }
            if !is_multiple(len, h) {
                return Err(PdeError::Grid(format!("{name} = {len} is not a multiple of h = {h}")));
            }
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        (2.0 * self.lx / self.h).round() as usize + 1
    }

    pub fn ny(&self) -> usize {
        (self.ly / self.h).round() as usize + 1
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.lx + i as f64 * self.h
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx()).map(|i| self.x(i)).collect()
    }

    /// Nearest node index to `x`, clamped to the grid.
    pub fn i_of(&self, x: f64) -> usize {
        (((x + self.lx) / self.h).round().max(0.0) as usize).min(self.nx() - 1)
    }

    pub fn j_of(&self, y: f64) -> usize {
        ((y / self.h).round().max(0.0) as usize).min(self.ny() - 1)
    }

    /// Quadrature weight of node `i` along x: boundary nodes own half cells.
    pub fn weight_x(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.nx() {
            0.5 * self.h
        } else {
            self.h
        }
    }

    pub fn weight_y(&self, j: usize) -> f64 {
        if j == 0 || j + 1 == self.ny() {
            0.5 * self.h
        } else {
            self.h
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceShape {
    /// `amplitude` inside the closed disk.
    DiskIndicator,
    /// Radially decreasing Gaussian bump, shifted to vanish at `radius`.
    TruncatedGaussian,
    /// `amplitude` on the band `|x - cx| <= radius`, uniform in `y`.
    Strip,
    None,
}

/// Compactly supported source profile for `I0` (field) or `T0` (road).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub shape: SourceShape,
    #[serde(default)]
    pub center: [f64; 2],
    #[serde(default)]
    pub radius: f64,
    #[serde(default)]
    pub amplitude: f64,
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl SourceSpec {
    pub fn none() -> Self {
        Self { shape: SourceShape::None, center: [0.0, 0.0], radius: 0.0, amplitude: 0.0 }
    }

    pub fn disk(center: [f64; 2], radius: f64, amplitude: f64) -> Self {
        Self { shape: SourceShape::DiskIndicator, center, radius, amplitude }
    }

    pub fn gaussian(center: [f64; 2], radius: f64, amplitude: f64) -> Self {
        Self { shape: SourceShape::TruncatedGaussian, center, radius, amplitude }
    }

    pub fn strip(cx: f64, half_width: f64, amplitude: f64) -> Self {
        Self { shape: SourceShape::Strip, center: [cx, 0.0], radius: half_width, amplitude }
    }

    pub fn is_none(&self) -> bool {
        self.shape == SourceShape::None || self.amplitude == 0.0
    }

    pub fn validate(&self) -> Result<(), PdeError> {
        if self.shape == SourceShape::None {
            return Ok(());
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(PdeError::Source(format!("amplitude must be >= 0, got {}", self.amplitude)));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(PdeError::Source(format!("radius must be > 0, got {}", self.radius)));
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(PdeError::Source("center must be finite".into()));
        }
        Ok(())
    }

    /// Value at `(x, y)`; exactly zero outside the support.
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        let [cx, cy] = self.center;
        match self.shape {
            SourceShape::None => 0.0,
            SourceShape::DiskIndicator => {
                let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                if r2 <= self.radius * self.radius {
                    self.amplitude
                } else {
                    0.0
                }
            }
            SourceShape::TruncatedGaussian => {
                let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                let big_r2 = self.radius * self.radius;
                if r2 >= big_r2 {
                    return 0.0;
                }
                // σ = radius / 3
                let s = 9.0 / (2.0 * big_r2);
                let floor = (-s * big_r2).exp();
                self.amplitude * ((-s * r2).exp() - floor) / (1.0 - floor)
            }
            SourceShape::Strip => {
                if (x - cx).abs() <= self.radius {
                    self.amplitude
                } else {
                    0.0
                }
            }
        }
    }

    /// Bulk samples, row-major with `j = 0` on the road.
    pub fn sample_bulk(&self, grid: &GridSpec) -> Vec<f64> {
        let nx = grid.nx();
        (0..grid.len()).map(|k| self.value_at(grid.x(k % nx), grid.y(k / nx))).collect()
    }

    /// Road samples: distance to the centre measured along the line only.
    pub fn sample_road(&self, grid: &GridSpec) -> Vec<f64> {
        (0..grid.nx()).map(|i| self.value_at(grid.x(i), self.center[1])).collect()
    }

    /// x-extent of the support.
    pub fn x_extent(&self) -> Option<(f64, f64)> {
        (self.shape != SourceShape::None)
            .then(|| (self.center[0] - self.radius, self.center[0] + self.radius))
    }
}
