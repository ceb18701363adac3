//! Observables extracted from trajectories and steady states.
//!
//! Front positions are level-set crossings read along one axis; speeds and
//! decay rates are least-squares slopes. Integrals over the grid use the
//! trapezoid node weights of [`GridSpec`] except in [`integral_balance`],
//! which evaluates the reaction on cell centres (see there).

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::model::ModelParams;
use crate::pde::{FieldState, GridSpec, Mode, SourceSpec, SteadyOutcome};

/// Front positions sampled in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontTrace {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
}

impl FrontTrace {
    pub fn new(times: Vec<f64>, positions: Vec<f64>) -> Result<Self, AnalysisError> {
        if times.len() != positions.len() {
            return Err(AnalysisError::Trace(format!(
                "{} times but {} positions",
                times.len(),
                positions.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(AnalysisError::Trace("times must be strictly increasing".into()));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(AnalysisError::Trace("positions must be finite".into()));
        }
        Ok(Self { times, positions })
    }

    /// Front of each profile at `level`; samples where the profile stays
    /// below `level` are skipped.
    pub fn from_profiles<'a>(
        times: &[f64],
        profiles: impl IntoIterator<Item = &'a [f64]>,
        xs: &[f64],
        level: f64,
    ) -> Result<Self, AnalysisError> {
        let (times, positions) = times
            .iter()
            .zip(profiles)
            .filter_map(|(&t, row)| front_position(row, xs, level).map(|x| (t, x)))
            .unzip();
        Self::new(times, positions)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Largest `x` at which `profile` crosses `level`, linearly interpolated
/// between the bracketing nodes. `None` when the profile never reaches
/// `level`.
pub fn front_position(profile: &[f64], xs: &[f64], level: f64) -> Option<f64> {
    let k = profile.iter().rposition(|&v| v >= level)?;
    if k + 1 == profile.len() {
        return Some(xs[k]);
    }
    let (v0, v1) = (profile[k], profile[k + 1]);
    Some(xs[k] + (xs[k + 1] - xs[k]) * (v0 - level) / (v0 - v1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 for exact or constant data.
    pub r2: f64,
    pub samples: usize,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LineFit { slope, intercept: my - slope * mx, r2, samples: x.len() }
}

pub const MIN_FIT_SAMPLES: usize = 10;
pub const DEFAULT_TAIL_FRACTION: f64 = 0.5;

/// Front speed from the last `tail_fraction` of the samples.
pub fn fit_speed(trace: &FrontTrace, tail_fraction: f64) -> Result<LineFit, AnalysisError> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(AnalysisError::Trace(format!("tail fraction must lie in (0, 1], got {tail_fraction}")));
    }
    let n = trace.len();
    let take = (tail_fraction * n as f64).round() as usize;
    if take < MIN_FIT_SAMPLES {
        return Err(AnalysisError::TooFewSamples { needed: MIN_FIT_SAMPLES, got: take });
    }
    Ok(fit_line(&trace.times[n - take..], &trace.positions[n - take..]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DecayWindow {
    /// Fit on `x1 <= x <= x2`.
    Range(f64, f64),
    /// Fit where the excess lies in `[1e-6, 1e-2]` times its maximum,
    /// to the right of the maximum.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub window: (f64, f64),
    pub r2: f64,
    pub samples: usize,
}

/// Exponential decay rate of `profile - limit` along `xs`.
pub fn fit_decay(xs: &[f64], profile: &[f64], limit: f64, window: DecayWindow) -> Result<DecayFit, AnalysisError> {
    let excess: Vec<f64> = profile.iter().map(|v| v - limit).collect();
    let idx: Vec<usize> = match window {
        DecayWindow::Range(x1, x2) => (0..xs.len()).filter(|&k| xs[k] >= x1 && xs[k] <= x2).collect(),
        DecayWindow::Auto => {
            let peak = (0..excess.len()).max_by(|&a, &b| excess[a].total_cmp(&excess[b])).unwrap_or(0);
            let top = excess.get(peak).copied().unwrap_or(0.0);
            let band = 1e-6 * top..=1e-2 * top;
            let first = (peak..excess.len()).find(|&k| band.contains(&excess[k]));
            match first {
                Some(s) => (s..excess.len()).take_while(|&k| band.contains(&excess[k])).collect(),
                None => Vec::new(),
            }
        }
    };
    if idx.len() < 3 {
        return Err(AnalysisError::TooFewSamples { needed: 3, got: idx.len() });
    }
    if idx.iter().any(|&k| !(excess[k] > 0.0)) {
        return Err(AnalysisError::BadExcess("not positive"));
    }
    if idx.windows(2).any(|w| excess[w[1]] >= excess[w[0]]) {
        return Err(AnalysisError::BadExcess("not decreasing"));
    }
    let x: Vec<f64> = idx.iter().map(|&k| xs[k]).collect();
    let y: Vec<f64> = idx.iter().map(|&k| excess[k].ln()).collect();
    let fit = fit_line(&x, &y);
    Ok(DecayFit { rate: -fit.slope, window: (x[0], x[x.len() - 1]), r2: fit.r2, samples: x.len() })
}

/// First time each node of `history` reaches `v_star / 2`, linearly
/// interpolated in time; `None` for nodes that never do.
pub fn peak_time_map(times: &[f64], history: &[Vec<f64>], v_star: f64) -> Vec<Option<f64>> {
    let level = 0.5 * v_star;
    let n = history.first().map_or(0, Vec::len);
    let mut tau = vec![None; n];
    for (k, row) in history.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            if tau[i].is_some() || v < level {
                continue;
            }
            tau[i] = Some(if k == 0 {
                times[0]
            } else {
                let prev = history[k - 1][i];
                times[k - 1] + (times[k] - times[k - 1]) * (level - prev) / (v - prev)
            });
        }
    }
    tau
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSlope {
    /// Least-squares slope of `τ_*` against `x` over `[x_far / 10, x_far]`.
    pub slope: f64,
    pub r2: f64,
    /// Farthest crossed node to the right of `x0`.
    pub x_far: f64,
    pub samples: usize,
}

/// Slope of the peak-time map over the farthest crossed decade right of `x0`.
pub fn peak_slope(xs: &[f64], tau: &[Option<f64>], x0: f64) -> Result<PeakSlope, AnalysisError> {
    let x_far = xs
        .iter()
        .zip(tau)
        .filter(|(x, t)| **x > x0 && t.is_some())
        .map(|(x, _)| x - x0)
        .fold(0.0f64, f64::max);
    let (x, y): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(tau)
        .filter_map(|(&x, t)| t.map(|t| (x - x0, t)))
        .filter(|(r, _)| *r >= 0.1 * x_far && *r <= x_far && *r > 0.0)
        .unzip();
    if x.len() < MIN_FIT_SAMPLES {
        return Err(AnalysisError::TooFewSamples { needed: MIN_FIT_SAMPLES, got: x.len() });
    }
    let fit = fit_line(&x, &y);
    Ok(PeakSlope { slope: fit.slope, r2: fit.r2, x_far, samples: x.len() })
}

/// Total ever infected `S0 (1 - e^{-β v})`, pointwise.
pub fn itot(v: &[f64], params: &ModelParams) -> Vec<f64> {
    v.iter().map(|&v| params.infected_total(v)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub e_plus_mask: Vec<bool>,
    pub e_minus_mask: Vec<bool>,
    pub e_plus_area: f64,
    pub e_minus_area: f64,
    /// `[x_min, x_max, y_min, y_max]` of each mask.
    pub e_plus_bbox: Option<[f64; 4]>,
    pub e_minus_bbox: Option<[f64; 4]>,
    pub tol: f64,
}

fn bbox(grid: &GridSpec, mask: &[bool]) -> Option<[f64; 4]> {
    let nx = grid.nx();
    mask.iter().enumerate().filter(|(_, &m)| m).fold(None, |acc, (k, _)| {
        let (x, y) = (grid.x(k % nx), grid.y(k / nx));
        Some(match acc {
            None => [x, x, y, y],
            Some([a, b, c, d]) => [a.min(x), b.max(x), c.min(y), d.max(y)],
        })
    })
}

/// Nodes where the road raises (`E+`) or lowers (`E-`) the steady
/// potential by more than `tol`.
pub fn region_split(road: &FieldState, plain: &FieldState, tol: f64) -> Result<RegionReport, AnalysisError> {
    if road.grid != plain.grid || road.bulk.len() != plain.bulk.len() {
        return Err(AnalysisError::GridMismatch);
    }
    let e_plus_mask: Vec<bool> = road.bulk.iter().zip(&plain.bulk).map(|(r, p)| *r > p + tol).collect();
    let e_minus_mask: Vec<bool> = road.bulk.iter().zip(&plain.bulk).map(|(r, p)| *r < p - tol).collect();
    let cell = road.grid.h * road.grid.h;
    let count = |m: &[bool]| m.iter().filter(|&&b| b).count() as f64;
    Ok(RegionReport {
        e_plus_area: cell * count(&e_plus_mask),
        e_minus_area: cell * count(&e_minus_mask),
        e_plus_bbox: bbox(&road.grid, &e_plus_mask),
        e_minus_bbox: bbox(&road.grid, &e_minus_mask),
        e_plus_mask,
        e_minus_mask,
        tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Balance {
    /// `∫(f(v) + I0) - ∫(ν v(·,0) - μ u)`, relative to `∫ I0`.
    pub bulk_residual: f64,
    /// `∫(ν v(·,0) - μ u + T0)`, relative to `∫ I0`.
    pub road_residual: f64,
}

/// Residuals of the two flux identities satisfied by a steady road-field
/// state.
///
/// Integrals are taken cell by cell: the bulk integrand is evaluated at the
/// cell centre from the average of the four corner values, the road
/// integrand at segment midpoints. For the linear terms this is the
/// trapezoid rule; for `f` it is a midpoint rule whose error is of order
/// `h²`, independent of the residual the solver stopped at.
pub fn integral_balance(steady: &SteadyOutcome, params: &ModelParams, i0: &SourceSpec) -> Result<Balance, AnalysisError> {
    if !steady.converged {
        return Err(AnalysisError::NotConverged);
    }
    let st = &steady.state;
    if st.mode != Mode::RoadfieldUv {
        return Err(AnalysisError::Mode(format!("integral balance needs roadfield_uv, got {:?}", st.mode)));
    }
    let g = st.grid;
    let (nx, ny, h) = (g.nx(), g.ny(), g.h);
    let i0_nodes = i0.sample_bulk(&g);
    let corner = |a: &[f64], i: usize, j: usize| {
        0.25 * (a[j * nx + i] + a[j * nx + i + 1] + a[(j + 1) * nx + i] + a[(j + 1) * nx + i + 1])
    };
    let mut bulk = 0.0;
    let mut source = 0.0;
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v = corner(&st.bulk, i, j);
            let q = corner(&i0_nodes, i, j);
            bulk += h * h * (params.infected_total(v) - params.alpha * v + q);
            source += h * h * q;
        }
    }
    let trace = |i: usize| params.nu * st.bulk[i] - params.mu * st.road[i];
    let mut flux = 0.0;
    let mut road_source = 0.0;
    for i in 0..nx - 1 {
        flux += 0.5 * h * (trace(i) + trace(i + 1));
        if !st.road_source.is_empty() {
            road_source += 0.5 * h * (st.road_source[i] + st.road_source[i + 1]);
        }
    }
    let (bulk_res, road_res) = (bulk - flux, flux + road_source);
    let norm = |r: f64| if source > 0.0 { r / source } else { r };
    Ok(Balance { bulk_residual: norm(bulk_res), road_residual: norm(road_res) })
}

/// Trapezoid-weighted road mass plus bulk mass.
pub fn mass_total(state: &FieldState) -> Result<f64, AnalysisError> {
    if !state.mode.has_road() {
        return Err(AnalysisError::Mode(format!("mass total needs a road mode, got {:?}", state.mode)));
    }
    Ok(road_mass(state) + bulk_mass(state))
}

pub fn road_mass(state: &FieldState) -> f64 {
    state.road.iter().enumerate().map(|(i, u)| state.grid.weight_x(i) * u).sum()
}

pub fn bulk_mass(state: &FieldState) -> f64 {
    let g = state.grid;
    let nx = g.nx();
    state.bulk.iter().enumerate().map(|(k, v)| g.weight_x(k % nx) * g.weight_y(k / nx) * v).sum()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |v| format!("{v:.16e}"))
}

/// `front_trace.csv`: header `t,x_front`.
pub fn write_front_trace_csv<W: Write>(mut w: W, trace: &FrontTrace) -> io::Result<()> {
    writeln!(w, "t,x_front")?;
    for (t, x) in trace.times.iter().zip(&trace.positions) {
        writeln!(w, "{t:.16e},{x:.16e}")?;
    }
    Ok(())
}

/// `tau_star.csv`: header `x,tau`; uncrossed nodes carry `nan`.
pub fn write_tau_csv<W: Write>(mut w: W, xs: &[f64], tau: &[Option<f64>]) -> io::Result<()> {
    writeln!(w, "x,tau")?;
    for (x, t) in xs.iter().zip(tau) {
        writeln!(w, "{x:.16e},{}", fmt_opt(*t))?;
    }
    Ok(())
}

/// `regions.csv`: header `x,y,sign`, one row per node of `E+` (`1`) or `E-` (`-1`).
pub fn write_regions_csv<W: Write>(mut w: W, grid: &GridSpec, report: &RegionReport) -> io::Result<()> {
    writeln!(w, "x,y,sign")?;
    let nx = grid.nx();
    for (k, (&p, &m)) in report.e_plus_mask.iter().zip(&report.e_minus_mask).enumerate() {
        let sign = match (p, m) {
            (true, _) => 1,
            (_, true) => -1,
            _ => continue,
        };
        writeln!(w, "{:.16e},{:.16e},{sign}", grid.x(k % nx), grid.y(k / nx))?;
    }
    Ok(())
}

/// One row of `decay_fit.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub label: String,
    pub fit: DecayFit,
    pub reference: f64,
}

/// `decay_fit.csv`: header `label,x1,x2,rate,reference,relative_error`.
pub fn write_decay_csv<W: Write>(mut w: W, rows: &[DecayRow]) -> io::Result<()> {
    writeln!(w, "label,x1,x2,rate,reference,relative_error")?;
    for r in rows {
        let (x1, x2) = r.fit.window;
        let rel = (r.fit.rate - r.reference) / r.reference;
        writeln!(w, "{},{x1:.16e},{x2:.16e},{:.16e},{:.16e},{rel:.16e}", r.label, r.fit.rate, r.reference)?;
    }
    Ok(())
}
