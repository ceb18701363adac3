//! Explicit finite-difference integration on the truncated half-plane
//! `[-lx, lx] × [0, ly]`.
//!
//! Four model forms share one stencil:
//!
//! | mode           | bulk     | road | y = 0 condition        | sources      |
//! |----------------|----------|------|------------------------|--------------|
//! | `ScalarV`      | v        | -    | mirror (no flux)       | I0 forcing   |
//! | `RoadfieldUv`  | v        | u    | road exchange          | I0, T0 forcing |
//! | `SirDirect`    | S, I     | -    | mirror (no flux)       | I0 initial   |
//! | `SirtDirect`   | S, I     | T    | road exchange          | I0, T0 initial |
//!
//! The exchange condition `-d ∂_y v = μ u - ν v` enters through the ghost
//! value `v(i, -1) = v(i, 1) + (2h/d)(μ u_i - ν v(i, 0))`. All other edges
//! carry homogeneous Neumann (mirror) ghosts.

mod export;
mod grid;

use serde::{Deserialize, Serialize};

pub use export::{snapshot_file_name, write_bulk_csv, write_road_csv};
pub use grid::{GridSpec, SourceShape, SourceSpec};

use crate::error::PdeError;
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Cumulative potential `v` without road.
    ScalarV,
    /// Cumulative potentials `(u, v)` with road exchange.
    RoadfieldUv,
    /// Susceptibles and infected without road.
    SirDirect,
    /// Susceptibles, infected and travellers with road exchange.
    SirtDirect,
}

impl Mode {
    pub fn has_road(self) -> bool {
        matches!(self, Mode::RoadfieldUv | Mode::SirtDirect)
    }

    pub fn is_direct(self) -> bool {
        matches!(self, Mode::SirDirect | Mode::SirtDirect)
    }
}

/// Discrete state at time `t`.
///
/// Bulk arrays are row-major (`k = j * nx + i`) with row `j = 0` on the road.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub mode: Mode,
    pub grid: GridSpec,
    /// `v` in transformed modes, `I` in direct modes.
    pub bulk: Vec<f64>,
    /// `S` in direct modes, empty otherwise.
    pub susceptible: Vec<f64>,
    /// `u` or `T` in road modes, empty otherwise.
    pub road: Vec<f64>,
    /// Time-independent `I0` forcing of the transformed modes.
    pub bulk_source: Vec<f64>,
    /// Time-independent `T0` forcing of `RoadfieldUv`.
    pub road_source: Vec<f64>,
}

impl FieldState {
    pub fn nx(&self) -> usize {
        self.grid.nx()
    }

    pub fn ny(&self) -> usize {
        self.grid.ny()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.bulk[j * self.nx() + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let nx = self.nx();
        &self.bulk[j * nx..(j + 1) * nx]
    }

    /// Values along the vertical line `i`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.ny()).map(|j| self.at(i, j)).collect()
    }

    /// Forward-Euler step bound `cfl h² / (4 κ)` with `κ` the largest
    /// diffusivity active in this mode.
    pub fn time_step(&self, params: &ModelParams) -> f64 {
        let kappa = if self.mode.has_road() { params.d.max(params.road_d) } else { params.d };
        self.grid.cfl * self.grid.h * self.grid.h / (4.0 * kappa)
    }
}

fn check_params(params: &ModelParams) -> Result<(), PdeError> {
    params.validate_nonnegative()?;
    if params.d <= 0.0 {
        return Err(PdeError::Model(crate::error::ModelError::InvalidParameter {
            name: "d",
            value: params.d,
        }));
    }
    Ok(())
}

fn check_source_placement(
    grid: &GridSpec,
    source: &SourceSpec,
    which: &'static str,
) -> Result<(), PdeError> {
    source.validate()?;
    let Some((x0, x1)) = source.x_extent() else {
        return Ok(());
    };
    let margin = grid.lx / 2.0;
    if x0 < -grid.lx + margin || x1 > grid.lx - margin {
        return Err(PdeError::SourceNearBoundary { which, margin });
    }
    if which == "i0" && source.shape != SourceShape::Strip {
        let [_, cy] = source.center;
        if cy < 0.0 || cy + source.radius > grid.ly {
            return Err(PdeError::Source(format!(
                "i0 support (centre y = {cy}, radius {}) must lie in 0 <= y <= ly = {}",
                source.radius, grid.ly
            )));
        }
    }
    Ok(())
}

/// Builds the initial state of `mode`.
///
/// Transformed modes start from zero and keep the sources as forcing; direct
/// modes start from `S = S0`, `I = I0`, `T = T0`.
pub fn init_state(
    grid: GridSpec,
    mode: Mode,
    i0: &SourceSpec,
    t0: &SourceSpec,
    params: &ModelParams,
) -> Result<FieldState, PdeError> {
    grid.validate()?;
    check_params(params)?;
    check_source_placement(&grid, i0, "i0")?;
    check_source_placement(&grid, t0, "t0")?;
    if grid.nx() < 3 || grid.ny() < 2 {
        return Err(PdeError::Grid("need at least 3 nodes in x and 2 in y".into()));
    }
    let n = grid.len();
    let nx = grid.nx();
    let i0_samples = i0.sample_bulk(&grid);
    let t0_samples = t0.sample_road(&grid);
    let state = match mode {
        Mode::ScalarV => FieldState {
            t: 0.0,
            mode,
            grid,
            bulk: vec![0.0; n],
            susceptible: Vec::new(),
            road: Vec::new(),
            bulk_source: i0_samples,
            road_source: Vec::new(),
        },
        Mode::RoadfieldUv => FieldState {
            t: 0.0,
            mode,
            grid,
            bulk: vec![0.0; n],
            susceptible: Vec::new(),
            road: vec![0.0; nx],
            bulk_source: i0_samples,
            road_source: t0_samples,
        },
        Mode::SirDirect | Mode::SirtDirect => FieldState {
            t: 0.0,
            mode,
            grid,
            bulk: i0_samples,
            susceptible: vec![params.s0; n],
            road: if mode.has_road() { t0_samples } else { Vec::new() },
            bulk_source: Vec::new(),
            road_source: Vec::new(),
        },
    };
    Ok(state)
}

/// Reusable stepping workspace around one owned state.
pub struct Integrator {
    state: FieldState,
    params: ModelParams,
    dt: f64,
    next_bulk: Vec<f64>,
    next_road: Vec<f64>,
    next_s: Vec<f64>,
}

impl Integrator {
    pub fn new(state: FieldState, params: ModelParams) -> Result<Self, PdeError> {
        check_params(&params)?;
        let dt = state.time_step(&params);
        Ok(Self {
            next_bulk: vec![0.0; state.bulk.len()],
            next_road: vec![0.0; state.road.len()],
            next_s: vec![0.0; state.susceptible.len()],
            state,
            params,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn state(&self) -> &FieldState {
        &self.state
    }

    pub fn into_state(self) -> FieldState {
        self.state
    }

    /// One step of the nominal size.
    pub fn step(&mut self) -> Result<f64, PdeError> {
        self.advance(self.dt)
    }

    /// One forward-Euler step of size `dt <= self.dt()`. Returns the
    /// max-norm of the time derivative over all transported fields.
    pub fn advance(&mut self, dt: f64) -> Result<f64, PdeError> {
        let st = &self.state;
        let p = &self.params;
        let grid = st.grid;
        let (nx, ny) = (grid.nx(), grid.ny());
        let h = grid.h;
        let kd = p.d / (h * h);
        let road = st.mode.has_road();
        let direct = st.mode.is_direct();
        let exch = 2.0 / h;
        let cur = &st.bulk;
        let mut max_rate = 0.0f64;
        // Stays zero unless some updated value is not finite.
        let mut poison = 0.0f64;

        for j in 0..ny {
            let span = j * nx..(j + 1) * nx;
            let row = &cur[span.clone()];
            // Mirror ghosts at y = 0 (the exchange flux is added below) and y = ly.
            let down = if j == 0 { &cur[nx..2 * nx] } else { &cur[(j - 1) * nx..j * nx] };
            let up = if j + 1 == ny { &cur[(j - 1) * nx..j * nx] } else { &cur[(j + 1) * nx..(j + 2) * nx] };
            let out = &mut self.next_bulk[span.clone()];

            // Diffusion first, reaction in a second pass over the same row.
            out[0] = kd * (2.0 * row[1] + down[0] + up[0] - 4.0 * row[0]);
            out[nx - 1] = kd * (2.0 * row[nx - 2] + down[nx - 1] + up[nx - 1] - 4.0 * row[nx - 1]);
            for i in 1..nx - 1 {
                out[i] = kd * (row[i - 1] + row[i + 1] + down[i] + up[i] - 4.0 * row[i]);
            }
            if road && j == 0 {
                for ((o, &c), &u) in out.iter_mut().zip(row).zip(&st.road) {
                    *o += exch * (p.mu * u - p.nu * c);
                }
            }
            if direct {
                let s = &st.susceptible[span];
                for ((o, &c), &s) in out.iter_mut().zip(row).zip(s) {
                    let rate = *o + (p.beta * s - p.alpha) * c;
                    let next = c + dt * rate;
                    max_rate = max_rate.max(rate.abs());
                    poison += next * 0.0;
                    *o = next;
                }
            } else {
                let src = &st.bulk_source[span];
                for ((o, &c), &q) in out.iter_mut().zip(row).zip(src) {
                    let rate = *o + p.f_fast(c) + q;
                    let next = c + dt * rate;
                    max_rate = max_rate.max(rate.abs());
                    poison += next * 0.0;
                    *o = next;
                }
            }
        }
        if poison != 0.0 {
            let k = self.next_bulk.iter().position(|v| !v.is_finite()).unwrap_or(0);
            return Err(PdeError::BlowUp { t: st.t + dt, field: "bulk", i: k % nx, j: k / nx });
        }

        if direct {
            for ((s_next, &s), &c) in self.next_s.iter_mut().zip(&st.susceptible).zip(cur) {
                *s_next = s - dt * p.beta * s * c;
            }
        }

        if road {
            let kr = p.road_d / (h * h);
            let u = &st.road;
            for i in 0..nx {
                let left = if i == 0 { u[1] } else { u[i - 1] };
                let right = if i + 1 == nx { u[nx - 2] } else { u[i + 1] };
                let mut rate = kr * (left + right - 2.0 * u[i]) + p.nu * cur[i] - p.mu * u[i];
                if !direct {
                    rate += st.road_source[i];
                }
                let next = u[i] + dt * rate;
                if !next.is_finite() {
                    return Err(PdeError::BlowUp { t: st.t + dt, field: "road", i, j: 0 });
                }
                max_rate = max_rate.max(rate.abs());
                self.next_road[i] = next;
            }
        }

        let st = &mut self.state;
        std::mem::swap(&mut st.bulk, &mut self.next_bulk);
        if road {
            std::mem::swap(&mut st.road, &mut self.next_road);
        }
        if direct {
            std::mem::swap(&mut st.susceptible, &mut self.next_s);
        }
        st.t += dt;
        Ok(max_rate)
    }
}

/// One explicit step of the nominal size `cfl h² / (4 κ)`.
pub fn step(state: &FieldState, params: &ModelParams) -> Result<FieldState, PdeError> {
    let mut it = Integrator::new(state.clone(), *params)?;
    it.step()?;
    Ok(it.into_state())
}

/// Front level used for boundary warnings and front tracking: `v*/2` for
/// the transformed modes, `1e-3 S0` for the infected density of the direct
/// modes. `None` when nothing propagates.
pub fn front_level(mode: Mode, params: &ModelParams) -> Option<f64> {
    if mode.is_direct() {
        Some(1e-3 * params.s0)
    } else {
        params.v_star().ok().map(|v| 0.5 * v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub t_end: f64,
    pub snapshot_dt: f64,
    /// Spacing of road and wall trace samples; `None` records every step.
    pub trace_dt: Option<f64>,
}

impl RunOptions {
    pub fn new(t_end: f64, snapshot_dt: f64) -> Self {
        Self { t_end, snapshot_dt, trace_dt: None }
    }

    pub fn with_trace_dt(self, trace_dt: f64) -> Self {
        Self { trace_dt: Some(trace_dt), ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub bulk: Vec<f64>,
    pub road: Vec<f64>,
    pub susceptible: Vec<f64>,
}

impl Snapshot {
    fn of(state: &FieldState) -> Self {
        Self {
            t: state.t,
            bulk: state.bulk.clone(),
            road: state.road.clone(),
            susceptible: state.susceptible.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub mode: Mode,
    pub grid: GridSpec,
    pub dt: f64,
    pub snapshots: Vec<Snapshot>,
    pub trace_times: Vec<f64>,
    /// `u(t, ·)` or `T(t, ·)` per trace time (empty rows without road).
    pub road_trace: Vec<Vec<f64>>,
    /// `v(t, ·, 0)` or `I(t, ·, 0)` per trace time.
    pub wall_trace: Vec<Vec<f64>>,
    /// Set when the front came within `10 h` of `x = ±lx`.
    pub boundary_warning: bool,
    pub final_state: FieldState,
}

fn near_boundary(state: &FieldState, level: f64) -> bool {
    let nx = state.nx();
    let band = 10.min(nx / 2);
    (0..state.ny()).any(|j| {
        let row = state.row(j);
        row[..band].iter().chain(&row[nx - band..]).any(|&v| v >= level)
    })
}

/// Integrates `state` up to `t_end` (relative to its current time),
/// recording full snapshots every `snapshot_dt` and road/wall traces.
///
/// Steps are shortened to land exactly on snapshot times and on `t_end`,
/// so identical inputs give bit-identical trajectories.
pub fn run(state: FieldState, params: &ModelParams, opts: RunOptions) -> Result<Trajectory, PdeError> {
    if !(opts.t_end >= 0.0 && opts.t_end.is_finite()) {
        return Err(PdeError::Options(format!("t_end must be >= 0, got {}", opts.t_end)));
    }
    if !(opts.snapshot_dt > 0.0) {
        return Err(PdeError::Options(format!("snapshot_dt must be > 0, got {}", opts.snapshot_dt)));
    }
    if let Some(tr) = opts.trace_dt {
        if !(tr > 0.0) {
            return Err(PdeError::Options(format!("trace_dt must be > 0, got {tr}")));
        }
    }
    let level = front_level(state.mode, params);
    let t_start = state.t;
    let t_final = t_start + opts.t_end;
    let mut it = Integrator::new(state, *params)?;
    let dt = it.dt();
    let mut traj = Trajectory {
        mode: it.state().mode,
        grid: it.state().grid,
        dt,
        snapshots: vec![Snapshot::of(it.state())],
        trace_times: Vec::new(),
        road_trace: Vec::new(),
        wall_trace: Vec::new(),
        boundary_warning: false,
        final_state: it.state().clone(),
    };
    let record_trace = |traj: &mut Trajectory, st: &FieldState| {
        traj.trace_times.push(st.t);
        traj.road_trace.push(st.road.clone());
        traj.wall_trace.push(st.row(0).to_vec());
        if let Some(level) = level {
            traj.boundary_warning |= near_boundary(st, level);
        }
    };
    record_trace(&mut traj, it.state());

    let mut snap_index = 1u64;
    let mut trace_index = 1u64;
    let tiny = 1e-9 * dt;
    while it.state().t < t_final - tiny {
        let t = it.state().t;
        let next_snap = t_start + snap_index as f64 * opts.snapshot_dt;
        let step = dt.min(next_snap - t).min(t_final - t);
        it.advance(step)?;
        let st = it.state();
        if st.t >= next_snap - tiny {
            traj.snapshots.push(Snapshot::of(st));
            snap_index += 1;
        }
        let due = match opts.trace_dt {
            None => true,
            Some(tr) => st.t >= t_start + trace_index as f64 * tr - tiny || st.t >= t_final - tiny,
        };
        if due {
            record_trace(&mut traj, st);
            if let Some(tr) = opts.trace_dt {
                while t_start + trace_index as f64 * tr <= st.t + tiny {
                    trace_index += 1;
                }
            }
        }
    }
    if traj.snapshots.last().map(|s| s.t) != Some(it.state().t) {
        traj.snapshots.push(Snapshot::of(it.state()));
    }
    traj.final_state = it.into_state();
    Ok(traj)
}

/// Result of a long-time relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyOutcome {
    pub state: FieldState,
    pub converged: bool,
    /// Max-norm of the time derivative at the last step.
    pub residual: f64,
}

/// Default residual tolerance (non-dimensional rate units).
pub const STEADY_TOL: f64 = 1e-8;

/// Relaxes a transformed-mode state towards its stationary limit.
pub fn solve_steady(
    state: FieldState,
    params: &ModelParams,
    tol: f64,
    t_max: f64,
) -> Result<SteadyOutcome, PdeError> {
    if state.mode.is_direct() {
        return Err(PdeError::Mode("steady solve needs scalar_v or roadfield_uv".into()));
    }
    if !(tol > 0.0) {
        return Err(PdeError::Options(format!("tol must be > 0, got {tol}")));
    }
    let t_stop = state.t + t_max;
    let mut it = Integrator::new(state, *params)?;
    let mut residual = f64::INFINITY;
    while it.state().t < t_stop {
        residual = it.step()?;
        if residual < tol {
            return Ok(SteadyOutcome { state: it.into_state(), converged: true, residual });
        }
    }
    Ok(SteadyOutcome { state: it.into_state(), converged: false, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ModelParams {
        ModelParams { d: 1.0, road_d: 10.0, alpha: 1.0, beta: 2.0, mu: 1.0, nu: 1.0, s0: 1.0 }
    }

    fn disk_state(grid: GridSpec, mode: Mode, p: &ModelParams) -> FieldState {
        init_state(grid, mode, &SourceSpec::disk([0.0, 1.0], 1.0, 1.0), &SourceSpec::none(), p).unwrap()
    }

    /// Trapezoid-weighted mass of the bulk plus the road.
    fn mass(st: &FieldState) -> f64 {
        let g = st.grid;
        let nx = g.nx();
        let bulk: f64 = st.bulk.iter().enumerate().map(|(k, v)| g.weight_x(k % nx) * g.weight_y(k / nx) * v).sum();
        let road: f64 = st.road.iter().enumerate().map(|(i, u)| g.weight_x(i) * u).sum();
        bulk + road
    }

    #[test]
    fn init_modes() {
        let p = base();
        let g = GridSpec::new(8.0, 4.0, 0.25).unwrap();
        let st = disk_state(g, Mode::RoadfieldUv, &p);
        assert!(st.bulk.iter().chain(&st.road).all(|&v| v == 0.0));
        assert!(st.bulk_source.iter().any(|&v| v > 0.0));
        let st = disk_state(g, Mode::SirtDirect, &p);
        assert!(st.road.iter().all(|&v| v == 0.0));
        assert!(st.susceptible.iter().all(|&s| s == p.s0));
        let count = st.bulk.iter().filter(|&&v| v > 0.0).count() as f64;
        let area = std::f64::consts::PI / (g.h * g.h);
        assert!((count - area).abs() <= 2.0 * std::f64::consts::PI / g.h + 1.0);
        let near_edge = SourceSpec::disk([5.0, 1.0], 1.0, 1.0);
        assert!(matches!(
            init_state(g, Mode::ScalarV, &near_edge, &SourceSpec::none(), &p),
            Err(PdeError::SourceNearBoundary { .. })
        ));
        let above = SourceSpec::disk([0.0, 3.5], 1.0, 1.0);
        assert!(init_state(g, Mode::ScalarV, &above, &SourceSpec::none(), &p).is_err());
    }

    #[test]
    fn zero_state_stays_zero() {
        let p = base();
        let g = GridSpec::new(8.0, 4.0, 0.5).unwrap();
        for mode in [Mode::ScalarV, Mode::RoadfieldUv, Mode::SirDirect, Mode::SirtDirect] {
            let st = init_state(g, mode, &SourceSpec::none(), &SourceSpec::none(), &p).unwrap();
            let traj = run(st, &p, RunOptions::new(2.0, 1.0)).unwrap();
            let last = &traj.final_state;
            assert!(last.bulk.iter().chain(&last.road).all(|&v| v == 0.0), "{mode:?}");
        }
    }

    #[test]
    fn decaying_heat_kernel() {
        // β = 0 gives f(v) = -α v; a Gaussian centred on the mirror line
        // evolves as (t0 / (t0 + t)) exp(-r² / (4 d (t0 + t))) e^{-α t}.
        let p = ModelParams { beta: 0.0, mu: 0.0, nu: 0.0, d: 0.5, ..base() };
        let (t0, t) = (1.0, 1.0);
        let exact = |x: f64, y: f64, s: f64| {
            t0 / (t0 + s) * (-(x * x + y * y) / (4.0 * p.d * (t0 + s))).exp() * (-p.alpha * s).exp()
        };
        let mut errs = Vec::new();
        for h in [0.2, 0.1] {
            let g = GridSpec::new(10.0, 10.0, h).unwrap();
            let mut st = init_state(g, Mode::ScalarV, &SourceSpec::none(), &SourceSpec::none(), &p).unwrap();
            let nx = g.nx();
            for (k, v) in st.bulk.iter_mut().enumerate() {
                *v = exact(g.x(k % nx), g.y(k / nx), 0.0);
            }
            let out = run(st, &p, RunOptions::new(t, t)).unwrap().final_state;
            let err = out
                .bulk
                .iter()
                .enumerate()
                .map(|(k, v)| (v - exact(g.x(k % nx), g.y(k / nx), t)).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[0] < 2e-3, "{errs:?}");
        // Second order: the error drops by about four.
        assert!(errs[1] < 0.3 * errs[0], "{errs:?}");
    }

    #[test]
    fn uniform_state_follows_ode() {
        let p = base();
        let g = GridSpec::new(2.0, 1.0, 0.1).unwrap();
        let mut st = init_state(g, Mode::ScalarV, &SourceSpec::none(), &SourceSpec::none(), &p).unwrap();
        st.bulk.iter_mut().for_each(|v| *v = 0.1);
        let t_end = 3.0;
        let out = run(st, &p, RunOptions::new(t_end, t_end)).unwrap().final_state;

        // Classical RK4 with a tiny step.
        let f = |v: f64| p.evaluate_f(v).unwrap();
        let n = 30_000;
        let dt = t_end / n as f64;
        let mut v = 0.1;
        for _ in 0..n {
            let k1 = f(v);
            let k2 = f(v + 0.5 * dt * k1);
            let k3 = f(v + 0.5 * dt * k2);
            let k4 = f(v + dt * k3);
            v += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let spread = out.bulk.iter().fold(0.0f64, |m, x| m.max((x - out.bulk[0]).abs()));
        assert!(spread < 1e-14);
        assert!((out.bulk[0] - v).abs() < 1e-3, "{} vs {v}", out.bulk[0]);
    }

    #[test]
    fn positive_monotone_and_bounded() {
        let p = base();
        // Constant supersolution: f(s) + max I0 < 0.
        let s_bar = (1..).map(|k| 0.01 * k as f64).find(|&s| p.evaluate_f(s).unwrap() + 1.0 < 0.0).unwrap();
        let g = GridSpec::new(12.0, 4.0, 0.25).unwrap();
        for mode in [Mode::ScalarV, Mode::RoadfieldUv] {
            let traj = run(disk_state(g, mode, &p), &p, RunOptions::new(4.0, 0.5)).unwrap();
            for pair in traj.snapshots.windows(2) {
                let (a, b) = (&pair[0], &pair[1]);
                assert!(b.bulk.iter().zip(&a.bulk).all(|(y, x)| y >= x), "{mode:?}");
                assert!(b.road.iter().zip(&a.road).all(|(y, x)| y >= x), "{mode:?}");
            }
            let last = &traj.final_state;
            assert!(last.bulk.iter().all(|&v| (0.0..=s_bar).contains(&v)));
            assert!(last.road.iter().all(|&v| v >= 0.0));
        }
        let traj = run(disk_state(g, Mode::SirtDirect, &p), &p, RunOptions::new(4.0, 0.5)).unwrap();
        for snap in &traj.snapshots {
            assert!(snap.bulk.iter().chain(&snap.road).all(|&v| v >= 0.0));
            assert!(snap.susceptible.iter().all(|&s| (0.0..=p.s0).contains(&s)));
        }
    }

    #[test]
    fn pure_diffusion_conserves_mass() {
        let p = ModelParams { alpha: 0.0, beta: 0.0, ..base() };
        let g = GridSpec::new(10.0, 5.0, 0.25).unwrap();
        let mut st = init_state(g, Mode::RoadfieldUv, &SourceSpec::none(), &SourceSpec::none(), &p).unwrap();
        let nx = g.nx();
        for (k, v) in st.bulk.iter_mut().enumerate() {
            let (x, y) = (g.x(k % nx), g.y(k / nx));
            *v = (-(x * x + (y - 1.0).powi(2))).exp();
        }
        for (i, u) in st.road.iter_mut().enumerate() {
            *u = 2.0 * (-(g.x(i) - 1.0).powi(2)).exp();
        }
        let m0 = mass(&st);
        let t_end = 5.0;
        let traj = run(st, &p, RunOptions::new(t_end, 1.0)).unwrap();
        for snap in &traj.snapshots {
            let probe = FieldState { bulk: snap.bulk.clone(), road: snap.road.clone(), ..traj.final_state.clone() };
            assert!((mass(&probe) - m0).abs() <= 1e-10 * m0 * t_end);
        }
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let p = base();
        let g = GridSpec::new(8.0, 4.0, 0.25).unwrap();
        let opts = RunOptions::new(1.3, 0.5);
        let a = run(disk_state(g, Mode::SirtDirect, &p), &p, opts).unwrap();
        let b = run(disk_state(g, Mode::SirtDirect, &p), &p, opts).unwrap();
        assert_eq!(a, b);
        let times: Vec<f64> = a.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(times.len(), 4);
        assert!((times[3] - 1.3).abs() < 1e-12);
    }

    #[test]
    fn zero_horizon_keeps_initial_snapshot() {
        let p = base();
        let g = GridSpec::new(8.0, 4.0, 0.25).unwrap();
        let traj = run(disk_state(g, Mode::RoadfieldUv, &p), &p, RunOptions::new(0.0, 1.0)).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.snapshots[0].t, 0.0);
        assert!(run(disk_state(g, Mode::RoadfieldUv, &p), &p, RunOptions::new(-1.0, 1.0)).is_err());
    }

    #[test]
    fn trace_decimation() {
        let p = base();
        let g = GridSpec::new(8.0, 4.0, 0.25).unwrap();
        let traj = run(disk_state(g, Mode::RoadfieldUv, &p), &p, RunOptions::new(2.0, 1.0).with_trace_dt(0.25)).unwrap();
        assert_eq!(traj.trace_times.len(), 9);
        for (k, t) in traj.trace_times.iter().enumerate() {
            assert!((t - 0.25 * k as f64).abs() < 2.0 * traj.dt);
        }
        let full = run(disk_state(g, Mode::RoadfieldUv, &p), &p, RunOptions::new(2.0, 1.0)).unwrap();
        assert_eq!(full.trace_times.len(), full.wall_trace.len());
        assert!(full.trace_times.len() > 100);
    }

    #[test]
    fn blow_up_is_reported() {
        let p = base();
        let g = GridSpec::new(8.0, 4.0, 0.25).unwrap();
        let mut st = disk_state(g, Mode::ScalarV, &p);
        st.bulk[5] = f64::INFINITY;
        let err = run(st, &p, RunOptions::new(1.0, 1.0)).unwrap_err();
        assert!(matches!(err, PdeError::BlowUp { field: "bulk", .. }), "{err:?}");
    }

    #[test]
    fn steady_plateau_and_extinction() {
        let p = base();
        let g = GridSpec::new(40.0, 8.0, 0.5).unwrap();
        let vs = p.v_star().unwrap();
        let out = solve_steady(disk_state(g, Mode::RoadfieldUv, &p), &p, STEADY_TOL, 400.0).unwrap();
        assert!(out.converged, "residual {}", out.residual);
        let st = &out.state;
        let mid = g.j_of(g.ly / 2.0);
        for i in [0, 3, g.nx() - 4, g.nx() - 1] {
            assert!((st.at(i, mid) / vs - 1.0).abs() < 0.02);
            assert!((st.road[i] / (p.nu / p.mu * vs) - 1.0).abs() < 0.02);
        }

        let sub = ModelParams { beta: 0.5, ..p };
        let out = solve_steady(disk_state(g, Mode::ScalarV, &sub), &sub, STEADY_TOL, 400.0).unwrap();
        assert!(out.converged);
        let max = out.state.bulk.iter().fold(0.0f64, |m, &v| m.max(v));
        let band = g.nx() / 20;
        for j in 0..g.ny() {
            let row = out.state.row(j);
            assert!(row[..band].iter().chain(&row[g.nx() - band..]).all(|&v| v < 1e-3 * max));
        }
    }

    #[test]
    fn steady_without_source_is_zero() {
        let p = base();
        let g = GridSpec::new(8.0, 4.0, 0.5).unwrap();
        let st = init_state(g, Mode::RoadfieldUv, &SourceSpec::none(), &SourceSpec::none(), &p).unwrap();
        let out = solve_steady(st, &p, STEADY_TOL, 10.0).unwrap();
        assert!(out.converged);
        assert_eq!(out.residual, 0.0);
        assert!(out.state.bulk.iter().all(|&v| v == 0.0));
        let direct = disk_state(g, Mode::SirDirect, &p);
        assert!(matches!(solve_steady(direct, &p, 1e-8, 1.0), Err(PdeError::Mode(_))));
    }

    #[test]
    fn direct_and_transformed_runs_agree() {
        let p = base();
        let g = GridSpec::new(10.0, 4.0, 0.25).unwrap();
        let t_end = 4.0;
        let transformed = run(disk_state(g, Mode::RoadfieldUv, &p), &p, RunOptions::new(t_end, t_end)).unwrap();
        let direct = run(disk_state(g, Mode::SirtDirect, &p), &p, RunOptions::new(t_end, t_end)).unwrap();
        let times = &direct.trace_times;
        let mut integral = vec![0.0; g.nx()];
        for k in 1..times.len() {
            let w = 0.5 * (times[k] - times[k - 1]);
            for (acc, (a, b)) in integral.iter_mut().zip(direct.road_trace[k - 1].iter().zip(&direct.road_trace[k])) {
                *acc += w * (a + b);
            }
        }
        let u = &transformed.final_state.road;
        let max_u = u.iter().fold(0.0f64, |m, &v| m.max(v));
        let err = u.iter().zip(&integral).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(max_u > 0.0 && err <= 0.01 * max_u, "err {err}, max {max_u}");
    }

    #[test]
    fn steady_is_radially_nonincreasing() {
        let p = ModelParams { road_d: 1.0, ..base() };
        let g = GridSpec::new(16.0, 16.0, 0.25).unwrap();
        let i0 = SourceSpec::gaussian([0.0, 0.0], 2.0, 1.0);
        let st = init_state(g, Mode::ScalarV, &i0, &SourceSpec::none(), &p).unwrap();
        let out = solve_steady(st, &p, 1e-9, 400.0).unwrap();
        assert!(out.converged);
        let c = g.i_of(0.0);
        let start = (2.0 / g.h).ceil() as usize;
        let rays: [(isize, usize); 3] = [(1, 0), (0, 1), (1, 1)];
        for (di, dj) in rays {
            let vals: Vec<f64> = (start..g.ny())
                .map(|k| out.state.at((c as isize + di * k as isize) as usize, dj * k))
                .collect();
            assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-8), "ray ({di}, {dj})");
        }
    }
}
