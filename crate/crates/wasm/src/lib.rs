//! Browser demo: spreading speed against road diffusivity, the reduced speed
//! curve and a live road-field simulation.
//!
//! The plain Rust API below is what the `wasm_bindgen` wrappers in
//! [`bindings`] call, so it can be tested natively.

use roadfield::analysis::front_position;
use roadfield::pde::{front_level, init_state, GridSpec, Integrator, Mode, SourceSpec};
use roadfield::{c_sirt, omega_reduced, reduced_speed, ModelParams};

mod bindings;

/// `c_SIR` and `c_SIR^T` for each road diffusivity in `road_ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedCurve {
    pub c_sir: f64,
    pub c_sirt: Vec<f64>,
}

pub fn speed_curve(base: ModelParams, road_ds: &[f64]) -> Result<SpeedCurve, String> {
    base.validate().map_err(|e| e.to_string())?;
    if base.r0() <= 1.0 {
        return Err(format!("R0 = {:.4} <= 1: no spreading", base.r0()));
    }
    let c_sir = base.c_sir().map_err(|e| e.to_string())?;
    let c_sirt = road_ds
        .iter()
        .map(|&dd| {
            let p = ModelParams { road_d: dd, ..base };
            p.validate().map_err(|e| e.to_string())?;
            c_sirt(&p).map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;
    Ok(SpeedCurve { c_sir, c_sirt })
}

/// `omega(lambda)` and the finite-`D/d` reduced speed at each `lambda`.
pub fn omega_curve(lambdas: &[f64], rho: f64, dd: f64) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut omega = Vec::with_capacity(lambdas.len());
    let mut finite = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        omega.push(omega_reduced(l).map_err(|e| e.to_string())?);
        finite.push(reduced_speed(l, rho, dd).map_err(|e| e.to_string())?);
    }
    Ok((omega, finite))
}

/// Direct SIR(T) run from a small infected disk next to the road.
pub struct FieldDemo {
    integrator: Integrator,
    params: ModelParams,
    xs: Vec<f64>,
}

impl FieldDemo {
    pub fn new(params: ModelParams, with_road: bool, lx: f64, ly: f64, h: f64) -> Result<Self, String> {
        let mode = if with_road { Mode::SirtDirect } else { Mode::SirDirect };
        let grid = GridSpec::new(lx, ly, h).map_err(|e| e.to_string())?;
        let i0 = SourceSpec::disk([0.0, 1.0], 1.0, 0.5 * params.s0);
        let state = init_state(grid, mode, &i0, &SourceSpec::none(), &params).map_err(|e| e.to_string())?;
        let integrator = Integrator::new(state, params).map_err(|e| e.to_string())?;
        Ok(Self { integrator, params, xs: grid.xs() })
    }

    /// Integrates `span` further time units.
    pub fn advance(&mut self, span: f64) -> Result<(), String> {
        let target = self.time() + span;
        loop {
            let rest = target - self.time();
            if rest <= 1e-12 * target.abs().max(1.0) {
                return Ok(());
            }
            let dt = rest.min(self.integrator.dt());
            self.integrator.advance(dt).map_err(|e| e.to_string())?;
        }
    }

    pub fn time(&self) -> f64 {
        self.integrator.state().t
    }

    pub fn nx(&self) -> usize {
        self.integrator.state().nx()
    }

    pub fn ny(&self) -> usize {
        self.integrator.state().ny()
    }

    /// Infected density, row-major with the road row first.
    pub fn infected(&self) -> &[f64] {
        &self.integrator.state().bulk
    }

    /// Travellers on the road (empty without road).
    pub fn road(&self) -> &[f64] {
        &self.integrator.state().road
    }

    /// Rightmost `x` where the infected density along the road exceeds the
    /// front level.
    pub fn front(&self) -> Option<f64> {
        let st = self.integrator.state();
        let level = front_level(st.mode, &self.params)?;
        front_position(st.row(0), &self.xs, level)
    }
}
