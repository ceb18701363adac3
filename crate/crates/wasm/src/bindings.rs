use roadfield::ModelParams;
use wasm_bindgen::prelude::*;

use crate::FieldDemo;

fn params(d: f64, road_d: f64, alpha: f64, beta: f64, mu: f64, nu: f64, s0: f64) -> Result<ModelParams, JsError> {
    ModelParams::new(d, road_d, alpha, beta, mu, nu, s0).map_err(|e| JsError::new(&e.to_string()))
}

/// `[c_SIR, c_SIR^T(D_1), c_SIR^T(D_2), ...]`.
#[wasm_bindgen(js_name = speedCurve)]
pub fn speed_curve(
    d: f64,
    alpha: f64,
    beta: f64,
    mu: f64,
    nu: f64,
    s0: f64,
    road_ds: Vec<f64>,
) -> Result<Vec<f64>, JsError> {
    let base = params(d, d, alpha, beta, mu, nu, s0)?;
    let curve = crate::speed_curve(base, &road_ds).map_err(|e| JsError::new(&e))?;
    Ok(std::iter::once(curve.c_sir).chain(curve.c_sirt).collect())
}

/// `[omega(l_1), w(l_1), omega(l_2), w(l_2), ...]` with `w` the reduced
/// speed at finite `dd = D/d`.
#[wasm_bindgen(js_name = omegaCurve)]
pub fn omega_curve(lambdas: Vec<f64>, rho: f64, dd: f64) -> Result<Vec<f64>, JsError> {
    let (omega, finite) = crate::omega_curve(&lambdas, rho, dd).map_err(|e| JsError::new(&e))?;
    Ok(omega.into_iter().zip(finite).flat_map(|(o, w)| [o, w]).collect())
}

#[wasm_bindgen]
pub struct Simulation(FieldDemo);

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d: f64,
        road_d: f64,
        alpha: f64,
        beta: f64,
        mu: f64,
        nu: f64,
        s0: f64,
        with_road: bool,
        lx: f64,
        ly: f64,
        h: f64,
    ) -> Result<Simulation, JsError> {
        let p = params(d, road_d, alpha, beta, mu, nu, s0)?;
        FieldDemo::new(p, with_road, lx, ly, h).map(Simulation).map_err(|e| JsError::new(&e))
    }

    pub fn advance(&mut self, span: f64) -> Result<(), JsError> {
        self.0.advance(span).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn time(&self) -> f64 {
        self.0.time()
    }

    #[wasm_bindgen(getter)]
    pub fn nx(&self) -> usize {
        self.0.nx()
    }

    #[wasm_bindgen(getter)]
    pub fn ny(&self) -> usize {
        self.0.ny()
    }

    pub fn infected(&self) -> Vec<f64> {
        self.0.infected().to_vec()
    }

    pub fn road(&self) -> Vec<f64> {
        self.0.road().to_vec()
    }

    /// Front position along the road, or `undefined` before it forms.
    pub fn front(&self) -> Option<f64> {
        self.0.front()
    }
}
