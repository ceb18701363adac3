//! Model parameters, the KPP nonlinearity and derived scalars.
//!
//! The cumulative-infection potential `v = ∫ I dt` obeys a Fisher-KPP
//! equation with reaction
//!
//! ```text
//! f(v) = S0 (1 - exp(-β v)) - α v
//! ```
//!
//! which is concave, vanishes at zero and has slope `α (R0 - 1)` there.

use serde::{Deserialize, Serialize};

use crate::bisect::{bisect, BisectError};
use crate::error::ModelError;

/// The seven dimensional coefficients of the road-field SIR system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Diffusivity in the field (length²/time).
    pub d: f64,
    /// Diffusivity on the road (length²/time).
    #[serde(rename = "D")]
    pub road_d: f64,
    /// Recovery rate (1/time).
    pub alpha: f64,
    /// Transmission rate (1/(density·time)).
    pub beta: f64,
    /// Road-to-field exchange rate (1/time).
    pub mu: f64,
    /// Field-to-road exchange rate (length/time).
    pub nu: f64,
    /// Initial susceptible density.
    pub s0: f64,
}

impl ModelParams {
    pub fn new(
        d: f64,
        road_d: f64,
        alpha: f64,
        beta: f64,
        mu: f64,
        nu: f64,
        s0: f64,
    ) -> Result<Self, ModelError> {
        let p = Self { d, road_d, alpha, beta, mu, nu, s0 };
        p.validate()?;
        Ok(p)
    }

    fn fields(&self) -> [(&'static str, f64); 7] {
        [
            ("d", self.d),
            ("D", self.road_d),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("mu", self.mu),
            ("nu", self.nu),
            ("s0", self.s0),
        ]
    }

    /// Every coefficient strictly positive and finite.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in self.fields() {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    /// Weaker check used by the solvers: zero rates are allowed so that
    /// pure diffusion or decoupled road/field runs can be set up.
    pub fn validate_nonnegative(&self) -> Result<(), ModelError> {
        for (name, value) in self.fields() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    /// Basic reproduction number `S0 β / α`.
    pub fn r0(&self) -> f64 {
        self.s0 * self.beta / self.alpha
    }

    /// `f'(0) = α (R0 - 1)`.
    pub fn linear_growth(&self) -> f64 {
        self.s0 * self.beta - self.alpha
    }

    /// Reaction term without argument checking.
    #[inline]
    pub(crate) fn f_unchecked(&self, v: f64) -> f64 {
        -self.s0 * (-self.beta * v).exp_m1() - self.alpha * v
    }

    /// Same as [`Self::f_unchecked`] through a cheaper `1 - exp(-x)`; used in the stencil loops.
    #[inline]
    pub(crate) fn f_fast(&self, v: f64) -> f64 {
        self.s0 * one_minus_exp_neg(self.beta * v) - self.alpha * v
    }

    pub fn evaluate_f(&self, v: f64) -> Result<f64, ModelError> {
        check_density(v)?;
        Ok(self.f_unchecked(v))
    }

    pub fn f_prime(&self, v: f64) -> Result<f64, ModelError> {
        check_density(v)?;
        Ok(self.s0 * self.beta * (-self.beta * v).exp() - self.alpha)
    }

    /// Unique positive zero of `f`, the far-field plateau of the
    /// cumulative potential when the epidemic spreads.
    pub fn v_star(&self) -> Result<f64, ModelError> {
        self.validate()?;
        let r0 = self.r0();
        if r0 <= 1.0 {
            return Err(ModelError::NoPositiveRoot { r0 });
        }
        // f(v) <= S0 - α v < 0 at the upper end of the bracket.
        let upper = self.s0 * r0 / self.alpha;
        bisect(|v| self.f_unchecked(v) > 0.0, 0.0, upper, 1e-12).map_err(|e| match e {
            BisectError::IterationLimit { .. } => ModelError::Convergence("v_star"),
        })
    }

    /// `v_*` for `R0 > 1`, zero otherwise: the value around which the
    /// steady state is linearised.
    pub fn plateau(&self) -> Result<f64, ModelError> {
        if self.r0() > 1.0 {
            self.v_star()
        } else {
            self.validate()?;
            Ok(0.0)
        }
    }

    /// Spreading speed without the road, `2 sqrt(d α (R0 - 1))`.
    pub fn c_sir(&self) -> Result<f64, ModelError> {
        self.validate()?;
        let r0 = self.r0();
        if r0 <= 1.0 {
            return Err(ModelError::NoSpreading { r0 });
        }
        Ok(2.0 * (self.d * self.alpha * (r0 - 1.0)).sqrt())
    }

    /// Total number ever infected for a given final potential.
    pub fn infected_total(&self, v: f64) -> f64 {
        -self.s0 * (-self.beta * v).exp_m1()
    }

    pub fn reduce(&self) -> Result<ReducedParams, ModelError> {
        self.validate()?;
        let r0 = self.r0();
        let mu_bar = self.mu / self.alpha;
        // ν carries length/time; scale by the field's characteristic speed.
        let nu_bar = self.nu / (self.d * self.alpha).sqrt();
        let w_sir = (r0 > 1.0).then(|| 2.0 * (r0 - 1.0).sqrt());
        Ok(ReducedParams {
            dd: self.road_d / self.d,
            r0,
            mu_bar,
            nu_bar,
            w_sir,
            lambda: w_sir.map(|w| mu_bar / (nu_bar * w)),
            rho: w_sir.map(|w| w / nu_bar),
        })
    }

    /// Characteristic speed `sqrt(d α)` used to restore dimensions.
    pub fn speed_scale(&self) -> f64 {
        (self.d * self.alpha).sqrt()
    }
}

/// `1 - exp(-x)` for `x >= 0` to within a few ulps: a Taylor polynomial
/// below `0.01` avoids the cancellation, plain `exp` above.
#[inline]
pub(crate) fn one_minus_exp_neg(x: f64) -> f64 {
    if x < 0.01 {
        x * (1.0 - x * (0.5 - x * (1.0 / 6.0 - x * (1.0 / 24.0 - x * (1.0 / 120.0 - x * (1.0 / 720.0))))))
    } else {
        1.0 - (-x).exp()
    }
}

fn check_density(v: f64) -> Result<(), ModelError> {
    if v.is_nan() || v < 0.0 {
        Err(ModelError::NegativeDensity(v))
    } else {
        Ok(())
    }
}

/// Non-dimensional groups of the road-field system.
///
/// `w_sir`, `lambda` and `rho` only exist when `R0 > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedParams {
    /// Diffusivity ratio `D / d`.
    pub dd: f64,
    pub r0: f64,
    pub mu_bar: f64,
    pub nu_bar: f64,
    pub w_sir: Option<f64>,
    pub lambda: Option<f64>,
    pub rho: Option<f64>,
}
