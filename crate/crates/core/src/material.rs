//! Material interpolation schemes mapping a design variable to Young's modulus.
//!
//! Three schemes are supported: the linear ersatz material, the 2D
//! Hashin-Shtrikman upper bound, and the SIMP power law. The ersatz model
//! treats an intermediate `x` as the solid volume fraction of an element and
//! is the one to use when the goal is a smooth design; the other two penalize
//! intermediate values and drive the design to 0/1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PENALTY: f64 = 3.0;
pub const DEFAULT_X_MIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ersatz,
    #[serde(alias = "hs")]
    HsUpper2d,
    Simp,
}

impl ModelKind {
    pub fn is_penalized(self) -> bool {
        !matches!(self, ModelKind::Ersatz)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ersatz => "ersatz",
            ModelKind::HsUpper2d => "hs_upper_2d",
            ModelKind::Simp => "simp",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ersatz" => Ok(ModelKind::Ersatz),
            "hs" | "hs_upper_2d" => Ok(ModelKind::HsUpper2d),
            "simp" => Ok(ModelKind::Simp),
            other => Err(Error::param(
                "model",
                format!("unknown model `{other}` (expected ersatz, hs, simp)"),
            )),
        }
    }
}

/// A validated interpolation scheme together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialModel {
    kind: ModelKind,
    penalty: f64,
    young: f64,
    x_min: f64,
}

impl MaterialModel {
    pub fn new(kind: ModelKind, penalty: f64, young: f64, x_min: f64) -> Result<Self> {
        if kind == ModelKind::Simp && !(penalty >= 1.0 && penalty.is_finite()) {
            return Err(Error::param("p", format!("SIMP penalty must be >= 1, got {penalty}")));
        }
        if !(young > 0.0 && young.is_finite()) {
            return Err(Error::param("young", format!("must be positive, got {young}")));
        }
        if !(x_min > 0.0 && x_min < 1.0) {
            return Err(Error::param("x_min", format!("must lie in (0, 1), got {x_min}")));
        }
        Ok(Self {
            kind,
            penalty,
            young,
            x_min,
        })
    }

    pub fn ersatz() -> Self {
        Self::new(ModelKind::Ersatz, DEFAULT_PENALTY, 1.0, DEFAULT_X_MIN).unwrap()
    }

    pub fn hs_upper_2d() -> Self {
        Self::new(ModelKind::HsUpper2d, DEFAULT_PENALTY, 1.0, DEFAULT_X_MIN).unwrap()
    }

    pub fn simp(penalty: f64) -> Result<Self> {
        Self::new(ModelKind::Simp, penalty, 1.0, DEFAULT_X_MIN)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn young(&self) -> f64 {
        self.young
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    /// Same model with a different SIMP exponent; used by the continuation schedule.
    pub(crate) fn with_penalty(mut self, penalty: f64) -> Self {
        self.penalty = penalty;
        self
    }

    fn check(&self, x: f64) -> Result<()> {
        // Tiny slack so values clamped to x_min in f64 are not rejected.
        if x.is_nan() || x < self.x_min * (1.0 - 1e-12) || x > 1.0 {
            return Err(Error::param(
                "x",
                format!("design variable {x} outside [{}, 1]", self.x_min),
            ));
        }
        Ok(())
    }

    pub fn young_modulus(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.modulus_unchecked(x))
    }

    pub fn modulus_derivative(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.derivative_unchecked(x))
    }

    #[inline]
    pub(crate) fn modulus_unchecked(&self, x: f64) -> f64 {
        let scale = match self.kind {
            ModelKind::Ersatz => x,
            ModelKind::HsUpper2d => x / (3.0 - 2.0 * x),
            ModelKind::Simp => x.powf(self.penalty),
        };
        scale * self.young
    }

    #[inline]
    pub(crate) fn derivative_unchecked(&self, x: f64) -> f64 {
        let slope = match self.kind {
            ModelKind::Ersatz => 1.0,
            ModelKind::HsUpper2d => 3.0 / ((3.0 - 2.0 * x) * (3.0 - 2.0 * x)),
            ModelKind::Simp => self.penalty * x.powf(self.penalty - 1.0),
        };
        slope * self.young
    }

    /// Element moduli for a whole design field.
    pub fn moduli(&self, x: &[f64]) -> Result<Vec<f64>> {
        x.iter().map(|&xi| self.young_modulus(xi)).collect()
    }
}
