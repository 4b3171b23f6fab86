//! Model parameters, sign conventions, linear acceleration potentials, and
//! the closed-form steady-state field distributions.
//!
//! The two-field model couples a credits-rate field `A(t,x,y)` and a
//! payment-rate field `B(t,x,y)` on the risk square `[0, X]²`. Its scalar
//! constants carry fixed sign conventions:
//!
//! - `a1 > 0`, `a2 < 0` — continuity couplings to the conjugate velocity
//!   divergence,
//! - `b > 0`, `d < 0` — motion couplings to the conjugate field gradient,
//! - `A0 > 0`, `B0 > 0`, `X > 0` — corner scales and domain size.
//!
//! The macro accelerations `(h_x, h_y)` and `(g_x, g_y)` derive from linear
//! potentials and are unconstrained in sign; wave analysis additionally
//! requires the coupling identity `A0²·h_y = B0²·g_y`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for the `A0²·h_y = B0²·g_y` coupling identity.
/// The constraint is exact; the slack only absorbs floating-point noise.
pub const COUPLING_REL_TOL: f64 = 1e-12;

/// All scalar constants of the two-field model.
///
/// Serializes to/from the flat `params` section of a scenario config file.
/// `t_window` documents the transaction accumulation window that fixes the
/// units of rate-like quantities; nothing uses it dynamically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Credits-rate scale at the corner (X, X).
    #[serde(rename = "A0")]
    pub a0: f64,
    /// Payment-rate scale at the corner (X, X).
    #[serde(rename = "B0")]
    pub b0: f64,
    /// Continuity coupling of A to div u. Positive.
    pub a1: f64,
    /// Continuity coupling of B to div v. Negative.
    pub a2: f64,
    /// Motion coupling of v to ∇B. Positive.
    pub b: f64,
    /// Motion coupling of u to ∇A. Negative.
    pub d: f64,
    /// Macro acceleration on the A side, x axis.
    pub h_x: f64,
    /// Macro acceleration on the A side, y axis.
    pub h_y: f64,
    /// Macro acceleration on the B side, x axis.
    pub g_x: f64,
    /// Macro acceleration on the B side, y axis.
    pub g_y: f64,
    /// Domain size: maximum risk coordinate.
    #[serde(rename = "X")]
    pub x_max: f64,
    /// Transaction accumulation window (documentation/metadata only).
    #[serde(rename = "T_window", default = "default_t_window")]
    pub t_window: f64,
}

fn default_t_window() -> f64 {
    1.0
}

/// A single violated parameter invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamViolation {
    /// A sign convention does not hold (`a1 > 0`, `a2 < 0`, `b > 0`, `d < 0`).
    #[error("sign violation: {name} = {value} must be {requirement}")]
    SignViolation {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    /// A scale that must be strictly positive is not (`A0`, `B0`, `X`).
    #[error("non-positive scale: {name} = {value}")]
    NonPositiveScale { name: &'static str, value: f64 },
    /// `A0²·h_y` and `B0²·g_y` differ beyond relative tolerance 1e-12.
    #[error("coupling mismatch: A0^2*h_y = {lhs} but B0^2*g_y = {rhs}")]
    CouplingMismatch { lhs: f64, rhs: f64 },
    /// A parameter is NaN or infinite.
    #[error("non-finite parameter: {name}")]
    NonFinite { name: &'static str },
}

/// The full list of violated invariants for a parameter set.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid model parameters: {}", format_violations(.0))]
pub struct InvalidParams(pub Vec<ParamViolation>);

fn format_violations(violations: &[ParamViolation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl ModelParams {
    /// Checks the base invariants: finiteness, sign conventions, and positive
    /// scales. Returns the parameters unchanged iff every predicate holds;
    /// otherwise returns the full list of violations.
    ///
    /// The wave-mode coupling identity is checked separately by
    /// [`ModelParams::validate_for_waves`]; it binds only when wave analysis
    /// is requested.
    pub fn validate(&self) -> Result<ModelParams, InvalidParams> {
        let mut violations = self.base_violations();
        if violations.is_empty() {
            Ok(*self)
        } else {
            violations.shrink_to_fit();
            Err(InvalidParams(violations))
        }
    }

    /// Base invariants plus the wave-mode coupling identity
    /// `A0²·h_y = B0²·g_y` (relative tolerance [`COUPLING_REL_TOL`]).
    pub fn validate_for_waves(&self) -> Result<ModelParams, InvalidParams> {
        let mut violations = self.base_violations();
        let lhs = self.a0 * self.a0 * self.h_y;
        let rhs = self.b0 * self.b0 * self.g_y;
        if (lhs - rhs).abs() > COUPLING_REL_TOL * lhs.abs().max(rhs.abs()) {
            violations.push(ParamViolation::CouplingMismatch { lhs, rhs });
        }
        if violations.is_empty() {
            Ok(*self)
        } else {
            Err(InvalidParams(violations))
        }
    }

    fn base_violations(&self) -> Vec<ParamViolation> {
        let mut out = Vec::new();
        for (name, value) in [
            ("A0", self.a0),
            ("B0", self.b0),
            ("a1", self.a1),
            ("a2", self.a2),
            ("b", self.b),
            ("d", self.d),
            ("h_x", self.h_x),
            ("h_y", self.h_y),
            ("g_x", self.g_x),
            ("g_y", self.g_y),
            ("X", self.x_max),
            ("T_window", self.t_window),
        ] {
            if !value.is_finite() {
                out.push(ParamViolation::NonFinite { name });
            }
        }
        if !out.is_empty() {
            return out;
        }
        if self.a1 <= 0.0 {
            out.push(sign("a1", self.a1, "> 0"));
        }
        if self.a2 >= 0.0 {
            out.push(sign("a2", self.a2, "< 0"));
        }
        if self.b <= 0.0 {
            out.push(sign("b", self.b, "> 0"));
        }
        if self.d >= 0.0 {
            out.push(sign("d", self.d, "< 0"));
        }
        if self.a0 <= 0.0 {
            out.push(ParamViolation::NonPositiveScale {
                name: "A0",
                value: self.a0,
            });
        }
        if self.b0 <= 0.0 {
            out.push(ParamViolation::NonPositiveScale {
                name: "B0",
                value: self.b0,
            });
        }
        if self.x_max <= 0.0 {
            out.push(ParamViolation::NonPositiveScale {
                name: "X",
                value: self.x_max,
            });
        }
        out
    }

    /// The acceleration potential `H(x, y) = h_x·x + h_y·y` acting on the
    /// A side.
    pub fn h_potential(&self) -> LinearPotential {
        LinearPotential {
            c_x: self.h_x,
            c_y: self.h_y,
        }
    }

    /// The acceleration potential `G(x, y) = g_x·x + g_y·y` acting on the
    /// B side.
    pub fn g_potential(&self) -> LinearPotential {
        LinearPotential {
            c_x: self.g_x,
            c_y: self.g_y,
        }
    }

    /// True iff `(x, y)` lies in the closed risk square `[0, X]²`.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.x_max).contains(&x) && (0.0..=self.x_max).contains(&y)
    }

    /// Steady-state credits-rate field
    /// `A(x, y) = A0·(1 + [h_x·(x−X) + h_y·(y−X)] / d)`.
    ///
    /// The reference corner is (X, X), where the field equals `A0`.
    pub fn steady_a(&self, x: f64, y: f64) -> Result<f64, DomainError> {
        self.check_domain(x, y)?;
        Ok(self.steady_a_unchecked(x, y))
    }

    /// Steady-state payment-rate field
    /// `B(x, y) = B0·(1 + [g_x·(x−X) + g_y·(y−X)] / b)`.
    pub fn steady_b(&self, x: f64, y: f64) -> Result<f64, DomainError> {
        self.check_domain(x, y)?;
        Ok(self.steady_b_unchecked(x, y))
    }

    /// `steady_a` without the domain check, for hot loops over grid nodes
    /// that are in-domain by construction.
    pub fn steady_a_unchecked(&self, x: f64, y: f64) -> f64 {
        let shift = self.h_x * (x - self.x_max) + self.h_y * (y - self.x_max);
        self.a0 * (1.0 + shift / self.d)
    }

    /// `steady_b` without the domain check.
    pub fn steady_b_unchecked(&self, x: f64, y: f64) -> f64 {
        let shift = self.g_x * (x - self.x_max) + self.g_y * (y - self.x_max);
        self.b0 * (1.0 + shift / self.b)
    }

    fn check_domain(&self, x: f64, y: f64) -> Result<(), DomainError> {
        if self.contains(x, y) {
            Ok(())
        } else {
            Err(DomainError {
                x,
                y,
                x_max: self.x_max,
            })
        }
    }
}

fn sign(name: &'static str, value: f64, requirement: &'static str) -> ParamViolation {
    ParamViolation::SignViolation {
        name,
        value,
        requirement,
    }
}

/// A point falls outside the closed risk square `[0, X]²`.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("point ({x}, {y}) outside domain [0, {x_max}]^2")]
pub struct DomainError {
    pub x: f64,
    pub y: f64,
    pub x_max: f64,
}

/// A linear potential `c_x·x + c_y·y` with the affine offset fixed to zero
/// at the origin. Its gradient is exactly `(c_x, c_y)` everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearPotential {
    pub c_x: f64,
    pub c_y: f64,
}

impl LinearPotential {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.c_x * x + self.c_y * y
    }

    pub fn gradient(&self) -> (f64, f64) {
        (self.c_x, self.c_y)
    }
}
