//! Closed-form wave layer: characteristic quartic, root classification,
//! dispersion solving, surface-mode construction, analytic field and surface
//! evaluation, the border credit integral, and interior growth profiles.
//!
//! Harmonic perturbations of the coupled potentials take the separated form
//! `cos(kx − ωt)·f(y − X)` with the depth profile `f` governed by the
//! fourth-order ODE
//!
//! ```text
//! q4·f'''' + q2·f'' + q0·f = 0
//! ```
//!
//! whose biquadratic characteristic polynomial `q4·s⁴ + q2·s² + q0` has, for
//! sign-valid parameters, either four real roots `{±s1, ±s2}` or a complex
//! conjugate pair of `s²` values. The surface boundary condition pins the
//! profile slope at the risk border: `f'(0) = A0·ω²/(B0·g_y)`.

use crate::params::{DomainError, InvalidParams, ModelParams};
use thiserror::Error;

/// Relative residual below which a candidate is accepted as a quartic root.
pub const ROOT_REL_TOL: f64 = 1e-9;

/// Relative residual required of a dispersion solution.
pub const DISPERSION_REL_TOL: f64 = 1e-10;

/// Errors from the closed-form wave layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WaveError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate quartic: q4 = 0")]
    DegenerateQuartic,
    #[error("no dispersion solution bracketed on (0, {omega_max}]")]
    NoSolution { omega_max: f64 },
    #[error("characteristic roots are complex: s^2 = {re} +/- {im}i")]
    ComplexRoots { re: f64, im: f64 },
    #[error("real discriminant but non-positive root square s^2 = {0}")]
    NegativeRootSquare(f64),
    #[error("mode constraints infeasible: {0}")]
    ConstraintInfeasible(String),
    #[error("operation requires a {required} mode, got {got}")]
    UnsupportedMode {
        required: &'static str,
        got: &'static str,
    },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

impl From<InvalidParams> for WaveError {
    fn from(err: InvalidParams) -> Self {
        WaveError::InvalidParams(err.to_string())
    }
}

/// Coefficients of the fourth-order depth ODE. The odd coefficients vanish
/// structurally (`q1 = q3 = 0`). For sign-valid parameters and `(k, ω)` not
/// both zero: `q4 > 0`, `q2 < 0`, `q0 > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticCoeffs {
    pub q4: f64,
    pub q2: f64,
    pub q0: f64,
}

impl QuarticCoeffs {
    /// Value of the characteristic polynomial at `s`.
    pub fn eval(&self, s: f64) -> f64 {
        let s2 = s * s;
        self.q4 * s2 * s2 + self.q2 * s2 + self.q0
    }

    /// Residual of `s` relative to the largest term magnitude.
    pub fn relative_residual(&self, s: f64) -> f64 {
        let s2 = s * s;
        let terms = [self.q4 * s2 * s2, self.q2 * s2, self.q0];
        let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        if scale == 0.0 {
            0.0
        } else {
            (terms[0] + terms[1] + terms[2]).abs() / scale
        }
    }

    /// Discriminant of the biquadratic in `s²`.
    pub fn discriminant(&self) -> f64 {
        self.q2 * self.q2 - 4.0 * self.q4 * self.q0
    }
}

/// Coefficients of the depth ODE at wave number `k` and frequency `omega`:
///
/// ```text
/// q4 = a1·a2·b·d − b·d·B0·A0
/// q2 = (A0·ω² − a2·b·k²)·a1·d + (B0·ω² − a1·d·k²)·a2·b + 2·b·d·A0·B0·k²
/// q0 = (a2·b·k² − A0·ω²)·(a1·d·k² − B0·ω²) − b·d·A0·B0·k⁴
/// ```
pub fn quartic_coefficients(
    params: &ModelParams,
    k: f64,
    omega: f64,
) -> Result<QuarticCoeffs, WaveError> {
    params.validate()?;
    let (a0, b0) = (params.a0, params.b0);
    let (a1, a2, b, d) = (params.a1, params.a2, params.b, params.d);
    let k2 = k * k;
    let w2 = omega * omega;
    let q4 = a1 * a2 * b * d - b * d * b0 * a0;
    let q2 = (a0 * w2 - a2 * b * k2) * a1 * d
        + (b0 * w2 - a1 * d * k2) * a2 * b
        + 2.0 * b * d * a0 * b0 * k2;
    let q0 = (a2 * b * k2 - a0 * w2) * (a1 * d * k2 - b0 * w2) - b * d * a0 * b0 * k2 * k2;
    Ok(QuarticCoeffs { q4, q2, q0 })
}

/// Classified roots of the characteristic biquadratic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RootSet {
    /// Four real roots `{s1, s2, −s1, −s2}` with `s1 ≥ s2 ≥ 0`.
    Real { s1: f64, s2: f64 },
    /// Negative discriminant: the `s²` values form the conjugate pair
    /// `re ± im·i`. A reported outcome, not an error.
    Complex { s_sq_re: f64, s_sq_im: f64 },
}

impl RootSet {
    pub fn is_real(&self) -> bool {
        matches!(self, RootSet::Real { .. })
    }

    /// The two positive roots, when real.
    pub fn positive_roots(&self) -> Option<(f64, f64)> {
        match *self {
            RootSet::Real { s1, s2 } => Some((s1, s2)),
            RootSet::Complex { .. } => None,
        }
    }
}

/// Solves `q4·s⁴ + q2·s² + q0 = 0` for `s²` with the numerically stable
/// quadratic formula: the larger-magnitude root is computed first and the
/// other recovered through the product identity `q0/q4`, so no cancellation
/// occurs when `q2² ≫ 4·q4·q0`.
///
/// A discriminant within `1e-12` (relative) of zero is clamped to zero, which
/// is the `ω = 0` double-root regime `s = ±k`.
pub fn characteristic_roots(coeffs: &QuarticCoeffs) -> Result<RootSet, WaveError> {
    let QuarticCoeffs { q4, q2, q0 } = *coeffs;
    if q4 == 0.0 {
        return Err(WaveError::DegenerateQuartic);
    }
    let mut disc = coeffs.discriminant();
    let disc_scale = (q2 * q2).max((4.0 * q4 * q0).abs());
    if disc.abs() <= 1e-12 * disc_scale {
        disc = 0.0;
    }
    if disc < 0.0 {
        // s² = (−q2 ± i·√(−disc)) / (2·q4)
        return Ok(RootSet::Complex {
            s_sq_re: -q2 / (2.0 * q4),
            s_sq_im: (-disc).sqrt() / (2.0 * q4).abs(),
        });
    }
    let sqrt_disc = disc.sqrt();
    // qq keeps the large-magnitude sum; q2 < 0 for sign-valid parameters.
    let qq = if q2 <= 0.0 {
        (sqrt_disc - q2) / 2.0
    } else {
        -(q2 + sqrt_disc) / 2.0
    };
    let (t1, t2) = if qq == 0.0 {
        (0.0, 0.0)
    } else {
        (qq / q4, q0 / qq)
    };
    let (hi, lo) = if t1 >= t2 { (t1, t2) } else { (t2, t1) };
    if lo < 0.0 {
        return Err(WaveError::NegativeRootSquare(lo));
    }
    Ok(RootSet::Real {
        s1: hi.sqrt(),
        s2: lo.sqrt(),
    })
}

/// One dispersion solution: a frequency whose boundary slope
/// `s = A0·ω²/(B0·g_y)` is a real characteristic root at `(k, ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionBranch {
    pub omega: f64,
    /// The boundary slope `A0·ω²/(B0·g_y)` at this frequency.
    pub s: f64,
    /// Relative quartic residual of `s`.
    pub residual: f64,
}

/// Smallest positive dispersion solution for wave number `k`. Other branches
/// are available through [`dispersion_solve_all`].
pub fn dispersion_solve(params: &ModelParams, k: f64) -> Result<DispersionBranch, WaveError> {
    dispersion_solve_all(params, k).map(|branches| branches[0])
}

/// All positive dispersion solutions of `r(ω) = q4·s⁴ + q2·s² + q0` with
/// `s = A0·ω²/(B0·g_y)`, sorted ascending in ω; never empty on success.
///
/// The characteristic quartic in `σ = s² − k²` has ω-scaled roots
/// `σ = ρ·ω²` with `ρ` the (k- and ω-independent) roots of
/// `q4·ρ² + (a1·d·A0 + a2·b·B0)·ρ + A0·B0 = 0`, so each real `ρ` yields
/// exactly one positive branch `ω² = [ρ + √(ρ² + 4·slope²·k²)]/(2·slope²)`.
/// These closed-form frequencies seed a bisection polish on `r(ω)`; a
/// candidate is accepted when its relative residual is below `1e-10`.
/// (A blind log-spaced scan misses the two branches once they sit closer
/// than one scan step, which already happens at moderate `k`.)
pub fn dispersion_solve_all(
    params: &ModelParams,
    k: f64,
) -> Result<Vec<DispersionBranch>, WaveError> {
    params.validate_for_waves()?;
    if params.g_y <= 0.0 {
        return Err(WaveError::InvalidParams(format!(
            "g_y = {} must be > 0 for boundary slope A0*w^2/(B0*g_y) > 0",
            params.g_y
        )));
    }
    if k <= 0.0 {
        return Err(WaveError::InvalidParams(format!("k = {k} must be > 0")));
    }
    let omega_max = 1e3 * (params.b0 * params.g_y.abs() / params.a0).sqrt();
    let slope = params.a0 / (params.b0 * params.g_y);
    let r = |omega: f64| -> f64 {
        let c = quartic_coefficients(params, k, omega).expect("params validated");
        c.eval(slope * omega * omega)
    };

    // rho-quadratic coefficients (the quartic divided out of its k-part).
    let q4 = quartic_coefficients(params, 0.0, 1.0)
        .expect("params validated")
        .q4;
    let big_c = params.a1 * params.d * params.a0 + params.a2 * params.b * params.b0;
    let rho_disc = big_c * big_c - 4.0 * q4 * params.a0 * params.b0;
    if rho_disc < 0.0 {
        // Complex sigma/omega^2 ratio: no real-rooted (k, omega) anywhere.
        return Err(WaveError::NoSolution { omega_max });
    }
    let sq = rho_disc.sqrt();
    let qq = if big_c <= 0.0 {
        (sq - big_c) / 2.0
    } else {
        -(big_c + sq) / 2.0
    };
    let rhos = if qq == 0.0 {
        [0.0, 0.0]
    } else {
        [qq / q4, params.a0 * params.b0 / qq]
    };

    let mut branches: Vec<DispersionBranch> = Vec::new();
    for rho in rhos {
        let w2 = (rho + (rho * rho + 4.0 * slope * slope * k * k).sqrt()) / (2.0 * slope * slope);
        if !(w2 > 0.0 && w2.is_finite()) {
            continue;
        }
        let omega = polish_root(&r, w2.sqrt());
        let s = slope * omega * omega;
        let coeffs = quartic_coefficients(params, k, omega).expect("params validated");
        let residual = coeffs.relative_residual(s);
        let duplicate = branches
            .iter()
            .any(|b| (b.omega - omega).abs() <= 1e-9 * omega);
        if residual < DISPERSION_REL_TOL && !duplicate {
            branches.push(DispersionBranch { omega, s, residual });
        }
    }
    if branches.is_empty() {
        Err(WaveError::NoSolution { omega_max })
    } else {
        branches.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        Ok(branches)
    }
}

/// Bisection polish around a closed-form root estimate: expands a relative
/// bracket until the sign changes, then bisects. Falls back to the estimate
/// when no sign change is found (a grazing double root).
fn polish_root(r: &dyn Fn(f64) -> f64, omega_hat: f64) -> f64 {
    let mut delta = 1e-9;
    while delta <= 1e-3 {
        let lo = omega_hat * (1.0 - delta);
        let hi = omega_hat * (1.0 + delta);
        if r(lo).signum() != r(hi).signum() {
            return bisect(r, lo, hi);
        }
        delta *= 10.0;
    }
    omega_hat
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_lo.signum() != f_mid.signum() {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mode flavor plus, for the general kind, the two free weights on the
/// `±s2` root pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeSpec {
    /// Weight 1 on the single positive root matching the boundary slope.
    SingleDecay,
    /// Weights on `±s1` only: `λ1 + λ3 = 1`, `s1·(λ1 − λ3)` equal to the
    /// boundary slope.
    GrowthPair,
    /// Caller fixes the weights on `s2` and `−s2`; the two constraints then
    /// determine the `±s1` weights.
    General { lambda2: f64, lambda4: f64 },
}

/// Mode flavor tag carried by a constructed [`WaveMode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    SingleDecay,
    GrowthPair,
    General,
}

impl ModeKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModeKind::SingleDecay => "single_decay",
            ModeKind::GrowthPair => "growth_pair",
            ModeKind::General => "general",
        }
    }
}

/// One analytic surface-like solution: a `(k, ω)` harmonic with depth profile
/// `f(y − X) = Σ λi·exp(si·(y − X))` over the root set `[s1, s2, −s1, −s2]`,
/// constrained by `Σ λi = 1` (so `f(0) = 1`) and
/// `Σ λi·si = A0·ω²/(B0·g_y)` (the surface slope condition).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveMode {
    pub k: f64,
    pub omega: f64,
    pub s1: f64,
    pub s2: f64,
    /// Weights on roots `[s1, s2, −s1, −s2]`.
    pub lambdas: [f64; 4],
    pub kind: ModeKind,
    /// Boundary slope `A0·ω²/(B0·g_y)`; equals `f'(0)`.
    pub s_target: f64,
}

impl WaveMode {
    /// Roots in weight order `[s1, s2, −s1, −s2]`.
    pub fn roots(&self) -> [f64; 4] {
        [self.s1, self.s2, -self.s1, -self.s2]
    }

    /// Depth profile `f(y_rel) = Σ λi·exp(si·y_rel)` with `y_rel = y − X`.
    pub fn profile(&self, y_rel: f64) -> f64 {
        self.profile_deriv(y_rel, 0)
    }

    /// `n`-th derivative of the profile: `Σ λi·siⁿ·exp(si·y_rel)`.
    pub fn profile_deriv(&self, y_rel: f64, n: u32) -> f64 {
        self.roots()
            .iter()
            .zip(self.lambdas.iter())
            .map(|(&s, &l)| l * s.powi(n as i32) * (s * y_rel).exp())
            .sum()
    }
}

/// Constructs a mode at `(k, omega)`, which must have real characteristic
/// roots. The weight layout per kind follows [`ModeSpec`].
pub fn build_mode(
    params: &ModelParams,
    k: f64,
    omega: f64,
    spec: ModeSpec,
) -> Result<WaveMode, WaveError> {
    params.validate_for_waves()?;
    if params.g_y <= 0.0 {
        return Err(WaveError::InvalidParams(format!(
            "g_y = {} must be > 0",
            params.g_y
        )));
    }
    let coeffs = quartic_coefficients(params, k, omega)?;
    let (s1, s2) = match characteristic_roots(&coeffs)? {
        RootSet::Real { s1, s2 } => (s1, s2),
        RootSet::Complex { s_sq_re, s_sq_im } => {
            return Err(WaveError::ComplexRoots {
                re: s_sq_re,
                im: s_sq_im,
            })
        }
    };
    let target = params.a0 * omega * omega / (params.b0 * params.g_y);

    let (lambdas, kind) = match spec {
        ModeSpec::SingleDecay => {
            // The boundary slope must itself be one of the positive roots.
            if (target - s1).abs() <= ROOT_REL_TOL * s1.abs().max(1.0) {
                ([1.0, 0.0, 0.0, 0.0], ModeKind::SingleDecay)
            } else if (target - s2).abs() <= ROOT_REL_TOL * s2.abs().max(1.0) {
                ([0.0, 1.0, 0.0, 0.0], ModeKind::SingleDecay)
            } else {
                return Err(WaveError::ConstraintInfeasible(format!(
                    "single_decay requires A0*w^2/(B0*g_y) = {target} to equal a root ({s1} or {s2})"
                )));
            }
        }
        ModeSpec::GrowthPair => {
            if s1 == 0.0 {
                return Err(WaveError::ConstraintInfeasible(
                    "growth_pair requires s1 > 0".into(),
                ));
            }
            let diff = target / s1;
            let l1 = 0.5 * (1.0 + diff);
            let l3 = 0.5 * (1.0 - diff);
            ([l1, 0.0, l3, 0.0], ModeKind::GrowthPair)
        }
        ModeSpec::General { lambda2, lambda4 } => {
            if s1 == 0.0 {
                return Err(WaveError::ConstraintInfeasible(
                    "general mode requires s1 > 0".into(),
                ));
            }
            let sum = 1.0 - lambda2 - lambda4;
            let diff = (target - s2 * (lambda2 - lambda4)) / s1;
            let l1 = 0.5 * (sum + diff);
            let l3 = 0.5 * (sum - diff);
            ([l1, lambda2, l3, lambda4], ModeKind::General)
        }
    };

    Ok(WaveMode {
        k,
        omega,
        s1,
        s2,
        lambdas,
        kind,
        s_target: target,
    })
}

/// Single-decay mode at the given dispersion branch.
pub fn build_single_decay(
    params: &ModelParams,
    k: f64,
    branch: &DispersionBranch,
) -> Result<WaveMode, WaveError> {
    build_mode(params, k, branch.omega, ModeSpec::SingleDecay)
}

/// Perturbed field values `(A, B)` of a mode at `(t, x, y)`:
///
/// ```text
/// A = steady_A + (B0·ω/d)·sin(kx − ωt)·f(y − X)
/// B = steady_B + (A0·ω/b)·sin(kx − ωt)·f(y − X)
/// ```
pub fn evaluate_fields(
    mode: &WaveMode,
    params: &ModelParams,
    t: f64,
    x: f64,
    y: f64,
) -> Result<(f64, f64), WaveError> {
    let steady_a = params.steady_a(x, y)?;
    let steady_b = params.steady_b_unchecked(x, y);
    let osc = (mode.k * x - mode.omega * t).sin() * mode.profile(y - params.x_max);
    let a = steady_a + params.b0 * mode.omega / params.d * osc;
    let b = steady_b + params.a0 * mode.omega / params.b * osc;
    Ok((a, b))
}

/// The sinusoidal border elevation of a single-decay mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceProfile {
    /// `A0·ω/(B0·g_y)`, in risk units.
    pub amplitude: f64,
    pub k: f64,
    pub omega: f64,
    pub x_max: f64,
}

impl SurfaceProfile {
    /// `ξ(t, x) = X − amplitude·sin(kx − ωt)`.
    pub fn elevation(&self, t: f64, x: f64) -> f64 {
        self.x_max - self.amplitude * (self.k * x - self.omega * t).sin()
    }
}

/// Surface profile of a mode; defined for the single-decay kind only.
pub fn surface_profile(mode: &WaveMode, params: &ModelParams) -> Result<SurfaceProfile, WaveError> {
    if mode.kind != ModeKind::SingleDecay {
        return Err(WaveError::UnsupportedMode {
            required: "single_decay",
            got: mode.kind.name(),
        });
    }
    Ok(SurfaceProfile {
        amplitude: params.a0 * mode.omega / (params.b0 * params.g_y),
        k: mode.k,
        omega: mode.omega,
        x_max: params.x_max,
    })
}

/// Border elevation `ξ(t, x)` of a single-decay mode.
pub fn surface_elevation(
    mode: &WaveMode,
    params: &ModelParams,
    t: f64,
    x: f64,
) -> Result<f64, WaveError> {
    Ok(surface_profile(mode, params)?.elevation(t, x))
}

/// Total credits along the risk border at time `t`: the closed form next to
/// its quadrature ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BorderCreditTotal {
    /// `A0·(X − h_x·X²/(2d))`, the time-independent part.
    pub steady_part: f64,
    /// `steady_part − (2·B0·ω/(d·k))·sin(kX/2)·sin(ωt − kX/2)`.
    pub closed_form: f64,
    /// Adaptive quadrature of `A(t, x, X)` over `x ∈ (0, X)`.
    pub quadrature: f64,
}

/// Integrates the border field `A(t, x, X)` of a single-decay mode over the
/// border and returns the quadrature value alongside the closed form. The
/// oscillatory coefficient of the closed form is the one the quadrature
/// validates: `−2·B0·ω/(d·k)·sin(kX/2)·sin(ωt − kX/2)`.
pub fn border_credit_total(
    mode: &WaveMode,
    params: &ModelParams,
    t: f64,
) -> Result<BorderCreditTotal, WaveError> {
    if mode.kind != ModeKind::SingleDecay {
        return Err(WaveError::UnsupportedMode {
            required: "single_decay",
            got: mode.kind.name(),
        });
    }
    let x_max = params.x_max;
    let steady_part = params.a0 * (x_max - params.h_x * x_max * x_max / (2.0 * params.d));
    let osc = -(2.0 * params.b0 * mode.omega / (params.d * mode.k))
        * (mode.k * x_max / 2.0).sin()
        * (mode.omega * t - mode.k * x_max / 2.0).sin();
    let closed_form = steady_part + osc;

    let border_a = |x: f64| -> f64 {
        evaluate_fields(mode, params, t, x, x_max)
            .map(|(a, _)| a)
            .expect("border point is in-domain")
    };
    let scale = steady_part.abs().max(params.a0 * x_max);
    let quadrature = adaptive_simpson(&border_a, 0.0, x_max, 1e-13 * scale, 48);

    Ok(BorderCreditTotal {
        steady_part,
        closed_form,
        quadrature,
    })
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Amplitude ratio of a growth-pair mode at interior depths `Δ = X − y`:
/// `|f(−Δ)| = λ1·e^(−s1·Δ) + λ3·e^(s1·Δ)` relative to the border value
/// `f(0) = 1`.
pub fn growth_profile(mode: &WaveMode, depths: &[f64]) -> Result<Vec<(f64, f64)>, WaveError> {
    if mode.kind != ModeKind::GrowthPair {
        return Err(WaveError::UnsupportedMode {
            required: "growth_pair",
            got: mode.kind.name(),
        });
    }
    Ok(depths
        .iter()
        .map(|&delta| (delta, mode.profile(-delta).abs()))
        .collect())
}

/// Relative residual of the depth ODE `q4·f'''' + q2·f'' + q0·f` at `y_rel`.
pub fn ode_residual(mode: &WaveMode, coeffs: &QuarticCoeffs, y_rel: f64) -> f64 {
    let terms = [
        coeffs.q4 * mode.profile_deriv(y_rel, 4),
        coeffs.q2 * mode.profile_deriv(y_rel, 2),
        coeffs.q0 * mode.profile_deriv(y_rel, 0),
    ];
    let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if scale == 0.0 {
        0.0
    } else {
        (terms[0] + terms[1] + terms[2]).abs() / scale
    }
}

/// Relative residuals of the two coupled potential equations under the
/// equal-potential ansatz `φ = ψ = cos(kx − ωt)·f(y − X)`, evaluated
/// analytically at `(t, x, y)`:
///
/// ```text
/// (A0·∂tt − a2·b·Δ)φ + b·B0·Δψ      (first)
/// (B0·∂tt − a1·d·Δ)ψ + d·A0·Δφ      (second)
/// ```
///
/// Both vanish identically only on the parameter submanifold
/// `B0·b·(a2 − B0) = A0·d·(a1 − A0)` (see [`equal_potential_d`]); away from
/// it the ansatz satisfies the factored fourth-order equation but not the
/// pair.
pub fn pair_residuals(mode: &WaveMode, params: &ModelParams, t: f64, x: f64, y: f64) -> (f64, f64) {
    let cos = (mode.k * x - mode.omega * t).cos();
    let y_rel = y - params.x_max;
    let f = mode.profile(y_rel);
    let f2 = mode.profile_deriv(y_rel, 2);
    let w2 = mode.omega * mode.omega;
    let k2 = mode.k * mode.k;
    // φ = ψ: ∂tt → −ω²·cos·f, Δ → cos·(f'' − k²·f)
    let phi_tt = -w2 * cos * f;
    let lap = cos * (f2 - k2 * f);

    let rel = |terms: [f64; 3]| -> f64 {
        let scale = terms.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            0.0
        } else {
            (terms[0] + terms[1] + terms[2]).abs() / scale
        }
    };

    let r1 = rel([
        params.a0 * phi_tt,
        -params.a2 * params.b * lap,
        params.b * params.b0 * lap,
    ]);
    let r2 = rel([
        params.b0 * phi_tt,
        -params.a1 * params.d * lap,
        params.d * params.a0 * lap,
    ]);
    (r1, r2)
}

/// The motion coupling `d` for which the equal-potential ansatz solves both
/// coupled equations exactly: `d = B0·b·(a2 − B0) / (A0·(a1 − A0))`.
/// Requires `a1 ≠ A0`; the result is sign-valid (`d < 0`) iff `a1 > A0`.
pub fn equal_potential_d(a1: f64, a2: f64, b: f64, a0: f64, b0: f64) -> f64 {
    b0 * b * (a2 - b0) / (a0 * (a1 - a0))
}
