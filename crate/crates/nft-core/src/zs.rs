//! Zakharov-Shabat domain types: Jost states, scattering coefficients, and the
//! spectral amplitudes extracted from them.

use crate::signal::TimeGrid;
use crate::{C64, J, NftError, Result};

/// Division guard for `b/a` and `b/a'`.
const POLE_THRESHOLD: f64 = 1e-300;

/// Eigenvector state of the Zakharov-Shabat system at one time instant,
/// optionally carrying the lambda-derivative pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JostState {
    pub v1: C64,
    pub v2: C64,
    pub dv1: Option<C64>,
    pub dv2: Option<C64>,
}

impl JostState {
    /// Left boundary condition `v(T1) = (1, 0)^T e^{-j lambda T1}` and, when
    /// requested, `v'(T1) = (-j T1, 0)^T e^{-j lambda T1}`.
    pub fn initial(grid: &TimeGrid, lambda: C64, with_derivative: bool) -> JostState {
        let t1 = grid.t1();
        let phase = (-J * lambda * t1).exp();
        JostState {
            v1: phase,
            v2: C64::new(0.0, 0.0),
            dv1: with_derivative.then(|| -J * t1 * phase),
            dv2: with_derivative.then(|| C64::new(0.0, 0.0)),
        }
    }
}

/// The triple `(a, b, a')` at one spectral parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringCoefficients {
    pub lambda: C64,
    pub a: C64,
    pub b: C64,
    /// `da/dlambda`, present when the propagation was derivative-augmented.
    pub a_prime: Option<C64>,
}

/// One node of the continuous spectrum. `qhat` is `None` when `a` fell below
/// the pole guard; such points are reported rather than dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousSpectrumPoint {
    pub lambda: f64,
    pub qhat: Option<C64>,
    pub a: C64,
    pub b: C64,
}

/// A located zero of `a` in the upper half plane with its spectral amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteEigenvalue {
    pub lambda: C64,
    /// `b / a'` at the eigenvalue.
    pub qtilde: C64,
    /// `|a(lambda)|` at the accepted iterate.
    pub residual: f64,
    pub multiplicity_hint: u32,
}

/// Maps the terminal Jost state at `t[n] = T2` to the scattering coefficients:
/// `a = v1 e^{j L T2}`, `b = v2 e^{-j L T2}`, `a' = (v1' + j T2 v1) e^{j L T2}`.
pub fn coefficients_from_terminal(
    v: &JostState,
    grid: &TimeGrid,
    lambda: C64,
) -> ScatteringCoefficients {
    let t2 = grid.t2();
    let ep = (J * lambda * t2).exp();
    let em = (-J * lambda * t2).exp();
    ScatteringCoefficients {
        lambda,
        a: v.v1 * ep,
        b: v.v2 * em,
        a_prime: v.dv1.map(|dv1| (dv1 + J * t2 * v.v1) * ep),
    }
}

/// Continuous spectral amplitude `qhat = b/a`; signals a pole when `a` is
/// numerically zero (an eigenvalue grazing the real-axis mesh).
pub fn continuous_amplitude(c: &ScatteringCoefficients) -> Result<C64> {
    if c.a.norm() < POLE_THRESHOLD {
        return Err(NftError::SpectrumPole {
            lambda: c.lambda,
            a_mag: c.a.norm(),
        });
    }
    Ok(c.b / c.a)
}

/// Discrete spectral amplitude `qtilde = b/a'`; a vanishing `a'` signals a
/// multiple zero of `a`.
pub fn discrete_amplitude(c: &ScatteringCoefficients) -> Result<C64> {
    let ap = c.a_prime.ok_or_else(|| {
        NftError::Invalid("discrete amplitude needs a derivative-augmented propagation".into())
    })?;
    if ap.norm() < POLE_THRESHOLD {
        return Err(NftError::DegenerateEigenvalue {
            lambda: c.lambda,
            aprime_mag: ap.norm(),
        });
    }
    Ok(c.b / ap)
}
