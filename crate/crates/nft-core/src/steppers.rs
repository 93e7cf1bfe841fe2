//! One-step transfer updates for the seven integration methods, with and
//! without lambda-derivative augmentation, and the propagation driver that
//! runs a stepper across a signal for one spectral parameter.
//!
//! Vector-form methods (everything except layer peeling) can run in two
//! frames: the Jost frame propagates `v` directly, the normalized frame
//! propagates `u = diag(e^{j L t}, e^{-j L t}) v`, whose components stay
//! bounded for `Im(lambda) > 0` and whose terminal values are `(a, b)`
//! outright. Layer peeling composes `(a, b)` scattering factors and is
//! normalized by construction.

use std::fmt;
use std::str::FromStr;

use crate::mat2::Mat2;
use crate::signal::{Signal, TimeGrid};
use crate::zs::{coefficients_from_terminal, JostState, ScatteringCoefficients};
use crate::{C64, J, NftError, Result};

/// Tag selecting one of the seven steppers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodId {
    Euler,
    Central,
    Rk4,
    CrankNicolson,
    LayerPeeling,
    Al1,
    Al2,
}

impl MethodId {
    pub const ALL: [MethodId; 7] = [
        MethodId::Euler,
        MethodId::Central,
        MethodId::Rk4,
        MethodId::CrankNicolson,
        MethodId::LayerPeeling,
        MethodId::Al1,
        MethodId::Al2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodId::Euler => "euler",
            MethodId::Central => "central",
            MethodId::Rk4 => "rk4",
            MethodId::CrankNicolson => "crank-nicolson",
            MethodId::LayerPeeling => "layer-peeling",
            MethodId::Al1 => "al1",
            MethodId::Al2 => "al2",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = NftError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "euler" => MethodId::Euler,
            "central" => MethodId::Central,
            "rk4" => MethodId::Rk4,
            "crank-nicolson" | "cn" => MethodId::CrankNicolson,
            "layer-peeling" | "lp" => MethodId::LayerPeeling,
            "al1" => MethodId::Al1,
            "al2" => MethodId::Al2,
            other => return Err(NftError::Invalid(format!("unknown method '{other}'"))),
        })
    }
}

/// Which eigenvector variables a vector-form state carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Jost,
    Normalized,
}

/// Frame selection for [`propagate_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameChoice {
    /// Normalized when `Im(lambda) * (T2 - T1)` exceeds
    /// [`NORMALIZED_FRAME_THRESHOLD`], Jost otherwise.
    #[default]
    Auto,
    Jost,
    Normalized,
}

/// `Im(lambda) * (T2 - T1)` beyond which [`FrameChoice::Auto`] switches to the
/// normalized variables to keep deep upper-half-plane searches bounded.
pub const NORMALIZED_FRAME_THRESHOLD: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PropagateOptions {
    pub frame: FrameChoice,
    /// Rescale each Euler step by `1/sqrt(det)` so its eigenvalues return to
    /// the unit circle; only meaningful for [`MethodId::Euler`].
    pub euler_unit_det: bool,
}

/// Per-step signal samples consumed by one update.
#[derive(Debug, Clone, Copy)]
pub struct StepSamples {
    pub q_k: C64,
    pub q_next: C64,
    /// Midpoint sample for RK4; linear interpolation of the neighbors when
    /// absent.
    pub q_mid: Option<C64>,
}

/// Transfer state after `k` steps: either an eigenvector pair (vector-form
/// methods, with the previous pair retained for the central iteration) or an
/// `(a, b)` coefficient quadruple (layer peeling).
#[derive(Debug, Clone)]
pub struct TransferState {
    pub k: usize,
    frame: Frame,
    with_derivative: bool,
    repr: Repr,
}

#[derive(Debug, Clone)]
enum Repr {
    Vector {
        v: [C64; 2],
        dv: [C64; 2],
        prev: Option<([C64; 2], [C64; 2])>,
    },
    Coefficients {
        a: C64,
        b: C64,
        da: C64,
        db: C64,
    },
}

impl TransferState {
    /// Initial condition at `t[0] = T1` for the chosen method and frame.
    pub fn initial(
        method: MethodId,
        grid: &TimeGrid,
        lambda: C64,
        with_derivative: bool,
        frame: Frame,
    ) -> TransferState {
        let zero = C64::new(0.0, 0.0);
        let repr = if method == MethodId::LayerPeeling {
            Repr::Coefficients {
                a: C64::new(1.0, 0.0),
                b: zero,
                da: zero,
                db: zero,
            }
        } else {
            match frame {
                Frame::Jost => {
                    let t1 = grid.t1();
                    let phase = (-J * lambda * t1).exp();
                    Repr::Vector {
                        v: [phase, zero],
                        dv: [-J * t1 * phase, zero],
                        prev: None,
                    }
                }
                Frame::Normalized => Repr::Vector {
                    v: [C64::new(1.0, 0.0), zero],
                    dv: [zero, zero],
                    prev: None,
                },
            }
        };
        TransferState {
            k: 0,
            frame,
            with_derivative,
            repr,
        }
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn with_derivative(&self) -> bool {
        self.with_derivative
    }

    /// Jost eigenvector view; `None` for layer-peeling or normalized states.
    pub fn jost_state(&self) -> Option<JostState> {
        match (&self.repr, self.frame) {
            (Repr::Vector { v, dv, .. }, Frame::Jost) => Some(JostState {
                v1: v[0],
                v2: v[1],
                dv1: self.with_derivative.then(|| dv[0]),
                dv2: self.with_derivative.then(|| dv[1]),
            }),
            _ => None,
        }
    }

    /// `(a, b)` view of a layer-peeling or normalized state.
    pub fn coefficients(&self) -> Option<(C64, C64)> {
        match (&self.repr, self.frame) {
            (Repr::Coefficients { a, b, .. }, _) => Some((*a, *b)),
            (Repr::Vector { v, .. }, Frame::Normalized) => Some((v[0], v[1])),
            _ => None,
        }
    }
}

/// Advances `state` from `t[k]` to `t[k+1]`, values only.
#[allow(clippy::too_many_arguments)]
pub fn step(
    method: MethodId,
    state: &TransferState,
    q_k: C64,
    q_next: C64,
    q_mid: Option<C64>,
    lambda: C64,
    grid: &TimeGrid,
    k: usize,
) -> Result<TransferState> {
    let samples = StepSamples { q_k, q_next, q_mid };
    advance(method, state, &samples, lambda, grid, k, false)
}

/// Advances a derivative-augmented state: `v' <- A' v + A v'` with the
/// method's analytic `A'` (layer peeling uses the four-term recursion on
/// `(a, b, a', b')`).
#[allow(clippy::too_many_arguments)]
pub fn step_aug(
    method: MethodId,
    state: &TransferState,
    q_k: C64,
    q_next: C64,
    q_mid: Option<C64>,
    lambda: C64,
    grid: &TimeGrid,
    k: usize,
) -> Result<TransferState> {
    if !state.with_derivative {
        return Err(NftError::Invalid(
            "step_aug needs a state created with derivatives".into(),
        ));
    }
    let samples = StepSamples { q_k, q_next, q_mid };
    advance(method, state, &samples, lambda, grid, k, false)
}

/// Runs the initial condition through all `n` steps and extracts the
/// scattering coefficients at `t[n] = T2`.
pub fn propagate(
    method: MethodId,
    signal: &Signal,
    lambda: C64,
    with_derivative: bool,
) -> Result<ScatteringCoefficients> {
    propagate_with(
        method,
        signal,
        lambda,
        with_derivative,
        &PropagateOptions::default(),
    )
}

/// As [`propagate`] with frame selection and the Euler determinant flag.
pub fn propagate_with(
    method: MethodId,
    signal: &Signal,
    lambda: C64,
    with_derivative: bool,
    opts: &PropagateOptions,
) -> Result<ScatteringCoefficients> {
    let grid = &signal.grid;
    let frame = match opts.frame {
        FrameChoice::Jost => Frame::Jost,
        FrameChoice::Normalized => Frame::Normalized,
        FrameChoice::Auto => {
            if lambda.im * (grid.t2() - grid.t1()) > NORMALIZED_FRAME_THRESHOLD {
                Frame::Normalized
            } else {
                Frame::Jost
            }
        }
    };
    let mut state = TransferState::initial(method, grid, lambda, with_derivative, frame);
    for k in 0..grid.n() {
        let samples = StepSamples {
            q_k: signal.q[k],
            q_next: signal.q[k + 1],
            q_mid: Some(signal.q_mid(k)),
        };
        state = advance(method, &state, &samples, lambda, grid, k, opts.euler_unit_det)?;
    }
    let c = extract(&state, grid, lambda);
    let finite = c.a.is_finite()
        && c.b.is_finite()
        && c.a_prime.map_or(true, |ap| ap.is_finite());
    if !finite {
        return Err(NftError::NonFinite {
            lambda,
            context: format!(
                "method {method}, Im(lambda)*(T2-T1) = {:.2}",
                lambda.im * (grid.t2() - grid.t1())
            ),
        });
    }
    Ok(c)
}

fn extract(state: &TransferState, grid: &TimeGrid, lambda: C64) -> ScatteringCoefficients {
    match (&state.repr, state.frame) {
        (Repr::Coefficients { a, b, da, .. }, _) => ScatteringCoefficients {
            lambda,
            a: *a,
            b: *b,
            a_prime: state.with_derivative.then(|| *da),
        },
        (Repr::Vector { v, dv, .. }, Frame::Normalized) => ScatteringCoefficients {
            lambda,
            a: v[0],
            b: v[1],
            a_prime: state.with_derivative.then(|| dv[0]),
        },
        (Repr::Vector { .. }, Frame::Jost) => {
            let jost = state.jost_state().expect("jost frame");
            coefficients_from_terminal(&jost, grid, lambda)
        }
    }
}

/// `P[k]` from the Zakharov-Shabat right-hand side.
fn p_matrix(lambda: C64, q: C64) -> Mat2 {
    Mat2::new(-J * lambda, q, -q.conj(), J * lambda)
}

/// `dP/dlambda`, shared by every method.
fn dp_matrix() -> Mat2 {
    Mat2::diag(-J, J)
}

/// Entrywise phase factors carrying a one-step matrix from the Jost frame to
/// the normalized frame: `A~ = S(t_next) A S(t_k)^{-1}`.
fn phase_matrix(lambda: C64, delta: f64, sigma: f64) -> Mat2 {
    let pd = (J * lambda * delta).exp();
    let ps = (J * lambda * sigma).exp();
    Mat2::new(pd, ps, ps.inv(), pd.inv())
}

/// Entrywise lambda-derivative of [`phase_matrix`].
fn phase_matrix_deriv(lambda: C64, delta: f64, sigma: f64) -> Mat2 {
    let pd = (J * lambda * delta).exp();
    let ps = (J * lambda * sigma).exp();
    Mat2::new(
        J * delta * pd,
        J * sigma * ps,
        -J * sigma * ps.inv(),
        -J * delta * pd.inv(),
    )
}

/// One-step matrix `A` (and `A'` when requested) in the Jost frame for the
/// single-state vector methods.
fn one_step_matrix(
    method: MethodId,
    s: &StepSamples,
    lambda: C64,
    eps: f64,
    with_deriv: bool,
    euler_unit_det: bool,
    k: usize,
) -> Result<(Mat2, Option<Mat2>)> {
    let jd = dp_matrix();
    match method {
        MethodId::Euler => {
            let mut a = Mat2::identity().add(&p_matrix(lambda, s.q_k).scale(eps.into()));
            let mut da = with_deriv.then(|| jd.scale(eps.into()));
            if euler_unit_det {
                let det = a.det();
                let sq = det.sqrt();
                if let Some(da) = da.as_mut() {
                    // d sqrt(det)/dlambda with det = 1 + eps^2 (lambda^2 + |q|^2)
                    let dsq = eps * eps * lambda / sq;
                    *da = da.scale(sq.inv()).add(&a.scale(-dsq / (sq * sq)));
                }
                a = a.scale(sq.inv());
            }
            Ok((a, da))
        }
        MethodId::Al1 | MethodId::Al2 => {
            let z = (-J * lambda * eps).exp();
            let q_eps = s.q_k * eps;
            let mut a = Mat2::new(z, q_eps, -q_eps.conj(), z.inv());
            let mut da = with_deriv.then(|| Mat2::diag(-J * eps * z, J * eps * z.inv()));
            if method == MethodId::Al2 {
                let scale = C64::from(1.0 / (1.0 + q_eps.norm_sqr()).sqrt());
                a = a.scale(scale);
                da = da.map(|m| m.scale(scale));
            }
            Ok((a, da))
        }
        MethodId::CrankNicolson => {
            let b = Mat2::identity().add(&p_matrix(lambda, s.q_next).scale((-0.5 * eps).into()));
            let c = Mat2::identity().add(&p_matrix(lambda, s.q_k).scale((0.5 * eps).into()));
            let b_inv = b.inv().ok_or(NftError::SingularStep(k))?;
            let a = b_inv.mul(&c);
            let da = with_deriv.then(|| {
                b_inv
                    .mul(&jd)
                    .mul(&a.add(&Mat2::identity()))
                    .scale((0.5 * eps).into())
            });
            Ok((a, da))
        }
        MethodId::Rk4 => {
            let q_mid = s.q_mid.unwrap_or(0.5 * (s.q_k + s.q_next));
            let p0 = p_matrix(lambda, s.q_k);
            let ph = p_matrix(lambda, q_mid);
            let p1 = p_matrix(lambda, s.q_next);
            let half: C64 = (0.5 * eps).into();
            let full: C64 = eps.into();
            let id = Mat2::identity();
            let a1 = p0;
            let a2 = ph.mul(&id.add(&a1.scale(half)));
            let a3 = ph.mul(&id.add(&a2.scale(half)));
            let a4 = p1.mul(&id.add(&a3.scale(full)));
            let acc = a1.add(&a2.scale(2.0.into())).add(&a3.scale(2.0.into())).add(&a4);
            let a = id.add(&acc.scale((eps / 6.0).into()));
            let da = with_deriv.then(|| {
                let d1 = jd;
                let d2 = jd.mul(&id.add(&a1.scale(half))).add(&ph.mul(&d1).scale(half));
                let d3 = jd.mul(&id.add(&a2.scale(half))).add(&ph.mul(&d2).scale(half));
                let d4 = jd.mul(&id.add(&a3.scale(full))).add(&p1.mul(&d3).scale(full));
                d1.add(&d2.scale(2.0.into()))
                    .add(&d3.scale(2.0.into()))
                    .add(&d4)
                    .scale((eps / 6.0).into())
            });
            Ok((a, da))
        }
        MethodId::Central | MethodId::LayerPeeling => unreachable!("handled by advance"),
    }
}

/// Advances one step in either frame; the single entry point behind
/// [`step`], [`step_aug`] and the propagation loop.
#[allow(clippy::too_many_arguments)]
pub(crate) fn advance(
    method: MethodId,
    state: &TransferState,
    samples: &StepSamples,
    lambda: C64,
    grid: &TimeGrid,
    k: usize,
    euler_unit_det: bool,
) -> Result<TransferState> {
    if k != state.k {
        return Err(NftError::Invalid(format!(
            "step index {k} does not match state index {}",
            state.k
        )));
    }
    if k >= grid.n() {
        return Err(NftError::Invalid(format!(
            "step index {k} outside 0..{}",
            grid.n()
        )));
    }
    let eps = grid.eps();
    let t_k = grid.node(k);
    let t_next = grid.node(k + 1);
    let deriv = state.with_derivative;

    match method {
        MethodId::LayerPeeling => {
            let Repr::Coefficients { a, b, da, db } = &state.repr else {
                return Err(NftError::Invalid(
                    "layer peeling needs a coefficient state".into(),
                ));
            };
            let f = lp_factors(samples.q_k, lambda, eps, t_k + t_next, deriv);
            let a_new = a * f.x - b * f.yb;
            let b_new = a * f.y + b * f.xb;
            let (da_new, db_new) = if deriv {
                (
                    da * f.x + a * f.dx - (db * f.yb + b * f.dyb),
                    da * f.y + a * f.dy + db * f.xb + b * f.dxb,
                )
            } else {
                (*da, *db)
            };
            Ok(TransferState {
                k: k + 1,
                frame: state.frame,
                with_derivative: deriv,
                repr: Repr::Coefficients {
                    a: a_new,
                    b: b_new,
                    da: da_new,
                    db: db_new,
                },
            })
        }
        MethodId::Central => {
            let Repr::Vector { v, dv, prev } = &state.repr else {
                return Err(NftError::Invalid("central needs a vector state".into()));
            };
            if k == 0 || prev.is_none() {
                // bootstrap with one forward-difference step, retaining v[0]
                let (mut a, mut da_m) = one_step_matrix(
                    MethodId::Euler,
                    samples,
                    lambda,
                    eps,
                    deriv,
                    false,
                    k,
                )?;
                if state.frame == Frame::Normalized {
                    let phi = phase_matrix(lambda, eps, t_k + t_next);
                    if let Some(dm) = da_m.as_mut() {
                        *dm = phase_matrix_deriv(lambda, eps, t_k + t_next)
                            .hadamard(&a)
                            .add(&phi.hadamard(dm));
                    }
                    a = phi.hadamard(&a);
                }
                let v_new = a.mul_vec(*v);
                let dv_new = match &da_m {
                    Some(dm) => {
                        let t = dm.mul_vec(*v);
                        let u = a.mul_vec(*dv);
                        [t[0] + u[0], t[1] + u[1]]
                    }
                    None => *dv,
                };
                return Ok(TransferState {
                    k: k + 1,
                    frame: state.frame,
                    with_derivative: deriv,
                    repr: Repr::Vector {
                        v: v_new,
                        dv: dv_new,
                        prev: Some((*v, *dv)),
                    },
                });
            }
            let (v_prev, dv_prev) = prev.unwrap();
            let p = p_matrix(lambda, samples.q_k).scale((2.0 * eps).into());
            let pd = dp_matrix().scale((2.0 * eps).into());
            let (v_new, dv_new) = match state.frame {
                Frame::Jost => {
                    let gv = p.mul_vec(*v);
                    let v_new = [v_prev[0] + gv[0], v_prev[1] + gv[1]];
                    let dv_new = if deriv {
                        let t = pd.mul_vec(*v);
                        let u = p.mul_vec(*dv);
                        [dv_prev[0] + t[0] + u[0], dv_prev[1] + t[1] + u[1]]
                    } else {
                        *dv
                    };
                    (v_new, dv_new)
                }
                Frame::Normalized => {
                    let d2 = (2.0 * J * lambda * eps).exp();
                    let g = phase_matrix(lambda, eps, t_k + t_next).hadamard(&p);
                    let gv = g.mul_vec(*v);
                    let v_new = [d2 * v_prev[0] + gv[0], v_prev[1] / d2 + gv[1]];
                    let dv_new = if deriv {
                        let gd = phase_matrix_deriv(lambda, eps, t_k + t_next)
                            .hadamard(&p)
                            .add(&phase_matrix(lambda, eps, t_k + t_next).hadamard(&pd));
                        let t = gd.mul_vec(*v);
                        let u = g.mul_vec(*dv);
                        let two_je = 2.0 * J * eps;
                        [
                            two_je * d2 * v_prev[0] + d2 * dv_prev[0] + t[0] + u[0],
                            -two_je / d2 * v_prev[1] + dv_prev[1] / d2 + t[1] + u[1],
                        ]
                    } else {
                        *dv
                    };
                    (v_new, dv_new)
                }
            };
            Ok(TransferState {
                k: k + 1,
                frame: state.frame,
                with_derivative: deriv,
                repr: Repr::Vector {
                    v: v_new,
                    dv: dv_new,
                    prev: Some((*v, *dv)),
                },
            })
        }
        _ => {
            let Repr::Vector { v, dv, .. } = &state.repr else {
                return Err(NftError::Invalid("vector state required".into()));
            };
            let (mut a, mut da_m) =
                one_step_matrix(method, samples, lambda, eps, deriv, euler_unit_det, k)?;
            if state.frame == Frame::Normalized {
                let phi = phase_matrix(lambda, eps, t_k + t_next);
                if let Some(dm) = da_m.as_mut() {
                    *dm = phase_matrix_deriv(lambda, eps, t_k + t_next)
                        .hadamard(&a)
                        .add(&phi.hadamard(dm));
                }
                a = phi.hadamard(&a);
            }
            let v_new = a.mul_vec(*v);
            let dv_new = match &da_m {
                Some(dm) => {
                    let t = dm.mul_vec(*v);
                    let u = a.mul_vec(*dv);
                    [t[0] + u[0], t[1] + u[1]]
                }
                None => *dv,
            };
            Ok(TransferState {
                k: k + 1,
                frame: state.frame,
                with_derivative: deriv,
                repr: Repr::Vector {
                    v: v_new,
                    dv: dv_new,
                    prev: None,
                },
            })
        }
    }
}

/// Scattering factors of one constant layer, phase factors retained, together
/// with their lambda-derivatives.
pub(crate) struct LpFactors {
    pub x: C64,
    pub y: C64,
    pub xb: C64,
    pub yb: C64,
    pub dx: C64,
    pub dy: C64,
    pub dxb: C64,
    pub dyb: C64,
}

/// Core layer quantities: `c = cos(D eps)`, `s = sin(D eps)/D` and
/// `g3 = (D eps cos - sin)/D^3`, all even in `D` so the branch of the square
/// root never matters; series around the removable singularity at `D = 0`.
fn lp_core(q: C64, lambda: C64, eps: f64) -> (C64, C64, C64) {
    let d2 = lambda * lambda + q.norm_sqr();
    let w = d2 * (eps * eps); // (D eps)^2
    if w.norm() < 1e-8 {
        let c = 1.0 - w / 2.0 + w * w / 24.0;
        let s = eps * (1.0 - w / 6.0 + w * w / 120.0);
        let g3 = eps * eps * eps * (-1.0 / 3.0 + w / 30.0 - w * w / 840.0);
        (c, s, g3)
    } else {
        let d = d2.sqrt();
        let de = d * eps;
        let c = de.cos();
        let s = de.sin() / d;
        let g3 = (eps * c - s) / d2;
        (c, s, g3)
    }
}

fn lp_factors(q: C64, lambda: C64, eps: f64, sigma: f64, with_deriv: bool) -> LpFactors {
    let (c, s, g3) = lp_core(q, lambda, eps);
    let x_d = c - J * lambda * s;
    let y_d = -q.conj() * s;
    let xb_d = c + J * lambda * s;
    let yb_d = -q * s;

    let e_d = (J * lambda * eps).exp();
    let e_s = (J * lambda * sigma).exp();
    let x = x_d * e_d;
    let y = y_d / e_s;
    let xb = xb_d / e_d;
    let yb = yb_d * e_s;

    if !with_deriv {
        let zero = C64::new(0.0, 0.0);
        return LpFactors {
            x,
            y,
            xb,
            yb,
            dx: zero,
            dy: zero,
            dxb: zero,
            dyb: zero,
        };
    }
    let l2 = lambda * lambda;
    let dx_d = -J * l2 * g3 - (J + lambda * eps) * s;
    let dy_d = -q.conj() * lambda * g3;
    let dxb_d = J * l2 * g3 + (J - lambda * eps) * s;
    let dyb_d = -q * lambda * g3;
    LpFactors {
        x,
        y,
        xb,
        yb,
        dx: (dx_d + J * eps * x_d) * e_d,
        dy: (dy_d - J * sigma * y_d) / e_s,
        dxb: (dxb_d - J * eps * xb_d) / e_d,
        dyb: (dyb_d + J * sigma * yb_d) * e_s,
    }
}
