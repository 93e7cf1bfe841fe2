//! Closed-form and high-accuracy reference spectra used by the tests and the
//! convergence benchmarks: the Satsuma-Yajima sech spectrum (via the complex
//! gamma function), the rectangle spectrum and its eigenvalue root equation,
//! and an adaptive ODE integration of the normalized scattering system.

use crate::signal::Signal;
use crate::{C64, J, NftError, Result};

/// Lanczos coefficients, g = 7, 9 terms (double-precision standard set).
const LANCZOS_G: f64 = 7.0;
const LANCZOS_P: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Complex gamma function via the Lanczos approximation with reflection for
/// `Re z < 1/2`. Relative error is below 1e-12 for `|z| <= 20` away from the
/// poles at the non-positive integers, which are reported as errors.
pub fn gamma_complex(z: C64) -> Result<C64> {
    if z.im == 0.0 && z.re <= 0.0 && (z.re - z.re.round()).abs() < 1e-12 {
        return Err(NftError::GammaPole(z));
    }
    Ok(gamma_unchecked(z))
}

fn gamma_unchecked(z: C64) -> C64 {
    let pi = std::f64::consts::PI;
    if z.re < 0.5 {
        // reflection: gamma(z) gamma(1 - z) = pi / sin(pi z)
        let s = (pi * z).sin();
        return pi / (s * gamma_unchecked(C64::new(1.0, 0.0) - z));
    }
    let z = z - 1.0;
    let mut x = C64::new(LANCZOS_P[0], 0.0);
    for (i, &p) in LANCZOS_P.iter().enumerate().skip(1) {
        x += p / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * pi).sqrt() * t.powc(z + 0.5) * (-t).exp() * x
}

/// Continuous spectrum of the Satsuma-Yajima pulse `A sech(t)`:
/// `-G(-jL+1/2+A) G(-jL+1/2-A) / G(-jL+1/2)^2 * sin(pi A)/cosh(pi L)`.
///
/// Integer `A` is reflectionless and returns exactly zero. Half-integer `A`
/// has a genuine pole at `lambda = 0`, surfaced as a gamma-pole error.
pub fn sy_continuous(a: f64, lambda: f64) -> Result<C64> {
    if !(a > 0.0) {
        return Err(NftError::Oracle(format!("sy amplitude {a} must be positive")));
    }
    if a.fract() == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let z0 = C64::new(0.5, -lambda);
    let num = gamma_complex(z0 + a)? * gamma_complex(z0 - a)?;
    let den = gamma_complex(z0)?;
    let pi = std::f64::consts::PI;
    Ok(-num / (den * den) * ((pi * a).sin() / (pi * lambda).cosh()))
}

/// Discrete spectrum of `A sech(t)`: `floor(A + 1/2 - eps)` eigenvalues at
/// `(A - 1/2)j, (A - 3/2)j, ...`, returned with decreasing imaginary part.
pub fn sy_discrete(a: f64) -> Vec<C64> {
    let count = (a + 0.5 - 1e-12).floor().max(0.0) as usize;
    (0..count)
        .map(|m| C64::new(0.0, a - 0.5 - m as f64))
        .collect()
}

/// Continuous spectrum of the rectangle pulse `A` on `[t1, t2]`, written with
/// `sin` in the numerator so the removable `cot` pole drops out:
/// `-A* e^{-2j L t2} sin(D d) / (D cos(D d) - j L sin(D d))`, `D^2 = L^2 + |A|^2`.
///
/// The denominator vanishes only where `a(lambda) = 0` (an eigenvalue crossing
/// the real axis at the critical amplitude); that is reported as an error.
pub fn rect_continuous(a: C64, t1: f64, t2: f64, lambda: f64) -> Result<C64> {
    if t2 <= t1 {
        return Err(NftError::Oracle("rect window is degenerate".into()));
    }
    let delta = t2 - t1;
    let d = (lambda * lambda + a.norm_sqr()).sqrt();
    let (s, c) = ((d * delta).sin(), (d * delta).cos());
    let den = C64::new(d * c, -lambda * s);
    if den.norm() < 1e-12 * (1.0 + d) {
        return Err(NftError::Oracle(format!(
            "rect spectrum pole at lambda = {lambda} (critical amplitude)"
        )));
    }
    let phase = (-2.0 * J * lambda * t2).exp();
    Ok(-a.conj() * phase * s / den)
}

/// Discrete spectrum of the rectangle pulse: all upper-half-plane roots of
/// `e^{2j(t2-t1) D} = (L + D)/(L - D)`.
///
/// For this family the roots are purely imaginary, `lambda = j kappa`; on the
/// imaginary axis the equation separates into the strictly decreasing branches
/// `f_m(kappa) = (t2-t1) sqrt(|A|^2 - kappa^2) - asin(kappa/|A|) + pi/2 - m pi`,
/// one root per `m = 1..=floor((t2-t1)|A|/pi + 1/2)`, each found by bisection.
pub fn rect_discrete(a: C64, t1: f64, t2: f64) -> Vec<C64> {
    let amp = a.norm();
    if amp == 0.0 || t2 <= t1 {
        return Vec::new();
    }
    let delta = t2 - t1;
    let count = (delta * amp / std::f64::consts::PI + 0.5 - 1e-12).floor() as usize;
    let mut out = Vec::with_capacity(count);
    for m in 1..=count {
        let f = |kappa: f64| {
            delta * (amp * amp - kappa * kappa).sqrt() - (kappa / amp).asin()
                + std::f64::consts::FRAC_PI_2
                - m as f64 * std::f64::consts::PI
        };
        let mut lo = 0.0;
        let mut hi = amp;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(C64::new(0.0, 0.5 * (lo + hi)));
    }
    out
}

/// Scattering coefficients `(a, b)` of a sampled signal at real `lambda` by
/// adaptive Dormand-Prince integration of the normalized system
/// `u1' = q e^{2j L t} u2`, `u2' = -q* e^{-2j L t} u1`, `u(T1) = (1, 0)`,
/// with the signal evaluated between nodes by cubic interpolation.
pub fn ode_scattering_reference(signal: &Signal, lambda: f64) -> Result<(C64, C64)> {
    let interp = CubicInterp::new(signal);
    let l = C64::new(lambda, 0.0);
    let rhs = |t: f64, u: [C64; 2]| -> [C64; 2] {
        let q = interp.at(t);
        let e = (2.0 * J * l * t).exp();
        [q * e * u[1], -q.conj() / e * u[0]]
    };
    let t0 = signal.grid.t1();
    let t1 = signal.grid.t2();
    let u = rkdp_adaptive(&rhs, t0, t1, [C64::new(1.0, 0.0), C64::new(0.0, 0.0)], 1e-12)?;
    Ok((u[0], u[1]))
}

/// High-accuracy reference for the continuous spectral amplitude
/// `qhat(lambda) = b/a` of a sampled signal; test oracle only.
pub fn ode_continuous_reference(signal: &Signal, lambda: f64) -> Result<C64> {
    let (a, b) = ode_scattering_reference(signal, lambda)?;
    if a.norm() < 1e-300 {
        return Err(NftError::SpectrumPole {
            lambda: C64::new(lambda, 0.0),
            a_mag: a.norm(),
        });
    }
    Ok(b / a)
}

struct CubicInterp<'a> {
    signal: &'a Signal,
}

impl<'a> CubicInterp<'a> {
    fn new(signal: &'a Signal) -> Self {
        CubicInterp { signal }
    }

    fn at(&self, t: f64) -> C64 {
        let g = &self.signal.grid;
        let n = g.n();
        let x = (t - g.t1()) / g.eps();
        let k = (x.floor() as isize).clamp(0, n as isize - 1) as usize;
        let j = k.saturating_sub(1).min(n.saturating_sub(3));
        let u = x - j as f64;
        let q = &self.signal.q;
        let l0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
        let l1 = u * (u - 2.0) * (u - 3.0) / 2.0;
        let l2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
        let l3 = u * (u - 1.0) * (u - 2.0) / 6.0;
        q[j] * l0 + q[j + 1] * l1 + q[j + 2] * l2 + q[j + 3] * l3
    }
}

/// Adaptive Dormand-Prince 5(4) on a 2-component complex system.
fn rkdp_adaptive(
    rhs: &dyn Fn(f64, [C64; 2]) -> [C64; 2],
    t0: f64,
    t1: f64,
    u0: [C64; 2],
    tol: f64,
) -> Result<[C64; 2]> {
    const A21: f64 = 1.0 / 5.0;
    const A31: f64 = 3.0 / 40.0;
    const A32: f64 = 9.0 / 40.0;
    const A41: f64 = 44.0 / 45.0;
    const A42: f64 = -56.0 / 15.0;
    const A43: f64 = 32.0 / 9.0;
    const A51: f64 = 19372.0 / 6561.0;
    const A52: f64 = -25360.0 / 2187.0;
    const A53: f64 = 64448.0 / 6561.0;
    const A54: f64 = -212.0 / 729.0;
    const A61: f64 = 9017.0 / 3168.0;
    const A62: f64 = -355.0 / 33.0;
    const A63: f64 = 46732.0 / 5247.0;
    const A64: f64 = 49.0 / 176.0;
    const A65: f64 = -5103.0 / 18656.0;
    const B1: f64 = 35.0 / 384.0;
    const B3: f64 = 500.0 / 1113.0;
    const B4: f64 = 125.0 / 192.0;
    const B5: f64 = -2187.0 / 6784.0;
    const B6: f64 = 11.0 / 84.0;
    const E1: f64 = 35.0 / 384.0 - 5179.0 / 57600.0;
    const E3: f64 = 500.0 / 1113.0 - 7571.0 / 16695.0;
    const E4: f64 = 125.0 / 192.0 - 393.0 / 640.0;
    const E5: f64 = -2187.0 / 6784.0 + 92097.0 / 339200.0;
    const E6: f64 = 11.0 / 84.0 - 187.0 / 2100.0;
    const E7: f64 = -1.0 / 40.0;

    let axpy = |u: [C64; 2], terms: &[(f64, [C64; 2])], h: f64| -> [C64; 2] {
        let mut out = u;
        for &(c, k) in terms {
            out[0] += h * c * k[0];
            out[1] += h * c * k[1];
        }
        out
    };

    let mut t = t0;
    let mut u = u0;
    let mut h = (t1 - t0) / 100.0;
    let mut steps = 0usize;
    while t < t1 {
        if steps > 20_000_000 {
            return Err(NftError::Oracle("ode reference exceeded step budget".into()));
        }
        steps += 1;
        if t + h > t1 {
            h = t1 - t;
        }
        let k1 = rhs(t, u);
        let k2 = rhs(t + 0.2 * h, axpy(u, &[(A21, k1)], h));
        let k3 = rhs(t + 0.3 * h, axpy(u, &[(A31, k1), (A32, k2)], h));
        let k4 = rhs(t + 0.8 * h, axpy(u, &[(A41, k1), (A42, k2), (A43, k3)], h));
        let k5 = rhs(
            t + 8.0 / 9.0 * h,
            axpy(u, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], h),
        );
        let k6 = rhs(
            t + h,
            axpy(
                u,
                &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
                h,
            ),
        );
        let unew = axpy(u, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)], h);
        let k7 = rhs(t + h, unew);
        let err_v = axpy(
            [C64::new(0.0, 0.0); 2],
            &[(E1, k1), (E3, k3), (E4, k4), (E5, k5), (E6, k6), (E7, k7)],
            h,
        );
        let scale = 1.0 + u[0].norm().max(u[1].norm());
        let err = err_v[0].norm().max(err_v[1].norm()) / scale;
        if err <= tol {
            t += h;
            u = unew;
        }
        let factor = if err > 0.0 {
            (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
        if !h.is_finite() || h <= 0.0 {
            return Err(NftError::Oracle("ode reference step size collapsed".into()));
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{auto_window, generate, make_grid, PulseFamily, PulseSpec};

    #[test]
    fn gamma_known_values() {
        let one = gamma_complex(C64::new(1.0, 0.0)).unwrap();
        assert!((one - 1.0).norm() < 1e-14);
        let half = gamma_complex(C64::new(0.5, 0.0)).unwrap();
        assert!((half.re - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!(half.im.abs() < 1e-14);
        let six = gamma_complex(C64::new(6.0, 0.0)).unwrap();
        assert!((six - 120.0).norm() / 120.0 < 1e-13);
    }

    #[test]
    fn gamma_poles_are_signaled() {
        for z in [0.0, -1.0, -5.0] {
            assert!(matches!(
                gamma_complex(C64::new(z, 0.0)),
                Err(NftError::GammaPole(_))
            ));
        }
        // nearby but off the pole is fine
        assert!(gamma_complex(C64::new(-1.0, 1e-6)).is_ok());
    }

    #[test]
    fn gamma_recurrence_holds_to_1e12() {
        let pts = [
            C64::new(0.3, 4.0),
            C64::new(2.5, -7.0),
            C64::new(-3.3, 0.4),
            C64::new(9.0, 9.0),
            C64::new(0.5, 17.0),
            C64::new(-8.7, -2.2),
        ];
        for &z in &pts {
            let lhs = gamma_complex(z + 1.0).unwrap();
            let rhs = z * gamma_complex(z).unwrap();
            assert!(
                (lhs - rhs).norm() / rhs.norm() < 1e-12,
                "recurrence failed at {z}"
            );
        }
    }

    #[test]
    fn gamma_reflection_identity_on_critical_line() {
        // |gamma(1/2 + jy)|^2 = pi / cosh(pi y)
        for y in [0.5, 1.0, 3.0] {
            let g = gamma_complex(C64::new(0.5, y)).unwrap();
            let want = std::f64::consts::PI / (std::f64::consts::PI * y).cosh();
            assert!((g.norm_sqr() - want).abs() / want < 1e-12, "y = {y}");
        }
    }

    #[test]
    fn sy_discrete_ladder() {
        let eigs = sy_discrete(2.7);
        assert_eq!(eigs.len(), 3);
        assert!((eigs[0] - C64::new(0.0, 2.2)).norm() < 1e-12);
        assert!((eigs[1] - C64::new(0.0, 1.2)).norm() < 1e-12);
        assert!((eigs[2] - C64::new(0.0, 0.2)).norm() < 1e-12);
        assert_eq!(sy_discrete(1.0), vec![C64::new(0.0, 0.5)]);
        assert!(sy_discrete(0.4).is_empty());
        assert_eq!(sy_discrete(0.9).len(), 1);
        assert_eq!(sy_discrete(2.2).len(), 2);
    }

    #[test]
    fn sy_continuous_vanishes_for_integer_amplitude() {
        for lambda in [-3.0, 0.0, 0.7, 10.0] {
            assert_eq!(sy_continuous(2.0, lambda).unwrap(), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn sy_continuous_pole_at_half_integer_amplitude() {
        assert!(sy_continuous(0.5, 0.0).is_err());
        assert!(sy_continuous(0.5, 0.3).is_ok());
    }

    #[test]
    fn sy_trace_identity_closes() {
        // (1/pi) integral log(1 + |qhat|^2) + 4 sum Im(lambda_j) = 2 A^2
        for a in [0.5, 1.0, 2.7] {
            let m = 40_000usize; // even: no node at the A = 1/2 pole at lambda = 0
            let (lo, hi) = (-8.0, 8.0);
            let dl = (hi - lo) / (m - 1) as f64;
            let mut integral = 0.0;
            for i in 0..m {
                let lambda = lo + i as f64 * dl;
                let qhat = sy_continuous(a, lambda).unwrap();
                let v = (1.0 + qhat.norm_sqr()).ln();
                integral += if i == 0 || i == m - 1 { 0.5 * v } else { v };
            }
            integral *= dl / std::f64::consts::PI;
            let disc: f64 = sy_discrete(a).iter().map(|l| 4.0 * l.im).sum();
            let want = 2.0 * a * a;
            assert!(
                (integral + disc - want).abs() < 1e-3,
                "A = {a}: cont {integral} + disc {disc} != {want}"
            );
        }
    }

    #[test]
    fn rect_discrete_reproduces_known_root() {
        let eigs = rect_discrete(C64::new(2.0, 0.0), -1.0, 1.0);
        assert_eq!(eigs.len(), 1);
        assert!((eigs[0] - C64::new(0.0, 1.5713)).norm() < 1e-3, "{}", eigs[0]);
        // residual check in the original root equation
        let l = eigs[0];
        let d = (l * l + 4.0).sqrt();
        let lhs = (2.0 * J * 2.0 * d).exp();
        let rhs = (l + d) / (l - d);
        assert!((lhs - rhs).norm() < 1e-9);
    }

    #[test]
    fn rect_discrete_counts_follow_klaus_shaw() {
        assert!(rect_discrete(C64::new(0.7, 0.0), -1.0, 1.0).is_empty());
        assert_eq!(rect_discrete(C64::new(4.0, 0.0), -1.0, 1.0).len(), 3);
        assert!(rect_discrete(C64::new(0.0, 0.0), -1.0, 1.0).is_empty());
        // subcritical: 0.5 * 2 / pi + 1/2 < 1
        assert!(rect_discrete(C64::new(0.5, 0.0), -1.0, 1.0).is_empty());
    }

    #[test]
    fn rect_continuous_limits_and_symmetry() {
        // A -> 0 gives a vanishing spectrum
        let tiny = rect_continuous(C64::new(1e-8, 0.0), -1.0, 1.0, 0.7).unwrap();
        assert!(tiny.norm() < 1e-7);
        // |qhat(-lambda)| = |qhat(lambda)| for real amplitude
        for lambda in [0.3, 1.1, 4.0] {
            let p = rect_continuous(C64::new(2.0, 0.0), -1.0, 1.0, lambda).unwrap();
            let m = rect_continuous(C64::new(2.0, 0.0), -1.0, 1.0, -lambda).unwrap();
            assert!((p.norm() - m.norm()).abs() < 1e-12 * (1.0 + p.norm()));
        }
        // lambda = 0 is regular in the sin form: -(A*/|A|) tan(|A| d) magnitude
        let q0 = rect_continuous(C64::new(2.0, 0.0), -1.0, 1.0, 0.0).unwrap();
        assert!((q0.norm() - (2.0f64 * 2.0).tan().abs()).abs() < 1e-12);
    }

    #[test]
    fn rect_continuous_small_amplitude_matches_fourier_limit() {
        // qhat ~ -F(q*)(2 lambda) for small amplitudes
        let a = C64::new(1e-4, 0.0);
        for lambda in [0.4, 1.3] {
            let qhat = rect_continuous(a, -1.0, 1.0, lambda).unwrap();
            let born = -a.conj()
                * ((-2.0 * J * lambda * -1.0).exp() - (-2.0 * J * lambda * 1.0).exp())
                / (2.0 * J * lambda);
            assert!((qhat - born).norm() < 1e-6 * born.norm().max(1e-12));
        }
    }

    #[test]
    fn ode_reference_zero_potential_is_trivial() {
        let g = make_grid(-1.0, 1.0, 64).unwrap();
        let s = Signal::new(g, vec![C64::new(0.0, 0.0); 65]).unwrap();
        let qhat = ode_continuous_reference(&s, 0.8).unwrap();
        assert!(qhat.norm() < 1e-12);
        let (a, _) = ode_scattering_reference(&s, 0.8).unwrap();
        assert!((a - 1.0).norm() < 1e-12);
    }

    #[test]
    fn ode_reference_matches_sy_formula() {
        // window wide enough that truncation sits below the comparison level
        let spec = PulseSpec::new(PulseFamily::Sech, C64::new(0.5, 0.0));
        let g = make_grid(-22.0, 22.0, 16384).unwrap();
        let s = generate(&spec, &g).unwrap();
        for lambda in [0.3, 0.7, 2.0] {
            let want = sy_continuous(0.5, lambda).unwrap();
            let got = ode_continuous_reference(&s, lambda).unwrap();
            assert!(
                (got - want).norm() < 1e-8 * (1.0 + want.norm()),
                "lambda = {lambda}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn ode_reference_matches_rect_formula() {
        let spec = PulseSpec::new(PulseFamily::Rect, C64::new(2.0, 0.0));
        let (t1, t2) = auto_window(&spec, 0.9999).unwrap();
        let g = make_grid(t1, t2, 4096).unwrap();
        let s = generate(&spec, &g).unwrap();
        for lambda in [0.5, 3.0, 7.5] {
            let want = rect_continuous(C64::new(2.0, 0.0), t1, t2, lambda).unwrap();
            let got = ode_continuous_reference(&s, lambda).unwrap();
            assert!(
                (got - want).norm() < 1e-8 * (1.0 + want.norm()),
                "lambda = {lambda}: {got} vs {want}"
            );
        }
    }
}
