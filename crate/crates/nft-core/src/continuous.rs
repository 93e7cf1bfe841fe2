//! Continuous-spectrum driver over a real-lambda mesh and the spectral energy
//! integrals feeding the trace formula. The per-lambda propagations fan out
//! over the worker pool; output ordering is by mesh node regardless of the
//! schedule.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::par::par_map;
use crate::signal::{fmt_g17, Signal};
use crate::steppers::{propagate, MethodId};
use crate::zs::{continuous_amplitude, ContinuousSpectrumPoint};
use crate::{C64, NftError, Result};

/// Uniform real-axis mesh with `m` points on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaMesh {
    lo: f64,
    hi: f64,
    m: usize,
}

impl LambdaMesh {
    pub fn new(lo: f64, hi: f64, m: usize) -> Result<Self> {
        if !(hi > lo) {
            return Err(NftError::Invalid(format!("mesh [{lo}, {hi}] is degenerate")));
        }
        if m < 2 {
            return Err(NftError::Invalid(format!("mesh needs m >= 2, got {m}")));
        }
        Ok(LambdaMesh { lo, hi, m })
    }

    /// `[-20, 20]` with 2001 points; wide enough that the integrand tail check
    /// passes for the fast-decaying test pulses.
    pub fn default_mesh() -> Self {
        LambdaMesh {
            lo: -20.0,
            hi: 20.0,
            m: 2001,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.m - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.point(i)).collect()
    }
}

/// Continuous spectrum sampled on a mesh, one point per node.
#[derive(Debug, Clone)]
pub struct ContinuousSpectrum {
    pub mesh: LambdaMesh,
    pub points: Vec<ContinuousSpectrumPoint>,
}

/// Integral result with the self-validation flags from the mesh checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEnergy {
    pub value: f64,
    /// integrand below 1e-8 at both mesh ends
    pub tail_ok: bool,
    /// mesh nodes excluded because `a` vanished there (biases the value low)
    pub excluded_poles: usize,
}

/// Computes `qhat = b/a` on every mesh node. A pole at a node is recorded on
/// that point (`qhat = None`); other nodes are unaffected.
pub fn continuous_spectrum(
    signal: &Signal,
    method: MethodId,
    mesh: &LambdaMesh,
) -> Result<ContinuousSpectrum> {
    let results = par_map(mesh.points(), |lambda| {
        let c = propagate(method, signal, C64::new(lambda, 0.0), false)?;
        let qhat = match continuous_amplitude(&c) {
            Ok(q) => Some(q),
            Err(NftError::SpectrumPole { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(ContinuousSpectrumPoint {
            lambda,
            qhat,
            a: c.a,
            b: c.b,
        })
    });
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ContinuousSpectrum { mesh: *mesh, points })
}

/// Spectral energy `E_cont^(k) = (1/pi) integral lambda^{k-1} log(1+|qhat|^2)`
/// by the trapezoid rule on the mesh.
pub fn spectral_energy(spec: &ContinuousSpectrum, k: usize) -> Result<SpectralEnergy> {
    if !(1..=3).contains(&k) {
        return Err(NftError::Invalid(format!("spectral energy order {k} not in 1..=3")));
    }
    let mut excluded = 0usize;
    let integrand: Vec<f64> = spec
        .points
        .iter()
        .map(|p| match p.qhat {
            Some(q) => {
                p.lambda.powi(k as i32 - 1) * (1.0 + q.norm_sqr()).ln()
                    / std::f64::consts::PI
            }
            None => {
                excluded += 1;
                0.0
            }
        })
        .collect();
    let m = integrand.len();
    let dl = spec.mesh.spacing();
    let inner: f64 = integrand[1..m - 1].iter().sum();
    let value = dl * (0.5 * (integrand[0] + integrand[m - 1]) + inner);
    let tail_ok = integrand[0].abs() <= 1e-8 && integrand[m - 1].abs() <= 1e-8;
    Ok(SpectralEnergy {
        value,
        tail_ok,
        excluded_poles: excluded,
    })
}

/// Writes the `lambda,re_qhat,im_qhat,re_a,im_a,re_b,im_b` CSV; pole nodes
/// carry `inf` amplitudes.
pub fn write_spectrum_csv(spec: &ContinuousSpectrum, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("lambda,re_qhat,im_qhat,re_a,im_a,re_b,im_b\n");
    for p in &spec.points {
        let (re, im) = match p.qhat {
            Some(q) => (q.re, q.im),
            None => (f64::INFINITY, f64::INFINITY),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_g17(p.lambda),
            fmt_g17(re),
            fmt_g17(im),
            fmt_g17(p.a.re),
            fmt_g17(p.a.im),
            fmt_g17(p.b.re),
            fmt_g17(p.b.im)
        );
    }
    let mut f = std::fs::File::create(path).map_err(|e| NftError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    f.write_all(out.as_bytes()).map_err(|e| NftError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{rect_discrete, sy_continuous};
    use crate::signal::{auto_window, conserved, generate, make_grid, PulseFamily, PulseSpec, Signal};

    #[test]
    fn zero_potential_spectrum_is_zero() {
        let grid = make_grid(-1.0, 1.0, 64).unwrap();
        let s = Signal::new(grid, vec![C64::new(0.0, 0.0); 65]).unwrap();
        let mesh = LambdaMesh::new(-5.0, 5.0, 41).unwrap();
        let spec = continuous_spectrum(&s, MethodId::LayerPeeling, &mesh).unwrap();
        assert_eq!(spec.points.len(), 41);
        for p in &spec.points {
            assert!(p.qhat.unwrap().norm() < 1e-13);
        }
        let e = spectral_energy(&spec, 1).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.tail_ok);
    }

    #[test]
    fn pure_soliton_continuous_spectrum_is_small() {
        let spec = PulseSpec::new(PulseFamily::Sech, C64::new(1.0, 0.0));
        let grid = make_grid(-10.0, 10.0, 2048).unwrap();
        let s = generate(&spec, &grid).unwrap();
        let mesh = LambdaMesh::new(-10.0, 10.0, 201).unwrap();
        let out = continuous_spectrum(&s, MethodId::LayerPeeling, &mesh).unwrap();
        let max = out
            .points
            .iter()
            .map(|p| p.qhat.unwrap().norm())
            .fold(0.0, f64::max);
        assert!(max < 1e-3, "max |qhat| = {max}");
    }

    #[test]
    fn rect_spectrum_matches_oracle_pointwise() {
        let spec = PulseSpec::new(PulseFamily::Rect, C64::new(2.0, 0.0));
        let grid = make_grid(-1.0, 1.0, 2048).unwrap();
        let s = generate(&spec, &grid).unwrap();
        let mesh = LambdaMesh::new(-10.0, 10.0, 401).unwrap();
        let out = continuous_spectrum(&s, MethodId::LayerPeeling, &mesh).unwrap();
        let mut max_err = 0.0f64;
        for p in &out.points {
            let want = crate::oracles::rect_continuous(C64::new(2.0, 0.0), -1.0, 1.0, p.lambda)
                .unwrap();
            max_err = max_err.max((p.qhat.unwrap() - want).norm());
        }
        assert!(max_err < 1e-3, "max err {max_err}");
    }

    #[test]
    fn subcritical_pulses_close_the_trace_formula_with_no_eigenvalues() {
        // SY A = 0.5 via the oracle spectrum on a fine even mesh (no node at
        // the lambda = 0 pole)
        let m = 20_000usize;
        let mesh = LambdaMesh::new(-20.0, 20.0, m).unwrap();
        let points: Vec<ContinuousSpectrumPoint> = mesh
            .points()
            .iter()
            .map(|&l| {
                let q = sy_continuous(0.5, l).unwrap();
                ContinuousSpectrumPoint {
                    lambda: l,
                    qhat: Some(q),
                    a: C64::new(1.0, 0.0),
                    b: C64::new(0.0, 0.0),
                }
            })
            .collect();
        let spec = ContinuousSpectrum { mesh, points };
        let e = spectral_energy(&spec, 1).unwrap();
        assert!((e.value - 0.5).abs() < 1e-2, "E_cont = {}", e.value);

        // rectangle A = 0.5 through actual propagation; the root scan
        // confirms it is eigenvalue-free so E_cont carries all the energy
        assert!(rect_discrete(C64::new(0.5, 0.0), -1.0, 1.0).is_empty());
        let spec_r = PulseSpec::new(PulseFamily::Rect, C64::new(0.5, 0.0));
        let (t1, t2) = auto_window(&spec_r, 0.9999).unwrap();
        let grid = make_grid(t1, t2, 2048).unwrap();
        let s = generate(&spec_r, &grid).unwrap();
        let e_time = conserved(&s, 1).unwrap();
        let mesh = LambdaMesh::new(-40.0, 40.0, 8000).unwrap();
        let out = continuous_spectrum(&s, MethodId::LayerPeeling, &mesh).unwrap();
        let e_cont = spectral_energy(&out, 1).unwrap();
        assert!(
            (e_cont.value - e_time).abs() / e_time < 1e-2,
            "E_cont = {} vs E_time = {e_time}",
            e_cont.value
        );
    }

    #[test]
    fn mesh_refinement_is_second_order() {
        let spec = PulseSpec::new(PulseFamily::Sech, C64::new(1.3, 0.0));
        let grid = make_grid(-8.0, 8.0, 1024).unwrap();
        let s = generate(&spec, &grid).unwrap();
        // narrow mesh so boundary curvature dominates the trapezoid error
        let e_at = |m: usize| {
            let mesh = LambdaMesh::new(-2.0, 2.0, m).unwrap();
            let out = continuous_spectrum(&s, MethodId::LayerPeeling, &mesh).unwrap();
            spectral_energy(&out, 1).unwrap().value
        };
        let (e1, e2, e4) = (e_at(101), e_at(201), e_at(401));
        let ratio = (e1 - e2) / (e2 - e4);
        assert!(ratio > 2.0 && ratio < 8.0, "refinement ratio {ratio}");
    }

    #[test]
    fn spectrum_csv_has_expected_shape() {
        let grid = make_grid(-1.0, 1.0, 16).unwrap();
        let s = Signal::new(grid, vec![C64::new(0.1, 0.0); 17]).unwrap();
        let mesh = LambdaMesh::new(-1.0, 1.0, 5).unwrap();
        let out = continuous_spectrum(&s, MethodId::LayerPeeling, &mesh).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.csv");
        write_spectrum_csv(&out, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "lambda,re_qhat,im_qhat,re_a,im_a,re_b,im_b"
        );
        assert_eq!(lines.count(), 5);
    }
}
