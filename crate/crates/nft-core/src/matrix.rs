//! The three matrix eigenproblem formulations of the Zakharov-Shabat spectral
//! problem (central difference, Ablowitz-Ladik, Fourier spectral), the general
//! complex eigensolver behind them, and the filtering that separates physical
//! eigenvalue candidates from the spurious ones hugging the real axis.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::signal::Signal;
use crate::{C64, J, NftError, Result};

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> ComplexMatrix {
        ComplexMatrix {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.dim + c] = v;
    }

    /// Text dump: a line with `d`, then `d*d` lines `re,im` in row-major order.
    pub fn dump(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.dim);
        for v in &self.data {
            let _ = writeln!(out, "{},{}", crate::signal::fmt_g17(v.re), crate::signal::fmt_g17(v.im));
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
}

/// Which Ablowitz-Ladik operator the builder assembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlVariant {
    /// `alpha[k-1]` weights on the lower-right shift
    Full,
    /// first-order simplification: unit shifts, `-Q*[k]` on the lower left
    Simplified,
    /// normalized iteration: `alpha` weights moved to the upper-left shift
    Normalized,
}

/// Central-difference formulation: `j [[D, -diag(q)], [-diag(q*), -D]]` with
/// the cyclic first-order difference `D` (corner entries wrap). Its
/// eigenvalues approximate the Zakharov-Shabat spectrum directly.
pub fn build_cd_matrix(signal: &Signal) -> ComplexMatrix {
    let q = &signal.q;
    let n1 = q.len(); // n + 1 nodes
    let inv2e = 1.0 / (2.0 * signal.grid.eps());
    let mut m = ComplexMatrix::zeros(2 * n1);
    for r in 0..n1 {
        let up = (r + 1) % n1;
        let dn = (r + n1 - 1) % n1;
        // j D block
        m.set(r, up, J * inv2e);
        m.set(r, dn, -J * inv2e);
        // -j diag(q)
        m.set(r, n1 + r, -J * q[r]);
        // -j diag(q*)
        m.set(n1 + r, r, -J * q[r].conj());
        // -j D block
        m.set(n1 + r, n1 + up, -J * inv2e);
        m.set(n1 + r, n1 + dn, J * inv2e);
    }
    m
}

/// Ablowitz-Ladik formulation with `Q[k] = q[k] eps`; all shifts are cyclic so
/// indices stay in `0..=n`. Eigenvalues emerge in the `z = e^{-j lambda eps}`
/// domain (discrete spectrum outside the unit circle).
pub fn build_al_matrix(signal: &Signal, variant: AlVariant) -> ComplexMatrix {
    let eps = signal.grid.eps();
    let q: Vec<C64> = signal.q.iter().map(|v| v * eps).collect();
    let alpha: Vec<f64> = q.iter().map(|v| 1.0 + v.norm_sqr()).collect();
    let n1 = q.len();
    let mut m = ComplexMatrix::zeros(2 * n1);
    let one = C64::new(1.0, 0.0);
    for r in 0..n1 {
        let up = (r + 1) % n1;
        let dn = (r + n1 - 1) % n1;
        match variant {
            AlVariant::Full => {
                m.set(r, up, one);
                m.set(r, n1 + r, -q[r]);
                m.set(n1 + r, r, -q[dn].conj());
                m.set(n1 + r, n1 + dn, alpha[dn].into());
            }
            AlVariant::Simplified => {
                m.set(r, up, one);
                m.set(r, n1 + r, -q[r]);
                m.set(n1 + r, r, -q[r].conj());
                m.set(n1 + r, n1 + dn, one);
            }
            AlVariant::Normalized => {
                m.set(r, up, alpha[r].into());
                m.set(r, n1 + r, -q[r]);
                m.set(n1 + r, r, -q[dn].conj());
                m.set(n1 + r, n1 + dn, one);
            }
        }
    }
    m
}

/// Fourier spectral formulation `A = [[Omega, Gamma], [-Gamma^H, -Omega]]`
/// over the `m_modes + 1` harmonics `e^{j 2 pi k t / T}`, `|k| <= m_modes/2`,
/// with the Fourier coefficients of `q` from a discrete Fourier sum. The
/// physical eigenvalues are the eigenvalues of `A` itself.
pub fn build_spectral_matrix(signal: &Signal, m_modes: usize) -> Result<ComplexMatrix> {
    let n = signal.grid.n();
    if m_modes % 2 != 0 {
        return Err(NftError::Invalid(format!(
            "spectral mode count {m_modes} must be even"
        )));
    }
    if m_modes > n {
        return Err(NftError::Invalid(format!(
            "spectral mode count {m_modes} exceeds sample count {n}"
        )));
    }
    let half = (m_modes / 2) as isize;
    let t = signal.grid.t2() - signal.grid.t1();
    let t1 = signal.grid.t1();
    // gamma_k = (1/T) integral q e^{-j 2 pi k t / T} dt by left-Riemann sum
    let mut gamma = vec![C64::new(0.0, 0.0); m_modes + 1];
    for (slot, k) in gamma.iter_mut().zip(-half..=half) {
        let mut acc = C64::new(0.0, 0.0);
        let w = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
        for (m, qm) in signal.q.iter().take(n).enumerate() {
            acc += qm * C64::new(0.0, w * m as f64).exp();
        }
        let phase = C64::new(0.0, -2.0 * std::f64::consts::PI * k as f64 * t1 / t).exp();
        *slot = acc * phase / n as f64;
    }
    let gamma_at = |k: isize| -> C64 {
        if k.abs() > half {
            C64::new(0.0, 0.0)
        } else {
            gamma[(k + half) as usize]
        }
    };
    let l = m_modes + 1;
    let mut m = ComplexMatrix::zeros(2 * l);
    let scale = 2.0 * std::f64::consts::PI / t;
    for r in 0..l {
        let kr = r as isize - half;
        m.set(r, r, C64::new(-scale * kr as f64, 0.0));
        m.set(l + r, l + r, C64::new(scale * kr as f64, 0.0));
        for c in 0..l {
            let kc = c as isize - half;
            let g = gamma_at(kr - kc);
            if g.norm_sqr() != 0.0 {
                m.set(r, l + c, -J * g);
            }
            let gh = gamma_at(kc - kr);
            if gh.norm_sqr() != 0.0 {
                m.set(l + r, c, -J * gh.conj());
            }
        }
    }
    Ok(m)
}

#[cfg(not(feature = "parallel"))]
fn configure_eigensolver_parallelism() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

#[cfg(feature = "parallel")]
fn configure_eigensolver_parallelism() {}

/// All eigenvalues of a general (non-Hermitian) complex matrix via a
/// balanced Hessenberg + shifted-QR decomposition.
pub fn all_eigenvalues(m: &ComplexMatrix) -> Result<Vec<C64>> {
    configure_eigensolver_parallelism();
    if m.data.iter().any(|v| !v.is_finite()) {
        return Err(NftError::Eigensolver {
            dim: m.dim,
            msg: "matrix has non-finite entries".into(),
        });
    }
    let mut a = faer::Mat::<faer::c64>::zeros(m.dim, m.dim);
    for r in 0..m.dim {
        for c in 0..m.dim {
            a[(r, c)] = m.get(r, c);
        }
    }
    a.eigenvalues().map_err(|e| NftError::Eigensolver {
        dim: m.dim,
        msg: format!("{e:?}"),
    })
}

/// Which domain the raw eigenvalues live in before filtering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralDomain {
    /// eigenvalues are lambda values already (central difference, spectral)
    Lambda,
    /// eigenvalues are `z = e^{-j lambda eps}`; mapped by the principal
    /// logarithm, keeping `|z| > 1`
    Z { eps: f64 },
}

/// Eigenvalue filtering policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterPolicy {
    /// keep `Im(lambda)` above this (spurious values hug the real axis)
    pub im_threshold: f64,
    /// optional real-part bounds removing the Ablowitz-Ladik spurious line
    pub strip: Option<(f64, f64)>,
    pub domain: SpectralDomain,
    /// candidates closer than this are one eigenvalue; the central-difference
    /// matrix reproduces each eigenvalue on both difference branches
    pub dedup_tol: f64,
}

impl FilterPolicy {
    /// Threshold scaled by the trace bound `Im(lambda) <= E1/4`.
    pub fn for_energy(e1: f64, domain: SpectralDomain) -> FilterPolicy {
        FilterPolicy {
            im_threshold: 0.02 * (e1 / 4.0).max(1.0),
            strip: None,
            domain,
            dedup_tol: 1e-3,
        }
    }
}

/// A physical eigenvalue candidate. Matrix methods carry no spectral
/// amplitude information, so candidates hold the location only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenvalueCandidate {
    pub lambda: C64,
    /// `Re(lambda)` close to the edge of the principal branch of the z-map,
    /// where the lambda value is ambiguous modulo `2 pi / eps`
    pub wrap_risk: bool,
}

/// Filters raw eigenvalues down to upper-half-plane candidates, sorted by
/// decreasing imaginary part.
pub fn filter_physical(eigs: &[C64], policy: &FilterPolicy) -> Vec<EigenvalueCandidate> {
    let mut out: Vec<EigenvalueCandidate> = eigs
        .iter()
        .filter_map(|&e| match policy.domain {
            SpectralDomain::Lambda => Some(EigenvalueCandidate {
                lambda: e,
                wrap_risk: false,
            }),
            SpectralDomain::Z { eps } => {
                if e.norm() <= 1.0 {
                    return None;
                }
                let lambda = J * e.ln() / eps;
                let wrap_risk = lambda.re.abs() >= 0.95 * std::f64::consts::PI / eps;
                Some(EigenvalueCandidate { lambda, wrap_risk })
            }
        })
        .filter(|c| c.lambda.im > policy.im_threshold)
        .filter(|c| match policy.strip {
            Some((lo, hi)) => c.lambda.re >= lo && c.lambda.re <= hi,
            None => true,
        })
        .collect();
    out.sort_by(|a, b| {
        b.lambda
            .im
            .partial_cmp(&a.lambda.im)
            .unwrap()
            .then(a.lambda.re.partial_cmp(&b.lambda.re).unwrap())
    });
    let mut unique: Vec<EigenvalueCandidate> = Vec::with_capacity(out.len());
    for c in out {
        if unique
            .iter()
            .all(|u| (u.lambda - c.lambda).norm() >= policy.dedup_tol)
        {
            unique.push(c);
        }
    }
    unique
}
