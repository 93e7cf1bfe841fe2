//! Time grids, pulse generation for the studied waveform families, and the
//! time-domain conserved quantities `E^(1)..E^(3)` that feed the trace formula.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::{C64, J, NftError, Result};

/// Uniform grid on `[t1, t2]` with `n` intervals and `n + 1` nodes.
///
/// Nodes are always computed as `t1 + k * eps` so that every consumer sees the
/// same rounding; `node(n)` is the grid's right edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t1: f64,
    eps: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(t1: f64, t2: f64, n: usize) -> Result<Self> {
        if !t1.is_finite() || !t2.is_finite() {
            return Err(NftError::InvalidGrid("non-finite endpoints".into()));
        }
        if t2 <= t1 {
            return Err(NftError::InvalidGrid(format!(
                "degenerate window [{t1}, {t2}]"
            )));
        }
        if n < 2 {
            return Err(NftError::InvalidGrid(format!("need n >= 2, got {n}")));
        }
        Ok(TimeGrid {
            t1,
            eps: (t2 - t1) / n as f64,
            n,
        })
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    /// Right edge, identical to `node(n)`.
    pub fn t2(&self) -> f64 {
        self.node(self.n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Sample instant `t[k] = t1 + k * eps`, `k = 0..=n`.
    pub fn node(&self, k: usize) -> f64 {
        self.t1 + k as f64 * self.eps
    }

    /// Half-grid instant `t1 + (k + 1/2) * eps`, `k = 0..n`.
    pub fn midpoint(&self, k: usize) -> f64 {
        self.t1 + (k as f64 + 0.5) * self.eps
    }
}

/// Builds a [`TimeGrid`]; rejects `n < 2` and `t2 <= t1`.
pub fn make_grid(t1: f64, t2: f64, n: usize) -> Result<TimeGrid> {
    TimeGrid::new(t1, t2, n)
}

/// A uniformly sampled complex envelope: `q[k] = q(t[k])` on the `n + 1` nodes.
///
/// `q_half` holds the generator-evaluated half-grid samples `q(t1 + (k+1/2)eps)`
/// when the signal came from an analytic pulse family. Integrators that need
/// midpoint values use them when present and fall back to linear interpolation
/// otherwise (file-loaded signals).
#[derive(Debug, Clone)]
pub struct Signal {
    pub grid: TimeGrid,
    pub q: Vec<C64>,
    pub q_half: Option<Vec<C64>>,
}

impl Signal {
    pub fn new(grid: TimeGrid, q: Vec<C64>) -> Result<Self> {
        Self::with_midpoints(grid, q, None)
    }

    pub fn with_midpoints(grid: TimeGrid, q: Vec<C64>, q_half: Option<Vec<C64>>) -> Result<Self> {
        if q.len() != grid.n() + 1 {
            return Err(NftError::Invalid(format!(
                "signal has {} samples, grid wants {}",
                q.len(),
                grid.n() + 1
            )));
        }
        if let Some(h) = &q_half {
            if h.len() != grid.n() {
                return Err(NftError::Invalid(format!(
                    "half-grid has {} samples, grid wants {}",
                    h.len(),
                    grid.n()
                )));
            }
        }
        if q.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(NftError::Invalid("non-finite sample".into()));
        }
        Ok(Signal { grid, q, q_half })
    }

    /// Midpoint sample for the interval `[t[k], t[k+1])`: analytic when the
    /// generator provided it, otherwise the average of the adjacent nodes.
    pub fn q_mid(&self, k: usize) -> C64 {
        match &self.q_half {
            Some(h) => h[k],
            None => 0.5 * (self.q[k] + self.q[k + 1]),
        }
    }

    /// Writes the `t,re,im` CSV format (17 significant digits).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("t,re,im\n");
        for k in 0..=self.grid.n() {
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_g17(self.grid.node(k)),
                fmt_g17(self.q[k].re),
                fmt_g17(self.q[k].im)
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

    /// Reads the `t,re,im` CSV format, reconstructing the uniform grid.
    pub fn read_csv(path: &Path) -> Result<Signal> {
        let f = std::fs::File::open(path).map_err(|e| NftError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let p = path.display().to_string();
        let reader = BufReader::new(f);
        let mut t = Vec::new();
        let mut q = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| NftError::Io {
                path: p.clone(),
                source: e,
            })?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if i == 0 {
                if line != "t,re,im" {
                    return Err(NftError::Malformed {
                        path: p,
                        line: 1,
                        msg: format!("expected header 't,re,im', got '{line}'"),
                    });
                }
                continue;
            }
            let mut cols = line.split(',');
            let mut next = |what: &str| -> Result<f64> {
                cols.next()
                    .ok_or_else(|| NftError::Malformed {
                        path: p.clone(),
                        line: i + 1,
                        msg: format!("missing column '{what}'"),
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| NftError::Malformed {
                        path: p.clone(),
                        line: i + 1,
                        msg: format!("bad {what}: {e}"),
                    })
            };
            t.push(next("t")?);
            q.push(C64::new(next("re")?, next("im")?));
        }
        if t.len() < 3 {
            return Err(NftError::Malformed {
                path: p,
                line: t.len() + 1,
                msg: "need at least 3 rows".into(),
            });
        }
        let n = t.len() - 1;
        let grid = TimeGrid::new(t[0], t[n], n)?;
        let eps = grid.eps();
        for (k, &tk) in t.iter().enumerate() {
            if (tk - grid.node(k)).abs() > 1e-9 * (1.0 + eps.abs() * n as f64) {
                return Err(NftError::Malformed {
                    path: p,
                    line: k + 2,
                    msg: format!("non-uniform spacing at t = {tk}"),
                });
            }
        }
        Signal::new(grid, q)
    }
}

/// 17-significant-digit, locale-free float formatting shared by all CSV output.
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Waveform families studied in the pulse experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum PulseFamily {
    /// `sech(scale * t)`
    Sech,
    /// `1` on `|scale * t| <= 1`, else `0` (closed interval at the edges)
    Rect,
    /// normalized `sinc(scale * t) = sin(pi x)/(pi x)`
    Sinc,
    /// `exp(-(scale * t)^2)`
    Gaussian,
    /// raised-cosine impulse response with roll-off `beta`, unit symbol time
    RaisedCosine { rolloff: f64 },
    /// superposition `sum_i amp_i * base(scale * (t - delay_i))`
    Wavetrain {
        base: Box<PulseFamily>,
        elements: Vec<(C64, f64)>,
    },
    /// load the `t,re,im` CSV written by [`Signal::write_csv`]
    File { path: PathBuf },
}

/// Full pulse description: `q(t) = A e^{j phi} e^{-j w1 t} e^{j w2 t^2} base(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec {
    pub family: PulseFamily,
    pub amplitude: C64,
    pub scale: f64,
    /// linear chirp `w1`, entering as `e^{-j w1 t}`
    pub chirp_linear: f64,
    /// quadratic chirp `w2`, entering as `e^{+j w2 t^2}`
    pub chirp_quadratic: f64,
    /// constant phase `phi`
    pub phase: f64,
}

impl PulseSpec {
    pub fn new(family: PulseFamily, amplitude: C64) -> Self {
        PulseSpec {
            family,
            amplitude,
            scale: 1.0,
            chirp_linear: 0.0,
            chirp_quadratic: 0.0,
            phase: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.family {
            PulseFamily::File { .. } => return Ok(()),
            PulseFamily::Wavetrain { base, elements } => {
                if elements.is_empty() {
                    return Err(NftError::InvalidPulse("empty wavetrain".into()));
                }
                if matches!(**base, PulseFamily::Wavetrain { .. } | PulseFamily::File { .. }) {
                    return Err(NftError::InvalidPulse(
                        "wavetrain base must be a plain family".into(),
                    ));
                }
            }
            PulseFamily::RaisedCosine { rolloff } => {
                if !(0.0..=1.0).contains(rolloff) {
                    return Err(NftError::InvalidPulse(format!(
                        "roll-off {rolloff} outside [0, 1]"
                    )));
                }
            }
            _ => {}
        }
        if !(self.scale > 0.0) {
            return Err(NftError::InvalidPulse(format!(
                "scale {} must be positive",
                self.scale
            )));
        }
        Ok(())
    }

    /// Complex envelope at time `t` (all modulation factors applied).
    pub fn eval(&self, t: f64) -> C64 {
        let base = base_combined(&self.family, self.scale, t);
        let theta = self.phase - self.chirp_linear * t + self.chirp_quadratic * t * t;
        self.amplitude * base * C64::new(0.0, theta).exp()
    }
}

fn base_value(family: &PulseFamily, x: f64) -> f64 {
    match family {
        PulseFamily::Sech => 1.0 / x.cosh(),
        PulseFamily::Rect => {
            if x.abs() <= 1.0 {
                1.0
            } else {
                0.0
            }
        }
        PulseFamily::Sinc => sinc(x),
        PulseFamily::Gaussian => (-x * x).exp(),
        PulseFamily::RaisedCosine { rolloff } => raised_cosine(x, *rolloff),
        PulseFamily::Wavetrain { .. } | PulseFamily::File { .. } => {
            unreachable!("handled by base_combined/generate")
        }
    }
}

fn base_combined(family: &PulseFamily, scale: f64, t: f64) -> C64 {
    match family {
        PulseFamily::Wavetrain { base, elements } => elements
            .iter()
            .map(|(amp, delay)| amp * base_value(base, scale * (t - delay)))
            .sum(),
        PulseFamily::File { .. } => unreachable!("file signals are loaded, not evaluated"),
        plain => C64::new(base_value(plain, scale * t), 0.0),
    }
}

/// Normalized sinc: `sin(pi x)/(pi x)`, `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    let px = std::f64::consts::PI * x;
    if px.abs() < 1e-8 {
        1.0 - px * px / 6.0
    } else {
        px.sin() / px
    }
}

fn raised_cosine(x: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        return sinc(x);
    }
    let d = 1.0 - (2.0 * beta * x) * (2.0 * beta * x);
    if d.abs() < 1e-10 {
        // removable singularity at |x| = 1/(2 beta)
        std::f64::consts::FRAC_PI_4 * sinc(1.0 / (2.0 * beta))
    } else {
        sinc(x) * (std::f64::consts::PI * beta * x).cos() / d
    }
}

/// Samples the pulse on the grid nodes and half-grid points.
///
/// The `File` family loads the CSV instead and checks it against `grid`; such
/// signals carry no half-grid samples.
pub fn generate(spec: &PulseSpec, grid: &TimeGrid) -> Result<Signal> {
    spec.validate()?;
    if let PulseFamily::File { path } = &spec.family {
        let loaded = Signal::read_csv(path)?;
        let g = &loaded.grid;
        if g.n() != grid.n()
            || (g.t1() - grid.t1()).abs() > 1e-9
            || (g.t2() - grid.t2()).abs() > 1e-9
        {
            return Err(NftError::InvalidPulse(format!(
                "file grid [{}, {}] x {} does not match requested [{}, {}] x {}",
                g.t1(),
                g.t2(),
                g.n(),
                grid.t1(),
                grid.t2(),
                grid.n()
            )));
        }
        return Ok(loaded);
    }
    let q: Vec<C64> = (0..=grid.n()).map(|k| spec.eval(grid.node(k))).collect();
    let q_half: Vec<C64> = (0..grid.n()).map(|k| spec.eval(grid.midpoint(k))).collect();
    Signal::with_midpoints(*grid, q, Some(q_half))
}

/// Which momentum integrand `conserved` uses for `k = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MomentumForm {
    /// `(1/2j) integral q q_t^* dt`; real-valued and consistent with the
    /// trace-formula term `2 Im(lambda^2)` per soliton.
    #[default]
    Conjugated,
    /// `(1/2j) integral q q_t dt` as printed in the source material; generally
    /// not real, the real part is returned.
    Literal,
}

/// Conserved quantity `E^(k)` for `k = 1..=3` (energy, momentum, Hamiltonian).
pub fn conserved(signal: &Signal, k: usize) -> Result<f64> {
    conserved_with(signal, k, MomentumForm::Conjugated)
}

/// As [`conserved`] with an explicit momentum convention for `k = 2`.
pub fn conserved_with(signal: &Signal, k: usize, form: MomentumForm) -> Result<f64> {
    if !(1..=3).contains(&k) {
        return Err(NftError::Invalid(format!("conserved order {k} not in 1..=3")));
    }
    let q = &signal.q;
    let eps = signal.grid.eps();
    match k {
        1 => Ok(trapezoid(eps, q.iter().map(|v| v.norm_sqr()))),
        2 => {
            let dq = derivative(q, eps);
            let integrand = q.iter().zip(&dq).map(|(qk, dk)| match form {
                MomentumForm::Conjugated => qk * dk.conj(),
                MomentumForm::Literal => qk * dk,
            });
            let total: C64 = trapezoid_c(eps, integrand);
            Ok((total / (2.0 * J)).re)
        }
        _ => {
            let dq = derivative(q, eps);
            let integrand = q
                .iter()
                .zip(&dq)
                .map(|(qk, dk)| qk.norm_sqr() * qk.norm_sqr() - dk.norm_sqr());
            Ok(-0.25 * trapezoid(eps, integrand))
        }
    }
}

/// Second-order time derivative on the grid: centered in the interior,
/// one-sided at the ends.
fn derivative(q: &[C64], eps: f64) -> Vec<C64> {
    let n = q.len();
    let mut d = vec![C64::new(0.0, 0.0); n];
    let h2 = 2.0 * eps;
    d[0] = (-3.0 * q[0] + 4.0 * q[1] - q[2]) / h2;
    for k in 1..n - 1 {
        d[k] = (q[k + 1] - q[k - 1]) / h2;
    }
    d[n - 1] = (3.0 * q[n - 1] - 4.0 * q[n - 2] + q[n - 3]) / h2;
    d
}

fn trapezoid(eps: f64, values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let n = v.len();
    let inner: f64 = v[1..n - 1].iter().sum();
    eps * (0.5 * (v[0] + v[n - 1]) + inner)
}

fn trapezoid_c(eps: f64, values: impl Iterator<Item = C64>) -> C64 {
    let v: Vec<C64> = values.collect();
    let n = v.len();
    let inner: C64 = v[1..n - 1].iter().sum();
    eps * (0.5 * (v[0] + v[n - 1]) + inner)
}

/// Smallest symmetric window (about the wavetrain delay centroid) capturing at
/// least `fraction` of the pulse energy, found by bisection on the windowed
/// energy. Compactly supported families return their exact support. A zero
/// amplitude is not normalizable and yields the default unit window `(-1, 1)`.
pub fn auto_window(spec: &PulseSpec, fraction: f64) -> Result<(f64, f64)> {
    spec.validate()?;
    if !(0.0 < fraction && fraction < 1.0) {
        return Err(NftError::Invalid(format!(
            "energy fraction {fraction} outside (0, 1)"
        )));
    }
    if matches!(spec.family, PulseFamily::File { .. }) {
        return Err(NftError::InvalidPulse(
            "auto_window does not apply to file signals".into(),
        ));
    }
    let center = match &spec.family {
        PulseFamily::Wavetrain { elements, .. } => {
            elements.iter().map(|(_, d)| d).sum::<f64>() / elements.len() as f64
        }
        _ => 0.0,
    };
    if spec.amplitude.norm() == 0.0 {
        return Ok((-1.0, 1.0));
    }
    match &spec.family {
        PulseFamily::Rect => {
            let half = 1.0 / spec.scale;
            return Ok((-half, half));
        }
        PulseFamily::Wavetrain { base, elements } if **base == PulseFamily::Rect => {
            let half = 1.0 / spec.scale;
            let lo = elements.iter().map(|(_, d)| d - half).fold(f64::MAX, f64::min);
            let hi = elements.iter().map(|(_, d)| d + half).fold(f64::MIN, f64::max);
            let t = (hi - center).max(center - lo);
            return Ok((center - t, center + t));
        }
        _ => {}
    }

    let total = total_energy(spec)?;
    let target = fraction * total;
    let win = |half: f64| windowed_energy(spec, center, half);

    // grow to bracket, then bisect to the 1e-6 window tolerance
    let mut hi = 1.0;
    while win(hi) < target {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(NftError::InvalidPulse(
                "window search exceeded 1e9; pulse energy not concentrated".into(),
            ));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if win(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((center - hi, center + hi))
}

/// Total `L2` energy of the spec over the whole line: closed forms where the
/// family admits one, numeric quadrature with a growing range otherwise.
fn total_energy(spec: &PulseSpec) -> Result<f64> {
    let a2 = spec.amplitude.norm_sqr();
    let s = spec.scale;
    let closed = |family: &PulseFamily| -> Option<f64> {
        match family {
            PulseFamily::Sech => Some(2.0 / s),
            PulseFamily::Rect => Some(2.0 / s),
            PulseFamily::Sinc => Some(1.0 / s),
            PulseFamily::Gaussian => Some((std::f64::consts::PI / 2.0).sqrt() / s),
            PulseFamily::RaisedCosine { rolloff } => Some((1.0 - rolloff / 4.0) / s),
            _ => None,
        }
    };
    match &spec.family {
        PulseFamily::Wavetrain { base, elements } if **base == PulseFamily::Sinc => {
            // band-limited inner products: <sinc(s(t-u)), sinc(s(t-v))> = sinc(s(u-v))/s
            let mut e = 0.0;
            for (ai, ti) in elements {
                for (aj, tj) in elements {
                    e += (ai * aj.conj()).re * sinc(s * (ti - tj)) / s;
                }
            }
            Ok(a2 * e)
        }
        PulseFamily::Wavetrain { .. } => {
            // decaying bases: grow the range until the increment is negligible
            let center = 0.0;
            let mut half = 8.0 / s;
            let mut prev = windowed_energy(spec, center, half);
            loop {
                half *= 2.0;
                let cur = windowed_energy(spec, center, half);
                if (cur - prev).abs() <= 1e-10 * cur.max(1e-300) {
                    return Ok(cur);
                }
                prev = cur;
                if half > 1e9 {
                    return Err(NftError::InvalidPulse(
                        "wavetrain energy did not converge".into(),
                    ));
                }
            }
        }
        family => closed(family)
            .map(|e| a2 * e)
            .ok_or_else(|| NftError::InvalidPulse("no energy rule for family".into())),
    }
}

fn windowed_energy(spec: &PulseSpec, center: f64, half: f64) -> f64 {
    if half <= 0.0 {
        return 0.0;
    }
    let f = |t: f64| base_combined(&spec.family, spec.scale, t).norm_sqr();
    let a2 = spec.amplitude.norm_sqr();
    // pre-split so oscillatory families (sinc) are resolved before adapting
    let panels = (((2.0 * half) * 2.0 * spec.scale).ceil() as usize).clamp(8, 1 << 20);
    let lo = center - half;
    let width = 2.0 * half / panels as f64;
    let mut sum = 0.0f64;
    for i in 0..panels {
        let a = lo + i as f64 * width;
        sum += adaptive_simpson(&f, a, a + width, 1e-12 * (1.0 + sum.abs()), 24);
    }
    a2 * sum
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
                + rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fb, fm) = (f(a), f(b), f(m));
    let whole = simpson(a, fa, b, fb, fm);
    rec(f, a, fa, b, fb, m, fm, whole, tol, depth)
}
