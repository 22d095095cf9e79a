//! Waiting-time distribution of the driven two-level atom.
//!
//! `w(t) = γΩ² e^{−γt/2} K(𝒜, t)²` with `𝒜 = γ² − 16Ω²` and
//! `K = sinh(√𝒜 t/4)/(√𝒜/4)`, continued to `sin` for `𝒜 < 0` and to `t`
//! at `𝒜 = 0`. [`WtdProfile`] tabulates the CDF by adaptive Simpson
//! quadrature for sampling and goodness-of-fit tests.

use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::format::fmt12;
use crate::ldp::{self, LdpError};
use crate::lindblad::LindbladModel;
use crate::qjmc::{InitialState, QjmcError, Simulator};

/// Quadrature absolute tolerance for the whole profile.
pub const QUAD_TOL: f64 = 1e-10;
/// CDF level defining the truncation time.
pub const CDF_CUT: f64 = 1.0 - 1e-10;
/// Normalization error above which the profile is rejected.
pub const NORM_FAIL: f64 = 1e-4;
/// Kolmogorov constant at α = 0.01.
pub const KS_ALPHA_001: f64 = 1.63;

const SERIES_LIMIT: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum WtdError {
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("waiting-time density integrates to {0}")]
    Normalization(f64),
    #[error("KS distance {ks} exceeds critical value {critical} (n = {n})")]
    Inconsistent { ks: f64, critical: f64, n: usize },
    #[error(transparent)]
    Qjmc(#[from] QjmcError),
    #[error(transparent)]
    Ldp(#[from] LdpError),
}

fn check_params(omega: f64, gamma: f64) -> Result<(), WtdError> {
    if !(omega > 0.0 && omega.is_finite() && gamma > 0.0 && gamma.is_finite()) {
        return Err(WtdError::Domain(format!(
            "need omega > 0 and gamma > 0, got omega = {omega}, gamma = {gamma}"
        )));
    }
    Ok(())
}

/// `𝒜 = γ² − 16Ω²`.
pub fn discriminant(omega: f64, gamma: f64) -> f64 {
    gamma * gamma - 16.0 * omega * omega
}

/// `e^{−γt/4} K(𝒜, t)`, evaluated without overflow for large `t`.
fn damped_k(a_disc: f64, gamma: f64, t: f64) -> f64 {
    let env = (-0.25 * gamma * t).exp();
    if a_disc.abs() * t * t < SERIES_LIMIT {
        let z2 = a_disc * t * t / 16.0;
        return env * t * (1.0 + z2 / 6.0 + z2 * z2 / 120.0);
    }
    if a_disc > 0.0 {
        let a = 0.25 * a_disc.sqrt();
        ((a - 0.25 * gamma) * t).exp() * -(-2.0 * a * t).exp_m1() / (2.0 * a)
    } else {
        let b = 0.25 * (-a_disc).sqrt();
        env * (b * t).sin() / b
    }
}

/// Waiting-time density `w(Ω, γ, t)`.
pub fn wtd_pdf(omega: f64, gamma: f64, t: f64) -> Result<f64, WtdError> {
    check_params(omega, gamma)?;
    if !(t >= 0.0) {
        return Err(WtdError::Domain(format!("t must be >= 0, got {t}")));
    }
    Ok(pdf_unchecked(omega, gamma, t))
}

fn pdf_unchecked(omega: f64, gamma: f64, t: f64) -> f64 {
    let k = damped_k(discriminant(omega, gamma), gamma, t);
    gamma * omega * omega * k * k
}

/// Upper bound on `∫_T^∞ w dt`.
fn tail_bound(omega: f64, gamma: f64, t: f64) -> f64 {
    let x = discriminant(omega, gamma);
    let c = gamma * omega * omega;
    let kappa = if x > 0.0 {
        0.5 * (gamma - x.sqrt())
    } else {
        0.5 * gamma
    };
    let e = (-kappa * t).exp();
    // K² ≤ t² e^{√x⁺ t/2}
    let poly = c * e * (t * t / kappa + 2.0 * t / (kappa * kappa) + 2.0 / kappa.powi(3));
    // K² ≤ 1/(4a²) e^{√x t/2} or ≤ 1/b²
    let coef = 16.0 / x.abs();
    if x != 0.0 {
        poly.min(c * coef * e / kappa)
    } else {
        poly
    }
}

fn tail_end(omega: f64, gamma: f64, level: f64) -> f64 {
    let mut hi = 1.0 / gamma;
    while tail_bound(omega, gamma, hi) > level {
        hi *= 2.0;
    }
    let mut lo = 0.5 * hi;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if tail_bound(omega, gamma, mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

type V3 = [f64; 3];

fn moments_integrand(omega: f64, gamma: f64, t: f64) -> V3 {
    let w = pdf_unchecked(omega, gamma, t);
    [w, t * w, t * t * w]
}

fn simpson(h: f64, fa: V3, fm: V3, fb: V3) -> V3 {
    std::array::from_fn(|k| h / 6.0 * (fa[k] + 4.0 * fm[k] + fb[k]))
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson(
    f: &impl Fn(f64) -> V3,
    a: f64,
    b: f64,
    fa: V3,
    fm: V3,
    fb: V3,
    whole: V3,
    eps: V3,
    depth: u32,
) -> V3 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(m - a, fa, flm, fm);
    let right = simpson(b - m, fm, frm, fb);
    let diff: V3 = std::array::from_fn(|k| left[k] + right[k] - whole[k]);
    if depth == 0 || (0..3).all(|k| diff[k].abs() <= 15.0 * eps[k]) {
        return std::array::from_fn(|k| left[k] + right[k] + diff[k] / 15.0);
    }
    let half: V3 = std::array::from_fn(|k| 0.5 * eps[k]);
    let l = adaptive_simpson(f, a, m, fa, flm, fm, left, half, depth - 1);
    let r = adaptive_simpson(f, m, b, fm, frm, fb, right, half, depth - 1);
    std::array::from_fn(|k| l[k] + r[k])
}

/// Tabulated CDF and moments of `w` for one parameter point.
#[derive(Debug, Clone)]
pub struct WtdProfile {
    pub omega: f64,
    pub gamma: f64,
    /// Grid spacing of the CDF table.
    pub step: f64,
    /// First grid time with CDF ≥ 1 − 1e-10.
    pub t_cut: f64,
    /// `∫₀^∞ w dt` before renormalization of the table.
    pub normalization: f64,
    /// `∫ t w dt`.
    pub mean: f64,
    /// `∫ t² w dt − mean²`.
    pub variance: f64,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
}

impl WtdProfile {
    pub fn build(omega: f64, gamma: f64) -> Result<Self, WtdError> {
        check_params(omega, gamma)?;
        let x = discriminant(omega, gamma);
        let nu = 0.5 * gamma + 0.5 * x.abs().sqrt();
        let step = 0.025 / nu;
        let t_end = tail_end(omega, gamma, 1e-13);
        let n_cells = (t_end / step).ceil() as usize;
        let f = |t: f64| moments_integrand(omega, gamma, t);
        let eps_w = QUAD_TOL / n_cells as f64;
        let eps = [
            eps_w,
            eps_w * t_end.max(1.0),
            eps_w * t_end.max(1.0).powi(2),
        ];

        let mut cdf = Vec::with_capacity(n_cells + 1);
        let mut pdf = Vec::with_capacity(n_cells + 1);
        let mut acc = [0.0; 3];
        let mut fa = f(0.0);
        cdf.push(0.0);
        pdf.push(fa[0]);
        for i in 0..n_cells {
            let a = i as f64 * step;
            let b = (i + 1) as f64 * step;
            let fm = f(0.5 * (a + b));
            let fb = f(b);
            let whole = simpson(step, fa, fm, fb);
            let cell = adaptive_simpson(&f, a, b, fa, fm, fb, whole, eps, 40);
            for k in 0..3 {
                acc[k] += cell[k].max(0.0);
            }
            cdf.push(acc[0]);
            pdf.push(fb[0]);
            fa = fb;
        }

        let norm = acc[0];
        if !((norm - 1.0).abs() <= NORM_FAIL) {
            return Err(WtdError::Normalization(norm));
        }
        for (c, p) in cdf.iter_mut().zip(pdf.iter_mut()) {
            *c /= norm;
            *p /= norm;
        }
        let cut = cdf
            .iter()
            .position(|&c| c >= CDF_CUT)
            .unwrap_or(cdf.len() - 1);
        cdf.truncate(cut + 1);
        pdf.truncate(cut + 1);
        let mean = acc[1];
        Ok(Self {
            omega,
            gamma,
            step,
            t_cut: cut as f64 * step,
            normalization: norm,
            mean,
            variance: acc[2] - mean * mean,
            cdf,
            pdf,
        })
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }

    /// `(t, CDF(t))` table.
    pub fn cdf_grid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.cdf
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as f64 * self.step, c))
    }

    /// Cubic Hermite interpolant of the CDF, clamped to the cell's range.
    pub fn cdf(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return 0.0;
        }
        if t >= self.t_cut {
            return 1.0;
        }
        let u = t / self.step;
        let i = (u.floor() as usize).min(self.cdf.len() - 2);
        self.hermite(i, u - i as f64)
    }

    fn hermite(&self, i: usize, s: f64) -> f64 {
        let (f0, f1) = (self.cdf[i], self.cdf[i + 1]);
        let (d0, d1) = (self.pdf[i] * self.step, self.pdf[i + 1] * self.step);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * f0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * f1
            + (s3 - s2) * d1;
        v.clamp(f0, f1)
    }

    /// Inverse CDF: table bisection then bisection on the interpolant.
    pub fn quantile(&self, u: f64) -> f64 {
        if !(u > 0.0) {
            return 0.0;
        }
        let last = self.cdf.len() - 1;
        if u >= self.cdf[last] {
            return self.t_cut;
        }
        let j = self.cdf.partition_point(|&c| c < u).max(1);
        let i = j - 1;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..52 {
            let mid = 0.5 * (lo + hi);
            if self.hermite(i, mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (i as f64 + 0.5 * (lo + hi)) * self.step
    }

    pub fn sample_waiting_time<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// `n` draws from stream 0 of `seed`.
    pub fn sample_waiting_times(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::qjmc::trajectory_rng(seed, 0);
        (0..n).map(|_| self.sample_waiting_time(&mut rng)).collect()
    }
}

/// Two-sided KS statistic of ascending `sorted` against the profile CDF.
pub fn ks_distance(sorted: &[f64], profile: &WtdProfile) -> Result<f64, WtdError> {
    if sorted.is_empty() {
        return Err(WtdError::Domain("empty sample".into()));
    }
    if sorted.windows(2).any(|w| w[1] < w[0]) {
        return Err(WtdError::Domain("samples must be sorted ascending".into()));
    }
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = profile.cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max))
}

/// KS critical distance `1.63/√n` at α = 0.01.
pub fn ks_critical(n: usize) -> f64 {
    KS_ALPHA_001 / (n as f64).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct KsReport {
    pub n: usize,
    pub ks: f64,
    pub critical: f64,
    pub mean_interval: f64,
    /// `1/mean_interval`.
    pub rate_empirical: f64,
    /// ℛ from the counting cumulants.
    pub rate_expected: f64,
    /// Delta-method standard error of `rate_empirical`.
    pub rate_se: f64,
}

impl KsReport {
    pub fn rate_consistent(&self) -> bool {
        (self.rate_empirical - self.rate_expected).abs() <= 3.0 * self.rate_se
    }
}

/// Inter-click intervals from QJMC runs started in basis state 0, split
/// over parallel trajectories, in trajectory order.
pub fn simulated_intervals(
    model: &LindbladModel,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>, WtdError> {
    const CHUNKS: usize = 16;
    let sim = Simulator::new(model)?;
    let base = n_samples / CHUNKS;
    let initial = InitialState::default();
    let parts: Vec<Vec<f64>> = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let n = base + usize::from(c < n_samples % CHUNKS);
            if n == 0 {
                return Ok(Vec::new());
            }
            let tr = sim.run_clicks(n, f64::INFINITY, seed, c as u64, &initial)?;
            Ok(tr.intervals())
        })
        .collect::<Result<_, QjmcError>>()?;
    Ok(parts.concat())
}

/// Compares QJMC inter-click intervals with the analytic WTD; fails with
/// [`WtdError::Inconsistent`] when the KS distance exceeds `1.63/√n`.
pub fn renewal_crosscheck(
    model: &LindbladModel,
    profile: &WtdProfile,
    n_samples: usize,
    seed: u64,
) -> Result<KsReport, WtdError> {
    let report = renewal_report(model, profile, n_samples, seed)?;
    if report.ks > report.critical {
        return Err(WtdError::Inconsistent {
            ks: report.ks,
            critical: report.critical,
            n: report.n,
        });
    }
    Ok(report)
}

/// The measurements behind [`renewal_crosscheck`] without the verdict.
pub fn renewal_report(
    model: &LindbladModel,
    profile: &WtdProfile,
    n_samples: usize,
    seed: u64,
) -> Result<KsReport, WtdError> {
    if model.dim() != 2 || model.channels().iter().any(|c| !c.counted) {
        return Err(WtdError::Domain(
            "renewal cross-check needs a two-level model with all channels counted".into(),
        ));
    }
    if n_samples < 2 {
        return Err(WtdError::Domain("need at least two samples".into()));
    }
    let mut intervals = simulated_intervals(model, n_samples, seed)?;
    let n = intervals.len();
    let mean = intervals.iter().sum::<f64>() / n as f64;
    let var = intervals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    intervals.sort_by(f64::total_cmp);
    let ks = ks_distance(&intervals, profile)?;
    let rate_expected = ldp::counting_cumulants(model)?.rate;
    Ok(KsReport {
        n,
        ks,
        critical: ks_critical(n),
        mean_interval: mean,
        rate_empirical: 1.0 / mean,
        rate_expected,
        rate_se: (var / n as f64).sqrt() / (mean * mean),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub t: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeakReport {
    pub omega: f64,
    pub gamma: f64,
    pub threshold: f64,
    pub peaks: Vec<Peak>,
}

/// Strict local maxima of `w` on `[0, t_cut]` with density ≥ `threshold`.
pub fn peak_census(omega: f64, gamma: f64, threshold: f64) -> Result<PeakReport, WtdError> {
    let profile = WtdProfile::build(omega, gamma)?;
    peak_census_on(&profile, threshold)
}

pub fn peak_census_on(profile: &WtdProfile, threshold: f64) -> Result<PeakReport, WtdError> {
    if !(threshold > 0.0) {
        return Err(WtdError::Domain(format!(
            "threshold must be > 0, got {threshold}"
        )));
    }
    let (omega, gamma) = (profile.omega, profile.gamma);
    let x = discriminant(omega, gamma);
    let mut h: f64 = 1e-3;
    if x < 0.0 {
        h = h.min(4.0 * std::f64::consts::PI / (-x).sqrt() / 40.0);
    }
    let n = (profile.t_cut / h).ceil() as usize;
    let w = |t: f64| pdf_unchecked(omega, gamma, t);
    let vals: Vec<f64> = (0..=n).map(|j| w(j as f64 * h)).collect();
    let mut peaks = Vec::new();
    for j in 1..n {
        let (l, c, r) = (vals[j - 1], vals[j], vals[j + 1]);
        // a plateau is attributed to its left end only
        if c > l && c >= r {
            let (t, wt) = golden_max(&w, (j - 1) as f64 * h, (j + 1) as f64 * h);
            if wt >= threshold {
                peaks.push(Peak { t, w: wt });
            }
        }
    }
    Ok(PeakReport {
        omega,
        gamma,
        threshold,
        peaks,
    })
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-12 * b.abs().max(1.0) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

/// `w` at `n_points` uniformly spaced times on `[0, t_max]`.
pub fn wtd_grid(
    omega: f64,
    gamma: f64,
    t_max: f64,
    n_points: usize,
) -> Result<Vec<(f64, f64)>, WtdError> {
    check_params(omega, gamma)?;
    if !(t_max > 0.0) || n_points < 2 {
        return Err(WtdError::Domain(
            "need t_max > 0 and at least two points".into(),
        ));
    }
    let dt = t_max / (n_points - 1) as f64;
    Ok((0..n_points)
        .map(|i| {
            let t = if i + 1 == n_points {
                t_max
            } else {
                i as f64 * dt
            };
            (t, pdf_unchecked(omega, gamma, t))
        })
        .collect())
}

/// Writes `t,w` rows.
pub fn write_wtd_csv<W: Write>(mut out: W, rows: &[(f64, f64)]) -> io::Result<()> {
    writeln!(out, "t,w")?;
    for (t, w) in rows {
        writeln!(out, "{},{}", fmt12(*t), fmt12(*w))?;
    }
    Ok(())
}
