//! Large-deviation statistics of the click count.
//!
//! The scaled cumulant generating function θ(s) is the leading eigenvalue
//! of the tilted generator. Its derivatives at `s = 0` give the click rate
//! `ℛ = −θ′(0)` and the variance rate `θ″(0)`, from which the clock error
//! `δτ(t) = √(θ″ t) / |θ′|` follows.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, LinalgError, C64};
use crate::lindblad::{self, LindbladModel, ModelError, TwoLevelParams};

#[derive(Debug, Error)]
pub enum LdpError {
    #[error("leading eigenvalue {0} of the tilted generator is not real")]
    SpectralAnomaly(C64),
    #[error("no cube-root branch gives a real value; candidates {0:?}")]
    Branch([C64; 3]),
    #[error("rate from theta' ({from_theta}) disagrees with steady-state rate ({from_state})")]
    Inconsistent { from_theta: f64, from_state: f64 },
    #[error("model has no counted channel")]
    NoCountedChannel,
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Imaginary part allowed on the leading tilted eigenvalue (scaled by `max(1, ‖ℒ_s‖_F)`).
pub const IMAG_TOL: f64 = 1e-10;
/// Imaginary residue allowed on a closed-form cube-root branch.
pub const BRANCH_TOL: f64 = 1e-9;

/// θ(s): real part of the leading eigenvalue of the tilted generator.
pub fn theta(model: &LindbladModel, s: f64) -> Result<f64, LdpError> {
    let ls = lindblad::biased_liouvillian(model, s);
    let pair = linalg::max_real_eigenpair(&ls)?;
    if pair.value.im.abs() > IMAG_TOL * ls.frobenius_norm().max(1.0) {
        return Err(LdpError::SpectralAnomaly(pair.value));
    }
    Ok(pair.value.re)
}

/// Closed-form θ(s) for the driven two-level atom with ideal detection,
/// `θ = ½(−γ + e^{−4s} 𝒞 / 3^{2/3} + e^{4s} 𝒜 / (3^{1/3} 𝒞))` with
/// `𝒜 = γ² − 16Ω²`, `ℬ = 72γΩ² e^{11s}`, `𝒞 = ∛(√(ℬ² − 3e^{24s}𝒜³) + ℬ)`.
///
/// All three cube-root branches of 𝒞 are tried and the largest real
/// candidate with negligible imaginary residue is returned.
pub fn theta_closed_form_tla(omega: f64, gamma: f64, s: f64) -> Result<f64, LdpError> {
    if !(omega > 0.0 && gamma > 0.0) {
        return Err(LdpError::Domain(format!(
            "closed form needs omega > 0 and gamma > 0, got ({omega}, {gamma})"
        )));
    }
    let a = gamma * gamma - 16.0 * omega * omega;
    let b = 72.0 * gamma * omega * omega * (11.0 * s).exp();
    let radicand = Complex64::new(b * b - 3.0 * (24.0 * s).exp() * a * a * a, 0.0);
    let c0 = (radicand.sqrt() + b).powf(1.0 / 3.0);
    let unity = |k: f64| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k / 3.0);
    let candidates: [C64; 3] = [0.0, 1.0, 2.0].map(|k| {
        let cc = c0 * unity(k);
        0.5 * (-gamma
            + (-4.0 * s).exp() / 3f64.powf(2.0 / 3.0) * cc
            + (4.0 * s).exp() / 3f64.cbrt() * a / cc)
    });
    candidates
        .iter()
        .filter(|z| z.im.abs() <= BRANCH_TOL * z.re.abs().max(1.0))
        .map(|z| z.re)
        .max_by(f64::total_cmp)
        .ok_or(LdpError::Branch(candidates))
}

#[derive(Debug, Clone, Copy)]
pub struct CumulantOptions {
    /// Finite-difference step h.
    pub step: f64,
    /// Apply one Richardson extrapolation between h and h/2.
    pub richardson: bool,
    /// Allowed relative disagreement between −θ′(0) and the steady-state rate.
    pub rate_rel_tol: f64,
    /// Absolute floor for that check, relative to `‖ℒ‖_F`; only matters
    /// when the rate itself is at the eigensolver noise level.
    pub rate_abs_floor: f64,
}

impl Default for CumulantOptions {
    fn default() -> Self {
        Self {
            step: 1e-3,
            richardson: true,
            rate_rel_tol: 1e-6,
            rate_abs_floor: 1e-10,
        }
    }
}

/// First two scaled cumulants of the click count at one parameter point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CumulantEstimates {
    pub theta_at_zero: f64,
    /// ℛ = −θ′(0), clicks per unit time.
    pub rate: f64,
    /// θ″(0), clicks² per unit time.
    pub variance_rate: f64,
    /// θ″/ℛ
    pub fano: f64,
    pub fd_step: f64,
    /// `Tr{Σ c†c ρ_ss}` over counted channels.
    pub rate_steady_state: f64,
}

impl CumulantEstimates {
    pub fn delta_tau(&self, t: f64) -> f64 {
        (self.variance_rate * t).sqrt() / self.rate.abs()
    }

    pub fn n_statistics(&self, t: f64) -> NStatistics {
        NStatistics {
            mean: self.rate * t,
            std: (self.variance_rate * t).max(0.0).sqrt(),
        }
    }
}

/// Mean and standard deviation of the click count N(t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NStatistics {
    pub mean: f64,
    pub std: f64,
}

pub fn counting_cumulants(model: &LindbladModel) -> Result<CumulantEstimates, LdpError> {
    counting_cumulants_with(model, &CumulantOptions::default())
}

pub fn counting_cumulants_with(
    model: &LindbladModel,
    opts: &CumulantOptions,
) -> Result<CumulantEstimates, LdpError> {
    if !model.has_counted_channel() {
        return Err(LdpError::NoCountedChannel);
    }
    let h = opts.step;
    if !(h > 0.0 && h.is_finite()) {
        return Err(LdpError::Domain(format!(
            "finite-difference step must be > 0, got {h}"
        )));
    }
    let th = |s: f64| theta(model, s);
    let t0 = th(0.0)?;
    let (tp, tm) = (th(h)?, th(-h)?);
    let d1 = |p: f64, m: f64, h: f64| (p - m) / (2.0 * h);
    let d2 = |p: f64, m: f64, h: f64| (p - 2.0 * t0 + m) / (h * h);
    let (mut first, mut second) = (d1(tp, tm, h), d2(tp, tm, h));
    if opts.richardson {
        let hh = 0.5 * h;
        let (hp, hm) = (th(hh)?, th(-hh)?);
        first = (4.0 * d1(hp, hm, hh) - first) / 3.0;
        second = (4.0 * d2(hp, hm, hh) - second) / 3.0;
    }
    let rate = -first;

    let ss = lindblad::steady_state(model)?;
    let rate_ss = lindblad::counted_click_rate(model, &ss);
    let floor = opts.rate_abs_floor * lindblad::liouvillian(model).frobenius_norm();
    if (rate - rate_ss).abs() > (opts.rate_rel_tol * rate_ss.abs()).max(floor) {
        return Err(LdpError::Inconsistent {
            from_theta: rate,
            from_state: rate_ss,
        });
    }
    Ok(CumulantEstimates {
        theta_at_zero: t0,
        rate,
        variance_rate: second,
        fano: second / rate,
        fd_step: h,
        rate_steady_state: rate_ss,
    })
}

/// RMS error of the clock readout after time `t`.
pub fn delta_tau(model: &LindbladModel, t: f64) -> Result<f64, LdpError> {
    if !(t > 0.0) {
        return Err(LdpError::Domain(format!("duration must be > 0, got {t}")));
    }
    let c = counting_cumulants(model)?;
    check_clicking(&c)?;
    Ok(c.delta_tau(t))
}

/// δτ needs a non-zero click rate; dark models never tick.
fn check_clicking(c: &CumulantEstimates) -> Result<(), LdpError> {
    if c.rate > 0.0 && c.rate_steady_state > 0.0 {
        Ok(())
    } else {
        Err(LdpError::Domain(format!(
            "click rate {} vanishes; delta_tau is undefined",
            c.rate_steady_state
        )))
    }
}

/// `N(t) ≈ ℛt ± √(θ″t)`; a zero duration yields `(0, 0)`.
pub fn n_statistics(model: &LindbladModel, t: f64) -> Result<NStatistics, LdpError> {
    if !(t >= 0.0) {
        return Err(LdpError::Domain(format!("duration must be >= 0, got {t}")));
    }
    Ok(counting_cumulants(model)?.n_statistics(t))
}

/// Third and fourth scaled cumulants by raw central differences of θ.
/// Not extrapolated; meant for exploration only.
pub fn raw_higher_cumulants(model: &LindbladModel, h: f64) -> Result<(f64, f64), LdpError> {
    let th = |s: f64| theta(model, s);
    let (m2, m1, z, p1, p2) = (th(-2.0 * h)?, th(-h)?, th(0.0)?, th(h)?, th(2.0 * h)?);
    // κₙ = (−1)ⁿ θ⁽ⁿ⁾(0)
    let third = -(p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h.powi(3));
    let fourth = (p2 - 4.0 * p1 + 6.0 * z - 4.0 * m1 + m2) / h.powi(4);
    Ok((third, fourth))
}

/// One row of a (Ω, γ) sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub omega: f64,
    pub gamma: f64,
    pub rate: f64,
    pub theta2: f64,
    pub delta_tau: f64,
    /// Failure message when the spectral analysis of this point failed.
    pub error: Option<String>,
}

fn sweep_point(omega: f64, gamma: f64, eta: f64, t: f64) -> SweepPoint {
    let result = TwoLevelParams::new(omega, gamma, eta)
        .and_then(|p| lindblad::build_two_level_model(&p))
        .map_err(LdpError::from)
        .and_then(|m| counting_cumulants(&m))
        .and_then(|c| check_clicking(&c).map(|_| c));
    match result {
        Ok(c) => SweepPoint {
            omega,
            gamma,
            rate: c.rate,
            theta2: c.variance_rate,
            delta_tau: c.delta_tau(t),
            error: None,
        },
        Err(e) => SweepPoint {
            omega,
            gamma,
            rate: f64::NAN,
            theta2: f64::NAN,
            delta_tau: f64::NAN,
            error: Some(e.to_string()),
        },
    }
}

/// δτ over the grid `omegas × gammas` for the two-level atom, in row-major
/// (omega-major) order. Points are evaluated in parallel; failures are
/// recorded per point and do not stop the sweep.
pub fn sweep_delta_tau(omegas: &[f64], gammas: &[f64], eta: f64, t: f64) -> Vec<SweepPoint> {
    let grid: Vec<(f64, f64)> = omegas
        .iter()
        .flat_map(|&o| gammas.iter().map(move |&g| (o, g)))
        .collect();
    grid.par_iter()
        .map(|&(o, g)| sweep_point(o, g, eta, t))
        .collect()
}

/// Location of the smallest δτ along γ at fixed Ω.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GammaMinimum {
    pub omega: f64,
    pub gamma_grid: f64,
    /// Parabolic refinement through the grid minimum and its neighbours.
    pub gamma_refined: f64,
    pub delta_tau: f64,
    pub on_boundary: bool,
}

/// Vertex of the parabola through three points; `None` if degenerate or
/// not a minimum.
pub fn parabolic_vertex(p: [(f64, f64); 3]) -> Option<f64> {
    let [(x0, y0), (x1, y1), (x2, y2)] = p;
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    if den == 0.0 || !num.is_finite() {
        return None;
    }
    // den > 0 ⇔ the middle point lies below the chord ⇒ convex bracket
    let a = ((y2 - y1) / (x2 - x1) - (y1 - y0) / (x1 - x0)) / (x2 - x0);
    if a <= 0.0 {
        return None;
    }
    Some(x1 - 0.5 * num / den)
}

/// Grid minimum of δτ along one row of a sweep plus parabolic refinement.
pub fn minimum_along_gamma(row: &[SweepPoint]) -> Option<GammaMinimum> {
    let (i, best) = row
        .iter()
        .enumerate()
        .filter(|(_, p)| p.delta_tau.is_finite())
        .min_by(|a, b| a.1.delta_tau.total_cmp(&b.1.delta_tau))?;
    let on_boundary = i == 0 || i + 1 == row.len();
    let refined = if on_boundary {
        None
    } else {
        let pts = [&row[i - 1], &row[i], &row[i + 1]].map(|p| (p.gamma, p.delta_tau));
        parabolic_vertex(pts).filter(|g| *g >= row[i - 1].gamma && *g <= row[i + 1].gamma)
    };
    Some(GammaMinimum {
        omega: best.omega,
        gamma_grid: best.gamma,
        gamma_refined: refined.unwrap_or(best.gamma),
        delta_tau: best.delta_tau,
        on_boundary,
    })
}

/// Per-Ω minima of a sweep laid out by [`sweep_delta_tau`].
pub fn minimum_line(points: &[SweepPoint], n_gamma: usize) -> Vec<GammaMinimum> {
    points
        .chunks(n_gamma.max(1))
        .filter_map(minimum_along_gamma)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::build_two_level_model;

    fn tla(omega: f64, gamma: f64) -> LindbladModel {
        build_two_level_model(&TwoLevelParams::ideal(omega, gamma).unwrap()).unwrap()
    }

    /// θ′(0) and θ″(0) by implicit differentiation of the characteristic
    /// cubic of the tilted two-level generator,
    /// `2λ³ + 3γλ² + (γ² + 8Ω²)λ + 4γΩ²(1 − e^{−s}) = 0`.
    fn analytic_derivatives(omega: f64, gamma: f64) -> (f64, f64) {
        let o2 = omega * omega;
        let d = gamma * gamma + 8.0 * o2;
        let first = -4.0 * gamma * o2 / d;
        let second = (4.0 * gamma * o2 - 6.0 * gamma * first * first) / d;
        (first, second)
    }

    #[test]
    fn normalization_at_zero() {
        for (o, g) in [(3.0, 7.5), (0.5, 20.0), (6.0, 1.0), (0.0, 1.0)] {
            assert!(theta(&tla(o, g), 0.0).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn closed_form_agrees_with_spectrum() {
        let m = tla(3.0, 7.5);
        for s in [-0.1, 0.1] {
            let a = theta(&m, s).unwrap();
            let b = theta_closed_form_tla(3.0, 7.5, s).unwrap();
            assert!((a - b).abs() <= 1e-8 * a.abs(), "s={s}: {a} vs {b}");
        }
    }

    #[test]
    fn closed_form_normalization() {
        assert!(theta_closed_form_tla(3.0, 7.5, 0.0).unwrap().abs() < 1e-9);
        // 𝒜 = 256 − 16 > 0
        assert!(theta_closed_form_tla(1.0, 16.0, 0.0).unwrap().abs() < 1e-9);
        // 𝒜 = 0
        assert!(theta_closed_form_tla(1.0, 4.0, 0.0).unwrap().abs() < 1e-9);
    }

    #[test]
    fn closed_form_domain() {
        assert!(matches!(
            theta_closed_form_tla(0.0, 1.0, 0.0),
            Err(LdpError::Domain(_))
        ));
        assert!(matches!(
            theta_closed_form_tla(1.0, -1.0, 0.0),
            Err(LdpError::Domain(_))
        ));
    }

    #[test]
    fn theta_is_decreasing_and_convex() {
        let m = tla(3.0, 7.5);
        let grid: Vec<f64> = (0..=20).map(|k| -0.5 + 0.05 * k as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&s| theta(&m, s).unwrap()).collect();
        for w in vals.windows(2) {
            assert!(w[1] < w[0]);
        }
        for w in vals.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
        }
    }

    #[test]
    fn cumulants_match_analytic_oracle() {
        for (o, g) in [(3.0, 7.5), (1.0, 4.0), (0.5, 12.0), (6.0, 1.0)] {
            let c = counting_cumulants(&tla(o, g)).unwrap();
            let (d1, d2) = analytic_derivatives(o, g);
            assert!((c.rate + d1).abs() <= 1e-9 * d1.abs(), "rate at ({o},{g})");
            assert!(
                (c.variance_rate - d2).abs() <= 1e-6 * d2.abs(),
                "theta2 at ({o},{g})"
            );
        }
    }

    #[test]
    fn reference_point() {
        let c = counting_cumulants(&tla(3.0, 7.5)).unwrap();
        assert!((c.rate - 2.105263157894737).abs() < 1e-9);
        assert!((c.rate - 2.10526).abs() < 1e-5);
        assert!(c.fano < 1.0);
        assert!((c.variance_rate - 0.550128785540).abs() < 1e-6 * 0.55);
        assert!(c.theta_at_zero.abs() < 1e-9);
        assert!((c.rate - c.rate_steady_state).abs() < 1e-6 * c.rate);
    }

    #[test]
    fn vanishing_drive_gives_vanishing_rate() {
        let c = counting_cumulants(&tla(1e-6, 1.0)).unwrap();
        assert!(c.rate_steady_state < 1e-10);
        assert!(c.rate.abs() < 1e-9);
    }

    #[test]
    fn no_counted_channel_rejected() {
        let m = LindbladModel::new(
            crate::linalg::ComplexMatrix::zeros(2, 2),
            vec![lindblad::JumpChannel::uncounted(lindblad::sigma_minus())],
        )
        .unwrap();
        assert!(matches!(
            counting_cumulants(&m),
            Err(LdpError::NoCountedChannel)
        ));
    }

    #[test]
    fn delta_tau_reference_and_scaling() {
        let m = tla(3.0, 7.5);
        let dt = delta_tau(&m, 1000.0).unwrap();
        let (d1, d2) = analytic_derivatives(3.0, 7.5);
        let want = (d2 * 1000.0).sqrt() / d1.abs();
        assert!((dt - want).abs() < 1e-6 * want);
        assert!((dt - 10.0).abs() <= 1.5);
        let c = counting_cumulants(&m).unwrap();
        assert!((c.delta_tau(4000.0) - 2.0 * c.delta_tau(1000.0)).abs() < 1e-12 * dt);
        assert!(delta_tau(&m, 0.0).is_err());
    }

    #[test]
    fn count_statistics() {
        let m = tla(3.0, 7.5);
        let n = n_statistics(&m, 1000.0).unwrap();
        assert!((n.mean - 2105.263157894737).abs() < 1e-5);
        // std = √(θ″ t) from the analytic oracle
        let (_, d2) = analytic_derivatives(3.0, 7.5);
        assert!((n.std - (d2 * 1000.0).sqrt()).abs() < 1e-6);
        assert!((n.std - 23.4548).abs() < 1e-3);
        assert_eq!(
            n_statistics(&m, 0.0).unwrap(),
            NStatistics {
                mean: 0.0,
                std: 0.0
            }
        );
    }

    #[test]
    fn efficiency_scales_rate_only() {
        let full = counting_cumulants(&tla(3.0, 7.5)).unwrap();
        let half = build_two_level_model(&TwoLevelParams::new(3.0, 7.5, 0.5).unwrap()).unwrap();
        let c = counting_cumulants(&half).unwrap();
        assert!((c.rate - 0.5 * full.rate).abs() < 1e-9);
    }

    #[test]
    fn higher_cumulants_are_finite() {
        let (k3, k4) = raw_higher_cumulants(&tla(3.0, 7.5), 1e-2).unwrap();
        assert!(k3.is_finite() && k4.is_finite());
    }

    #[test]
    fn parabola_vertex() {
        let f = |x: f64| 2.0 * (x - 1.3).powi(2) + 0.5;
        let v = parabolic_vertex([(1.0, f(1.0)), (1.5, f(1.5)), (2.5, f(2.5))]).unwrap();
        assert!((v - 1.3).abs() < 1e-12);
        assert!(parabolic_vertex([(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).is_none());
    }

    #[test]
    fn single_point_sweep() {
        let rows = sweep_delta_tau(&[3.0], &[7.5], 1.0, 1000.0);
        assert_eq!(rows.len(), 1);
        assert!(rows[0].error.is_none());
        let bad = sweep_delta_tau(&[3.0], &[-1.0], 1.0, 1000.0);
        assert!(bad[0].error.is_some());
    }

    #[test]
    fn dark_point_is_flagged_not_nan() {
        assert!(delta_tau(&tla(0.0, 1.0), 1000.0).is_err());
        let pts = sweep_delta_tau(&[0.0, 3.0], &[7.5], 1.0, 1000.0);
        assert!(pts[0].error.is_some());
        assert!(pts[1].error.is_none());
    }
}
