//! Quantum-jump Monte Carlo: click records, clock readout, ensembles.
//!
//! Trajectories use the norm-tracking (waiting-time) unravelling. From a
//! normalized state the unnormalized no-jump state `e^{−iH_eff τ}|ψ⟩` is
//! propagated until its squared norm drops below a uniform draw `r`; the
//! crossing is located by coarse stepping and then bisection, a channel is
//! chosen with weight `‖c_k ψ‖²`, and the state jumps. Only counted
//! channels leave a click in the record.
//!
//! Randomness: trajectory `i` of a run seeded with `seed` draws from
//! ChaCha20 keyed by `seed` on stream `i`, so trajectories are independent
//! and individually reproducible regardless of execution order.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::format::fmt12;
use crate::ldp::{self, LdpError};
use crate::linalg::{self, ComplexMatrix, LinalgError, C64};
use crate::lindblad::{self, LindbladModel};

#[derive(Debug, Error)]
pub enum QjmcError {
    #[error("no-jump propagation increased the norm to {norm} at t = {t}")]
    NormIncrease { t: f64, norm: f64 },
    #[error("jump selected at t = {t} but every channel has zero probability")]
    ZeroJumpProbability { t: f64 },
    #[error("invalid initial state: {0}")]
    InitialState(String),
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Ldp(#[from] LdpError),
}

/// RNG for trajectory `index` of a run seeded with `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Computational basis state; `Basis(0)` is `|g⟩` for the two-level atom.
    Basis(usize),
    /// Arbitrary pure state, normalized on use.
    Pure(Vec<C64>),
}

impl Default for InitialState {
    fn default() -> Self {
        Self::Basis(0)
    }
}

impl InitialState {
    fn vector(&self, dim: usize) -> Result<Vec<C64>, QjmcError> {
        match self {
            Self::Basis(i) if *i < dim => {
                let mut v = vec![C64::new(0.0, 0.0); dim];
                v[*i] = C64::new(1.0, 0.0);
                Ok(v)
            }
            Self::Basis(i) => Err(QjmcError::InitialState(format!(
                "basis index {i} >= dim {dim}"
            ))),
            Self::Pure(v) if v.len() != dim => Err(QjmcError::InitialState(format!(
                "state of length {} for dim {dim}",
                v.len()
            ))),
            Self::Pure(v) => {
                let n = linalg::vec_norm(v);
                if n == 0.0 || !n.is_finite() {
                    return Err(QjmcError::InitialState("zero or non-finite state".into()));
                }
                Ok(v.iter().map(|z| z / n).collect())
            }
        }
    }
}

/// Click record of one realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// Strictly increasing counted click times in `[0, t_max]`.
    pub click_times: Vec<f64>,
    pub t_max: f64,
    pub seed: u64,
    pub index: u64,
    pub model_id: Option<String>,
}

impl Trajectory {
    /// Number of clicks at times `≤ t`.
    pub fn count_until(&self, t: f64) -> usize {
        self.click_times.partition_point(|&c| c <= t)
    }

    /// Inter-click intervals, the first measured from `t = 0`.
    pub fn intervals(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.click_times
            .iter()
            .map(|&c| {
                let d = c - prev;
                prev = c;
                d
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QjmcOptions {
    /// Coarse crossing-search step; defaults to `0.01/γ_total`
    /// (capped at `0.1/‖H_eff‖` for dimensions above two).
    pub coarse_step: Option<f64>,
    /// Bisection tolerance on the jump time, in units of `1/γ_total`.
    pub bisection_tol: f64,
    /// Allowed relative norm growth per step before flagging a bug.
    pub norm_tol: f64,
}

impl Default for QjmcOptions {
    fn default() -> Self {
        Self {
            coarse_step: None,
            bisection_tol: 1e-10,
            norm_tol: 1e-9,
        }
    }
}

/// `e^{−iH_eff τ}`.
enum NoJumpPropagator {
    /// `e^{Mτ} = e^{μτ}[cosh(δτ) I + sinh(δτ)/δ · N]` with `M = μI + N`,
    /// `N² = δ²I`; valid at the exceptional point where `M` is defective.
    TwoLevel {
        mu: C64,
        n: [C64; 4],
        delta: C64,
    },
    General {
        generator: ComplexMatrix,
    },
}

impl NoJumpPropagator {
    fn new(heff: &ComplexMatrix) -> Self {
        let generator = heff.scale(C64::new(0.0, -1.0));
        if generator.rows() == 2 {
            let g = &generator;
            let mu = (g[(0, 0)] + g[(1, 1)]) * 0.5;
            let n = [g[(0, 0)] - mu, g[(0, 1)], g[(1, 0)], g[(1, 1)] - mu];
            let delta = (n[0] * n[0] + n[1] * n[2]).sqrt();
            Self::TwoLevel { mu, n, delta }
        } else {
            Self::General { generator }
        }
    }

    fn at(&self, tau: f64) -> Result<ComplexMatrix, LinalgError> {
        match self {
            Self::TwoLevel { mu, n, delta } => {
                let z = delta * tau;
                let cosh = z.cosh();
                // sinh(z)/z
                let sinhc = if z.norm() < 1e-4 {
                    let z2 = z * z;
                    1.0 + z2 / 6.0 + z2 * z2 / 120.0
                } else {
                    z.sinh() / z
                };
                let k = sinhc * tau;
                let e = (mu * tau).exp();
                ComplexMatrix::new(
                    2,
                    2,
                    vec![
                        e * (cosh + k * n[0]),
                        e * k * n[1],
                        e * k * n[2],
                        e * (cosh + k * n[3]),
                    ],
                )
            }
            Self::General { generator } => linalg::expm(&generator.scale_real(tau)),
        }
    }
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(C64::norm_sqr).sum()
}

/// Stop conditions for one run.
#[derive(Debug, Clone, Copy)]
struct Limits {
    t_end: f64,
    max_clicks: Option<usize>,
}

/// Per-model trajectory generator with cached propagators.
pub struct Simulator {
    dim: usize,
    propagator: NoJumpPropagator,
    step: ComplexMatrix,
    dt: f64,
    jumps: Vec<(ComplexMatrix, bool)>,
    gamma_total: f64,
    opts: QjmcOptions,
    model_id: Option<String>,
}

impl Simulator {
    pub fn new(model: &LindbladModel) -> Result<Self, QjmcError> {
        Self::with_options(model, QjmcOptions::default())
    }

    pub fn with_options(model: &LindbladModel, opts: QjmcOptions) -> Result<Self, QjmcError> {
        let heff = lindblad::effective_hamiltonian(model);
        let gamma_total: f64 = model
            .channels()
            .iter()
            .map(|ch| (&ch.operator.adjoint() * &ch.operator).frobenius_norm())
            .sum();
        let heff_norm = heff.frobenius_norm();
        let mut dt = if gamma_total > 0.0 {
            0.01 / gamma_total
        } else {
            0.1 / heff_norm.max(1.0)
        };
        if model.dim() > 2 && heff_norm > 0.0 {
            dt = dt.min(0.1 / heff_norm);
        }
        if let Some(step) = opts.coarse_step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(QjmcError::Domain(format!(
                    "coarse step must be > 0, got {step}"
                )));
            }
            dt = step;
        }
        let propagator = NoJumpPropagator::new(&heff);
        let step = propagator.at(dt)?;
        Ok(Self {
            dim: model.dim(),
            propagator,
            step,
            dt,
            jumps: model
                .channels()
                .iter()
                .map(|ch| (ch.operator.clone(), ch.counted))
                .collect(),
            gamma_total,
            opts,
            model_id: None,
        })
    }

    /// Label copied into every produced [`Trajectory`].
    pub fn with_model_id(mut self, id: impl Into<String>) -> Self {
        self.model_id = Some(id.into());
        self
    }

    pub fn coarse_step(&self) -> f64 {
        self.dt
    }

    /// Trajectory over `[0, t_max]`.
    pub fn run(
        &self,
        t_max: f64,
        seed: u64,
        index: u64,
        initial: &InitialState,
    ) -> Result<Trajectory, QjmcError> {
        if !(t_max > 0.0) {
            return Err(QjmcError::Domain(format!("t_max must be > 0, got {t_max}")));
        }
        let limits = Limits {
            t_end: t_max,
            max_clicks: None,
        };
        let mut clicks = Vec::new();
        self.evolve(
            seed,
            index,
            initial,
            limits,
            &[],
            &mut |_| {},
            &mut clicks,
            &mut |_, _| {},
        )?;
        Ok(self.trajectory(clicks, t_max, seed, index))
    }

    /// Runs until `n_clicks` counted clicks have occurred or `t_limit` is
    /// reached; `t_max` of the result is the last click time in the former case.
    pub fn run_clicks(
        &self,
        n_clicks: usize,
        t_limit: f64,
        seed: u64,
        index: u64,
        initial: &InitialState,
    ) -> Result<Trajectory, QjmcError> {
        if !(t_limit > 0.0) {
            return Err(QjmcError::Domain(format!(
                "t_limit must be > 0, got {t_limit}"
            )));
        }
        let limits = Limits {
            t_end: t_limit,
            max_clicks: Some(n_clicks),
        };
        let mut clicks = Vec::new();
        self.evolve(
            seed,
            index,
            initial,
            limits,
            &[],
            &mut |_| {},
            &mut clicks,
            &mut |_, _| {},
        )?;
        let t_max = if clicks.len() == n_clicks && n_clicks > 0 {
            *clicks.last().unwrap()
        } else {
            t_limit
        };
        Ok(self.trajectory(clicks, t_max, seed, index))
    }

    /// Normalized conditional states at the given ascending times.
    pub fn conditional_states(
        &self,
        times: &[f64],
        seed: u64,
        index: u64,
        initial: &InitialState,
    ) -> Result<Vec<Vec<C64>>, QjmcError> {
        check_grid(times)?;
        let t_end = times.last().copied().unwrap_or(0.0);
        let mut states = Vec::with_capacity(times.len());
        let limits = Limits {
            t_end,
            max_clicks: None,
        };
        let mut clicks = Vec::new();
        self.evolve(
            seed,
            index,
            initial,
            limits,
            times,
            &mut |psi| states.push(psi),
            &mut clicks,
            &mut |_, _| {},
        )?;
        Ok(states)
    }

    /// Like [`Simulator::run`] but also reports the normalized post-jump
    /// state of every jump (counted or not) to `on_jump`.
    pub fn run_observed(
        &self,
        t_max: f64,
        seed: u64,
        index: u64,
        initial: &InitialState,
        on_jump: &mut dyn FnMut(f64, &[C64]),
    ) -> Result<Trajectory, QjmcError> {
        let limits = Limits {
            t_end: t_max,
            max_clicks: None,
        };
        let mut clicks = Vec::new();
        self.evolve(
            seed,
            index,
            initial,
            limits,
            &[],
            &mut |_| {},
            &mut clicks,
            on_jump,
        )?;
        Ok(self.trajectory(clicks, t_max, seed, index))
    }

    fn trajectory(&self, click_times: Vec<f64>, t_max: f64, seed: u64, index: u64) -> Trajectory {
        Trajectory {
            click_times,
            t_max,
            seed,
            index,
            model_id: self.model_id.clone(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn evolve(
        &self,
        seed: u64,
        index: u64,
        initial: &InitialState,
        limits: Limits,
        obs_times: &[f64],
        on_obs: &mut dyn FnMut(Vec<C64>),
        clicks: &mut Vec<f64>,
        on_jump: &mut dyn FnMut(f64, &[C64]),
    ) -> Result<(), QjmcError> {
        let mut rng = trajectory_rng(seed, index);
        let mut psi = initial.vector(self.dim)?;
        let mut t = 0.0;
        let mut next_obs = 0usize;
        let mut phi = vec![C64::new(0.0, 0.0); self.dim];
        let mut next = phi.clone();
        let tol = self.opts.bisection_tol / self.gamma_total.max(f64::MIN_POSITIVE);

        if limits.max_clicks == Some(0) {
            return Ok(());
        }

        loop {
            let r: f64 = loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    break u;
                }
            };

            // coarse search for the first step where ‖φ‖² ≤ r
            phi.copy_from_slice(&psi);
            let mut tau = 0.0;
            let mut prev = 1.0;
            let remaining = limits.t_end - t;
            let bracket = loop {
                if tau >= remaining {
                    break None;
                }
                let h = self.dt.min(remaining - tau);
                if h == self.dt {
                    self.step.mul_vec_into(&phi, &mut next);
                } else {
                    self.propagator.at(h)?.mul_vec_into(&phi, &mut next);
                }
                let n2 = norm2(&next);
                if n2 > prev * (1.0 + self.opts.norm_tol) {
                    return Err(QjmcError::NormIncrease {
                        t: t + tau + h,
                        norm: n2,
                    });
                }
                if n2 <= r {
                    break Some((tau, h));
                }
                std::mem::swap(&mut phi, &mut next);
                tau += h;
                prev = n2;
            };

            let Some((lo, width)) = bracket else {
                self.observe(
                    &psi,
                    t,
                    obs_times,
                    &mut next_obs,
                    |o| o <= limits.t_end,
                    on_obs,
                )?;
                return Ok(());
            };

            // bisection on [lo, lo + width] starting from φ(lo)
            let (mut a, mut b) = (0.0, width);
            while b - a > tol {
                let m = 0.5 * (a + b);
                let n2 = norm2(&self.propagator.at(m)?.mul_vec(&phi));
                if n2 > r {
                    a = m;
                } else {
                    b = m;
                }
            }
            let pre = self.propagator.at(b)?.mul_vec(&phi);
            let t_jump = t + lo + b;
            self.observe(&psi, t, obs_times, &mut next_obs, |o| o < t_jump, on_obs)?;

            let weights: Vec<f64> = self
                .jumps
                .iter()
                .map(|(c, _)| norm2(&c.mul_vec(&pre)))
                .collect();
            let total: f64 = weights.iter().sum();
            if !(total > 0.0) {
                return Err(QjmcError::ZeroJumpProbability { t: t_jump });
            }
            let mut pick = rng.random::<f64>() * total;
            let mut k = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if pick < *w {
                    k = i;
                    break;
                }
                pick -= w;
            }
            let (op, counted) = &self.jumps[k];
            let mut post = op.mul_vec(&pre);
            let n = norm2(&post).sqrt();
            for z in post.iter_mut() {
                *z /= n;
            }
            psi = post;
            t = t_jump;
            on_jump(t, &psi);
            if *counted {
                clicks.push(t);
                if limits.max_clicks.is_some_and(|m| clicks.len() >= m) {
                    return Ok(());
                }
            }
        }
    }

    /// Emits states at pending observation times accepted by `before`,
    /// propagating from the segment start `(psi, t0)`.
    fn observe(
        &self,
        psi: &[C64],
        t0: f64,
        obs_times: &[f64],
        next_obs: &mut usize,
        before: impl Fn(f64) -> bool,
        on_obs: &mut dyn FnMut(Vec<C64>),
    ) -> Result<(), QjmcError> {
        while *next_obs < obs_times.len() && before(obs_times[*next_obs]) {
            let mut v = self.propagator.at(obs_times[*next_obs] - t0)?.mul_vec(psi);
            let n = norm2(&v).sqrt();
            for z in v.iter_mut() {
                *z /= n;
            }
            on_obs(v);
            *next_obs += 1;
        }
        Ok(())
    }
}

fn check_grid(grid: &[f64]) -> Result<(), QjmcError> {
    if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(QjmcError::Domain(
            "grid times must be finite and >= 0".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(QjmcError::Domain("grid must be ascending".into()));
    }
    Ok(())
}

/// Single trajectory (stream 0 of `seed`).
pub fn simulate_trajectory(
    model: &LindbladModel,
    t_max: f64,
    seed: u64,
    initial: &InitialState,
) -> Result<Trajectory, QjmcError> {
    Simulator::new(model)?.run(t_max, seed, 0, initial)
}

/// `n_traj` trajectories from `|g⟩`-like basis state 0, in index order.
pub fn simulate_ensemble(
    model: &LindbladModel,
    n_traj: usize,
    t_max: f64,
    seed: u64,
) -> Result<Vec<Trajectory>, QjmcError> {
    let sim = Simulator::new(model)?;
    let initial = InitialState::default();
    (0..n_traj as u64)
        .into_par_iter()
        .map(|i| sim.run(t_max, seed, i, &initial))
        .collect()
}

/// `τ(t) = N(t)/ℛ` sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClockSeries {
    pub grid: Vec<f64>,
    pub tau: Vec<f64>,
}

pub fn clock_readout(traj: &Trajectory, rate: f64, grid: &[f64]) -> Result<ClockSeries, QjmcError> {
    if !(rate > 0.0) {
        return Err(QjmcError::Domain(format!("rate must be > 0, got {rate}")));
    }
    check_grid(grid)?;
    if grid.iter().any(|&t| t > traj.t_max) {
        return Err(QjmcError::Domain(format!(
            "grid extends past t_max = {}",
            traj.t_max
        )));
    }
    Ok(ClockSeries {
        grid: grid.to_vec(),
        tau: grid
            .iter()
            .map(|&t| traj.count_until(t) as f64 / rate)
            .collect(),
    })
}

/// Per-grid-point sample mean and unbiased standard deviation of τ and N.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    pub grid: Vec<f64>,
    pub mean_tau: Vec<f64>,
    pub std_tau: Vec<f64>,
    pub mean_n: Vec<f64>,
    pub std_n: Vec<f64>,
    pub n_traj: usize,
}

/// Ensemble statistics of existing trajectories.
pub fn ensemble_from_trajectories(
    trajs: &[Trajectory],
    rate: f64,
    grid: &[f64],
) -> Result<EnsembleStats, QjmcError> {
    if trajs.len() < 2 {
        return Err(QjmcError::Domain("need at least two trajectories".into()));
    }
    if !(rate > 0.0) {
        return Err(QjmcError::Domain(format!("rate must be > 0, got {rate}")));
    }
    check_grid(grid)?;
    let n = trajs.len() as f64;
    let mut stats = EnsembleStats {
        grid: grid.to_vec(),
        mean_tau: Vec::with_capacity(grid.len()),
        std_tau: Vec::with_capacity(grid.len()),
        mean_n: Vec::with_capacity(grid.len()),
        std_n: Vec::with_capacity(grid.len()),
        n_traj: trajs.len(),
    };
    for &t in grid {
        let counts: Vec<f64> = trajs.iter().map(|tr| tr.count_until(t) as f64).collect();
        let mean = counts.iter().sum::<f64>() / n;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let std = var.sqrt();
        stats.mean_n.push(mean);
        stats.std_n.push(std);
        stats.mean_tau.push(mean / rate);
        stats.std_tau.push(std / rate);
    }
    Ok(stats)
}

/// Simulates `n_traj` trajectories to `max(grid)` and summarizes them,
/// with ℛ taken from the counting cumulants of the model.
pub fn ensemble_statistics(
    model: &LindbladModel,
    n_traj: usize,
    grid: &[f64],
    seed: u64,
) -> Result<EnsembleStats, QjmcError> {
    if n_traj < 2 {
        return Err(QjmcError::Domain("need at least two trajectories".into()));
    }
    check_grid(grid)?;
    let t_max = grid.last().copied().unwrap_or(0.0);
    if !(t_max > 0.0) {
        return Err(QjmcError::Domain("grid must extend past t = 0".into()));
    }
    let rate = ldp::counting_cumulants(model)?.rate;
    let trajs = simulate_ensemble(model, n_traj, t_max, seed)?;
    ensemble_from_trajectories(&trajs, rate, grid)
}

/// Least-squares slope of `log std_tau` against `log t` over grid points
/// with `t ≥ t_min` and a positive spread.
pub fn spread_exponent(stats: &EnsembleStats, t_min: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = stats
        .grid
        .iter()
        .zip(&stats.std_tau)
        .filter(|(t, s)| **t >= t_min && **t > 0.0 && **s > 0.0)
        .map(|(t, s)| (t.ln(), s.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Average of conditional projectors `|ψ_c(t)⟩⟨ψ_c(t)|` over `n_traj`
/// trajectories at each of the ascending `times`.
pub fn ensemble_density(
    model: &LindbladModel,
    n_traj: usize,
    times: &[f64],
    seed: u64,
    initial: &InitialState,
) -> Result<Vec<ComplexMatrix>, QjmcError> {
    if n_traj == 0 {
        return Err(QjmcError::Domain("need at least one trajectory".into()));
    }
    let sim = Simulator::new(model)?;
    let dim = model.dim();
    let per_traj: Vec<Vec<Vec<C64>>> = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| sim.conditional_states(times, seed, i, initial))
        .collect::<Result<_, _>>()?;
    let scale = 1.0 / n_traj as f64;
    Ok((0..times.len())
        .map(|k| {
            let mut acc = ComplexMatrix::zeros(dim, dim);
            for states in &per_traj {
                let psi = &states[k];
                for i in 0..dim {
                    for j in 0..dim {
                        acc[(i, j)] += psi[i] * psi[j].conj();
                    }
                }
            }
            acc.scale_real(scale)
        })
        .collect())
}

/// Writes `traj_index,click_time` rows for every click.
pub fn write_clicks_csv<W: Write>(mut w: W, trajs: &[Trajectory]) -> io::Result<()> {
    writeln!(w, "traj_index,click_time")?;
    for tr in trajs {
        for &c in &tr.click_times {
            writeln!(w, "{},{}", tr.index, fmt12(c))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{build_two_level_model, TwoLevelParams};

    fn tla(omega: f64, gamma: f64) -> LindbladModel {
        build_two_level_model(&TwoLevelParams::ideal(omega, gamma).unwrap()).unwrap()
    }

    #[test]
    fn dark_state_never_clicks() {
        let tr = simulate_trajectory(&tla(0.0, 1.0), 50.0, 7, &InitialState::Basis(0)).unwrap();
        assert!(tr.click_times.is_empty());
    }

    #[test]
    fn deterministic_given_seed() {
        let m = tla(3.0, 7.5);
        let a = simulate_trajectory(&m, 50.0, 11, &InitialState::default()).unwrap();
        let b = simulate_trajectory(&m, 50.0, 11, &InitialState::default()).unwrap();
        assert_eq!(a, b);
        let c = simulate_trajectory(&m, 50.0, 12, &InitialState::default()).unwrap();
        assert_ne!(a.click_times, c.click_times);
    }

    #[test]
    fn clicks_strictly_increasing_and_in_range() {
        let tr = simulate_trajectory(&tla(3.0, 1.0), 100.0, 3, &InitialState::default()).unwrap();
        assert!(!tr.click_times.is_empty());
        assert!(tr.click_times.windows(2).all(|w| w[1] > w[0]));
        assert!(tr.click_times.iter().all(|&t| (0.0..=100.0).contains(&t)));
    }

    #[test]
    fn excited_start_decays() {
        // from |e⟩ with no drive exactly one photon is emitted
        let tr = simulate_trajectory(&tla(0.0, 2.0), 100.0, 5, &InitialState::Basis(1)).unwrap();
        assert_eq!(tr.click_times.len(), 1);
    }

    #[test]
    fn run_clicks_stops_on_count() {
        let sim = Simulator::new(&tla(3.0, 7.5)).unwrap();
        let tr = sim
            .run_clicks(25, 1e6, 1, 0, &InitialState::default())
            .unwrap();
        assert_eq!(tr.click_times.len(), 25);
        assert_eq!(tr.t_max, *tr.click_times.last().unwrap());
        assert_eq!(tr.intervals().len(), 25);
        assert!((tr.intervals().iter().sum::<f64>() - tr.t_max).abs() < 1e-9);
    }

    #[test]
    fn uncounted_jumps_leave_no_click() {
        let m = build_two_level_model(&TwoLevelParams::new(3.0, 7.5, 0.5).unwrap()).unwrap();
        let sim = Simulator::new(&m).unwrap();
        let mut jumps = 0usize;
        let tr = sim
            .run_observed(200.0, 9, 0, &InitialState::default(), &mut |_, _| {
                jumps += 1
            })
            .unwrap();
        let frac = tr.click_times.len() as f64 / jumps as f64;
        assert!((frac - 0.5).abs() < 0.05, "counted fraction {frac}");
    }

    #[test]
    fn exceptional_point_propagator() {
        // γ = 4Ω makes H_eff defective; the closed form must still match expm
        let m = tla(1.0, 4.0);
        let heff = lindblad::effective_hamiltonian(&m);
        let prop = NoJumpPropagator::new(&heff);
        for tau in [1e-6, 0.3, 2.0] {
            let a = prop.at(tau).unwrap();
            let b = linalg::expm(&heff.scale(C64::new(0.0, -tau))).unwrap();
            assert!((&a - &b).frobenius_norm() < 1e-13, "tau={tau}");
        }
    }

    #[test]
    fn two_level_propagator_matches_expm() {
        for (o, g) in [(3.0, 7.5), (3.0, 1.0), (0.5, 20.0)] {
            let heff = lindblad::effective_hamiltonian(&tla(o, g));
            let prop = NoJumpPropagator::new(&heff);
            let a = prop.at(0.37).unwrap();
            let b = linalg::expm(&heff.scale(C64::new(0.0, -0.37))).unwrap();
            assert!((&a - &b).frobenius_norm() < 1e-13);
        }
    }

    #[test]
    fn readout_arithmetic() {
        let tr = Trajectory {
            click_times: vec![0.5, 1.0],
            t_max: 2.0,
            seed: 0,
            index: 0,
            model_id: None,
        };
        let s = clock_readout(&tr, 2.0, &[1.1]).unwrap();
        assert_eq!(s.tau, vec![1.0]);
        let empty = Trajectory {
            click_times: vec![],
            ..tr.clone()
        };
        let s = clock_readout(&empty, 2.0, &[0.0, 1.0, 2.0]).unwrap();
        assert!(s.tau.iter().all(|&x| x == 0.0));
        assert!(clock_readout(&tr, 0.0, &[1.0]).is_err());
        assert!(clock_readout(&tr, 1.0, &[3.0]).is_err());
    }

    #[test]
    fn ensemble_needs_two() {
        assert!(ensemble_statistics(&tla(3.0, 7.5), 1, &[1.0], 0).is_err());
    }

    #[test]
    fn ensemble_is_reproducible() {
        let m = tla(3.0, 7.5);
        let grid = [10.0, 20.0];
        let a = ensemble_statistics(&m, 8, &grid, 4).unwrap();
        let b = ensemble_statistics(&m, 8, &grid, 4).unwrap();
        assert_eq!(a.mean_n, b.mean_n);
        assert_eq!(a.std_n, b.std_n);
        assert!(a.std_tau.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn clicks_csv_layout() {
        let tr = Trajectory {
            click_times: vec![0.25, 1.0 / 3.0],
            t_max: 1.0,
            seed: 0,
            index: 3,
            model_id: None,
        };
        let mut out = Vec::new();
        write_clicks_csv(&mut out, &[tr]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "traj_index,click_time\n3,0.25\n3,0.333333333333\n"
        );
    }

    #[test]
    fn invalid_initial_state() {
        let m = tla(3.0, 7.5);
        assert!(simulate_trajectory(&m, 1.0, 0, &InitialState::Basis(2)).is_err());
        assert!(
            simulate_trajectory(&m, 1.0, 0, &InitialState::Pure(vec![C64::new(0.0, 0.0); 2]))
                .is_err()
        );
    }
}
