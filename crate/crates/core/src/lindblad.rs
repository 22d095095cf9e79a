//! Open-system model description and superoperator assembly.
//!
//! Density matrices are vectorized by stacking columns, so that
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`. Every superoperator in this crate is
//! written against that convention. Rates live inside the jump operators
//! (a channel decaying at rate γ carries `√γ·σ₋`).

use serde::Deserialize;
use thiserror::Error;

use crate::linalg::{self, ComplexMatrix, LinalgError, C64};

/// Tolerance on `‖H − H†‖ / ‖H‖`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Gap below which two zero modes count as a degenerate null space.
pub const STEADY_STATE_GAP: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("steady state is not unique: leading eigenvalues {first} and {second}")]
    MultipleSteadyStates { first: C64, second: C64 },
    #[error("steady state residual {0:e} too large")]
    SteadyStateResidual(f64),
    #[error("model description: {0}")]
    Parse(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// One dissipation channel. Only `counted` channels contribute clicks.
#[derive(Debug, Clone)]
pub struct JumpChannel {
    pub operator: ComplexMatrix,
    pub counted: bool,
}

impl JumpChannel {
    pub fn counted(operator: ComplexMatrix) -> Self {
        Self {
            operator,
            counted: true,
        }
    }

    pub fn uncounted(operator: ComplexMatrix) -> Self {
        Self {
            operator,
            counted: false,
        }
    }
}

/// Hamiltonian plus jump channels. Immutable once built.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    dim: usize,
    hamiltonian: ComplexMatrix,
    channels: Vec<JumpChannel>,
}

impl LindbladModel {
    pub fn new(hamiltonian: ComplexMatrix, channels: Vec<JumpChannel>) -> Result<Self, ModelError> {
        if !hamiltonian.is_square() {
            return Err(ModelError::InvalidModel(format!(
                "hamiltonian is {}x{}",
                hamiltonian.rows(),
                hamiltonian.cols()
            )));
        }
        let dim = hamiltonian.rows();
        if !hamiltonian.is_finite() {
            return Err(ModelError::InvalidModel(
                "hamiltonian has non-finite entries".into(),
            ));
        }
        if !hamiltonian.is_hermitian(HERMITIAN_TOL) {
            return Err(ModelError::InvalidModel(
                "hamiltonian is not Hermitian".into(),
            ));
        }
        if channels.is_empty() {
            return Err(ModelError::InvalidModel(
                "at least one jump channel is required".into(),
            ));
        }
        for (k, ch) in channels.iter().enumerate() {
            if ch.operator.rows() != dim || ch.operator.cols() != dim {
                return Err(ModelError::InvalidModel(format!(
                    "channel {k} operator is {}x{}, expected {dim}x{dim}",
                    ch.operator.rows(),
                    ch.operator.cols()
                )));
            }
            if !ch.operator.is_finite() {
                return Err(ModelError::InvalidModel(format!(
                    "channel {k} operator has non-finite entries"
                )));
            }
        }
        Ok(Self {
            dim,
            hamiltonian,
            channels,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[JumpChannel] {
        &self.channels
    }

    pub fn has_counted_channel(&self) -> bool {
        self.channels.iter().any(|ch| ch.counted)
    }

    /// Parses either the explicit form
    /// `{"dim": 2, "hamiltonian": [[re, im], ...], "channels": [{"operator": [...], "counted": true}]}`
    /// (row-major entries) or the shorthand `{"tla": {"omega": 3, "gamma": 7.5, "eta": 1}}`.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: ModelDoc =
            serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        match doc {
            ModelDoc::Tla { tla } => build_two_level_model(&TwoLevelParams::new(
                tla.omega,
                tla.gamma,
                tla.eta.unwrap_or(1.0),
            )?),
            ModelDoc::Explicit {
                dim,
                hamiltonian,
                channels,
            } => {
                let h = matrix_from_pairs(dim, &hamiltonian, "hamiltonian")?;
                let channels = channels
                    .iter()
                    .enumerate()
                    .map(|(k, ch)| {
                        Ok(JumpChannel {
                            operator: matrix_from_pairs(
                                dim,
                                &ch.operator,
                                &format!("channel {k}"),
                            )?,
                            counted: ch.counted,
                        })
                    })
                    .collect::<Result<Vec<_>, ModelError>>()?;
                Self::new(h, channels)
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ModelDoc {
    Tla {
        tla: TlaDoc,
    },
    Explicit {
        dim: usize,
        hamiltonian: Vec<[f64; 2]>,
        channels: Vec<ChannelDoc>,
    },
}

#[derive(Deserialize)]
struct TlaDoc {
    omega: f64,
    gamma: f64,
    eta: Option<f64>,
}

#[derive(Deserialize)]
struct ChannelDoc {
    operator: Vec<[f64; 2]>,
    counted: bool,
}

fn matrix_from_pairs(
    dim: usize,
    pairs: &[[f64; 2]],
    what: &str,
) -> Result<ComplexMatrix, ModelError> {
    if pairs.len() != dim * dim {
        return Err(ModelError::Parse(format!(
            "{what}: expected {} entries for dim {dim}, got {}",
            dim * dim,
            pairs.len()
        )));
    }
    Ok(ComplexMatrix::new(
        dim,
        dim,
        pairs.iter().map(|&[re, im]| c(re, im)).collect(),
    )?)
}

/// Parameters of the resonantly driven two-level atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelParams {
    /// Drive amplitude Ω in `H = Ω(σ₊ + σ₋)`.
    pub omega: f64,
    /// Spontaneous decay rate γ.
    pub gamma: f64,
    /// Detection efficiency η ∈ (0, 1].
    pub eta: f64,
}

impl TwoLevelParams {
    pub fn new(omega: f64, gamma: f64, eta: f64) -> Result<Self, ModelError> {
        let p = Self { omega, gamma, eta };
        p.validate()?;
        Ok(p)
    }

    /// Perfect detection.
    pub fn ideal(omega: f64, gamma: f64) -> Result<Self, ModelError> {
        Self::new(omega, gamma, 1.0)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(ModelError::InvalidParams(format!(
                "omega must be >= 0, got {}",
                self.omega
            )));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(ModelError::InvalidParams(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(ModelError::InvalidParams(format!(
                "eta must be in (0, 1], got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// `σ₋ = |g⟩⟨e|` in the basis `(|g⟩, |e⟩)`.
pub fn sigma_minus() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).expect("literal 2x2")
}

pub fn sigma_plus() -> ComplexMatrix {
    sigma_minus().adjoint()
}

/// Driven two-level atom: `H = Ω(σ₊ + σ₋)`, a counted channel `√(ηγ)·σ₋`
/// and, when η < 1, an uncounted channel `√((1−η)γ)·σ₋`.
pub fn build_two_level_model(p: &TwoLevelParams) -> Result<LindbladModel, ModelError> {
    p.validate()?;
    let h = (&sigma_plus() + &sigma_minus()).scale_real(p.omega);
    let mut channels = vec![JumpChannel::counted(
        sigma_minus().scale_real((p.eta * p.gamma).sqrt()),
    )];
    if p.eta < 1.0 {
        channels.push(JumpChannel::uncounted(
            sigma_minus().scale_real(((1.0 - p.eta) * p.gamma).sqrt()),
        ));
    }
    LindbladModel::new(h, channels)
}

/// How counted sandwich terms `c̄⊗c` are weighted during assembly.
#[derive(Clone, Copy)]
enum CountedWeight {
    Factor(f64),
    Dropped,
}

fn assemble(model: &LindbladModel, weight: CountedWeight) -> ComplexMatrix {
    let n = model.dim;
    let id = ComplexMatrix::identity(n);
    let h = &model.hamiltonian;
    let mut l = (&id.kron(h) - &h.transpose().kron(&id)).scale(c(0.0, -1.0));
    for ch in &model.channels {
        let op = &ch.operator;
        let cdc = &op.adjoint() * op;
        let anti = (&id.kron(&cdc) + &cdc.transpose().kron(&id)).scale_real(-0.5);
        l = &l + &anti;
        let sandwich = op.conj().kron(op);
        match (ch.counted, weight) {
            (false, _) => l = &l + &sandwich,
            (true, CountedWeight::Factor(w)) => l = &l + &sandwich.scale_real(w),
            (true, CountedWeight::Dropped) => {}
        }
    }
    l
}

/// GKSL generator acting on column-stacked density matrices:
/// `ℒ = −i(I⊗H − Hᵀ⊗I) + Σ_k [c̄_k⊗c_k − ½(I⊗c_k†c_k + (c_k†c_k)ᵀ⊗I)]`.
pub fn liouvillian(model: &LindbladModel) -> ComplexMatrix {
    assemble(model, CountedWeight::Factor(1.0))
}

/// Tilted generator: counted sandwich terms carry `e^{−s}`.
pub fn biased_liouvillian(model: &LindbladModel, s: f64) -> ComplexMatrix {
    assemble(model, CountedWeight::Factor((-s).exp()))
}

/// The `s → +∞` limit of [`biased_liouvillian`]: counted jumps removed.
pub fn no_jump_liouvillian(model: &LindbladModel) -> ComplexMatrix {
    assemble(model, CountedWeight::Dropped)
}

/// `H_eff = H − (i/2) Σ_k c_k†c_k` over all channels, counted or not.
pub fn effective_hamiltonian(model: &LindbladModel) -> ComplexMatrix {
    let mut decay = ComplexMatrix::zeros(model.dim, model.dim);
    for ch in &model.channels {
        decay = &decay + &(&ch.operator.adjoint() * &ch.operator);
    }
    &model.hamiltonian - &decay.scale(c(0.0, 0.5))
}

/// Column-stacking vectorization.
pub fn vectorize(m: &ComplexMatrix) -> Vec<C64> {
    let mut v = Vec::with_capacity(m.rows() * m.cols());
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            v.push(m[(i, j)]);
        }
    }
    v
}

pub fn devectorize(v: &[C64], dim: usize) -> ComplexMatrix {
    assert_eq!(v.len(), dim * dim, "devectorize length mismatch");
    ComplexMatrix::from_fn(dim, dim, |i, j| v[j * dim + i])
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub const TOL: f64 = 1e-10;

    pub fn new(m: ComplexMatrix) -> Result<Self, ModelError> {
        if !m.is_square() {
            return Err(ModelError::InvalidState("not square".into()));
        }
        if !m.is_hermitian(Self::TOL) {
            return Err(ModelError::InvalidState("not Hermitian".into()));
        }
        let tr = m.trace();
        if (tr - c(1.0, 0.0)).norm() > Self::TOL {
            return Err(ModelError::InvalidState(format!("trace is {tr}")));
        }
        let min = linalg::eigenvalues(&m)?
            .iter()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min);
        if min < -Self::TOL {
            return Err(ModelError::InvalidState(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(Self(m))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) state vector.
    pub fn pure(psi: &[C64]) -> Result<Self, ModelError> {
        let nrm = linalg::vec_norm(psi);
        if psi.is_empty() || nrm == 0.0 || !nrm.is_finite() {
            return Err(ModelError::InvalidState(
                "zero or empty state vector".into(),
            ));
        }
        let n = psi.len();
        Self::new(ComplexMatrix::from_fn(n, n, |i, j| {
            psi[i] * psi[j].conj() / (nrm * nrm)
        }))
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self, ModelError> {
        if index >= dim {
            return Err(ModelError::InvalidState(format!(
                "basis index {index} >= dim {dim}"
            )));
        }
        let mut psi = vec![c(0.0, 0.0); dim];
        psi[index] = c(1.0, 0.0);
        Self::pure(&psi)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn population(&self, index: usize) -> f64 {
        self.0[(index, index)].re
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64, ModelError> {
        Ok(trace_distance(&self.0, &other.0)?)
    }
}

/// `½‖A − B‖₁` for Hermitian `A`, `B`.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64, LinalgError> {
    let diff = a - b;
    let sym = (&diff + &diff.adjoint()).scale_real(0.5);
    Ok(0.5
        * linalg::eigenvalues(&sym)?
            .iter()
            .map(|z| z.re.abs())
            .sum::<f64>())
}

/// Unique stationary state, taken from the right null vector of `ℒ`.
pub fn steady_state(model: &LindbladModel) -> Result<DensityMatrix, ModelError> {
    let l = liouvillian(model);
    let opts = linalg::EigenOptions {
        gap_tol: STEADY_STATE_GAP,
        ..Default::default()
    };
    let pair = match linalg::max_real_eigenpair_with(&l, &opts) {
        Ok(p) => p,
        Err(LinalgError::Degenerate { first, second, .. }) => {
            return Err(ModelError::MultipleSteadyStates { first, second })
        }
        Err(e) => return Err(e.into()),
    };
    let rho = devectorize(&pair.right, model.dim);
    let rho = (&rho + &rho.adjoint()).scale_real(0.5);
    let tr = rho.trace();
    if tr.norm() == 0.0 {
        return Err(ModelError::InvalidState(
            "null vector has zero trace".into(),
        ));
    }
    let rho = rho.scale(tr.inv());
    let res = linalg::vec_norm(&l.mul_vec(&vectorize(&rho)));
    if res > 1e-10 * l.frobenius_norm().max(1.0) {
        return Err(ModelError::SteadyStateResidual(res));
    }
    DensityMatrix::new(rho)
}

fn channel_rate(op: &ComplexMatrix, rho: &ComplexMatrix) -> f64 {
    (&(&op.adjoint() * op) * rho).trace().re
}

/// `Σ_counted Tr{c_k†c_k ρ}`, the mean click rate in state ρ.
pub fn counted_click_rate(model: &LindbladModel, rho: &DensityMatrix) -> f64 {
    assert_eq!(model.dim, rho.dim(), "state dimension mismatch");
    model
        .channels
        .iter()
        .filter(|ch| ch.counted)
        .map(|ch| channel_rate(&ch.operator, rho.matrix()))
        .sum::<f64>()
        .max(0.0)
}

/// Total emission rate over every channel, counted or not.
pub fn total_emission_rate(model: &LindbladModel, rho: &DensityMatrix) -> f64 {
    assert_eq!(model.dim, rho.dim(), "state dimension mismatch");
    model
        .channels
        .iter()
        .map(|ch| channel_rate(&ch.operator, rho.matrix()))
        .sum::<f64>()
        .max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tla(omega: f64, gamma: f64, eta: f64) -> LindbladModel {
        build_two_level_model(&TwoLevelParams::new(omega, gamma, eta).unwrap()).unwrap()
    }

    /// Resonant optical-Bloch steady-state excited population.
    fn bloch_pe(omega: f64, gamma: f64) -> f64 {
        4.0 * omega * omega / (gamma * gamma + 8.0 * omega * omega)
    }

    #[test]
    fn tla_channels() {
        let m = tla(3.0, 7.5, 1.0);
        assert_eq!(m.dim(), 2);
        assert_eq!(m.channels().len(), 1);
        assert!(m.channels()[0].counted);
        assert!((m.channels()[0].operator.frobenius_norm() - 7.5f64.sqrt()).abs() < 1e-14);

        let half = tla(3.0, 7.5, 0.5);
        assert_eq!(half.channels().len(), 2);
        assert!(half.channels()[0].counted && !half.channels()[1].counted);
        for ch in half.channels() {
            assert!((ch.operator.frobenius_norm() - 3.75f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_drive_has_zero_hamiltonian() {
        let m = tla(0.0, 1.0, 1.0);
        assert_eq!(m.hamiltonian().frobenius_norm(), 0.0);
    }

    #[test]
    fn invalid_params() {
        assert!(TwoLevelParams::new(-1.0, 1.0, 1.0).is_err());
        assert!(TwoLevelParams::new(1.0, 0.0, 1.0).is_err());
        assert!(TwoLevelParams::new(1.0, 1.0, 0.0).is_err());
        assert!(TwoLevelParams::new(1.0, 1.0, 1.5).is_err());
        assert!(TwoLevelParams::new(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn model_validation() {
        let h = ComplexMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, 1.0), c(0.0, 0.0)],
        ])
        .unwrap();
        assert!(LindbladModel::new(h, vec![JumpChannel::counted(sigma_minus())]).is_err());
        assert!(LindbladModel::new(ComplexMatrix::zeros(2, 2), vec![]).is_err());
        assert!(LindbladModel::new(
            ComplexMatrix::zeros(2, 2),
            vec![JumpChannel::counted(ComplexMatrix::zeros(3, 3))]
        )
        .is_err());
    }

    #[test]
    fn pure_decay_spectrum() {
        // populations relax at γ, coherences at γ/2
        let l = liouvillian(&tla(0.0, 1.0, 1.0));
        let ev = linalg::eigenvalues(&l).unwrap();
        let want = [0.0, -0.5, -0.5, -1.0];
        for (z, w) in ev.iter().zip(want) {
            assert!((z - c(w, 0.0)).norm() < 1e-12, "{z} vs {w}");
        }
    }

    #[test]
    fn trace_preservation() {
        for m in [tla(3.0, 7.5, 1.0), tla(1.0, 4.0, 0.3), tla(0.0, 2.0, 1.0)] {
            let l = liouvillian(&m);
            let id = vectorize(&ComplexMatrix::identity(2));
            let row = l.adjoint().mul_vec(&id);
            assert!(linalg::vec_norm(&row) < 1e-12);
        }
    }

    #[test]
    fn biased_at_zero_is_bitwise_equal() {
        let m = tla(3.0, 7.5, 0.7);
        assert_eq!(biased_liouvillian(&m, 0.0), liouvillian(&m));
    }

    #[test]
    fn infinite_bias_matches_no_jump_generator() {
        let m = tla(3.0, 7.5, 1.0);
        let lead = linalg::eigenvalues(&no_jump_liouvillian(&m)).unwrap()[0];
        // no-jump dynamics ρ ↦ −i(H_eff ρ − ρ H_eff†): eigenvalues are
        // −i(μ_a − μ̄_b) for eigenvalues μ of H_eff
        let heff = effective_hamiltonian(&m);
        let mu = linalg::eigenvalues(&heff).unwrap();
        let best = mu
            .iter()
            .flat_map(|a| mu.iter().map(move |b| c(0.0, -1.0) * (a - b.conj())))
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((lead.re - best).abs() < 1e-12);
        // and a large finite bias approaches it
        let far = linalg::eigenvalues(&biased_liouvillian(&m, 40.0)).unwrap()[0];
        assert!((far.re - lead.re).abs() < 1e-9);
    }

    #[test]
    fn bias_sign() {
        let m = tla(3.0, 7.5, 1.0);
        let plus = linalg::max_real_eigenpair(&biased_liouvillian(&m, 0.1)).unwrap();
        let minus = linalg::max_real_eigenpair(&biased_liouvillian(&m, -0.1)).unwrap();
        assert!(plus.value.re < 0.0);
        assert!(minus.value.re > 0.0);
    }

    #[test]
    fn zero_mode_vectors() {
        let m = tla(3.0, 7.5, 1.0);
        let pair = linalg::max_real_eigenpair(&liouvillian(&m)).unwrap();
        assert!(pair.value.norm() < 1e-10);
        // left ∝ vec(I)
        let l = &pair.left;
        assert!((l[0] - l[3]).norm() < 1e-10 * l[0].norm());
        assert!(l[1].norm() < 1e-10 * l[0].norm() && l[2].norm() < 1e-10 * l[0].norm());
        // right ∝ vec(ρ_ss)
        let ss = steady_state(&m).unwrap();
        let v = vectorize(ss.matrix());
        let k = pair.right[0] / v[0];
        for (a, b) in pair.right.iter().zip(&v) {
            assert!((a - b * k).norm() < 1e-10);
        }
    }

    #[test]
    fn dark_steady_state() {
        let ss = steady_state(&tla(0.0, 3.0, 1.0)).unwrap();
        assert!((ss.population(0) - 1.0).abs() < 1e-12);
        assert!(ss.population(1).abs() < 1e-12);
    }

    #[test]
    fn steady_state_populations() {
        for (om, ga) in [(3.0, 7.5), (1.0, 100.0), (0.5, 1.0)] {
            let ss = steady_state(&tla(om, ga, 1.0)).unwrap();
            let want = bloch_pe(om, ga);
            assert!(
                (ss.population(1) - want).abs() < 1e-10 * want.max(1e-3),
                "{om} {ga}"
            );
        }
        assert!((bloch_pe(3.0, 7.5) - 0.280702).abs() < 1e-6);
        assert!((bloch_pe(1.0, 100.0) - 3.9968e-4).abs() < 1e-8);
    }

    #[test]
    fn long_time_evolution_reaches_steady_state() {
        let m = tla(3.0, 7.5, 1.0);
        let l = liouvillian(&m);
        let rho0 = vectorize(DensityMatrix::basis(2, 0).unwrap().matrix());
        let out = devectorize(&linalg::expm_apply(&l, 60.0, &rho0).unwrap(), 2);
        let ss = steady_state(&m).unwrap();
        assert!((&out - ss.matrix()).frobenius_norm() < 1e-8);
    }

    #[test]
    fn degenerate_null_space_detected() {
        // dephasing only: every diagonal state is stationary
        let z = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]).unwrap();
        let m =
            LindbladModel::new(ComplexMatrix::zeros(2, 2), vec![JumpChannel::counted(z)]).unwrap();
        assert!(matches!(
            steady_state(&m),
            Err(ModelError::MultipleSteadyStates { .. })
        ));
    }

    #[test]
    fn click_rates() {
        let m = tla(3.0, 7.5, 1.0);
        let g = DensityMatrix::basis(2, 0).unwrap();
        assert_eq!(counted_click_rate(&m, &g), 0.0);
        let ss = steady_state(&m).unwrap();
        let r = counted_click_rate(&m, &ss);
        let want = 4.0 * 7.5 * 9.0 / (7.5 * 7.5 + 72.0);
        assert!((r - want).abs() < 1e-10);
        assert!((want - 2.10526).abs() < 1e-5);

        let half = tla(3.0, 7.5, 0.5);
        assert!((counted_click_rate(&half, &ss) - 0.5 * r).abs() < 1e-12);
        assert!((total_emission_rate(&half, &ss) - r).abs() < 1e-12);
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(ComplexMatrix::identity(2)).is_err());
        let neg = ComplexMatrix::from_real_rows(&[&[1.5, 0.0], &[0.0, -0.5]]).unwrap();
        assert!(DensityMatrix::new(neg).is_err());
        assert!(DensityMatrix::basis(2, 2).is_err());
        assert!(DensityMatrix::pure(&[c(1.0, 0.0), c(0.0, 1.0)]).is_ok());
    }

    #[test]
    fn json_models() {
        let m =
            LindbladModel::from_json(r#"{"tla": {"omega": 3, "gamma": 7.5, "eta": 0.5}}"#).unwrap();
        assert_eq!(m.channels().len(), 2);
        let m = LindbladModel::from_json(r#"{"tla": {"omega": 3, "gamma": 7.5}}"#).unwrap();
        assert_eq!(m.channels().len(), 1);
        let explicit = r#"{
            "dim": 2,
            "hamiltonian": [[0,0],[3,0],[3,0],[0,0]],
            "channels": [{"operator": [[0,0],[2,0],[0,0],[0,0]], "counted": true}]
        }"#;
        let e = LindbladModel::from_json(explicit).unwrap();
        assert_eq!(liouvillian(&e), liouvillian(&tla(3.0, 4.0, 1.0)));
        assert!(
            LindbladModel::from_json(r#"{"dim": 2, "hamiltonian": [], "channels": []}"#).is_err()
        );
        assert!(LindbladModel::from_json("not json").is_err());
    }
}
