//! Classical (entanglement-free) teleportation: Alice measures the unknown
//! state with a rank-one POVM `{|ε_l⟩⟨ε_l|}` and Bob resends `|φ^c_l⟩`.
//!
//! The average test-passing probability over an ensemble `{p_a, |φ_a⟩}` is
//!
//! ```text
//! S = Σ_{a,l} p_a |⟨φ_a|φ^c_l⟩|² |⟨φ_a|ε_l⟩|²  =  Σ_l (μ_l / N) T_l
//! ```
//!
//! with `μ_l = ⟨ε_l|ε_l⟩`, `Σ_l μ_l = 2` and
//! `T_l = Σ_a N p_a |⟨φ_a|φ^c_l⟩|² |⟨φ_a|Ω_l⟩|²`, `Ω_l = ε_l/√μ_l`.
//! For the trine `max T = 9/8`, hence `S ≤ 3/4`.

use nalgebra::Vector2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{Jones, JonesVector};
use crate::teleport::PolState;

/// Tolerance on POVM completeness and on `Σ μ_l = 2`.
pub const POVM_TOLERANCE: f64 = 1e-9;

fn fidelity_vec(a: &JonesVector, b: &JonesVector) -> f64 {
    a.dotc(b).norm_sqr()
}

/// A finite ensemble of pure polarization states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleRepr", into = "EnsembleRepr")]
pub struct Ensemble {
    states: Vec<PolState>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleRepr {
    states: Vec<PolState>,
    probs: Vec<f64>,
}

impl TryFrom<EnsembleRepr> for Ensemble {
    type Error = Error;

    fn try_from(r: EnsembleRepr) -> Result<Self> {
        Ensemble::new(r.states, r.probs)
    }
}

impl From<Ensemble> for EnsembleRepr {
    fn from(e: Ensemble) -> Self {
        Self {
            states: e.states,
            probs: e.probs,
        }
    }
}

impl Ensemble {
    pub fn new(states: Vec<PolState>, probs: Vec<f64>) -> Result<Self> {
        if states.is_empty() || states.len() != probs.len() {
            return Err(Error::Precondition(format!(
                "{} states with {} probabilities",
                states.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Precondition("probabilities must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition(format!("probabilities sum to {total}")));
        }
        Ok(Self { states, probs })
    }

    pub fn uniform(states: Vec<PolState>) -> Result<Self> {
        let p = 1.0 / states.len().max(1) as f64;
        let probs = vec![p; states.len()];
        Self::new(states, probs)
    }

    /// Linear polarizations at 0°, 120° and −120°, each with probability 1/3.
    pub fn trine() -> Self {
        Self::uniform([0.0, 120.0, -120.0].map(PolState::linear).to_vec()).expect("valid trine")
    }

    pub fn states(&self) -> &[PolState] {
        &self.states
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `N p_a`; all ones for a uniform ensemble.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.probs.iter().map(|p| n * p).collect()
    }
}

/// Unnormalized direction of a rank-one effect, stored as `[v, h]`.
type EffectRepr = [Complex64; 2];

/// Rank-one POVM given by unnormalized effect vectors `|ε_l⟩`.
///
/// Construction does not check completeness; use [`validate_povm`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PovmRepr", into = "PovmRepr")]
pub struct Povm {
    effects: Vec<JonesVector>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PovmRepr {
    effects: Vec<EffectRepr>,
}

impl From<PovmRepr> for Povm {
    fn from(r: PovmRepr) -> Self {
        Self::new(r.effects.iter().map(|e| Vector2::new(e[0], e[1])).collect())
    }
}

impl From<Povm> for PovmRepr {
    fn from(p: Povm) -> Self {
        Self {
            effects: p.effects.iter().map(|e| [e[0], e[1]]).collect(),
        }
    }
}

impl Povm {
    pub fn new(effects: Vec<JonesVector>) -> Self {
        Self { effects }
    }

    /// Projective measurement onto `LinearPol(θ)` and `LinearPol(θ + 90°)`.
    pub fn linear_basis(theta_deg: f64) -> Self {
        Self::new(vec![
            PolState::linear(theta_deg).vector(),
            PolState::linear(theta_deg + 90.0).vector(),
        ])
    }

    /// Projective measurement onto an arbitrary state and its orthogonal complement.
    pub fn basis(state: &PolState) -> Self {
        let v = state.vector();
        let perp = Vector2::new(-v[1].conj(), v[0].conj());
        Self::new(vec![v, perp])
    }

    /// Symmetric trine POVM `{√(2/3) LinearPol(θ_a)}`.
    pub fn trine() -> Self {
        let k = (2.0f64 / 3.0).sqrt();
        Self::new(
            [0.0, 120.0, -120.0]
                .iter()
                .map(|t| PolState::linear(*t).vector() * Complex64::new(k, 0.0))
                .collect(),
        )
    }

    pub fn effects(&self) -> &[JonesVector] {
        &self.effects
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    /// `μ_l = ⟨ε_l|ε_l⟩`.
    pub fn mu(&self, l: usize) -> f64 {
        self.effects[l].norm_squared()
    }

    /// `Ω_l`, or `None` for a zero effect.
    pub fn omega(&self, l: usize) -> Option<OmegaState> {
        OmegaState::new(&self.effects[l]).ok()
    }

    /// `Σ_l |ε_l⟩⟨ε_l|`.
    pub fn gram(&self) -> Jones {
        self.effects
            .iter()
            .fold(Jones::zeros(), |acc, e| acc + e * e.adjoint())
    }
}

/// Completeness `Σ_l |ε_l⟩⟨ε_l| = I` and the trace condition `Σ_l μ_l = 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PovmDiagnostics {
    /// Frobenius norm of `Σ_l |ε_l⟩⟨ε_l| − I`.
    pub completeness_residual: f64,
    /// `Σ_l μ_l − 2`.
    pub mu_sum_deviation: f64,
    pub valid: bool,
}

pub fn validate_povm(povm: &Povm) -> PovmDiagnostics {
    let completeness_residual = (povm.gram() - Jones::identity()).norm();
    let mu_sum: f64 = (0..povm.len()).map(|l| povm.mu(l)).sum();
    let mu_sum_deviation = mu_sum - 2.0;
    let valid = !povm.is_empty()
        && completeness_residual < POVM_TOLERANCE
        && mu_sum_deviation.abs() < POVM_TOLERANCE;
    PovmDiagnostics {
        completeness_residual,
        mu_sum_deviation,
        valid,
    }
}

/// Normalized effect direction `|Ω_l⟩ = |ε_l⟩/√μ_l`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OmegaState(JonesVector);

impl OmegaState {
    pub fn new(effect: &JonesVector) -> Result<Self> {
        let n = effect.norm();
        if !n.is_finite() || n <= 1e-300 {
            return Err(Error::Precondition("zero effect has no direction".into()));
        }
        Ok(Self(effect / Complex64::new(n, 0.0)))
    }

    pub fn from_pol(p: &PolState) -> Self {
        Self(p.vector())
    }

    pub fn vector(&self) -> JonesVector {
        self.0
    }
}

/// Alice's POVM together with Bob's resend state for every outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalStrategy {
    pub povm: Povm,
    pub resend: Vec<PolState>,
}

impl ClassicalStrategy {
    pub fn new(povm: Povm, resend: Vec<PolState>) -> Result<Self> {
        if povm.len() != resend.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} effects with {} resend states",
                povm.len(),
                resend.len()
            )));
        }
        Ok(Self { povm, resend })
    }

    /// Resend the measured direction `Ω_l` for every outcome.
    pub fn measure_and_resend(povm: Povm) -> Result<Self> {
        let resend = (0..povm.len())
            .map(|l| {
                let omega = povm.omega(l).ok_or_else(|| {
                    Error::Precondition(format!("effect {l} is zero"))
                })?;
                PolState::from_vector(&omega.vector())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(povm, resend)
    }
}

/// Average probability that Bob's resent state passes the test on the
/// prepared state.
pub fn s_value(strategy: &ClassicalStrategy, ensemble: &Ensemble) -> Result<f64> {
    let diag = validate_povm(&strategy.povm);
    if !diag.valid {
        return Err(Error::InvariantViolation(format!(
            "invalid POVM: completeness residual {:e}, Σμ − 2 = {:e}",
            diag.completeness_residual, diag.mu_sum_deviation
        )));
    }
    if strategy.povm.len() != strategy.resend.len() {
        return Err(Error::DimensionMismatch("effects and resend states differ in number".into()));
    }
    Ok(raw_s(strategy.povm.effects(), &strategy.resend_vectors(), ensemble))
}

impl ClassicalStrategy {
    fn resend_vectors(&self) -> Vec<JonesVector> {
        self.resend.iter().map(PolState::vector).collect()
    }
}

fn raw_s(effects: &[JonesVector], resend: &[JonesVector], ensemble: &Ensemble) -> f64 {
    let mut s = 0.0;
    for (e, r) in effects.iter().zip(resend) {
        for (phi, p) in ensemble.states.iter().zip(&ensemble.probs) {
            let a = phi.vector();
            s += p * fidelity_vec(&a, r) * fidelity_vec(&a, e);
        }
    }
    s
}

/// `T = Σ_a N p_a |⟨φ_a|φ^c⟩|² |⟨φ_a|Ω⟩|²`.
pub fn t_value(phi_c: &PolState, omega: &OmegaState, ensemble: &Ensemble) -> f64 {
    let (c, o) = (phi_c.vector(), omega.vector());
    ensemble
        .states
        .iter()
        .zip(ensemble.weights())
        .map(|(phi, w)| {
            let a = phi.vector();
            w * fidelity_vec(&a, &c) * fidelity_vec(&a, &o)
        })
        .sum()
}

/// Grid maximum of [`t_value`] over pairs of Bloch-sphere points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxT {
    pub value: f64,
    /// Every grid pair `(φ^c, Ω)` within `ARGMAX_TOLERANCE` of the maximum.
    pub argmax: Vec<(PolState, PolState)>,
    /// Upper bound on how far the true maximum can lie above `value`.
    pub grid_tolerance: f64,
    pub points: usize,
}

/// Pairs this close to the grid maximum are all reported as maximizers.
pub const ARGMAX_TOLERANCE: f64 = 1e-9;

/// Bloch grid with `resolution` polar rings and `resolution` azimuths per
/// ring; the poles appear once.
pub fn bloch_grid(resolution: usize) -> Vec<PolState> {
    let n = resolution;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let theta = std::f64::consts::PI * i as f64 / (n - 1) as f64;
        let (s, c) = (theta / 2.0).sin_cos();
        let azimuths = if i == 0 || i == n - 1 { 1 } else { n };
        for j in 0..azimuths {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            let v = Complex64::from_polar(s, phi);
            out.push(PolState::new(v, Complex64::new(c, 0.0)).expect("unit vector"));
        }
    }
    out
}

/// Exhaustive grid search for `max T` over both states.
///
/// `T(i, j) = Σ_a w_a q_a(i) q_a(j)` with `q_a = |⟨φ_a|·⟩|²`, so Cauchy–Schwarz
/// gives `T(i, j) ≤ ‖q(i)‖ ‖q(j)‖` in the `w`-weighted norm. Pairs are visited
/// in decreasing bound order and the scan of a row stops once the bound
/// drops below the running maximum; no pair that could reach it is skipped.
pub fn max_t(ensemble: &Ensemble, resolution: usize) -> Result<MaxT> {
    if resolution < 64 {
        return Err(Error::Precondition(format!(
            "grid resolution {resolution} is below 64"
        )));
    }
    let grid = bloch_grid(resolution);
    let weights = ensemble.weights();
    let q: Vec<Vec<f64>> = grid
        .iter()
        .map(|pt| {
            let v = pt.vector();
            ensemble
                .states
                .iter()
                .map(|phi| fidelity_vec(&phi.vector(), &v))
                .collect()
        })
        .collect();
    let norm = |x: &[f64]| x.iter().zip(&weights).map(|(a, w)| w * a * a).sum::<f64>().sqrt();
    let norms: Vec<f64> = q.iter().map(|x| norm(x)).collect();
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|a, b| norms[*b].total_cmp(&norms[*a]).then(a.cmp(b)));

    let t = |i: usize, j: usize| -> f64 {
        q[i].iter()
            .zip(&q[j])
            .zip(&weights)
            .map(|((a, b), w)| w * a * b)
            .sum()
    };

    let mut best = f64::NEG_INFINITY;
    let mut hits: Vec<(usize, usize, f64)> = Vec::new();
    for &i in &order {
        if norms[i] * norms[order[0]] < best - ARGMAX_TOLERANCE {
            break;
        }
        for &j in &order {
            if norms[i] * norms[j] < best - ARGMAX_TOLERANCE {
                break;
            }
            let v = t(i, j);
            if v > best {
                best = v;
                hits.retain(|h| h.2 >= best - ARGMAX_TOLERANCE);
            }
            if v >= best - ARGMAX_TOLERANCE {
                hits.push((i, j, v));
            }
        }
    }
    hits.sort_by_key(|h| (h.0, h.1));

    let n = resolution as f64;
    let h_polar = std::f64::consts::PI / (n - 1.0);
    let h_azimuth = 2.0 * std::f64::consts::PI / n;
    let d2 = (h_polar / 2.0).powi(2) + (h_azimuth / 2.0).powi(2);
    let total_weight: f64 = weights.iter().sum();

    Ok(MaxT {
        value: best,
        argmax: hits.iter().map(|h| (grid[h.0], grid[h.1])).collect(),
        // T has second derivative at most 2 Σw along unit-speed paths in the
        // pair space, and every pair lies within √2·d of a grid pair.
        grid_tolerance: 2.0 * total_weight * d2,
        points: grid.len(),
    })
}

/// Best strategy found by [`optimize_strategy`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Optimized {
    pub strategy: ClassicalStrategy,
    pub s: f64,
    /// Index of the restart that produced the strategy.
    pub restart: usize,
}

pub const DEFAULT_RESTARTS: usize = 50;
const MAX_ITERATIONS: usize = 2000;

/// Projected ascent over effects and resend states with random restarts.
///
/// Each iteration sets every resend state to the top eigenvector of
/// `A_l = Σ_a p_a |⟨φ_a|ε_l⟩|² |φ_a⟩⟨φ_a|`, then steps the effects along
/// `B_l ε_l` with `B_l = Σ_a p_a |⟨φ_a|φ^c_l⟩|² |φ_a⟩⟨φ_a|` and restores
/// completeness with `ε_l ← G^{-1/2} ε_l`, `G = Σ_l |ε_l⟩⟨ε_l|`. Steps that lower
/// S are halved. Restart seeds are drawn from `rng` up front, so the result
/// does not depend on how restarts are scheduled.
pub fn optimize_strategy<R: Rng + ?Sized>(
    ensemble: &Ensemble,
    outcomes: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<Optimized> {
    if !(2..=8).contains(&outcomes) {
        return Err(Error::Precondition(format!(
            "outcome count {outcomes} outside [2, 8]"
        )));
    }
    if restarts < 20 {
        return Err(Error::Precondition(format!("{restarts} restarts, need at least 20")));
    }
    let seeds: Vec<u64> = (0..restarts).map(|_| rng.random()).collect();
    let runs: Vec<(Vec<JonesVector>, Vec<JonesVector>, f64)> = seeds
        .par_iter()
        .map(|seed| ascend(ensemble, outcomes, &mut ChaCha8Rng::seed_from_u64(*seed)))
        .collect();

    let (restart, (effects, resend, _)) = runs
        .into_iter()
        .enumerate()
        .reduce(|best, cur| if cur.1 .2 > best.1 .2 { cur } else { best })
        .expect("at least one restart");
    let resend = resend
        .iter()
        .map(PolState::from_vector)
        .collect::<Result<Vec<_>>>()?;
    let strategy = ClassicalStrategy::new(Povm::new(effects), resend)?;
    let s = s_value(&strategy, ensemble)?;
    Ok(Optimized {
        strategy,
        s,
        restart,
    })
}

fn projector_sum(ensemble: &Ensemble, weight: impl Fn(&JonesVector) -> f64) -> Jones {
    ensemble
        .states
        .iter()
        .zip(&ensemble.probs)
        .fold(Jones::zeros(), |acc, (phi, p)| {
            let a = phi.vector();
            acc + a * a.adjoint() * Complex64::new(p * weight(&a), 0.0)
        })
}

fn top_eigenvector(m: &Jones) -> JonesVector {
    let eig = m.symmetric_eigen();
    let k = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
    let v: JonesVector = eig.eigenvectors.column(k).into_owned();
    v / Complex64::new(v.norm(), 0.0)
}

/// `ε_l ← G^{-1/2} ε_l`; `None` if the effects do not span the space.
fn repair(effects: &[JonesVector]) -> Option<Vec<JonesVector>> {
    let gram = effects
        .iter()
        .fold(Jones::zeros(), |acc, e| acc + e * e.adjoint());
    let eig = gram.symmetric_eigen();
    if eig.eigenvalues.iter().any(|l| l.is_nan() || *l <= 1e-12) {
        return None;
    }
    let inv_sqrt = Jones::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(l.powf(-0.5), 0.0)));
    let g = eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
    Some(effects.iter().map(|e| g * e).collect())
}

fn best_resend(ensemble: &Ensemble, effects: &[JonesVector]) -> Vec<JonesVector> {
    effects
        .iter()
        .map(|e| top_eigenvector(&projector_sum(ensemble, |a| fidelity_vec(a, e))))
        .collect()
}

fn random_effects<R: Rng + ?Sized>(outcomes: usize, rng: &mut R) -> Vec<JonesVector> {
    let mut draw = || Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    (0..outcomes).map(|_| Vector2::new(draw(), draw())).collect()
}

fn ascend<R: Rng + ?Sized>(
    ensemble: &Ensemble,
    outcomes: usize,
    rng: &mut R,
) -> (Vec<JonesVector>, Vec<JonesVector>, f64) {
    let mut effects = loop {
        if let Some(e) = repair(&random_effects(outcomes, rng)) {
            break e;
        }
    };
    let mut resend = best_resend(ensemble, &effects);
    let mut s = raw_s(&effects, &resend, ensemble);
    let mut eta = 1.0;
    let mut stalled = 0;
    for _ in 0..MAX_ITERATIONS {
        let stepped: Vec<JonesVector> = effects
            .iter()
            .zip(&resend)
            .map(|(e, r)| {
                let b = projector_sum(ensemble, |a| fidelity_vec(a, r));
                e + b * e * Complex64::new(eta, 0.0)
            })
            .collect();
        let Some(candidate) = repair(&stepped) else {
            eta *= 0.5;
            continue;
        };
        let cand_resend = best_resend(ensemble, &candidate);
        let cand_s = raw_s(&candidate, &cand_resend, ensemble);
        if cand_s >= s {
            stalled = if cand_s - s < 1e-14 { stalled + 1 } else { 0 };
            effects = candidate;
            resend = cand_resend;
            s = cand_s;
            eta = (eta * 1.5).min(16.0);
            if stalled >= 5 {
                break;
            }
        } else {
            eta *= 0.5;
            if eta < 1e-12 {
                break;
            }
        }
    }
    (effects, resend, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pol(v: (f64, f64, f64, f64)) -> PolState {
        let n = (v.0 * v.0 + v.1 * v.1 + v.2 * v.2 + v.3 * v.3).sqrt();
        PolState::new(c(v.0 / n, v.1 / n), c(v.2 / n, v.3 / n)).unwrap()
    }

    fn pol_strategy() -> impl Strategy<Value = PolState> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("nonzero", |v| v.0 * v.0 + v.1 * v.1 + v.2 * v.2 + v.3 * v.3 > 1e-3)
            .prop_map(pol)
    }

    fn random_strategy(seed: u64, outcomes: usize) -> ClassicalStrategy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let effects = repair(&random_effects(outcomes, &mut rng)).unwrap();
        let resend = (0..outcomes)
            .map(|_| {
                let e = random_effects(1, &mut rng)[0];
                PolState::from_vector(&(e / c(e.norm(), 0.0))).unwrap()
            })
            .collect();
        ClassicalStrategy::new(Povm::new(effects), resend).unwrap()
    }

    #[test]
    fn trine_is_valid_ensemble() {
        let e = Ensemble::trine();
        assert_eq!(e.len(), 3);
        assert!((e.probs().iter().sum::<f64>() - 1.0).abs() < EPS);
        assert_eq!(e.weights(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn ensemble_rejects_bad_probs() {
        let s = vec![PolState::vertical(), PolState::horizontal()];
        assert!(Ensemble::new(s.clone(), vec![0.5, 0.6]).is_err());
        assert!(Ensemble::new(s.clone(), vec![1.5, -0.5]).is_err());
        assert!(Ensemble::new(s, vec![1.0]).is_err());
        assert!(Ensemble::uniform(vec![]).is_err());
    }

    #[test]
    fn ensemble_serde_round_trip() {
        let e = Ensemble::trine();
        let back: Ensemble = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        for (a, b) in e.states().iter().zip(back.states()) {
            assert!((a.alpha() - b.alpha()).norm() < EPS && (a.beta() - b.beta()).norm() < EPS);
        }
        assert!(serde_json::from_str::<Ensemble>(r#"{"states":[],"probs":[]}"#).is_err());
    }

    #[test]
    fn t_value_parallel_in_plane() {
        let p = PolState::linear(0.0);
        let t = t_value(&p, &OmegaState::from_pol(&p), &Ensemble::trine());
        assert!((t - 1.125).abs() < EPS);
    }

    #[test]
    fn t_value_orthogonal_in_plane() {
        // Σ_a cos²θ_a sin²θ_a = 0 + 3/16 + 3/16
        let t = t_value(
            &PolState::linear(90.0),
            &OmegaState::from_pol(&PolState::linear(0.0)),
            &Ensemble::trine(),
        );
        assert!((t - 0.375).abs() < EPS);
    }

    #[test]
    fn t_value_circular_resend() {
        // every linear state overlaps a circular one with probability 1/2
        let circ = PolState::new(c(0.0, std::f64::consts::FRAC_1_SQRT_2), c(std::f64::consts::FRAC_1_SQRT_2, 0.0)).unwrap();
        let t = t_value(&circ, &OmegaState::from_pol(&PolState::linear(0.0)), &Ensemble::trine());
        assert!((t - 0.75).abs() < EPS);
    }

    #[test]
    fn orthonormal_basis_is_valid() {
        let d = validate_povm(&Povm::linear_basis(0.0));
        assert!(d.valid && d.completeness_residual < EPS && d.mu_sum_deviation.abs() < EPS);
    }

    #[test]
    fn trine_povm_is_valid() {
        let d = validate_povm(&Povm::trine());
        assert!(d.valid, "{d:?}");
        assert!(d.completeness_residual < EPS);
    }

    #[test]
    fn duplicate_effects_flagged() {
        let v = PolState::vertical().vector();
        let d = validate_povm(&Povm::new(vec![v, v]));
        assert!(!d.valid);
        assert!(d.completeness_residual > 0.5);
        let s = ClassicalStrategy::new(Povm::new(vec![v, v]), vec![PolState::vertical(); 2]).unwrap();
        assert!(matches!(s_value(&s, &Ensemble::trine()), Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn strategy_length_mismatch() {
        assert!(ClassicalStrategy::new(Povm::trine(), vec![PolState::vertical()]).is_err());
    }

    #[test]
    fn measure_and_resend_linear_bases() {
        for k in 0..36 {
            let theta = 5.0 * k as f64;
            let s = ClassicalStrategy::measure_and_resend(Povm::linear_basis(theta)).unwrap();
            let v = s_value(&s, &Ensemble::trine()).unwrap();
            assert!((v - 0.75).abs() < 1e-9, "{theta}: {v}");
        }
    }

    #[test]
    fn measure_and_resend_trine_povm() {
        // (1/3)·Σ_l (2/3)·(9/8) = 3/4
        let s = ClassicalStrategy::measure_and_resend(Povm::trine()).unwrap();
        assert!((s_value(&s, &Ensemble::trine()).unwrap() - 0.75).abs() < EPS);
    }

    #[test]
    fn strategy_serde_round_trip() {
        let s = ClassicalStrategy::measure_and_resend(Povm::trine()).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: ClassicalStrategy = serde_json::from_str(&json).unwrap();
        let a = s_value(&s, &Ensemble::trine()).unwrap();
        let b = s_value(&back, &Ensemble::trine()).unwrap();
        assert!((a - b).abs() < EPS);
    }

    #[test]
    fn grid_has_deduplicated_poles() {
        let g = bloch_grid(64);
        assert_eq!(g.len(), 62 * 64 + 2);
        assert!((g[0].alpha().norm()) < EPS);
        assert!((g.last().unwrap().beta().norm()) < 1e-15);
    }

    #[test]
    fn max_t_rejects_coarse_grid() {
        assert!(max_t(&Ensemble::trine(), 32).is_err());
    }

    #[test]
    fn max_t_trine() {
        let m = max_t(&Ensemble::trine(), 128).unwrap();
        assert!((m.value - 1.125).abs() < 2e-3, "{}", m.value);
        assert!(!m.argmax.is_empty());
        for (phi_c, omega) in &m.argmax {
            // maximizers are equal, linearly polarized pairs
            assert!(fidelity_vec(&phi_c.vector(), &omega.vector()) > 1.0 - 1e-9);
            let v = phi_c.vector();
            let rel = v[0] * v[1].conj();
            assert!(rel.im.abs() < 1e-9, "{phi_c:?}");
        }
    }

    #[test]
    fn max_t_trine_degenerate_along_linear_states() {
        // Σ_a cos⁴(θ − θ_a) = 9/8 for every θ, so every linear grid state
        // paired with itself is a maximizer: two meridians of 126 interior
        // rings plus the two poles.
        let m = max_t(&Ensemble::trine(), 128).unwrap();
        assert_eq!(m.argmax.len(), 2 * 126 + 2);
    }

    #[test]
    fn max_t_single_state() {
        let e = Ensemble::new(vec![PolState::vertical()], vec![1.0]).unwrap();
        let m = max_t(&e, 64).unwrap();
        assert!((m.value - 1.0).abs() < EPS);
        assert_eq!(m.argmax.len(), 1);
        let (phi_c, omega) = m.argmax[0];
        assert!((phi_c.alpha().norm() - 1.0).abs() < EPS && (omega.alpha().norm() - 1.0).abs() < EPS);
    }

    #[test]
    fn max_t_two_orthogonal_states() {
        // T = xy + (1−x)(1−y) with x, y the v-populations: max 1 at x = y ∈ {0, 1}
        let e = Ensemble::uniform(vec![PolState::vertical(), PolState::horizontal()]).unwrap();
        let m = max_t(&e, 64).unwrap();
        assert!((m.value - 1.0).abs() < EPS);
        assert_eq!(m.argmax.len(), 2);
    }

    #[test]
    fn max_t_matches_naive_scan() {
        let ens = Ensemble::new(
            vec![PolState::linear(10.0), pol((0.3, 0.2, -0.5, 0.7)), PolState::linear(-70.0)],
            vec![0.5, 0.3, 0.2],
        )
        .unwrap();
        let grid = bloch_grid(64);
        let mut best = f64::NEG_INFINITY;
        for a in &grid {
            for b in &grid {
                best = best.max(t_value(a, &OmegaState::from_pol(b), &ens));
            }
        }
        let m = max_t(&ens, 64).unwrap();
        assert!((m.value - best).abs() < EPS, "{} vs {best}", m.value);
    }

    #[test]
    fn max_t_converges() {
        let a = max_t(&Ensemble::trine(), 128).unwrap();
        let b = max_t(&Ensemble::trine(), 256).unwrap();
        assert!((a.value - b.value).abs() < 5e-3);
        assert!(b.grid_tolerance < a.grid_tolerance);
    }

    #[test]
    fn optimizer_trine_two_outcomes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let o = optimize_strategy(&Ensemble::trine(), 2, DEFAULT_RESTARTS, &mut rng).unwrap();
        assert!(o.s >= 0.749 && o.s <= 0.75 + 1e-6, "{}", o.s);
        assert!(validate_povm(&o.strategy.povm).valid);
    }

    #[test]
    fn optimizer_trine_four_outcomes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let o = optimize_strategy(&Ensemble::trine(), 4, DEFAULT_RESTARTS, &mut rng).unwrap();
        assert!((o.s - 0.75).abs() < 1e-3, "{}", o.s);
        assert!(o.s <= 0.75 + 1e-6);
    }

    #[test]
    fn optimizer_single_state() {
        let e = Ensemble::new(vec![PolState::linear(33.0)], vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let o = optimize_strategy(&e, 2, 20, &mut rng).unwrap();
        assert!((o.s - 1.0).abs() < 1e-9, "{}", o.s);
    }

    #[test]
    fn optimizer_is_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(44);
            optimize_strategy(&Ensemble::trine(), 3, 20, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn optimizer_preconditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(optimize_strategy(&Ensemble::trine(), 1, 50, &mut rng).is_err());
        assert!(optimize_strategy(&Ensemble::trine(), 9, 50, &mut rng).is_err());
        assert!(optimize_strategy(&Ensemble::trine(), 2, 10, &mut rng).is_err());
    }

    #[test]
    fn repair_restores_completeness() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let e = repair(&random_effects(5, &mut rng)).unwrap();
        assert!(validate_povm(&Povm::new(e)).valid);
        let v = PolState::vertical().vector();
        assert!(repair(&[v, v * c(2.0, 0.0)]).is_none());
    }

    proptest! {
        #[test]
        fn fixed_resend_gives_one_half(seed in any::<u64>(), outcomes in 2usize..=8, chi in pol_strategy()) {
            let mut s = random_strategy(seed, outcomes);
            s.resend = vec![chi; outcomes];
            prop_assert!((s_value(&s, &Ensemble::trine()).unwrap() - 0.5).abs() < 1e-12);
        }

        #[test]
        fn elliptical_basis_loses_fidelity(basis in pol_strategy()) {
            // on the Bloch sphere S = 1/2 + |n_plane|²/4, the plane being
            // the one spanned by real (linear) states
            let v = basis.vector();
            let n_y = 2.0 * (v[0] * v[1].conj()).im;
            let want = 0.5 + (1.0 - n_y * n_y) / 4.0;
            let s = ClassicalStrategy::measure_and_resend(Povm::basis(&basis)).unwrap();
            prop_assert!((s_value(&s, &Ensemble::trine()).unwrap() - want).abs() < 1e-12);
        }

        #[test]
        fn appendix_factorization(seed in any::<u64>(), outcomes in 2usize..=8) {
            let s = random_strategy(seed, outcomes);
            let ens = Ensemble::trine();
            let direct = s_value(&s, &ens).unwrap();
            let via_t: f64 = (0..outcomes)
                .map(|l| {
                    let omega = s.povm.omega(l).unwrap();
                    s.povm.mu(l) / 3.0 * t_value(&s.resend[l], &omega, &ens)
                })
                .sum();
            prop_assert!((direct - via_t).abs() < 1e-12);
        }

        #[test]
        fn random_strategies_respect_bound(seed in any::<u64>(), outcomes in 2usize..=8) {
            let s = random_strategy(seed, outcomes);
            prop_assert!(s_value(&s, &Ensemble::trine()).unwrap() <= 0.75 + 1e-9);
            let tuned = ClassicalStrategy::measure_and_resend(s.povm.clone()).unwrap();
            prop_assert!(s_value(&tuned, &Ensemble::trine()).unwrap() <= 0.75 + 1e-9);
        }

        #[test]
        fn validity_survives_common_unitary(seed in any::<u64>(), outcomes in 2usize..=8, a in pol_strategy(), phase in 0.0f64..6.3) {
            let s = random_strategy(seed, outcomes);
            let (x, y) = (a.alpha(), a.beta());
            let u = Jones::new(x, -y.conj(), y, x.conj()) * Complex64::from_polar(1.0, phase);
            let rotated = Povm::new(s.povm.effects().iter().map(|e| u * e).collect());
            let d = validate_povm(&rotated);
            prop_assert!(d.valid);
            prop_assert!(d.mu_sum_deviation.abs() < 1e-9);
        }
    }
}
