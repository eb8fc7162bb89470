//! Coincidence-count simulation and the estimators built on it.
//!
//! Expected coincidences for one accumulation window are
//!
//! ```text
//! λ = pairs · η_A · η_B · [V · P(outcome, pass) + (1 − V) · P(outcome)/2] + dark
//! ```
//!
//! where `P(outcome, pass)` comes from running the prepared state through
//! Alice's optics and Bob's combiner and analyzer. Realized counts are
//! Poisson samples. Each cell (or sweep point) draws from its own ChaCha
//! stream of the master seed, so results do not depend on scheduling.

use std::io;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::teleport::{
    alice_branch_with_phase, analyzer_transmission, bob_conditional, fold_half_turn, make_epr,
    prepare_pol, verifier_setting, BellOutcome, PolState, PrepSpec, VerifierSetting,
};

/// Imperfections of the apparatus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Weight of the ideal fringe against a flat, unpolarized background.
    pub visibility: f64,
    pub alice_efficiency: f64,
    pub bob_efficiency: f64,
    /// Accidental counts per accumulation window.
    #[serde(default)]
    pub dark_rate: f64,
    /// Standard deviation of the b1 path-length phase, radians; one value is
    /// drawn per window.
    #[serde(default)]
    pub phase_drift_std: f64,
    /// Accumulation window, seconds. Only recorded, it does not scale rates.
    #[serde(default = "default_window")]
    pub window_s: f64,
}

fn default_window() -> f64 {
    1.0
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl NoiseModel {
    pub fn ideal() -> Self {
        Self {
            visibility: 1.0,
            alice_efficiency: 1.0,
            bob_efficiency: 1.0,
            dark_rate: 0.0,
            phase_drift_std: 0.0,
            window_s: 1.0,
        }
    }

    pub fn with_visibility(visibility: f64) -> Self {
        Self {
            visibility,
            ..Self::ideal()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Precondition(format!("noise model: {what}")));
        if !(0.0..=1.0).contains(&self.visibility) {
            return bad("visibility must lie in [0, 1]");
        }
        for eff in [self.alice_efficiency, self.bob_efficiency] {
            if !(eff > 0.0 && eff <= 1.0) {
                return bad("detector efficiencies must lie in (0, 1]");
            }
        }
        if !(self.dark_rate >= 0.0 && self.dark_rate.is_finite()) {
            return bad("dark rate must be nonnegative");
        }
        if !(self.phase_drift_std >= 0.0 && self.phase_drift_std.is_finite()) {
            return bad("phase drift must be nonnegative");
        }
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return bad("window must be positive");
        }
        Ok(())
    }

    /// Coincidences per pair for a click of certainty one on both sides.
    pub fn efficiency(&self) -> f64 {
        self.alice_efficiency * self.bob_efficiency
    }
}

/// Coincidences recorded for one outcome and one analyzer setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    /// Preparation angle θ.
    pub state_deg: f64,
    /// Bob's quarter-wave plate angle, if one is inserted.
    pub gamma_deg: Option<f64>,
    pub outcome: BellOutcome,
    pub theta_b_deg: f64,
    pub count: u64,
    pub window_s: f64,
}

/// Alice's branch probability and Bob's state for one phase error.
#[derive(Clone, Copy, Debug)]
struct Branch {
    probability: f64,
    bob: PolState,
}

fn branch(pol: &PolState, outcome: BellOutcome, phase_rad: f64) -> Result<Branch> {
    let joint = prepare_pol(pol, &make_epr())?;
    let (probability, collapsed) = alice_branch_with_phase(&joint, outcome, phase_rad)?;
    Ok(Branch {
        probability,
        bob: bob_conditional(&collapsed)?,
    })
}

fn lambda(b: &Branch, setting: &VerifierSetting, noise: &NoiseModel, pairs: u64) -> f64 {
    let pass = analyzer_transmission(&b.bob, setting);
    let v = noise.visibility;
    let p = b.probability * (v * pass + (1.0 - v) * 0.5);
    pairs as f64 * noise.efficiency() * p + noise.dark_rate
}

/// Expected coincidences with no phase error.
pub fn expected_count(
    pol: &PolState,
    outcome: BellOutcome,
    setting: &VerifierSetting,
    noise: &NoiseModel,
    pairs: u64,
) -> Result<f64> {
    Ok(lambda(&branch(pol, outcome, 0.0)?, setting, noise, pairs))
}

fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if lambda <= 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(lambda)
        .map_err(|e| Error::InvariantViolation(format!("Poisson rate {lambda}: {e}")))?;
    Ok(d.sample(rng) as u64)
}

/// One window: draws the phase offset, then the count.
fn sample_window<R: Rng + ?Sized>(
    pol: &PolState,
    outcome: BellOutcome,
    setting: &VerifierSetting,
    noise: &NoiseModel,
    pairs: u64,
    still: &Branch,
    rng: &mut R,
) -> Result<u64> {
    let b = if noise.phase_drift_std > 0.0 {
        let phase = Normal::new(0.0, noise.phase_drift_std)
            .expect("validated std")
            .sample(rng);
        branch(pol, outcome, phase)?
    } else {
        *still
    };
    poisson(lambda(&b, setting, noise, pairs), rng)
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Counts for one outcome over a grid of analyzer angles, with Bob's plate
/// (if any) set by [`verifier_setting`].
pub fn simulate_sweep<R: Rng + ?Sized>(
    spec: &PrepSpec,
    outcome: BellOutcome,
    theta_b_grid: &[f64],
    noise: &NoiseModel,
    pairs_per_point: u64,
    rng: &mut R,
) -> Result<Vec<CountRecord>> {
    noise.validate()?;
    if pairs_per_point == 0 {
        return Err(Error::Precondition("pairs per point must be at least 1".into()));
    }
    let base = verifier_setting(outcome, spec)?;
    let pol = spec.prepared_state();
    let still = branch(&pol, outcome, 0.0)?;
    let seed: u64 = rng.random();
    theta_b_grid
        .par_iter()
        .enumerate()
        .map(|(k, theta_b)| {
            let setting = base.with_theta(*theta_b);
            let mut rng = stream(seed, k as u64);
            let count = sample_window(&pol, outcome, &setting, noise, pairs_per_point, &still, &mut rng)?;
            Ok(CountRecord {
                state_deg: spec.theta_deg,
                gamma_deg: setting.gamma_b_deg,
                outcome,
                theta_b_deg: *theta_b,
                count,
                window_s: noise.window_s,
            })
        })
        .collect()
}

/// `I_∥ / (I_∥ + I_⊥)`.
pub fn fidelity_from_counts(i_par: u64, i_perp: u64) -> Result<f64> {
    let n = i_par + i_perp;
    if n == 0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(i_par as f64 / n as f64)
}

/// Parallel and perpendicular counts for one (trine state, outcome) cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCounts {
    pub state_deg: f64,
    pub outcome: BellOutcome,
    pub i_par: u64,
    pub i_perp: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellFidelity {
    pub state_deg: f64,
    pub outcome: BellOutcome,
    pub fidelity: f64,
}

/// Trine-and-outcome average of the per-cell fidelities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SEstimate {
    pub value: f64,
    pub std_err: f64,
    pub per_cell: Vec<CellFidelity>,
}

impl SEstimate {
    /// Standard deviations by which `value` exceeds `bound`.
    pub fn sigma_violation(&self, bound: f64) -> f64 {
        (self.value - bound) / self.std_err
    }
}

/// The classical bound on the trine average.
pub const CLASSICAL_BOUND: f64 = 0.75;

pub const TRINE_DEG: [f64; 3] = [0.0, 120.0, -120.0];

fn trine_index(state_deg: f64) -> Option<usize> {
    TRINE_DEG
        .iter()
        .position(|t| (fold_half_turn(state_deg - t)).abs() < 1e-9)
}

/// Averages the fidelity over the 3 trine states and 4 outcomes.
///
/// Each cell's variance is the posterior variance of a binomial proportion
/// under a Jeffreys prior, `(I_∥ + ½)(I_⊥ + ½)/(n + 1)³`, which stays
/// positive when one of the counts is zero. Cells are independent, so the
/// error of the mean is `√(Σ var)/12`.
pub fn estimate_s(cells: &[CellCounts]) -> Result<SEstimate> {
    let mut seen: [[Option<&CellCounts>; 4]; 3] = [[None; 4]; 3];
    for c in cells {
        let a = trine_index(c.state_deg).ok_or_else(|| {
            Error::IncompleteData(format!("{}° is not a trine state", c.state_deg))
        })?;
        let slot = &mut seen[a][c.outcome.index()];
        if slot.is_some() {
            return Err(Error::IncompleteData(format!(
                "duplicate cell ({}°, {})",
                TRINE_DEG[a], c.outcome
            )));
        }
        *slot = Some(c);
    }
    let mut per_cell = Vec::with_capacity(12);
    let mut var_sum = 0.0;
    for (a, row) in seen.iter().enumerate() {
        for (o, cell) in row.iter().enumerate() {
            let c = cell.ok_or_else(|| {
                Error::IncompleteData(format!(
                    "missing cell ({}°, {})",
                    TRINE_DEG[a],
                    BellOutcome::ALL[o]
                ))
            })?;
            let fidelity = fidelity_from_counts(c.i_par, c.i_perp)?;
            let n = (c.i_par + c.i_perp) as f64;
            var_sum += (c.i_par as f64 + 0.5) * (c.i_perp as f64 + 0.5) / (n + 1.0).powi(3);
            per_cell.push(CellFidelity {
                state_deg: TRINE_DEG[a],
                outcome: c.outcome,
                fidelity,
            });
        }
    }
    let value = per_cell.iter().map(|c| c.fidelity).sum::<f64>() / 12.0;
    Ok(SEstimate {
        value,
        std_err: var_sum.sqrt() / 12.0,
        per_cell,
    })
}

/// Output of the 12-cell trine experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct TrineRun {
    pub cells: Vec<CellCounts>,
    /// Two records per cell: the verifier angle, then the same plus 90°.
    pub records: Vec<CountRecord>,
}

/// Simulates `I_∥` and `I_⊥` for every (trine state, outcome) cell.
///
/// Cell `k` uses stream `k` of `seed`. With unit efficiencies about a
/// quarter of the pairs end in a given outcome, so `pairs_per_setting = 4000`
/// gives roughly 1000 coincidences per cell.
pub fn simulate_trine_experiment(
    noise: &NoiseModel,
    pairs_per_setting: u64,
    seed: u64,
) -> Result<TrineRun> {
    noise.validate()?;
    let cells: Vec<(f64, BellOutcome)> = TRINE_DEG
        .iter()
        .flat_map(|t| BellOutcome::ALL.map(|o| (*t, o)))
        .collect();
    let results: Vec<(CellCounts, [CountRecord; 2])> = cells
        .par_iter()
        .enumerate()
        .map(|(k, (theta, outcome))| {
            let spec = PrepSpec::linear(*theta);
            let pol = spec.prepared_state();
            let still = branch(&pol, *outcome, 0.0)?;
            let par = verifier_setting(*outcome, &spec)?;
            let perp = par.perpendicular();
            let mut rng = stream(seed, k as u64);
            let i_par = sample_window(&pol, *outcome, &par, noise, pairs_per_setting, &still, &mut rng)?;
            let i_perp = sample_window(&pol, *outcome, &perp, noise, pairs_per_setting, &still, &mut rng)?;
            let record = |s: &VerifierSetting, count| CountRecord {
                state_deg: *theta,
                gamma_deg: s.gamma_b_deg,
                outcome: *outcome,
                theta_b_deg: s.theta_b_deg,
                count,
                window_s: noise.window_s,
            };
            Ok((
                CellCounts {
                    state_deg: *theta,
                    outcome: *outcome,
                    i_par,
                    i_perp,
                },
                [record(&par, i_par), record(&perp, i_perp)],
            ))
        })
        .collect::<Result<_>>()?;
    let (cells, records): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(TrineRun {
        cells,
        records: records.into_iter().flatten().collect(),
    })
}

/// Trine average of `λ_∥/(λ_∥ + λ_⊥)` with no phase drift.
pub fn expected_s(noise: &NoiseModel, pairs_per_setting: u64) -> Result<f64> {
    let mut total = 0.0;
    for theta in TRINE_DEG {
        let spec = PrepSpec::linear(theta);
        let pol = spec.prepared_state();
        for o in BellOutcome::ALL {
            let par = verifier_setting(o, &spec)?;
            let lp = expected_count(&pol, o, &par, noise, pairs_per_setting)?;
            let lq = expected_count(&pol, o, &par.perpendicular(), noise, pairs_per_setting)?;
            total += lp / (lp + lq);
        }
    }
    Ok(total / 12.0)
}

/// Weighted least-squares fit of `I(θ) = a + b cos 2θ + c sin 2θ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FringeFit {
    /// `(I_max − I_min)/(I_max + I_min) = √(b² + c²)/a`.
    pub visibility: f64,
    pub visibility_err: f64,
    /// Analyzer angle of maximum count, in `(−90°, 90°]`.
    pub theta_max_deg: f64,
    pub theta_max_err_deg: f64,
    pub mean: f64,
    pub amplitude: f64,
}

impl FringeFit {
    pub fn predict(&self, theta_deg: f64) -> f64 {
        let d = 2.0 * (theta_deg - self.theta_max_deg).to_radians();
        self.mean + self.amplitude * d.cos()
    }
}

const FIT_ITERATIONS: usize = 8;

/// Fits a cosine fringe to a sweep.
///
/// Weights are Poisson, `1/max(Î, 1)` with `Î` the current fitted count,
/// refined over a few iterations. Requires at least 8 distinct settings
/// spanning at least 180°.
pub fn fit_fringe(records: &[CountRecord]) -> Result<FringeFit> {
    let mut angles: Vec<f64> = records.iter().map(|r| r.theta_b_deg).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if angles.len() < 8 {
        return Err(Error::FitFailure(format!(
            "{} distinct analyzer settings, need 8",
            angles.len()
        )));
    }
    let span = angles[angles.len() - 1] - angles[0];
    if span < 180.0 - 1e-9 {
        return Err(Error::FitFailure(format!("settings span {span}°, need 180°")));
    }

    let rows: Vec<(Vector3<f64>, f64)> = records
        .iter()
        .map(|r| {
            let t = 2.0 * r.theta_b_deg.to_radians();
            (Vector3::new(1.0, t.cos(), t.sin()), r.count as f64)
        })
        .collect();
    let mut weights: Vec<f64> = rows.iter().map(|(_, y)| 1.0 / y.max(1.0)).collect();
    let mut beta = Vector3::zeros();
    let mut cov = Matrix3::zeros();
    for _ in 0..FIT_ITERATIONS {
        let mut xtwx = Matrix3::zeros();
        let mut xtwy = Vector3::zeros();
        for ((x, y), w) in rows.iter().zip(&weights) {
            xtwx += x * x.transpose() * *w;
            xtwy += x * (*w * y);
        }
        cov = xtwx
            .try_inverse()
            .ok_or_else(|| Error::FitFailure("singular normal equations".into()))?;
        beta = cov * xtwy;
        weights = rows.iter().map(|(x, _)| 1.0 / x.dot(&beta).max(1.0)).collect();
    }

    let (a, b, c) = (beta[0], beta[1], beta[2]);
    if a.is_nan() || a <= 0.0 {
        return Err(Error::FitFailure(format!("fitted mean count {a} is not positive")));
    }
    let r = b.hypot(c);
    let visibility = r / a;
    let (visibility_err, theta_max_err_deg) = if r > 1e-12 {
        let grad_v = Vector3::new(-r / (a * a), b / (r * a), c / (r * a));
        let grad_t = Vector3::new(0.0, -c / (r * r), b / (r * r)) * 0.5;
        (
            (grad_v.transpose() * cov * grad_v)[0].sqrt(),
            (grad_t.transpose() * cov * grad_t)[0].sqrt().to_degrees(),
        )
    } else {
        ((cov[(1, 1)] + cov[(2, 2)]).sqrt() / a, 90.0)
    };
    Ok(FringeFit {
        visibility,
        visibility_err,
        theta_max_deg: fold_half_turn(0.5 * c.atan2(b).to_degrees()),
        theta_max_err_deg,
        mean: a,
        amplitude: r,
    })
}

/// Fringe visibility of a sweep, from [`fit_fringe`].
pub fn visibility_of(records: &[CountRecord]) -> Result<f64> {
    fit_fringe(records).map(|f| f.visibility)
}

/// `n` analyzer angles evenly spaced from `start` to `stop` inclusive.
pub fn angle_grid(start_deg: f64, stop_deg: f64, step_deg: f64) -> Result<Vec<f64>> {
    if step_deg.is_nan() || step_deg <= 0.0 || stop_deg < start_deg {
        return Err(Error::Precondition("angle grid needs start ≤ stop and step > 0".into()));
    }
    let n = ((stop_deg - start_deg) / step_deg + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start_deg + k as f64 * step_deg).collect())
}

/// Writes records as CSV with a header row.
pub fn write_csv<W: io::Write>(records: &[CountRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let io_err = |e: csv::Error| Error::Precondition(format!("writing CSV: {e}"));
    for r in records {
        w.serialize(r).map_err(io_err)?;
    }
    if records.is_empty() {
        w.write_record(["state_deg", "gamma_deg", "outcome", "theta_b_deg", "count", "window_s"])
            .map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| Error::Precondition(format!("writing CSV: {e}")))
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<CountRecord>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Precondition(format!("reading CSV: {e}")))
}
