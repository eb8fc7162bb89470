//! The teleportation pipeline: EPR source, preparation of the unknown
//! polarization state, Alice's Bell-analog measurement, Bob's conditional
//! state and its verification.
//!
//! Photon 1 carries the unknown state in its polarization; the EPR resource
//! is the path entanglement `(|a1 a2⟩ + |b1 b2⟩)/√2`. Alice's four outcomes
//! are
//!
//! ```text
//! |c±⟩ = (|a1,v⟩ ± |b1,h⟩)/√2      |d±⟩ = (|a1,h⟩ ± |b1,v⟩)/√2
//! ```
//!
//! After a 90° rotation on b1 and a 50:50 beamsplitter, `c±` leaves port
//! A± vertically polarized and `d∓` leaves port A± horizontally polarized.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{
    self, beamsplitter_5050, bob_combiner, on_path, path_modes, phase_delay, polarizer, quarter_wave,
    rotator, vertical, ElementKind, ElementSpec, Jones, JonesVector,
};
use crate::qstate::{
    apply_unitary, partial_inner, project_measure, tensor, Amplitude, BasisLabel, ModeLabel, Path,
    Photon, Pol, PureState, UnitaryOp, TOLERANCE,
};

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Polarization state `α|v⟩ + β|h⟩`.
///
/// Serializes as `{"alpha": [re, im], "beta": [re, im]}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolStateRepr", into = "PolStateRepr")]
pub struct PolState {
    alpha: Amplitude,
    beta: Amplitude,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolStateRepr {
    alpha: Amplitude,
    beta: Amplitude,
}

impl TryFrom<PolStateRepr> for PolState {
    type Error = Error;

    fn try_from(r: PolStateRepr) -> Result<Self> {
        // serialized values are rounded, so accept a looser norm and renormalize
        let norm = (r.alpha.norm_sqr() + r.beta.norm_sqr()).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
            return Err(Error::InvariantViolation(format!(
                "polarization state norm = {norm}, expected 1"
            )));
        }
        Ok(Self {
            alpha: r.alpha / norm,
            beta: r.beta / norm,
        })
    }
}

impl From<PolState> for PolStateRepr {
    fn from(p: PolState) -> Self {
        Self {
            alpha: p.alpha,
            beta: p.beta,
        }
    }
}

impl PolState {
    pub fn new(alpha: Amplitude, beta: Amplitude) -> Result<Self> {
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > TOLERANCE {
            return Err(Error::InvariantViolation(format!(
                "polarization state norm² = {norm}, expected 1"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn from_vector(v: &JonesVector) -> Result<Self> {
        Self::new(v[0], v[1])
    }

    /// `sin θ |v⟩ + cos θ |h⟩`.
    pub fn linear(theta_deg: f64) -> Self {
        let (s, c) = theta_deg.to_radians().sin_cos();
        Self {
            alpha: re(s),
            beta: re(c),
        }
    }

    pub fn vertical() -> Self {
        Self::linear(90.0)
    }

    pub fn horizontal() -> Self {
        Self::linear(0.0)
    }

    pub fn alpha(&self) -> Amplitude {
        self.alpha
    }

    pub fn beta(&self) -> Amplitude {
        self.beta
    }

    pub fn vector(&self) -> JonesVector {
        JonesVector::new(self.alpha, self.beta)
    }

    pub fn apply(&self, jones: &Jones) -> Result<Self> {
        Self::from_vector(&(jones * self.vector()))
    }

    /// Single-photon state on the `(v, h)` modes of one path.
    pub fn to_state(&self, photon: Photon, path: Path) -> PureState {
        PureState::from_modes(&[
            (ModeLabel::new(photon, path, Pol::V), self.alpha),
            (ModeLabel::new(photon, path, Pol::H), self.beta),
        ])
        .expect("PolState is normalized")
    }

    /// A unitary sending `|v⟩` to this state.
    pub fn preparer(&self) -> Jones {
        Jones::new(self.alpha, -self.beta.conj(), self.beta, self.alpha.conj())
    }
}

/// `|⟨φ|φ_tele⟩|²`.
pub fn fidelity(prepared: &PolState, teleported: &PolState) -> f64 {
    prepared.vector().dotc(&teleported.vector()).norm_sqr()
}

/// Alice's four Bell-analog outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellOutcome {
    #[serde(rename = "c+")]
    CPlus,
    #[serde(rename = "c-")]
    CMinus,
    #[serde(rename = "d+")]
    DPlus,
    #[serde(rename = "d-")]
    DMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::CPlus,
        BellOutcome::CMinus,
        BellOutcome::DPlus,
        BellOutcome::DMinus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BellOutcome::CPlus => "c+",
            BellOutcome::CMinus => "c-",
            BellOutcome::DPlus => "d+",
            BellOutcome::DMinus => "d-",
        }
    }

    /// Detector port and polarizer setting that register this outcome.
    pub fn detector(self) -> (Path, Pol) {
        match self {
            BellOutcome::CPlus => (Path::PortPlus, Pol::V),
            BellOutcome::CMinus => (Path::PortMinus, Pol::V),
            BellOutcome::DPlus => (Path::PortMinus, Pol::H),
            BellOutcome::DMinus => (Path::PortPlus, Pol::H),
        }
    }

    pub fn from_detector(port: Path, pol: Pol) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|o| o.detector() == (port, pol))
            .ok_or_else(|| Error::Precondition(format!("{port:?} is not one of Alice's ports")))
    }
}

impl fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BellOutcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| Error::Precondition(format!("unknown outcome {s:?}")))
    }
}

/// Preparer settings.
///
/// Without a quarter-wave plate the prepared state is `LinearPol(theta)`;
/// the rotator turns the source `|v⟩` by `theta − 90°`. With a plate at
/// `gamma` the source passes the plate first and is then rotated by
/// `theta`, so `theta = 0` gives `[(1 + i cos 2γ)|v⟩ + sin 2γ |h⟩]/√2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepSpec {
    pub theta_deg: f64,
    #[serde(default)]
    pub gamma_deg: Option<f64>,
}

impl PrepSpec {
    pub fn linear(theta_deg: f64) -> Self {
        Self {
            theta_deg,
            gamma_deg: None,
        }
    }

    pub fn elliptical(theta_deg: f64, gamma_deg: f64) -> Self {
        Self {
            theta_deg,
            gamma_deg: Some(gamma_deg),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta_deg.is_finite() || self.gamma_deg.is_some_and(|g| !g.is_finite()) {
            return Err(Error::Precondition("preparation angles must be finite".into()));
        }
        Ok(())
    }

    /// Physical rotation applied by the preparer's rotator.
    pub fn rotation_deg(&self) -> f64 {
        match self.gamma_deg {
            None => self.theta_deg - 90.0,
            Some(_) => self.theta_deg,
        }
    }

    /// The preparer's Jones matrix acting on the source polarization `|v⟩`.
    pub fn preparer(&self) -> Jones {
        let r = rotator(self.rotation_deg());
        match self.gamma_deg {
            None => r,
            Some(g) => r * quarter_wave(g),
        }
    }

    /// The state to be teleported.
    pub fn prepared_state(&self) -> PolState {
        PolState::from_vector(&(self.preparer() * vertical())).expect("unitary preparer")
    }

    /// Preparer elements placed identically on a1 and b1.
    pub fn elements(&self) -> Vec<ElementSpec> {
        let paths = [Path::A, Path::B];
        let mut out = Vec::new();
        if let Some(g) = self.gamma_deg {
            out.push(ElementSpec::new(ElementKind::Qwp, g, Photon::One, &paths));
        }
        out.push(ElementSpec::new(ElementKind::Rotator, self.rotation_deg(), Photon::One, &paths));
        out
    }
}

/// Bob's analyzer: optional quarter-wave plate at `gamma_b_deg` from the
/// vertical, then a linear analyzer passing `LinearPol(theta_b_deg)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifierSetting {
    pub gamma_b_deg: Option<f64>,
    pub theta_b_deg: f64,
}

impl VerifierSetting {
    pub fn linear(theta_b_deg: f64) -> Self {
        Self {
            gamma_b_deg: None,
            theta_b_deg,
        }
    }

    /// Same plate, analyzer rotated by 90°.
    pub fn perpendicular(&self) -> Self {
        Self {
            gamma_b_deg: self.gamma_b_deg,
            theta_b_deg: self.theta_b_deg + 90.0,
        }
    }

    pub fn with_theta(&self, theta_b_deg: f64) -> Self {
        Self {
            gamma_b_deg: self.gamma_b_deg,
            theta_b_deg,
        }
    }
}

/// Probability that Bob's photon in `state` clicks `D_B(θ_B)`.
///
/// The analyzer is modeled as the plate, a rotator by `−θ_B` and a polarizer
/// passing `h`, so a photon in `LinearPol(θ_B)` always passes.
pub fn analyzer_transmission(state: &PolState, setting: &VerifierSetting) -> f64 {
    let mut v = state.vector();
    if let Some(g) = setting.gamma_b_deg {
        v = quarter_wave(g) * v;
    }
    v = rotator(-setting.theta_b_deg) * v;
    v[1].norm_sqr()
}

/// All 16 two-photon labels `(photon-1 mode) × (photon-2 mode)` before detection.
pub fn two_photon_basis() -> Vec<BasisLabel> {
    let mut basis = Vec::with_capacity(16);
    for m1 in path_modes(Photon::One) {
        for m2 in path_modes(Photon::Two) {
            basis.push(BasisLabel::pair(m1, m2).expect("distinct photons"));
        }
    }
    basis
}

fn state_from_terms(terms: &[(ModeLabel, ModeLabel, Amplitude)]) -> Result<PureState> {
    let basis = two_photon_basis();
    let mut amps = vec![Amplitude::default(); basis.len()];
    for (m1, m2, a) in terms {
        let label = BasisLabel::pair(*m1, *m2)?;
        let i = basis.iter().position(|l| *l == label).expect("complete basis");
        amps[i] += a;
    }
    PureState::new(basis, amps)
}

fn mode(photon: Photon, path: Path, pol: Pol) -> ModeLabel {
    ModeLabel::new(photon, path, pol)
}

/// The down-converted pair before the calcite crystals:
/// `(|v⟩₁|h⟩₂ + |h⟩₁|v⟩₂)/√2`, both photons on path a.
pub fn source_pair() -> PureState {
    let r = re(std::f64::consts::FRAC_1_SQRT_2);
    state_from_terms(&[
        (mode(Photon::One, Path::A, Pol::V), mode(Photon::Two, Path::A, Pol::H), r),
        (mode(Photon::One, Path::A, Pol::H), mode(Photon::Two, Path::A, Pol::V), r),
    ])
    .expect("normalized by construction")
}

/// The path-entangled resource `(|a1 a2⟩ + |b1 b2⟩)/√2 · |v⟩₁|h⟩₂`.
pub fn make_epr() -> PureState {
    optics::calcite_encode_state(&source_pair()).expect("source pair is on path a")
}

/// Prepares photon 1's polarization on both of its paths.
pub fn prepare_unknown(spec: &PrepSpec, epr: &PureState) -> Result<(PureState, PolState)> {
    spec.validate()?;
    let joint = apply_preparer(&spec.preparer(), epr)?;
    Ok((joint, spec.prepared_state()))
}

/// Prepares an arbitrary polarization state on photon 1.
pub fn prepare_pol(pol: &PolState, epr: &PureState) -> Result<PureState> {
    apply_preparer(&pol.preparer(), epr)
}

fn apply_preparer(jones: &Jones, epr: &PureState) -> Result<PureState> {
    let reference = make_epr();
    if epr.overlap(&reference).map_or(true, |o| (o - 1.0).abs() > TOLERANCE) {
        return Err(Error::Precondition("preparer expects the EPR source state".into()));
    }
    let on_a = on_path(Photon::One, Path::A, jones)?;
    let on_b = on_path(Photon::One, Path::B, jones)?;
    apply_unitary(&on_b, &apply_unitary(&on_a, epr)?)
}

/// The four Bell-analog states of photon 1 over its four path modes.
pub fn bell_basis() -> [(BellOutcome, PureState); 4] {
    let basis: Vec<BasisLabel> = path_modes(Photon::One).map(BasisLabel::single).to_vec();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    // order: a1v a1h b1v b1h
    let make = |amps: [f64; 4]| {
        PureState::new(basis.clone(), amps.iter().map(|a| re(*a)).collect()).expect("normalized")
    };
    [
        (BellOutcome::CPlus, make([r, 0.0, 0.0, r])),
        (BellOutcome::CMinus, make([r, 0.0, 0.0, -r])),
        (BellOutcome::DPlus, make([0.0, r, r, 0.0])),
        (BellOutcome::DMinus, make([0.0, r, -r, 0.0])),
    ]
}

/// One term of the joint state written over the Bell-analog basis.
#[derive(Clone, Debug)]
pub struct Branch {
    pub outcome: BellOutcome,
    /// Real, non-negative weight of the branch (1/2 for the ideal source).
    pub coefficient: Amplitude,
    /// Normalized photon-2 path state of the branch.
    pub conditional: PureState,
}

fn check_pretele_shape(joint: &PureState) -> Result<()> {
    if joint.photons() != [Photon::One, Photon::Two] {
        return Err(Error::Shape("expected a two-photon state".into()));
    }
    for p in [Photon::One, Photon::Two] {
        let allowed = path_modes(p);
        if let Some(m) = joint.modes_of(p).iter().find(|m| !allowed.contains(m)) {
            return Err(Error::Shape(format!("mode {m} is not a pre-detection path mode")));
        }
    }
    let amp = |m1: ModeLabel, m2: ModeLabel| -> Amplitude {
        BasisLabel::pair(m1, m2)
            .map(|l| joint.amplitude(&l))
            .unwrap_or_default()
    };
    for pol1 in [Pol::V, Pol::H] {
        for pol2 in [Pol::V, Pol::H] {
            let a1 = mode(Photon::One, Path::A, pol1);
            let b1 = mode(Photon::One, Path::B, pol1);
            let a2 = mode(Photon::Two, Path::A, pol2);
            let b2 = mode(Photon::Two, Path::B, pol2);
            let forbidden = [amp(a1, b2), amp(b1, a2)];
            if forbidden.iter().any(|a| a.norm() > TOLERANCE) {
                return Err(Error::Shape("paths of the two photons are not correlated".into()));
            }
            if pol2 == Pol::V && (amp(a1, a2).norm() > TOLERANCE || amp(b1, b2).norm() > TOLERANCE) {
                return Err(Error::Shape("photon 2 is not horizontally polarized".into()));
            }
            if (amp(a1, a2) - amp(b1, b2)).norm() > TOLERANCE {
                return Err(Error::Shape(
                    "photon-1 polarization differs between paths a1 and b1".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Rewrites a prepared joint state over Alice's Bell-analog basis.
///
/// For the state `(|a1 a2⟩ + |b1 b2⟩)(α|v⟩ + β|h⟩)₁|h⟩₂/√2` every branch
/// has weight 1/2 and the photon-2 states are `α|a2⟩ + β|b2⟩`,
/// `α|a2⟩ − β|b2⟩`, `β|a2⟩ + α|b2⟩`, `β|a2⟩ − α|b2⟩` (all `h`-polarized).
pub fn decompose(joint: &PureState) -> Result<[Branch; 4]> {
    check_pretele_shape(joint)?;
    let branches = bell_basis().map(|(outcome, bell)| {
        let projected = partial_inner(&bell, joint)?;
        let weight = projected.norm_sqr().sqrt();
        Ok(Branch {
            outcome,
            coefficient: re(weight),
            conditional: projected.normalize()?,
        })
    });
    let [a, b, c, d] = branches;
    Ok([a?, b?, c?, d?])
}

/// `Σ coefficient · |bell⟩ ⊗ |conditional⟩`.
pub fn recompose(branches: &[Branch]) -> Result<PureState> {
    let basis = bell_basis();
    let mut acc: Option<PureState> = None;
    for br in branches {
        let (_, bell) = basis
            .iter()
            .find(|(o, _)| *o == br.outcome)
            .expect("every outcome has a Bell state");
        let term = tensor(bell, &br.conditional)?.scaled(br.coefficient);
        acc = Some(match acc {
            None => term,
            Some(s) => s.superpose(&term)?,
        });
    }
    acc.ok_or_else(|| Error::Precondition("no branches".into()))
}

/// The full element chain, from the calcite crystals to Bob's combiner,
/// with both of Alice's polarizers passing `polarizer`.
pub fn apparatus(spec: &PrepSpec, polarizer: Pol) -> Vec<ElementSpec> {
    let ports = [Path::PortPlus, Path::PortMinus];
    let mut chain = vec![
        ElementSpec::new(ElementKind::CalciteEncoder, 0.0, Photon::One, &[Path::A]),
        ElementSpec::new(ElementKind::CalciteEncoder, 0.0, Photon::Two, &[Path::A]),
    ];
    chain.extend(spec.elements());
    chain.extend([
        ElementSpec::new(ElementKind::Rotator, 90.0, Photon::One, &[Path::B]),
        ElementSpec::new(ElementKind::Bs5050, 0.0, Photon::One, &ports),
        ElementSpec::new(
            ElementKind::Polarizer,
            if polarizer == Pol::V { 90.0 } else { 0.0 },
            Photon::One,
            &ports,
        ),
        ElementSpec::new(ElementKind::Rotator, 90.0, Photon::Two, &[Path::B]),
        ElementSpec::new(ElementKind::Pbs, 0.0, Photon::Two, &[Path::A, Path::B]),
    ]);
    chain
}

/// Alice's optics up to the polarizers: the extra 90° rotation on b1, an
/// optional path-length phase error on b1, and the 50:50 beamsplitter.
pub fn alice_optics(phase_error_rad: f64) -> Vec<UnitaryOp> {
    let mut ops = vec![on_path(Photon::One, Path::B, &rotator(90.0)).expect("rotator is unitary")];
    if phase_error_rad != 0.0 {
        ops.push(phase_delay(Photon::One, Path::B, phase_error_rad));
    }
    ops.push(beamsplitter_5050());
    ops
}

/// Deterministic branch of Alice's physical measurement: the probability
/// of a click registering `outcome` and Bob's normalized photon-2 state.
pub fn alice_branch(joint: &PureState, outcome: BellOutcome) -> Result<(f64, PureState)> {
    alice_branch_with_phase(joint, outcome, 0.0)
}

pub fn alice_branch_with_phase(
    joint: &PureState,
    outcome: BellOutcome,
    phase_error_rad: f64,
) -> Result<(f64, PureState)> {
    let (port, pol) = outcome.detector();
    let split = run_alice_optics(joint, phase_error_rad)?;
    let passed = polarizer(pol, Photon::One, &[Path::PortPlus, Path::PortMinus]).apply(&split)?;
    let effect = PureState::basis_vector(
        passed.state.modes_of(Photon::One).into_iter().map(BasisLabel::single).collect(),
        &BasisLabel::single(mode(Photon::One, port, pol)),
    )?;
    let bob = partial_inner(&effect, &passed.state)?;
    let probability = bob.norm_sqr();
    Ok((probability, bob.normalize()?))
}

fn run_alice_optics(joint: &PureState, phase_error_rad: f64) -> Result<PureState> {
    alice_optics(phase_error_rad)
        .iter()
        .try_fold(joint.clone(), |acc, u| apply_unitary(u, &acc))
}

/// A registered click at Alice's side.
#[derive(Clone, Debug)]
pub struct AliceClick {
    pub outcome: BellOutcome,
    pub port: Path,
    pub polarizer: Pol,
    /// Bob's normalized photon-2 state.
    pub collapsed: PureState,
}

/// One trial with both polarizers set to `setting`. Returns `None` when the
/// photon is absorbed by the polarizer.
pub fn alice_measure_with<R: Rng + ?Sized>(
    joint: &PureState,
    setting: Pol,
    rng: &mut R,
) -> Result<Option<AliceClick>> {
    let split = run_alice_optics(joint, 0.0)?;
    let passed = polarizer(setting, Photon::One, &[Path::PortPlus, Path::PortMinus]).apply(&split)?;
    if rng.random::<f64>() >= passed.survival {
        return Ok(None);
    }
    let survivor = passed.state.normalize()?;
    let ports = [Path::PortPlus, Path::PortMinus];
    let basis: Vec<BasisLabel> = survivor
        .modes_of(Photon::One)
        .into_iter()
        .map(BasisLabel::single)
        .collect();
    let effects = ports
        .iter()
        .map(|p| PureState::basis_vector(basis.clone(), &BasisLabel::single(mode(Photon::One, *p, setting))))
        .collect::<Result<Vec<_>>>()?;
    let m = project_measure(&survivor, &effects, rng)?;
    let port = ports[m.index];
    Ok(Some(AliceClick {
        outcome: BellOutcome::from_detector(port, setting)?,
        port,
        polarizer: setting,
        collapsed: m.state,
    }))
}

/// Repeats trials with a randomly chosen polarizer setting until a click.
pub fn alice_measure<R: Rng + ?Sized>(joint: &PureState, rng: &mut R) -> Result<AliceClick> {
    const MAX_TRIALS: usize = 10_000;
    for _ in 0..MAX_TRIALS {
        let setting = if rng.random_bool(0.5) { Pol::V } else { Pol::H };
        if let Some(click) = alice_measure_with(joint, setting, rng)? {
            return Ok(click);
        }
    }
    Err(Error::InvariantViolation(format!(
        "no click at Alice's detectors in {MAX_TRIALS} trials"
    )))
}

/// Runs Bob's photon through the b2 rotation and polarizing beamsplitter
/// and reads the polarization on the common output path.
pub fn bob_conditional(collapsed: &PureState) -> Result<PolState> {
    let out = bob_combiner()
        .iter()
        .try_fold(collapsed.clone(), |acc, u| apply_unitary(u, &acc))?;
    let pick = |path, pol| out.amplitude(&BasisLabel::single(mode(Photon::Two, path, pol)));
    let dumped = pick(Path::Dump, Pol::V).norm_sqr() + pick(Path::Dump, Pol::H).norm_sqr();
    if dumped > TOLERANCE {
        return Err(Error::InvariantViolation(format!(
            "{dumped} of Bob's photon leaves the unused beamsplitter port"
        )));
    }
    PolState::new(pick(Path::Out, Pol::V), pick(Path::Out, Pol::H))
}

/// Bob's state after the combiner for a given outcome, written out directly.
pub fn expected_conditional(outcome: BellOutcome, prepared: &PolState) -> PolState {
    let (a, b) = (prepared.alpha, prepared.beta);
    let (alpha, beta) = match outcome {
        BellOutcome::CPlus => (b, a),
        BellOutcome::CMinus => (-b, a),
        BellOutcome::DPlus => (a, b),
        BellOutcome::DMinus => (-a, b),
    };
    PolState { alpha, beta }
}

/// Active correction restoring the prepared state from Bob's conditional state.
pub fn corrective_unitary(outcome: BellOutcome) -> Jones {
    let (o, l) = (re(0.0), re(1.0));
    match outcome {
        BellOutcome::DPlus => Jones::identity(),
        BellOutcome::CPlus => Jones::new(o, l, l, o),
        BellOutcome::CMinus => Jones::new(o, l, -l, o),
        BellOutcome::DMinus => Jones::new(-l, o, o, l),
    }
}

/// Passive verification: Bob's analyzer setting for each of Alice's outcomes.
///
/// Linear preparations return the analyzer angle of maximum transmission.
/// Elliptical preparations use a plate at `±γ + 90°` (d±) or `±γ` (c±),
/// which turns Bob's state into `|v⟩` or `|h⟩` respectively; this rule
/// holds for `theta = 0` only.
pub fn verifier_setting(outcome: BellOutcome, spec: &PrepSpec) -> Result<VerifierSetting> {
    spec.validate()?;
    let t = spec.theta_deg;
    match spec.gamma_deg {
        None => Ok(VerifierSetting::linear(match outcome {
            BellOutcome::DPlus => t,
            BellOutcome::CPlus => 90.0 - t,
            BellOutcome::CMinus => 90.0 + t,
            BellOutcome::DMinus => -t,
        })),
        Some(g) => {
            if t.abs() > 1e-9 {
                return Err(Error::Precondition(
                    "elliptical verification rule requires theta = 0".into(),
                ));
            }
            let (gamma_b, theta_b) = match outcome {
                BellOutcome::DPlus => (g + 90.0, 90.0),
                BellOutcome::DMinus => (-g + 90.0, 90.0),
                BellOutcome::CPlus => (g, 0.0),
                BellOutcome::CMinus => (-g, 0.0),
            };
            Ok(VerifierSetting {
                gamma_b_deg: Some(gamma_b),
                theta_b_deg: theta_b,
            })
        }
    }
}

/// Folds an angle into `(-90, 90]`, the range an analyzer can distinguish.
pub fn fold_half_turn(deg: f64) -> f64 {
    let r = deg.rem_euclid(180.0);
    if r > 90.0 {
        r - 180.0
    } else {
        r
    }
}

/// Distance between two analyzer angles modulo 180°.
pub fn angle_distance_mod180(a: f64, b: f64) -> f64 {
    fold_half_turn(a - b).abs()
}
