//! Labeled state vectors for one or two photons.
//!
//! Every basis vector is a [`BasisLabel`]: one [`ModeLabel`] (path and
//! polarization) per photon present. States are dense over an explicit,
//! ordered label list, at most 16 entries for two photons in four modes
//! each. Operators are [`UnitaryOp`]s acting on the modes of one photon;
//! they may relabel modes (a beamsplitter turns paths into detector ports).
//!
//! Global phase is never normalized away. Compare states with
//! [`PureState::overlap`] when only the ray matters.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability amplitude.
pub type Amplitude = Complex64;

/// Shared tolerance for exact-math checks (normalization, unitarity, orthonormality).
pub const TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Photon {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Photon {
    pub fn number(self) -> u8 {
        match self {
            Photon::One => 1,
            Photon::Two => 2,
        }
    }
}

/// Spatial mode of a photon.
///
/// `A` and `B` are the two entangled paths (a1/b1 for photon 1, a2/b2 for
/// photon 2). The remaining variants only appear after a beamsplitter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Path {
    A,
    B,
    /// Alice's beamsplitter output feeding detector D_A+.
    PortPlus,
    /// Alice's beamsplitter output feeding detector D_A-.
    PortMinus,
    /// Bob's polarizing-beamsplitter output towards the analyzer.
    Out,
    /// The unused polarizing-beamsplitter output.
    Dump,
}

impl Path {
    pub fn is_port(self) -> bool {
        !matches!(self, Path::A | Path::B)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pol {
    V,
    H,
}

impl Pol {
    pub fn orthogonal(self) -> Pol {
        match self {
            Pol::V => Pol::H,
            Pol::H => Pol::V,
        }
    }
}

/// A single-photon mode: which photon, which path, which polarization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeLabel {
    pub photon: Photon,
    pub path: Path,
    pub pol: Pol,
}

impl ModeLabel {
    pub const fn new(photon: Photon, path: Path, pol: Pol) -> Self {
        Self { photon, path, pol }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.photon.number();
        match self.path {
            Path::A => write!(f, "a{n}")?,
            Path::B => write!(f, "b{n}")?,
            Path::PortPlus => write!(f, "A+")?,
            Path::PortMinus => write!(f, "A-")?,
            Path::Out => write!(f, "out{n}")?,
            Path::Dump => write!(f, "dump{n}")?,
        }
        match self.pol {
            Pol::V => write!(f, ",v"),
            Pol::H => write!(f, ",h"),
        }
    }
}

/// One basis vector of a (possibly multi-photon) state: a mode per photon,
/// sorted by photon. The empty label is the no-photon vector left after
/// measuring the last photon.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisLabel(Vec<ModeLabel>);

impl BasisLabel {
    pub fn new(mut modes: Vec<ModeLabel>) -> Result<Self> {
        modes.sort_by_key(|m| m.photon);
        if modes.windows(2).any(|w| w[0].photon == w[1].photon) {
            return Err(Error::LabelCollision(format!(
                "photon appears twice in basis label {}",
                BasisLabel(modes)
            )));
        }
        Ok(Self(modes))
    }

    pub fn single(mode: ModeLabel) -> Self {
        Self(vec![mode])
    }

    pub fn pair(m1: ModeLabel, m2: ModeLabel) -> Result<Self> {
        Self::new(vec![m1, m2])
    }

    pub fn modes(&self) -> &[ModeLabel] {
        &self.0
    }

    pub fn photons(&self) -> impl Iterator<Item = Photon> + '_ {
        self.0.iter().map(|m| m.photon)
    }

    pub fn mode(&self, photon: Photon) -> Option<ModeLabel> {
        self.0.iter().copied().find(|m| m.photon == photon)
    }

    /// The label with `photon` removed.
    pub fn without(&self, photon: Photon) -> BasisLabel {
        BasisLabel(self.0.iter().copied().filter(|m| m.photon != photon).collect())
    }

    /// The label with the mode of `mode.photon` replaced by `mode`.
    pub fn replaced(&self, mode: ModeLabel) -> BasisLabel {
        BasisLabel(
            self.0
                .iter()
                .map(|m| if m.photon == mode.photon { mode } else { *m })
                .collect(),
        )
    }

    fn concat(&self, other: &BasisLabel) -> BasisLabel {
        let mut modes = self.0.clone();
        modes.extend_from_slice(&other.0);
        modes.sort_by_key(|m| m.photon);
        BasisLabel(modes)
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ";")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "⟩")
    }
}

/// A pure state: amplitudes over an ordered list of distinct basis labels.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    basis: Vec<BasisLabel>,
    amps: Vec<Amplitude>,
    normalized: bool,
}

impl PureState {
    /// Builds a normalized state. Fails if the norm deviates from 1 by more
    /// than [`TOLERANCE`].
    pub fn new(basis: Vec<BasisLabel>, amps: Vec<Amplitude>) -> Result<Self> {
        Self::with_tolerance(basis, amps, TOLERANCE)
    }

    pub fn with_tolerance(basis: Vec<BasisLabel>, amps: Vec<Amplitude>, tol: f64) -> Result<Self> {
        let state = Self::build(basis, amps, true)?;
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > tol {
            return Err(Error::InvariantViolation(format!(
                "state norm² = {norm}, expected 1"
            )));
        }
        Ok(state)
    }

    /// Builds a state flagged as unnormalized, e.g. after a polarizer.
    pub fn unnormalized(basis: Vec<BasisLabel>, amps: Vec<Amplitude>) -> Result<Self> {
        Self::build(basis, amps, false)
    }

    /// Normalized single-photon superposition from `(mode, amplitude)` terms.
    pub fn from_modes(terms: &[(ModeLabel, Amplitude)]) -> Result<Self> {
        let (basis, amps) = terms
            .iter()
            .map(|(m, a)| (BasisLabel::single(*m), *a))
            .unzip();
        Self::new(basis, amps)
    }

    /// The basis vector `target` embedded in `basis`.
    pub fn basis_vector(basis: Vec<BasisLabel>, target: &BasisLabel) -> Result<Self> {
        let amps = basis
            .iter()
            .map(|l| if l == target { Amplitude::new(1.0, 0.0) } else { Amplitude::new(0.0, 0.0) })
            .collect();
        Self::new(basis, amps)
    }

    fn build(basis: Vec<BasisLabel>, amps: Vec<Amplitude>, normalized: bool) -> Result<Self> {
        if basis.len() != amps.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} basis labels but {} amplitudes",
                basis.len(),
                amps.len()
            )));
        }
        if basis.is_empty() {
            return Err(Error::DimensionMismatch("empty basis".into()));
        }
        if let Some(a) = amps.iter().find(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvariantViolation(format!("non-finite amplitude {a}")));
        }
        let photons: Vec<Photon> = basis[0].photons().collect();
        for (i, label) in basis.iter().enumerate() {
            if !label.photons().eq(photons.iter().copied()) {
                return Err(Error::DimensionMismatch(format!(
                    "basis label {label} covers different photons than {}",
                    basis[0]
                )));
            }
            if basis[..i].contains(label) {
                return Err(Error::LabelCollision(format!("duplicate basis label {label}")));
            }
        }
        Ok(Self {
            basis,
            amps,
            normalized,
        })
    }

    pub fn basis(&self) -> &[BasisLabel] {
        &self.basis
    }

    pub fn amps(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Amplitude on `label`, zero if the label is not in the basis.
    pub fn amplitude(&self, label: &BasisLabel) -> Amplitude {
        self.position(label)
            .map(|i| self.amps[i])
            .unwrap_or_default()
    }

    pub fn position(&self, label: &BasisLabel) -> Option<usize> {
        self.basis.iter().position(|l| l == label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BasisLabel, &Amplitude)> {
        self.basis.iter().zip(self.amps.iter())
    }

    pub fn photons(&self) -> Vec<Photon> {
        self.basis[0].photons().collect()
    }

    /// Distinct modes occupied by `photon` in the basis, in first-seen order.
    pub fn modes_of(&self, photon: Photon) -> Vec<ModeLabel> {
        let mut out = Vec::new();
        for m in self.basis.iter().filter_map(|l| l.mode(photon)) {
            if !out.contains(&m) {
                out.push(m);
            }
        }
        out
    }

    /// Rescales to unit norm and clears the unnormalized flag.
    pub fn normalize(&self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 {
            return Err(Error::InvariantViolation("cannot normalize the zero vector".into()));
        }
        Ok(Self {
            basis: self.basis.clone(),
            amps: self.amps.iter().map(|a| a / norm).collect(),
            normalized: true,
        })
    }

    pub fn scaled(&self, factor: Amplitude) -> Self {
        Self {
            basis: self.basis.clone(),
            amps: self.amps.iter().map(|a| a * factor).collect(),
            normalized: self.normalized && (factor.norm() - 1.0).abs() <= TOLERANCE,
        }
    }

    /// `|⟨self|other⟩|`; equals 1 for normalized states that agree up to global phase.
    pub fn overlap(&self, other: &PureState) -> Result<f64> {
        inner(self, other).map(|a| a.norm())
    }

    /// Same labels with the amplitudes of `other` added, labels absent from
    /// `self` appended. The result is flagged unnormalized.
    pub fn superpose(&self, other: &PureState) -> Result<Self> {
        if self.photons() != other.photons() {
            return Err(Error::DimensionMismatch("superposing states of different photons".into()));
        }
        let mut basis = self.basis.clone();
        let mut amps = self.amps.clone();
        for (label, amp) in other.iter() {
            match basis.iter().position(|l| l == label) {
                Some(i) => amps[i] += amp,
                None => {
                    basis.push(label.clone());
                    amps.push(*amp);
                }
            }
        }
        Self::unnormalized(basis, amps)
    }
}

impl fmt::Display for PureState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (label, amp) in self.iter().filter(|(_, a)| a.norm() > TOLERANCE) {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i){label}", amp.re, amp.im)?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Tensor product `s1 ⊗ s2` over the product basis (s1 labels outer).
pub fn tensor(s1: &PureState, s2: &PureState) -> Result<PureState> {
    let p1 = s1.photons();
    if let Some(p) = s2.photons().into_iter().find(|p| p1.contains(p)) {
        return Err(Error::LabelCollision(format!(
            "photon {} present in both factors",
            p.number()
        )));
    }
    let mut basis = Vec::with_capacity(s1.dim() * s2.dim());
    let mut amps = Vec::with_capacity(s1.dim() * s2.dim());
    for (l1, a1) in s1.iter() {
        for (l2, a2) in s2.iter() {
            basis.push(l1.concat(l2));
            amps.push(a1 * a2);
        }
    }
    let normalized = s1.normalized && s2.normalized;
    Ok(PureState {
        basis,
        amps,
        normalized,
    })
}

/// `⟨s1|s2⟩`, conjugating `s1`. Both states must have the same label set
/// (order may differ).
pub fn inner(s1: &PureState, s2: &PureState) -> Result<Amplitude> {
    if s1.dim() != s2.dim() || s1.basis.iter().any(|l| s2.position(l).is_none()) {
        return Err(Error::DimensionMismatch(
            "inner product of states over different bases".into(),
        ));
    }
    Ok(s1
        .iter()
        .map(|(label, a)| a.conj() * s2.amplitude(label))
        .sum())
}

/// A linear optical element acting on the modes of a single photon.
///
/// `matrix[(j, i)]` is the amplitude for input mode `inputs[i]` to leave in
/// output mode `outputs[j]`. In-place operators have `inputs == outputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryOp {
    photon: Photon,
    inputs: Vec<ModeLabel>,
    outputs: Vec<ModeLabel>,
    matrix: DMatrix<Complex64>,
}

impl UnitaryOp {
    /// An operator acting in place on `domain`.
    pub fn new(domain: Vec<ModeLabel>, matrix: DMatrix<Complex64>) -> Result<Self> {
        Self::mapping(domain.clone(), domain, matrix)
    }

    /// An operator sending `inputs` to `outputs`.
    pub fn mapping(
        inputs: Vec<ModeLabel>,
        outputs: Vec<ModeLabel>,
        matrix: DMatrix<Complex64>,
    ) -> Result<Self> {
        Self::mapping_with_tolerance(inputs, outputs, matrix, TOLERANCE)
    }

    pub fn mapping_with_tolerance(
        inputs: Vec<ModeLabel>,
        outputs: Vec<ModeLabel>,
        matrix: DMatrix<Complex64>,
        tol: f64,
    ) -> Result<Self> {
        let n = inputs.len();
        if n == 0 || outputs.len() != n || matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for {} inputs and {} outputs",
                matrix.nrows(),
                matrix.ncols(),
                n,
                outputs.len()
            )));
        }
        let photon = inputs[0].photon;
        if inputs.iter().chain(&outputs).any(|m| m.photon != photon) {
            return Err(Error::Precondition("operator spans more than one photon".into()));
        }
        for modes in [&inputs, &outputs] {
            for (i, m) in modes.iter().enumerate() {
                if modes[..i].contains(m) {
                    return Err(Error::LabelCollision(format!("mode {m} listed twice")));
                }
            }
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvariantViolation("non-finite matrix entry".into()));
        }
        let deviation = unitarity_residual(&matrix);
        if deviation > tol {
            return Err(Error::InvariantViolation(format!(
                "matrix is not unitary: max |U†U - I| = {deviation:e}"
            )));
        }
        Ok(Self {
            photon,
            inputs,
            outputs,
            matrix,
        })
    }

    pub fn photon(&self) -> Photon {
        self.photon
    }

    pub fn inputs(&self) -> &[ModeLabel] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[ModeLabel] {
        &self.outputs
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// The inverse operator, mapping outputs back to inputs.
    pub fn adjoint(&self) -> Self {
        Self {
            photon: self.photon,
            inputs: self.outputs.clone(),
            outputs: self.inputs.clone(),
            matrix: self.matrix.adjoint(),
        }
    }
}

/// max |(U†U - I)_ij|
pub fn unitarity_residual(matrix: &DMatrix<Complex64>) -> f64 {
    let n = matrix.ncols();
    let product = matrix.adjoint() * matrix;
    let identity = DMatrix::<Complex64>::identity(n, n);
    (product - identity)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Applies `u` to its photon in `s`; every other label passes through.
pub fn apply_unitary(u: &UnitaryOp, s: &PureState) -> Result<PureState> {
    let present = s.modes_of(u.photon);
    if present.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "photon {} not present in state",
            u.photon.number()
        )));
    }
    if let Some(m) = u.inputs.iter().find(|m| !present.contains(m)) {
        return Err(Error::DimensionMismatch(format!("operator input {m} not in state basis")));
    }
    if let Some(m) = u
        .outputs
        .iter()
        .find(|m| !u.inputs.contains(m) && present.contains(m))
    {
        return Err(Error::LabelCollision(format!(
            "operator output {m} already occupied and not consumed"
        )));
    }

    let mut basis: Vec<BasisLabel> = Vec::with_capacity(s.dim());
    let mut amps: Vec<Amplitude> = Vec::with_capacity(s.dim());
    let mut accumulate = |label: BasisLabel, amp: Amplitude| match basis.iter().position(|l| *l == label) {
        Some(i) => amps[i] += amp,
        None => {
            basis.push(label);
            amps.push(amp);
        }
    };
    for (label, amp) in s.iter() {
        let mode = label.mode(u.photon).expect("photon checked above");
        match u.inputs.iter().position(|m| *m == mode) {
            None => accumulate(label.clone(), *amp),
            Some(i) => {
                for (j, out) in u.outputs.iter().enumerate() {
                    accumulate(label.replaced(*out), u.matrix[(j, i)] * amp);
                }
            }
        }
    }
    Ok(PureState {
        basis,
        amps,
        normalized: s.normalized,
    })
}

/// Result of a sampled projective measurement.
#[derive(Clone, Debug)]
pub struct Measurement {
    pub index: usize,
    /// Normalized conditional state of the photons that were not measured.
    pub state: PureState,
    pub probability: f64,
}

fn check_effects(s: &PureState, effects: &[PureState]) -> Result<Photon> {
    let first = effects
        .first()
        .ok_or_else(|| Error::Precondition("empty effect set".into()))?;
    let photons = first.photons();
    let [photon] = photons[..] else {
        return Err(Error::Precondition("effects must be single-photon states".into()));
    };
    let present = s.modes_of(photon);
    if present.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "measured photon {} not present in state",
            photon.number()
        )));
    }
    for e in effects {
        if e.photons() != photons {
            return Err(Error::Precondition("effects act on different photons".into()));
        }
        if let Some(m) = e.modes_of(photon).iter().find(|m| !present.contains(m)) {
            return Err(Error::DimensionMismatch(format!("effect mode {m} not in state basis")));
        }
    }
    for (i, ei) in effects.iter().enumerate() {
        for (j, ej) in effects.iter().enumerate() {
            let g: Amplitude = ei
                .iter()
                .map(|(l, a)| a.conj() * ej.amplitude(l))
                .sum();
            let expected = if i == j { 1.0 } else { 0.0 };
            if (g - expected).norm() > TOLERANCE {
                return Err(Error::InvariantViolation(format!(
                    "effects are not orthonormal: ⟨e{i}|e{j}⟩ = {g}"
                )));
            }
        }
    }
    if effects.len() != present.len() {
        return Err(Error::InvariantViolation(format!(
            "{} effects do not span the {}-mode subspace of photon {}",
            effects.len(),
            present.len(),
            photon.number()
        )));
    }
    Ok(photon)
}

/// `⟨effect|s⟩` contracted over the effect's photon: the unnormalized state
/// of the remaining photons.
pub fn partial_inner(effect: &PureState, s: &PureState) -> Result<PureState> {
    let photons = effect.photons();
    let [photon] = photons[..] else {
        return Err(Error::Precondition("effect must be a single-photon state".into()));
    };
    if s.modes_of(photon).is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "photon {} not present in state",
            photon.number()
        )));
    }
    let mut basis: Vec<BasisLabel> = Vec::new();
    let mut amps: Vec<Amplitude> = Vec::new();
    for (label, amp) in s.iter() {
        let mode = label.mode(photon).expect("photon present");
        let weight = effect.amplitude(&BasisLabel::single(mode)).conj();
        let rest = label.without(photon);
        match basis.iter().position(|l| *l == rest) {
            Some(i) => amps[i] += weight * amp,
            None => {
                basis.push(rest);
                amps.push(weight * amp);
            }
        }
    }
    PureState::unnormalized(basis, amps)
}

fn conditionals(s: &PureState, effects: &[PureState]) -> Result<Vec<PureState>> {
    effects.iter().map(|e| partial_inner(e, s)).collect()
}

/// Born-rule probabilities `‖⟨effect_i|s⟩‖²` for an orthonormal effect set
/// spanning one photon's modes, marginalized over the other photon.
pub fn outcome_probabilities(s: &PureState, effects: &[PureState]) -> Result<Vec<f64>> {
    check_effects(s, effects)?;
    Ok(conditionals(s, effects)?
        .iter()
        .map(PureState::norm_sqr)
        .collect())
}

/// Samples a projective measurement of one photon and returns the outcome
/// index, its probability and the normalized state of the remaining photon.
pub fn project_measure<R: Rng + ?Sized>(
    s: &PureState,
    effects: &[PureState],
    rng: &mut R,
) -> Result<Measurement> {
    check_effects(s, effects)?;
    let branches = conditionals(s, effects)?;
    let probs: Vec<f64> = branches.iter().map(PureState::norm_sqr).collect();
    let total: f64 = probs.iter().sum();
    if s.is_normalized() && (total - 1.0).abs() > TOLERANCE {
        return Err(Error::InvariantViolation(format!(
            "outcome probabilities sum to {total}"
        )));
    }
    if total <= 0.0 {
        return Err(Error::InvariantViolation("state has zero norm".into()));
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut index = probs.len() - 1;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            index = i;
            break;
        }
    }
    // Never return a zero-probability branch because of rounding at the end.
    while probs[index] == 0.0 && index > 0 {
        index -= 1;
    }
    Ok(Measurement {
        index,
        state: branches[index].normalize()?,
        probability: probs[index] / total,
    })
}
