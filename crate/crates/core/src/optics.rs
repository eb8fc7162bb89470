//! Jones-calculus elements and the fixed mode layout of the apparatus.
//!
//! Polarization vectors are ordered `(v, h)`. A linear polarization at
//! angle θ from the horizontal is `cos θ |h⟩ + sin θ |v⟩`.
//!
//! Two-mode 2×2 elements (wave plates, rotators) are plain [`Jones`]
//! matrices and are placed on a path with [`on_path`]. Elements that mix
//! paths (calcite, beamsplitters) are [`UnitaryOp`]s over the photon's
//! four modes. Polarizers are projective and reported separately.

use nalgebra::{DMatrix, Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{apply_unitary, BasisLabel, ModeLabel, Path, Photon, Pol, PureState, UnitaryOp};

/// 2×2 polarization matrix in the `(v, h)` basis.
pub type Jones = Matrix2<Complex64>;

/// Polarization amplitudes `(v, h)`.
pub type JonesVector = Vector2<Complex64>;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Linear polarization `cos θ |h⟩ + sin θ |v⟩`, θ in degrees from horizontal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearPol {
    pub theta_deg: f64,
}

impl LinearPol {
    pub fn new(theta_deg: f64) -> Self {
        Self { theta_deg }
    }

    pub fn vector(&self) -> JonesVector {
        let t = self.theta_deg.to_radians();
        Vector2::new(re(t.sin()), re(t.cos()))
    }
}

pub fn vertical() -> JonesVector {
    Vector2::new(re(1.0), re(0.0))
}

pub fn horizontal() -> JonesVector {
    Vector2::new(re(0.0), re(1.0))
}

/// Quarter-wave plate with its axis at `gamma_deg` from the vertical.
///
/// Phase convention: acting on `|v⟩` it gives
/// `[(1 + i cos 2γ)|v⟩ + sin 2γ |h⟩] / √2`. In Pauli form (v = +1 of Z) the
/// plate is `(I + i(cos 2γ Z − sin 2γ Y)) / √2`, so the plate at γ + 90°
/// undoes the plate at γ.
pub fn quarter_wave(gamma_deg: f64) -> Jones {
    let two_g = 2.0 * gamma_deg.to_radians();
    let (s, c) = two_g.sin_cos();
    let k = std::f64::consts::FRAC_1_SQRT_2;
    Matrix2::new(
        Complex64::new(k, k * c),
        re(-k * s),
        re(k * s),
        Complex64::new(k, -k * c),
    )
}

/// Half-wave plate at `gamma_deg`: two quarter-wave plates at the same angle.
pub fn half_wave(gamma_deg: f64) -> Jones {
    let q = quarter_wave(gamma_deg);
    q * q
}

/// Real rotation of the polarization plane by `theta_deg`:
/// `LinearPol(φ) → LinearPol(φ + θ)`. At 90° this sends `|v⟩ → −|h⟩` and
/// `|h⟩ → |v⟩`.
pub fn rotator(theta_deg: f64) -> Jones {
    let (s, c) = theta_deg.to_radians().sin_cos();
    Matrix2::new(re(c), re(s), re(-s), re(c))
}

/// Places a Jones matrix on the `(v, h)` modes of one path.
pub fn on_path(photon: Photon, path: Path, jones: &Jones) -> Result<UnitaryOp> {
    let domain = vec![
        ModeLabel::new(photon, path, Pol::V),
        ModeLabel::new(photon, path, Pol::H),
    ];
    UnitaryOp::new(domain, DMatrix::from_iterator(2, 2, jones.iter().copied()))
}

/// The four pre-detection modes of a photon: `a,v  a,h  b,v  b,h`.
pub fn path_modes(photon: Photon) -> [ModeLabel; 4] {
    [
        ModeLabel::new(photon, Path::A, Pol::V),
        ModeLabel::new(photon, Path::A, Pol::H),
        ModeLabel::new(photon, Path::B, Pol::V),
        ModeLabel::new(photon, Path::B, Pol::H),
    ]
}

fn permutation(domain: &[ModeLabel], image: &[ModeLabel]) -> DMatrix<Complex64> {
    let n = domain.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, target) in image.iter().enumerate() {
        let j = domain.iter().position(|d| d == target).expect("image inside domain");
        m[(j, i)] = re(1.0);
    }
    m
}

/// Calcite displacer turning the polarization-entangled pair into a
/// path-entangled one.
///
/// Both photons enter on path `a`. Photon 1: `v` stays on `a1`, `h` is sent
/// to `b1` and leaves vertical. Photon 2: `h` stays on `a2`, `v` is sent to
/// `b2` and leaves horizontal. The `b`-input columns complete the
/// permutation so the map is unitary on the four modes.
pub fn calcite_encode(photon: Photon) -> UnitaryOp {
    let [av, ah, bv, bh] = path_modes(photon);
    let image = match photon {
        Photon::One => [av, bv, bh, ah],
        Photon::Two => [bh, ah, av, bv],
    };
    let domain = [av, ah, bv, bh];
    UnitaryOp::new(domain.to_vec(), permutation(&domain, &image)).expect("permutation is unitary")
}

/// Applies [`calcite_encode`] to every photon of `s`. Each photon must still
/// be confined to path `a`.
pub fn calcite_encode_state(s: &PureState) -> Result<PureState> {
    for (label, amp) in s.iter() {
        if amp.norm() > 0.0 && label.modes().iter().any(|m| m.path != Path::A) {
            return Err(Error::Precondition(format!(
                "calcite input already path-split: amplitude {amp} on {label}"
            )));
        }
    }
    s.photons()
        .into_iter()
        .try_fold(s.clone(), |acc, p| apply_unitary(&calcite_encode(p), &acc))
}

/// Alice's 50:50 beamsplitter on paths a1, b1, each polarization separately:
/// `(a1 + b1)/√2 → A+`, `(a1 − b1)/√2 → A−`.
pub fn beamsplitter_5050() -> UnitaryOp {
    let [av, ah, bv, bh] = path_modes(Photon::One);
    let k = std::f64::consts::FRAC_1_SQRT_2;
    let outputs = vec![
        ModeLabel::new(Photon::One, Path::PortPlus, Pol::V),
        ModeLabel::new(Photon::One, Path::PortPlus, Pol::H),
        ModeLabel::new(Photon::One, Path::PortMinus, Pol::V),
        ModeLabel::new(Photon::One, Path::PortMinus, Pol::H),
    ];
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        re(k), re(0.0), re(k),  re(0.0),
        re(0.0), re(k), re(0.0), re(k),
        re(k), re(0.0), re(-k), re(0.0),
        re(0.0), re(k), re(0.0), re(-k),
    ]);
    UnitaryOp::mapping(vec![av, ah, bv, bh], outputs, m).expect("hadamard block is unitary")
}

/// Bob's polarizing beamsplitter: transmits `v` from `b2` and reflects `h`
/// from `a2` into the common output; the other two inputs exit the dump port.
pub fn polarizing_bs() -> UnitaryOp {
    let [av, ah, bv, bh] = path_modes(Photon::Two);
    let out_v = ModeLabel::new(Photon::Two, Path::Out, Pol::V);
    let out_h = ModeLabel::new(Photon::Two, Path::Out, Pol::H);
    let dump_v = ModeLabel::new(Photon::Two, Path::Dump, Pol::V);
    let dump_h = ModeLabel::new(Photon::Two, Path::Dump, Pol::H);
    let inputs = vec![av, ah, bv, bh];
    let outputs = vec![out_v, out_h, dump_v, dump_h];
    let image = [dump_v, out_h, out_v, dump_h];
    let mut m = DMatrix::zeros(4, 4);
    for (i, target) in image.iter().enumerate() {
        let j = outputs.iter().position(|o| o == target).unwrap();
        m[(j, i)] = re(1.0);
    }
    UnitaryOp::mapping(inputs, outputs, m).expect("permutation is unitary")
}

/// Bob's combiner: a 90° rotation on path b2 followed by [`polarizing_bs`].
pub fn bob_combiner() -> [UnitaryOp; 2] {
    [
        on_path(Photon::Two, Path::B, &rotator(90.0)).expect("rotator is unitary"),
        polarizing_bs(),
    ]
}

/// Multiplies the amplitudes of every mode on `path` by `e^{iφ}`.
pub fn phase_delay(photon: Photon, path: Path, phi_rad: f64) -> UnitaryOp {
    let phase = Complex64::from_polar(1.0, phi_rad);
    let jones = Matrix2::new(phase, re(0.0), re(0.0), phase);
    on_path(photon, path, &jones).expect("phase is unitary")
}

/// A polarizer in front of one or more paths of a photon, passing `axis`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polarizer {
    pub axis: Pol,
    pub photon: Photon,
    pub paths: Vec<Path>,
}

/// Output of a projective element: the surviving (unnormalized) component
/// and the probability that the photon got through.
#[derive(Clone, Debug)]
pub struct Projected {
    pub state: PureState,
    pub survival: f64,
}

pub fn polarizer(axis: Pol, photon: Photon, paths: &[Path]) -> Polarizer {
    Polarizer {
        axis,
        photon,
        paths: paths.to_vec(),
    }
}

impl Polarizer {
    fn blocks(&self, m: ModeLabel) -> bool {
        m.photon == self.photon && self.paths.contains(&m.path) && m.pol != self.axis
    }

    /// Removes the blocked modes from the basis. The orthogonal component is
    /// discarded, not renormalized.
    pub fn apply(&self, s: &PureState) -> Result<Projected> {
        let (basis, amps): (Vec<BasisLabel>, Vec<_>) = s
            .iter()
            .filter(|(label, _)| !label.mode(self.photon).is_some_and(|m| self.blocks(m)))
            .map(|(l, a)| (l.clone(), *a))
            .unzip();
        if basis.is_empty() {
            return Err(Error::DimensionMismatch("polarizer blocks every basis mode".into()));
        }
        let state = PureState::unnormalized(basis, amps)?;
        let before = s.norm_sqr();
        let survival = if before > 0.0 { state.norm_sqr() / before } else { 0.0 };
        Ok(Projected { state, survival })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementKind {
    CalciteEncoder,
    Qwp,
    Rotator,
    Hwp,
    Bs5050,
    Pbs,
    Polarizer,
    PhaseDelay,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub photon: Photon,
    pub paths: Vec<Path>,
}

/// Declarative description of one optical element.
///
/// `angle_deg` means: plate axis from vertical (qwp, hwp); rotation angle
/// (rotator); pass axis, 90 = v and 0 = h (polarizer); phase in degrees
/// (phase-delay). Calcite and beamsplitters ignore it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    pub kind: ElementKind,
    #[serde(default)]
    pub angle_deg: f64,
    pub target: Target,
}

#[derive(Clone, Debug)]
pub enum Element {
    Unitary(Vec<UnitaryOp>),
    Projective(Polarizer),
}

impl ElementSpec {
    pub fn new(kind: ElementKind, angle_deg: f64, photon: Photon, paths: &[Path]) -> Self {
        Self {
            kind,
            angle_deg,
            target: Target {
                photon,
                paths: paths.to_vec(),
            },
        }
    }

    pub fn build(&self) -> Result<Element> {
        if !self.angle_deg.is_finite() {
            return Err(Error::Precondition(format!("non-finite angle for {:?}", self.kind)));
        }
        let photon = self.target.photon;
        let jones_on_paths = |j: Jones| -> Result<Element> {
            self.target
                .paths
                .iter()
                .map(|p| on_path(photon, *p, &j))
                .collect::<Result<Vec<_>>>()
                .map(Element::Unitary)
        };
        match self.kind {
            ElementKind::CalciteEncoder => Ok(Element::Unitary(vec![calcite_encode(photon)])),
            ElementKind::Qwp => jones_on_paths(quarter_wave(self.angle_deg)),
            ElementKind::Hwp => jones_on_paths(half_wave(self.angle_deg)),
            ElementKind::Rotator => jones_on_paths(rotator(self.angle_deg)),
            ElementKind::PhaseDelay => {
                let phase = Complex64::from_polar(1.0, self.angle_deg.to_radians());
                jones_on_paths(Matrix2::new(phase, re(0.0), re(0.0), phase))
            }
            ElementKind::Bs5050 if photon == Photon::One => {
                Ok(Element::Unitary(vec![beamsplitter_5050()]))
            }
            ElementKind::Pbs if photon == Photon::Two => Ok(Element::Unitary(vec![polarizing_bs()])),
            ElementKind::Bs5050 | ElementKind::Pbs => Err(Error::Precondition(format!(
                "{:?} is fixed to photon {}",
                self.kind,
                if self.kind == ElementKind::Bs5050 { 1 } else { 2 }
            ))),
            ElementKind::Polarizer => {
                let axis = if (self.angle_deg - 90.0).abs() < 1e-9 {
                    Pol::V
                } else if self.angle_deg.abs() < 1e-9 {
                    Pol::H
                } else {
                    return Err(Error::Precondition(format!(
                        "polarizer axis must be 90 (v) or 0 (h), got {}",
                        self.angle_deg
                    )));
                };
                Ok(Element::Projective(polarizer(axis, photon, &self.target.paths)))
            }
        }
    }
}

impl Element {
    /// Applies the element; returns the new state and the survival probability
    /// (1 for unitary elements).
    pub fn apply(&self, s: &PureState) -> Result<(PureState, f64)> {
        match self {
            Element::Unitary(ops) => ops
                .iter()
                .try_fold(s.clone(), |acc, u| apply_unitary(u, &acc))
                .map(|st| (st, 1.0)),
            Element::Projective(p) => p.apply(s).map(|pr| (pr.state, pr.survival)),
        }
    }
}

/// Maximum |A - B| over entries, for comparing Jones matrices.
pub fn jones_distance(a: &Jones, b: &Jones) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `|⟨x|y⟩|` for polarization vectors; 1 when equal up to global phase.
pub fn overlap(x: &JonesVector, y: &JonesVector) -> f64 {
    x.dotc(y).norm()
}
