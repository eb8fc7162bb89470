use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use teleport_core::classical::{self, ClassicalStrategy, Ensemble, PovmDiagnostics};
use teleport_core::counts::{self, CellCounts, CountRecord, NoiseModel, CLASSICAL_BOUND};
use teleport_core::teleport::{
    self, alice_branch, apparatus, bob_conditional, decompose, expected_conditional, fold_half_turn,
    make_epr, prepare_unknown, verifier_setting, BellOutcome, PolState, PrepSpec, VerifierSetting,
};
use teleport_core::{Amplitude, ElementSpec, Path, Photon, Pol};

use crate::config::{AnalyzerGrid, BoundConfig, DecomposeConfig, TeleportConfig, VerifySConfig};
use crate::error::CliError;

/// Output format for stdout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// What a command produced: the text for stdout and the files for `--out`.
pub struct Output {
    pub stdout: Vec<u8>,
    pub files: Vec<(String, Vec<u8>)>,
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Invariant(format!("serializing summary: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

fn records_csv(records: &[CountRecord]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    counts::write_csv(records, &mut buf)?;
    Ok(buf)
}

fn pick(format: Format, json: &[u8], csv: Option<&[u8]>, command: &str) -> Result<Vec<u8>, CliError> {
    match (format, csv) {
        (Format::Json, _) => Ok(json.to_vec()),
        (Format::Csv, Some(c)) => Ok(c.to_vec()),
        (Format::Csv, None) => Err(CliError::Invalid(format!("{command} has no CSV output"))),
    }
}

#[derive(Serialize)]
struct OutcomeSummary {
    outcome: BellOutcome,
    alice_port: Path,
    alice_polarizer: Pol,
    verifier: VerifierSetting,
    expected_theta_max_deg: f64,
    theta_max_deg: f64,
    theta_max_err_deg: f64,
    visibility: f64,
    visibility_err: f64,
    i_par: u64,
    i_perp: u64,
    fidelity: f64,
}

#[derive(Serialize)]
struct TeleportSummary {
    command: &'static str,
    seed: u64,
    preparation: PrepSpec,
    prepared_state: PolState,
    noise: NoiseModel,
    pairs_per_point: u64,
    analyzer_grid: AnalyzerGrid,
    apparatus: Vec<ElementSpec>,
    outcomes: Vec<OutcomeSummary>,
}

/// Physical and closed-form conditional states must agree.
fn check_conditionals(spec: &PrepSpec) -> Result<(), CliError> {
    let (joint, prepared) = prepare_unknown(spec, &make_epr())?;
    for o in BellOutcome::ALL {
        let (_, collapsed) = alice_branch(&joint, o)?;
        let bob = bob_conditional(&collapsed)?;
        let f = teleport::fidelity(&expected_conditional(o, &prepared), &bob);
        if (f - 1.0).abs() > 1e-9 {
            return Err(CliError::Invariant(format!(
                "conditional state for {o} deviates from the expected one (fidelity {f})"
            )));
        }
    }
    Ok(())
}

pub fn teleport(cfg: &TeleportConfig, seed: u64, format: Format) -> Result<Output, CliError> {
    let spec = cfg.preparation;
    spec.validate()?;
    cfg.noise.validate()?;
    check_conditionals(&spec)?;
    let g = cfg.analyzer_grid;
    let grid = counts::angle_grid(g.start_deg, g.stop_deg, g.step_deg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut records = Vec::new();
    let mut outcomes = Vec::new();
    for o in BellOutcome::ALL {
        let setting = verifier_setting(o, &spec)?;
        let sweep = counts::simulate_sweep(&spec, o, &grid, &cfg.noise, cfg.pairs_per_point, &mut rng)?;
        let fit = counts::fit_fringe(&sweep)?;
        let windows = [setting.theta_b_deg, setting.perpendicular().theta_b_deg];
        let check = counts::simulate_sweep(&spec, o, &windows, &cfg.noise, cfg.pairs_per_point, &mut rng)?;
        let (i_par, i_perp) = (check[0].count, check[1].count);
        let (alice_port, alice_polarizer) = o.detector();
        outcomes.push(OutcomeSummary {
            outcome: o,
            alice_port,
            alice_polarizer,
            verifier: setting,
            expected_theta_max_deg: fold_half_turn(setting.theta_b_deg),
            theta_max_deg: fit.theta_max_deg,
            theta_max_err_deg: fit.theta_max_err_deg,
            visibility: fit.visibility,
            visibility_err: fit.visibility_err,
            i_par,
            i_perp,
            fidelity: counts::fidelity_from_counts(i_par, i_perp)?,
        });
        records.extend(sweep);
    }

    let summary = TeleportSummary {
        command: "teleport",
        seed,
        preparation: spec,
        prepared_state: spec.prepared_state(),
        noise: cfg.noise,
        pairs_per_point: cfg.pairs_per_point,
        analyzer_grid: g,
        apparatus: apparatus(&spec, Pol::V),
        outcomes,
    };
    let json = to_json(&summary)?;
    let csv = records_csv(&records)?;
    Ok(Output {
        stdout: pick(format, &json, Some(&csv), "teleport")?,
        files: vec![
            ("teleport_summary.json".into(), json),
            ("teleport_fringes.csv".into(), csv),
        ],
    })
}

#[derive(Serialize)]
struct BoundSummary {
    command: &'static str,
    seed: u64,
    ensemble: Ensemble,
    outcomes: usize,
    restarts: usize,
    resolution: usize,
    s_best: f64,
    best_restart: usize,
    strategy: ClassicalStrategy,
    povm: PovmDiagnostics,
    t_max: f64,
    t_max_grid_tolerance: f64,
    t_max_argmax: Vec<(PolState, PolState)>,
    /// `2 (T_max + tolerance) / N`, the largest S any classical strategy can reach.
    s_upper_bound: f64,
    bound_ok: bool,
}

pub fn bound(cfg: &BoundConfig, seed: u64, format: Format) -> Result<Output, CliError> {
    let ensemble = cfg.ensemble.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let best = classical::optimize_strategy(&ensemble, cfg.outcomes, cfg.restarts, &mut rng)?;
    let grid = classical::max_t(&ensemble, cfg.resolution)?;
    let povm = classical::validate_povm(&best.strategy.povm);
    let n = ensemble.len() as f64;
    let s_upper_bound = 2.0 * (grid.value + grid.grid_tolerance) / n;
    let bound_ok = povm.valid && best.s <= s_upper_bound + 1e-12;
    let summary = BoundSummary {
        command: "bound",
        seed,
        ensemble,
        outcomes: cfg.outcomes,
        restarts: cfg.restarts,
        resolution: cfg.resolution,
        s_best: best.s,
        best_restart: best.restart,
        strategy: best.strategy,
        povm,
        t_max: grid.value,
        t_max_grid_tolerance: grid.grid_tolerance,
        t_max_argmax: grid.argmax,
        s_upper_bound,
        bound_ok,
    };
    let json = to_json(&summary)?;
    if !bound_ok {
        return Err(CliError::Invariant(format!(
            "optimized S = {} exceeds the grid certificate {}",
            summary.s_best, s_upper_bound
        )));
    }
    Ok(Output {
        stdout: pick(format, &json, None, "bound")?,
        files: vec![("bound_summary.json".into(), json)],
    })
}

#[derive(Serialize)]
struct CellSummary {
    state_deg: f64,
    outcome: BellOutcome,
    i_par: u64,
    i_perp: u64,
    fidelity: f64,
}

#[derive(Serialize)]
struct VerifySSummary {
    command: &'static str,
    seed: u64,
    noise: NoiseModel,
    pairs_per_setting: u64,
    s: f64,
    std_err: f64,
    classical_bound: f64,
    sigma_violation: f64,
    expected_s: f64,
    mean_coincidences_per_cell: f64,
    cells: Vec<CellSummary>,
}

pub fn verify_s(cfg: &VerifySConfig, seed: u64, format: Format) -> Result<Output, CliError> {
    let run = counts::simulate_trine_experiment(&cfg.noise, cfg.pairs_per_setting, seed)?;
    let est = counts::estimate_s(&run.cells)?;
    let cells = run
        .cells
        .iter()
        .map(|c: &CellCounts| {
            Ok(CellSummary {
                state_deg: c.state_deg,
                outcome: c.outcome,
                i_par: c.i_par,
                i_perp: c.i_perp,
                fidelity: counts::fidelity_from_counts(c.i_par, c.i_perp)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let total: u64 = run.cells.iter().map(|c| c.i_par + c.i_perp).sum();
    let summary = VerifySSummary {
        command: "verify-s",
        seed,
        noise: cfg.noise,
        pairs_per_setting: cfg.pairs_per_setting,
        s: est.value,
        std_err: est.std_err,
        classical_bound: CLASSICAL_BOUND,
        sigma_violation: est.sigma_violation(CLASSICAL_BOUND),
        expected_s: counts::expected_s(&cfg.noise, cfg.pairs_per_setting)?,
        mean_coincidences_per_cell: total as f64 / run.cells.len() as f64,
        cells,
    };
    let json = to_json(&summary)?;
    let csv = records_csv(&run.records)?;
    Ok(Output {
        stdout: pick(format, &json, Some(&csv), "verify-s")?,
        files: vec![
            ("verify_s_summary.json".into(), json),
            ("verify_s_counts.csv".into(), csv),
        ],
    })
}

#[derive(Serialize)]
struct ModeAmplitude {
    mode: String,
    amplitude: Amplitude,
}

#[derive(Serialize)]
struct BranchSummary {
    outcome: BellOutcome,
    coefficient: Amplitude,
    photon2: Vec<ModeAmplitude>,
}

#[derive(Serialize)]
struct DecomposeSummary {
    command: &'static str,
    preparation: PrepSpec,
    prepared_state: PolState,
    joint: Vec<ModeAmplitude>,
    branches: Vec<BranchSummary>,
}

pub fn decompose_cmd(cfg: &DecomposeConfig, format: Format) -> Result<Output, CliError> {
    let spec = cfg.preparation;
    let (joint, prepared) = prepare_unknown(&spec, &make_epr())?;
    let branches = decompose(&joint)?;
    let photon2_modes = teleport_core::optics::path_modes(Photon::Two);
    let branch_summaries: Vec<BranchSummary> = branches
        .iter()
        .map(|b| BranchSummary {
            outcome: b.outcome,
            coefficient: b.coefficient,
            photon2: photon2_modes
                .iter()
                .map(|m| ModeAmplitude {
                    mode: m.to_string(),
                    amplitude: b.conditional.amplitude(&teleport_core::BasisLabel::single(*m)),
                })
                .collect(),
        })
        .collect();

    let mut csv = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["outcome".to_string(), "coefficient_re".into(), "coefficient_im".into()];
    for m in &photon2_modes {
        let tag = m.to_string().replace(',', "_");
        header.push(format!("{tag}_re"));
        header.push(format!("{tag}_im"));
    }
    let csv_err = |e: csv::Error| CliError::Invariant(format!("writing CSV: {e}"));
    csv.write_record(&header).map_err(csv_err)?;
    for b in &branch_summaries {
        let mut row = vec![
            b.outcome.to_string(),
            b.coefficient.re.to_string(),
            b.coefficient.im.to_string(),
        ];
        for m in &b.photon2 {
            row.push(m.amplitude.re.to_string());
            row.push(m.amplitude.im.to_string());
        }
        csv.write_record(&row).map_err(csv_err)?;
    }
    let csv = csv
        .into_inner()
        .map_err(|e| CliError::Invariant(format!("writing CSV: {e}")))?;

    let summary = DecomposeSummary {
        command: "decompose",
        preparation: spec,
        prepared_state: prepared,
        joint: joint
            .iter()
            .filter(|(_, a)| a.norm() > 1e-15)
            .map(|(l, a)| ModeAmplitude {
                mode: l.to_string(),
                amplitude: *a,
            })
            .collect(),
        branches: branch_summaries,
    };
    let json = to_json(&summary)?;
    Ok(Output {
        stdout: pick(format, &json, Some(&csv), "decompose")?,
        files: vec![
            ("decompose_summary.json".into(), json),
            ("decompose_branches.csv".into(), csv),
        ],
    })
}
