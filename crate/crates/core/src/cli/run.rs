use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{Emit, ObservableSpec, RunConfig};
use super::output::{scan2d_csv, scan2d_plot_data, Header, SpectrumTable};
use crate::budget::{cutoff_sweep, CutoffSweep, ErrorBudget, SweepTarget};
use crate::estimator::{degeneracy_probe, scan, scan_2d, CoolingFunction, KernelEngine, Mode, Shots};
use crate::pauli::Hamiltonian;
use crate::peaks::PeakReport;
use crate::state::{eigendecompose, prepare_state, Statevector};
use crate::{Error, Result};

/// What a run wrote.
#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub peaks: Option<PeakReport>,
    pub probe_peaks: Option<PeakReport>,
}

struct Inputs {
    h: Hamiltonian,
    psi0: Statevector,
}

fn inputs(cfg: &RunConfig) -> Result<Inputs> {
    let h = cfg.model.build()?;
    let psi0 = prepare_state(&cfg.initial_state, h.n_qubits())?;
    Ok(Inputs { h, psi0 })
}

fn header(cfg: &RunConfig, kernel: &str) -> Header {
    Header {
        mode: Some(cfg.scan.mode.as_str().to_string()),
        kernel: Some(kernel.to_string()),
        seed: Some(cfg.scan.seed),
        units: Some(cfg.model.units.clone()),
        config: Some(cfg.source.clone()),
    }
}

fn write(dir: &Path, name: &str, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

fn emit_spectrum(
    cfg: &RunConfig,
    table: &SpectrumTable,
    prefix: &str,
    files: &mut Vec<PathBuf>,
) -> Result<PeakReport> {
    let dir = &cfg.output_dir;
    if cfg.emits(Emit::SpectrumCsv) {
        write(dir, &format!("{prefix}spectrum.csv"), &table.to_csv(), files)?;
    }
    if cfg.emits(Emit::PlotData) {
        write(dir, &format!("{prefix}spectrum.dat"), &table.to_plot_data(), files)?;
    }
    let report = table.peaks(cfg.peak_threshold, cfg.peak_signal)?;
    if cfg.emits(Emit::PeaksJson) {
        write(dir, &format!("{prefix}peaks.json"), &(report.to_json()? + "\n"), files)?;
    }
    Ok(report)
}

fn budget_csv(cfg: &RunConfig, h: &Hamiltonian) -> Result<Option<String>> {
    let CoolingFunction::Gaussian { a } = cfg.scan.cooling else {
        return Ok(None);
    };
    // Shot terms: Pauli coefficients for a Pauli-sum observable, a single
    // unit-weight outcome for the projector and the energy kernel.
    let coeffs: Option<Vec<f64>> = match (cfg.scan.shots, cfg.scan.mode, &cfg.observable) {
        (Shots::Exact, _, _) => None,
        (Shots::Finite(_), Mode::Energy, _) => Some(vec![1.0]),
        (Shots::Finite(_), _, ObservableSpec::PauliSum(_)) => match cfg.observable.build(h.n_qubits())? {
            Some(crate::pauli::Observable::PauliSum(o)) => Some(o.coefficient_magnitudes()),
            _ => None,
        },
        (Shots::Finite(_), _, ObservableSpec::Projector) => Some(vec![1.0]),
        (Shots::Finite(_), _, ObservableSpec::Identity) => None,
    };
    let shots = match cfg.scan.shots {
        Shots::Finite(n) => n,
        Shots::Exact => 0,
    };
    let budget = ErrorBudget::new(
        a,
        cfg.scan.t_max,
        Some(cfg.eps_c),
        coeffs.as_deref().map(|c| (c, shots)),
    )?;
    let mut out = String::new();
    header(cfg, "budget").write(&mut out, "error budget");
    out.push_str(&budget.to_csv());
    Ok(Some(out))
}

/// Executes a validated configuration and writes the requested artifacts.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let Inputs { h, psi0 } = inputs(cfg)?;
    let o = cfg.observable.build(h.n_qubits())?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut summary = RunSummary::default();
    let files = &mut summary.files;
    let sc = &cfg.scan;

    if sc.mode == Mode::Grid2d {
        let s2 = scan_2d(&h, &psi0, o, sc)?;
        let head = header(cfg, "gap");
        if cfg.emits(Emit::SpectrumCsv) {
            write(dir, "spectrum2d.csv", &scan2d_csv(&s2, &head), files)?;
        }
        if cfg.emits(Emit::PlotData) {
            write(dir, "spectrum2d.dat", &scan2d_plot_data(&s2, &head), files)?;
        }
    } else {
        let engine = match sc.mode {
            Mode::Gap => KernelEngine::gap(&h, &psi0, o, sc.evolution, sc.shots, sc.seed)?,
            Mode::Energy => KernelEngine::energy(&h, &psi0, sc.evolution, sc.shots, sc.seed)?,
            Mode::Transition => {
                let m2 = cfg
                    .model2
                    .as_ref()
                    .ok_or_else(|| Error::Config("transition mode needs [model2]".into()))?;
                KernelEngine::transition(&h, &m2.build()?, &psi0, o, sc.evolution)?
            }
            Mode::Grid2d => unreachable!(),
        };
        let result = scan(&engine, sc)?;
        let table = SpectrumTable::from_scan(&result, header(cfg, engine.kind().as_str()));
        summary.peaks = Some(emit_spectrum(cfg, &table, "", files)?);

        if cfg.degeneracy_probe {
            let sym = cfg
                .symmetry
                .as_ref()
                .ok_or_else(|| Error::Config("the degeneracy probe needs [symmetry]".into()))?
                .build(h.n_qubits())?;
            let probe = degeneracy_probe(&h, &psi0, &sym, sc)?;
            let table = SpectrumTable::from_scan(&probe, header(cfg, "probe"));
            summary.probe_peaks = Some(emit_spectrum(cfg, &table, "probe_", files)?);
        }
    }

    if cfg.emits(Emit::BudgetCsv) {
        if let Some(text) = budget_csv(cfg, &h)? {
            write(dir, "budget.csv", &text, files)?;
        }
    }
    Ok(summary)
}

/// First gap between populated levels of the initial state.
pub fn first_populated_gap(h: &Hamiltonian, psi0: &Statevector) -> Result<f64> {
    let spec = eigendecompose(h)?;
    let c = spec.coefficients(psi0)?;
    let mut levels: Vec<(f64, f64)> = Vec::new();
    for (e, ck) in spec.eigenvalues.iter().zip(&c) {
        match levels.last_mut() {
            Some((e0, w)) if (e - *e0).abs() < 1e-8 => *w += ck.norm_sqr(),
            _ => levels.push((*e, ck.norm_sqr())),
        }
    }
    let populated: Vec<f64> = levels.iter().filter(|(_, w)| *w > 1e-10).map(|(e, _)| *e).collect();
    match populated.as_slice() {
        [e0, e1, ..] => Ok(e1 - e0),
        _ => Err(Error::invalid("the initial state populates a single level; there is no gap to track")),
    }
}

/// Cutoff sweep of the configured gap scan, tracking `gap` (default: the first populated gap).
pub fn sweep(cfg: &RunConfig, t_list: &[f64], gap: Option<f64>, window: f64) -> Result<(CutoffSweep, String)> {
    if cfg.scan.mode != Mode::Gap {
        return Err(Error::Config("sweep-cutoff runs gap-mode configurations only".into()));
    }
    let Inputs { h, psi0 } = inputs(cfg)?;
    let o = cfg.observable.build(h.n_qubits())?;
    let gap = match gap {
        Some(g) => g,
        None => first_populated_gap(&h, &psi0)?,
    };
    let engine = KernelEngine::gap(&h, &psi0, o, cfg.scan.evolution, Shots::Exact, cfg.scan.seed)?;
    let target = SweepTarget {
        gap,
        window,
        threshold: cfg.peak_threshold,
    };
    let result = cutoff_sweep(&engine, &cfg.scan, target, t_list, cfg.eps_c)?;
    let mut out = String::new();
    header(cfg, "gap").write(&mut out, "cutoff sweep");
    let _ = writeln!(out, "# target gap: {gap}");
    out.push_str(&result.to_csv());
    Ok((result, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::parse_config;

    #[test]
    fn first_gap_of_heisenberg() {
        let h = crate::pauli::build_heisenberg(4, 1.0, 1.0).unwrap();
        let psi = prepare_state(r#"super("0000", "1000")"#, 4).unwrap();
        assert!((first_populated_gap(&h, &psi).unwrap() - 2.0).abs() < 1e-9);
        let ground = prepare_state("0000", 4).unwrap();
        assert!(first_populated_gap(&h, &ground).is_err());
    }

    #[test]
    fn run_writes_requested_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            r#"
[model]
kind = "heisenberg"
n = 2
J = 1.0
h = 0.5

[state]
spec = "+0"

[scan]
mode = "energy"
a = 0.1
T = 60
backend = "quadrature"
e_min = -4
e_max = 4
e_step = 0.05
shots = 100

[output]
dir = "{}"
emit = ["spectrum_csv", "budget_csv"]
"#,
            dir.path().display()
        );
        let cfg = parse_config(&text, Path::new(".")).unwrap();
        let s = run(&cfg).unwrap();
        let names: Vec<String> = s.files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["spectrum.csv", "budget.csv"]);
        let budget = std::fs::read_to_string(dir.path().join("budget.csv")).unwrap();
        assert!(budget.contains("shot_variance_bound"));
        assert!(budget.contains("# seed: 0"));
    }
}
