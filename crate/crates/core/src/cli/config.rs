//! Run configuration: one TOML document, one section per stage.
//!
//! Parsing collects every violation instead of stopping at the first, and
//! anchors each [`Diagnostic`] to the line of the offending key.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::budget::min_sampling_range;
use crate::estimator::{
    Backend, CoolingFunction, EnergyGrid, Evolution, Mode, Sampling, ScanConfig, Shots,
};
use crate::pauli::{build_heisenberg_with, total_z, Boundary, Hamiltonian, Observable, DEFAULT_DENSE_LIMIT};
use crate::peaks::{PeakSignal, DEFAULT_THRESHOLD};
use crate::state::prepare_state;
use crate::{Error, Result};

const SECTIONS: &[&str] = &[
    "model", "model2", "state", "observable", "symmetry", "scan", "peaks", "output", "budget",
];

/// One configuration problem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based line of the key (or of its section header when the key is missing).
    pub line: Option<usize>,
    /// `[section] key`.
    pub key: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelSource {
    Heisenberg {
        n_sites: usize,
        j: f64,
        h: f64,
        boundary: Boundary,
    },
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub source: ModelSource,
    /// Energy units written to every output (`model` or `hartree`).
    pub units: String,
}

impl ModelConfig {
    pub fn build(&self) -> Result<Hamiltonian> {
        match &self.source {
            ModelSource::Heisenberg { n_sites, j, h, boundary } => {
                build_heisenberg_with(*n_sites, *j, *h, *boundary)
            }
            ModelSource::File(path) => Hamiltonian::load(path),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObservableSpec {
    /// `|psi0><psi0|`.
    Projector,
    Identity,
    PauliSum(PathBuf),
}

impl ObservableSpec {
    /// `None` stands for the projector onto the initial state.
    pub fn build(&self, n_qubits: usize) -> Result<Option<Observable>> {
        Ok(match self {
            ObservableSpec::Projector => None,
            ObservableSpec::Identity => Some(Observable::Identity { n_qubits }),
            ObservableSpec::PauliSum(path) => Some(Observable::PauliSum(load_sized(path, n_qubits)?)),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SymmetrySpec {
    TotalZ,
    File(PathBuf),
}

impl SymmetrySpec {
    pub fn build(&self, n_qubits: usize) -> Result<Observable> {
        Ok(Observable::PauliSum(match self {
            SymmetrySpec::TotalZ => total_z(n_qubits),
            SymmetrySpec::File(path) => load_sized(path, n_qubits)?,
        }))
    }
}

fn load_sized(path: &Path, n_qubits: usize) -> Result<Hamiltonian> {
    let h = Hamiltonian::load(path)?;
    if h.n_qubits() != n_qubits {
        return Err(Error::DimensionMismatch {
            expected: n_qubits,
            found: h.n_qubits(),
        });
    }
    Ok(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Emit {
    SpectrumCsv,
    PeaksJson,
    BudgetCsv,
    PlotData,
}

impl Emit {
    pub const ALL: [Emit; 4] = [Emit::SpectrumCsv, Emit::PeaksJson, Emit::BudgetCsv, Emit::PlotData];

    pub fn as_str(self) -> &'static str {
        match self {
            Emit::SpectrumCsv => "spectrum_csv",
            Emit::PeaksJson => "peaks_json",
            Emit::BudgetCsv => "budget_csv",
            Emit::PlotData => "plot_data",
        }
    }
}

/// A fully validated run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    /// Second Hamiltonian, transition mode only.
    pub model2: Option<ModelConfig>,
    pub initial_state: String,
    pub observable: ObservableSpec,
    pub symmetry: Option<SymmetrySpec>,
    /// Also run the symmetry-weighted gap scan.
    pub degeneracy_probe: bool,
    pub scan: ScanConfig,
    pub peak_threshold: f64,
    pub peak_signal: PeakSignal,
    pub output_dir: PathBuf,
    pub emit: BTreeSet<Emit>,
    /// Cutoff tolerance used for `T = "auto"` and the budget's `min_T`.
    pub eps_c: f64,
    /// The configuration text, embedded in every output.
    pub source: String,
}

impl RunConfig {
    pub fn emits(&self, e: Emit) -> bool {
        self.emit.contains(&e)
    }
}

/// Reads and validates `path`. Relative paths inside resolve against its directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path.parent().unwrap_or(Path::new("."))).map_err(|diags| {
        let lines: Vec<String> = diags.iter().map(|d| format!("{}: {d}", path.display())).collect();
        Error::Config(lines.join("\n"))
    })
}

/// All violations in the file at `path`; empty when the config is valid.
pub fn check_config(path: &Path) -> Result<Vec<Diagnostic>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(match parse_config(&text, path.parent().unwrap_or(Path::new("."))) {
        Ok(_) => Vec::new(),
        Err(d) => d,
    })
}

pub fn parse_config(text: &str, base_dir: &Path) -> std::result::Result<RunConfig, Vec<Diagnostic>> {
    let root: Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            let e: toml::de::Error = e;
            let line = e.span().map(|s| line_at(text, s.start));
            return Err(vec![Diagnostic {
                line,
                key: "syntax".into(),
                message: e.message().trim().to_string(),
            }]);
        }
    };
    let mut r = Reader {
        text,
        base_dir,
        diags: Vec::new(),
    };
    let cfg = r.run_config(&root);
    match cfg {
        Some(cfg) if r.diags.is_empty() => Ok(cfg),
        _ => {
            r.diags.sort_by_key(|d| d.line.unwrap_or(usize::MAX));
            Err(r.diags)
        }
    }
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

struct Reader<'a> {
    text: &'a str,
    base_dir: &'a Path,
    diags: Vec<Diagnostic>,
}

fn empty() -> &'static Table {
    static EMPTY: std::sync::OnceLock<Table> = std::sync::OnceLock::new();
    EMPTY.get_or_init(Table::new)
}

impl<'a> Reader<'a> {
    fn line_of(&self, section: &str, key: Option<&str>) -> Option<usize> {
        let mut current = String::new();
        let mut header = None;
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix('[') {
                current = rest.split(']').next().unwrap_or("").trim().to_string();
                if current == section && header.is_none() {
                    header = Some(i + 1);
                }
                continue;
            }
            if let (Some(k), true) = (key, current == section) {
                if let Some((lhs, _)) = line.split_once('=') {
                    if lhs.trim().trim_matches('"') == k {
                        return Some(i + 1);
                    }
                }
            }
        }
        header
    }

    fn report(&mut self, section: &str, key: Option<&str>, message: impl Into<String>) {
        let line = self.line_of(section, key);
        let key = match key {
            Some(k) => format!("[{section}] {k}"),
            None => format!("[{section}]"),
        };
        self.diags.push(Diagnostic {
            line,
            key,
            message: message.into(),
        });
    }

    fn section<'t>(&mut self, root: &'t Table, name: &str) -> Option<&'t Table> {
        match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.report(name, None, "expected a table");
                None
            }
        }
    }

    fn allow(&mut self, sec: &str, t: &Table, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.report(sec, Some(k), format!("unknown key (expected one of: {})", allowed.join(", ")));
            }
        }
    }

    fn float(&mut self, sec: &str, t: &Table, key: &str) -> Option<f64> {
        match t.get(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.report(sec, Some(key), "expected a number");
                None
            }
        }
    }

    fn integer(&mut self, sec: &str, t: &Table, key: &str) -> Option<i64> {
        match t.get(key)? {
            Value::Integer(i) => Some(*i),
            _ => {
                self.report(sec, Some(key), "expected an integer");
                None
            }
        }
    }

    fn string(&mut self, sec: &str, t: &Table, key: &str) -> Option<String> {
        match t.get(key)? {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.report(sec, Some(key), "expected a string");
                None
            }
        }
    }

    fn boolean(&mut self, sec: &str, t: &Table, key: &str) -> Option<bool> {
        match t.get(key)? {
            Value::Boolean(b) => Some(*b),
            _ => {
                self.report(sec, Some(key), "expected true or false");
                None
            }
        }
    }

    fn require<T>(&mut self, sec: &str, t: &Table, key: &str, v: Option<T>) -> Option<T> {
        if v.is_none() && !t.contains_key(key) {
            self.report(sec, Some(key), "missing required key");
        }
        v
    }

    fn choice<T: Copy>(&mut self, sec: &str, t: &Table, key: &str, options: &[(&str, T)], default: T) -> Option<T> {
        let Some(s) = self.string(sec, t, key) else {
            return (!t.contains_key(key)).then_some(default);
        };
        match options.iter().find(|(name, _)| *name == s) {
            Some((_, v)) => Some(*v),
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.report(sec, Some(key), format!("unknown value {s:?} (expected one of: {})", names.join(", ")));
                None
            }
        }
    }

    fn path(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn model(&mut self, sec: &str, t: &Table) -> Option<(ModelConfig, Option<Hamiltonian>)> {
        let kind = self.string(sec, t, "kind");
        let kind = self.require(sec, t, "kind", kind)?;
        let (source, default_units) = match kind.as_str() {
            "heisenberg" => {
                self.allow(sec, t, &["kind", "n", "J", "h", "boundary", "units"]);
                let n = self.integer(sec, t, "n");
                let n = self.require(sec, t, "n", n);
                let j = self.float(sec, t, "J");
                let j = self.require(sec, t, "J", j);
                let h = self.float(sec, t, "h");
                let h = self.require(sec, t, "h", h);
                let boundary = self.choice(
                    sec,
                    t,
                    "boundary",
                    &[("open", Boundary::Open), ("periodic", Boundary::Periodic)],
                    Boundary::Open,
                );
                let n_sites = match n {
                    Some(n) if n >= 2 => Some(n as usize),
                    Some(n) => {
                        self.report(sec, Some("n"), format!("a Heisenberg chain needs at least 2 sites, got {n}"));
                        None
                    }
                    None => None,
                };
                let (n_sites, j, h, boundary) = (n_sites?, j?, h?, boundary?);
                (ModelSource::Heisenberg { n_sites, j, h, boundary }, "model")
            }
            "file" => {
                self.allow(sec, t, &["kind", "path", "units"]);
                let p = self.string(sec, t, "path");
                let p = self.require(sec, t, "path", p)?;
                (ModelSource::File(self.path(&p)), "hartree")
            }
            other => {
                self.report(sec, Some("kind"), format!("unknown model kind {other:?} (expected heisenberg or file)"));
                return None;
            }
        };
        let units = self.string(sec, t, "units").unwrap_or_else(|| default_units.to_string());
        let cfg = ModelConfig { source, units };
        let built = match cfg.build() {
            Ok(h) => Some(h),
            Err(e) => {
                let key = if matches!(cfg.source, ModelSource::File(_)) { "path" } else { "kind" };
                self.report(sec, Some(key), e.to_string());
                None
            }
        };
        Some((cfg, built))
    }

    fn grid(&mut self, sec: &str, t: &Table, prefix: &str) -> Option<EnergyGrid> {
        let keys = [format!("{prefix}_min"), format!("{prefix}_max"), format!("{prefix}_step")];
        let mut vals = [None; 3];
        for (v, k) in vals.iter_mut().zip(&keys) {
            let x = self.float(sec, t, k);
            *v = self.require(sec, t, k, x);
        }
        let [min, max, step] = vals;
        match EnergyGrid::new(min?, max?, step?) {
            Ok(g) => Some(g),
            Err(e) => {
                self.report(sec, Some(&keys[2]), e.to_string());
                None
            }
        }
    }

    fn run_config(&mut self, root: &Table) -> Option<RunConfig> {
        for (k, v) in root {
            if !SECTIONS.contains(&k.as_str()) {
                let msg = format!("unknown section (expected one of: {})", SECTIONS.join(", "));
                if v.is_table() {
                    self.report(k, None, msg);
                } else {
                    let line = self.line_of("", Some(k));
                    self.diags.push(Diagnostic {
                        line,
                        key: k.clone(),
                        message: msg,
                    });
                }
            }
        }

        // [model], [model2]
        let model = match self.section(root, "model") {
            Some(t) => self.model("model", t),
            None => {
                self.report("model", None, "missing required section");
                None
            }
        };
        let n_qubits = model.as_ref().and_then(|(_, h)| h.as_ref().map(Hamiltonian::n_qubits));
        let model2 = self.section(root, "model2").map(|t| self.model("model2", t));

        // [budget]
        let budget = self.section(root, "budget").unwrap_or(empty());
        self.allow("budget", budget, &["eps"]);
        let eps_c = match self.float("budget", budget, "eps") {
            Some(e) if e.is_finite() && e > 0.0 => Some(e),
            Some(e) => {
                self.report("budget", Some("eps"), format!("eps = {e} must be > 0"));
                None
            }
            None => (!budget.contains_key("eps")).then_some(0.01),
        };

        // [scan]
        let scan_t = self.section(root, "scan");
        if scan_t.is_none() {
            self.report("scan", None, "missing required section");
        }
        let st = scan_t.unwrap_or(empty());
        let s = "scan";
        self.allow(
            s,
            st,
            &[
                "mode", "cooling", "a", "beta", "T", "n_samples", "e_min", "e_max", "e_step", "e2_min",
                "e2_max", "e2_step", "shots", "seed", "evolution", "trotter_rate", "sampling", "backend",
                "tau", "degeneracy_probe",
            ],
        );
        let mode = self.choice(
            s,
            st,
            "mode",
            &[
                ("gap", Mode::Gap),
                ("energy", Mode::Energy),
                ("transition", Mode::Transition),
                ("grid2d", Mode::Grid2d),
            ],
            Mode::Gap,
        );
        let mode = if st.contains_key("mode") || scan_t.is_none() {
            mode
        } else {
            self.report(s, Some("mode"), "missing required key");
            None
        };
        let backend = self.choice(
            s,
            st,
            "backend",
            &[("monte_carlo", Backend::MonteCarlo), ("quadrature", Backend::Quadrature)],
            Backend::MonteCarlo,
        );
        let sampling = self.choice(
            s,
            st,
            "sampling",
            &[("stratified", Sampling::Stratified), ("iid", Sampling::Iid)],
            Sampling::Stratified,
        );

        let cooling_kind = self.choice(s, st, "cooling", &[("gaussian", true), ("lorentzian", false)], true);
        let cooling = match cooling_kind {
            Some(true) => {
                if st.contains_key("beta") {
                    self.report(s, Some("beta"), "beta belongs to the lorentzian cooling function");
                }
                match self.float(s, st, "a") {
                    Some(a) if a > 0.0 && a < 1.0 => Some(CoolingFunction::Gaussian { a }),
                    Some(a) => {
                        self.report(s, Some("a"), format!("cooling parameter a = {a} must satisfy 0 < a < 1"));
                        None
                    }
                    None => {
                        self.require::<f64>(s, st, "a", None);
                        None
                    }
                }
            }
            Some(false) => {
                if st.contains_key("a") {
                    self.report(s, Some("a"), "a belongs to the gaussian cooling function");
                }
                match self.float(s, st, "beta") {
                    Some(b) if b.is_finite() && b > 0.0 => Some(CoolingFunction::Lorentzian { beta: b }),
                    Some(b) => {
                        self.report(s, Some("beta"), format!("cooling width beta = {b} must be > 0"));
                        None
                    }
                    None => {
                        self.require::<f64>(s, st, "beta", None);
                        None
                    }
                }
            }
            None => None,
        };

        let t_max = match st.get("T") {
            Some(Value::String(v)) if v == "auto" => match (cooling, eps_c) {
                (Some(CoolingFunction::Gaussian { a }), Some(eps)) => match min_sampling_range(a, eps) {
                    Ok(t) => Some(t),
                    Err(e) => {
                        self.report(s, Some("T"), e.to_string());
                        None
                    }
                },
                (Some(CoolingFunction::Lorentzian { .. }), _) => {
                    self.report(s, Some("T"), "T = \"auto\" needs the gaussian cooling function");
                    None
                }
                _ => None,
            },
            Some(Value::String(_)) => {
                self.report(s, Some("T"), "expected a number or \"auto\"");
                None
            }
            _ => {
                let t = self.float(s, st, "T");
                match self.require(s, st, "T", t) {
                    Some(t) if t.is_finite() && t > 0.0 => Some(t),
                    Some(t) => {
                        self.report(s, Some("T"), format!("cutoff T = {t} must be > 0"));
                        None
                    }
                    None => None,
                }
            }
        };

        let n_samples = match self.integer(s, st, "n_samples") {
            Some(n) if n >= 2 && n % 2 == 0 => Some(n as usize),
            Some(n) => {
                self.report(s, Some("n_samples"), format!("n_samples = {n} must be even and at least 2"));
                None
            }
            None if st.contains_key("n_samples") => None,
            None if backend == Some(Backend::Quadrature) => Some(2),
            None => {
                self.report(s, Some("n_samples"), "missing required key");
                None
            }
        };

        let e_grid = if scan_t.is_some() { self.grid(s, st, "e") } else { None };
        let has_e2 = ["e2_min", "e2_max", "e2_step"].iter().any(|k| st.contains_key(*k));
        let e2_grid = if mode == Some(Mode::Grid2d) {
            self.grid(s, st, "e2")
        } else {
            if has_e2 {
                self.report(s, Some("e2_min"), "the second energy grid is only used in grid2d mode");
            }
            None
        };

        let shots = match st.get("shots") {
            None => Some(Shots::Exact),
            Some(Value::String(v)) if v == "exact" => Some(Shots::Exact),
            Some(Value::Integer(n)) if *n >= 1 => Some(Shots::Finite(*n as u64)),
            Some(_) => {
                self.report(s, Some("shots"), "shots must be \"exact\" or a positive integer");
                None
            }
        };
        let seed = match self.integer(s, st, "seed") {
            Some(v) if v >= 0 => Some(v as u64),
            Some(v) => {
                self.report(s, Some("seed"), format!("seed = {v} must be non-negative"));
                None
            }
            None => (!st.contains_key("seed")).then_some(0),
        };
        let evolution = match self.choice(s, st, "evolution", &[("exact", true), ("trotter", false)], true) {
            Some(true) => {
                if st.contains_key("trotter_rate") {
                    self.report(s, Some("trotter_rate"), "trotter_rate is only used with evolution = \"trotter\"");
                }
                if let Some(n) = n_qubits.filter(|&n| n > DEFAULT_DENSE_LIMIT) {
                    self.report(
                        s,
                        Some("evolution"),
                        format!("exact evolution diagonalizes densely; {n} qubits exceeds the limit of {DEFAULT_DENSE_LIMIT}, use trotter"),
                    );
                }
                Some(Evolution::Exact)
            }
            Some(false) => match self.float(s, st, "trotter_rate") {
                Some(r) if r.is_finite() && r > 0.0 => Some(Evolution::Trotter { steps_per_unit_time: r }),
                Some(r) => {
                    self.report(s, Some("trotter_rate"), format!("trotter_rate = {r} must be > 0"));
                    None
                }
                None => {
                    self.require::<f64>(s, st, "trotter_rate", None);
                    None
                }
            },
            None => None,
        };
        let tau = match self.float(s, st, "tau") {
            Some(t) if t.is_finite() && t > 0.0 => Some(Some(t)),
            Some(t) => {
                self.report(s, Some("tau"), format!("tau = {t} must be > 0"));
                None
            }
            None => (!st.contains_key("tau")).then_some(None),
        };
        let degeneracy_probe = self.boolean(s, st, "degeneracy_probe").unwrap_or(false);

        // [state]
        let state_t = self.section(root, "state");
        if state_t.is_none() {
            self.report("state", None, "missing required section");
        }
        let state_t = state_t.unwrap_or(empty());
        self.allow("state", state_t, &["spec"]);
        let spec = self.string("state", state_t, "spec");
        let spec = if root.contains_key("state") {
            self.require("state", state_t, "spec", spec)
        } else {
            spec
        };
        let spec = spec.map(|sp| match sp.strip_prefix("file:") {
            Some(p) => format!("file:{}", self.path(p).display()),
            None => sp,
        });
        if let (Some(sp), Some(n)) = (&spec, n_qubits) {
            if let Err(e) = prepare_state(sp, n) {
                self.report("state", Some("spec"), e.to_string());
            }
        }

        // [observable]
        let obs_t = self.section(root, "observable").unwrap_or(empty());
        self.allow("observable", obs_t, &["kind", "path"]);
        let obs_kind = self.choice(
            "observable",
            obs_t,
            "kind",
            &[("projector", 0), ("identity", 1), ("pauli_sum", 2)],
            0,
        );
        let observable = match obs_kind {
            Some(0) => Some(ObservableSpec::Projector),
            Some(1) => Some(ObservableSpec::Identity),
            Some(_) => {
                let p = self.string("observable", obs_t, "path");
                self.require("observable", obs_t, "path", p)
                    .map(|p| ObservableSpec::PauliSum(self.path(&p)))
            }
            None => None,
        };
        if obs_kind != Some(2) && obs_t.contains_key("path") {
            self.report("observable", Some("path"), "path is only used with kind = \"pauli_sum\"");
        }
        if let (Some(o), Some(n)) = (&observable, n_qubits) {
            if let Err(e) = o.build(n) {
                self.report("observable", Some("path"), e.to_string());
            }
        }

        // [symmetry]
        let symmetry = match self.section(root, "symmetry") {
            None => None,
            Some(t) => {
                self.allow("symmetry", t, &["kind", "path"]);
                let kind = self.choice("symmetry", t, "kind", &[("total_z", true), ("file", false)], true);
                let sym = match kind {
                    Some(true) => Some(SymmetrySpec::TotalZ),
                    Some(false) => {
                        let p = self.string("symmetry", t, "path");
                        self.require("symmetry", t, "path", p).map(|p| SymmetrySpec::File(self.path(&p)))
                    }
                    None => None,
                };
                if let (Some(sy), Some(n)) = (&sym, n_qubits) {
                    if let Err(e) = sy.build(n) {
                        self.report("symmetry", Some("path"), e.to_string());
                    }
                }
                sym
            }
        };

        // [peaks]
        let pk = self.section(root, "peaks").unwrap_or(empty());
        self.allow("peaks", pk, &["threshold", "signal"]);
        let peak_threshold = match self.float("peaks", pk, "threshold") {
            Some(x) if x > 0.0 && x < 1.0 => Some(x),
            Some(x) => {
                self.report("peaks", Some("threshold"), format!("threshold = {x} must satisfy 0 < threshold < 1"));
                None
            }
            None => (!pk.contains_key("threshold")).then_some(DEFAULT_THRESHOLD),
        };
        let peak_signal = self.choice(
            "peaks",
            pk,
            "signal",
            &[("real", PeakSignal::Real), ("magnitude", PeakSignal::Magnitude)],
            PeakSignal::Real,
        );

        // [output]
        let out = self.section(root, "output").unwrap_or(empty());
        self.allow("output", out, &["dir", "emit"]);
        let dir = self.string("output", out, "dir").unwrap_or_else(|| "out".into());
        let output_dir = self.path(&dir);
        let emit = match out.get("emit") {
            None => Some(Emit::ALL.into_iter().collect()),
            Some(Value::Array(items)) => {
                let mut set = BTreeSet::new();
                let mut ok = true;
                for item in items {
                    match Emit::ALL.iter().find(|e| item.as_str() == Some(e.as_str())) {
                        Some(e) => {
                            set.insert(*e);
                        }
                        None => {
                            ok = false;
                            let names: Vec<&str> = Emit::ALL.iter().map(|e| e.as_str()).collect();
                            self.report("output", Some("emit"), format!("unknown artifact {item} (expected: {})", names.join(", ")));
                        }
                    }
                }
                ok.then_some(set)
            }
            Some(_) => {
                self.report("output", Some("emit"), "expected a list of artifact names");
                None
            }
        };

        // Cross-section rules.
        if let Some(mode) = mode {
            match (mode, &model2) {
                (Mode::Transition, None) => {
                    self.report("scan", Some("mode"), "transition mode needs a second model in [model2]");
                }
                (Mode::Transition, Some(Some((_, Some(h2))))) => {
                    if let Some(n) = n_qubits.filter(|&n| n != h2.n_qubits()) {
                        self.report(
                            "model2",
                            None,
                            format!("transition mode needs equal qubit counts: [model] has {n}, [model2] has {}", h2.n_qubits()),
                        );
                    }
                }
                (Mode::Transition, _) => {}
                (_, Some(_)) => self.report("model2", None, "[model2] is only used in transition mode"),
                (_, None) => {}
            }
            if matches!(mode, Mode::Transition | Mode::Grid2d) && matches!(shots, Some(Shots::Finite(_))) {
                self.report(s, Some("shots"), format!("{} mode uses exact amplitudes; set shots = \"exact\"", mode.as_str()));
            }
            if mode == Mode::Energy && root.contains_key("observable") {
                self.report("observable", None, "energy mode has no observable");
            }
            if mode == Mode::Grid2d && backend == Some(Backend::Quadrature) {
                self.report(s, Some("backend"), "grid2d mode is Monte Carlo only");
            }
            if degeneracy_probe {
                if symmetry.is_none() && !root.contains_key("symmetry") {
                    self.report(s, Some("degeneracy_probe"), "the degeneracy probe needs a symmetry operator in [symmetry]");
                }
                if mode != Mode::Gap {
                    self.report(s, Some("degeneracy_probe"), "the degeneracy probe runs in gap mode only");
                }
                if matches!(shots, Some(Shots::Finite(_))) {
                    self.report(s, Some("degeneracy_probe"), "the degeneracy probe uses exact expectation values");
                }
            }
            if mode == Mode::Gap && matches!(observable, Some(ObservableSpec::Identity)) && matches!(shots, Some(Shots::Finite(_))) {
                self.report("observable", Some("kind"), "the identity observable has no shot noise; set shots = \"exact\"");
            }
        }
        if let (Some(sym), Some((_, Some(h)))) = (&symmetry, &model) {
            if degeneracy_probe {
                if let Ok(o) = sym.build(h.n_qubits()) {
                    match crate::pauli::commutator_norm(&o, h) {
                        Ok(norm) if norm > crate::estimator::COMMUTATOR_TOL => self.report(
                            "symmetry",
                            None,
                            format!("symmetry operator does not commute with the Hamiltonian (commutator norm {norm:e})"),
                        ),
                        Ok(_) => {}
                        Err(e) => self.report("symmetry", None, e.to_string()),
                    }
                }
            }
        }

        let scan = ScanConfig {
            mode: mode?,
            cooling: cooling?,
            t_max: t_max?,
            n_samples: n_samples?,
            e_grid: e_grid?,
            e2_grid,
            shots: shots?,
            seed: seed?,
            evolution: evolution?,
            sampling: sampling?,
            backend: backend?,
            tau: tau?,
        };
        if let Err(e) = scan.validate() {
            self.report(s, None, e.to_string());
        }
        if scan.backend == Backend::Quadrature {
            if let Err(e) = scan.quadrature_step() {
                self.report(s, Some(if st.contains_key("tau") { "tau" } else { "e_max" }), e.to_string());
            }
        }
        let (model, _) = model?;
        Some(RunConfig {
            model,
            model2: model2.flatten().map(|(m, _)| m),
            initial_state: spec?,
            observable: observable?,
            symmetry,
            degeneracy_probe,
            scan,
            peak_threshold: peak_threshold?,
            peak_signal: peak_signal?,
            output_dir,
            emit: emit?,
            eps_c: eps_c?,
            source: self.text.lines().collect::<Vec<_>>().join("\n"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHAIN: &str = r#"
[model]
kind = "heisenberg"
n = 4
J = 1.0
h = 1.0

[state]
spec = 'super("+++-", "0011")'

[scan]
mode = "gap"
a = 0.0282842712474619
T = "auto"
n_samples = 10000
e_min = -0.5
e_max = 14.5
e_step = 0.01414213562373095
seed = 2024

[budget]
eps = 0.01
"#;

    fn parse(text: &str) -> std::result::Result<RunConfig, Vec<Diagnostic>> {
        parse_config(text, Path::new("."))
    }

    #[test]
    fn valid_config_has_no_diagnostics() {
        let cfg = parse(CHAIN).unwrap();
        assert_eq!(cfg.scan.n_samples, 10_000);
        assert_eq!(cfg.scan.seed, 2024);
        assert!((cfg.scan.t_max - min_sampling_range(0.0282842712474619, 0.01).unwrap()).abs() < 1e-12);
        assert_eq!(cfg.model.units, "model");
        assert_eq!(cfg.emit.len(), 4);
        assert_eq!(cfg.observable, ObservableSpec::Projector);
    }

    #[test]
    fn cooling_range_is_line_anchored() {
        let text = CHAIN.replace("a = 0.0282842712474619", "a = 1.5");
        let d = parse(&text).unwrap_err();
        let line = text.lines().position(|l| l.starts_with("a = 1.5")).unwrap() + 1;
        assert!(d.iter().any(|d| d.line == Some(line) && d.message.contains("0 < a < 1")), "{d:?}");
    }

    #[test]
    fn transition_needs_second_model() {
        let text = CHAIN.replace("mode = \"gap\"", "mode = \"transition\"");
        let d = parse(&text).unwrap_err();
        assert!(d.iter().any(|d| d.message.contains("[model2]")), "{d:?}");
    }

    #[test]
    fn transition_needs_equal_qubit_counts() {
        let text = CHAIN.replace("mode = \"gap\"", "mode = \"transition\"")
            + "\n[model2]\nkind = \"heisenberg\"\nn = 3\nJ = 1.0\nh = 0.5\n";
        let d = parse(&text).unwrap_err();
        assert!(d.iter().any(|d| d.message.contains("equal qubit counts")), "{d:?}");
    }

    #[test]
    fn all_violations_reported() {
        let text = CHAIN
            .replace("a = 0.0282842712474619", "a = -1")
            .replace("n_samples = 10000", "n_samples = 7")
            .replace("seed = 2024", "seed = 2024\nbogus = 1");
        let d = parse(&text).unwrap_err();
        assert!(d.len() >= 3, "{d:?}");
        assert!(d.iter().any(|d| d.key == "[scan] bogus"));
        assert!(d.iter().any(|d| d.key == "[scan] n_samples"));
    }

    #[test]
    fn probe_needs_symmetry() {
        let text = CHAIN.replace("seed = 2024", "seed = 2024\ndegeneracy_probe = true");
        let d = parse(&text).unwrap_err();
        assert!(d.iter().any(|d| d.message.contains("[symmetry]")), "{d:?}");
        let ok = text + "\n[symmetry]\nkind = \"total_z\"\n";
        assert!(parse(&ok).unwrap().degeneracy_probe);
    }

    #[test]
    fn syntax_error_has_line() {
        let d = parse("[scan]\nmode = \n").unwrap_err();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].line, Some(2));
    }

    #[test]
    fn bad_state_spec_reported() {
        let text = CHAIN.replace(r#"'super("+++-", "0011")'"#, "\"01x0\"");
        let d = parse(&text).unwrap_err();
        assert!(d.iter().any(|d| d.key == "[state] spec"), "{d:?}");
    }

    #[test]
    fn aliasing_reported_for_quadrature() {
        let text = CHAIN.replace("seed = 2024", "seed = 2024\nbackend = \"quadrature\"\ntau = 1.0");
        let d = parse(&text).unwrap_err();
        assert!(d.iter().any(|d| d.key == "[scan] tau"), "{d:?}");
    }
}
