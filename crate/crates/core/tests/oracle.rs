//! Library linear algebra and file formats against the test-only oracle.

mod common;

use gapscan::estimator::{scan, Backend, EnergyGrid, Evolution, KernelEngine, Mode, ScanConfig, Shots};
use gapscan::pauli::{build_heisenberg, Hamiltonian, PauliTerm};
use gapscan::peaks::find_peaks;
use gapscan::state::{eigendecompose, prepare_state, Statevector};
use gapscan::{Complex64, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn oracle_eigenvalues(h: &Hamiltonian) -> Vec<f64> {
    let psi = Statevector::basis(h.n_qubits(), 0).unwrap();
    let mut out = Vec::new();
    for l in common::levels(h, &psi) {
        out.extend(std::iter::repeat_n(l.energy, l.multiplicity));
    }
    out
}

#[test]
fn dense_spectrum_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let letters = ['I', 'X', 'Y', 'Z'];
    for n in 1..=4 {
        for _ in 0..5 {
            let terms: Vec<PauliTerm> = (0..6)
                .map(|_| {
                    let label: String = (0..n).map(|_| letters[rng.random_range(0..4)]).collect();
                    PauliTerm::parse(rng.random_range(-1.0..1.0), &label).unwrap()
                })
                .collect();
            let h = Hamiltonian::new(n, terms).unwrap();
            let got = eigendecompose(&h).unwrap().eigenvalues;
            let want = oracle_eigenvalues(&h);
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-10, "{g} vs {w}");
            }
        }
    }
}

#[test]
fn heisenberg_matches_oracle() {
    let h = build_heisenberg(4, 1.0, 1.0).unwrap();
    let got = eigendecompose(&h).unwrap().eigenvalues;
    for (g, w) in got.iter().zip(oracle_eigenvalues(&h)) {
        assert!((g - w).abs() < 1e-10);
    }
}

#[test]
fn h2_fixture_ground_energy() {
    let h = Hamiltonian::load(fixture("h2_sto3g.json")).unwrap();
    assert_eq!(h.n_qubits(), 4);
    assert_eq!(h.len(), 15);
    let e0 = eigendecompose(&h).unwrap().ground_energy();
    assert!((e0 - oracle_eigenvalues(&h)[0]).abs() < 1e-10);
    assert!((e0 + 1.137284).abs() < 1e-3, "{e0}");
}

#[test]
fn h2_energy_scan_lowest_peak() {
    let h = Hamiltonian::load(fixture("h2_sto3g.json")).unwrap();
    let psi0 = prepare_state("---+", 4).unwrap();
    let a = 1.0 / (50.0 * std::f64::consts::SQRT_2);
    let grid = EnergyGrid::new(-2.0, 1.0, a / 2.0).unwrap();
    let cfg = ScanConfig::new(Mode::Energy, a, 6.0 / a, 2, grid)
        .unwrap()
        .with_backend(Backend::Quadrature);
    let engine = KernelEngine::energy(&h, &psi0, Evolution::Exact, Shots::Exact, 0).unwrap();
    let peaks = find_peaks(&scan(&engine, &cfg).unwrap(), 0.02).unwrap();
    let lowest = peaks.locations().into_iter().fold(f64::INFINITY, f64::min);
    assert!((lowest + 1.137).abs() < 5e-3, "{lowest}");
}

#[test]
fn hamiltonian_json_contract() {
    let text = r#"{"n_qubits": 2, "terms": [{"coeff": [0.5, 0.0], "pauli": "XZ"}, {"coeff": [-1.0, 0.0], "pauli": "II"}]}"#;
    let h = Hamiltonian::from_json(text).unwrap();
    assert_eq!(h.len(), 2);
    let back = Hamiltonian::from_json(&h.to_json().unwrap()).unwrap();
    assert_eq!(back, h);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.json");
    h.save(&path).unwrap();
    assert_eq!(Hamiltonian::load(&path).unwrap(), h);

    let bad = r#"{"n_qubits": 2, "terms": [{"coeff": [0.5, 0.0], "pauli": "XQ"}]}"#;
    assert!(Hamiltonian::from_json(bad).is_err());
    let short = r#"{"n_qubits": 3, "terms": [{"coeff": [0.5, 0.0], "pauli": "XZ"}]}"#;
    assert!(Hamiltonian::from_json(short).is_err());
    let complex = r#"{"n_qubits": 1, "terms": [{"coeff": [0.5, 0.3], "pauli": "X"}]}"#;
    assert!(matches!(Hamiltonian::from_json(complex), Err(Error::NotHermitian { .. })));
}

#[test]
fn amplitude_file_contract() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("psi.json");
    let s = 0.5f64.sqrt();
    std::fs::write(&path, format!("[[{s}, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, {s}]]")).unwrap();
    let spec = format!("file:{}", path.display());
    let psi = prepare_state(&spec, 2).unwrap();
    assert_eq!(psi.amplitudes()[3], Complex64::new(0.0, s));
    let again = Statevector::from_json(&psi.to_json().unwrap(), 2).unwrap();
    assert_eq!(again, psi);

    std::fs::write(&path, "[[1.0, 0.0], [1.0, 0.0]]").unwrap();
    assert!(matches!(prepare_state(&spec, 1), Err(Error::NotNormalized { .. })));
    assert!(prepare_state(&spec, 2).is_err());
    assert!(prepare_state("file:/nonexistent/psi.json", 1).is_err());
}

#[test]
fn state_spec_grammar() {
    let psi = prepare_state(r#"super("01", "10")"#, 2).unwrap();
    let s = 0.5f64.sqrt();
    assert!((psi.amplitudes()[1].re - s).abs() < 1e-15);
    assert!((psi.amplitudes()[2].re - s).abs() < 1e-15);
    let minus = prepare_state("-", 1).unwrap();
    assert!((minus.amplitudes()[1].re + s).abs() < 1e-15);
    assert!(prepare_state("0a", 2).is_err());
    assert!(prepare_state("0", 2).is_err());
    assert!(prepare_state(r#"super("0", "0""#, 1).is_err());
}
