//! Statevectors, dense spectra and real-time evolution.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};

use crate::pauli::{dot, Hamiltonian, Observable, PauliString, DEFAULT_DENSE_LIMIT};
use crate::rng::{Domain, StreamKey};
use crate::{Error, Result};

/// Allowed deviation of a statevector norm from one.
pub const NORM_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Normalized amplitude vector of length `2^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// Wraps amplitudes that are already normalized (within [`NORM_TOL`]).
    pub fn new(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_len(n_qubits, amps.len())?;
        if amps.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::NonFinite("statevector amplitude".into()));
        }
        let norm = norm(&amps);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { n_qubits, amps })
    }

    /// Rescales arbitrary amplitudes to unit norm.
    pub fn normalized(n_qubits: usize, mut amps: Vec<Complex64>) -> Result<Self> {
        check_len(n_qubits, amps.len())?;
        let nrm = norm(&amps);
        if !nrm.is_finite() {
            return Err(Error::NonFinite("statevector amplitude".into()));
        }
        if nrm < 1e-14 {
            return Err(Error::invalid("state has zero norm"));
        }
        amps.iter_mut().for_each(|a| *a /= nrm);
        Ok(Self { n_qubits, amps })
    }

    /// Computational basis state `|index>`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::invalid(format!("basis index {index} >= {dim}")));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    /// `e^{i theta} |psi>`.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let ph = Complex64::from_polar(1.0, theta);
        Self {
            n_qubits: self.n_qubits,
            amps: self.amps.iter().map(|a| a * ph).collect(),
        }
    }

    /// Reads a JSON amplitude list `[[re, im], ...]` of length `2^n`.
    pub fn load(path: impl AsRef<Path>, n_qubits: usize) -> Result<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_json(&text, n_qubits)
    }

    pub fn from_json(text: &str, n_qubits: usize) -> Result<Self> {
        let raw: Vec<[f64; 2]> = serde_json::from_str(text)?;
        Self::new(
            n_qubits,
            raw.into_iter().map(|[re, im]| Complex64::new(re, im)).collect(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let raw: Vec<[f64; 2]> = self.amps.iter().map(|a| [a.re, a.im]).collect();
        Ok(serde_json::to_string(&raw)?)
    }
}

fn check_len(n_qubits: usize, len: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > 30 {
        return Err(Error::invalid(format!("unsupported qubit count {n_qubits}")));
    }
    if len != 1usize << n_qubits {
        return Err(Error::invalid(format!(
            "{len} amplitudes for {n_qubits} qubits (expected {})",
            1usize << n_qubits
        )));
    }
    Ok(())
}

fn norm(amps: &[Complex64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Builds a state from a spec string.
///
/// Grammar:
///
/// * a string over `{0, 1, +, -}` with one character per qubit (tensor
///   product of `|0>`, `|1>`, `(|0> +- |1>)/sqrt 2`);
/// * `super(spec, spec, ...)`: equal-weight sum of the component states,
///   normalized after summation (components may be quoted);
/// * `file:<path>`: JSON amplitude list.
pub fn prepare_state(spec: &str, n_qubits: usize) -> Result<Statevector> {
    parse_spec(spec, n_qubits, 0)
}

fn parse_spec(spec: &str, n_qubits: usize, offset: usize) -> Result<Statevector> {
    let lead = spec.len() - spec.trim_start().len();
    let s = unquote(spec.trim());
    let offset = offset + lead + usize::from(s.len() != spec.trim().len());
    if let Some(path) = s.strip_prefix("file:") {
        return Statevector::load(path.trim(), n_qubits);
    }
    if let Some(body) = s.strip_prefix("super(") {
        let inner = body.strip_suffix(')').ok_or_else(|| Error::Parse {
            position: offset + s.len(),
            message: "unterminated super(...)".into(),
        })?;
        let body_offset = offset + "super(".len();
        let mut acc = vec![ZERO; 1usize << n_qubits];
        let mut count = 0;
        for (start, part) in split_top_level(inner) {
            let component = parse_spec(part, n_qubits, body_offset + start)?;
            for (a, c) in acc.iter_mut().zip(component.amplitudes()) {
                *a += c;
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::Parse {
                position: body_offset,
                message: "super() needs at least one component".into(),
            });
        }
        if norm(&acc) < 1e-12 {
            return Err(Error::invalid(format!(
                "components of {s} cancel to the zero vector"
            )));
        }
        return Statevector::normalized(n_qubits, acc);
    }
    product_state(s, n_qubits, offset)
}

fn unquote(s: &str) -> &str {
    for q in ['"', '\''] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

fn split_top_level(s: &str) -> Vec<(usize, &str)> {
    let mut parts = Vec::new();
    let (mut depth, mut quote, mut start) = (0i32, None::<char>, 0usize);
    for (i, ch) in s.char_indices() {
        match (ch, quote) {
            ('"' | '\'', None) => quote = Some(ch),
            (c, Some(q)) if c == q => quote = None,
            ('(', None) => depth += 1,
            (')', None) => depth -= 1,
            (',', None) if depth == 0 => {
                parts.push((start, &s[start..i]));
                start = i + 1;
            }
            _ => {}
        }
    }
    if !s[start..].trim().is_empty() || !parts.is_empty() {
        parts.push((start, &s[start..]));
    }
    parts
}

fn product_state(s: &str, n_qubits: usize, offset: usize) -> Result<Statevector> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut factors = Vec::with_capacity(n_qubits);
    for (pos, ch) in s.chars().enumerate() {
        let f = match ch {
            '0' => [1.0, 0.0],
            '1' => [0.0, 1.0],
            '+' => [h, h],
            '-' => [h, -h],
            other => {
                return Err(Error::Parse {
                    position: offset + pos,
                    message: format!("illegal state character {other:?}"),
                })
            }
        };
        factors.push(f);
    }
    if factors.len() != n_qubits {
        return Err(Error::Parse {
            position: offset,
            message: format!(
                "state {s:?} has {} qubits, expected {n_qubits}",
                factors.len()
            ),
        });
    }
    let mut amps = vec![Complex64::new(1.0, 0.0)];
    for f in factors {
        amps = amps
            .iter()
            .flat_map(|a| [a * f[0], a * f[1]])
            .collect();
    }
    Statevector::normalized(n_qubits, amps)
}

/// Eigen-decomposition `H = V diag(E) V^dagger`, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors.
    pub eigenvectors: DMatrix<Complex64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `c_i = <i|psi>`.
    pub fn coefficients(&self, psi: &Statevector) -> Result<Vec<Complex64>> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: psi.dim(),
            });
        }
        let v = DVector::from_column_slice(psi.amplitudes());
        Ok((self.eigenvectors.adjoint() * v).iter().copied().collect())
    }

    /// `V diag(E) V^dagger`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim(),
            self.eigenvalues.iter().map(|&e| Complex64::new(e, 0.0)),
        ));
        &self.eigenvectors * d * self.eigenvectors.adjoint()
    }

    /// Distinct eigenvalues, merging values closer than `tol`.
    pub fn distinct_levels(&self, tol: f64) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &e in &self.eigenvalues {
            match out.last() {
                Some(&last) if (e - last).abs() <= tol => {}
                _ => out.push(e),
            }
        }
        out
    }

    /// Distinct nonzero gaps `E_i - E_0`.
    pub fn gaps_from_ground(&self, tol: f64) -> Vec<f64> {
        let levels = self.distinct_levels(tol);
        levels.iter().skip(1).map(|e| e - levels[0]).collect()
    }
}

pub fn eigendecompose(h: &Hamiltonian) -> Result<Spectrum> {
    eigendecompose_with_limit(h, DEFAULT_DENSE_LIMIT)
}

pub fn eigendecompose_with_limit(h: &Hamiltonian, dense_limit: usize) -> Result<Spectrum> {
    let m = h.to_dense(dense_limit)?;
    let dim = m.nrows();
    let eig = m.symmetric_eigen();
    if eig.eigenvalues.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numerical("diagonalization produced non-finite eigenvalues".into()));
    }
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Exact propagator for one initial state: caches `c = V^dagger psi0`.
#[derive(Clone, Debug)]
pub struct ExactPropagator {
    spectrum: Spectrum,
    coeffs: Vec<Complex64>,
    n_qubits: usize,
}

impl ExactPropagator {
    pub fn new(spectrum: Spectrum, psi0: &Statevector) -> Result<Self> {
        let coeffs = spectrum.coefficients(psi0)?;
        Ok(Self {
            spectrum,
            coeffs,
            n_qubits: psi0.n_qubits(),
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn evolve(&self, t: f64) -> Statevector {
        let phased = DVector::from_iterator(
            self.coeffs.len(),
            self.spectrum
                .eigenvalues
                .iter()
                .zip(&self.coeffs)
                .map(|(&e, c)| c * Complex64::from_polar(1.0, -e * t)),
        );
        let amps = (&self.spectrum.eigenvectors * phased).iter().copied().collect();
        Statevector {
            n_qubits: self.n_qubits,
            amps,
        }
    }
}

/// `V diag(e^{-i E t}) V^dagger psi0`.
pub fn evolve_exact(spec: &Spectrum, psi0: &Statevector, t: f64) -> Result<Statevector> {
    Ok(ExactPropagator::new(spec.clone(), psi0)?.evolve(t))
}

/// First-order product formula `(prod_i e^{-i alpha_i P_i t/n})^n`, terms in
/// canonical order.
pub fn evolve_trotter(
    h: &Hamiltonian,
    psi0: &Statevector,
    t: f64,
    n_steps: usize,
) -> Result<Statevector> {
    if n_steps == 0 {
        return Err(Error::invalid("n_steps must be at least 1"));
    }
    if h.n_qubits() != psi0.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: h.n_qubits(),
            found: psi0.n_qubits(),
        });
    }
    let dt = t / n_steps as f64;
    let mut amps = psi0.amps.clone();
    let mut scratch = vec![ZERO; amps.len()];
    for _ in 0..n_steps {
        for term in h.terms() {
            apply_pauli_rotation(&mut amps, &mut scratch, &term.string, term.coeff.re * dt);
        }
    }
    Ok(Statevector {
        n_qubits: psi0.n_qubits,
        amps,
    })
}

/// `amps <- (cos theta I - i sin theta P) amps`.
fn apply_pauli_rotation(
    amps: &mut [Complex64],
    scratch: &mut [Complex64],
    p: &PauliString,
    theta: f64,
) {
    let (s, c) = theta.sin_cos();
    let minus_i_sin = Complex64::new(0.0, -s);
    if p.x_mask() == 0 {
        // Diagonal string: every basis state picks up e^{-i theta (+-1)}.
        let plus = Complex64::new(c, -s);
        let minus = Complex64::new(c, s);
        for (b, a) in amps.iter_mut().enumerate() {
            let (_, sign) = p.apply_to_basis(b);
            *a *= if sign.re > 0.0 { plus } else { minus };
        }
        return;
    }
    for (b, a) in amps.iter().enumerate() {
        let (row, amp) = p.apply_to_basis(b);
        scratch[row] = amp * a;
    }
    for (a, pa) in amps.iter_mut().zip(scratch.iter()) {
        *a = *a * c + minus_i_sin * pa;
    }
}

/// `<a|b>`.
pub fn inner(a: &Statevector, b: &Statevector) -> Result<Complex64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.n_qubits,
            found: b.n_qubits,
        });
    }
    Ok(dot(&a.amps, &b.amps))
}

fn check_obs(o: &Observable, psi: &Statevector) -> Result<()> {
    if o.n_qubits() != psi.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: o.n_qubits(),
            found: psi.n_qubits(),
        });
    }
    Ok(())
}

/// `<psi|P|psi>` for one Pauli string (real up to rounding).
fn pauli_expectation(p: &PauliString, amps: &[Complex64]) -> f64 {
    let mut acc = ZERO;
    for (b, a) in amps.iter().enumerate() {
        let (row, amp) = p.apply_to_basis(b);
        acc += amps[row].conj() * amp * a;
    }
    acc.re
}

/// `<psi|O|psi>`.
pub fn expectation(o: &Observable, psi: &Statevector) -> Result<f64> {
    check_obs(o, psi)?;
    Ok(match o {
        Observable::Identity { .. } => psi.norm().powi(2),
        Observable::PauliSum(h) => h
            .terms()
            .iter()
            .map(|t| t.coeff.re * pauli_expectation(&t.string, &psi.amps))
            .sum(),
        Observable::Projector(phi) => dot(&phi.amps, &psi.amps).norm_sqr(),
    })
}

/// Shot-sampled estimate of `<psi|O|psi>`.
///
/// Each non-identity Pauli term is measured `shots` times, each shot giving
/// `+-1` with `P(+1) = (1 + <P_i>)/2`; the estimate is `sum_i alpha_i * mean`.
/// A projector is sampled as one Bernoulli per shot with success probability
/// equal to the fidelity. Term `i` draws from lane `i` of the key's shot
/// stream, so estimates are reproducible and independent across terms.
pub fn sample_expectation(
    o: &Observable,
    psi: &Statevector,
    shots: u64,
    key: StreamKey,
) -> Result<f64> {
    check_obs(o, psi)?;
    if shots == 0 {
        return Err(Error::invalid("shots must be at least 1"));
    }
    match o {
        Observable::Identity { .. } => Err(Error::invalid(
            "identity observable needs no sampling; use expectation()",
        )),
        Observable::PauliSum(h) => {
            let mut total = 0.0;
            for (lane, t) in h.terms().iter().enumerate() {
                if t.string.is_identity() {
                    total += t.coeff.re;
                    continue;
                }
                let mean = pauli_expectation(&t.string, &psi.amps);
                let ups = binomial(shots, (1.0 + mean) / 2.0, key, lane as u64)?;
                total += t.coeff.re * (2.0 * ups as f64 / shots as f64 - 1.0);
            }
            Ok(total)
        }
        Observable::Projector(phi) => {
            let f = dot(&phi.amps, &psi.amps).norm_sqr();
            Ok(binomial(shots, f, key, 0)? as f64 / shots as f64)
        }
    }
}

pub(crate) fn binomial(shots: u64, p: f64, key: StreamKey, lane: u64) -> Result<u64> {
    let dist = Binomial::new(shots, p.clamp(0.0, 1.0))
        .map_err(|e| Error::Numerical(format!("binomial({shots}, {p}): {e}")))?;
    Ok(dist.sample(&mut key.rng(Domain::Shots, lane)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::build_heisenberg;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn basis_and_product_specs() {
        let s = prepare_state("00", 2).unwrap();
        assert_eq!(s.amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let s = prepare_state("+++-", 4).unwrap();
        for (b, a) in s.amplitudes().iter().enumerate() {
            assert!((a.norm() - 0.25).abs() < 1e-15);
            let want = if b & 1 == 1 { -0.25 } else { 0.25 };
            assert!((a.re - want).abs() < 1e-15);
        }
        let h2 = prepare_state("---+", 4).unwrap();
        assert!((h2.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn superposition_spec() {
        let s = prepare_state(r#"super("0011", "1100")"#, 4).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0b0011].re - r).abs() < 1e-15);
        assert!((s.amplitudes()[0b1100].re - r).abs() < 1e-15);
        let t = prepare_state("super(+++-, 0011)", 4).unwrap();
        let u = prepare_state(r#"super('+++-','0011')"#, 4).unwrap();
        assert_eq!(t, u);
    }

    #[test]
    fn spec_errors() {
        assert!(matches!(prepare_state("0x", 2), Err(Error::Parse { position: 1, .. })));
        assert!(matches!(prepare_state("000", 2), Err(Error::Parse { .. })));
        assert!(matches!(prepare_state("super(00, 0x)", 2), Err(Error::Parse { position: 11, .. })));
        assert!(matches!(prepare_state("super(00", 2), Err(Error::Parse { .. })));
    }

    #[test]
    fn cancelling_superposition_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        std::fs::write(&a, "[[1,0],[0,0]]").unwrap();
        std::fs::write(&b, "[[-1,0],[0,0]]").unwrap();
        let spec = format!("super(file:{}, file:{})", a.display(), b.display());
        assert!(matches!(prepare_state(&spec, 1), Err(Error::InvalidInput(_))));
        let one = prepare_state(&format!("file:{}", a.display()), 1).unwrap();
        assert_eq!(one.amplitudes()[0], c(1.0, 0.0));
        std::fs::write(&b, "[[0.5,0],[0,0]]").unwrap();
        assert!(matches!(
            prepare_state(&format!("file:{}", b.display()), 1),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn z_spectrum() {
        let h = Hamiltonian::from_labels(1, [(1.0, "Z")]).unwrap();
        let sp = eigendecompose(&h).unwrap();
        assert_eq!(sp.eigenvalues, vec![-1.0, 1.0]);
    }

    #[test]
    fn two_site_heisenberg_spectrum() {
        let sp = eigendecompose(&build_heisenberg(2, 1.0, 0.0).unwrap()).unwrap();
        let want = [-1.0, -1.0, -1.0, 3.0];
        for (e, w) in sp.eigenvalues.iter().zip(want) {
            assert!((e - w).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_heisenberg_levels() {
        // J = 0 leaves -sum Z: eigenvalues are -(#zeros - #ones).
        let sp = eigendecompose(&build_heisenberg(4, 0.0, 1.0).unwrap()).unwrap();
        let mut want: Vec<f64> = (0..16u32).map(|b| -(4.0 - 2.0 * b.count_ones() as f64)).collect();
        want.sort_by(f64::total_cmp);
        for (e, w) in sp.eigenvalues.iter().zip(want) {
            assert!((e - w).abs() < 1e-12);
        }
    }

    #[test]
    fn spectrum_invariants() {
        let h = build_heisenberg(4, 1.0, 1.0).unwrap();
        let sp = eigendecompose(&h).unwrap();
        assert!(sp.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let v = &sp.eigenvectors;
        let id = DMatrix::<Complex64>::identity(16, 16);
        assert!((v.adjoint() * v - id).norm() < 1e-10);
        let m = h.to_dense(12).unwrap();
        assert!((sp.reconstruct() - &m).norm() <= 1e-9 * m.norm());
        assert_eq!(sp.gaps_from_ground(1e-9).len(), 13);
    }

    #[test]
    fn exact_evolution_basics() {
        let h = Hamiltonian::from_labels(1, [(1.0, "Z")]).unwrap();
        let sp = eigendecompose(&h).unwrap();
        let psi0 = prepare_state("0", 1).unwrap();
        let at0 = evolve_exact(&sp, &psi0, 0.0).unwrap();
        assert!((at0.amplitudes()[0] - c(1.0, 0.0)).norm() < 1e-15);
        let at_pi = evolve_exact(&sp, &psi0, std::f64::consts::PI).unwrap();
        assert!((at_pi.amplitudes()[0] - c(-1.0, 0.0)).norm() < 1e-15);
        assert!(at_pi.amplitudes()[1].norm() < 1e-15);
        assert!((inner(&psi0, &at_pi).unwrap().norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn evolution_group_property_and_conservation() {
        let h = build_heisenberg(3, 0.9, 0.4).unwrap();
        let sp = eigendecompose(&h).unwrap();
        let psi0 = prepare_state("super(+-0, 011)", 3).unwrap();
        let prop = ExactPropagator::new(sp.clone(), &psi0).unwrap();
        let e0 = expectation(&Observable::PauliSum(h.clone()), &psi0).unwrap();
        for (t1, t2) in [(0.3, 1.7), (-2.0, 0.45), (5.5, -3.25)] {
            let a = prop.evolve(t1 + t2);
            let mid = evolve_exact(&sp, &prop.evolve(t1), t2).unwrap();
            for (x, y) in a.amplitudes().iter().zip(mid.amplitudes()) {
                assert!((x - y).norm() < 1e-10);
            }
            assert!((a.norm() - 1.0).abs() < 1e-10);
            let e = expectation(&Observable::PauliSum(h.clone()), &a).unwrap();
            assert!((e - e0).abs() < 1e-9);
        }
    }

    #[test]
    fn trotter_exact_for_commuting_terms() {
        let h = Hamiltonian::from_labels(3, [(0.7, "ZZI"), (-0.4, "IZZ"), (1.1, "ZIZ"), (0.3, "IIZ")]).unwrap();
        let sp = eigendecompose(&h).unwrap();
        let psi0 = prepare_state("+-+", 3).unwrap();
        let t = 1.3;
        let a = evolve_trotter(&h, &psi0, t, 1).unwrap();
        let b = evolve_exact(&sp, &psi0, t).unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() < 1e-10);
        }
        let id = evolve_trotter(&build_heisenberg(3, 1.0, 1.0).unwrap(), &psi0, 0.0, 7).unwrap();
        assert_eq!(id, psi0);
        assert!(evolve_trotter(&h, &psi0, t, 0).is_err());
    }

    #[test]
    fn trotter_exact_on_two_site_heisenberg() {
        // On two sites XX, YY, ZZ, Z0, Z1 all commute pairwise.
        let h = build_heisenberg(2, 1.0, 1.0).unwrap();
        let sp = eigendecompose(&h).unwrap();
        let psi0 = prepare_state("+0", 2).unwrap();
        let exact = evolve_exact(&sp, &psi0, 0.5).unwrap();
        let tr = evolve_trotter(&h, &psi0, 0.5, 1).unwrap();
        for (x, y) in tr.amplitudes().iter().zip(exact.amplitudes()) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn trotter_first_order_convergence() {
        let h = build_heisenberg(3, 1.0, 1.0).unwrap();
        let sp = eigendecompose(&h).unwrap();
        let psi0 = prepare_state("+0-", 3).unwrap();
        let exact = evolve_exact(&sp, &psi0, 0.5).unwrap();
        let err = |n: usize| {
            let tr = evolve_trotter(&h, &psi0, 0.5, n).unwrap();
            assert!((tr.norm() - 1.0).abs() < 1e-10);
            tr.amplitudes()
                .iter()
                .zip(exact.amplitudes())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt()
        };
        let errs: Vec<f64> = [4, 8, 16, 32, 64].iter().map(|&n| err(n)).collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.7..=2.3).contains(&ratio), "ratio {ratio} from {errs:?}");
        }
    }

    #[test]
    fn inner_and_expectation_basics() {
        let zero = prepare_state("0", 1).unwrap();
        let one = prepare_state("1", 1).unwrap();
        assert_eq!(inner(&zero, &one).unwrap(), c(0.0, 0.0));
        let psi = prepare_state("super(+-, 01)", 2).unwrap();
        assert!((inner(&psi, &psi).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert!((expectation(&Observable::Identity { n_qubits: 2 }, &psi).unwrap() - 1.0).abs() < 1e-15);
        assert!((expectation(&Observable::Projector(psi.clone()), &psi).unwrap() - 1.0).abs() < 1e-15);
        assert!(inner(&zero, &psi).is_err());
    }

    #[test]
    fn global_phase_insensitivity() {
        let h = build_heisenberg(3, 1.0, 0.5).unwrap();
        let psi = prepare_state("super(+0-, 110)", 3).unwrap();
        let rotated = psi.with_global_phase(1.234);
        let ref_state = prepare_state("+++", 3).unwrap();
        let o = Observable::PauliSum(h);
        assert!((expectation(&o, &psi).unwrap() - expectation(&o, &rotated).unwrap()).abs() < 1e-13);
        let a = inner(&ref_state, &psi).unwrap().norm();
        let b = inner(&ref_state, &rotated).unwrap().norm();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn fidelity_matches_eigenbasis_expansion() {
        let h = build_heisenberg(4, 1.0, 1.0).unwrap();
        let sp = eigendecompose(&h).unwrap();
        let psi0 = prepare_state(r#"super("+++-", "0011")"#, 4).unwrap();
        let c = sp.coefficients(&psi0).unwrap();
        let proj = Observable::Projector(psi0.clone());
        for t in [0.37, 2.9, -11.2] {
            let psi_t = evolve_exact(&sp, &psi0, t).unwrap();
            let mut oracle = 0.0;
            for i in 0..16 {
                for j in 0..16 {
                    oracle += c[i].norm_sqr()
                        * c[j].norm_sqr()
                        * ((sp.eigenvalues[i] - sp.eigenvalues[j]) * t).cos();
                }
            }
            assert!((inner(&psi0, &psi_t).unwrap().norm_sqr() - oracle).abs() < 1e-12);
            assert!((expectation(&proj, &psi_t).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_deterministic_outcome() {
        let zero = prepare_state("0", 1).unwrap();
        let z = Observable::PauliSum(Hamiltonian::from_labels(1, [(1.0, "Z")]).unwrap());
        for counter in 0..20 {
            let v = sample_expectation(&z, &zero, 17, StreamKey::new(3, counter)).unwrap();
            assert_eq!(v, 1.0);
        }
        let id = Observable::Identity { n_qubits: 1 };
        assert!(sample_expectation(&id, &zero, 10, StreamKey::new(0, 0)).is_err());
        assert!(sample_expectation(&z, &zero, 0, StreamKey::new(0, 0)).is_err());
    }

    #[test]
    fn sampling_is_unbiased_with_pm1_variance() {
        // Estimating <Z> on |+> from N_s shots of +-1 outcomes: mean 0,
        // variance (1 - <Z>^2)/N_s = 1/N_s.
        let plus = prepare_state("+", 1).unwrap();
        let z = Observable::PauliSum(Hamiltonian::from_labels(1, [(1.0, "Z")]).unwrap());
        let shots = 50;
        let reps = 10_000;
        let xs: Vec<f64> = (0..reps)
            .map(|k| sample_expectation(&z, &plus, shots, StreamKey::new(11, k)).unwrap())
            .collect();
        let mean = xs.iter().sum::<f64>() / reps as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
        let want_var = 1.0 / shots as f64;
        assert!(mean.abs() < 3.0 * (want_var / reps as f64).sqrt(), "mean {mean}");
        assert!((var / want_var - 1.0).abs() < 0.05, "var {var}");
    }
}
