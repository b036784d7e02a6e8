//! Pauli strings, weighted Pauli sums and observables.
//!
//! A [`PauliString`] stores its letters as two bitmasks in the symplectic
//! form `i^phase * X^x Z^z` (with `XZ` on the same qubit read as `-iY`,
//! i.e. letters are kept as `I, X, Y, Z` and the phase only tracks products).
//! Letter position `q` of a string (0 = leftmost character) acts on the
//! `q`-th tensor factor, which is bit `n - 1 - q` of a basis index. This
//! matches the Kronecker ordering used by [`Hamiltonian::to_dense`] and the
//! basis strings accepted by [`crate::state::prepare_state`].

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::state::Statevector;
use crate::{Error, Result};

/// Largest register realized as a dense matrix unless a caller asks otherwise.
pub const DEFAULT_DENSE_LIMIT: usize = 12;

const MAX_QUBITS: usize = 64;

/// Relative tolerance on the anti-Hermitian part of a Pauli sum.
pub const HERMITICITY_RTOL: f64 = 1e-12;

const I_POWERS: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// 2x2 matrix of the letter.
    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        }
    }
}

/// Tensor product of Pauli letters with a phase in `{1, i, -1, -i}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
    phase: u8,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        assert!(
            (1..=MAX_QUBITS).contains(&n_qubits),
            "PauliString supports 1..=64 qubits"
        );
        Self {
            n_qubits,
            x: 0,
            z: 0,
            phase: 0,
        }
    }

    pub fn from_letters(letters: &[Pauli]) -> Self {
        let mut s = Self::identity(letters.len());
        for (q, p) in letters.iter().enumerate() {
            s.set(q, *p);
        }
        s
    }

    /// Parses a string such as `"XXIZ"`; the length must equal `n_qubits`.
    pub fn parse(text: &str, n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::invalid(format!(
                "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        let mut letters = Vec::with_capacity(n_qubits);
        for (pos, ch) in text.chars().enumerate() {
            let p = match ch {
                'I' => Pauli::I,
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                other => {
                    return Err(Error::Parse {
                        position: pos,
                        message: format!("illegal Pauli letter {other:?}"),
                    })
                }
            };
            if pos >= n_qubits {
                return Err(Error::Parse {
                    position: pos,
                    message: format!("string longer than {n_qubits} qubits"),
                });
            }
            letters.push(p);
        }
        if letters.len() != n_qubits {
            return Err(Error::Parse {
                position: letters.len(),
                message: format!("expected {n_qubits} letters, found {}", letters.len()),
            });
        }
        Ok(Self::from_letters(&letters))
    }

    /// Single letter `p` on qubit `q`, identity elsewhere.
    pub fn single(n_qubits: usize, q: usize, p: Pauli) -> Self {
        let mut s = Self::identity(n_qubits);
        s.set(q, p);
        s
    }

    fn bit(&self, q: usize) -> u64 {
        debug_assert!(q < self.n_qubits);
        1u64 << (self.n_qubits - 1 - q)
    }

    fn set(&mut self, q: usize, p: Pauli) {
        let b = self.bit(q);
        let (xb, zb) = p.bits();
        self.x = if xb { self.x | b } else { self.x & !b };
        self.z = if zb { self.z | b } else { self.z & !b };
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Exponent `k` of the `i^k` prefactor.
    pub fn phase_exponent(&self) -> u8 {
        self.phase
    }

    pub fn phase(&self) -> Complex64 {
        I_POWERS[self.phase as usize]
    }

    pub fn letter(&self, q: usize) -> Pauli {
        let b = self.bit(q);
        Pauli::from_bits(self.x & b != 0, self.z & b != 0)
    }

    pub fn letters(&self) -> Vec<Pauli> {
        (0..self.n_qubits).map(|q| self.letter(q)).collect()
    }

    /// Letters only, without the phase prefix.
    pub fn label(&self) -> String {
        self.letters().into_iter().map(Pauli::as_char).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Same letters with the phase reset to `+1`.
    pub fn without_phase(&self) -> Self {
        Self { phase: 0, ..*self }
    }

    /// Operator product `self * other`, phase included.
    pub fn mul(&self, other: &PauliString) -> Result<PauliString> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        let mut acc: i32 = self.phase as i32 + other.phase as i32;
        for q in 0..self.n_qubits {
            let b = self.bit(q);
            let (x1, z1) = ((self.x & b != 0) as i32, (self.z & b != 0) as i32);
            let (x2, z2) = ((other.x & b != 0) as i32, (other.z & b != 0) as i32);
            acc += match (x1, z1) {
                (0, 0) => 0,
                (1, 1) => z2 - x2,
                (1, 0) => z2 * (2 * x2 - 1),
                _ => x2 * (1 - 2 * z2),
            };
        }
        Ok(PauliString {
            n_qubits: self.n_qubits,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            phase: acc.rem_euclid(4) as u8,
        })
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z) ^ (self.z & other.x)).count_ones().is_multiple_of(2)
    }

    /// Image of the basis state `|b>`: returns `(b', amplitude)` with
    /// `P|b> = amplitude |b'>`.
    #[inline]
    pub fn apply_to_basis(&self, b: usize) -> (usize, Complex64) {
        let b64 = b as u64;
        let n_y = (self.x & self.z).count_ones();
        let sign = (b64 & self.z).count_ones();
        let k = (self.phase as u32 + n_y + 2 * sign) % 4;
        ((b64 ^ self.x) as usize, I_POWERS[k as usize])
    }

    /// Dense `2^n x 2^n` matrix, phase included.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for b in 0..dim {
            let (row, amp) = self.apply_to_basis(b);
            m[(row, b)] = amp;
        }
        m
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        (self.x, self.z).cmp(&(other.x, other.z))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["", "i", "-", "-i"][self.phase as usize];
        write!(f, "{prefix}{}", self.label())
    }
}

/// Weighted Pauli string `coeff * string`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliTerm {
    pub coeff: Complex64,
    pub string: PauliString,
}

impl PauliTerm {
    pub fn new(coeff: impl Into<Complex64>, string: PauliString) -> Self {
        Self {
            coeff: coeff.into(),
            string,
        }
    }

    /// Convenience constructor from a real coefficient and a letter string.
    pub fn parse(coeff: f64, text: &str) -> Result<Self> {
        let n = text.chars().count();
        Ok(Self::new(coeff, PauliString::parse(text, n)?))
    }
}

/// Open or periodic chain for model builders.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

/// Hermitian operator written as a sum of Pauli strings.
///
/// Construction merges duplicate strings, drops zero coefficients, folds
/// string phases into the coefficients and sorts terms by `(x-mask, z-mask)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
}

impl Hamiltonian {
    pub fn new(n_qubits: usize, terms: impl IntoIterator<Item = PauliTerm>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::invalid(format!(
                "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        let mut raw: Vec<PauliTerm> = Vec::new();
        for t in terms {
            if t.string.n_qubits() != n_qubits {
                return Err(Error::DimensionMismatch {
                    expected: n_qubits,
                    found: t.string.n_qubits(),
                });
            }
            if !(t.coeff.re.is_finite() && t.coeff.im.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "coefficient of {} is {}",
                    t.string, t.coeff
                )));
            }
            raw.push(PauliTerm {
                coeff: t.coeff * t.string.phase(),
                string: t.string.without_phase(),
            });
        }
        // Coefficient order inside a group fixes the summation order, so any
        // permutation of the input produces bitwise-identical sums.
        raw.sort_by(|a, b| {
            a.string
                .canonical_cmp(&b.string)
                .then(a.coeff.re.total_cmp(&b.coeff.re))
                .then(a.coeff.im.total_cmp(&b.coeff.im))
        });
        let mut terms: Vec<PauliTerm> = Vec::with_capacity(raw.len());
        for t in raw {
            match terms.last_mut() {
                Some(last) if last.string == t.string => last.coeff += t.coeff,
                _ => terms.push(t),
            }
        }
        terms.retain(|t| t.coeff.re != 0.0 || t.coeff.im != 0.0);

        let scale: f64 = terms.iter().map(|t| t.coeff.norm()).sum();
        let residual: f64 = terms.iter().map(|t| t.coeff.im.abs()).sum();
        let tolerance = HERMITICITY_RTOL * scale;
        if residual > tolerance {
            return Err(Error::NotHermitian {
                residual,
                tolerance,
            });
        }
        Ok(Self { n_qubits, terms })
    }

    /// The zero operator.
    pub fn zero(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: Vec::new(),
        }
    }

    /// Builds from `(coefficient, letters)` pairs.
    pub fn from_labels<'a>(
        n_qubits: usize,
        labels: impl IntoIterator<Item = (f64, &'a str)>,
    ) -> Result<Self> {
        let terms = labels
            .into_iter()
            .map(|(c, s)| Ok(PauliTerm::new(c, PauliString::parse(s, n_qubits)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_qubits, terms)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `sum_i |alpha_i|`.
    pub fn one_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.norm()).sum()
    }

    /// Absolute values of the non-identity coefficients.
    pub fn coefficient_magnitudes(&self) -> Vec<f64> {
        self.terms
            .iter()
            .filter(|t| !t.string.is_identity())
            .map(|t| t.coeff.norm())
            .collect()
    }

    /// `H + shift * I`.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        let mut terms = self.terms.clone();
        terms.push(PauliTerm::new(shift, PauliString::identity(self.n_qubits)));
        Self::new(self.n_qubits, terms)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.n_qubits,
            self.terms.iter().map(|t| PauliTerm {
                coeff: t.coeff * factor,
                string: t.string,
            }),
        )
    }

    /// Dense matrix `sum_i alpha_i P_i`.
    pub fn to_dense(&self, dense_limit: usize) -> Result<DMatrix<Complex64>> {
        if self.n_qubits > dense_limit {
            return Err(Error::DenseLimit {
                n_qubits: self.n_qubits,
                limit: dense_limit,
            });
        }
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for t in &self.terms {
            for b in 0..dim {
                let (row, amp) = t.string.apply_to_basis(b);
                m[(row, b)] += t.coeff * amp;
            }
        }
        Ok(m)
    }

    /// Matrix-free product `H psi`.
    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(psi.len(), self.dim(), "state dimension mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        for t in &self.terms {
            for (b, amp_in) in psi.iter().enumerate() {
                let (row, amp) = t.string.apply_to_basis(b);
                out[row] += t.coeff * amp * amp_in;
            }
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: HamiltonianFile = serde_json::from_str(text)?;
        file.into_hamiltonian()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&HamiltonianFile::from(self))?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(&path, self.to_json()?).map_err(|e| Error::io(&path, e))
    }
}

/// On-disk Hamiltonian record:
/// `{"n_qubits": N, "terms": [{"coeff": [re, im], "pauli": "XXIZ"}, ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HamiltonianFile {
    pub n_qubits: usize,
    pub terms: Vec<TermRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermRecord {
    pub coeff: [f64; 2],
    pub pauli: String,
}

impl HamiltonianFile {
    pub fn into_hamiltonian(self) -> Result<Hamiltonian> {
        let terms = self
            .terms
            .iter()
            .map(|r| {
                Ok(PauliTerm::new(
                    Complex64::new(r.coeff[0], r.coeff[1]),
                    PauliString::parse(&r.pauli, self.n_qubits)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Hamiltonian::new(self.n_qubits, terms)
    }
}

impl From<&Hamiltonian> for HamiltonianFile {
    fn from(h: &Hamiltonian) -> Self {
        Self {
            n_qubits: h.n_qubits,
            terms: h
                .terms
                .iter()
                .map(|t| TermRecord {
                    coeff: [t.coeff.re, t.coeff.im],
                    pauli: t.string.label(),
                })
                .collect(),
        }
    }
}

/// Heisenberg chain `-J sum (XX + YY + ZZ) - h sum Z` on an open chain.
pub fn build_heisenberg(n_sites: usize, j: f64, h: f64) -> Result<Hamiltonian> {
    build_heisenberg_with(n_sites, j, h, Boundary::Open)
}

pub fn build_heisenberg_with(
    n_sites: usize,
    j: f64,
    h: f64,
    boundary: Boundary,
) -> Result<Hamiltonian> {
    if n_sites < 2 {
        return Err(Error::invalid(format!(
            "Heisenberg chain needs at least 2 sites, got {n_sites}"
        )));
    }
    let mut bonds: Vec<(usize, usize)> = (0..n_sites - 1).map(|i| (i, i + 1)).collect();
    if boundary == Boundary::Periodic {
        bonds.push((n_sites - 1, 0));
    }
    let mut terms = Vec::new();
    for (a, b) in bonds {
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            let mut s = PauliString::identity(n_sites);
            s.set(a, p);
            s.set(b, p);
            terms.push(PauliTerm::new(-j, s));
        }
    }
    for i in 0..n_sites {
        terms.push(PauliTerm::new(-h, PauliString::single(n_sites, i, Pauli::Z)));
    }
    Hamiltonian::new(n_sites, terms)
}

/// `sum_i Z_i`, the magnetization operator.
pub fn total_z(n_qubits: usize) -> Hamiltonian {
    Hamiltonian::new(
        n_qubits,
        (0..n_qubits).map(|i| PauliTerm::new(1.0, PauliString::single(n_qubits, i, Pauli::Z))),
    )
    .expect("sum of Z is Hermitian")
}

/// Measured operator `O`.
#[derive(Clone, Debug)]
pub enum Observable {
    Identity { n_qubits: usize },
    PauliSum(Hamiltonian),
    /// `|phi><phi|`.
    Projector(Statevector),
}

impl Observable {
    pub fn n_qubits(&self) -> usize {
        match self {
            Observable::Identity { n_qubits } => *n_qubits,
            Observable::PauliSum(h) => h.n_qubits(),
            Observable::Projector(s) => s.n_qubits(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Observable::Identity { .. } => "identity",
            Observable::PauliSum(_) => "pauli_sum",
            Observable::Projector(_) => "projector",
        }
    }

    /// Matrix-free `O psi`.
    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        match self {
            Observable::Identity { .. } => psi.to_vec(),
            Observable::PauliSum(h) => h.apply(psi),
            Observable::Projector(phi) => {
                let overlap = dot(phi.amplitudes(), psi);
                phi.amplitudes().iter().map(|a| a * overlap).collect()
            }
        }
    }

    pub fn to_dense(&self, dense_limit: usize) -> Result<DMatrix<Complex64>> {
        let n = self.n_qubits();
        if n > dense_limit {
            return Err(Error::DenseLimit {
                n_qubits: n,
                limit: dense_limit,
            });
        }
        match self {
            Observable::Identity { .. } => Ok(DMatrix::identity(1 << n, 1 << n)),
            Observable::PauliSum(h) => h.to_dense(dense_limit),
            Observable::Projector(phi) => {
                let v = nalgebra::DVector::from_column_slice(phi.amplitudes());
                Ok(&v * v.adjoint())
            }
        }
    }
}

/// `<a|b>` on raw amplitude slices.
#[inline]
pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter()
        .zip(b)
        .fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

/// Max-abs entry of the dense commutator `[A, H]`.
pub fn commutator_norm(a: &Observable, h: &Hamiltonian) -> Result<f64> {
    if a.n_qubits() != h.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: h.n_qubits(),
            found: a.n_qubits(),
        });
    }
    if let Observable::Identity { .. } = a {
        return Ok(0.0);
    }
    let am = a.to_dense(DEFAULT_DENSE_LIMIT)?;
    let hm = h.to_dense(DEFAULT_DENSE_LIMIT)?;
    let c = &am * &hm - &hm * &am;
    Ok(c.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// `true` iff the max-norm of `AH - HA` is at most `tol`.
pub fn commutes(a: &Observable, h: &Hamiltonian, tol: f64) -> Result<bool> {
    Ok(commutator_norm(a, h)? <= tol)
}
