//! Test-only reference spectra, built without the library's linear algebra.
//!
//! Hamiltonians are expanded into dense matrices by explicit Kronecker
//! products of 2x2 Pauli matrices, embedded as real symmetric matrices
//! `[[A, -B], [B, A]]` and diagonalized with cyclic Jacobi rotations.

#![allow(dead_code, clippy::needless_range_loop)]

use gapscan::pauli::Hamiltonian;
use gapscan::state::Statevector;

type C = (f64, f64);

fn cmul(a: C, b: C) -> C {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn pauli(letter: char) -> [[C; 2]; 2] {
    let (o, z, i) = ((1.0, 0.0), (0.0, 0.0), (0.0, 1.0));
    match letter {
        'I' => [[o, z], [z, o]],
        'X' => [[z, o], [o, z]],
        'Y' => [[z, (0.0, -1.0)], [i, z]],
        'Z' => [[o, z], [z, (-1.0, 0.0)]],
        _ => panic!("bad letter {letter}"),
    }
}

/// Dense `sum coeff * kron(letters)`, leftmost letter as the most significant factor.
pub fn dense(n: usize, terms: &[(C, String)]) -> Vec<Vec<C>> {
    let dim = 1 << n;
    let mut m = vec![vec![(0.0, 0.0); dim]; dim];
    for (coeff, label) in terms {
        let mut k: Vec<Vec<C>> = vec![vec![(1.0, 0.0)]];
        for ch in label.chars() {
            let p = pauli(ch);
            let d = k.len();
            let mut next = vec![vec![(0.0, 0.0); 2 * d]; 2 * d];
            for r in 0..d {
                for c in 0..d {
                    for a in 0..2 {
                        for b in 0..2 {
                            next[2 * r + a][2 * c + b] = cmul(k[r][c], p[a][b]);
                        }
                    }
                }
            }
            k = next;
        }
        for r in 0..dim {
            for c in 0..dim {
                let v = cmul(*coeff, k[r][c]);
                m[r][c].0 += v.0;
                m[r][c].1 += v.1;
            }
        }
    }
    m
}

pub fn dense_of(h: &Hamiltonian) -> Vec<Vec<C>> {
    let terms: Vec<(C, String)> = h
        .terms()
        .iter()
        .map(|t| ((t.coeff.re, t.coeff.im), t.string.label()))
        .collect();
    dense(h.n_qubits(), &terms)
}

/// Eigenvalues (ascending) and column eigenvectors of a real symmetric matrix.
pub fn jacobi(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let vals = order.iter().map(|&i| a[i][i]).collect();
    let vecs = (0..n).map(|r| order.iter().map(|&c| v[r][c]).collect()).collect();
    (vals, vecs)
}

/// Distinct level with the weight `|<level|psi>|^2` summed over its eigenspace.
#[derive(Clone, Copy, Debug)]
pub struct Level {
    pub energy: f64,
    pub weight: f64,
    pub multiplicity: usize,
}

/// Oracle spectrum of `h` and the overlaps of `psi` with each eigenspace.
pub fn levels(h: &Hamiltonian, psi: &Statevector) -> Vec<Level> {
    let m = dense_of(h);
    let n = m.len();
    let mut real = vec![vec![0.0; 2 * n]; 2 * n];
    for r in 0..n {
        for c in 0..n {
            let (re, im) = m[r][c];
            real[r][c] = re;
            real[r + n][c + n] = re;
            real[r][c + n] = -im;
            real[r + n][c] = im;
        }
    }
    let (vals, vecs) = jacobi(real);
    let mut psi_real = vec![0.0; 2 * n];
    for (i, a) in psi.amplitudes().iter().enumerate() {
        psi_real[i] = a.re;
        psi_real[i + n] = a.im;
    }
    let mut out: Vec<Level> = Vec::new();
    for (k, &e) in vals.iter().enumerate() {
        let proj: f64 = (0..2 * n).map(|r| vecs[r][k] * psi_real[r]).sum();
        match out.last_mut() {
            Some(l) if (e - l.energy).abs() < 1e-8 => {
                l.weight += proj * proj;
                l.multiplicity += 1;
            }
            _ => out.push(Level {
                energy: e,
                weight: proj * proj,
                multiplicity: 1,
            }),
        }
    }
    // The real embedding doubles every eigenvalue.
    for l in &mut out {
        l.multiplicity /= 2;
    }
    out
}

/// All `|E_i - E_j|` with `w_i w_j >= min_weight`, deduplicated.
pub fn pair_gaps(levels: &[Level], min_weight: f64) -> Vec<f64> {
    let mut gaps = Vec::new();
    for a in levels {
        for b in levels {
            if a.weight * b.weight >= min_weight && b.energy >= a.energy {
                gaps.push(b.energy - a.energy);
            }
        }
    }
    gaps.sort_by(f64::total_cmp);
    gaps.dedup_by(|x, y| (*x - *y).abs() < 1e-8);
    gaps
}

pub fn ground_gaps(levels: &[Level]) -> Vec<f64> {
    levels.iter().skip(1).map(|l| l.energy - levels[0].energy).collect()
}
