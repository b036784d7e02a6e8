use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Evolution, Shots, TimeSample};
use crate::pauli::{commutator_norm, dot, Hamiltonian, Observable};
use crate::rng::StreamKey;
use crate::state::{
    binomial, eigendecompose, evolve_trotter, expectation, sample_expectation, ExactPropagator,
    Statevector,
};
use crate::{Error, Result};

/// Tolerance on `max |[S, H]|` for the degeneracy probe.
pub const COMMUTATOR_TOL: f64 = 1e-10;

/// Which time signal is transformed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `Tr[O psi(t) psi(t)^dagger]`.
    Gap,
    /// `<psi0|psi(t)>`.
    Energy,
    /// `<phi2(t)|O|phi1(t)>`.
    Transition,
    /// `Tr[O S psi(t) psi(t)^dagger]`.
    Probe,
}

impl KernelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Gap => "gap",
            KernelKind::Energy => "energy",
            KernelKind::Transition => "transition",
            KernelKind::Probe => "probe",
        }
    }
}

/// `e^{-iHt} psi0` for a fixed initial state.
#[derive(Clone, Debug)]
enum Propagator {
    Exact(ExactPropagator),
    Trotter {
        h: Hamiltonian,
        psi0: Statevector,
        rate: f64,
    },
}

impl Propagator {
    fn new(h: &Hamiltonian, psi0: &Statevector, evolution: Evolution) -> Result<Self> {
        if h.n_qubits() != psi0.n_qubits() {
            return Err(Error::DimensionMismatch {
                expected: h.n_qubits(),
                found: psi0.n_qubits(),
            });
        }
        Ok(match evolution {
            Evolution::Exact => Propagator::Exact(ExactPropagator::new(eigendecompose(h)?, psi0)?),
            Evolution::Trotter { steps_per_unit_time } => Propagator::Trotter {
                h: h.clone(),
                psi0: psi0.clone(),
                rate: steps_per_unit_time,
            },
        })
    }

    fn evolve(&self, t: f64) -> Result<Statevector> {
        match self {
            Propagator::Exact(p) => Ok(p.evolve(t)),
            Propagator::Trotter { h, psi0, rate } => {
                evolve_trotter(h, psi0, t, Evolution::trotter_steps(*rate, t))
            }
        }
    }
}

/// Evaluates one kind of kernel at arbitrary times.
///
/// The Hamiltonian is diagonalized once at construction (exact evolution);
/// each evaluation is then a single matrix-vector product.
#[derive(Clone, Debug)]
pub struct KernelEngine {
    kind: KernelKind,
    psi0: Statevector,
    observable: Observable,
    symmetry: Option<Observable>,
    primary: Propagator,
    secondary: Option<Propagator>,
    shots: Shots,
    seed: u64,
}

impl KernelEngine {
    /// `o` defaults to the projector onto `psi0`.
    pub fn gap(
        h: &Hamiltonian,
        psi0: &Statevector,
        o: Option<Observable>,
        evolution: Evolution,
        shots: Shots,
        seed: u64,
    ) -> Result<Self> {
        let observable = o.unwrap_or_else(|| Observable::Projector(psi0.clone()));
        check_dims(&observable, psi0)?;
        if matches!(observable, Observable::Identity { .. }) && shots != Shots::Exact {
            return Err(Error::invalid("identity observable cannot be shot-sampled"));
        }
        Ok(Self {
            kind: KernelKind::Gap,
            psi0: psi0.clone(),
            observable,
            symmetry: None,
            primary: Propagator::new(h, psi0, evolution)?,
            secondary: None,
            shots,
            seed,
        })
    }

    /// With finite shots, real and imaginary parts are each estimated from
    /// `+-1` outcomes.
    pub fn energy(
        h: &Hamiltonian,
        psi0: &Statevector,
        evolution: Evolution,
        shots: Shots,
        seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            kind: KernelKind::Energy,
            psi0: psi0.clone(),
            observable: Observable::Identity {
                n_qubits: psi0.n_qubits(),
            },
            symmetry: None,
            primary: Propagator::new(h, psi0, evolution)?,
            secondary: None,
            shots,
            seed,
        })
    }

    /// Exact amplitudes only.
    pub fn transition(
        h1: &Hamiltonian,
        h2: &Hamiltonian,
        psi0: &Statevector,
        o: Option<Observable>,
        evolution: Evolution,
    ) -> Result<Self> {
        if h1.n_qubits() != h2.n_qubits() {
            return Err(Error::DimensionMismatch {
                expected: h1.n_qubits(),
                found: h2.n_qubits(),
            });
        }
        let observable = o.unwrap_or_else(|| Observable::Projector(psi0.clone()));
        check_dims(&observable, psi0)?;
        Ok(Self {
            kind: KernelKind::Transition,
            psi0: psi0.clone(),
            observable,
            symmetry: None,
            primary: Propagator::new(h1, psi0, evolution)?,
            secondary: Some(Propagator::new(h2, psi0, evolution)?),
            shots: Shots::Exact,
            seed: 0,
        })
    }

    /// Fails with [`Error::NotCommuting`] unless `[s, h] = 0`.
    pub fn probe(
        h: &Hamiltonian,
        psi0: &Statevector,
        o: Option<Observable>,
        s: &Observable,
        evolution: Evolution,
    ) -> Result<Self> {
        let norm = commutator_norm(s, h)?;
        if norm > COMMUTATOR_TOL {
            return Err(Error::NotCommuting { norm });
        }
        let observable = o.unwrap_or_else(|| Observable::Projector(psi0.clone()));
        check_dims(&observable, psi0)?;
        Ok(Self {
            kind: KernelKind::Probe,
            psi0: psi0.clone(),
            observable,
            symmetry: Some(s.clone()),
            primary: Propagator::new(h, psi0, evolution)?,
            secondary: None,
            shots: Shots::Exact,
            seed: 0,
        })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn initial_state(&self) -> &Statevector {
        &self.psi0
    }

    pub fn observable(&self) -> &Observable {
        &self.observable
    }

    /// `k(-t) = conj(k(t))` holds identically, so `C(E)` is real.
    ///
    /// True for the energy kernel and for every kernel whose observable is
    /// the projector onto the initial state (or the identity).
    pub fn is_hermitian_symmetric(&self) -> bool {
        match (&self.kind, &self.observable) {
            (KernelKind::Energy, _) => true,
            (_, Observable::Identity { .. }) => true,
            (_, Observable::Projector(phi)) => phi == &self.psi0,
            _ => false,
        }
    }

    /// Kernel value at `t`; `counter` selects the shot-noise stream.
    pub fn eval(&self, t: f64, counter: u64) -> Result<Complex64> {
        let psi = self.primary.evolve(t)?;
        let key = StreamKey::new(self.seed, counter);
        let value = match self.kind {
            KernelKind::Gap => match self.shots {
                Shots::Exact => Complex64::new(self.exact_expectation(&psi)?, 0.0),
                Shots::Finite(n) => Complex64::new(sample_expectation(&self.observable, &psi, n, key)?, 0.0),
            },
            KernelKind::Energy => {
                let z = dot(self.psi0.amplitudes(), psi.amplitudes());
                match self.shots {
                    Shots::Exact => z,
                    Shots::Finite(n) => {
                        let re = binomial(n, (1.0 + z.re) / 2.0, key, 0)?;
                        let im = binomial(n, (1.0 + z.im) / 2.0, key, 1)?;
                        Complex64::new(
                            2.0 * re as f64 / n as f64 - 1.0,
                            2.0 * im as f64 / n as f64 - 1.0,
                        )
                    }
                }
            }
            KernelKind::Transition => {
                let phi2 = self
                    .secondary
                    .as_ref()
                    .expect("transition engine has two propagators")
                    .evolve(t)?;
                self.sandwich(&phi2, &psi, |v| v.to_vec())
            }
            KernelKind::Probe => {
                let s = self.symmetry.as_ref().expect("probe engine has a symmetry");
                self.sandwich(&psi, &psi, |v| s.apply(v))
            }
        };
        if !(value.re.is_finite() && value.im.is_finite()) {
            return Err(Error::NonFinite(format!("kernel value at t = {t}")));
        }
        Ok(value)
    }

    /// Kernels at every time, evaluated in parallel; sample `i` uses counter `i`.
    pub fn eval_many(&self, times: &[f64]) -> Result<Vec<TimeSample>> {
        times
            .par_iter()
            .enumerate()
            .map(|(i, &t)| {
                Ok(TimeSample {
                    t,
                    kernel_value: self.eval(t, i as u64)?,
                })
            })
            .collect()
    }

    /// `<psi(t2)|O|psi(t)>`.
    pub(crate) fn two_time(&self, t: f64, t2: f64) -> Result<Complex64> {
        let psi = self.primary.evolve(t)?;
        let psi2 = self.primary.evolve(t2)?;
        Ok(self.sandwich(&psi2, &psi, |v| v.to_vec()))
    }

    fn exact_expectation(&self, psi: &Statevector) -> Result<f64> {
        match &self.observable {
            Observable::Projector(phi) => Ok(dot(phi.amplitudes(), psi.amplitudes()).norm_sqr()),
            o => expectation(o, psi),
        }
    }

    /// `<left| O A |right>` with `A` given by `inner_op`.
    fn sandwich(
        &self,
        left: &Statevector,
        right: &Statevector,
        inner_op: impl Fn(&[Complex64]) -> Vec<Complex64>,
    ) -> Complex64 {
        let a_right = inner_op(right.amplitudes());
        match &self.observable {
            // <left|phi><phi|A right>, written so identical left/right states give
            // exactly |<phi|psi>|^2.
            Observable::Projector(phi) => {
                let l = dot(phi.amplitudes(), left.amplitudes());
                let r = dot(phi.amplitudes(), &a_right);
                l.conj() * r
            }
            o => dot(left.amplitudes(), &o.apply(&a_right)),
        }
    }
}

fn check_dims(o: &Observable, psi0: &Statevector) -> Result<()> {
    if o.n_qubits() != psi0.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: psi0.n_qubits(),
            found: o.n_qubits(),
        });
    }
    Ok(())
}

/// Single gap-kernel evaluation with exact expectation values.
pub fn gap_kernel(
    h: &Hamiltonian,
    psi0: &Statevector,
    o: Option<Observable>,
    t: f64,
    evolution: Evolution,
) -> Result<TimeSample> {
    let engine = KernelEngine::gap(h, psi0, o, evolution, Shots::Exact, 0)?;
    Ok(TimeSample {
        t,
        kernel_value: engine.eval(t, 0)?,
    })
}

pub fn energy_kernel(
    h: &Hamiltonian,
    psi0: &Statevector,
    t: f64,
    evolution: Evolution,
) -> Result<TimeSample> {
    let engine = KernelEngine::energy(h, psi0, evolution, Shots::Exact, 0)?;
    Ok(TimeSample {
        t,
        kernel_value: engine.eval(t, 0)?,
    })
}

pub fn transition_kernel(
    h1: &Hamiltonian,
    h2: &Hamiltonian,
    psi0: &Statevector,
    o: Option<Observable>,
    t: f64,
    evolution: Evolution,
) -> Result<TimeSample> {
    let engine = KernelEngine::transition(h1, h2, psi0, o, evolution)?;
    Ok(TimeSample {
        t,
        kernel_value: engine.eval(t, 0)?,
    })
}
