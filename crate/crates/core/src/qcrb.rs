//! Quantum Fisher information and Cramér-Rao bound for NOON-like probes
//!
//! The probe is a superposition of `d + 1` branches; branch `m` carries the
//! constituent `|psi>` in mode `m` and vacuum elsewhere, with mode 0 as the
//! phase reference. For the linear generators `a_m^dag a_m` the QFI matrix is
//! independent of the phases and has the form `a I - c O` (O the all-ones
//! matrix), so its inverse has a closed form. The dense-inversion route in
//! [`qcrb_trace_inverse`] is kept as an independent check of it.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock_states::SingleModeState;
use crate::param_solver;

/// Slack allowed when comparing a bound against the NOON value.
pub const NOON_BOUND_SLACK: f64 = 1e-12;

/// Condition-number limit for the dense oracle.
pub const MAX_CONDITION: f64 = 1e12;

/// How the branch amplitudes are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weighting {
    /// Equal amplitude `b` on every branch, including the reference.
    Balanced,
    /// Probe-branch weight `b^2` fixed; the reference weight follows from
    /// normalisation.
    FixedB { b2: f64 },
    /// Probe-branch weight that minimises the bound over the feasible range.
    OptimizedB,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSpec {
    pub d: usize,
    pub state: SingleModeState,
    pub weighting: Weighting,
}

impl ProbeSpec {
    pub fn new(d: usize, state: SingleModeState, weighting: Weighting) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument(
                "number of phases d must be at least 1".into(),
            ));
        }
        let spec = ProbeSpec {
            d,
            state,
            weighting,
        };
        if let Weighting::FixedB { b2 } = weighting {
            if !(b2 > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "b2 must be positive, got {b2}"
                )));
            }
            let boundary =
                param_solver::unbalanced_b_boundary(d, spec.state.moments().vacuum_prob)?;
            if b2 > boundary * (1.0 + 1e-12) {
                return Err(Error::ConstraintInfeasible { b2, boundary });
            }
        }
        Ok(spec)
    }

    pub fn balanced(d: usize, state: SingleModeState) -> Result<Self> {
        Self::new(d, state, Weighting::Balanced)
    }

    /// The probe-branch weight `b^2` implied by the weighting scheme.
    pub fn resolved_b2(&self) -> Result<f64> {
        match self.weighting {
            Weighting::Balanced => Ok(balanced_b2(self.d, self.state.moments().vacuum_prob)),
            Weighting::FixedB { b2 } => Ok(b2),
            Weighting::OptimizedB => param_solver::unbalanced_optimal_b2(self.d, &self.state),
        }
    }
}

/// Bound value together with the quantities it was assembled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QcrbReport {
    pub d: usize,
    /// Lower bound on the summed phase variance, rad^2.
    pub qcrb: f64,
    pub f: f64,
    /// `<n^2> / <n>^2`
    pub r_ratio: f64,
    pub b2: f64,
    /// Mean photon number of the constituent.
    pub n_tilde: f64,
    /// Mean total photon number of the probe.
    pub n_bar: f64,
    pub balanced: bool,
    /// Built from a non-integer photon number (interpolated NOON curve).
    pub effective_noon: bool,
}

impl QcrbReport {
    /// NOON report at a possibly non-integer photon number.
    pub fn effective_noon(d: usize, n: f64) -> Result<Self> {
        let qcrb = noon_qcrb(d, n)?;
        Ok(QcrbReport {
            d,
            qcrb,
            f: 1.0 / n,
            r_ratio: 1.0,
            b2: 1.0 / (d as f64 + 1.0),
            n_tilde: n,
            n_bar: n,
            balanced: true,
            effective_noon: n.fract() != 0.0,
        })
    }

    /// `d(d+1) / (2 n_bar^2)`
    pub fn noon_bound(&self) -> f64 {
        let d = self.d as f64;
        d * (d + 1.0) / (2.0 * self.n_bar * self.n_bar)
    }

    /// Human-readable list of broken report invariants; empty when valid.
    ///
    /// The `f <= 1/n_bar`, `n_bar <= n_tilde` and NOON-bound checks only hold
    /// for balanced probes and are skipped otherwise.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let tol = 1e-12;
        if !(self.qcrb > 0.0) || !self.qcrb.is_finite() {
            out.push(format!("qcrb = {} is not positive", self.qcrb));
        }
        if self.r_ratio < 1.0 - tol {
            out.push(format!("R = {} < 1", self.r_ratio));
        }
        if !(self.f > 0.0) {
            out.push(format!("f = {} is not positive", self.f));
        }
        if self.balanced {
            if self.f > (1.0 / self.n_bar) * (1.0 + tol) {
                out.push(format!(
                    "f = {} exceeds 1/n_bar = {}",
                    self.f,
                    1.0 / self.n_bar
                ));
            }
            if self.n_bar > self.n_tilde * (1.0 + tol) {
                out.push(format!(
                    "n_bar = {} exceeds n_tilde = {}",
                    self.n_bar, self.n_tilde
                ));
            }
            if !noon_bound_check(self, self.d) {
                out.push(format!(
                    "qcrb = {} exceeds NOON bound {}",
                    self.qcrb,
                    self.noon_bound()
                ));
            }
        }
        out
    }
}

/// Dense `d x d` QFI matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct QfiMatrix {
    pub entries: DMatrix<f64>,
}

impl QfiMatrix {
    /// Builds `diag I - offset O`.
    pub fn from_structure(d: usize, diag: f64, offset: f64) -> Self {
        let entries = DMatrix::from_fn(d, d, |i, j| if i == j { diag - offset } else { -offset });
        QfiMatrix { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_symmetric(&self) -> bool {
        self.entries == self.entries.transpose()
    }
}

/// Balanced branch weight `b^2 = 1 / ((d+1)(1 + d |<psi|0>|^2))`.
pub fn balanced_b2(d: usize, vacuum_prob: f64) -> f64 {
    let d = d as f64;
    1.0 / ((d + 1.0) * (1.0 + d * vacuum_prob))
}

/// Mean total photon number of the balanced probe, `n_tilde / (1 + d p0)`.
pub fn mean_total_photons(d: usize, state: &SingleModeState) -> f64 {
    let m = state.moments();
    m.mean_n / (1.0 + d as f64 * m.vacuum_prob)
}

/// `4 b^2 <n^2> I - 4 b^4 <n>^2 O`.
pub fn qfi_matrix(spec: &ProbeSpec) -> Result<QfiMatrix> {
    let m = spec.state.moments();
    if m.mean_n2 <= 0.0 {
        return Err(Error::ZeroPhotonState);
    }
    let b2 = spec.resolved_b2()?;
    Ok(QfiMatrix::from_structure(
        spec.d,
        4.0 * b2 * m.mean_n2,
        4.0 * b2 * b2 * m.mean_n * m.mean_n,
    ))
}

/// `Tr(I^{-1})` by LU inversion.
pub fn qcrb_trace_inverse(m: &QfiMatrix) -> Result<f64> {
    let a = &m.entries;
    let inv = a.clone().lu().try_inverse().ok_or(Error::SingularMatrix {
        condition: f64::INFINITY,
    })?;
    let condition = one_norm(a) * one_norm(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::SingularMatrix { condition });
    }
    Ok(inv.trace())
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `d / (4 <n^2>) (1/b^2 + 1/(R - b^2 d))` with all intermediate values.
pub fn qcrb_closed_form(spec: &ProbeSpec) -> Result<QcrbReport> {
    let m = spec.state.moments();
    if m.mean_n <= 0.0 || m.mean_n2 <= 0.0 {
        return Err(Error::ZeroPhotonState);
    }
    let d = spec.d as f64;
    let b2 = spec.resolved_b2()?;
    let r_ratio = m.mean_n2 / (m.mean_n * m.mean_n);
    let denom = r_ratio - b2 * d;
    if !(denom > 0.0) {
        return Err(Error::DenominatorNonPositive { value: denom });
    }
    let qcrb = d / (4.0 * m.mean_n2) * (1.0 / b2 + 1.0 / denom);
    let balanced = matches!(spec.weighting, Weighting::Balanced);
    let n_bar = if balanced {
        m.mean_n / (1.0 + d * m.vacuum_prob)
    } else {
        param_solver::unbalanced_mean_photons(spec.d, &spec.state, b2)?
    };
    Ok(QcrbReport {
        d: spec.d,
        qcrb,
        f: m.mean_n / m.mean_n2,
        r_ratio,
        b2,
        n_tilde: m.mean_n,
        n_bar,
        balanced,
        effective_noon: false,
    })
}

/// Bound rewritten in terms of `f`, `d` and `n_bar`; increasing in `f`.
pub fn qcrb_from_f(d: usize, n_bar: f64, f: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument(
            "number of phases d must be at least 1".into(),
        ));
    }
    if !(n_bar > 0.0) {
        return Err(Error::NonPositivePhotonNumber(n_bar));
    }
    let upper = 1.0 / n_bar;
    if !(f > 0.0) || f > upper * (1.0 + 1e-12) {
        return Err(Error::FOutOfRange { f, upper });
    }
    let d = d as f64;
    Ok(d * (d + 1.0) / 4.0 * f * (1.0 / n_bar + 1.0 / ((d + 1.0) / f - d * n_bar)))
}

/// `d(d+1) / (2 N^2)`. Non-integer `N` is accepted for interpolated curves.
pub fn noon_qcrb(d: usize, n: f64) -> Result<f64> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::NonPositivePhotonNumber(n));
    }
    let d = d as f64;
    Ok(d * (d + 1.0) / (2.0 * n * n))
}

/// True when the report does not exceed the NOON value at the same `n_bar`.
pub fn noon_bound_check(report: &QcrbReport, d: usize) -> bool {
    let d = d as f64;
    let bound = d * (d + 1.0) / (2.0 * report.n_bar * report.n_bar);
    report.qcrb <= bound + NOON_BOUND_SLACK * bound.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn balanced_weights() {
        assert_eq!(balanced_b2(1, 0.0), 0.5);
        assert!(rel(balanced_b2(5, 0.0), 1.0 / 6.0) < 1e-15);
        assert!(rel(balanced_b2(5, (-1f64).exp()), 0.058_697_904_725_291_91) < 1e-14);
    }

    #[test]
    fn mean_total_photon_examples() {
        assert_eq!(mean_total_photons(7, &SingleModeState::fock(3)), 3.0);
        let coh = SingleModeState::coherent(1.0).unwrap();
        assert!(rel(mean_total_photons(5, &coh), 0.352_187_428_351_751_43) < 1e-14);
    }

    #[test]
    fn qfi_examples() {
        let spec = ProbeSpec::balanced(1, SingleModeState::fock(1)).unwrap();
        let m = qfi_matrix(&spec).unwrap();
        assert!((m.entries[(0, 0)] - 1.0).abs() < 1e-15);

        let spec = ProbeSpec::balanced(2, SingleModeState::fock(1)).unwrap();
        let m = qfi_matrix(&spec).unwrap();
        assert!((m.entries[(0, 0)] - 8.0 / 9.0).abs() < 1e-15);
        assert!((m.entries[(0, 1)] + 4.0 / 9.0).abs() < 1e-15);
        assert!(m.is_symmetric());
    }

    #[test]
    fn trace_inverse_examples() {
        let id = QfiMatrix::from_structure(3, 1.0, 0.0);
        assert!((qcrb_trace_inverse(&id).unwrap() - 3.0).abs() < 1e-15);
        let spec = ProbeSpec::balanced(1, SingleModeState::fock(1)).unwrap();
        let v = qcrb_trace_inverse(&qfi_matrix(&spec).unwrap()).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_rejected() {
        // a I - c O with a = c d is singular.
        let m = QfiMatrix::from_structure(4, 4.0, 1.0);
        assert!(matches!(
            qcrb_trace_inverse(&m),
            Err(Error::SingularMatrix { .. })
        ));
        let m = QfiMatrix::from_structure(3, 3.0 + 1e-14, 1.0);
        assert!(matches!(
            qcrb_trace_inverse(&m),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn closed_form_examples() {
        let r =
            qcrb_closed_form(&ProbeSpec::balanced(5, SingleModeState::fock(2)).unwrap()).unwrap();
        assert!(rel(r.qcrb, 3.75) < 1e-14);
        let r =
            qcrb_closed_form(&ProbeSpec::balanced(1, SingleModeState::fock(1)).unwrap()).unwrap();
        assert!(rel(r.qcrb, 1.0) < 1e-14);
    }

    #[test]
    fn zero_photon_state_rejected() {
        let spec = ProbeSpec::balanced(3, SingleModeState::fock(0)).unwrap();
        assert!(matches!(
            qcrb_closed_form(&spec),
            Err(Error::ZeroPhotonState)
        ));
        assert!(matches!(qfi_matrix(&spec), Err(Error::ZeroPhotonState)));
    }

    #[test]
    fn d_zero_rejected() {
        assert!(ProbeSpec::balanced(0, SingleModeState::fock(1)).is_err());
    }

    #[test]
    fn fixed_b_at_fock_boundary_has_no_finite_bound() {
        // b_bo^2 = 1/d for a Fock constituent makes R - b^2 d vanish.
        let spec =
            ProbeSpec::new(4, SingleModeState::fock(2), Weighting::FixedB { b2: 0.25 }).unwrap();
        assert!(matches!(
            qcrb_closed_form(&spec),
            Err(Error::DenominatorNonPositive { .. })
        ));
        assert!(
            ProbeSpec::new(4, SingleModeState::fock(2), Weighting::FixedB { b2: 0.3 }).is_err()
        );
    }

    #[test]
    fn optimized_noon_matches_unbalanced_multimode_noon_result() {
        // With b^2 = 1/(d + sqrt d) the bound becomes (1 + sqrt d)^2 d / (4 N^2).
        for d in 1..=6 {
            let spec = ProbeSpec::new(d, SingleModeState::fock(3), Weighting::OptimizedB).unwrap();
            let r = qcrb_closed_form(&spec).unwrap();
            let sd = (d as f64).sqrt();
            let expected = (1.0 + sd).powi(2) * d as f64 / 36.0;
            assert!(rel(r.qcrb, expected) < 1e-13);
            assert!(rel(r.n_bar, 3.0) < 1e-13);
        }
    }

    #[test]
    fn from_f_examples() {
        assert!(rel(qcrb_from_f(5, 2.0, 0.5).unwrap(), 3.75) < 1e-14);
        for (d, n) in [(1, 0.7), (3, 2.0), (8, 11.5)] {
            let at_limit = qcrb_from_f(d, n, 1.0 / n).unwrap();
            assert!(rel(at_limit, noon_qcrb(d, n).unwrap()) < 1e-13);
        }
        assert!(matches!(
            qcrb_from_f(5, 2.0, 0.6),
            Err(Error::FOutOfRange { .. })
        ));
        assert!(matches!(
            qcrb_from_f(5, 2.0, 0.0),
            Err(Error::FOutOfRange { .. })
        ));
    }

    #[test]
    fn noon_examples() {
        assert_eq!(noon_qcrb(1, 1.0).unwrap(), 1.0);
        assert_eq!(noon_qcrb(5, 4.0).unwrap(), 0.9375);
        assert!(rel(noon_qcrb(1, 2.2462).unwrap(), 0.198_199_773_654_272_9) < 1e-12);
        assert!(matches!(
            noon_qcrb(5, 0.0),
            Err(Error::NonPositivePhotonNumber(_))
        ));
        assert!(noon_qcrb(5, -1.0).is_err());
    }

    #[test]
    fn noon_bound_examples() {
        let noon =
            qcrb_closed_form(&ProbeSpec::balanced(5, SingleModeState::fock(3)).unwrap()).unwrap();
        assert!(noon_bound_check(&noon, 5));
        assert!(rel(noon.qcrb, noon.noon_bound()) < 1e-12);

        for state in [
            SingleModeState::coherent(1.0).unwrap(),
            SingleModeState::squeezed_vacuum(1.0).unwrap(),
        ] {
            let r = qcrb_closed_form(&ProbeSpec::balanced(5, state).unwrap()).unwrap();
            assert!(noon_bound_check(&r, 5));
            assert!(r.qcrb < r.noon_bound() * (1.0 - 1e-6));
        }
    }

    #[test]
    fn effective_noon_report() {
        let r = QcrbReport::effective_noon(5, 2.2462).unwrap();
        assert!(r.effective_noon);
        assert!(r.invariant_violations().is_empty());
        assert!(!QcrbReport::effective_noon(5, 2.0).unwrap().effective_noon);
    }
}
