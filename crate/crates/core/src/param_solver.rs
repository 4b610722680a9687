//! Matching probe families to a common mean photon number, and the
//! balanced-versus-unbalanced weight comparison.

use std::fmt;

use crate::error::{Error, Result};
use crate::fock_states::SingleModeState;
use crate::qcrb::{self, ProbeSpec, QcrbReport, Weighting};

/// Squeeze factor used for the squeezed-coherent family when none is given.
pub const DEFAULT_ESCS_R_PRIME: f64 = 1.0;

/// Absolute tolerance on the matched mean photon number.
pub const NBAR_TOLERANCE: f64 = 1e-10;

const MAX_DOUBLINGS: usize = 200;
const MONOTONICITY_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Noon,
    Ecs,
    Escs,
    Esvs,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Noon, Family::Ecs, Family::Escs, Family::Esvs];

    pub fn label(self) -> &'static str {
        match self {
            Family::Noon => "noon",
            Family::Ecs => "ecs",
            Family::Escs => "escs",
            Family::Esvs => "esvs",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyTarget {
    pub family: Family,
    pub d: usize,
    pub n_bar_target: f64,
    /// Fixed squeeze factor for [`Family::Escs`].
    pub r_prime: Option<f64>,
}

impl FamilyTarget {
    pub fn new(family: Family, d: usize, n_bar_target: f64) -> Self {
        let r_prime = (family == Family::Escs).then_some(DEFAULT_ESCS_R_PRIME);
        FamilyTarget {
            family,
            d,
            n_bar_target,
            r_prime,
        }
    }

    pub fn with_r_prime(mut self, r_prime: f64) -> Self {
        self.r_prime = Some(r_prime);
        self
    }
}

/// Result of matching a family to a target `n_bar`.
#[derive(Debug, Clone, PartialEq)]
pub enum MatchedProbe {
    /// NOON with a possibly non-integer photon number.
    EffectiveNoon { n: f64 },
    /// `parameter` is alpha (ECS), r (ESVS) or alpha' (ESCS).
    State {
        state: SingleModeState,
        parameter: f64,
    },
}

impl MatchedProbe {
    pub fn parameter(&self) -> f64 {
        match self {
            MatchedProbe::EffectiveNoon { n } => *n,
            MatchedProbe::State { parameter, .. } => *parameter,
        }
    }

    pub fn report(&self, d: usize) -> Result<QcrbReport> {
        match self {
            MatchedProbe::EffectiveNoon { n } => QcrbReport::effective_noon(d, *n),
            MatchedProbe::State { state, .. } => {
                qcrb::qcrb_closed_form(&ProbeSpec::balanced(d, state.clone())?)
            }
        }
    }
}

/// Finds the family parameter whose balanced probe has the target `n_bar`.
pub fn solve_param_for_nbar(target: &FamilyTarget) -> Result<MatchedProbe> {
    let FamilyTarget {
        family,
        d,
        n_bar_target,
        r_prime,
    } = *target;
    if d == 0 {
        return Err(Error::InvalidArgument(
            "number of phases d must be at least 1".into(),
        ));
    }
    if !(n_bar_target > 0.0) || !n_bar_target.is_finite() {
        return Err(Error::NonPositivePhotonNumber(n_bar_target));
    }
    match family {
        Family::Noon => Ok(MatchedProbe::EffectiveNoon { n: n_bar_target }),
        Family::Ecs => {
            let n_bar = |alpha: f64| coherent_nbar(d, alpha);
            let alpha = solve_increasing(n_bar, n_bar_target, n_bar_target.sqrt())?;
            Ok(MatchedProbe::State {
                state: SingleModeState::coherent(alpha)?,
                parameter: alpha,
            })
        }
        Family::Esvs => {
            let n_bar = |r: f64| squeezed_vacuum_nbar(d, r);
            let r = solve_increasing(n_bar, n_bar_target, n_bar_target.sqrt().asinh())?;
            Ok(MatchedProbe::State {
                state: SingleModeState::squeezed_vacuum(r)?,
                parameter: r,
            })
        }
        Family::Escs => {
            let r_prime = r_prime.ok_or_else(|| {
                Error::InvalidArgument("squeezed coherent family needs a fixed r'".into())
            })?;
            if !(r_prime >= 0.0) || !r_prime.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "r' must be >= 0, got {r_prime}"
                )));
            }
            let n_bar = |alpha: f64| squeezed_coherent_nbar(d, alpha, r_prime);
            let floor = n_bar(0.0);
            if n_bar_target < floor {
                return Err(Error::TargetUnreachable {
                    family: format!("escs(r'={r_prime})"),
                    target: n_bar_target,
                    floor,
                });
            }
            let alpha = solve_increasing(n_bar, n_bar_target, n_bar_target.sqrt())?;
            Ok(MatchedProbe::State {
                state: SingleModeState::squeezed_coherent(alpha, r_prime)?,
                parameter: alpha,
            })
        }
    }
}

fn coherent_nbar(d: usize, alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    a2 / (1.0 + d as f64 * (-a2).exp())
}

fn squeezed_vacuum_nbar(d: usize, r: f64) -> f64 {
    r.sinh().powi(2) / (1.0 + d as f64 / r.cosh())
}

fn squeezed_coherent_nbar(d: usize, alpha: f64, r: f64) -> f64 {
    let a2 = alpha * alpha;
    let overlap = (-a2 * (1.0 - r.tanh())).exp() / r.cosh();
    (a2 + r.sinh().powi(2)) / (1.0 + d as f64 * overlap)
}

/// Root of `map(x) = target` for a map increasing on `x >= 0` with
/// `map(0) <= target`: bracket by doubling from `guess`, then bisect.
fn solve_increasing(map: impl Fn(f64) -> f64, target: f64, guess: f64) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = guess.max(f64::MIN_POSITIVE);
    let mut doublings = 0;
    while map(hi) < target {
        if doublings == MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::BracketFailure { target, doublings });
        }
        lo = hi;
        hi *= 2.0;
        doublings += 1;
    }

    let mut previous = map(lo);
    for k in 1..=MONOTONICITY_SAMPLES {
        let x = lo + (hi - lo) * k as f64 / MONOTONICITY_SAMPLES as f64;
        let v = map(x);
        if v <= previous {
            return Err(Error::NonMonotone { lo, hi });
        }
        previous = v;
    }

    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo) <= 1e-15 * hi {
            break;
        }
        if map(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = if (map(lo) - target).abs() <= (map(hi) - target).abs() {
        lo
    } else {
        hi
    };
    let residual = (map(x) - target).abs();
    if residual > NBAR_TOLERANCE.max(1e-14 * target) {
        return Err(Error::BracketFailure { target, doublings });
    }
    Ok(x)
}

/// A family matched to the common `n_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyPoint {
    pub family: Family,
    pub parameter: f64,
    pub report: QcrbReport,
}

/// The four families at one `(d, n_bar)`, in the order NOON, ECS, ESCS, ESVS.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyComparison {
    pub d: usize,
    pub n_bar: f64,
    pub r_prime: f64,
    pub points: [FamilyPoint; 4],
}

impl FamilyComparison {
    pub fn get(&self, family: Family) -> &FamilyPoint {
        &self.points[Family::ALL.iter().position(|f| *f == family).unwrap()]
    }
}

/// Evaluates all four families at the same `n_bar` and checks that the bound,
/// `f` and `n_tilde` orderings hold strictly.
pub fn compare_families_at_nbar(d: usize, n_bar: f64, r_prime: f64) -> Result<FamilyComparison> {
    if !(r_prime > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "r' must be positive, got {r_prime}"
        )));
    }
    let mut points = Vec::with_capacity(4);
    for family in Family::ALL {
        let target = FamilyTarget::new(family, d, n_bar).with_r_prime(r_prime);
        let matched = solve_param_for_nbar(&target)?;
        points.push(FamilyPoint {
            family,
            parameter: matched.parameter(),
            report: matched.report(d)?,
        });
    }
    let points: [FamilyPoint; 4] = points.try_into().expect("four families");

    for pair in points.windows(2) {
        let (worse, better) = (&pair[0], &pair[1]);
        if !(worse.report.qcrb > better.report.qcrb) {
            return Err(Error::OrderingViolation(format!(
                "qcrb {} = {} not above {} = {} at d={d}, n_bar={n_bar}",
                worse.family, worse.report.qcrb, better.family, better.report.qcrb
            )));
        }
        if !(worse.report.f > better.report.f) {
            return Err(Error::OrderingViolation(format!(
                "f {} = {} not above {} = {} at d={d}, n_bar={n_bar}",
                worse.family, worse.report.f, better.family, better.report.f
            )));
        }
        if !(worse.report.n_tilde < better.report.n_tilde) {
            return Err(Error::OrderingViolation(format!(
                "n_tilde {} = {} not below {} = {} at d={d}, n_bar={n_bar}",
                worse.family, worse.report.n_tilde, better.family, better.report.n_tilde
            )));
        }
    }
    Ok(FamilyComparison {
        d,
        n_bar,
        r_prime,
        points,
    })
}

/// Which coordinate a sweep is ordered by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    NBar,
    Parameter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub n_bar: f64,
    pub qcrb: f64,
    pub parameter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub label: String,
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

impl SweepCurve {
    /// Rejects curves that are not strictly increasing along `axis`.
    pub fn new(label: impl Into<String>, axis: SweepAxis, points: Vec<SweepPoint>) -> Result<Self> {
        let key = |p: &SweepPoint| match axis {
            SweepAxis::NBar => p.n_bar,
            SweepAxis::Parameter => p.parameter,
        };
        let label = label.into();
        if let Some(w) = points.windows(2).find(|w| !(key(&w[1]) > key(&w[0]))) {
            return Err(Error::OrderingViolation(format!(
                "curve {label} not strictly increasing along {axis:?}: {} then {}",
                key(&w[0]),
                key(&w[1])
            )));
        }
        Ok(SweepCurve {
            label,
            axis,
            points,
        })
    }

    pub fn n_bar_range(&self) -> Option<(f64, f64)> {
        Some((self.points.first()?.n_bar, self.points.last()?.n_bar))
    }

    /// Linear interpolation of the bound at `n_bar`; `None` outside the curve
    /// or for curves not ordered by `n_bar`.
    pub fn interpolate_qcrb(&self, n_bar: f64) -> Option<f64> {
        if self.axis != SweepAxis::NBar {
            return None;
        }
        let (lo, hi) = self.n_bar_range()?;
        if n_bar < lo || n_bar > hi {
            return None;
        }
        let i = self.points.partition_point(|p| p.n_bar < n_bar);
        let right = self.points[i];
        if right.n_bar == n_bar || i == 0 {
            return Some(right.qcrb);
        }
        let left = self.points[i - 1];
        let t = (n_bar - left.n_bar) / (right.n_bar - left.n_bar);
        Some(left.qcrb + t * (right.qcrb - left.qcrb))
    }
}

/// Squeezed-coherent bound at fixed `n_bar` as the squeeze factor varies.
pub fn escs_sweep_r_prime(d: usize, n_bar: f64, r_prime_grid: &[f64]) -> Result<SweepCurve> {
    let mut points = Vec::with_capacity(r_prime_grid.len());
    for &r_prime in r_prime_grid {
        if !(r_prime >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "r' must be >= 0, got {r_prime}"
            )));
        }
        let matched =
            solve_param_for_nbar(&FamilyTarget::new(Family::Escs, d, n_bar).with_r_prime(r_prime))?;
        points.push(SweepPoint {
            n_bar,
            qcrb: matched.report(d)?.qcrb,
            parameter: r_prime,
        });
    }
    if let Some(w) = points.windows(2).find(|w| !(w[1].qcrb < w[0].qcrb)) {
        return Err(Error::OrderingViolation(format!(
            "escs bound not decreasing in r': {} at r'={} then {} at r'={}",
            w[0].qcrb, w[0].parameter, w[1].qcrb, w[1].parameter
        )));
    }
    SweepCurve::new(
        format!("escs_d{d}_nbar{n_bar}"),
        SweepAxis::Parameter,
        points,
    )
}

/// Fano factor `Var(n) / <n>` of the squeezed coherent state,
/// `(alpha'^2 e^{2r'} + 2 sinh^2 r' cosh^2 r') / (alpha'^2 + sinh^2 r')`.
pub fn squeezed_coherent_fano(alpha_p: f64, r_p: f64) -> f64 {
    let a2 = alpha_p * alpha_p;
    let (s, c) = (r_p.sinh(), r_p.cosh());
    (a2 * (2.0 * r_p).exp() + 2.0 * s * s * c * c) / (a2 + s * s)
}

/// Coherent (1) < squeezed coherent < squeezed vacuum (`2 cosh^2 r_matched`)
/// Fano factors.
pub fn fano_ordering_check(alpha_p: f64, r_p: f64, r_matched: f64) -> bool {
    let fano = squeezed_coherent_fano(alpha_p, r_p);
    1.0 < fano && fano < 2.0 * r_matched.cosh().powi(2)
}

/// Matches a squeezed vacuum to the squeezed-coherent `n_bar` at `d` and
/// runs [`fano_ordering_check`]. Returns the matched `r` alongside.
pub fn matched_fano_check(d: usize, alpha_p: f64, r_p: f64) -> Result<(bool, f64)> {
    let n_bar = squeezed_coherent_nbar(d, alpha_p, r_p);
    let r = solve_param_for_nbar(&FamilyTarget::new(Family::Esvs, d, n_bar))?.parameter();
    Ok((fano_ordering_check(alpha_p, r_p, r), r))
}

/// Largest feasible probe weight on the normalisation ellipse,
/// `b_bo^2 = 1 / (d (1 + d p0)(1 - p0))`.
pub fn unbalanced_b_boundary(d: usize, vacuum_prob: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument(
            "number of phases d must be at least 1".into(),
        ));
    }
    if vacuum_prob >= 1.0 {
        return Err(Error::DegenerateOverlap);
    }
    let d = d as f64;
    Ok(1.0 / (d * (1.0 + d * vacuum_prob) * (1.0 - vacuum_prob)))
}

/// Probe with an independent reference weight `c` satisfying
/// `A b^2 + B b c + c^2 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnbalancedSpec {
    pub d: usize,
    pub state: SingleModeState,
    pub b2: f64,
    /// Signed reference amplitude.
    pub c: f64,
    /// `A = d + d(d-1) p0`
    pub a_coef: f64,
    /// `B = 2 d p0`
    pub b_coef: f64,
}

impl UnbalancedSpec {
    /// Picks the root with the larger signed `c`, the branch that passes
    /// through `c = b` at the balanced weight and meets the tangency
    /// `c = -B b_bo / 2` at the boundary.
    pub fn new(d: usize, state: SingleModeState, b2: f64) -> Result<Self> {
        let p = state.moments().vacuum_prob;
        let boundary = unbalanced_b_boundary(d, p)?;
        if !(b2 > 0.0) || b2 > boundary * (1.0 + 1e-12) {
            return Err(Error::ConstraintInfeasible { b2, boundary });
        }
        let df = d as f64;
        let a_coef = df + df * (df - 1.0) * p;
        let b_coef = 2.0 * df * p;
        let b = b2.sqrt();
        let disc = (b_coef * b_coef * b2 - 4.0 * (a_coef * b2 - 1.0)).max(0.0);
        let c = 0.5 * (-b_coef * b + disc.sqrt());
        Ok(UnbalancedSpec {
            d,
            state,
            b2,
            c,
            a_coef,
            b_coef,
        })
    }

    pub fn constraint_residual(&self) -> f64 {
        let b = self.b2.sqrt();
        self.a_coef * self.b2 + self.b_coef * b * self.c + self.c * self.c - 1.0
    }

    /// `(c^2 + d b^2) n_tilde`; cross terms vanish because `<psi|n|0> = 0`.
    pub fn mean_photons(&self) -> f64 {
        (self.c * self.c + self.d as f64 * self.b2) * self.state.moments().mean_n
    }

    pub fn report(&self) -> Result<QcrbReport> {
        let spec = ProbeSpec::new(
            self.d,
            self.state.clone(),
            Weighting::FixedB { b2: self.b2 },
        )?;
        qcrb::qcrb_closed_form(&spec)
    }
}

/// `min(R / (d + sqrt d), b_bo^2)`.
pub fn unbalanced_optimal_b2(d: usize, state: &SingleModeState) -> Result<f64> {
    let m = state.moments();
    let r_ratio = m.r_ratio()?;
    let boundary = unbalanced_b_boundary(d, m.vacuum_prob)?;
    let df = d as f64;
    Ok((r_ratio / (df + df.sqrt())).min(boundary))
}

pub fn unbalanced_mean_photons(d: usize, state: &SingleModeState, b2: f64) -> Result<f64> {
    Ok(UnbalancedSpec::new(d, state.clone(), b2)?.mean_photons())
}

/// A common-`n_bar` comparison point between two curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommonPoint {
    pub n_bar: f64,
    pub balanced: f64,
    pub unbalanced: f64,
}

impl CommonPoint {
    pub fn relative_gap(&self) -> f64 {
        (self.balanced - self.unbalanced).abs() / self.balanced.min(self.unbalanced)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnbalancedComparison {
    pub balanced: SweepCurve,
    pub unbalanced: SweepCurve,
    pub common: Vec<CommonPoint>,
    /// First common `n_bar` at which the balanced bound exceeds the
    /// unbalanced one, if any.
    pub crossover: Option<f64>,
}

impl UnbalancedComparison {
    /// Common points below the crossover (all of them when there is none).
    pub fn low_region(&self) -> &[CommonPoint] {
        match self.crossover {
            Some(x) => {
                let end = self.common.partition_point(|p| p.n_bar < x);
                &self.common[..end]
            }
            None => &self.common,
        }
    }
}

/// Balanced versus optimally weighted unbalanced squeezed-vacuum probes over
/// a grid of squeeze factors.
pub fn balanced_vs_unbalanced_sweep(d: usize, r_grid: &[f64]) -> Result<UnbalancedComparison> {
    let mut balanced = Vec::with_capacity(r_grid.len());
    let mut unbalanced = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "squeeze factor must be positive, got {r}"
            )));
        }
        let state = SingleModeState::squeezed_vacuum(r)?;
        let bal = qcrb::qcrb_closed_form(&ProbeSpec::balanced(d, state.clone())?)?;
        balanced.push(SweepPoint {
            n_bar: bal.n_bar,
            qcrb: bal.qcrb,
            parameter: r,
        });
        let unb = qcrb::qcrb_closed_form(&ProbeSpec::new(d, state, Weighting::OptimizedB)?)?;
        unbalanced.push(SweepPoint {
            n_bar: unb.n_bar,
            qcrb: unb.qcrb,
            parameter: r,
        });
    }
    let balanced = SweepCurve::new("balanced", SweepAxis::NBar, balanced)?;
    let unbalanced = SweepCurve::new("unbalanced", SweepAxis::NBar, unbalanced)?;

    let mut common = Vec::new();
    if let (Some((b_lo, b_hi)), Some((u_lo, u_hi))) =
        (balanced.n_bar_range(), unbalanced.n_bar_range())
    {
        let (lo, hi) = (b_lo.max(u_lo), b_hi.min(u_hi));
        let mut grid: Vec<f64> = balanced
            .points
            .iter()
            .chain(&unbalanced.points)
            .map(|p| p.n_bar)
            .filter(|&n| n >= lo && n <= hi)
            .collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        for n_bar in grid {
            if let (Some(b), Some(u)) = (
                balanced.interpolate_qcrb(n_bar),
                unbalanced.interpolate_qcrb(n_bar),
            ) {
                common.push(CommonPoint {
                    n_bar,
                    balanced: b,
                    unbalanced: u,
                });
            }
        }
    }
    let crossover = common
        .iter()
        .find(|p| p.balanced > p.unbalanced * (1.0 + 1e-12))
        .map(|p| p.n_bar);
    Ok(UnbalancedComparison {
        balanced,
        unbalanced,
        common,
        crossover,
    })
}
