//! Walk driven by the expanding circle maps `Tᵢ(x) = Aᵢx mod 1`.
//!
//! The tiling of the half line is a Markov partition for both maps, so the
//! tile process is a Markov chain: from tile `k` it moves to `k + j` with
//! `j` uniform on `{0, …, A_{ω(k)} − 1}`. This module offers the exact
//! deterministic dynamics, that chain (sampled or propagated exactly), and
//! the closed-form environment-averaged constants.

use std::collections::BTreeMap;

use dashu_float::FBig;
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::bigrat::{safe_prime_128, ExactPoint, IntMatrix};
use crate::environment::Environment;
use crate::error::{invalid, Error, Result};
use crate::rng::substream;
use crate::stats::{collect_ensemble, scaled_fluctuation, EnsembleSummary, TrajectoryOutcome};
use crate::Rational;

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn int(n: u64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Map multipliers and the Bernoulli parameter of the environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Params1D {
    pub a0: u64,
    pub a1: u64,
    pub p0: Rational,
}

impl Params1D {
    pub fn new(a0: u64, a1: u64, p0: Rational) -> Result<Self> {
        if a0 < 2 || a1 < 2 {
            return invalid(format!("multipliers must be ≥ 2, got A0={a0}, A1={a1}"));
        }
        if !p0.is_positive() || p0 >= Rational::one() {
            return invalid(format!("p0 must lie strictly between 0 and 1, got {p0}"));
        }
        Ok(Self { a0, a1, p0 })
    }

    /// `A₀ = 2`, `A₁ = 3`, `p₀ = ½`.
    pub fn example() -> Self {
        Self::new(2, 3, rat(1, 2)).expect("valid")
    }

    pub fn p1(&self) -> Rational {
        Rational::one() - &self.p0
    }

    #[inline]
    pub fn multiplier(&self, label: u8) -> u64 {
        if label == 0 {
            self.a0
        } else {
            self.a1
        }
    }

    pub fn max_multiplier(&self) -> u64 {
        self.a0.max(self.a1)
    }

    /// Tiles needed so that every `n`-step path from tile 0 stays inside.
    pub fn required_extent(&self, n: u64) -> u64 {
        n * (self.max_multiplier() - 1) + 1
    }
}

/// `vₙ = V + x` together with the Lyapunov bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkState1D {
    pub tile: usize,
    pub x: ExactPoint,
    pub steps: u64,
    /// How often `T₀` and `T₁` have been applied.
    pub maps_applied: [u64; 2],
}

impl WalkState1D {
    /// The initial condition `(x, x)`: tile 0.
    pub fn start(x: ExactPoint) -> Result<Self> {
        Self::at(0, x)
    }

    pub fn at(tile: usize, x: ExactPoint) -> Result<Self> {
        if x.dim() != 1 {
            return invalid("1D walk needs a point on the circle");
        }
        Ok(Self {
            tile,
            x,
            steps: 0,
            maps_applied: [0, 0],
        })
    }

    pub fn position_f64(&self) -> f64 {
        self.tile as f64 + self.x.coordinate_f64(0)
    }

    /// `(1/n) Σ ln A_{ω(V_k)}` along the steps taken so far.
    pub fn lyapunov_estimate(&self, params: &Params1D) -> f64 {
        if self.steps == 0 {
            return 0.0;
        }
        (self.maps_applied[0] as f64 * (params.a0 as f64).ln()
            + self.maps_applied[1] as f64 * (params.a1 as f64).ln())
            / self.steps as f64
    }
}

/// One exact step `(v, x) ↦ (v + A_{ω([v])}x − x, T_{ω([v])}x)`.
///
/// The state is advanced even when the new fractional part is 0; that case is
/// then reported as [`Error::StoppedProcess`].
pub fn step_deterministic(env: &Environment, params: &Params1D, state: &mut WalkState1D) -> Result<()> {
    let label = env.label_at(state.tile)?;
    let a = params.multiplier(label);
    let mut jump = [0u64];
    state.x.apply(&IntMatrix::scalar(a), &mut jump)?;
    state.tile += jump[0] as usize;
    state.steps += 1;
    state.maps_applied[label as usize] += 1;
    if state.x.touches_boundary() {
        return Err(Error::StoppedProcess { steps: state.steps });
    }
    Ok(())
}

/// One step of the equivalent Markov chain.
pub fn step_markov<R: Rng + ?Sized>(env: &Environment, params: &Params1D, tile: usize, rng: &mut R) -> Result<usize> {
    let a = params.multiplier(env.label_at(tile)?);
    Ok(tile + rng.random_range(0..a) as usize)
}

/// Row `k` of the transition matrix `Γ`.
pub fn gamma_row(env: &Environment, params: &Params1D, k: usize) -> Result<Vec<(usize, Rational)>> {
    let a = params.multiplier(env.label_at(k)?);
    let w = rat(1, a as i64);
    Ok((0..a as usize).map(|j| (k + j, w.clone())).collect())
}

/// A distribution over tiles starting at `offset`, stored over one common
/// denominator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistributionVector {
    offset: usize,
    numerators: Vec<BigUint>,
    denominator: BigUint,
}

impl DistributionVector {
    pub fn point_mass(tile: usize) -> Self {
        Self {
            offset: tile,
            numerators: vec![BigUint::one()],
            denominator: BigUint::one(),
        }
    }

    /// From explicit nonnegative weights that sum to 1.
    pub fn from_weights(offset: usize, weights: &[Rational]) -> Result<Self> {
        if weights.is_empty() {
            return invalid("distribution needs at least one weight");
        }
        if weights.iter().any(Signed::is_negative) {
            return invalid("weights must be nonnegative");
        }
        let total: Rational = weights.iter().sum();
        if total != Rational::one() {
            return invalid(format!("weights sum to {total}, not 1"));
        }
        let den = weights
            .iter()
            .fold(BigInt::one(), |acc, w| acc.lcm(w.denom()));
        let numerators = weights
            .iter()
            .map(|w| (w.numer() * (&den / w.denom())).to_biguint().expect("nonnegative"))
            .collect();
        let mut out = Self {
            offset,
            numerators,
            denominator: den.to_biguint().expect("positive"),
        };
        out.trim();
        Ok(out)
    }

    fn trim(&mut self) {
        while self.numerators.len() > 1 && self.numerators.last().is_some_and(Zero::is_zero) {
            self.numerators.pop();
        }
        let lead = self.numerators.iter().take_while(|w| w.is_zero()).count();
        let lead = lead.min(self.numerators.len() - 1);
        if lead > 0 {
            self.numerators.drain(..lead);
            self.offset += lead;
        }
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Highest tile with nonzero weight.
    pub fn last_tile(&self) -> usize {
        self.offset + self.numerators.len() - 1
    }

    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }

    /// `ρ_k` in lowest terms.
    pub fn weight(&self, k: usize) -> Rational {
        if k < self.offset || k > self.last_tile() {
            return Rational::zero();
        }
        Rational::new(
            BigInt::from(self.numerators[k - self.offset].clone()),
            BigInt::from(self.denominator.clone()),
        )
    }

    /// `(tile, ρ_tile)` for every tile in the stored range.
    pub fn weights(&self) -> Vec<(usize, Rational)> {
        (self.offset..=self.last_tile()).map(|k| (k, self.weight(k))).collect()
    }

    pub fn total(&self) -> Rational {
        let sum: BigUint = self.numerators.iter().sum();
        Rational::new(BigInt::from(sum), BigInt::from(self.denominator.clone()))
    }

    fn raw_moment(&self, power: u32) -> Rational {
        let sum: BigUint = self
            .numerators
            .iter()
            .enumerate()
            .map(|(i, w)| w * BigUint::from(self.offset + i).pow(power))
            .sum();
        Rational::new(BigInt::from(sum), BigInt::from(self.denominator.clone()))
    }

    pub fn mean(&self) -> Rational {
        self.raw_moment(1)
    }

    pub fn variance(&self) -> Rational {
        let m = self.mean();
        self.raw_moment(2) - &m * &m
    }

    pub fn to_map_f64(&self) -> BTreeMap<usize, f64> {
        self.numerators
            .iter()
            .enumerate()
            .filter(|(_, w)| !w.is_zero())
            .map(|(i, w)| (self.offset + i, crate::bigrat::ratio_to_f64(w, &self.denominator)))
            .collect()
    }
}

fn check_propagation_extent(env: &Environment, params: &Params1D, last_tile: usize, n: u64) -> Result<()> {
    let need = last_tile as u64 + n * (params.max_multiplier() - 1) + 1;
    if (env.extent()[0] as u64) < need {
        return Err(Error::EnvironmentExhausted {
            tile: (need - 1).to_string(),
            extent: env.extent()[0].to_string(),
        });
    }
    Ok(())
}

/// Exact `ρ⁽ⁿ⁾ = ρ⁽⁰⁾ Γⁿ`.
///
/// Weights stay integers over the denominator `den(ρ⁽⁰⁾)·Lⁿ`, where
/// `L = lcm(A₀, A₁)`; lowest terms are only taken on read-out.
pub fn propagate_distribution(
    env: &Environment,
    params: &Params1D,
    rho0: &DistributionVector,
    n: u64,
) -> Result<DistributionVector> {
    check_propagation_extent(env, params, rho0.last_tile(), n)?;
    let l = params.a0.lcm(&params.a1);
    let spread = params.max_multiplier() as usize - 1;
    let mut cur = rho0.clone();
    for _ in 0..n {
        let mut next = vec![BigUint::zero(); cur.numerators.len() + spread];
        for (i, w) in cur.numerators.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            let a = params.multiplier(env.label_at(cur.offset + i)?);
            let share = w * (l / a);
            for slot in &mut next[i..i + a as usize] {
                *slot += &share;
            }
        }
        cur.numerators = next;
        cur.denominator *= l;
        cur.trim();
    }
    Ok(cur)
}

/// Float-mode distribution: each weight carries `precision` significant bits.
#[derive(Debug, Clone)]
pub struct FloatDistribution {
    pub offset: usize,
    pub weights: Vec<FBig>,
    pub precision: usize,
}

/// Working precision giving a per-entry relative error below 10⁻³⁰ after `n`
/// steps. Every operation is a sum of nonnegative terms or a division by a
/// small integer, so relative rounding errors add up at most linearly.
pub fn float_precision_for(n: u64) -> usize {
    // 2⁻¹⁰⁰ ≈ 7.9·10⁻³¹, plus log₂ of the number of roundings per entry.
    100 + 2 + (64 - (n + 1).leading_zeros() as usize) + 8
}

/// `ρ⁽ⁿ⁾` from a point mass at tile 0 in high-precision binary floating point.
pub fn propagate_distribution_float(
    env: &Environment,
    params: &Params1D,
    n: u64,
    precision: usize,
) -> Result<FloatDistribution> {
    check_propagation_extent(env, params, 0, n)?;
    let spread = params.max_multiplier() as usize - 1;
    let one = FBig::ONE.with_precision(precision).value();
    let zero = FBig::ZERO.with_precision(precision).value();
    let mut cur = vec![one];
    for _ in 0..n {
        let mut next = vec![zero.clone(); cur.len() + spread];
        for (k, w) in cur.iter().enumerate() {
            if w.repr().is_zero() {
                continue;
            }
            let a = params.multiplier(env.label_at(k)?);
            let share = w / FBig::from(a);
            for slot in &mut next[k..k + a as usize] {
                *slot += &share;
            }
        }
        cur = next;
    }
    Ok(FloatDistribution {
        offset: 0,
        weights: cur,
        precision,
    })
}

impl FloatDistribution {
    pub fn mean_variance(&self) -> (f64, f64) {
        let mut m1 = FBig::ZERO.with_precision(self.precision).value();
        let mut m2 = m1.clone();
        for (i, w) in self.weights.iter().enumerate() {
            let k = FBig::from((self.offset + i) as u64);
            let t = w * &k;
            m2 += &t * &k;
            m1 += t;
        }
        let var = &m2 - &m1 * &m1;
        (m1.to_f64().value(), var.to_f64().value())
    }
}

/// Environment-averaged one-step label transition matrix `α*`.
pub fn analytic_alpha_star(params: &Params1D) -> [[Rational; 2]; 2] {
    let p = [params.p0.clone(), params.p1()];
    let stay = [rat(1, params.a0 as i64), rat(1, params.a1 as i64)];
    let entry = |i: usize, j: usize| {
        let leave = Rational::one() - &stay[i];
        if i == j {
            &stay[i] + leave * &p[i]
        } else {
            leave * &p[j]
        }
    };
    [[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]]
}

/// Equilibrium occupation of label 0, `p = p₀A₀(A₁−1)/(A₀A₁ − p₁A₁ − p₀A₀)`.
pub fn analytic_p(params: &Params1D) -> Rational {
    let (a0, a1) = (int(params.a0), int(params.a1));
    let num = &params.p0 * &a0 * (&a1 - Rational::one());
    let den = &a0 * &a1 - params.p1() * &a1 - &params.p0 * &a0;
    num / den
}

/// `D = (pA₀ + (1−p)A₁ − 1)/2`.
pub fn analytic_drift(params: &Params1D) -> Rational {
    let p = analytic_p(params);
    (&p * int(params.a0) + (Rational::one() - &p) * int(params.a1) - Rational::one()) / int(2)
}

/// `Σ_{k<m} k² = m³/3 − m²/2 + m/6`.
pub fn sum_of_squares_below(m: u64) -> Rational {
    let m = int(m);
    &m * &m * &m / int(3) - &m * &m / int(2) + &m / int(6)
}

/// Variance per step of the surrogate i.i.d. walk whose increments mix the
/// two uniform jump laws with weights `p` and `1−p`:
/// `σ² = (p/A₀)K(A₀) + ((1−p)/A₁)K(A₁) − D²`.
pub fn analytic_variance(params: &Params1D) -> Rational {
    // The surrogate is set up with A₀ ≤ A₁.
    let params = if params.a0 > params.a1 {
        Params1D {
            a0: params.a1,
            a1: params.a0,
            p0: params.p1(),
        }
    } else {
        params.clone()
    };
    let p = analytic_p(&params);
    let d = analytic_drift(&params);
    let second = &p / int(params.a0) * sum_of_squares_below(params.a0)
        + (Rational::one() - &p) / int(params.a1) * sum_of_squares_below(params.a1);
    second - &d * &d
}

/// `λ = p ln A₀ + (1−p) ln A₁`.
pub fn analytic_lyapunov(params: &Params1D) -> f64 {
    let p = analytic_p(params).to_f64().expect("finite");
    p * (params.a0 as f64).ln() + (1.0 - p) * (params.a1 as f64).ln()
}

/// All closed-form constants of the 1D model.
#[derive(Debug, Clone, PartialEq)]
pub struct Analytic1D {
    pub p: Rational,
    pub drift: Rational,
    pub sigma2: Rational,
    pub lambda: f64,
    pub alpha_star: [[Rational; 2]; 2],
}

impl Analytic1D {
    pub fn compute(params: &Params1D) -> Self {
        Self {
            p: analytic_p(params),
            drift: analytic_drift(params),
            sigma2: analytic_variance(params),
            lambda: analytic_lyapunov(params),
            alpha_star: analytic_alpha_star(params),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Deterministic,
    Markov,
}

/// Knobs of a 1D ensemble run.
#[derive(Debug, Clone)]
pub struct Ensemble1D {
    pub n: u64,
    pub count: u64,
    pub mode: Mode,
    pub master_seed: u64,
    /// Denominator of sampled initial points (deterministic mode).
    pub denominator: BigUint,
    pub retain_samples: bool,
    /// Record the label pair at steps `t` and `t + 1` (requires `t < n`).
    pub transition_step: Option<u64>,
}

impl Ensemble1D {
    pub fn new(n: u64, count: u64, mode: Mode, master_seed: u64) -> Self {
        Self {
            n,
            count,
            mode,
            master_seed,
            denominator: safe_prime_128(),
            retain_samples: false,
            transition_step: None,
        }
    }
}

/// End state of one trajectory of the ensemble.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryEnd1D {
    pub tile: usize,
    pub frac: Option<ExactPoint>,
    pub stopped: bool,
    pub transition: Option<(u8, u8)>,
}

/// Runs trajectory `index` of the ensemble.
pub fn run_trajectory_1d(env: &Environment, params: &Params1D, cfg: &Ensemble1D, index: u64) -> Result<TrajectoryEnd1D> {
    let mut rng = substream(cfg.master_seed, index);
    let mut transition = None;
    let mut before = None;
    let track = |t: u64, tile: usize, before: &mut Option<u8>, transition: &mut Option<(u8, u8)>| -> Result<()> {
        if let Some(ts) = cfg.transition_step {
            if t == ts {
                *before = Some(env.label_at(tile)?);
            } else if t == ts + 1 {
                *transition = Some((before.expect("recorded one step earlier"), env.label_at(tile)?));
            }
        }
        Ok(())
    };
    match cfg.mode {
        Mode::Markov => {
            let mut tile = 0usize;
            for t in 0..cfg.n {
                track(t, tile, &mut before, &mut transition)?;
                tile = step_markov(env, params, tile, &mut rng)?;
            }
            track(cfg.n, tile, &mut before, &mut transition)?;
            Ok(TrajectoryEnd1D {
                tile,
                frac: None,
                stopped: false,
                transition,
            })
        }
        Mode::Deterministic => {
            let x0 = ExactPoint::sample_interior(&mut rng, 1, &cfg.denominator)?;
            let mut state = WalkState1D::start(x0)?;
            let mut stopped = false;
            for t in 0..cfg.n {
                track(t, state.tile, &mut before, &mut transition)?;
                match step_deterministic(env, params, &mut state) {
                    Ok(()) => {}
                    Err(Error::StoppedProcess { .. }) => {
                        stopped = true;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            if !stopped {
                track(cfg.n, state.tile, &mut before, &mut transition)?;
            }
            Ok(TrajectoryEnd1D {
                tile: state.tile,
                frac: Some(state.x),
                stopped,
                transition,
            })
        }
    }
}

/// Runs an ensemble of independent trajectories from tile 0.
///
/// Trajectory `i` draws from stream `i` of `master_seed` and partial results
/// are merged in index order, so the summary is identical for any number of
/// worker threads.
pub fn run_ensemble_1d(env: &Environment, params: &Params1D, cfg: &Ensemble1D) -> Result<EnsembleSummary> {
    if env.dim() != 1 {
        return invalid("1D model needs a 1D environment");
    }
    let need = params.required_extent(cfg.n);
    if (env.extent()[0] as u64) < need {
        return Err(Error::EnvironmentExhausted {
            tile: (need - 1).to_string(),
            extent: env.extent()[0].to_string(),
        });
    }
    if let Some(t) = cfg.transition_step {
        if t >= cfg.n {
            return invalid(format!("transition step {t} must be below n = {}", cfg.n));
        }
    }
    let drift = [analytic_drift(params)];
    let empty = EnsembleSummary::empty(1, cfg.n, cfg.retain_samples, cfg.transition_step.is_some());
    collect_ensemble(empty, cfg.count, |i| {
        let end = run_trajectory_1d(env, params, cfg, i)?;
        let scaled = if cfg.n > 0 {
            scaled_fluctuation(&[end.tile], None, cfg.n, &drift)
        } else {
            vec![0.0]
        };
        Ok(TrajectoryOutcome {
            tile: [end.tile, 0],
            position: vec![end.tile as f64],
            scaled,
            end_label: env.label_at(end.tile)?,
            stopped: end.stopped,
            transition: end.transition,
        })
    })
}

/// `(k, V_k)` every `stride` steps (and at `n`) along one deterministic trajectory.
pub fn drift_trace(
    env: &Environment,
    params: &Params1D,
    x0: ExactPoint,
    n: u64,
    stride: u64,
) -> Result<(Vec<(u64, usize)>, WalkState1D)> {
    let stride = stride.max(1);
    let mut state = WalkState1D::start(x0)?;
    let mut trace = Vec::new();
    for _ in 0..n {
        step_deterministic(env, params, &mut state)?;
        if state.steps % stride == 0 || state.steps == n {
            trace.push((state.steps, state.tile));
        }
    }
    Ok((trace, state))
}
