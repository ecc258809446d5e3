//! Walk driven by hyperbolic toral automorphisms `Tᵢx = Aᵢx mod 1`.
//!
//! The square tiling is not a Markov partition for these maps, so there is no
//! exact chain to propagate; trajectories are computed exactly instead.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

use crate::bigrat::{pow2_128, ExactPoint, IntMatrix};
use crate::environment::Environment;
use crate::error::{invalid, Error, Result};
use crate::geometry::jump_distribution;
use crate::rng::substream;
use crate::stats::{collect_ensemble, scaled_fluctuation, EnsembleSummary, TrajectoryOutcome};
use crate::Rational;

pub type Mat2 = [[u64; 2]; 2];

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn int(n: u64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

fn check_matrix(m: &Mat2, name: &str) -> Result<()> {
    if m.iter().flatten().any(|&e| e == 0) {
        return invalid(format!("{name} = {m:?} must have positive entries"));
    }
    let det = m[0][0] as i128 * m[1][1] as i128 - m[0][1] as i128 * m[1][0] as i128;
    if det != 1 {
        return invalid(format!("{name} = {m:?} has determinant {det}, expected 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Params2D {
    pub a0: Mat2,
    pub a1: Mat2,
    pub p0: Rational,
}

impl Params2D {
    /// Positive entries and unit determinant force trace ≥ 3, hence a pair of
    /// real eigenvalues `λ > 1 > λ⁻¹`.
    pub fn new(a0: Mat2, a1: Mat2, p0: Rational) -> Result<Self> {
        check_matrix(&a0, "A0")?;
        check_matrix(&a1, "A1")?;
        if !p0.is_positive() || p0 >= Rational::one() {
            return invalid(format!("p0 must lie strictly between 0 and 1, got {p0}"));
        }
        Ok(Self { a0, a1, p0 })
    }

    /// `A₀ = [[2,1],[1,1]]`, `A₁ = [[3,1],[2,1]]`, `p₀ = ½`.
    pub fn example() -> Self {
        Self::new([[2, 1], [1, 1]], [[3, 1], [2, 1]], rat(1, 2)).expect("valid")
    }

    pub fn matrix(&self, label: u8) -> &Mat2 {
        if label == 0 {
            &self.a0
        } else {
            &self.a1
        }
    }

    pub fn p1(&self) -> Rational {
        Rational::one() - &self.p0
    }

    /// Per-axis extent such that every `n`-step path from tile (0,0) fits.
    pub fn required_extent(&self, n: u64) -> u64 {
        let max_row = [self.a0, self.a1]
            .iter()
            .flat_map(|m| m.iter().map(|r| r[0] + r[1]))
            .max()
            .unwrap_or(0);
        n * max_row + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkState2D {
    pub tile: [usize; 2],
    pub x: ExactPoint,
    pub steps: u64,
}

impl WalkState2D {
    pub fn start(x: ExactPoint) -> Result<Self> {
        if x.dim() != 2 {
            return invalid("2D walk needs a point on the torus");
        }
        Ok(Self {
            tile: [0, 0],
            x,
            steps: 0,
        })
    }

    pub fn position_f64(&self) -> [f64; 2] {
        [
            self.tile[0] as f64 + self.x.coordinate_f64(0),
            self.tile[1] as f64 + self.x.coordinate_f64(1),
        ]
    }
}

/// One exact step; a coordinate landing on 0 is reported as
/// [`Error::BoundaryHit`] after the state has been advanced.
pub fn step_deterministic_2d(env: &Environment, params: &Params2D, state: &mut WalkState2D) -> Result<()> {
    let label = env.label_at_2d(state.tile)?;
    let m = IntMatrix::from_rows2(*params.matrix(label));
    let mut jump = [0u64; 2];
    state.x.apply(&m, &mut jump)?;
    state.tile[0] += jump[0] as usize;
    state.tile[1] += jump[1] as usize;
    state.steps += 1;
    if state.x.touches_boundary() {
        return Err(Error::BoundaryHit { steps: state.steps });
    }
    Ok(())
}

/// Environment-averaged constants of the 2D model.
#[derive(Debug, Clone, PartialEq)]
pub struct Analytic2D {
    pub alpha_star: [[Rational; 2]; 2],
    /// Overlap of `Aᵢ([0,1]²)` with the unit square.
    pub self_overlap: [Rational; 2],
    pub p: Rational,
    pub d0: [Rational; 2],
    pub d1: [Rational; 2],
    pub drift: [Rational; 2],
}

fn signed(m: &Mat2) -> [[i64; 2]; 2] {
    [
        [m[0][0] as i64, m[0][1] as i64],
        [m[1][0] as i64, m[1][1] as i64],
    ]
}

/// Probability that one step from a uniform point keeps the walker in its tile.
pub fn self_overlap(m: &Mat2) -> Result<Rational> {
    Ok(jump_distribution(signed(m))?
        .into_iter()
        .find(|(k, _)| *k == [0, 0])
        .map(|(_, p)| p)
        .unwrap_or_else(Rational::zero))
}

/// `α*ᵢⱼ = δᵢⱼ(sᵢ + (1−sᵢ)pᵢ) + (1−δᵢⱼ)(1−sᵢ)pⱼ` with self-overlaps `sᵢ`.
pub fn analytic_alpha_star_2d(params: &Params2D) -> Result<([[Rational; 2]; 2], [Rational; 2])> {
    let s = [self_overlap(&params.a0)?, self_overlap(&params.a1)?];
    let p = [params.p0.clone(), params.p1()];
    let entry = |i: usize, j: usize| {
        let leave = Rational::one() - &s[i];
        if i == j {
            &s[i] + leave * &p[i]
        } else {
            leave * &p[j]
        }
    };
    Ok(([[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]], s))
}

/// Label-0 component of the stationary vector of an irreducible 2×2 stochastic matrix.
pub fn equilibrium_p_2d(alpha: &[[Rational; 2]; 2]) -> Result<Rational> {
    for row in alpha {
        if row.iter().any(Signed::is_negative) || &row[0] + &row[1] != Rational::one() {
            return invalid("matrix is not stochastic");
        }
    }
    let (leave0, leave1) = (&alpha[0][1], &alpha[1][0]);
    if leave0.is_zero() || leave1.is_zero() {
        return invalid("matrix is reducible: one label is never left");
    }
    Ok(leave1 / (leave0 + leave1))
}

/// `Dᵢ = (Aᵢ − 𝟙)(½, ½)ᵀ`.
pub fn mean_jump(m: &Mat2) -> [Rational; 2] {
    let half = rat(1, 2);
    [
        (int(m[0][0] + m[0][1]) - int(1)) * &half,
        (int(m[1][0] + m[1][1]) - int(1)) * &half,
    ]
}

/// `D = pD₀ + (1−p)D₁`.
pub fn drift_2d(params: &Params2D) -> Result<[Rational; 2]> {
    Ok(Analytic2D::compute(params)?.drift)
}

impl Analytic2D {
    pub fn compute(params: &Params2D) -> Result<Self> {
        let (alpha_star, self_overlap) = analytic_alpha_star_2d(params)?;
        let p = equilibrium_p_2d(&alpha_star)?;
        let q = Rational::one() - &p;
        let d0 = mean_jump(&params.a0);
        let d1 = mean_jump(&params.a1);
        let drift = [&p * &d0[0] + &q * &d1[0], &p * &d0[1] + &q * &d1[1]];
        Ok(Self {
            alpha_star,
            self_overlap,
            p,
            d0,
            d1,
            drift,
        })
    }
}

/// Knobs of a 2D ensemble run.
#[derive(Debug, Clone)]
pub struct Ensemble2D {
    pub n: u64,
    pub count: u64,
    pub master_seed: u64,
    pub denominator: BigUint,
    pub retain_samples: bool,
}

impl Ensemble2D {
    pub fn new(n: u64, count: u64, master_seed: u64) -> Self {
        Self {
            n,
            count,
            master_seed,
            denominator: pow2_128(),
            retain_samples: false,
        }
    }
}

/// Runs trajectory `index`: uniform start on the interior grid of tile (0,0),
/// then `n` exact steps. Returns the final state and whether a boundary was hit.
pub fn run_trajectory_2d(env: &Environment, params: &Params2D, cfg: &Ensemble2D, index: u64) -> Result<(WalkState2D, bool)> {
    let mut rng = substream(cfg.master_seed, index);
    let x0 = ExactPoint::sample_interior(&mut rng, 2, &cfg.denominator)?;
    let mut state = WalkState2D::start(x0)?;
    for _ in 0..cfg.n {
        match step_deterministic_2d(env, params, &mut state) {
            Ok(()) => {}
            Err(Error::BoundaryHit { .. }) => return Ok((state, true)),
            Err(e) => return Err(e),
        }
        debug_assert_eq!(state.x.denominator(), &cfg.denominator);
    }
    Ok((state, false))
}

pub fn run_ensemble_2d(env: &Environment, params: &Params2D, cfg: &Ensemble2D) -> Result<EnsembleSummary> {
    if env.dim() != 2 {
        return invalid("2D model needs a 2D environment");
    }
    let need = params.required_extent(cfg.n);
    if env.extent().iter().any(|&e| (e as u64) < need) {
        return Err(Error::EnvironmentExhausted {
            tile: format!("({0}, {0})", need - 1),
            extent: format!("{}x{}", env.extent()[0], env.extent()[1]),
        });
    }
    let drift = Analytic2D::compute(params)?.drift;
    let empty = EnsembleSummary::empty(2, cfg.n, cfg.retain_samples, false);
    collect_ensemble(empty, cfg.count, |i| {
        let (state, stopped) = run_trajectory_2d(env, params, cfg, i)?;
        let scaled = if cfg.n > 0 {
            scaled_fluctuation(&state.tile, Some(&state.x), cfg.n, &drift)
        } else {
            vec![0.0, 0.0]
        };
        Ok(TrajectoryOutcome {
            tile: state.tile,
            position: state.position_f64().to_vec(),
            scaled,
            end_label: env.label_at_2d(state.tile)?,
            stopped,
            transition: None,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn half() -> Rational {
        rat(1, 2)
    }

    fn pt(a: u64, b: u64, q: u64) -> ExactPoint {
        ExactPoint::from_u64(&[a, b], q).unwrap()
    }

    fn uniform_env(label: u8, extent: usize) -> Environment {
        Environment::from_labels(2, &[extent, extent], &vec![label; extent * extent], &half()).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(Params2D::new([[1, 0], [0, 1]], [[3, 1], [2, 1]], half()).is_err());
        assert!(Params2D::new([[2, 1], [1, 2]], [[3, 1], [2, 1]], half()).is_err());
        assert!(Params2D::new([[2, 1], [1, 1]], [[3, 1], [2, 1]], Rational::one()).is_err());
        assert_eq!(Params2D::example().required_extent(2000), 8001);
    }

    #[test]
    fn step_examples() {
        let p = Params2D::example();
        let env1 = uniform_env(1, 4);
        let mut s = WalkState2D::start(pt(1, 1, 2)).unwrap();
        assert!(matches!(step_deterministic_2d(&env1, &p, &mut s), Err(Error::BoundaryHit { steps: 1 })));
        assert_eq!(s.tile, [2, 1]);
        assert_eq!(s.x, pt(0, 1, 2));

        let env0 = uniform_env(0, 4);
        let mut s = WalkState2D::start(pt(1, 1, 3)).unwrap();
        assert!(step_deterministic_2d(&env0, &p, &mut s).is_err());
        assert_eq!((s.tile, s.x.clone()), ([1, 0], pt(0, 2, 3)));

        let x = ExactPoint::from_u64(&[4, 3], 12).unwrap();
        let mut s = WalkState2D::start(x).unwrap();
        step_deterministic_2d(&env0, &p, &mut s).unwrap();
        assert_eq!((s.tile, s.x.clone()), ([0, 0], pt(11, 7, 12)));
    }

    #[test]
    fn analytic_example_values() {
        let p = Params2D::example();
        let a = Analytic2D::compute(&p).unwrap();
        assert_eq!(a.self_overlap, [rat(1, 4), rat(1, 6)]);
        assert_eq!(a.alpha_star, [[rat(5, 8), rat(3, 8)], [rat(5, 12), rat(7, 12)]]);
        assert_eq!(a.p, rat(10, 19));
        assert_eq!(a.d0, [rat(1, 1), rat(1, 2)]);
        assert_eq!(a.d1, [rat(3, 2), rat(1, 1)]);
        assert_eq!(a.drift, [rat(47, 38), rat(14, 19)]);
        let q = Rational::one() - &a.p;
        assert_eq!(&a.p * &a.alpha_star[0][0] + &q * &a.alpha_star[1][0], a.p);
    }

    #[test]
    fn identical_matrices() {
        let m = [[5, 2], [2, 1]];
        for p0 in [rat(1, 3), rat(3, 4)] {
            let p = Params2D::new(m, m, p0.clone()).unwrap();
            let a = Analytic2D::compute(&p).unwrap();
            assert_eq!(a.self_overlap[0], a.self_overlap[1]);
            assert_eq!(a.p, p.p0);
            assert_eq!(a.drift, mean_jump(&m));
            assert_eq!(a.drift, [rat(3, 1), rat(1, 1)]);
        }
    }

    #[test]
    fn equilibrium_cases() {
        let rank_one = [[rat(2, 7), rat(5, 7)], [rat(2, 7), rat(5, 7)]];
        assert_eq!(equilibrium_p_2d(&rank_one).unwrap(), rat(2, 7));
        let absorbing = [[Rational::one(), Rational::zero()], [half(), half()]];
        assert!(equilibrium_p_2d(&absorbing).is_err());
        let bad = [[half(), half()], [half(), rat(1, 3)]];
        assert!(equilibrium_p_2d(&bad).is_err());
    }

    #[test]
    fn one_step_law_matches_overlap_areas() {
        // Start uniformly in a single tile; the empirical offset frequencies
        // of one exact step follow the parallelogram overlap areas.
        let p = Params2D::example();
        for label in [0u8, 1] {
            let env = uniform_env(label, 8);
            let jd = jump_distribution(signed(p.matrix(label))).unwrap();
            let draws = 1_000_000u64;
            let mut rng = substream(21, label as u64);
            let mut counts: BTreeMap<[i64; 2], u64> = BTreeMap::new();
            for _ in 0..draws {
                let x = ExactPoint::sample_interior(&mut rng, 2, &pow2_128()).unwrap();
                let mut s = WalkState2D::start(x).unwrap();
                let _ = step_deterministic_2d(&env, &p, &mut s);
                *counts.entry([s.tile[0] as i64, s.tile[1] as i64]).or_insert(0) += 1;
            }
            assert_eq!(counts.len(), jd.len());
            for (k, prob) in &jd {
                let q: f64 = crate::stats::rational_f64(prob);
                let got = counts.get(k).copied().unwrap_or(0) as f64;
                let sigma = (draws as f64 * q * (1.0 - q)).sqrt();
                assert!((got - draws as f64 * q).abs() <= 4.0 * sigma, "offset {k:?}");
            }
        }
    }

    #[test]
    fn trajectories_are_exact_and_reproducible() {
        let p = Params2D::example();
        let n = 50;
        let extent = p.required_extent(n) as usize;
        let env = Environment::generate(6, &half(), 2, &[extent, extent]).unwrap();
        let cfg = Ensemble2D::new(n, 4, 11);
        for i in 0..4 {
            let (a, hit) = run_trajectory_2d(&env, &p, &cfg, i).unwrap();
            let (b, _) = run_trajectory_2d(&env, &p, &cfg, i).unwrap();
            assert!(!hit);
            assert_eq!(a, b);
            assert_eq!(a.x.denominator(), &pow2_128());
            // replay with the exact integer identity M·x = jump + frac
            let mut rng = substream(11, i);
            let x0 = ExactPoint::sample_interior(&mut rng, 2, &pow2_128()).unwrap();
            let mut tile = [BigUint::zero(), BigUint::zero()];
            let mut num = x0.numerators().to_vec();
            let q = pow2_128();
            for _ in 0..n {
                let t = [tile[0].clone().try_into().unwrap(), tile[1].clone().try_into().unwrap()];
                let m = p.matrix(env.label_at_2d(t).unwrap());
                let y0 = &num[0] * m[0][0] + &num[1] * m[0][1];
                let y1 = &num[0] * m[1][0] + &num[1] * m[1][1];
                tile[0] += &y0 / &q;
                tile[1] += &y1 / &q;
                num = vec![y0 % &q, y1 % &q];
            }
            assert_eq!(BigUint::from(a.tile[0]), tile[0]);
            assert_eq!(BigUint::from(a.tile[1]), tile[1]);
            assert_eq!(a.x.numerators(), &num[..]);
        }
    }

    #[test]
    fn ensemble_edges() {
        let p = Params2D::example();
        let env = Environment::generate(6, &half(), 2, &[5, 5]).unwrap();
        let s = run_ensemble_2d(&env, &p, &Ensemble2D::new(1, 0, 1)).unwrap();
        assert_eq!(s.count, 0);
        assert!(matches!(
            run_ensemble_2d(&env, &p, &Ensemble2D::new(2, 10, 1)),
            Err(Error::EnvironmentExhausted { .. })
        ));
    }

    #[test]
    fn first_step_cloud_is_image_of_square() {
        let p = Params2D::example();
        let env = Environment::generate(6, &half(), 2, &[5, 5]).unwrap();
        let label = env.label_at_2d([0, 0]).unwrap();
        let m = p.matrix(label);
        let mut cfg = Ensemble2D::new(1, 10_000, 2);
        cfg.retain_samples = true;
        let s = run_ensemble_2d(&env, &p, &cfg).unwrap();
        let a = Analytic2D::compute(&p).unwrap();
        let d = [stats_f(&a.drift[0]), stats_f(&a.drift[1])];
        // v₁ = M x₀ lies in the parallelogram: M⁻¹v₁ ∈ [0,1]²
        let inv = [[m[1][1] as f64, -(m[0][1] as f64)], [-(m[1][0] as f64), m[0][0] as f64]];
        for z in s.scaled_samples.unwrap().chunks(2) {
            let v = [z[0] + d[0], z[1] + d[1]];
            let u = [inv[0][0] * v[0] + inv[0][1] * v[1], inv[1][0] * v[0] + inv[1][1] * v[1]];
            assert!(u.iter().all(|c| (-1e-9..=1.0 + 1e-9).contains(c)), "{u:?}");
        }
    }

    fn stats_f(r: &Rational) -> f64 {
        crate::stats::rational_f64(r)
    }
}
