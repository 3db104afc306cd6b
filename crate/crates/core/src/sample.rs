//! Deterministic sampling for verification sweeps. Everything goes through
//! one seeded ChaCha8 stream so acceptance runs are reproducible across
//! platforms.

use crate::exchange::{CompatiblePair, ExchangeData, IMat, QMat};
use crate::groupoids::{Family, GroupoidChart, GroupoidPoint};
use crate::{Int, Rat};
use num::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    /// Interior point of the positive orthant.
    pub fn base(&mut self, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.uniform(0.3, 2.5)).collect()
    }

    /// Fiber coordinates inside the family's domain over `base`.
    pub fn fiber(&mut self, family: Family, base: &[f64]) -> Vec<f64> {
        match family {
            Family::Spray => base.iter().map(|_| self.uniform(-0.7, 0.7)).collect(),
            // Keep x*u + 1 >= 0.3: the structure maps have negative powers of
            // it and finite differencing needs bounded derivatives.
            Family::Blowup => base
                .iter()
                .map(|&x| {
                    let lo = (-0.7 / x).max(-2.0);
                    self.uniform(lo, 1.3)
                })
                .collect(),
            Family::Double => base.iter().map(|_| self.uniform(0.4, 2.5)).collect(),
        }
    }

    /// Positive values for the exchange-polynomial coefficients; positivity
    /// keeps every Z strictly positive on the positive axis.
    pub fn zvals(&mut self, r_degrees: &[usize]) -> Vec<Vec<f64>> {
        r_degrees
            .iter()
            .map(|&r| (1..r).map(|_| self.uniform(0.6, 1.8)).collect())
            .collect()
    }

    pub fn avals(&mut self, r_degrees: &[usize]) -> Vec<Vec<f64>> {
        r_degrees
            .iter()
            .map(|&r| (1..r).map(|_| self.uniform(-1.0, 1.0)).collect())
            .collect()
    }

    /// A point of the chart without any cotangent block.
    pub fn family_point(&mut self, chart: &GroupoidChart) -> GroupoidPoint {
        let base = self.base(chart.dim());
        let fiber = self.fiber(chart.family, &base);
        GroupoidPoint::new(chart.family, base, fiber, vec![], vec![]).unwrap()
    }

    /// A point of the chart with z and a blocks shaped by `r_degrees`.
    pub fn groupoid_point(&mut self, chart: &GroupoidChart, r_degrees: &[usize]) -> GroupoidPoint {
        let base = self.base(chart.dim());
        let fiber = self.fiber(chart.family, &base);
        let z = self.zvals(r_degrees);
        let a = self.avals(r_degrees);
        GroupoidPoint::new(chart.family, base, fiber, z, a).unwrap()
    }

    /// A point over a prescribed base (used to construct composable pairs
    /// without tolerance games), sharing the z block.
    pub fn point_over(
        &mut self,
        chart: &GroupoidChart,
        base: &[f64],
        z: &[Vec<f64>],
        r_degrees: &[usize],
    ) -> GroupoidPoint {
        let fiber = self.fiber(chart.family, base);
        let a = self.avals(r_degrees);
        GroupoidPoint::new(chart.family, base.to_vec(), fiber, z.to_vec(), a).unwrap()
    }

    /// Random square rank-2 compatible pair with exactly solved Omega.
    pub fn rank2_square_pair(&mut self) -> CompatiblePair {
        let b = self.rng.gen_range(1..=3i64);
        let c = self.rng.gen_range(1..=3i64);
        let flip = self.rng.gen_bool(0.5);
        let (b12, b21) = if flip { (-b, c) } else { (b, -c) };
        let g = gcd(b, c);
        let d = vec![c / g, b / g];
        let ex = ExchangeData::new(
            2,
            2,
            IMat::from_i64_rows(&[vec![0, b12], vec![b21, 0]]).unwrap(),
            d,
            vec![1, 1],
        )
        .unwrap();
        CompatiblePair::solve_square(ex).unwrap()
    }

    /// Random principal extension: an n x n skew-symmetrizable block on top
    /// of the identity, with the standard compatible Omega
    /// [[0, -D], [D, -DB]].
    pub fn principal_pair(&mut self, n: usize) -> CompatiblePair {
        let d: Vec<i64> = (0..n).map(|_| self.rng.gen_range(1..=2i64)).collect();
        let mut b = vec![vec![0i64; n]; n];
        for k in 0..n {
            for l in (k + 1)..n {
                let a = self.rng.gen_range(0..=2i64);
                let sign = if self.rng.gen_bool(0.5) { 1 } else { -1 };
                // S_kl = a * sign * d_k * d_l keeps D B = S skew-symmetric
                // with integer B entries.
                b[k][l] = a * sign * d[l];
                b[l][k] = -a * sign * d[k];
            }
        }
        let m = 2 * n;
        let mut rows = b.clone();
        for i in 0..n {
            let mut row = vec![0i64; n];
            row[i] = 1;
            rows.push(row);
        }
        let bmat = IMat::from_i64_rows(&rows).unwrap();
        let mut omega = QMat::zeros(m, m);
        for k in 0..n {
            omega[(k, n + k)] = -Rat::from_integer(Int::from(d[k]));
            omega[(n + k, k)] = Rat::from_integer(Int::from(d[k]));
        }
        for k in 0..n {
            for l in 0..n {
                let v = -d[k] * b[k][l];
                if v != 0 {
                    omega[(n + k, n + l)] = Rat::from_integer(Int::from(v));
                } else {
                    omega[(n + k, n + l)] = Rat::zero();
                }
            }
        }
        let ex = ExchangeData::new(m, n, bmat, d, vec![1; n]).unwrap();
        CompatiblePair::new(ex, omega).expect("principal pair is compatible by construction")
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}
