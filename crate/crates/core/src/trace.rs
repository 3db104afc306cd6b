//! Mutation bookkeeping: c-/g-vector matrices, their duals, tropical signs
//! and z-orientation parities along a mutation path.

use crate::exchange::{plus_part, CompatiblePair, IMat};
use crate::report::VerificationReport;
use crate::{Error, Int, Result};
use num::{Signed, Zero};

/// A compatible pair evolved along a mutation path, together with the four
/// integer matrices controlling iterated mutations.
///
/// `c` and `g` are m x m with the frozen block pinned to the identity; `cdual`
/// is m x m and `gdual` n x n. Every mutation is taken at the tropical sign
/// read off the corresponding column of `c`, so the linear form of the
/// c-vector recursion applies.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MutationTrace {
    pub pair: CompatiblePair,
    pub c: IMat,
    pub g: IMat,
    pub cdual: IMat,
    pub gdual: IMat,
    /// Directions mutated so far (1-based) with the tropical sign used.
    pub path: Vec<(usize, i8)>,
    /// Parity of the number of mutations in each direction; drives the
    /// star-orientation of exchange-polynomial coefficients.
    pub z_parity: Vec<bool>,
}

impl MutationTrace {
    pub fn seed(pair: CompatiblePair) -> Self {
        let m = pair.exchange.m;
        let n = pair.exchange.n;
        MutationTrace {
            pair,
            c: IMat::identity(m),
            g: IMat::identity(m),
            cdual: IMat::identity(m),
            gdual: IMat::identity(n),
            path: Vec::new(),
            z_parity: vec![false; n],
        }
    }

    pub fn m(&self) -> usize {
        self.pair.exchange.m
    }

    pub fn n(&self) -> usize {
        self.pair.exchange.n
    }

    /// The tropical sign of direction `k` (1-based): the common sign of the
    /// k-th column of the c-matrix. Mixed signs are a hard error.
    pub fn tropical_sign(&self, k: usize) -> Result<i8> {
        if k == 0 || k > self.n() {
            return Err(Error::InvalidDirection { dir: k, n: self.n() });
        }
        tropical_sign_of(&self.c, k)
    }

    /// Mutates the pair and all four matrices in direction `k` at the
    /// tropical sign, flipping the z-parity of that direction.
    pub fn mutate(&self, k: usize) -> Result<MutationTrace> {
        let eps = self.tropical_sign(k)?;
        let kk = k - 1;
        let (m, n) = (self.m(), self.n());
        let ex = &self.pair.exchange;
        let epsi = Int::from(eps as i64);
        let rk = Int::from(ex.r[kk] as i64);

        let bkj = |j: usize| -> Int {
            if j < n {
                ex.b[(kk, j)].clone()
            } else {
                Int::zero()
            }
        };

        // Column operations on C at the tropical sign (linear on columns).
        let mut c = self.c.clone();
        for i in 0..m {
            for j in 0..m {
                c[(i, j)] = if j == kk {
                    -self.c[(i, j)].clone()
                } else {
                    &self.c[(i, j)] + &self.c[(i, kk)] * plus_part(&(&epsi * &rk * bkj(j)))
                };
            }
        }

        // Only column k of G changes.
        let mut g = self.g.clone();
        for i in 0..m {
            let mut acc = -self.g[(i, kk)].clone();
            for l in 0..m {
                acc += &self.g[(i, l)] * plus_part(&(-&epsi * &ex.b[(l, kk)] * &rk));
            }
            g[(i, kk)] = acc;
        }

        // Row operations on the dual c-matrix.
        let mut cdual = self.cdual.clone();
        for i in 0..m {
            for j in 0..m {
                cdual[(i, j)] = if i == kk {
                    -self.cdual[(i, j)].clone()
                } else {
                    &self.cdual[(i, j)]
                        + plus_part(&(-&epsi * &ex.b[(i, kk)] * &rk)) * &self.cdual[(kk, j)]
                };
            }
        }

        // Only row k of the dual g-matrix changes.
        let mut gdual = self.gdual.clone();
        for j in 0..n {
            let mut acc = -self.gdual[(kk, j)].clone();
            for l in 0..n {
                acc += plus_part(&(&epsi * &rk * bkj(l))) * &self.gdual[(l, j)];
            }
            gdual[(kk, j)] = acc;
        }

        let pair = self.pair.mutate(k, eps)?;
        let mut path = self.path.clone();
        path.push((k, eps));
        let mut z_parity = self.z_parity.clone();
        z_parity[kk] = !z_parity[kk];

        let trace = MutationTrace {
            pair,
            c,
            g,
            cdual,
            gdual,
            path,
            z_parity,
        };
        trace.assert_frozen_blocks()?;
        Ok(trace)
    }

    pub fn mutate_path(&self, path: &[usize]) -> Result<MutationTrace> {
        let mut t = self.clone();
        for &k in path {
            t = t.mutate(k)?;
        }
        Ok(t)
    }

    fn assert_frozen_blocks(&self) -> Result<()> {
        let (m, n) = (self.m(), self.n());
        for j in n..m {
            for i in 0..m {
                let delta = if i == j { Int::from(1) } else { Int::zero() };
                if self.c[(i, j)] != delta || self.g[(i, j)] != delta || self.cdual[(i, j)] != delta
                {
                    return Err(Error::Incompatible(format!(
                        "frozen block of trace matrices disturbed at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Exact check of the dual-vector identities
    /// `d_k C*[k][l] = d_l C[l][k]` and `d_k G*[k][l] = d_l G[l][k]`.
    pub fn check_duality(&self) -> VerificationReport {
        let n = self.n();
        let d = &self.pair.exchange.d;
        let mut failures = Vec::new();
        for k in 0..n {
            for l in 0..n {
                let lhs_c = Int::from(d[k]) * &self.cdual[(k, l)];
                let rhs_c = Int::from(d[l]) * &self.c[(l, k)];
                if lhs_c != rhs_c {
                    failures.push(format!("c-dual ({}, {})", k + 1, l + 1));
                }
                let lhs_g = Int::from(d[k]) * &self.gdual[(k, l)];
                let rhs_g = Int::from(d[l]) * &self.g[(l, k)];
                if lhs_g != rhs_g {
                    failures.push(format!("g-dual ({}, {})", k + 1, l + 1));
                }
            }
        }
        let samples = 2 * n * n;
        let notes = if failures.is_empty() {
            format!("path={:?}", self.path)
        } else {
            format!("path={:?}; failed: {}", self.path, failures.join(", "))
        };
        VerificationReport::exact("dual-vector identities", samples, failures.is_empty(), notes)
    }
}

pub(crate) fn tropical_sign_of(c: &IMat, k: usize) -> Result<i8> {
    let kk = k - 1;
    let mut pos = false;
    let mut neg = false;
    for i in 0..c.rows() {
        let v = &c[(i, kk)];
        if v.is_positive() {
            pos = true;
        } else if v.is_negative() {
            neg = true;
        }
    }
    match (pos, neg) {
        (true, false) => Ok(1),
        (false, true) => Ok(-1),
        (false, false) => Err(Error::SignCoherence {
            col: k,
            detail: "zero column".into(),
        }),
        (true, true) => Err(Error::SignCoherence {
            col: k,
            detail: format!(
                "entries {:?}",
                (0..c.rows()).map(|i| c[(i, kk)].to_string()).collect::<Vec<_>>()
            ),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exchange::{CompatiblePair, ExchangeData};

    fn seed(b: &[Vec<i64>], d: Vec<i64>, r: Vec<usize>) -> MutationTrace {
        let n = b[0].len();
        let ex = ExchangeData::new(b.len(), n, IMat::from_i64_rows(b).unwrap(), d, r).unwrap();
        MutationTrace::seed(CompatiblePair::solve_square(ex).unwrap())
    }

    fn a2() -> MutationTrace {
        seed(&[vec![0, 1], vec![-1, 0]], vec![1, 1], vec![1, 1])
    }

    fn b2() -> MutationTrace {
        seed(&[vec![0, 1], vec![-2, 0]], vec![2, 1], vec![1, 1])
    }

    fn g2() -> MutationTrace {
        seed(&[vec![0, 1], vec![-3, 0]], vec![3, 1], vec![1, 1])
    }

    fn imat(rows: &[Vec<i64>]) -> IMat {
        IMat::from_i64_rows(rows).unwrap()
    }

    #[test]
    fn tropical_sign_basics() {
        let t = a2();
        assert_eq!(t.tropical_sign(1).unwrap(), 1);
        let c = imat(&[vec![-1, 1], vec![0, 1]]);
        assert_eq!(tropical_sign_of(&c, 1).unwrap(), -1);
        let mixed = imat(&[vec![1, 0], vec![-1, 1]]);
        assert!(matches!(
            tropical_sign_of(&mixed, 1),
            Err(Error::SignCoherence { col: 1, .. })
        ));
    }

    #[test]
    fn a2_first_step_matches_hand_iteration() {
        let t = a2().mutate(1).unwrap();
        assert_eq!(t.c, imat(&[vec![-1, 1], vec![0, 1]]));
        assert_eq!(t.g, imat(&[vec![-1, 0], vec![1, 1]]));
        assert_eq!(t.z_parity, vec![true, false]);
    }

    #[test]
    fn double_mutation_restores_everything() {
        for t in [a2(), b2(), g2()] {
            for k in 1..=2 {
                let back = t.mutate(k).unwrap().mutate(k).unwrap();
                assert_eq!(back.c, t.c);
                assert_eq!(back.g, t.g);
                assert_eq!(back.cdual, t.cdual);
                assert_eq!(back.gdual, t.gdual);
                assert_eq!(back.pair, t.pair);
                assert_eq!(back.z_parity, t.z_parity);
            }
        }
    }

    #[test]
    fn a2_pentagon_swaps_columns() {
        let t = a2().mutate_path(&[1, 2, 1, 2, 1]).unwrap();
        let swap = imat(&[vec![0, 1], vec![1, 0]]);
        assert_eq!(t.c, swap);
        assert_eq!(t.g, swap);
    }

    // Brute-force iteration of the two-sign c-vector recursion; independent
    // of the production code path, which uses the simplified linear rule.
    fn two_sign_c_step(c: &IMat, b: &IMat, r: &[usize], k: usize, eps: i64) -> IMat {
        let kk = k - 1;
        let m = c.rows();
        let n = b.cols();
        let rk = Int::from(r[kk] as i64);
        let e = Int::from(eps);
        let mut out = c.clone();
        for i in 0..m {
            for j in 0..m {
                out[(i, j)] = if j == kk {
                    -c[(i, j)].clone()
                } else {
                    let bkj = if j < n { b[(kk, j)].clone() } else { Int::zero() };
                    &c[(i, j)]
                        + plus_part(&(-&e * &c[(i, kk)] * &rk)) * &bkj
                        + &c[(i, kk)] * plus_part(&(&e * &rk * &bkj))
                };
            }
        }
        out
    }

    #[test]
    fn tropical_rule_matches_two_sign_rule_at_either_sign() {
        for base in [a2(), b2(), g2()] {
            for path in [vec![1, 2, 1], vec![2, 1, 2, 1], vec![1, 2, 1, 2, 1]] {
                let mut t = base.clone();
                for k in path {
                    let plus = two_sign_c_step(&t.c, &t.pair.exchange.b, &t.pair.exchange.r, k, 1);
                    let minus =
                        two_sign_c_step(&t.c, &t.pair.exchange.b, &t.pair.exchange.r, k, -1);
                    let next = t.mutate(k).unwrap();
                    assert_eq!(next.c, plus);
                    assert_eq!(next.c, minus);
                    t = next;
                }
            }
        }
    }

    #[test]
    fn duality_holds_along_paths() {
        assert!(a2().check_duality().pass);
        assert!(a2().mutate_path(&[1, 2]).unwrap().check_duality().pass);
        assert!(b2().mutate_path(&[1, 2, 1]).unwrap().check_duality().pass);
        for t in [a2(), b2(), g2()] {
            let mut cur = t;
            for k in [1, 2, 1, 2, 1, 2, 1, 2] {
                cur = cur.mutate(k).unwrap();
                assert!(cur.check_duality().pass, "path {:?}", cur.path);
            }
        }
    }

    #[test]
    fn rank2_periodicities_close_up() {
        // Alternating sequences of length 5 / 6 / 8. The odd-length pentagon
        // closes up to the index swap, the even-length ones on the nose.
        let pent = a2().mutate_path(&[1, 2, 1, 2, 1]).unwrap();
        let swap = imat(&[vec![0, 1], vec![1, 0]]);
        assert_eq!(pent.c, swap);
        let hex = b2().mutate_path(&[1, 2, 1, 2, 1, 2]).unwrap();
        assert_eq!(hex.c, IMat::identity(2));
        assert_eq!(hex.g, IMat::identity(2));
        assert_eq!(hex.pair, b2().pair);
        let oct = g2().mutate_path(&[1, 2, 1, 2, 1, 2, 1, 2]).unwrap();
        assert_eq!(oct.c, IMat::identity(2));
        assert_eq!(oct.g, IMat::identity(2));
        assert_eq!(oct.pair, g2().pair);
    }
}
