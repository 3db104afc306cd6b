//! Exchange data, compatible pairs and their mutation.
//!
//! All arithmetic in this module is exact: integer matrices use [`Int`] and
//! the skew matrix Omega uses [`Rat`]. Mutation of a compatible pair must be
//! involutive and compatibility-preserving bit for bit, which rules out
//! floating point.

use crate::{Error, Int, Rat, Result};
use num::{One, Signed, Zero};
use std::fmt;

/// Dense matrix over an exact scalar. Sizes here are desk scale, so the
/// representation is a plain row-major vector.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone + Zero> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Mat {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].clone();
            }
        }
        out
    }
}

impl<T: Clone + Zero + One> Mat<T> {
    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T> Mat<T>
where
    T: Clone + Zero + std::ops::Mul<Output = T> + std::ops::Add<Output = T>,
{
    pub fn mul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows, "matrix product shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = T::zero();
                for k in 0..self.cols {
                    acc = acc + self[(i, k)].clone() * other[(k, j)].clone();
                }
                out[(i, j)] = acc;
            }
        }
        out
    }
}

pub type IMat = Mat<Int>;
pub type QMat = Mat<Rat>;

impl IMat {
    pub fn to_rat(&self) -> QMat {
        let mut out = QMat::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = Rat::from_integer(self[(i, j)].clone());
            }
        }
        out
    }

    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Result<Self> {
        Mat::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| Int::from(v)).collect())
                .collect(),
        )
    }
}

impl QMat {
    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| rat_to_f64(&self[(i, j)]))
    }

    /// Rank over the rationals by fraction-free Gaussian elimination.
    pub fn rank(&self) -> usize {
        let mut a = self.clone();
        let mut rank = 0;
        let mut row = 0;
        for col in 0..a.cols {
            let pivot = (row..a.rows).find(|&i| !a[(i, col)].is_zero());
            let Some(p) = pivot else { continue };
            for j in 0..a.cols {
                let tmp = a[(p, j)].clone();
                a[(p, j)] = a[(row, j)].clone();
                a[(row, j)] = tmp;
            }
            let inv = a[(row, col)].clone();
            for i in (row + 1)..a.rows {
                if a[(i, col)].is_zero() {
                    continue;
                }
                let factor = &a[(i, col)] / &inv;
                for j in col..a.cols {
                    let sub = &factor * &a[(row, j)];
                    a[(i, j)] = &a[(i, j)] - &sub;
                }
            }
            row += 1;
            rank += 1;
            if row == a.rows {
                break;
            }
        }
        rank
    }

    /// Solves `self * x = rhs` exactly. Fails if `self` is singular.
    pub fn solve(&self, rhs: &QMat) -> Result<QMat> {
        if self.rows != self.cols || rhs.rows != self.rows {
            return Err(Error::Dimension("solve expects square system".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.clone();
        for col in 0..n {
            let pivot = (col..n).find(|&i| !a[(i, col)].is_zero());
            let Some(p) = pivot else {
                return Err(Error::Incompatible("singular exchange matrix".into()));
            };
            if p != col {
                for j in 0..n {
                    let tmp = a[(p, j)].clone();
                    a[(p, j)] = a[(col, j)].clone();
                    a[(col, j)] = tmp;
                }
                for j in 0..b.cols {
                    let tmp = b[(p, j)].clone();
                    b[(p, j)] = b[(col, j)].clone();
                    b[(col, j)] = tmp;
                }
            }
            let inv = a[(col, col)].clone();
            for i in 0..n {
                if i == col || a[(i, col)].is_zero() {
                    continue;
                }
                let factor = &a[(i, col)] / &inv;
                for j in 0..n {
                    let sub = &factor * &a[(col, j)];
                    a[(i, j)] = &a[(i, j)] - &sub;
                }
                for j in 0..b.cols {
                    let sub = &factor * &b[(col, j)];
                    b[(i, j)] = &b[(i, j)] - &sub;
                }
            }
        }
        let mut x = QMat::zeros(n, b.cols);
        for i in 0..n {
            for j in 0..b.cols {
                x[(i, j)] = &b[(i, j)] / &a[(i, i)];
            }
        }
        Ok(x)
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    num::ToPrimitive::to_f64(r).expect("rational out of f64 range")
}

/// Parses "p/q" or "p" into an exact rational.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let parse_int = |t: &str| -> Result<Int> {
        t.trim()
            .parse::<Int>()
            .map_err(|_| Error::InvalidExchange(format!("bad rational literal {s:?}")))
    };
    match s.split_once('/') {
        Some((p, q)) => {
            let den = parse_int(q)?;
            if den.is_zero() {
                return Err(Error::InvalidExchange(format!("zero denominator in {s:?}")));
            }
            Ok(Rat::new(parse_int(p)?, den))
        }
        None => Ok(Rat::from_integer(parse_int(s)?)),
    }
}

pub fn fmt_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// `[b]_+ = max(b, 0)` on exact integers.
pub fn plus_part(b: &Int) -> Int {
    if b.is_positive() {
        b.clone()
    } else {
        Int::zero()
    }
}

/// An m x n exchange matrix with its symmetrizer and exchange-polynomial degrees.
///
/// `b` stores the full m x n matrix; rows n+1..m correspond to frozen
/// directions. The principal n x n block must be skew-symmetrizable by the
/// diagonal `d` and the columns of `b` must be linearly independent.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ExchangeData {
    pub m: usize,
    pub n: usize,
    pub b: IMat,
    pub d: Vec<i64>,
    pub r: Vec<usize>,
}

impl ExchangeData {
    pub fn new(m: usize, n: usize, b: IMat, d: Vec<i64>, r: Vec<usize>) -> Result<Self> {
        if n == 0 || n > m {
            return Err(Error::InvalidExchange(format!(
                "need 1 <= n <= m, got n={n}, m={m}"
            )));
        }
        if b.rows() != m || b.cols() != n {
            return Err(Error::Dimension(format!(
                "exchange matrix must be {m}x{n}, got {}x{}",
                b.rows(),
                b.cols()
            )));
        }
        if d.len() != n || r.len() != n {
            return Err(Error::Dimension("d and r must have length n".into()));
        }
        if d.iter().any(|&x| x <= 0) {
            return Err(Error::InvalidExchange("symmetrizer entries must be positive".into()));
        }
        if r.iter().any(|&x| x == 0) {
            return Err(Error::InvalidExchange("exchange degrees must be positive".into()));
        }
        for k in 0..n {
            if !b[(k, k)].is_zero() {
                return Err(Error::InvalidExchange(format!(
                    "principal diagonal entry b[{}][{}] must vanish",
                    k + 1,
                    k + 1
                )));
            }
            for l in 0..n {
                let lhs = Int::from(d[k]) * &b[(k, l)];
                let rhs = Int::from(d[l]) * &b[(l, k)];
                if lhs != -rhs {
                    return Err(Error::InvalidExchange(format!(
                        "d*B principal block is not skew-symmetric at ({}, {})",
                        k + 1,
                        l + 1
                    )));
                }
            }
        }
        if b.to_rat().rank() != n {
            return Err(Error::InvalidExchange(
                "exchange matrix columns are linearly dependent".into(),
            ));
        }
        Ok(ExchangeData { m, n, b, d, r })
    }

    fn check_direction(&self, k: usize) -> Result<usize> {
        if k == 0 || k > self.n {
            Err(Error::InvalidDirection { dir: k, n: self.n })
        } else {
            Ok(k - 1)
        }
    }
}

/// An exchange matrix together with a D-compatible skew matrix Omega,
/// i.e. `B^T Omega = [D 0]` exactly.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CompatiblePair {
    pub exchange: ExchangeData,
    pub omega: QMat,
}

impl CompatiblePair {
    pub fn new(exchange: ExchangeData, omega: QMat) -> Result<Self> {
        let m = exchange.m;
        if omega.rows() != m || omega.cols() != m {
            return Err(Error::Dimension(format!("omega must be {m}x{m}")));
        }
        for i in 0..m {
            for j in 0..m {
                if omega[(i, j)] != -omega[(j, i)].clone() {
                    return Err(Error::Incompatible(format!(
                        "omega is not skew-symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let pair = CompatiblePair { exchange, omega };
        pair.check_compatibility()?;
        Ok(pair)
    }

    /// Solves `B^T Omega = D` for Omega in the square case. The solution is
    /// automatically skew-symmetric when dB is, but we verify anyway.
    pub fn solve_square(exchange: ExchangeData) -> Result<Self> {
        if exchange.m != exchange.n {
            return Err(Error::Incompatible(
                "omega can only be synthesized when m = n; supply it explicitly".into(),
            ));
        }
        let n = exchange.n;
        let bt = exchange.b.to_rat().transpose();
        let mut rhs = QMat::zeros(n, n);
        for k in 0..n {
            rhs[(k, k)] = Rat::from_integer(Int::from(exchange.d[k]));
        }
        let omega = bt.solve(&rhs)?;
        CompatiblePair::new(exchange, omega)
    }

    fn check_compatibility(&self) -> Result<()> {
        let ex = &self.exchange;
        let prod = ex.b.to_rat().transpose().mul(&self.omega);
        for k in 0..ex.n {
            for j in 0..ex.m {
                let expected = if j == k {
                    Rat::from_integer(Int::from(ex.d[k]))
                } else {
                    Rat::zero()
                };
                if prod[(k, j)] != expected {
                    return Err(Error::Incompatible(format!(
                        "B^T Omega differs from [D 0] at ({}, {})",
                        k + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Mutation of the compatible pair in direction `k` (1-based) with sign
    /// `eps`. The result is independent of the sign and mutating twice in the
    /// same direction restores the input exactly.
    pub fn mutate(&self, k: usize, eps: i8) -> Result<CompatiblePair> {
        let ex = &self.exchange;
        let kk = ex.check_direction(k)?;
        let (m, n) = (ex.m, ex.n);
        let eps = Int::from(eps as i64);
        let rk = Int::from(ex.r[kk] as i64);

        let mut b = IMat::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                b[(i, j)] = if i == kk || j == kk {
                    -ex.b[(i, j)].clone()
                } else {
                    let t1 = plus_part(&(-&eps * &ex.b[(i, kk)] * &rk)) * &ex.b[(kk, j)];
                    let t2 = &ex.b[(i, kk)] * plus_part(&(&eps * &rk * &ex.b[(kk, j)]));
                    &ex.b[(i, j)] + t1 + t2
                };
            }
        }

        // E-matrix: identity except in column k.
        let mut e = QMat::identity(m);
        for i in 0..m {
            e[(i, kk)] = if i == kk {
                -Rat::one()
            } else {
                Rat::from_integer(plus_part(&(-&eps * &ex.b[(i, kk)] * &rk)))
            };
        }
        let omega = e.transpose().mul(&self.omega).mul(&e);

        let exchange = ExchangeData::new(m, n, b, ex.d.clone(), ex.r.clone())
            .map_err(|err| Error::Incompatible(format!("mutation produced invalid data: {err}")))?;
        CompatiblePair::new(exchange, omega)
            .map_err(|err| Error::Incompatible(format!("mutation broke compatibility: {err}")))
    }
}

impl fmt::Display for CompatiblePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ex = &self.exchange;
        writeln!(f, "B ({}x{}):", ex.m, ex.n)?;
        for i in 0..ex.m {
            let row: Vec<String> = (0..ex.n).map(|j| ex.b[(i, j)].to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        writeln!(f, "Omega ({0}x{0}):", ex.m)?;
        for i in 0..ex.m {
            let row: Vec<String> = (0..ex.m).map(|j| fmt_rat(&self.omega[(i, j)])).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn a2_pair() -> CompatiblePair {
        let ex = ExchangeData::new(
            2,
            2,
            IMat::from_i64_rows(&[vec![0, 1], vec![-1, 0]]).unwrap(),
            vec![1, 1],
            vec![1, 1],
        )
        .unwrap();
        CompatiblePair::solve_square(ex).unwrap()
    }

    fn b2_pair() -> CompatiblePair {
        let ex = ExchangeData::new(
            2,
            2,
            IMat::from_i64_rows(&[vec![0, 1], vec![-2, 0]]).unwrap(),
            vec![2, 1],
            vec![1, 1],
        )
        .unwrap();
        CompatiblePair::solve_square(ex).unwrap()
    }

    #[test]
    fn a2_mutation_matches_hand_evaluation() {
        let pair = a2_pair();
        assert_eq!(
            pair.omega,
            QMat::from_rows(vec![
                vec![Rat::zero(), Rat::one()],
                vec![-Rat::one(), Rat::zero()],
            ])
            .unwrap()
        );
        let mutated = pair.mutate(1, 1).unwrap();
        let expected_b = IMat::from_i64_rows(&[vec![0, -1], vec![1, 0]]).unwrap();
        assert_eq!(mutated.exchange.b, expected_b);
        let expected_omega = QMat::from_rows(vec![
            vec![Rat::zero(), -Rat::one()],
            vec![Rat::one(), Rat::zero()],
        ])
        .unwrap();
        assert_eq!(mutated.omega, expected_omega);
    }

    #[test]
    fn mutation_is_involutive_for_either_sign() {
        for pair in [a2_pair(), b2_pair()] {
            for k in 1..=2 {
                for (e1, e2) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                    let back = pair.mutate(k, e1).unwrap().mutate(k, e2).unwrap();
                    assert_eq!(back, pair, "k={k} signs=({e1},{e2})");
                }
            }
        }
    }

    // Independent one-off evaluator of the matrix mutation rule, written
    // directly from the case split rather than via the E-matrix path.
    fn brute_force_b_mutation(ex: &ExchangeData, k: usize, eps: i64) -> Vec<Vec<i64>> {
        let to_i64 = |v: &Int| num::ToPrimitive::to_i64(v).unwrap();
        let kk = k - 1;
        let plus = |b: i64| b.max(0);
        let rk = ex.r[kk] as i64;
        (0..ex.m)
            .map(|i| {
                (0..ex.n)
                    .map(|j| {
                        let bij = to_i64(&ex.b[(i, j)]);
                        if i == kk || j == kk {
                            -bij
                        } else {
                            let bik = to_i64(&ex.b[(i, kk)]);
                            let bkj = to_i64(&ex.b[(kk, j)]);
                            bij + plus(-eps * bik * rk) * bkj + bik * plus(eps * rk * bkj)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn b2_mutation_agrees_with_brute_force() {
        let pair = b2_pair();
        for (k, eps) in [(1usize, 1i8), (1, -1), (2, 1), (2, -1)] {
            let mutated = pair.mutate(k, eps).unwrap();
            let oracle = brute_force_b_mutation(&pair.exchange, k, eps as i64);
            let expected = IMat::from_i64_rows(&oracle).unwrap();
            assert_eq!(mutated.exchange.b, expected, "k={k} eps={eps}");
        }
    }

    #[test]
    fn frozen_directions_are_rejected() {
        let ex = ExchangeData::new(
            3,
            2,
            IMat::from_i64_rows(&[vec![0, 1], vec![-1, 0], vec![1, 1]]).unwrap(),
            vec![1, 1],
            vec![1, 1],
        )
        .unwrap();
        // Principal-style Omega for the 3x2 case is not synthesized.
        assert!(CompatiblePair::solve_square(ex).is_err());
        let pair = a2_pair();
        assert!(matches!(
            pair.mutate(3, 1),
            Err(Error::InvalidDirection { dir: 3, n: 2 })
        ));
        assert!(matches!(pair.mutate(0, 1), Err(Error::InvalidDirection { .. })));
    }

    #[test]
    fn invalid_omega_is_rejected() {
        let ex = a2_pair().exchange;
        let not_skew = QMat::from_rows(vec![
            vec![Rat::zero(), Rat::one()],
            vec![Rat::one(), Rat::zero()],
        ])
        .unwrap();
        assert!(CompatiblePair::new(ex.clone(), not_skew).is_err());
        let wrong_scale = QMat::from_rows(vec![
            vec![Rat::zero(), Rat::from_integer(2.into())],
            vec![Rat::from_integer((-2).into()), Rat::zero()],
        ])
        .unwrap();
        assert!(CompatiblePair::new(ex, wrong_scale).is_err());
    }
}
