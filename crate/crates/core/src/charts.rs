//! Double-precision cluster chart maps over the positive orthant: the
//! ensemble map, dilogarithm Hamiltonians, their flows, tropical maps and the
//! mutations they compose to, plus finite-difference Poisson verification.

use crate::exchange::{rat_to_f64, CompatiblePair};
use crate::numerics;
use crate::report::{ToleranceProfile, VerificationReport};
use crate::trace::MutationTrace;
use crate::{Error, Result};
use nalgebra::DMatrix;
use num::ToPrimitive;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Coordinates x_1..x_m with bracket Omega_ij x_i x_j.
    A,
    /// Coordinates y_1..y_n with bracket d_k B_kl y_k y_l.
    X,
}

/// A point of one cluster chart: strictly positive base coordinates plus the
/// current values of the exchange-polynomial coefficients per direction.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    pub side: Side,
    pub coords: Vec<f64>,
    /// z[l] holds the r_l - 1 middle coefficients in the chart's current
    /// orientation; mutation in direction l reverses them.
    pub z: Vec<Vec<f64>>,
}

impl ChartPoint {
    pub fn new(side: Side, coords: Vec<f64>, z: Vec<Vec<f64>>) -> Result<Self> {
        if coords.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::Domain("chart coordinates must be strictly positive".into()));
        }
        Ok(ChartPoint { side, coords, z })
    }
}

pub(crate) fn dim_for(pair: &CompatiblePair, side: Side) -> usize {
    match side {
        Side::A => pair.exchange.m,
        Side::X => pair.exchange.n,
    }
}

pub(crate) fn b_entry(pair: &CompatiblePair, i: usize, k: usize) -> f64 {
    pair.exchange.b[(i, k)].to_f64().unwrap()
}

pub(crate) fn b_int(pair: &CompatiblePair, i: usize, k: usize) -> i64 {
    pair.exchange.b[(i, k)].to_i64().unwrap()
}

/// Full coefficient vector [1, z_1, ..., z_{r-1}, 1] of direction `k0`,
/// star-reversed when `star` is set.
pub(crate) fn z_coeffs(point_z: &[f64], star: bool) -> Vec<f64> {
    let mut c = Vec::with_capacity(point_z.len() + 2);
    c.push(1.0);
    c.extend_from_slice(point_z);
    c.push(1.0);
    if star {
        c.reverse();
    }
    c
}

/// `yhat_k` at an A-side point (or plain `y_k` on the X side) for the current
/// exchange matrix.
pub fn yhat_value(pair: &CompatiblePair, point: &ChartPoint, k0: usize) -> f64 {
    match point.side {
        Side::X => point.coords[k0],
        Side::A => {
            let mut acc = 1.0;
            for i in 0..pair.exchange.m {
                acc *= point.coords[i].powi(b_int(pair, i, k0) as i32);
            }
            acc
        }
    }
}

/// The ensemble map: `y_k = prod_i x_i^{B_ik}`, identity on the z values.
pub fn rho(pair: &CompatiblePair, point: &ChartPoint) -> Result<ChartPoint> {
    if point.side != Side::A {
        return Err(Error::Domain("ensemble map expects an A-side point".into()));
    }
    let coords = (0..pair.exchange.n)
        .map(|k| yhat_value(pair, point, k))
        .collect();
    ChartPoint::new(Side::X, coords, point.z.clone())
}

/// Hamiltonian `-(eps/d_k) int_0^(w) log(Z°_k(u))/u du` with `w = y_k^eps`
/// (X side) or `yhat_k^eps` (A side).
pub fn hamiltonian(
    pair: &CompatiblePair,
    point: &ChartPoint,
    k: usize,
    eps: i8,
    quad_tol: f64,
) -> Result<f64> {
    let kk = direction_index(pair, k)?;
    let coeffs = z_coeffs(&point.z[kk], eps < 0);
    let w = yhat_value(pair, point, kk).powi(eps as i32);
    let dk = pair.exchange.d[kk] as f64;
    Ok(-(eps as f64 / dk) * numerics::quad_log_over_u(&coeffs, 0.0, w, quad_tol)?)
}

fn direction_index(pair: &CompatiblePair, k: usize) -> Result<usize> {
    let n = pair.exchange.n;
    if k == 0 || k > n {
        return Err(Error::InvalidDirection { dir: k, n });
    }
    Ok(k - 1)
}

/// Value of `Z°_k` at the flow/mutation argument, checking positivity at the
/// evaluation point.
fn z_circ_at(point: &ChartPoint, kk: usize, eps: i8, w: f64) -> Result<f64> {
    let coeffs = z_coeffs(&point.z[kk], eps < 0);
    let v = numerics::eval_poly(&coeffs, w);
    if !(v > 0.0) {
        return Err(Error::Domain(format!(
            "exchange polynomial not positive at u = {w}"
        )));
    }
    Ok(v)
}

/// Time-t Hamiltonian flow in direction `k` at sign `eps`.
pub fn flow(
    pair: &CompatiblePair,
    point: &ChartPoint,
    k: usize,
    eps: i8,
    t: f64,
) -> Result<ChartPoint> {
    let kk = direction_index(pair, k)?;
    let w = yhat_value(pair, point, kk).powi(eps as i32);
    let zval = z_circ_at(point, kk, eps, w)?;
    let mut coords = point.coords.clone();
    match point.side {
        Side::X => {
            for l in 0..coords.len() {
                coords[l] *= zval.powf(-t * b_entry(pair, kk, l));
            }
        }
        Side::A => {
            coords[kk] *= zval.powf(-t);
        }
    }
    ChartPoint::new(point.side, coords, point.z.clone())
}

/// Tropical (monomial) part of the mutation in direction `k` at sign `eps`;
/// lands in the mutated chart, so the z block of direction k is reversed.
pub fn tropical(
    pair: &CompatiblePair,
    point: &ChartPoint,
    k: usize,
    eps: i8,
) -> Result<ChartPoint> {
    let kk = direction_index(pair, k)?;
    let rk = pair.exchange.r[kk] as i64;
    let e = eps as i64;
    let mut coords = point.coords.clone();
    match point.side {
        Side::X => {
            for l in 0..coords.len() {
                if l == kk {
                    coords[l] = 1.0 / point.coords[kk];
                } else {
                    let p = (e * rk * b_int(pair, kk, l)).max(0);
                    coords[l] = point.coords[l] * point.coords[kk].powi(p as i32);
                }
            }
        }
        Side::A => {
            let mut acc = 1.0 / point.coords[kk];
            for i in 0..pair.exchange.m {
                let p = (-e * b_int(pair, i, kk) * rk).max(0);
                acc *= point.coords[i].powi(p as i32);
            }
            coords[kk] = acc;
        }
    }
    let mut z = point.z.clone();
    z[kk].reverse();
    ChartPoint::new(point.side, coords, z)
}

/// Cluster mutation in direction `k` at sign `eps`, via the direct closed
/// form. Composing `tropical` after the time-one `flow` gives the same map;
/// that identity is part of the verification suite.
pub fn mutate(pair: &CompatiblePair, point: &ChartPoint, k: usize, eps: i8) -> Result<ChartPoint> {
    let kk = direction_index(pair, k)?;
    let rk = pair.exchange.r[kk] as i64;
    let e = eps as i64;
    let w = yhat_value(pair, point, kk).powi(eps as i32);
    let zval = z_circ_at(point, kk, eps, w)?;
    let mut coords = point.coords.clone();
    match point.side {
        Side::X => {
            for l in 0..coords.len() {
                if l == kk {
                    coords[l] = 1.0 / point.coords[kk];
                } else {
                    let p = (e * rk * b_int(pair, kk, l)).max(0);
                    coords[l] = point.coords[l]
                        * point.coords[kk].powi(p as i32)
                        * zval.powf(-b_entry(pair, kk, l));
                }
            }
        }
        Side::A => {
            let mut acc = 1.0 / point.coords[kk];
            for i in 0..pair.exchange.m {
                let p = (-e * b_int(pair, i, kk) * rk).max(0);
                acc *= point.coords[i].powi(p as i32);
            }
            coords[kk] = acc * zval;
        }
    }
    let mut z = point.z.clone();
    z[kk].reverse();
    ChartPoint::new(point.side, coords, z)
}

/// Log-canonical Poisson tensor of the chart at a point, as a matrix over
/// the base coordinates.
pub fn chart_tensor(pair: &CompatiblePair, side: Side, coords: &[f64]) -> DMatrix<f64> {
    match side {
        Side::A => {
            let m = pair.exchange.m;
            DMatrix::from_fn(m, m, |i, j| {
                rat_to_f64(&pair.omega[(i, j)]) * coords[i] * coords[j]
            })
        }
        Side::X => {
            let n = pair.exchange.n;
            DMatrix::from_fn(n, n, |k, l| {
                pair.exchange.d[k] as f64 * b_entry(pair, k, l) * coords[k] * coords[l]
            })
        }
    }
}

/// Finite-difference Poisson check: at each sample, compares `J pi_in J^T`
/// against `pi_out` at the image point and records the worst entry.
pub fn check_poisson_map(
    check: &str,
    map: &dyn Fn(&[f64]) -> Vec<f64>,
    points: &[Vec<f64>],
    bracket_in: &dyn Fn(&[f64]) -> DMatrix<f64>,
    bracket_out: &dyn Fn(&[f64]) -> DMatrix<f64>,
    tol: &ToleranceProfile,
    notes: impl Into<String>,
) -> VerificationReport {
    let mut max_res = 0.0f64;
    for p in points {
        let j = numerics::jacobian(map, p, tol.fd_step);
        let pushed = numerics::pushforward_bivector(&j, &bracket_in(p));
        let target = bracket_out(&map(p));
        max_res = max_res.max(numerics::max_abs(&(pushed - target)));
    }
    VerificationReport::numeric(
        check,
        points.len(),
        max_res,
        tol.residual_for(check),
        notes,
    )
}

/// A chart point walked in lockstep with its mutation trace; every mutation
/// is taken at the trace's tropical sign.
#[derive(Clone, Debug)]
pub struct ChartWalker {
    pub trace: MutationTrace,
    pub point: ChartPoint,
}

impl ChartWalker {
    pub fn new(trace: MutationTrace, point: ChartPoint) -> Result<Self> {
        let want = dim_for(&trace.pair, point.side);
        if point.coords.len() != want {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, chart needs {want}",
                point.coords.len()
            )));
        }
        Ok(ChartWalker { trace, point })
    }

    pub fn step(&mut self, k: usize) -> Result<()> {
        let eps = self.trace.tropical_sign(k)?;
        self.point = mutate(&self.trace.pair, &self.point, k, eps)?;
        self.trace = self.trace.mutate(k)?;
        Ok(())
    }

    pub fn walk(&mut self, path: &[usize]) -> Result<()> {
        for &k in path {
            self.step(k)?;
        }
        Ok(())
    }
}

/// Relative deviation between a walked point and the sigma-permuted start,
/// including the z blocks.
pub fn periodicity_residual(
    start: &ChartPoint,
    end: &ChartPoint,
    sigma: &[usize],
    n: usize,
) -> f64 {
    let mut res = 0.0f64;
    for l in 0..end.coords.len() {
        let expect = start.coords[sigma[l]];
        res = res.max((end.coords[l] - expect).abs() / expect.abs().max(1.0));
    }
    for l in 0..n.min(end.z.len()) {
        let img = sigma[l];
        for (a, b) in end.z[l].iter().zip(start.z[img].iter()) {
            res = res.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    res
}
