//! Mutation machinery lifted to the groupoid charts: multiplicative
//! Hamiltonians, their flows, lifted tropical maps, full groupoid mutations
//! for all six chart groupoids, boundary (removable-singularity) mutation,
//! separation of additions on fibers, groupoid periodicity and the
//! dilogarithm integral identities attached to periodic sequences.

use crate::charts::{self, ChartPoint, Side};
use crate::exchange::CompatiblePair;
use crate::groupoids::{Family, GroupoidChart, GroupoidPoint};
use crate::laurent::SeedState;
use crate::numerics;
use crate::report::{ToleranceProfile, VerificationReport};
use crate::sample::Sampler;
use crate::trace::MutationTrace;
use crate::{Error, Result};
use num::ToPrimitive;

/// `yhat_k` evaluated at a base vector (plain `y_k` on the X side).
fn yhat_of_base(pair: &CompatiblePair, side: Side, base: &[f64], k0: usize) -> f64 {
    match side {
        Side::X => base[k0],
        Side::A => {
            let mut acc = 1.0;
            for i in 0..pair.exchange.m {
                acc *= base[i].powi(charts::b_int(pair, i, k0) as i32);
            }
            acc
        }
    }
}

fn direction_index(pair: &CompatiblePair, k: usize) -> Result<usize> {
    let n = pair.exchange.n;
    if k == 0 || k > n {
        return Err(Error::InvalidDirection { dir: k, n });
    }
    Ok(k - 1)
}

/// Exponent coefficient of the lifted flow on fiber coordinate `j`:
/// `B_jk / d_k` on the A side, `delta_jk / d_k` on the X side.
fn flow_coefficient(pair: &CompatiblePair, side: Side, j: usize, kk: usize) -> f64 {
    let dk = pair.exchange.d[kk] as f64;
    match side {
        Side::A => charts::b_entry(pair, j, kk) / dk,
        Side::X => {
            if j == kk {
                1.0 / dk
            } else {
                0.0
            }
        }
    }
}

/// Integration bounds of the multiplicative Hamiltonian: the source and
/// target pullbacks of `yhat_k^eps` at the point.
fn hamiltonian_bounds(
    pair: &CompatiblePair,
    pt: &GroupoidPoint,
    side: Side,
    kk: usize,
    eps: i8,
) -> (f64, f64) {
    let chart = GroupoidChart::for_pair(pair, pt.family, side);
    let w_alpha = yhat_of_base(pair, side, &pt.base, kk).powi(eps as i32);
    let w_beta = yhat_of_base(pair, side, &chart.target(pt), kk).powi(eps as i32);
    (w_alpha, w_beta)
}

/// Multiplicative Hamiltonian `H = alpha*h - beta*h`, evaluated as the single
/// integral `(eps/d_k) int_{alpha*(yhat^eps)}^{beta*(yhat^eps)} log(Z°)/u du`.
/// Vanishes on the identity section, where source and target agree.
pub fn lifted_hamiltonian(
    pair: &CompatiblePair,
    pt: &GroupoidPoint,
    side: Side,
    k: usize,
    eps: i8,
    quad_tol: f64,
) -> Result<f64> {
    let kk = direction_index(pair, k)?;
    let (w_alpha, w_beta) = hamiltonian_bounds(pair, pt, side, kk, eps);
    let coeffs = charts::z_coeffs(&pt.z[kk], eps < 0);
    let dk = pair.exchange.d[kk] as f64;
    Ok((eps as f64 / dk) * numerics::quad_log_over_u(&coeffs, w_alpha, w_beta, quad_tol)?)
}

fn base_chart_point(pt: &GroupoidPoint, side: Side) -> Result<ChartPoint> {
    ChartPoint::new(
        match side {
            Side::A => Side::A,
            Side::X => Side::X,
        },
        pt.base.clone(),
        pt.z.clone(),
    )
}

/// Time-t multiplicative Hamiltonian flow on a groupoid chart. The base
/// moves by the chart-level flow; fiber coordinates follow the conserved
/// combinations of the corollary; a coordinates drift by the rational
/// integral between the two Hamiltonian bounds.
pub fn lifted_flow(
    pair: &CompatiblePair,
    pt: &GroupoidPoint,
    side: Side,
    k: usize,
    eps: i8,
    t: f64,
    quad_tol: f64,
) -> Result<GroupoidPoint> {
    let kk = direction_index(pair, k)?;
    let dim = pt.base.len();
    let (w_alpha, w_beta) = hamiltonian_bounds(pair, pt, side, kk, eps);
    let coeffs = charts::z_coeffs(&pt.z[kk], eps < 0);
    let z_alpha = numerics::eval_poly(&coeffs, w_alpha);
    let z_beta = numerics::eval_poly(&coeffs, w_beta);
    if !(z_alpha > 0.0 && z_beta > 0.0) {
        return Err(Error::Domain("exchange polynomial not positive at flow bounds".into()));
    }
    let ratio = z_beta / z_alpha;

    let base_pt = base_chart_point(pt, side)?;
    let new_base = charts::flow(pair, &base_pt, k, eps, t)?.coords;

    let mut fiber = vec![0.0; dim];
    for j in 0..dim {
        let c = flow_coefficient(pair, side, j, kk);
        match pt.family {
            Family::Spray => {
                let momentum = pt.fiber[j] * pt.base[j] - t * c * ratio.ln();
                fiber[j] = momentum / new_base[j];
            }
            Family::Blowup => {
                let affine = (pt.fiber[j] * pt.base[j] + 1.0) * ratio.powf(-t * c);
                fiber[j] = (affine - 1.0) / new_base[j];
            }
            Family::Double => {
                fiber[j] = pt.fiber[j] * ratio.powf(-t * c);
            }
        }
    }

    let mut a = pt.a.clone();
    if !a.is_empty() && !a[kk].is_empty() {
        let rk = pair.exchange.r[kk];
        let dk = pair.exchange.d[kk] as f64;
        let plain = charts::z_coeffs(&pt.z[kk], false);
        for j in 1..rk {
            let drift =
                numerics::quad_rational(&plain, j as i64, eps, w_alpha, w_beta, quad_tol)?;
            a[kk][j - 1] += t * (eps as f64 / dk) * drift;
        }
    }
    GroupoidPoint::new(pt.family, new_base, fiber, pt.z.clone(), a)
}

/// Lifted tropical transformation into the mutated groupoid chart.
pub fn lifted_tropical(
    pair: &CompatiblePair,
    pt: &GroupoidPoint,
    side: Side,
    k: usize,
    eps: i8,
) -> Result<GroupoidPoint> {
    let kk = direction_index(pair, k)?;
    let dim = pt.base.len();
    let rk = pair.exchange.r[kk] as i64;
    let e = eps as i64;
    let x = &pt.base;
    let f = &pt.fiber;

    let base_pt = base_chart_point(pt, side)?;
    let new_base = charts::tropical(pair, &base_pt, k, eps)?.coords;

    let mut fiber = vec![0.0; dim];
    match (side, pt.family) {
        (Side::X, Family::Spray) => {
            for l in 0..dim {
                if l == kk {
                    let mut acc = -f[kk] * x[kk] * x[kk];
                    for lp in 0..dim {
                        let p = (e * rk * charts::b_int(pair, kk, lp)).max(0) as f64;
                        acc += p * f[lp] * x[lp] * x[kk];
                    }
                    fiber[l] = acc;
                } else {
                    let p = (e * rk * charts::b_int(pair, kk, l)).max(0);
                    fiber[l] = f[l] * x[kk].powi(-p as i32);
                }
            }
        }
        (Side::X, Family::Blowup) => {
            for l in 0..dim {
                if l == kk {
                    let mut acc = 1.0 / (f[kk] * x[kk] + 1.0);
                    for lp in 0..dim {
                        let p = (e * rk * charts::b_int(pair, kk, lp)).max(0);
                        acc *= (f[lp] * x[lp] + 1.0).powi(p as i32);
                    }
                    fiber[l] = x[kk] * (acc - 1.0);
                } else {
                    let p = (e * rk * charts::b_int(pair, kk, l)).max(0);
                    fiber[l] = f[l] * x[kk].powi(-p as i32);
                }
            }
        }
        (Side::X, Family::Double) => {
            for l in 0..dim {
                if l == kk {
                    let mut acc = 1.0 / f[kk];
                    for lp in 0..dim {
                        let p = (e * rk * charts::b_int(pair, kk, lp)).max(0);
                        acc *= f[lp].powi(p as i32);
                    }
                    fiber[l] = acc;
                } else {
                    fiber[l] = f[l];
                }
            }
        }
        (Side::A, Family::Spray) => {
            for j in 0..dim {
                if j == kk {
                    let mut acc = -f[kk] * x[kk] * x[kk];
                    for i in 0..dim {
                        let p = (-e * charts::b_int(pair, i, kk) * rk).max(0);
                        acc *= x[i].powi(-(p as i32));
                    }
                    fiber[j] = acc;
                } else {
                    let p = (-e * charts::b_int(pair, j, kk) * rk).max(0) as f64;
                    fiber[j] = f[j] + p * f[kk] * x[kk] / x[j];
                }
            }
        }
        (Side::A, Family::Blowup) => {
            for j in 0..dim {
                if j == kk {
                    let mut acc = x[kk] * (1.0 / (f[kk] * x[kk] + 1.0) - 1.0);
                    for i in 0..dim {
                        let p = (-e * charts::b_int(pair, i, kk) * rk).max(0);
                        acc *= x[i].powi(-(p as i32));
                    }
                    fiber[j] = acc;
                } else {
                    let p = (-e * charts::b_int(pair, j, kk) * rk).max(0);
                    fiber[j] = ((f[j] * x[j] + 1.0) * (f[kk] * x[kk] + 1.0).powi(p as i32)
                        - 1.0)
                        / x[j];
                }
            }
        }
        (Side::A, Family::Double) => {
            for j in 0..dim {
                if j == kk {
                    fiber[j] = 1.0 / f[kk];
                } else {
                    let p = (-e * charts::b_int(pair, j, kk) * rk).max(0);
                    fiber[j] = f[j] * f[kk].powi(p as i32);
                }
            }
        }
    }

    let mut z = pt.z.clone();
    z[kk].reverse();
    let mut a = pt.a.clone();
    if !a.is_empty() {
        a[kk].reverse();
    }
    GroupoidPoint::new(pt.family, new_base, fiber, z, a)
}

/// Full groupoid mutation in direction `k` at sign `eps`: the closed-form
/// fiber transformation together with the chart mutation of the base, the
/// star flip of the cotangent block and the rational-integral drift of the a
/// coordinates. Equals `lifted_tropical` after the time-one `lifted_flow`.
pub fn mutate_groupoid(
    pair: &CompatiblePair,
    pt: &GroupoidPoint,
    side: Side,
    k: usize,
    eps: i8,
    quad_tol: f64,
) -> Result<GroupoidPoint> {
    let kk = direction_index(pair, k)?;
    let dim = pt.base.len();
    let rk = pair.exchange.r[kk] as i64;
    let dk = pair.exchange.d[kk] as f64;
    let e = eps as i64;
    let x = &pt.base;
    let f = &pt.fiber;

    let (w_alpha, w_beta) = hamiltonian_bounds(pair, pt, side, kk, eps);
    let coeffs = charts::z_coeffs(&pt.z[kk], eps < 0);
    let z_alpha = numerics::eval_poly(&coeffs, w_alpha);
    let z_beta = numerics::eval_poly(&coeffs, w_beta);
    if !(z_alpha > 0.0 && z_beta > 0.0) {
        return Err(Error::Domain("exchange polynomial not positive at mutation bounds".into()));
    }
    let ratio = z_beta / z_alpha;

    let base_pt = base_chart_point(pt, side)?;
    let new_base = charts::mutate(pair, &base_pt, k, eps)?.coords;

    let mut fiber = vec![0.0; dim];
    match (side, pt.family) {
        (Side::X, Family::Spray) => {
            for l in 0..dim {
                if l == kk {
                    let mut acc = -f[kk] * x[kk] * x[kk] + x[kk] / dk * ratio.ln();
                    for lp in 0..dim {
                        let p = (e * rk * charts::b_int(pair, kk, lp)).max(0) as f64;
                        acc += p * f[lp] * x[lp] * x[kk];
                    }
                    fiber[l] = acc;
                } else {
                    let p = (e * rk * charts::b_int(pair, kk, l)).max(0);
                    fiber[l] = f[l]
                        * x[kk].powi(-p as i32)
                        * z_alpha.powf(charts::b_entry(pair, kk, l));
                }
            }
        }
        (Side::X, Family::Blowup) => {
            for l in 0..dim {
                if l == kk {
                    let mut acc = 1.0 / (f[kk] * x[kk] + 1.0) * ratio.powf(1.0 / dk);
                    for lp in 0..dim {
                        let p = (e * rk * charts::b_int(pair, kk, lp)).max(0);
                        acc *= (f[lp] * x[lp] + 1.0).powi(p as i32);
                    }
                    fiber[l] = x[kk] * (acc - 1.0);
                } else {
                    let p = (e * rk * charts::b_int(pair, kk, l)).max(0);
                    fiber[l] = f[l]
                        * x[kk].powi(-p as i32)
                        * z_alpha.powf(charts::b_entry(pair, kk, l));
                }
            }
        }
        (Side::X, Family::Double) => {
            for l in 0..dim {
                if l == kk {
                    let mut acc = 1.0 / f[kk] * ratio.powf(1.0 / dk);
                    for lp in 0..dim {
                        let p = (e * rk * charts::b_int(pair, kk, lp)).max(0);
                        acc *= f[lp].powi(p as i32);
                    }
                    fiber[l] = acc;
                } else {
                    fiber[l] = f[l];
                }
            }
        }
        (Side::A, Family::Spray) => {
            for j in 0..dim {
                if j == kk {
                    let mut acc = -f[kk] * x[kk] * x[kk] / z_alpha;
                    for i in 0..dim {
                        let p = (-e * charts::b_int(pair, i, kk) * rk).max(0);
                        acc *= x[i].powi(-(p as i32));
                    }
                    fiber[j] = acc;
                } else {
                    let p = (-e * charts::b_int(pair, j, kk) * rk).max(0) as f64;
                    fiber[j] = f[j] + p * f[kk] * x[kk] / x[j]
                        - charts::b_entry(pair, j, kk) / (dk * x[j]) * ratio.ln();
                }
            }
        }
        (Side::A, Family::Blowup) => {
            for j in 0..dim {
                if j == kk {
                    let mut acc = x[kk] * (1.0 / (f[kk] * x[kk] + 1.0) - 1.0) / z_alpha;
                    for i in 0..dim {
                        let p = (-e * charts::b_int(pair, i, kk) * rk).max(0);
                        acc *= x[i].powi(-(p as i32));
                    }
                    fiber[j] = acc;
                } else {
                    let p = (-e * charts::b_int(pair, j, kk) * rk).max(0);
                    fiber[j] = ((f[j] * x[j] + 1.0)
                        * (f[kk] * x[kk] + 1.0).powi(p as i32)
                        * ratio.powf(-charts::b_entry(pair, j, kk) / dk)
                        - 1.0)
                        / x[j];
                }
            }
        }
        (Side::A, Family::Double) => {
            for j in 0..dim {
                if j == kk {
                    fiber[j] = 1.0 / f[kk];
                } else {
                    let p = (-e * charts::b_int(pair, j, kk) * rk).max(0);
                    fiber[j] = f[j]
                        * f[kk].powi(p as i32)
                        * ratio.powf(-charts::b_entry(pair, j, kk) / dk);
                }
            }
        }
    }

    let mut z = pt.z.clone();
    z[kk].reverse();
    let mut a = pt.a.clone();
    if !a.is_empty() && !a[kk].is_empty() {
        let rk = pair.exchange.r[kk];
        let plain = charts::z_coeffs(&pt.z[kk], false);
        let mut updated = vec![0.0; rk - 1];
        for j in 1..rk {
            let jstar = rk - j;
            let drift =
                numerics::quad_rational(&plain, jstar as i64, eps, w_alpha, w_beta, quad_tol)?;
            updated[j - 1] = pt.a[kk][jstar - 1] + (eps as f64 / dk) * drift;
        }
        a[kk] = updated;
    }
    GroupoidPoint::new(pt.family, new_base, fiber, z, a)
}

/// A groupoid point walked in lockstep with its trace; each mutation is
/// taken at the tropical sign.
#[derive(Clone, Debug)]
pub struct GroupoidWalker {
    pub trace: MutationTrace,
    pub side: Side,
    pub point: GroupoidPoint,
    pub quad_tol: f64,
}

impl GroupoidWalker {
    pub fn new(
        trace: MutationTrace,
        side: Side,
        point: GroupoidPoint,
        quad_tol: f64,
    ) -> Result<Self> {
        let want = charts::dim_for(&trace.pair, side);
        if point.base.len() != want {
            return Err(Error::Dimension(format!(
                "groupoid point dimension {} does not match chart dimension {want}",
                point.base.len()
            )));
        }
        Ok(GroupoidWalker {
            trace,
            side,
            point,
            quad_tol,
        })
    }

    pub fn step(&mut self, k: usize) -> Result<()> {
        let eps = self.trace.tropical_sign(k)?;
        self.point = mutate_groupoid(&self.trace.pair, &self.point, self.side, k, eps, self.quad_tol)?;
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

/// Mutation of a spray- or blow-up-family A-side point whose base has exactly
/// one vanishing coordinate x_j with j != k. The singular terms of the
/// mutation formulas are replaced by their limits, which depend only on
/// B_jk in {0, +1, -1, other}.
pub fn boundary_mutation(
    pair: &CompatiblePair,
    pt: &GroupoidPoint,
    k: usize,
    eps: i8,
) -> Result<GroupoidPoint> {
    let kk = direction_index(pair, k)?;
    let m = pair.exchange.m;
    if pt.base.len() != m {
        return Err(Error::Dimension("boundary mutation expects an A-side point".into()));
    }
    let zeros: Vec<usize> = (0..m).filter(|&i| pt.base[i] == 0.0).collect();
    let [j0] = zeros.as_slice() else {
        return Err(Error::Domain(format!(
            "boundary mutation needs exactly one vanishing base coordinate, found {}",
            zeros.len()
        )));
    };
    let j0 = *j0;
    if j0 == kk {
        return Err(Error::Domain("the mutation direction itself must not vanish".into()));
    }
    if matches!(pt.family, Family::Double) {
        return Err(Error::Domain(
            "boundary limits are implemented for the spray and blow-up families".into(),
        ));
    }

    let rk = pair.exchange.r[kk] as i64;
    let dk = pair.exchange.d[kk] as f64;
    let e = eps as i64;
    let x = &pt.base;
    let f = &pt.fiber;
    let coeffs = charts::z_coeffs(&pt.z[kk], eps < 0);

    // S = sum_t zo_t prod_i x_i^([-eps B_ik r_k]_+ + eps t B_ik); all
    // exponents are non-negative, with 0^0 = 1 on the vanishing slot.
    let monomial = |exps: &dyn Fn(usize) -> i64| -> f64 {
        let mut acc = 1.0;
        for i in 0..m {
            let p = exps(i);
            debug_assert!(p >= 0);
            if p != 0 {
                acc *= x[i].powi(p as i32);
            }
        }
        acc
    };
    let mut s_val = 0.0;
    for (t, zc) in coeffs.iter().enumerate() {
        let t = t as i64;
        s_val += zc * monomial(&|i| (-e * charts::b_int(pair, i, kk) * rk).max(0) + e * t * charts::b_int(pair, i, kk));
    }
    if s_val == 0.0 {
        return Err(Error::Domain("mutation undefined: exchange sum vanishes".into()));
    }

    let mut base = x.clone();
    base[kk] = s_val / x[kk];

    // Limit of log(Z°(beta*(yhat^eps)) / Z°(yhat^eps)) as x_j0 -> 0. The
    // conserved combination c below is e^{-eps d_k p_k x_k} for the spray
    // family and (u_k x_k + 1)^{-eps d_k} for the blow-up family.
    let c = match pt.family {
        Family::Spray => (-(e as f64) * dk * f[kk] * x[kk]).exp(),
        Family::Blowup => (f[kk] * x[kk] + 1.0).powf(-(e as f64) * dk),
        Family::Double => unreachable!(),
    };
    let bj0k = charts::b_int(pair, j0, kk);
    let log_ratio_limit = if e * bj0k > 0 {
        0.0
    } else if e * bj0k < 0 {
        (rk as f64) * c.ln()
    } else {
        // x_j0 does not enter yhat_k; evaluate the ratio normally.
        let w = monomial(&|i| {
            if i == j0 {
                0
            } else {
                e * charts::b_int(pair, i, kk)
            }
        })
        .powi(1);
        let z_lo = numerics::eval_poly(&coeffs, w);
        let z_hi = numerics::eval_poly(&coeffs, w * c);
        (z_hi / z_lo).ln()
    };

    // Monomial over the non-vanishing coordinates used by the limit rules.
    let side_monomial = |sign: i64| -> f64 {
        let mut acc = 1.0;
        for i in 0..m {
            if i == j0 {
                continue;
            }
            acc *= x[i].powi((sign * charts::b_int(pair, i, kk)) as i32);
        }
        acc
    };
    let r_usize = pair.exchange.r[kk];
    let z_first = coeffs_plain_first(&pt.z[kk]);
    let z_last = coeffs_plain_last(&pt.z[kk], r_usize);

    let mut fiber = vec![0.0; m];
    for j in 0..m {
        if j == kk {
            fiber[j] = match pt.family {
                Family::Spray => -f[kk] * x[kk] * x[kk] / s_val,
                Family::Blowup => x[kk] * (1.0 / (f[kk] * x[kk] + 1.0) - 1.0) / s_val,
                Family::Double => unreachable!(),
            };
        } else if j == j0 {
            let bjk = charts::b_int(pair, j, kk);
            let spray_c = (-dk * f[kk] * x[kk]).exp();
            let blow_c = (f[kk] * x[kk] + 1.0).powf(-dk);
            fiber[j] = match (pt.family, bjk) {
                (Family::Spray, 1) => f[j] - side_monomial(1) * z_first * (spray_c - 1.0) / dk,
                (Family::Spray, -1) => {
                    f[j] + side_monomial(-1) * z_last * (1.0 / spray_c - 1.0) / dk
                }
                (Family::Spray, _) => f[j],
                (Family::Blowup, 1) => f[j] - side_monomial(1) * z_first * (blow_c - 1.0) / dk,
                (Family::Blowup, -1) => {
                    f[j] + side_monomial(-1) * z_last * (1.0 / blow_c - 1.0) / dk
                }
                (Family::Blowup, _) => f[j],
                (Family::Double, _) => unreachable!(),
            };
        } else {
            let p = (-e * charts::b_int(pair, j, kk) * rk).max(0) as f64;
            match pt.family {
                Family::Spray => {
                    fiber[j] = f[j] + p * f[kk] * x[kk] / x[j]
                        - charts::b_entry(pair, j, kk) / (dk * x[j]) * log_ratio_limit;
                }
                Family::Blowup => {
                    let ratio_pow =
                        (log_ratio_limit * (-charts::b_entry(pair, j, kk) / dk)).exp();
                    fiber[j] = ((f[j] * x[j] + 1.0)
                        * (f[kk] * x[kk] + 1.0).powi(((-e * charts::b_int(pair, j, kk) * rk).max(0)) as i32)
                        * ratio_pow
                        - 1.0)
                        / x[j];
                }
                Family::Double => unreachable!(),
            }
        }
    }

    let mut z = pt.z.clone();
    z[kk].reverse();
    let mut a = pt.a.clone();
    if !a.is_empty() {
        // The rational drift integral tends to zero as both bounds collapse
        // to 0 or infinity together, so only the star flip survives.
        a[kk].reverse();
    }
    GroupoidPoint::new(pt.family, base, fiber, z, a)
}

/// First middle coefficient z_{k,1} with the unit-endpoint convention.
fn coeffs_plain_first(zvals: &[f64]) -> f64 {
    zvals.first().copied().unwrap_or(1.0)
}

/// Last middle coefficient z_{k,r-1} with the unit-endpoint convention.
fn coeffs_plain_last(zvals: &[f64], r: usize) -> f64 {
    if r == 1 {
        1.0
    } else {
        zvals[r - 2]
    }
}

/// Closed-form transport of a groupoid point from the seed vertex to the
/// state's current vertex, built from the C, G, dual C, dual G matrices and
/// the F-polynomials evaluated at the seed and at its beta-pullback.
///
/// `seed_pair` is the compatible pair of the seed chart (the state's trace
/// holds the mutated one); `pt0` sits over the seed chart.
pub fn gpd_separation(
    state: &SeedState,
    seed_pair: &CompatiblePair,
    pt0: &GroupoidPoint,
    side: Side,
    quad_tol: f64,
) -> Result<GroupoidPoint> {
    let trace = &state.trace;
    let pair_t = &trace.pair;
    let (m, n) = (pair_t.exchange.m, pair_t.exchange.n);
    let dim = match side {
        Side::A => m,
        Side::X => n,
    };
    if pt0.base.len() != dim {
        return Err(Error::Dimension("separation point dimension mismatch".into()));
    }
    let to_i64 = |v: &crate::Int| v.to_i64().unwrap();

    // F arguments at the seed point and at its target-pullback.
    let chart0 = GroupoidChart::for_pair(seed_pair, pt0.family, side);
    let beta0 = chart0.target(pt0);
    let args_alpha: Vec<f64> = (0..n)
        .map(|l| yhat_of_base(seed_pair, side, &pt0.base, l))
        .collect();
    let args_beta: Vec<f64> = (0..n)
        .map(|l| yhat_of_base(seed_pair, side, &beta0, l))
        .collect();

    let vals = |args: &[f64]| -> Vec<f64> {
        let v = &state.vars;
        let mut full = vec![1.0; v.len()];
        for l in 0..n {
            full[v.u(l)] = args[l];
        }
        for l in 0..n {
            for j in 1..v.r[l] {
                full[v.z(l, j)] = pt0.z[l][j - 1];
            }
        }
        full
    };
    let full_alpha = vals(&args_alpha);
    let full_beta = vals(&args_beta);
    let f_alpha: Vec<f64> = state.fpolys.polys.iter().map(|f| f.eval_f64(&full_alpha)).collect();
    let f_beta: Vec<f64> = state.fpolys.polys.iter().map(|f| f.eval_f64(&full_beta)).collect();
    if f_alpha.iter().chain(&f_beta).any(|&v| !(v != 0.0) || !v.is_finite()) {
        return Err(Error::Domain("F-polynomial vanishes at the evaluation point".into()));
    }

    // Base coordinates by the chart-level separation formulas.
    let mut base = vec![0.0; dim];
    match side {
        Side::A => {
            for i in 0..m {
                let mut acc = f_alpha[i];
                for j in 0..m {
                    acc *= pt0.base[j].powi(to_i64(&trace.g[(j, i)]) as i32);
                }
                base[i] = acc;
            }
        }
        Side::X => {
            for l in 0..n {
                let mut acc = 1.0;
                for kq in 0..n {
                    acc *= pt0.base[kq].powi(to_i64(&trace.c[(kq, l)]) as i32)
                        * f_alpha[kq].powi(to_i64(&pair_t.exchange.b[(kq, l)]) as i32);
                }
                base[l] = acc;
            }
        }
    }

    let du = |l: usize| pair_t.exchange.d[l] as f64;
    let mut fiber = vec![0.0; dim];
    match side {
        Side::A => {
            for i in 0..m {
                match pt0.family {
                    Family::Spray => {
                        let mut num = 0.0;
                        for j in 0..m {
                            num += to_i64(&trace.cdual[(i, j)]) as f64
                                * pt0.base[j]
                                * pt0.fiber[j];
                        }
                        for l in 0..n {
                            num += charts::b_entry(pair_t, i, l) / du(l)
                                * (f_beta[l] / f_alpha[l]).ln();
                        }
                        fiber[i] = num / base[i];
                    }
                    Family::Double => {
                        let mut acc = 1.0;
                        for j in 0..m {
                            acc *= pt0.fiber[j].powi(to_i64(&trace.cdual[(i, j)]) as i32);
                        }
                        for l in 0..n {
                            acc *= (f_beta[l] / f_alpha[l])
                                .powf(charts::b_entry(pair_t, i, l) / du(l));
                        }
                        fiber[i] = acc;
                    }
                    Family::Blowup => {
                        let mut acc = 1.0;
                        for j in 0..m {
                            acc *= (pt0.base[j] * pt0.fiber[j] + 1.0)
                                .powi(to_i64(&trace.cdual[(i, j)]) as i32);
                        }
                        for l in 0..n {
                            acc *= (f_beta[l] / f_alpha[l])
                                .powf(charts::b_entry(pair_t, i, l) / du(l));
                        }
                        fiber[i] = (acc - 1.0) / base[i];
                    }
                }
            }
        }
        Side::X => {
            for kq in 0..n {
                match pt0.family {
                    Family::Spray => {
                        let mut num = 0.0;
                        for l in 0..n {
                            num += to_i64(&trace.gdual[(kq, l)]) as f64
                                * pt0.base[l]
                                * pt0.fiber[l];
                        }
                        num += (f_beta[kq] / f_alpha[kq]).ln() / du(kq);
                        fiber[kq] = num / base[kq];
                    }
                    Family::Double => {
                        let mut acc = 1.0;
                        for l in 0..n {
                            acc *= pt0.fiber[l].powi(to_i64(&trace.gdual[(kq, l)]) as i32);
                        }
                        acc *= (f_beta[kq] / f_alpha[kq]).powf(1.0 / du(kq));
                        fiber[kq] = acc;
                    }
                    Family::Blowup => {
                        let mut acc = 1.0;
                        for l in 0..n {
                            acc *= (pt0.base[l] * pt0.fiber[l] + 1.0)
                                .powi(to_i64(&trace.gdual[(kq, l)]) as i32);
                        }
                        acc *= (f_beta[kq] / f_alpha[kq]).powf(1.0 / du(kq));
                        fiber[kq] = (acc - 1.0) / base[kq];
                    }
                }
            }
        }
    }

    // z orientation by parity; a coordinates by the iterated-mutation sum,
    // replayed along the trace path with the remaining-steps parity rule.
    let mut z = pt0.z.clone();
    for (l, flip) in trace.z_parity.iter().enumerate() {
        if *flip {
            z[l].reverse();
        }
    }
    let path: Vec<usize> = trace.path.iter().map(|(k, _)| *k).collect();
    let a = if pt0.a.iter().all(|al| al.is_empty()) {
        pt0.a.clone()
    } else {
        transported_a(seed_pair, pt0, side, &path, quad_tol)?
    };
    GroupoidPoint::new(pt0.family, base, fiber, z, a)
}

/// The a-coordinate part of the iterated mutation: star by total parity plus
/// the signed rational integrals accumulated along the path, indexed by the
/// parity of the remaining mutations in the same direction.
fn transported_a(
    seed_pair: &CompatiblePair,
    pt0: &GroupoidPoint,
    side: Side,
    path: &[usize],
    quad_tol: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = seed_pair.exchange.n;
    let r = &seed_pair.exchange.r;
    let mut walker = GroupoidWalker::new(
        MutationTrace::seed(seed_pair.clone()),
        side,
        pt0.clone(),
        quad_tol,
    )?;
    // integrals[i] = (direction, eps, bounds, plain z coefficients at step i)
    let mut steps: Vec<(usize, i8, f64, f64, Vec<f64>)> = Vec::with_capacity(path.len());
    for &k in path {
        let kk = k - 1;
        let eps = walker.trace.tropical_sign(k)?;
        let (w_alpha, w_beta) =
            hamiltonian_bounds(&walker.trace.pair, &walker.point, side, kk, eps);
        steps.push((
            kk,
            eps,
            w_alpha,
            w_beta,
            charts::z_coeffs(&walker.point.z[kk], false),
        ));
        walker.step(k)?;
    }

    let mut out = pt0.a.clone();
    for l in 0..n {
        if out[l].is_empty() {
            continue;
        }
        let total: usize = steps.iter().filter(|s| s.0 == l).count();
        let rl = r[l];
        for j in 1..rl {
            let j_initial = if total % 2 == 1 { rl - j } else { j };
            let mut acc = pt0.a[l][j_initial - 1];
            let mut seen = 0usize;
            for (dir, eps, w_alpha, w_beta, coeffs) in &steps {
                if *dir != l {
                    continue;
                }
                seen += 1;
                let remaining = total - seen + 1;
                let j_circ = if remaining % 2 == 1 { rl - j } else { j };
                let drift = numerics::quad_rational(
                    coeffs,
                    j_circ as i64,
                    *eps,
                    *w_alpha,
                    *w_beta,
                    quad_tol,
                )?;
                acc += *eps as f64 / seed_pair.exchange.d[l] as f64 * drift;
            }
            out[l][j - 1] = acc;
        }
    }
    Ok(out)
}

fn rel_diff_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs() / y.abs().max(1.0)))
}

fn point_residual_sigma(
    end: &GroupoidPoint,
    start: &GroupoidPoint,
    sigma: &[usize],
) -> f64 {
    let mut res = 0.0f64;
    for l in 0..end.base.len() {
        let expect_b = start.base[sigma[l]];
        res = res.max((end.base[l] - expect_b).abs() / expect_b.abs().max(1.0));
        let expect_f = start.fiber[sigma[l]];
        res = res.max((end.fiber[l] - expect_f).abs() / expect_f.abs().max(1.0));
    }
    for l in 0..end.z.len() {
        let img = sigma[l];
        res = res.max(rel_diff_slices(&end.z[l], &start.z[img]));
        res = res.max(rel_diff_slices(&end.a[l], &start.a[img]));
    }
    res
}

/// Verifies that a chart-level periodicity lifts to all six groupoid charts:
/// after the sequence, base, fiber, z and a coordinates return sigma-permuted.
pub fn gpd_periodicity_check(
    pair: &CompatiblePair,
    sequence: &[usize],
    sigma: &[usize],
    samples: usize,
    sampler: &mut Sampler,
    tol: &ToleranceProfile,
) -> Vec<VerificationReport> {
    let mut reports = Vec::new();
    for side in [Side::A, Side::X] {
        for family in Family::ALL {
            let chart = GroupoidChart::for_pair(pair, family, side);
            let mut max_res = 0.0f64;
            let mut failure: Option<String> = None;
            for _ in 0..samples {
                let start = sampler.groupoid_point(&chart, &pair.exchange.r);
                let mut walker = match GroupoidWalker::new(
                    MutationTrace::seed(pair.clone()),
                    side,
                    start.clone(),
                    tol.quad_abs_tol,
                ) {
                    Ok(w) => w,
                    Err(e) => {
                        failure = Some(e.to_string());
                        break;
                    }
                };
                if let Err(e) = walker.walk(sequence) {
                    failure = Some(e.to_string());
                    break;
                }
                max_res = max_res.max(point_residual_sigma(&walker.point, &start, sigma));
            }
            let sigma_dim = match side {
                Side::A => pair.exchange.m,
                Side::X => pair.exchange.n,
            };
            let name = format!(
                "groupoid-periodicity ({}, {})",
                family.tag(),
                match side {
                    Side::A => "A",
                    Side::X => "X",
                }
            );
            let report = match failure {
                Some(msg) => VerificationReport::numeric(
                    "groupoid-periodicity",
                    samples,
                    f64::INFINITY,
                    tol.residual_for("groupoid-periodicity"),
                    format!("{name}: {msg}"),
                ),
                None => VerificationReport::numeric(
                    "groupoid-periodicity",
                    samples,
                    max_res,
                    tol.residual_for("groupoid-periodicity"),
                    format!("{name}; sigma on first {sigma_dim} slots"),
                ),
            };
            reports.push(report);
        }
    }
    reports
}

/// One term of the dilogarithm sums: tropical sign, ordinal position among
/// the direction's occurrences, bounds, and the exchange-polynomial
/// coefficients at that vertex.
struct DilogTerm {
    eps: i8,
    /// 1-based position of this occurrence among all mutations in the
    /// direction along the sequence.
    ordinal: usize,
    w_alpha: f64,
    w_beta: f64,
    coeffs: Vec<f64>,
}

/// Parity rule selecting between the index j and its star j* = r - j in the
/// integrand of term i: count the occurrences of the direction either before
/// the step or from the step to the end (inclusive).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    Prior,
    RemainingInclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Integrals between the source and target pullbacks.
    Bounded,
    /// Integrals from 0 to the source pullback, regularized where singular.
    ZeroBased,
}

fn dilog_terms(
    pair: &CompatiblePair,
    side: Side,
    sequence: &[usize],
    pt0: &GroupoidPoint,
    ell: usize,
    quad_tol: f64,
) -> Result<(Vec<DilogTerm>, usize)> {
    let ll = direction_index(pair, ell)?;
    let mut walker = GroupoidWalker::new(
        MutationTrace::seed(pair.clone()),
        side,
        pt0.clone(),
        quad_tol,
    )?;
    let mut count = 0usize;
    let mut terms = Vec::new();
    for &k in sequence {
        let kk = k - 1;
        if kk == ll {
            count += 1;
            let eps = walker.trace.tropical_sign(k)?;
            let (w_alpha, w_beta) =
                hamiltonian_bounds(&walker.trace.pair, &walker.point, side, kk, eps);
            terms.push(DilogTerm {
                eps,
                ordinal: count,
                w_alpha,
                w_beta,
                coeffs: charts::z_coeffs(&walker.point.z[kk], false),
            });
        }
        walker.step(k)?;
    }
    Ok((terms, count))
}

fn star_by_rule(rule: Rule, ordinal: usize, total: usize) -> bool {
    match rule {
        Rule::Prior => (ordinal - 1) % 2 == 1,
        Rule::RemainingInclusive => (total - ordinal + 1) % 2 == 1,
    }
}

/// Experiment entry point: evaluates the dilogarithm sum under an explicit
/// variant and parity rule.
pub fn dilog_sum_experiment(
    pair: &CompatiblePair,
    side: Side,
    family: Family,
    sequence: &[usize],
    pt0: &GroupoidPoint,
    ell: usize,
    j: usize,
    quad_tol: f64,
    rule: Rule,
    variant: Variant,
) -> Result<f64> {
    let _ = family;
    let (_, total) = dilog_terms(pair, side, sequence, pt0, ell, quad_tol)?;
    let pattern: Vec<bool> = (1..=total).map(|ord| star_by_rule(rule, ord, total)).collect();
    dilog_sum_pattern(pair, side, sequence, pt0, ell, j, quad_tol, &pattern, variant)
}

/// Evaluates the dilogarithm sum with an explicit star pattern per
/// occurrence of the direction.
#[allow(clippy::too_many_arguments)]
pub fn dilog_sum_pattern(
    pair: &CompatiblePair,
    side: Side,
    sequence: &[usize],
    pt0: &GroupoidPoint,
    ell: usize,
    j: usize,
    quad_tol: f64,
    pattern: &[bool],
    variant: Variant,
) -> Result<f64> {
    let ll = direction_index(pair, ell)?;
    let rl = pair.exchange.r[ll];
    let dl = pair.exchange.d[ll] as f64;
    if j == 0 || j > rl {
        return Err(Error::Domain(format!("index j must lie in 1..={rl}")));
    }
    let (terms, _) = dilog_terms(pair, side, sequence, pt0, ell, quad_tol)?;
    let mut acc = 0.0;
    let mut log_balance = 0i64;
    for term in &terms {
        let j_circ = if pattern[term.ordinal - 1] { rl - j } else { j };
        match variant {
            Variant::Bounded => {
                let drift = numerics::quad_rational(
                    &term.coeffs,
                    j_circ as i64,
                    term.eps,
                    term.w_alpha,
                    term.w_beta,
                    quad_tol,
                )?;
                acc += term.eps as f64 / dl * drift;
            }
            Variant::ZeroBased => {
                let singular =
                    (term.eps > 0 && j_circ == 0) || (term.eps < 0 && j_circ == rl);
                if singular {
                    let coeffs: Vec<f64> = if term.eps > 0 {
                        term.coeffs.clone()
                    } else {
                        term.coeffs.iter().rev().copied().collect()
                    };
                    let reg = numerics::quad_one_over_u_z_regularized(
                        &coeffs,
                        term.w_alpha,
                        quad_tol,
                    )?;
                    acc += term.eps as f64 / dl * reg;
                    log_balance += term.eps as i64;
                } else {
                    let drift = numerics::quad_rational(
                        &term.coeffs,
                        j_circ as i64,
                        term.eps,
                        0.0,
                        term.w_alpha,
                        quad_tol,
                    )?;
                    acc += term.eps as f64 / dl * drift;
                }
            }
        }
    }
    if log_balance != 0 {
        return Err(Error::Quadrature(
            "divergent logarithmic terms do not balance; the sum has no finite value".into(),
        ));
    }
    Ok(acc)
}

/// Signed sum of the rational integrals between the source and target
/// pullbacks along a periodic mutation sequence; vanishes when the sequence
/// is a periodicity.
pub fn dilog_sum_bounded(
    pair: &CompatiblePair,
    side: Side,
    family: Family,
    sequence: &[usize],
    pt0: &GroupoidPoint,
    ell: usize,
    j: usize,
    quad_tol: f64,
) -> Result<f64> {
    dilog_sum_experiment(
        pair,
        side,
        family,
        sequence,
        pt0,
        ell,
        j,
        quad_tol,
        Rule::Prior,
        Variant::Bounded,
    )
}

/// Signed sum of the rational integrals from 0 to the source pullbacks. The
/// individually divergent terms (integrand ~ 1/u at the origin) are combined
/// through their common regularization; the sum is finite exactly when the
/// divergent log coefficients balance, which is an error otherwise.
pub fn dilog_sum_zero_based(
    pair: &CompatiblePair,
    side: Side,
    family: Family,
    sequence: &[usize],
    pt0: &GroupoidPoint,
    ell: usize,
    j: usize,
    quad_tol: f64,
) -> Result<f64> {
    dilog_sum_experiment(
        pair,
        side,
        family,
        sequence,
        pt0,
        ell,
        j,
        quad_tol,
        Rule::Prior,
        Variant::ZeroBased,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exchange::{ExchangeData, IMat};
    use crate::laurent::ZInit;
    use approx::assert_abs_diff_eq;

    const QT: f64 = 1e-11;

    fn pair2(b12: i64, b21: i64, d: Vec<i64>, r: Vec<usize>) -> CompatiblePair {
        let ex = ExchangeData::new(
            2,
            2,
            IMat::from_i64_rows(&[vec![0, b12], vec![b21, 0]]).unwrap(),
            d,
            r,
        )
        .unwrap();
        CompatiblePair::solve_square(ex).unwrap()
    }

    fn a2() -> CompatiblePair {
        pair2(1, -1, vec![1, 1], vec![1, 1])
    }

    fn b2() -> CompatiblePair {
        pair2(1, -2, vec![2, 1], vec![1, 1])
    }

    fn gen2() -> CompatiblePair {
        pair2(1, -1, vec![1, 1], vec![2, 1])
    }

    fn pt(family: Family, base: Vec<f64>, fiber: Vec<f64>, z: Vec<Vec<f64>>, a: Vec<Vec<f64>>) -> GroupoidPoint {
        GroupoidPoint::new(family, base, fiber, z, a).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1.0)
    }

    #[test]
    fn lifted_hamiltonian_vanishes_on_identity_and_matches_two_routes() {
        let pair = a2();
        for side in [Side::A, Side::X] {
            for family in Family::ALL {
                let chart = GroupoidChart::for_pair(&pair, family, side);
                let id = chart.identity_at(&[0.8, 1.6], vec![vec![], vec![]]);
                let h = lifted_hamiltonian(&pair, &id, side, 1, 1, QT).unwrap();
                assert!(h.abs() < 1e-12, "{family:?} {side:?}: {h}");
            }
        }
        // Two-route evaluation: H as a single integral vs alpha*h - beta*h
        // through the chart Hamiltonian.
        let mut sampler = Sampler::new(17);
        for side in [Side::A, Side::X] {
            for family in Family::ALL {
                let chart = GroupoidChart::for_pair(&pair, family, side);
                for k in 1..=2 {
                    for eps in [1i8, -1] {
                        let p = sampler.family_point(&chart);
                        let p = GroupoidPoint::new(
                            family,
                            p.base.clone(),
                            p.fiber.clone(),
                            vec![vec![], vec![]],
                            vec![vec![], vec![]],
                        )
                        .unwrap();
                        let h = lifted_hamiltonian(&pair, &p, side, k, eps, QT).unwrap();
                        let alpha_pt =
                            ChartPoint::new(side, p.base.clone(), p.z.clone()).unwrap();
                        let beta_pt =
                            ChartPoint::new(side, chart.target(&p), p.z.clone()).unwrap();
                        let two_route = charts::hamiltonian(&pair, &alpha_pt, k, eps, QT)
                            .unwrap()
                            - charts::hamiltonian(&pair, &beta_pt, k, eps, QT).unwrap();
                        assert!(
                            (h - two_route).abs() < 1e-10,
                            "{family:?} {side:?} k={k} eps={eps}: {h} vs {two_route}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn hamiltonian_sign_flip_symmetry_for_palindromic_z() {
        // For r = 2 the single middle coefficient makes Z palindromic, and
        // H(-eps) = H(eps) - (eps r / 2 d) (ln^2 b - ln^2 a) follows by the
        // substitution u -> 1/u in the integral.
        let pair = gen2();
        let z = vec![vec![1.3], vec![]];
        let p = pt(
            Family::Double,
            vec![0.9, 1.4],
            vec![1.7, 0.6],
            z,
            vec![vec![0.0], vec![]],
        );
        let (a, b) = hamiltonian_bounds(&pair, &p, Side::A, 0, 1);
        let h_plus = lifted_hamiltonian(&pair, &p, Side::A, 1, 1, QT).unwrap();
        let h_minus = lifted_hamiltonian(&pair, &p, Side::A, 1, -1, QT).unwrap();
        let (eps, r, d) = (1.0, 2.0, 1.0);
        let correction = eps * r / (2.0 * d) * (b.ln().powi(2) - a.ln().powi(2));
        assert_abs_diff_eq!(h_minus, h_plus - correction, epsilon = 1e-9);
    }

    #[test]
    fn lifted_flow_examples() {
        let pair = a2();
        let mut sampler = Sampler::new(23);
        for side in [Side::A, Side::X] {
            for family in Family::ALL {
                let chart = GroupoidChart::for_pair(&pair, family, side);
                let p = sampler.groupoid_point(&chart, &pair.exchange.r);
                // t = 0 is the identity.
                let same = lifted_flow(&pair, &p, side, 1, 1, 0.0, QT).unwrap();
                assert!(rel_diff_slices(&same.base, &p.base) < 1e-14);
                assert!(rel_diff_slices(&same.fiber, &p.fiber) < 1e-14);
                // Identity fibers stay identity fibers (base still flows).
                let id = chart.identity_at(&p.base, p.z.clone());
                let moved = lifted_flow(&pair, &id, side, 1, 1, 1.0, QT).unwrap();
                let id_after = chart.identity_at(&moved.base, moved.z.clone());
                assert!(rel_diff_slices(&moved.fiber, &id_after.fiber) < 1e-12);
                // Conserved quantities: yhat_k at the base and the target
                // pullback beta*(yhat^eps).
                for eps in [1i8, -1] {
                    let t = 0.83;
                    let (w_a, w_b) = hamiltonian_bounds(&pair, &p, side, 0, eps);
                    let moved = lifted_flow(&pair, &p, side, 1, eps, t, QT).unwrap();
                    let (w_a2, w_b2) = hamiltonian_bounds(&pair, &moved, side, 0, eps);
                    assert!(rel(w_a2, w_a) < 1e-11, "{family:?} {side:?}");
                    assert!(rel(w_b2, w_b) < 1e-11, "{family:?} {side:?}");
                }
            }
        }
    }

    #[test]
    fn lifted_flow_intertwines_source_and_target() {
        let pair = b2();
        let mut sampler = Sampler::new(29);
        for side in [Side::A, Side::X] {
            for family in Family::ALL {
                let chart = GroupoidChart::for_pair(&pair, family, side);
                let p = sampler.groupoid_point(&chart, &pair.exchange.r);
                let t = 0.64;
                for (k, eps) in [(1usize, 1i8), (2, 1), (1, -1)] {
                    let moved = lifted_flow(&pair, &p, side, k, eps, t, QT).unwrap();
                    // alpha . flow = chart flow . alpha
                    let base_pt = ChartPoint::new(side, p.base.clone(), p.z.clone()).unwrap();
                    let chart_flow = charts::flow(&pair, &base_pt, k, eps, t).unwrap();
                    assert!(rel_diff_slices(&moved.base, &chart_flow.coords) < 1e-11);
                    // beta . flow = chart flow . beta
                    let beta_pt =
                        ChartPoint::new(side, chart.target(&p), p.z.clone()).unwrap();
                    let chart_flow_beta = charts::flow(&pair, &beta_pt, k, eps, t).unwrap();
                    assert!(
                        rel_diff_slices(&chart.target(&moved), &chart_flow_beta.coords) < 1e-9,
                        "{family:?} {side:?} k={k} eps={eps}"
                    );
                }
            }
        }
    }

    #[test]
    fn lifted_tropical_hand_examples() {
        let pair = a2();
        // Double family, A side: s = (2,5), k = 1, eps = +1 gives (1/2, 10).
        let p = pt(
            Family::Double,
            vec![1.0, 1.0],
            vec![2.0, 5.0],
            vec![vec![], vec![]],
            vec![vec![], vec![]],
        );
        let tp = lifted_tropical(&pair, &p, Side::A, 1, 1).unwrap();
        assert_abs_diff_eq!(tp.fiber[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(tp.fiber[1], 10.0, epsilon = 1e-15);
        // Spray family at base (1,1): p'_k = -p_k.
        let p = pt(
            Family::Spray,
            vec![1.0, 1.0],
            vec![0.7, -0.2],
            vec![vec![], vec![]],
            vec![vec![], vec![]],
        );
        let tp = lifted_tropical(&pair, &p, Side::A, 1, 1).unwrap();
        assert_abs_diff_eq!(tp.fiber[0], -0.7, epsilon = 1e-15);
        // Identity fibers map to identity fibers of the mutated chart.
        let mut sampler = Sampler::new(31);
        for side in [Side::A, Side::X] {
            for family in Family::ALL {
                let chart = GroupoidChart::for_pair(&pair, family, side);
                let base = sampler.base(chart.dim());
                let id = chart.identity_at(&base, vec![vec![], vec![]]);
                let tp = lifted_tropical(&pair, &id, side, 2, -1).unwrap();
                let expected = chart.identity_at(&tp.base, tp.z.clone());
                assert!(rel_diff_slices(&tp.fiber, &expected.fiber) < 1e-14);
            }
        }
    }

    #[test]
    fn groupoid_mutation_example_double_family() {
        // A2 data, s = (2,5), x = (1,1), k = 1, eps = +1: s' = (1/2, 7.5).
        let pair = a2();
        let p = pt(
            Family::Double,
            vec![1.0, 1.0],
            vec![2.0, 5.0],
            vec![vec![], vec![]],
            vec![vec![], vec![]],
        );
        let mu = mutate_groupoid(&pair, &p, Side::A, 1, 1, QT).unwrap();
        assert_abs_diff_eq!(mu.fiber[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(mu.fiber[1], 7.5, epsilon = 1e-14);
    }

    #[test]
    fn groupoid_mutation_matches_tropical_after_flow() {
        for pair in [a2(), b2(), gen2()] {
            let mut sampler = Sampler::new(37);
            for side in [Side::A, Side::X] {
                for family in Family::ALL {
                    let chart = GroupoidChart::for_pair(&pair, family, side);
                    for k in 1..=2 {
                        for eps in [1i8, -1] {
                            let p = sampler.groupoid_point(&chart, &pair.exchange.r);
                            let direct = mutate_groupoid(&pair, &p, side, k, eps, QT).unwrap();
                            let flowed = lifted_flow(&pair, &p, side, k, eps, 1.0, QT).unwrap();
                            let composed = lifted_tropical(&pair, &flowed, side, k, eps).unwrap();
                            assert!(
                                rel_diff_slices(&direct.base, &composed.base) < 1e-10,
                                "{family:?} {side:?} k={k} eps={eps}"
                            );
                            assert!(
                                rel_diff_slices(&direct.fiber, &composed.fiber) < 1e-10,
                                "{family:?} {side:?} k={k} eps={eps}"
                            );
                            for (da, ca) in direct.a.iter().zip(&composed.a) {
                                assert!(rel_diff_slices(da, ca) < 1e-10);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn groupoid_mutation_is_involutive() {
        for pair in [a2(), b2(), gen2()] {
            let mut sampler = Sampler::new(43);
            for side in [Side::A, Side::X] {
                for family in Family::ALL {
                    let chart = GroupoidChart::for_pair(&pair, family, side);
                    let p = sampler.groupoid_point(&chart, &pair.exchange.r);
                    let mut walker = GroupoidWalker::new(
                        MutationTrace::seed(pair.clone()),
                        side,
                        p.clone(),
                        QT,
                    )
                    .unwrap();
                    walker.walk(&[1, 1]).unwrap();
                    assert!(
                        point_residual_sigma(&walker.point, &p, &[0, 1]) < 1e-10,
                        "{family:?} {side:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn groupoid_mutation_intertwines_source_and_target() {
        let pair = a2();
        let mut sampler = Sampler::new(47);
        for side in [Side::A, Side::X] {
            for family in Family::ALL {
                let chart = GroupoidChart::for_pair(&pair, family, side);
                let p = sampler.groupoid_point(&chart, &pair.exchange.r);
                let trace = MutationTrace::seed(pair.clone());
                let eps = trace.tropical_sign(1).unwrap();
                let mu = mutate_groupoid(&pair, &p, side, 1, eps, QT).unwrap();
                let mutated_pair = pair.mutate(1, eps).unwrap();
                let chart_mut = GroupoidChart::for_pair(&mutated_pair, family, side);
                // alpha . mu = mu_chart . alpha
                let base_pt = ChartPoint::new(side, p.base.clone(), p.z.clone()).unwrap();
                let chart_image = charts::mutate(&pair, &base_pt, 1, eps).unwrap();
                assert!(rel_diff_slices(&mu.base, &chart_image.coords) < 1e-11);
                // beta . mu = mu_chart . beta
                let beta_pt = ChartpointOrPanic(&pair, side, &chart, &p);
                let chart_image_beta = charts::mutate(&pair, &beta_pt, 1, eps).unwrap();
                assert!(
                    rel_diff_slices(&chart_mut.target(&mu), &chart_image_beta.coords) < 1e-9,
                    "{family:?} {side:?}"
                );
            }
        }
    }

    #[allow(non_snake_case)]
    fn ChartpointOrPanic(
        _pair: &CompatiblePair,
        side: Side,
        chart: &GroupoidChart,
        p: &GroupoidPoint,
    ) -> ChartPoint {
        ChartPoint::new(side, chart.target(p), p.z.clone()).unwrap()
    }

    #[test]
    fn boundary_mutation_cases_and_continuity() {
        // B_jk = -1 case on the a2 seed (j = 2, k = 1, B_21 = -1), B_jk = 1
        // after flipping orientation, and |B_jk| = 2 on the b2 seed.
        let quadratic = gen2();
        let cases: Vec<(CompatiblePair, Vec<Vec<f64>>)> = vec![
            (a2(), vec![vec![], vec![]]),
            (pair2(-1, 1, vec![1, 1], vec![1, 1]), vec![vec![], vec![]]),
            (b2(), vec![vec![], vec![]]),
            (quadratic, vec![vec![1.3], vec![]]),
        ];
        for (pair, zvals) in cases {
            for family in [Family::Spray, Family::Blowup] {
                for eps in [1i8, -1] {
                    let fiber = match family {
                        Family::Spray => vec![0.4, -0.3],
                        _ => vec![0.5, 0.6],
                    };
                    let mk = |x2: f64| {
                        pt(
                            family,
                            vec![1.3, x2],
                            fiber.clone(),
                            zvals.clone(),
                            zvals.iter().map(|z| vec![0.0; z.len()]).collect(),
                        )
                    };
                    let at_boundary = boundary_mutation(&pair, &mk(0.0), 1, eps).unwrap();
                    // Interior mutations converge to the boundary value.
                    let mut prev_err = f64::INFINITY;
                    for x2 in [1e-3, 1e-5, 1e-7] {
                        let interior =
                            mutate_groupoid(&pair, &mk(x2), Side::A, 1, eps, QT).unwrap();
                        let err = rel(interior.fiber[1], at_boundary.fiber[1])
                            .max(rel(interior.fiber[0], at_boundary.fiber[0]))
                            .max(rel(interior.base[0], at_boundary.base[0]));
                        assert!(
                            err < prev_err.max(1e-9),
                            "family {family:?} eps {eps}: err {err} prev {prev_err}"
                        );
                        prev_err = err;
                        if x2 == 1e-7 {
                            assert!(err < 1e-5, "family {family:?} eps {eps}: err {err}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn boundary_mutation_rejects_bad_inputs() {
        let pair = a2();
        let good = pt(
            Family::Spray,
            vec![1.0, 0.0],
            vec![0.3, 0.1],
            vec![vec![], vec![]],
            vec![vec![], vec![]],
        );
        assert!(boundary_mutation(&pair, &good, 1, 1).is_ok());
        // Mutation direction vanishing is rejected.
        let bad = pt(
            Family::Spray,
            vec![0.0, 1.0],
            vec![0.3, 0.1],
            vec![vec![], vec![]],
            vec![vec![], vec![]],
        );
        assert!(boundary_mutation(&pair, &bad, 1, 1).is_err());
        // No vanishing coordinate is rejected.
        let interior = pt(
            Family::Spray,
            vec![1.0, 1.0],
            vec![0.3, 0.1],
            vec![vec![], vec![]],
            vec![vec![], vec![]],
        );
        assert!(boundary_mutation(&pair, &interior, 1, 1).is_err());
    }

    #[test]
    fn separation_reduces_to_single_mutation() {
        let pair = a2();
        let mut sampler = Sampler::new(53);
        for side in [Side::A, Side::X] {
            for family in Family::ALL {
                let chart = GroupoidChart::for_pair(&pair, family, side);
                let p = sampler.groupoid_point(&chart, &pair.exchange.r);
                let mut state = SeedState::new(
                    MutationTrace::seed(pair.clone()),
                    &[vec![], vec![]],
                )
                .unwrap();
                state.step(1).unwrap();
                let closed = gpd_separation(&state, &pair, &p, side, QT).unwrap();
                let eps = MutationTrace::seed(pair.clone()).tropical_sign(1).unwrap();
                let direct = mutate_groupoid(&pair, &p, side, 1, eps, QT).unwrap();
                assert!(
                    rel_diff_slices(&closed.base, &direct.base) < 1e-12,
                    "{family:?} {side:?}"
                );
                assert!(
                    rel_diff_slices(&closed.fiber, &direct.fiber) < 1e-12,
                    "{family:?} {side:?}"
                );
            }
        }
    }

    #[test]
    fn separation_matches_iterated_mutations() {
        let cases: Vec<(CompatiblePair, Vec<Vec<ZInit>>, Vec<Vec<usize>>)> = vec![
            (
                a2(),
                vec![vec![], vec![]],
                vec![vec![1, 2], vec![1, 2, 1], vec![2, 1, 2, 1, 2]],
            ),
            (
                b2(),
                vec![vec![], vec![]],
                vec![vec![1, 2, 1], vec![2, 1, 2, 1]],
            ),
            (
                gen2(),
                vec![vec![ZInit::Symbolic], vec![]],
                vec![vec![1, 2], vec![1, 2, 1, 2]],
            ),
        ];
        for (pair, zinit, paths) in cases {
            let mut sampler = Sampler::new(59);
            for path in paths {
                for side in [Side::A, Side::X] {
                    for family in Family::ALL {
                        let chart = GroupoidChart::for_pair(&pair, family, side);
                        let p = sampler.groupoid_point(&chart, &pair.exchange.r);
                        let mut state =
                            SeedState::new(MutationTrace::seed(pair.clone()), &zinit).unwrap();
                        state.walk(&path).unwrap();
                        let closed = gpd_separation(&state, &pair, &p, side, QT).unwrap();
                        let mut walker = GroupoidWalker::new(
                            MutationTrace::seed(pair.clone()),
                            side,
                            p.clone(),
                            QT,
                        )
                        .unwrap();
                        walker.walk(&path).unwrap();
                        assert!(
                            rel_diff_slices(&closed.base, &walker.point.base) < 1e-8,
                            "{family:?} {side:?} path {path:?}"
                        );
                        assert!(
                            rel_diff_slices(&closed.fiber, &walker.point.fiber) < 1e-8,
                            "{family:?} {side:?} path {path:?}"
                        );
                        for (ca, wa) in closed.a.iter().zip(&walker.point.a) {
                            assert!(
                                rel_diff_slices(ca, wa) < 1e-8,
                                "{family:?} {side:?} path {path:?}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pentagon_and_hexagon_lift_to_groupoid_periodicities() {
        let tol = ToleranceProfile::default();
        let mut sampler = Sampler::new(61);
        let reports = gpd_periodicity_check(&a2(), &[1, 2, 1, 2, 1], &[1, 0], 5, &mut sampler, &tol);
        for r in &reports {
            assert!(r.pass, "{r}");
        }
        let reports =
            gpd_periodicity_check(&b2(), &[1, 2, 1, 2, 1, 2], &[0, 1], 5, &mut sampler, &tol);
        for r in &reports {
            assert!(r.pass, "{r}");
        }
        // The trivial period k,k with sigma = id.
        let reports = gpd_periodicity_check(&a2(), &[2, 2], &[0, 1], 5, &mut sampler, &tol);
        for r in &reports {
            assert!(r.pass && r.max_residual < 1e-10, "{r}");
        }
    }

    #[test]
    fn dilog_sums_vanish_on_periodicities() {
        let mut sampler = Sampler::new(67);
        // Trivial period: two canceling terms, any direction, any family.
        let pair = a2();
        for family in Family::ALL {
            let chart = GroupoidChart::for_pair(&pair, family, Side::X);
            let p = sampler.groupoid_point(&chart, &pair.exchange.r);
            let s = dilog_sum_bounded(&pair, Side::X, family, &[1, 1], &p, 1, 1, QT).unwrap();
            assert!(s.abs() < 1e-10, "{family:?}: {s}");
            let s = dilog_sum_zero_based(&pair, Side::X, family, &[1, 1], &p, 1, 1, QT).unwrap();
            assert!(s.abs() < 1e-10, "{family:?}: {s}");
        }
        // Pentagon, direction 1 (mutated three times).
        for _ in 0..5 {
            let chart = GroupoidChart::for_pair(&pair, Family::Double, Side::X);
            let p = sampler.groupoid_point(&chart, &pair.exchange.r);
            let s = dilog_sum_zero_based(
                &pair,
                Side::X,
                Family::Double,
                &[1, 2, 1, 2, 1],
                &p,
                1,
                1,
                QT,
            )
            .unwrap();
            assert!(s.abs() < 1e-8, "pentagon: {s}");
        }
        // Pentagon, bounded variant, all families.
        for family in Family::ALL {
            let chart = GroupoidChart::for_pair(&pair, family, Side::X);
            let p = sampler.groupoid_point(&chart, &pair.exchange.r);
            let s =
                dilog_sum_bounded(&pair, Side::X, family, &[1, 2, 1, 2, 1], &p, 1, 1, QT).unwrap();
            assert!(s.abs() < 1e-10, "pentagon bounded {family:?}: {s}");
        }
        // Generalized trivial periods exercise genuine a-coordinate indices
        // j and j* with r up to 3.
        let pair = pair2(1, -1, vec![1, 1], vec![3, 2]);
        for ell in 1..=2usize {
            for j in 1..=pair.exchange.r[ell - 1] {
                for family in Family::ALL {
                    let chart = GroupoidChart::for_pair(&pair, family, Side::X);
                    let p = sampler.groupoid_point(&chart, &pair.exchange.r);
                    let seq = [ell, ell];
                    let s =
                        dilog_sum_bounded(&pair, Side::X, family, &seq, &p, ell, j, QT).unwrap();
                    assert!(s.abs() < 1e-10, "trivial bounded ell={ell} j={j}: {s}");
                    let s =
                        dilog_sum_zero_based(&pair, Side::X, family, &seq, &p, ell, j, QT)
                            .unwrap();
                    assert!(s.abs() < 1e-10, "trivial zero-based ell={ell} j={j}: {s}");
                }
            }
        }
    }
}
