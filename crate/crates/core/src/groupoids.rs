//! The three groupoid charts over a log-canonical Poisson vector space and
//! their verification: structure maps, symplectic/Poisson tensors, the
//! connecting maps between the families, the Poisson spray flow and the
//! lifts of the ensemble map.
//!
//! Every construction is parametrized by a constant skew matrix. The A-side
//! chart uses Omega itself, the X-side chart the principal matrix
//! (d_k B_kl); everything else is shared.

use crate::charts::Side;
use crate::exchange::{rat_to_f64, CompatiblePair};
use crate::numerics;
use crate::report::{ToleranceProfile, VerificationReport};
use crate::sample::Sampler;
use crate::{Error, Result};
use nalgebra::DMatrix;

/// The three integrations of a log-canonical structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Source-simply-connected chart from the Poisson spray; fiber p,
    /// transcendental structure maps.
    Spray,
    /// Blow-up chart with fiber u and rational structure maps, defined where
    /// x_i u_i + 1 > 0.
    Blowup,
    /// Symplectic double with multiplicative fiber s > 0 and monomial
    /// structure maps.
    Double,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Spray, Family::Blowup, Family::Double];

    pub fn tag(&self) -> &'static str {
        match self {
            Family::Spray => "spray",
            Family::Blowup => "blowup",
            Family::Double => "double",
        }
    }
}

/// A point of one groupoid chart: base and fiber coordinates of the family
/// block plus the cotangent block over the exchange-coefficient space
/// (z values and their conjugate a coordinates).
#[derive(Clone, Debug, PartialEq)]
pub struct GroupoidPoint {
    pub family: Family,
    pub base: Vec<f64>,
    pub fiber: Vec<f64>,
    pub z: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
}

impl GroupoidPoint {
    pub fn new(
        family: Family,
        base: Vec<f64>,
        fiber: Vec<f64>,
        z: Vec<Vec<f64>>,
        a: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if base.len() != fiber.len() {
            return Err(Error::Dimension("base and fiber dimensions differ".into()));
        }
        let pt = GroupoidPoint {
            family,
            base,
            fiber,
            z,
            a,
        };
        pt.check_domain()?;
        Ok(pt)
    }

    pub fn check_domain(&self) -> Result<()> {
        match self.family {
            Family::Spray => Ok(()),
            Family::Blowup => {
                for (x, u) in self.base.iter().zip(&self.fiber) {
                    if !(x * u + 1.0 > 0.0) {
                        return Err(Error::Domain(format!(
                            "blow-up chart needs x*u + 1 > 0, got {}",
                            x * u + 1.0
                        )));
                    }
                }
                Ok(())
            }
            Family::Double => {
                if self.fiber.iter().any(|&s| !(s > 0.0)) {
                    return Err(Error::Domain("double chart needs s > 0".into()));
                }
                Ok(())
            }
        }
    }

    /// Family block flattened as (base..., fiber...), the coordinate order
    /// used by all tensors and Jacobians.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.base.clone();
        v.extend_from_slice(&self.fiber);
        v
    }
}

/// One groupoid chart: a family together with the constant skew matrix of
/// the underlying log-canonical structure.
#[derive(Clone, Debug)]
pub struct GroupoidChart {
    pub family: Family,
    pub omega: DMatrix<f64>,
}

/// Skew matrix of the side: Omega on the A side, (d_k B_kl) on the X side.
pub fn side_skew_matrix(pair: &CompatiblePair, side: Side) -> DMatrix<f64> {
    match side {
        Side::A => {
            let m = pair.exchange.m;
            DMatrix::from_fn(m, m, |i, j| rat_to_f64(&pair.omega[(i, j)]))
        }
        Side::X => {
            let n = pair.exchange.n;
            DMatrix::from_fn(n, n, |k, l| {
                pair.exchange.d[k] as f64 * crate::charts::b_entry(pair, k, l)
            })
        }
    }
}

impl GroupoidChart {
    pub fn new(family: Family, omega: DMatrix<f64>) -> Result<Self> {
        if omega.nrows() != omega.ncols() {
            return Err(Error::Dimension("omega must be square".into()));
        }
        let skew_defect = numerics::max_abs(&(omega.clone() + omega.transpose()));
        if skew_defect > 0.0 {
            return Err(Error::Domain("omega must be exactly skew-symmetric".into()));
        }
        Ok(GroupoidChart { family, omega })
    }

    pub fn for_pair(pair: &CompatiblePair, family: Family, side: Side) -> Self {
        GroupoidChart {
            family,
            omega: side_skew_matrix(pair, side),
        }
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    fn check_point(&self, pt: &GroupoidPoint) -> Result<()> {
        if pt.family != self.family {
            return Err(Error::Domain("point belongs to a different family".into()));
        }
        if pt.base.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "point dimension {} does not match chart dimension {}",
                pt.base.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Per-coordinate target factor: beta_j = factor_j * x_j.
    fn target_factor(&self, pt: &GroupoidPoint) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|j| match self.family {
                Family::Spray => {
                    let mut e = 0.0;
                    for i in 0..d {
                        e += self.omega[(i, j)] * pt.base[i] * pt.fiber[i];
                    }
                    e.exp()
                }
                Family::Blowup => {
                    let mut acc = 1.0;
                    for i in 0..d {
                        acc *= (pt.base[i] * pt.fiber[i] + 1.0).powf(self.omega[(i, j)]);
                    }
                    acc
                }
                Family::Double => {
                    let mut acc = 1.0;
                    for i in 0..d {
                        acc *= pt.fiber[i].powf(self.omega[(i, j)]);
                    }
                    acc
                }
            })
            .collect()
    }

    pub fn source(&self, pt: &GroupoidPoint) -> Vec<f64> {
        pt.base.clone()
    }

    pub fn target(&self, pt: &GroupoidPoint) -> Vec<f64> {
        let f = self.target_factor(pt);
        pt.base.iter().zip(f).map(|(x, a)| x * a).collect()
    }

    pub fn identity_at(&self, x: &[f64], z: Vec<Vec<f64>>) -> GroupoidPoint {
        let fiber = match self.family {
            Family::Spray | Family::Blowup => vec![0.0; x.len()],
            Family::Double => vec![1.0; x.len()],
        };
        let a = z.iter().map(|zi| vec![0.0; zi.len()]).collect();
        GroupoidPoint {
            family: self.family,
            base: x.to_vec(),
            fiber,
            z,
            a,
        }
    }

    pub fn inverse(&self, pt: &GroupoidPoint) -> Result<GroupoidPoint> {
        self.check_point(pt)?;
        let factor = self.target_factor(pt);
        let base = self.target(pt);
        let fiber = match self.family {
            Family::Spray => pt
                .fiber
                .iter()
                .zip(&factor)
                .map(|(p, a)| -p / a)
                .collect(),
            Family::Blowup => (0..self.dim())
                .map(|j| -pt.fiber[j] / factor[j] / (pt.base[j] * pt.fiber[j] + 1.0))
                .collect(),
            Family::Double => pt.fiber.iter().map(|s| 1.0 / s).collect(),
        };
        let a = pt.a.iter().map(|ai| ai.iter().map(|v| -v).collect()).collect();
        GroupoidPoint::new(self.family, base, fiber, pt.z.clone(), a)
    }

    /// Product of composable elements, with `alpha(g) = beta(h)` up to the
    /// given relative tolerance. The result sits over the base of `h`.
    pub fn multiply(
        &self,
        g: &GroupoidPoint,
        h: &GroupoidPoint,
        comp_tol: f64,
    ) -> Result<GroupoidPoint> {
        self.check_point(g)?;
        self.check_point(h)?;
        let beta_h = self.target(h);
        for (a, b) in g.base.iter().zip(&beta_h) {
            if (a - b).abs() > comp_tol * b.abs().max(1.0) {
                return Err(Error::NotComposable(format!(
                    "alpha(g) = {a} differs from beta(h) = {b}"
                )));
            }
        }
        for (zg, zh) in g.z.iter().zip(&h.z) {
            for (a, b) in zg.iter().zip(zh) {
                if (a - b).abs() > comp_tol * b.abs().max(1.0) {
                    return Err(Error::NotComposable("z coordinates differ".into()));
                }
            }
        }
        let d = self.dim();
        let factor_h = self.target_factor(h);
        let fiber = match self.family {
            Family::Spray => (0..d)
                .map(|j| factor_h[j] * g.fiber[j] + h.fiber[j])
                .collect(),
            Family::Blowup => (0..d)
                .map(|j| {
                    g.fiber[j] * (h.base[j] * h.fiber[j] + 1.0) * factor_h[j] + h.fiber[j]
                })
                .collect(),
            Family::Double => (0..d).map(|j| g.fiber[j] * h.fiber[j]).collect(),
        };
        let a = g
            .a
            .iter()
            .zip(&h.a)
            .map(|(ag, ah)| ag.iter().zip(ah).map(|(x, y)| x + y).collect())
            .collect();
        GroupoidPoint::new(self.family, h.base.clone(), fiber, h.z.clone(), a)
    }

    /// Log-canonical Poisson tensor on the base at `x`.
    pub fn base_tensor(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.omega[(i, j)] * x[i] * x[j])
    }

    /// Multiplicative Poisson tensor of the chart at a point, over the
    /// (base, fiber) coordinates.
    pub fn poisson_tensor(&self, pt: &GroupoidPoint) -> Result<DMatrix<f64>> {
        self.check_point(pt)?;
        let d = self.dim();
        let mut t = DMatrix::zeros(2 * d, 2 * d);
        let x = &pt.base;
        let f = &pt.fiber;
        match self.family {
            Family::Spray => {
                for i in 0..d {
                    for j in 0..d {
                        t[(i, j)] = self.omega[(i, j)] * x[i] * x[j];
                        t[(d + i, d + j)] = self.omega[(i, j)] * f[i] * f[j];
                        let xp = -self.omega[(i, j)] * x[i] * f[j]
                            - if i == j { 1.0 } else { 0.0 };
                        t[(i, d + j)] = xp;
                        t[(d + j, i)] = -xp;
                    }
                }
            }
            Family::Blowup => {
                for i in 0..d {
                    for j in 0..d {
                        t[(i, j)] = self.omega[(i, j)] * x[i] * x[j];
                        t[(d + i, d + j)] = self.omega[(i, j)] * f[i] * f[j];
                        let xu = -self.omega[(i, j)] * x[i] * f[j]
                            - if i == j { x[i] * f[i] + 1.0 } else { 0.0 };
                        t[(i, d + j)] = xu;
                        t[(d + j, i)] = -xu;
                    }
                }
            }
            Family::Double => {
                for i in 0..d {
                    for j in 0..d {
                        t[(i, j)] = self.omega[(i, j)] * x[i] * x[j];
                        if i == j {
                            t[(i, d + j)] = -x[i] * f[i];
                            t[(d + j, i)] = x[i] * f[i];
                        }
                    }
                }
            }
        }
        Ok(t)
    }

    /// Multiplicative symplectic form at a point, over (base, fiber). For the
    /// double family this is the singular 2-form with dx/x terms, only
    /// defined away from the coordinate hyperplanes.
    pub fn symplectic_form(&self, pt: &GroupoidPoint) -> Result<DMatrix<f64>> {
        self.check_point(pt)?;
        let d = self.dim();
        let mut w = DMatrix::zeros(2 * d, 2 * d);
        let x = &pt.base;
        let f = &pt.fiber;
        match self.family {
            Family::Spray => {
                for i in 0..d {
                    for j in 0..d {
                        let xp = self.omega[(i, j)] * f[i] * x[j]
                            + if i == j { 1.0 } else { 0.0 };
                        w[(i, d + j)] = xp;
                        w[(d + j, i)] = -xp;
                        w[(i, j)] = self.omega[(i, j)] * f[i] * f[j];
                        w[(d + i, d + j)] = self.omega[(i, j)] * x[i] * x[j];
                    }
                }
            }
            Family::Blowup => {
                let wgt: Vec<f64> = (0..d).map(|i| x[i] * f[i] + 1.0).collect();
                for i in 0..d {
                    for j in 0..d {
                        let xu = self.omega[(i, j)] * f[i] * x[j] / (wgt[i] * wgt[j])
                            + if i == j { 1.0 / wgt[i] } else { 0.0 };
                        w[(i, d + j)] = xu;
                        w[(d + j, i)] = -xu;
                        w[(i, j)] = self.omega[(i, j)] * f[i] * f[j] / (wgt[i] * wgt[j]);
                        w[(d + i, d + j)] = self.omega[(i, j)] * x[i] * x[j] / (wgt[i] * wgt[j]);
                    }
                }
            }
            Family::Double => {
                if x.iter().any(|&v| v == 0.0) {
                    return Err(Error::Domain(
                        "double-family 2-form is singular on coordinate hyperplanes".into(),
                    ));
                }
                for i in 0..d {
                    for j in 0..d {
                        if i == j {
                            w[(i, d + i)] = 1.0 / (x[i] * f[i]);
                            w[(d + i, i)] = -1.0 / (x[i] * f[i]);
                        }
                        w[(d + i, d + j)] = self.omega[(i, j)] / (f[i] * f[j]);
                    }
                }
            }
        }
        Ok(w)
    }
}

/// Time-t flow of the Poisson spray on the spray chart:
/// `(x, p) -> (a^t x, a^-t p)` with `a_j = exp(sum_i omega_ij x_i p_i)`.
/// The products `x_j p_j` are conserved exactly in this closed form.
pub fn spray_flow(chart: &GroupoidChart, pt: &GroupoidPoint, t: f64) -> Result<GroupoidPoint> {
    if chart.family != Family::Spray || pt.family != Family::Spray {
        return Err(Error::Domain("spray flow lives on the spray chart".into()));
    }
    let factor = chart.target_factor(pt);
    let base = pt
        .base
        .iter()
        .zip(&factor)
        .map(|(x, a)| x * a.powf(t))
        .collect();
    let fiber = pt
        .fiber
        .iter()
        .zip(&factor)
        .map(|(p, a)| p * a.powf(-t))
        .collect();
    GroupoidPoint::new(Family::Spray, base, fiber, pt.z.clone(), pt.a.clone())
}

/// Exponential map of the cotangent algebroid onto the spray chart: the
/// time-one spray flow.
pub fn exp_map(chart: &GroupoidChart, pt: &GroupoidPoint) -> Result<GroupoidPoint> {
    spray_flow(chart, pt, 1.0)
}

/// Spray-to-blow-up morphism: `u_i = (exp(x_i p_i) - 1) / x_i`, with the
/// limit value p_i on the hyperplane x_i = 0.
pub fn kappa(pt: &GroupoidPoint) -> Result<GroupoidPoint> {
    if pt.family != Family::Spray {
        return Err(Error::Domain("kappa maps the spray chart".into()));
    }
    let fiber = pt
        .base
        .iter()
        .zip(&pt.fiber)
        .map(|(&x, &p)| if x == 0.0 { p } else { f64::exp_m1(x * p) / x })
        .collect();
    GroupoidPoint::new(
        Family::Blowup,
        pt.base.clone(),
        fiber,
        pt.z.clone(),
        pt.a.clone(),
    )
}

/// Blow-down morphism: `s_i = x_i u_i + 1`.
pub fn nu(pt: &GroupoidPoint) -> Result<GroupoidPoint> {
    if pt.family != Family::Blowup {
        return Err(Error::Domain("nu maps the blow-up chart".into()));
    }
    let fiber = pt
        .base
        .iter()
        .zip(&pt.fiber)
        .map(|(&x, &u)| x * u + 1.0)
        .collect();
    GroupoidPoint::new(
        Family::Double,
        pt.base.clone(),
        fiber,
        pt.z.clone(),
        pt.a.clone(),
    )
}

/// Spray-to-double morphism: `s_i = exp(x_i p_i)`; equals `nu . kappa`.
pub fn lambda(pt: &GroupoidPoint) -> Result<GroupoidPoint> {
    if pt.family != Family::Spray {
        return Err(Error::Domain("lambda maps the spray chart".into()));
    }
    let fiber = pt
        .base
        .iter()
        .zip(&pt.fiber)
        .map(|(&x, &p)| (x * p).exp())
        .collect();
    GroupoidPoint::new(
        Family::Double,
        pt.base.clone(),
        fiber,
        pt.z.clone(),
        pt.a.clone(),
    )
}

/// Fiber part of the groupoid comorphism lifting the ensemble map: an X-side
/// fiber over `rho(x)` is carried to an A-side fiber over `x`.
pub fn ensemble_comorphism(
    pair: &CompatiblePair,
    family: Family,
    a_base: &[f64],
    x_fiber: &[f64],
) -> Result<Vec<f64>> {
    let (m, n) = (pair.exchange.m, pair.exchange.n);
    if a_base.len() != m || x_fiber.len() != n {
        return Err(Error::Dimension("comorphism expects an m-base and n-fiber".into()));
    }
    let yhat: Vec<f64> = (0..n)
        .map(|k| {
            let mut acc = 1.0;
            for i in 0..m {
                acc *= a_base[i].powi(crate::charts::b_int(pair, i, k) as i32);
            }
            acc
        })
        .collect();
    Ok((0..m)
        .map(|i| match family {
            Family::Spray => {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += crate::charts::b_entry(pair, i, k) * yhat[k] * x_fiber[k];
                }
                acc / a_base[i]
            }
            Family::Blowup => {
                let mut acc = 1.0;
                for k in 0..n {
                    acc *= (x_fiber[k] * yhat[k] + 1.0)
                        .powi(crate::charts::b_int(pair, i, k) as i32);
                }
                (acc - 1.0) / a_base[i]
            }
            Family::Double => {
                let mut acc = 1.0;
                for k in 0..n {
                    acc *= x_fiber[k].powi(crate::charts::b_int(pair, i, k) as i32);
                }
                acc
            }
        })
        .collect())
}

/// Honest groupoid morphism lifting the ensemble map in the square case
/// m = n, where the base map is a diffeomorphism onto its image. Branches of
/// the fractional powers are fixed by sending identity fibers to identity
/// fibers.
pub fn ensemble_morphism(pair: &CompatiblePair, pt: &GroupoidPoint) -> Result<GroupoidPoint> {
    let (m, n) = (pair.exchange.m, pair.exchange.n);
    if m != n {
        return Err(Error::Domain(
            "the ensemble map lifts to a morphism only when m = n".into(),
        ));
    }
    if pt.base.len() != m {
        return Err(Error::Dimension("point dimension mismatch".into()));
    }
    let yhat: Vec<f64> = (0..n)
        .map(|k| {
            let mut acc = 1.0;
            for i in 0..m {
                acc *= pt.base[i].powi(crate::charts::b_int(pair, i, k) as i32);
            }
            acc
        })
        .collect();
    let omega = |i: usize, j: usize| rat_to_f64(&pair.omega[(i, j)]);
    let d = &pair.exchange.d;
    let fiber: Vec<f64> = match pt.family {
        Family::Spray => (0..n)
            .map(|l| {
                let mut acc = 0.0;
                for j in 0..m {
                    acc += omega(j, l) * pt.base[j] * pt.fiber[j];
                }
                acc / (d[l] as f64 * yhat[l])
            })
            .collect(),
        Family::Blowup => (0..n)
            .map(|l| {
                let mut acc = 1.0;
                for j in 0..m {
                    acc *= (pt.fiber[j] * pt.base[j] + 1.0).powf(-omega(l, j) / d[l] as f64);
                }
                (acc - 1.0) / yhat[l]
            })
            .collect(),
        Family::Double => (0..n)
            .map(|l| {
                let mut acc = 1.0;
                for j in 0..m {
                    acc *= pt.fiber[j].powf(-omega(l, j) / d[l] as f64);
                }
                acc
            })
            .collect(),
    };
    GroupoidPoint::new(pt.family, yhat, fiber, pt.z.clone(), pt.a.clone())
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs() / y.abs().max(1.0)))
}

fn point_rel_diff(a: &GroupoidPoint, b: &GroupoidPoint) -> f64 {
    let mut r = rel_diff(&a.base, &b.base).max(rel_diff(&a.fiber, &b.fiber));
    for (za, zb) in a.z.iter().zip(&b.z) {
        r = r.max(rel_diff(za, zb));
    }
    for (aa, ab) in a.a.iter().zip(&b.a) {
        r = r.max(rel_diff(aa, ab));
    }
    r
}

/// Verifies the groupoid axioms on sampled points, pairs and triples:
/// source/target of identities, compatibility of source/target with products
/// and inverses, associativity, and the unit/inverse laws.
pub fn check_axioms(
    chart: &GroupoidChart,
    r_degrees: &[usize],
    samples: usize,
    sampler: &mut Sampler,
    tol: &ToleranceProfile,
    notes: impl Into<String>,
) -> VerificationReport {
    let check = format!("axioms-{}", chart.family.tag());
    let mut max_res = 0.0f64;
    let comp_tol = 1e-9;
    for _ in 0..samples {
        let h = sampler.groupoid_point(chart, r_degrees);
        let x = &h.base;

        // Identities: alpha(1_x) = beta(1_x) = x and (1_x)^-1 = 1_x.
        let idp = chart.identity_at(x, h.z.clone());
        max_res = max_res.max(rel_diff(&chart.source(&idp), x));
        max_res = max_res.max(rel_diff(&chart.target(&idp), x));
        let inv_id = chart.inverse(&idp).expect("identity is invertible");
        max_res = max_res.max(point_rel_diff(&inv_id, &idp));

        // Inverse swaps source and target.
        let hinv = chart.inverse(&h).expect("sampled point invertible");
        max_res = max_res.max(rel_diff(&chart.source(&hinv), &chart.target(&h)));
        max_res = max_res.max(rel_diff(&chart.target(&hinv), &chart.source(&h)));

        // A composable pair g over beta(h).
        let g = sampler.point_over(chart, &chart.target(&h), &h.z, r_degrees);
        let gh = chart.multiply(&g, &h, comp_tol).expect("constructed pair composes");
        max_res = max_res.max(rel_diff(&chart.source(&gh), &chart.source(&h)));
        max_res = max_res.max(rel_diff(&chart.target(&gh), &chart.target(&g)));

        // Unit laws.
        let left = chart
            .multiply(&chart.identity_at(&chart.target(&h), h.z.clone()), &h, comp_tol)
            .unwrap();
        max_res = max_res.max(point_rel_diff(&left, &h));
        let right = chart
            .multiply(&h, &chart.identity_at(&chart.source(&h), h.z.clone()), comp_tol)
            .unwrap();
        max_res = max_res.max(point_rel_diff(&right, &h));

        // g^-1 g = 1_alpha(g) and g g^-1 = 1_beta(g).
        let ginv = chart.inverse(&g).unwrap();
        let e1 = chart.multiply(&ginv, &g, comp_tol).unwrap();
        max_res = max_res.max(point_rel_diff(
            &e1,
            &chart.identity_at(&chart.source(&g), g.z.clone()),
        ));
        let e2 = chart.multiply(&g, &ginv, comp_tol).unwrap();
        max_res = max_res.max(point_rel_diff(
            &e2,
            &chart.identity_at(&chart.target(&g), g.z.clone()),
        ));

        // Associativity on a composable triple (g2 g) h = g2 (g h).
        let g2 = sampler.point_over(chart, &chart.target(&g), &g.z, r_degrees);
        let left = chart
            .multiply(&chart.multiply(&g2, &g, comp_tol).unwrap(), &h, comp_tol)
            .unwrap();
        let right = chart
            .multiply(&g2, &chart.multiply(&g, &h, comp_tol).unwrap(), comp_tol)
            .unwrap();
        max_res = max_res.max(point_rel_diff(&left, &right));
    }
    VerificationReport::numeric(&check, samples, max_res, tol.residual_for(&check), notes)
}

/// Residual of `m* omega - pr1* omega - pr2* omega` on sampled composable
/// pairs, computed through finite-difference pullbacks over the pair-space
/// chart (base_h, fiber_h, fiber_g).
pub fn check_multiplicativity(
    chart: &GroupoidChart,
    samples: usize,
    sampler: &mut Sampler,
    tol: &ToleranceProfile,
    notes: impl Into<String>,
) -> VerificationReport {
    let d = chart.dim();
    let nz: Vec<Vec<f64>> = Vec::new();
    let point_from = |base: &[f64], fiber: &[f64]| GroupoidPoint {
        family: chart.family,
        base: base.to_vec(),
        fiber: fiber.to_vec(),
        z: nz.clone(),
        a: nz.clone(),
    };
    let h_of = move |q: &[f64]| point_from(&q[0..d], &q[d..2 * d]);
    let g_of = {
        let chart = chart.clone();
        move |q: &[f64]| {
            let h = h_of(q);
            let gbase = chart.target(&h);
            point_from(&gbase, &q[2 * d..3 * d])
        }
    };

    let proj_h = move |q: &[f64]| h_of(q).flat();
    let proj_g = {
        let g_of = g_of.clone();
        move |q: &[f64]| g_of(q).flat()
    };
    let mult = {
        let chart = chart.clone();
        let g_of = g_of.clone();
        move |q: &[f64]| {
            let h = h_of(q);
            let g = g_of(q);
            chart.multiply(&g, &h, 1e-6).expect("pair composes by construction").flat()
        }
    };

    let mut max_res = 0.0f64;
    for _ in 0..samples {
        let h = sampler.family_point(chart);
        let gfiber = sampler.fiber(chart.family, &chart.target(&h));
        let mut q = h.flat();
        q.extend_from_slice(&gfiber);

        let form_at = |flat: &[f64]| {
            let pt = point_from(&flat[0..d], &flat[d..2 * d]);
            chart.symplectic_form(&pt).expect("interior point")
        };
        let jh = numerics::jacobian(&proj_h, &q, tol.fd_step);
        let jg = numerics::jacobian(&proj_g, &q, tol.fd_step);
        let jm = numerics::jacobian(&mult, &q, tol.fd_step);
        let wh = numerics::pullback_2form(&jh, &form_at(&proj_h(&q)));
        let wg = numerics::pullback_2form(&jg, &form_at(&proj_g(&q)));
        let wm = numerics::pullback_2form(&jm, &form_at(&mult(&q)));
        max_res = max_res.max(numerics::max_abs(&(wm - wg - wh)));
    }
    VerificationReport::numeric(
        "multiplicativity",
        samples,
        max_res,
        tol.residual_for("multiplicativity"),
        notes,
    )
}

/// Verifies that the Poisson tensor and symplectic form are mutual inverses
/// at sampled interior points.
pub fn check_tensor_inverse(
    chart: &GroupoidChart,
    samples: usize,
    sampler: &mut Sampler,
    tol: &ToleranceProfile,
    notes: impl Into<String>,
) -> VerificationReport {
    let d = chart.dim();
    let mut max_res = 0.0f64;
    for _ in 0..samples {
        let pt = sampler.family_point(chart);
        let w = chart.symplectic_form(&pt).expect("interior point");
        let t = chart.poisson_tensor(&pt).unwrap();
        let prod = &w * &t;
        let id = DMatrix::<f64>::identity(2 * d, 2 * d);
        max_res = max_res.max(numerics::max_abs(&(prod - id)));
    }
    VerificationReport::numeric(
        "sigma-omega-inverse",
        samples,
        max_res,
        tol.residual_for("sigma-omega-inverse"),
        notes,
    )
}

/// Checks the volume normalization of the symplectic form: the top power of
/// omega against the reference wedge of dx_j ^ df_j, via the Pfaffian ratio.
/// For the spray chart the ratio is 1; for the blow-up chart it is
/// `prod_i 1/(x_i u_i + 1)`.
pub fn check_volume_normalization(
    chart: &GroupoidChart,
    samples: usize,
    sampler: &mut Sampler,
    tol: &ToleranceProfile,
    notes: impl Into<String>,
) -> VerificationReport {
    let d = chart.dim();
    let mut reference = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        reference[(i, d + i)] = 1.0;
        reference[(d + i, i)] = -1.0;
    }
    let ref_pf = numerics::pfaffian(&reference);
    let mut max_res = 0.0f64;
    for _ in 0..samples {
        let pt = sampler.family_point(chart);
        let w = chart.symplectic_form(&pt).expect("interior point");
        let ratio = numerics::pfaffian(&w) / ref_pf;
        let expected = match chart.family {
            Family::Spray => 1.0,
            Family::Blowup => pt
                .base
                .iter()
                .zip(&pt.fiber)
                .map(|(x, u)| 1.0 / (x * u + 1.0))
                .product(),
            Family::Double => pt
                .base
                .iter()
                .zip(&pt.fiber)
                .map(|(x, s)| 1.0 / (x * s))
                .product(),
        };
        max_res = max_res.max((ratio - expected).abs() / expected.abs().max(1.0));
    }
    VerificationReport::numeric(
        "volume-normalization",
        samples,
        max_res,
        tol.residual_for("volume-normalization"),
        notes,
    )
}

/// Source map pushes the multiplicative tensor to the base tensor, target to
/// its negative.
pub fn check_anchor_poisson(
    chart: &GroupoidChart,
    samples: usize,
    sampler: &mut Sampler,
    tol: &ToleranceProfile,
    notes: impl Into<String>,
) -> VerificationReport {
    let d = chart.dim();
    let mut max_res = 0.0f64;
    for _ in 0..samples {
        let pt = sampler.family_point(chart);
        let q = pt.flat();
        let family = chart.family;
        let source = |flat: &[f64]| flat[0..d].to_vec();
        let target = {
            let chart = chart.clone();
            move |flat: &[f64]| {
                let p = GroupoidPoint {
                    family,
                    base: flat[0..d].to_vec(),
                    fiber: flat[d..2 * d].to_vec(),
                    z: Vec::new(),
                    a: Vec::new(),
                };
                chart.target(&p)
            }
        };
        let sigma = chart.poisson_tensor(&pt).unwrap();

        let js = numerics::jacobian(&source, &q, tol.fd_step);
        let pushed = numerics::pushforward_bivector(&js, &sigma);
        let expect = chart.base_tensor(&pt.base);
        max_res = max_res.max(numerics::max_abs(&(pushed - expect)));

        let jt = numerics::jacobian(&target, &q, tol.fd_step);
        let pushed = numerics::pushforward_bivector(&jt, &sigma);
        let expect = -chart.base_tensor(&chart.target(&pt));
        max_res = max_res.max(numerics::max_abs(&(pushed - expect)));
    }
    VerificationReport::numeric(
        "anchor-poisson",
        samples,
        max_res,
        tol.residual_for("anchor-poisson"),
        notes,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exchange::{ExchangeData, IMat};
    use approx::assert_abs_diff_eq;

    fn std_omega2() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
    }

    fn pt(family: Family, base: Vec<f64>, fiber: Vec<f64>) -> GroupoidPoint {
        GroupoidPoint::new(family, base, fiber, vec![], vec![]).unwrap()
    }

    #[test]
    fn spray_target_and_inverse_hand_values() {
        let chart = GroupoidChart::new(Family::Spray, std_omega2()).unwrap();
        let g = pt(Family::Spray, vec![1.0, 1.0], vec![1.0, 0.0]);
        let beta = chart.target(&g);
        assert_abs_diff_eq!(beta[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(beta[1], std::f64::consts::E, epsilon = 1e-14);
        let inv = chart.inverse(&g).unwrap();
        assert_abs_diff_eq!(inv.base[1], std::f64::consts::E, epsilon = 1e-14);
        assert_abs_diff_eq!(inv.fiber[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(inv.fiber[1], 0.0, epsilon = 1e-15);
        // beta(inverse) = alpha.
        let b = chart.target(&inv);
        assert_abs_diff_eq!(b[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_fibers() {
        for family in Family::ALL {
            let chart = GroupoidChart::new(family, std_omega2()).unwrap();
            let x = vec![0.7, 1.9];
            let id = chart.identity_at(&x, vec![]);
            assert_eq!(chart.source(&id), x);
            assert_eq!(chart.target(&id), x);
            let expected = match family {
                Family::Double => vec![1.0, 1.0],
                _ => vec![0.0, 0.0],
            };
            assert_eq!(id.fiber, expected);
        }
    }

    #[test]
    fn axioms_hold_on_samples() {
        let tol = ToleranceProfile::default();
        for family in Family::ALL {
            let chart = GroupoidChart::new(family, std_omega2()).unwrap();
            let mut sampler = Sampler::new(7);
            let rep = check_axioms(&chart, &[1, 1], 60, &mut sampler, &tol, family.tag());
            assert!(rep.pass, "{rep}");
        }
    }

    #[test]
    fn double_family_axioms_are_algebraically_tight() {
        let chart = GroupoidChart::new(Family::Double, std_omega2()).unwrap();
        let mut sampler = Sampler::new(11);
        let tol = ToleranceProfile::default();
        let rep = check_axioms(&chart, &[1, 1], 100, &mut sampler, &tol, "double tight");
        assert!(rep.pass && rep.max_residual <= 1e-12, "{rep}");
    }

    #[test]
    fn tensors_are_mutual_inverses() {
        let tol = ToleranceProfile::default();
        for family in Family::ALL {
            let chart = GroupoidChart::new(family, std_omega2()).unwrap();
            let mut sampler = Sampler::new(3);
            let rep = check_tensor_inverse(&chart, 50, &mut sampler, &tol, family.tag());
            assert!(rep.pass, "{rep}");
        }
    }

    #[test]
    fn spray_form_at_zero_fiber() {
        // At p = 0 the fiber-dependent corrections vanish: the dx/dp block is
        // the identity pairing and the dx/dx block is zero. The dp/dp block
        // keeps its omega_ij x_i x_j coefficients.
        let chart = GroupoidChart::new(Family::Spray, std_omega2()).unwrap();
        let x = [1.3, 0.8];
        let p = pt(Family::Spray, x.to_vec(), vec![0.0, 0.0]);
        let w = chart.symplectic_form(&p).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(w[(i, 2 + j)], expect, epsilon = 1e-15);
                assert_abs_diff_eq!(w[(i, j)], 0.0, epsilon = 1e-15);
                assert_abs_diff_eq!(
                    w[(2 + i, 2 + j)],
                    chart.omega[(i, j)] * x[i] * x[j],
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn volume_normalization_spray_and_blowup() {
        let tol = ToleranceProfile::default();
        for family in [Family::Spray, Family::Blowup] {
            let chart = GroupoidChart::new(family, std_omega2()).unwrap();
            let mut sampler = Sampler::new(5);
            let rep = check_volume_normalization(&chart, 40, &mut sampler, &tol, family.tag());
            assert!(rep.pass, "{rep}");
        }
    }

    #[test]
    fn multiplicativity_of_symplectic_forms() {
        let tol = ToleranceProfile::default();
        for family in [Family::Spray, Family::Blowup] {
            let chart = GroupoidChart::new(family, std_omega2()).unwrap();
            let mut sampler = Sampler::new(13);
            let rep = check_multiplicativity(&chart, 20, &mut sampler, &tol, family.tag());
            assert!(rep.pass, "{rep}");
        }
    }

    #[test]
    fn identity_pairs_have_zero_multiplicativity_defect() {
        // At identity fibers all three pullbacks coincide; check the defect
        // directly at a handful of such pairs.
        let chart = GroupoidChart::new(Family::Blowup, std_omega2()).unwrap();
        let tol = ToleranceProfile::default();
        let d = 2;
        let x = vec![0.9, 1.4];
        let h = chart.identity_at(&x, vec![]);
        let mut q = h.flat();
        q.extend_from_slice(&vec![0.0; d]);
        // Small helper mirroring check_multiplicativity's maps.
        let h_of = |q: &[f64]| pt(Family::Blowup, q[0..d].to_vec(), q[d..2 * d].to_vec());
        let g_of = |q: &[f64]| {
            let h = h_of(q);
            pt(Family::Blowup, chart.target(&h), q[2 * d..3 * d].to_vec())
        };
        let mult = |q: &[f64]| {
            chart
                .multiply(&g_of(q), &h_of(q), 1e-6)
                .unwrap()
                .flat()
        };
        let ph = |q: &[f64]| h_of(q).flat();
        let pg = |q: &[f64]| g_of(q).flat();
        let form = |flat: &[f64]| {
            chart
                .symplectic_form(&pt(Family::Blowup, flat[0..d].to_vec(), flat[d..].to_vec()))
                .unwrap()
        };
        let jh = numerics::jacobian(&ph, &q, tol.fd_step);
        let jg = numerics::jacobian(&pg, &q, tol.fd_step);
        let jm = numerics::jacobian(&mult, &q, tol.fd_step);
        let defect = numerics::pullback_2form(&jm, &form(&mult(&q)))
            - numerics::pullback_2form(&jg, &form(&pg(&q)))
            - numerics::pullback_2form(&jh, &form(&ph(&q)));
        assert!(numerics::max_abs(&defect) < 1e-7);
    }

    #[test]
    fn anchors_push_tensors_correctly() {
        let tol = ToleranceProfile::default();
        for family in Family::ALL {
            let chart = GroupoidChart::new(family, std_omega2()).unwrap();
            let mut sampler = Sampler::new(29);
            let rep = check_anchor_poisson(&chart, 25, &mut sampler, &tol, family.tag());
            assert!(rep.pass, "{rep}");
        }
    }

    #[test]
    fn spray_flow_conserves_momenta_and_composes() {
        let chart = GroupoidChart::new(Family::Spray, std_omega2()).unwrap();
        let p = pt(Family::Spray, vec![0.8, 1.6], vec![0.4, -0.9]);
        let same = spray_flow(&chart, &p, 0.0).unwrap();
        assert_eq!(same.base, p.base);
        let moved = spray_flow(&chart, &p, 7.3).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(
                moved.base[i] * moved.fiber[i],
                p.base[i] * p.fiber[i],
                epsilon = 1e-14
            );
        }
        // phi^s phi^t = phi^{s+t}.
        let a = spray_flow(&chart, &spray_flow(&chart, &p, 0.7).unwrap(), 0.55).unwrap();
        let b = spray_flow(&chart, &p, 1.25).unwrap();
        assert!(rel_diff(&a.base, &b.base) < 1e-12);
        assert!(rel_diff(&a.fiber, &b.fiber) < 1e-12);
        // exp is the time-one flow.
        let e = exp_map(&chart, &p).unwrap();
        let f = spray_flow(&chart, &p, 1.0).unwrap();
        assert_eq!(e, f);
    }

    #[test]
    fn connecting_maps_hand_values_and_composition() {
        let p = pt(Family::Spray, vec![1.0, 1.0], vec![1.0, 0.0]);
        let k = kappa(&p).unwrap();
        assert_abs_diff_eq!(k.fiber[0], std::f64::consts::E - 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(k.fiber[1], 0.0, epsilon = 1e-15);
        let l = lambda(&p).unwrap();
        assert_abs_diff_eq!(l.fiber[0], std::f64::consts::E, epsilon = 1e-14);
        assert_abs_diff_eq!(l.fiber[1], 1.0, epsilon = 1e-15);
        let nk = nu(&kappa(&p).unwrap()).unwrap();
        assert_eq!(nk.fiber.len(), l.fiber.len());
        for (a, b) in nk.fiber.iter().zip(&l.fiber) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
        // Zero fiber maps to identity fibers everywhere.
        let z = pt(Family::Spray, vec![0.4, 2.0], vec![0.0, 0.0]);
        assert_eq!(kappa(&z).unwrap().fiber, vec![0.0, 0.0]);
        assert_eq!(lambda(&z).unwrap().fiber, vec![1.0, 1.0]);
        // kappa through the x = 0 hyperplane takes the limit value p.
        let b = pt(Family::Spray, vec![0.0, 1.0], vec![0.3, 0.2]);
        assert_abs_diff_eq!(kappa(&b).unwrap().fiber[0], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn connecting_maps_intertwine_structure() {
        let omega = std_omega2();
        let gchart = GroupoidChart::new(Family::Spray, omega.clone()).unwrap();
        let bchart = GroupoidChart::new(Family::Blowup, omega.clone()).unwrap();
        let dchart = GroupoidChart::new(Family::Double, omega).unwrap();
        let mut sampler = Sampler::new(41);
        for _ in 0..40 {
            let p = sampler.family_point(&gchart);
            let bk = kappa(&p).unwrap();
            let dl = lambda(&p).unwrap();
            // Targets agree through the morphisms.
            assert!(rel_diff(&bchart.target(&bk), &gchart.target(&p)) < 1e-10);
            assert!(rel_diff(&dchart.target(&dl), &gchart.target(&p)) < 1e-10);
            // nu . kappa = lambda exactly in closed form.
            let nk = nu(&bk).unwrap();
            assert!(rel_diff(&nk.fiber, &dl.fiber) < 1e-13);
            // Morphisms respect multiplication on a constructed pair.
            let h = p.clone();
            let g = sampler.point_over(&gchart, &gchart.target(&h), &h.z, &[]);
            let gh = gchart.multiply(&g, &h, 1e-9).unwrap();
            let lifted = dchart
                .multiply(&lambda(&g).unwrap(), &lambda(&h).unwrap(), 1e-7)
                .unwrap();
            assert!(point_rel_diff(&lambda(&gh).unwrap(), &lifted) < 1e-10);
        }
    }

    fn a2_pair() -> CompatiblePair {
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

    #[test]
    fn ensemble_comorphism_examples() {
        let pair = a2_pair();
        // Identity section: zero X-fiber pulls to zero A-fiber.
        let p = ensemble_comorphism(&pair, Family::Spray, &[1.3, 0.7], &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![0.0, 0.0]);
        // Double family with t = (2,3): s_1 = t_2 = 3, s_2 = 1/t_1 = 1/2.
        let s = ensemble_comorphism(&pair, Family::Double, &[1.0, 1.0], &[2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(s[0], 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ensemble_morphism_identity_branch_and_intertwining() {
        let pair = a2_pair();
        // s = 1 maps to t = 1; u = 0 to v = 0; p = 0 to q = 0.
        for family in Family::ALL {
            let chart_a = GroupoidChart::for_pair(&pair, family, Side::A);
            let id_fiber = chart_a.identity_at(&[0.9, 1.7], vec![]).fiber;
            let p = pt(family, vec![0.9, 1.7], id_fiber.clone());
            let lifted = ensemble_morphism(&pair, &p).unwrap();
            assert!(rel_diff(&lifted.fiber, &id_fiber) < 1e-14);
        }
        // beta_X(rho(g)) = rho(beta_A(g)) on samples, all families.
        let mut sampler = Sampler::new(59);
        for family in Family::ALL {
            let chart_a = GroupoidChart::for_pair(&pair, family, Side::A);
            let chart_x = GroupoidChart::for_pair(&pair, family, Side::X);
            for _ in 0..25 {
                let g = sampler.family_point(&chart_a);
                let lifted = ensemble_morphism(&pair, &g).unwrap();
                let beta_then_rho: Vec<f64> = {
                    let bx = chart_a.target(&g);
                    (0..2)
                        .map(|k| {
                            bx[0].powi(crate::charts::b_int(&pair, 0, k) as i32)
                                * bx[1].powi(crate::charts::b_int(&pair, 1, k) as i32)
                        })
                        .collect()
                };
                let rho_then_beta = chart_x.target(&lifted);
                assert!(
                    rel_diff(&rho_then_beta, &beta_then_rho) < 1e-10,
                    "{family:?}"
                );
            }
        }
    }

    #[test]
    fn ensemble_comorphism_intertwines_targets() {
        // rho(beta_A(P(x, xi))) = beta_X(xi over rho(x)) for all families.
        let pair = a2_pair();
        let mut sampler = Sampler::new(61);
        for family in Family::ALL {
            let chart_a = GroupoidChart::for_pair(&pair, family, Side::A);
            let chart_x = GroupoidChart::for_pair(&pair, family, Side::X);
            for _ in 0..25 {
                let base_a = sampler.base(2);
                let y: Vec<f64> = (0..2)
                    .map(|k| {
                        base_a[0].powi(crate::charts::b_int(&pair, 0, k) as i32)
                            * base_a[1].powi(crate::charts::b_int(&pair, 1, k) as i32)
                    })
                    .collect();
                let xf = sampler.fiber(family, &y);
                let xpt = pt(family, y.clone(), xf.clone());
                let af = ensemble_comorphism(&pair, family, &base_a, &xf).unwrap();
                let apt = pt(family, base_a.clone(), af);
                let beta_a = chart_a.target(&apt);
                let lhs: Vec<f64> = (0..2)
                    .map(|k| {
                        beta_a[0].powi(crate::charts::b_int(&pair, 0, k) as i32)
                            * beta_a[1].powi(crate::charts::b_int(&pair, 1, k) as i32)
                    })
                    .collect();
                let rhs = chart_x.target(&xpt);
                assert!(rel_diff(&lhs, &rhs) < 1e-9, "{family:?}");
            }
        }
    }
}
