//! Sparse exact multivariate Laurent polynomials, exchange polynomials with
//! their star-involution, F-polynomial recursion and the symbolic
//! separation-of-additions and Laurent-phenomenon checks.

use crate::exchange::{fmt_rat, IMat};
use crate::report::VerificationReport;
use crate::trace::MutationTrace;
use crate::{Error, Int, Rat, Result};
use num::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;

/// Variable registry shared by every symbolic object around one seed.
///
/// Layout: `x_1..x_m | y_1..y_n | u_1..u_n | z_{l,j}` flattened. Keeping all
/// variables in a single table keeps exponent vectors compatible across the
/// A-side, the X-side and the F-polynomial ring.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarTable {
    pub m: usize,
    pub n: usize,
    pub r: Vec<usize>,
    names: Vec<String>,
    z_offset: Vec<usize>,
}

impl VarTable {
    pub fn new(m: usize, n: usize, r: &[usize]) -> Self {
        let mut names = Vec::new();
        for i in 1..=m {
            names.push(format!("x{i}"));
        }
        for l in 1..=n {
            names.push(format!("y{l}"));
        }
        for l in 1..=n {
            names.push(format!("u{l}"));
        }
        let mut z_offset = Vec::with_capacity(n);
        for l in 1..=n {
            z_offset.push(names.len());
            for j in 1..r[l - 1] {
                names.push(format!("z{l}_{j}"));
            }
        }
        VarTable {
            m,
            n,
            r: r.to_vec(),
            names,
            z_offset,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Slot of x_i, 0-based i.
    pub fn x(&self, i: usize) -> usize {
        i
    }

    /// Slot of y_l, 0-based l.
    pub fn y(&self, l: usize) -> usize {
        self.m + l
    }

    /// Slot of u_l, 0-based l.
    pub fn u(&self, l: usize) -> usize {
        self.m + self.n + l
    }

    /// Slot of z_{l,j}, 0-based l, 1-based j in 1..r_l.
    pub fn z(&self, l: usize, j: usize) -> usize {
        debug_assert!(j >= 1 && j < self.r[l]);
        self.z_offset[l] + (j - 1)
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    fn u_slots(&self) -> std::ops::Range<usize> {
        self.m + self.n..self.m + 2 * self.n
    }

    fn z_slots(&self) -> std::ops::Range<usize> {
        self.m + 2 * self.n..self.len()
    }
}

/// Sparse Laurent polynomial: exponent vectors over a fixed registry mapped
/// to nonzero rational coefficients. The BTreeMap keeps terms in lexicographic
/// exponent order, so equality is structural and printing is canonical.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaurentPoly {
    nvars: usize,
    terms: BTreeMap<Vec<i32>, Rat>,
}

impl LaurentPoly {
    pub fn zero(nvars: usize) -> Self {
        LaurentPoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Rat::one())
    }

    pub fn constant(nvars: usize, c: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(vec![0; nvars], c);
        }
        LaurentPoly { nvars, terms }
    }

    pub fn var(nvars: usize, idx: usize) -> Self {
        let mut exp = vec![0; nvars];
        exp[idx] = 1;
        Self::monomial(exp, Rat::one())
    }

    pub fn monomial(exp: Vec<i32>, coeff: Rat) -> Self {
        let nvars = exp.len();
        let mut terms = BTreeMap::new();
        if !coeff.is_zero() {
            terms.insert(exp, coeff);
        }
        LaurentPoly { nvars, terms }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .iter()
                .all(|(e, c)| e.iter().all(|&x| x == 0) && c.is_one())
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }

    fn insert(&mut self, exp: Vec<i32>, coeff: Rat) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(exp) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get() + coeff;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &LaurentPoly) -> LaurentPoly {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert(e.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> LaurentPoly {
        LaurentPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c.clone())).collect(),
        }
    }

    pub fn mul(&self, other: &LaurentPoly) -> LaurentPoly {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = LaurentPoly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exp: Vec<i32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.insert(exp, ca * cb);
            }
        }
        out
    }

    pub fn mul_monomial(&self, exp: &[i32], coeff: &Rat) -> LaurentPoly {
        let mut out = LaurentPoly::zero(self.nvars);
        for (e, c) in &self.terms {
            out.insert(e.iter().zip(exp).map(|(a, b)| a + b).collect(), c * coeff);
        }
        out
    }

    pub fn pow(&self, k: u32) -> LaurentPoly {
        let mut acc = LaurentPoly::one(self.nvars);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Minimum exponent of each variable over all terms (0 for the zero
    /// polynomial).
    fn min_exponents(&self) -> Vec<i32> {
        let mut mins = vec![i32::MAX; self.nvars];
        for e in self.terms.keys() {
            for (m, &v) in mins.iter_mut().zip(e) {
                *m = (*m).min(v);
            }
        }
        if self.terms.is_empty() {
            mins.fill(0);
        }
        mins
    }

    pub fn min_exponent_over(&self, slots: std::ops::Range<usize>) -> i32 {
        let mins = self.min_exponents();
        slots.map(|s| mins[s]).min().unwrap_or(0)
    }

    /// Exact division; errors if `other` does not divide `self` exactly.
    pub fn exact_div(&self, other: &LaurentPoly) -> Result<LaurentPoly> {
        debug_assert_eq!(self.nvars, other.nvars);
        if other.is_zero() {
            return Err(Error::InexactDivision);
        }
        if self.is_zero() {
            return Ok(LaurentPoly::zero(self.nvars));
        }
        // Shift both operands into the ordinary polynomial ring. The minimum
        // exponent of a product is the sum of minimum exponents, so an exact
        // Laurent quotient shifts back by the difference.
        let smin = self.min_exponents();
        let omin = other.min_exponents();
        let shift = |p: &LaurentPoly, mins: &[i32]| -> BTreeMap<Vec<i32>, Rat> {
            p.terms
                .iter()
                .map(|(e, c)| {
                    (
                        e.iter().zip(mins).map(|(a, b)| a - b).collect(),
                        c.clone(),
                    )
                })
                .collect()
        };
        let mut rem = shift(self, &smin);
        let den = shift(other, &omin);
        let (dlead, dcoef) = den.iter().next_back().map(|(e, c)| (e.clone(), c.clone())).unwrap();
        let mut quo: BTreeMap<Vec<i32>, Rat> = BTreeMap::new();
        while let Some((rlead, rcoef)) = rem.iter().next_back().map(|(e, c)| (e.clone(), c.clone()))
        {
            let mut t = vec![0i32; self.nvars];
            for i in 0..self.nvars {
                let d = rlead[i] - dlead[i];
                if d < 0 {
                    return Err(Error::InexactDivision);
                }
                t[i] = d;
            }
            let c = &rcoef / &dcoef;
            for (e, dc) in &den {
                let exp: Vec<i32> = e.iter().zip(&t).map(|(a, b)| a + b).collect();
                let delta = -( &c * dc );
                match rem.entry(exp) {
                    std::collections::btree_map::Entry::Vacant(v) => {
                        if !delta.is_zero() {
                            v.insert(delta);
                        }
                    }
                    std::collections::btree_map::Entry::Occupied(mut o) => {
                        let sum = o.get() + delta;
                        if sum.is_zero() {
                            o.remove();
                        } else {
                            *o.get_mut() = sum;
                        }
                    }
                }
            }
            quo.insert(t, c);
        }
        let out_shift: Vec<i32> = smin.iter().zip(&omin).map(|(a, b)| a - b).collect();
        let terms = quo
            .into_iter()
            .map(|(e, c)| (e.iter().zip(&out_shift).map(|(a, b)| a + b).collect(), c))
            .collect();
        Ok(LaurentPoly {
            nvars: self.nvars,
            terms,
        })
    }

    /// Substitutes monomials for variables: each `(slot, exponent_vector)`
    /// replaces that variable by the unit-coefficient monomial.
    pub fn subst_monomials(&self, subs: &[(usize, Vec<i32>)]) -> LaurentPoly {
        let mut out = LaurentPoly::zero(self.nvars);
        for (e, c) in &self.terms {
            let mut exp = e.clone();
            for (slot, mono) in subs {
                let k = exp[*slot];
                if k == 0 {
                    continue;
                }
                exp[*slot] = 0;
                for (i, &me) in mono.iter().enumerate() {
                    exp[i] += k * me;
                }
            }
            out.insert(exp, c.clone());
        }
        out
    }

    pub fn eval_f64(&self, vals: &[f64]) -> f64 {
        debug_assert_eq!(vals.len(), self.nvars);
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut term = c.to_f64().expect("coefficient out of f64 range");
            for (i, &p) in e.iter().enumerate() {
                if p != 0 {
                    term *= vals[i].powi(p);
                }
            }
            acc += term;
        }
        acc
    }

    /// The part of the polynomial whose exponents vanish on `slots`
    /// (e.g. the constant term with respect to the u-variables).
    pub fn constant_part_over(&self, slots: std::ops::Range<usize>) -> LaurentPoly {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| slots.clone().all(|s| e[s] == 0))
            .map(|(e, c)| (e.clone(), c.clone()))
            .collect();
        LaurentPoly {
            nvars: self.nvars,
            terms,
        }
    }

    /// Canonical text: terms in ascending exponent order with explicit
    /// exponents, e.g. `1 + 3/2*x1^-1*x2 + x1*x2`.
    pub fn canonical_text(&self, vars: &VarTable) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (idx, (e, c)) in self.terms.iter().enumerate() {
            let mut factors: Vec<String> = Vec::new();
            for (i, &p) in e.iter().enumerate() {
                if p == 1 {
                    factors.push(vars.name(i).to_string());
                } else if p != 0 {
                    factors.push(format!("{}^{}", vars.name(i), p));
                }
            }
            let abs = c.abs();
            let coeff_txt = fmt_rat(&abs);
            let body = if factors.is_empty() {
                coeff_txt
            } else if abs.is_one() {
                factors.join("*")
            } else {
                format!("{}*{}", coeff_txt, factors.join("*"))
            };
            if idx == 0 {
                if c.is_negative() {
                    out.push_str("-");
                }
            } else if c.is_negative() {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            out.push_str(&body);
        }
        out
    }
}

/// A quotient of Laurent polynomials. Exact division is attempted eagerly on
/// construction; when it fails the pair is kept and equality is decided by
/// cross-multiplication.
#[derive(Clone, Debug)]
pub struct LaurentRatio {
    pub num: LaurentPoly,
    pub den: LaurentPoly,
}

impl LaurentRatio {
    pub fn new(num: LaurentPoly, den: LaurentPoly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InexactDivision);
        }
        if let Ok(q) = num.exact_div(&den) {
            return Ok(LaurentRatio {
                den: LaurentPoly::one(q.nvars()),
                num: q,
            });
        }
        Ok(LaurentRatio { num, den })
    }

    pub fn from_poly(p: LaurentPoly) -> Self {
        let n = p.nvars();
        LaurentRatio {
            num: p,
            den: LaurentPoly::one(n),
        }
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn mul(&self, other: &LaurentRatio) -> Result<LaurentRatio> {
        LaurentRatio::new(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    pub fn add(&self, other: &LaurentRatio) -> Result<LaurentRatio> {
        let num = self.num.mul(&other.den).add(&other.num.mul(&self.den));
        LaurentRatio::new(num, self.den.mul(&other.den))
    }

    pub fn inv(&self) -> Result<LaurentRatio> {
        if self.num.is_zero() {
            return Err(Error::InexactDivision);
        }
        LaurentRatio::new(self.den.clone(), self.num.clone())
    }

    pub fn pow_i(&self, k: i64) -> Result<LaurentRatio> {
        let mut acc = LaurentRatio::from_poly(LaurentPoly::one(self.num.nvars()));
        let base = if k >= 0 { self.clone() } else { self.inv()? };
        for _ in 0..k.unsigned_abs() {
            acc = acc.mul(&base)?;
        }
        Ok(acc)
    }

    pub fn eq_ratio(&self, other: &LaurentRatio) -> bool {
        self.num.mul(&other.den) == other.num.mul(&self.den)
    }

    pub fn eq_poly(&self, other: &LaurentPoly) -> bool {
        self.num == other.mul(&self.den)
    }
}

/// Coefficient of an exchange polynomial: the unit endpoints, a formal z
/// variable, or an exact rational value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ZCoeff {
    One,
    Var(usize),
    Val(Rat),
}

impl ZCoeff {
    fn to_poly(&self, nvars: usize) -> LaurentPoly {
        match self {
            ZCoeff::One => LaurentPoly::one(nvars),
            ZCoeff::Var(slot) => LaurentPoly::var(nvars, *slot),
            ZCoeff::Val(v) => LaurentPoly::constant(nvars, v.clone()),
        }
    }

    pub fn to_f64(&self, zvals: Option<f64>) -> f64 {
        match self {
            ZCoeff::One => 1.0,
            ZCoeff::Var(_) => zvals.expect("formal z coefficient needs a numeric value"),
            ZCoeff::Val(v) => v.to_f64().unwrap(),
        }
    }
}

/// A monic exchange polynomial `Z(w) = 1 + z_1 w + ... + z_{r-1} w^{r-1} + w^r`
/// in one direction. `coeffs` has length r+1 with unit endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExchangePoly {
    pub dir: usize,
    pub r: usize,
    pub coeffs: Vec<ZCoeff>,
}

impl ExchangePoly {
    pub fn new(dir: usize, middle: Vec<ZCoeff>) -> Self {
        let r = middle.len() + 1;
        let mut coeffs = Vec::with_capacity(r + 1);
        coeffs.push(ZCoeff::One);
        coeffs.extend(middle);
        coeffs.push(ZCoeff::One);
        ExchangePoly { dir, r, coeffs }
    }

    /// The star involution reverses the coefficient list:
    /// `Z*(w) = w^r Z(1/w)`.
    pub fn star(&self) -> ExchangePoly {
        let mut coeffs = self.coeffs.clone();
        coeffs.reverse();
        ExchangePoly {
            dir: self.dir,
            r: self.r,
            coeffs,
        }
    }

    pub fn coeff_poly(&self, t: usize, nvars: usize) -> LaurentPoly {
        self.coeffs[t].to_poly(nvars)
    }
}

/// F-polynomials of all m cluster variables at one vertex, in the u/z part
/// of the registry. Entries for frozen directions stay equal to 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FPolyFamily {
    pub polys: Vec<LaurentPoly>,
}

impl FPolyFamily {
    pub fn seed(m: usize, nvars: usize) -> Self {
        FPolyFamily {
            polys: vec![LaurentPoly::one(nvars); m],
        }
    }
}

/// A mutation trace together with its symbolic data: the variable registry,
/// the initial exchange matrix, the exchange polynomials of the seed and the
/// current F-polynomials.
#[derive(Clone, Debug)]
pub struct SeedState {
    pub vars: VarTable,
    pub trace: MutationTrace,
    pub b0: IMat,
    pub zpolys: Vec<ExchangePoly>,
    pub fpolys: FPolyFamily,
}

/// How each formal z coefficient of the seed is initialised.
#[derive(Clone, Debug, PartialEq)]
pub enum ZInit {
    Symbolic,
    Value(Rat),
}

impl SeedState {
    /// `zinit[l]` holds the r_l - 1 middle coefficients of direction l+1.
    pub fn new(trace: MutationTrace, zinit: &[Vec<ZInit>]) -> Result<Self> {
        let ex = &trace.pair.exchange;
        if zinit.len() != ex.n {
            return Err(Error::Dimension("z coefficients must cover all n directions".into()));
        }
        let vars = VarTable::new(ex.m, ex.n, &ex.r);
        let mut zpolys = Vec::with_capacity(ex.n);
        for (l, middle) in zinit.iter().enumerate() {
            if middle.len() + 1 != ex.r[l] {
                return Err(Error::Dimension(format!(
                    "direction {} needs {} z coefficients, got {}",
                    l + 1,
                    ex.r[l] - 1,
                    middle.len()
                )));
            }
            let coeffs = middle
                .iter()
                .enumerate()
                .map(|(j0, init)| match init {
                    ZInit::Symbolic => ZCoeff::Var(vars.z(l, j0 + 1)),
                    ZInit::Value(v) => ZCoeff::Val(v.clone()),
                })
                .collect();
            zpolys.push(ExchangePoly::new(l, coeffs));
        }
        let fpolys = FPolyFamily::seed(ex.m, vars.len());
        let b0 = ex.b.clone();
        Ok(SeedState {
            vars,
            trace,
            b0,
            zpolys,
            fpolys,
        })
    }

    /// Exchange polynomial of direction `k0` (0-based) at the current vertex:
    /// the seed polynomial star-flipped once per mutation in that direction.
    pub fn vertex_zpoly(&self, k0: usize) -> ExchangePoly {
        if self.trace.z_parity[k0] {
            self.zpolys[k0].star()
        } else {
            self.zpolys[k0].clone()
        }
    }

    /// Mutates the F-polynomials and then the trace in direction `k`
    /// (1-based), always at the tropical sign.
    pub fn step(&mut self, k: usize) -> Result<()> {
        self.fpolys = self.mutated_fpolys(k)?;
        self.trace = self.trace.mutate(k)?;
        Ok(())
    }

    pub fn walk(&mut self, path: &[usize]) -> Result<()> {
        for &k in path {
            self.step(k)?;
        }
        Ok(())
    }

    /// One F-polynomial mutation step. Only entry k changes:
    ///
    /// F'_k = ( sum_t zo_t * prod_l u_l^(eps t C_lk) * prod_l F_l^(eps t B_lk + M_l) ) / F_k,
    ///
    /// with M_l = [-eps r_k B_lk]_+ so that every F exponent in the numerator
    /// is non-negative; the final division is exact.
    fn mutated_fpolys(&self, k: usize) -> Result<FPolyFamily> {
        let eps = self.trace.tropical_sign(k)? as i64;
        let kk = k - 1;
        let ex = &self.trace.pair.exchange;
        let (m, n) = (ex.m, ex.n);
        let nv = self.vars.len();
        let rk = ex.r[kk] as i64;
        let to_i64 = |v: &Int| v.to_i64().expect("matrix entry out of i64 range");

        let zpoly = {
            let vertex = self.vertex_zpoly(kk);
            if eps < 0 {
                vertex.star()
            } else {
                vertex
            }
        };

        let b_col: Vec<i64> = (0..m).map(|i| to_i64(&ex.b[(i, kk)])).collect();
        let c_col: Vec<i64> = (0..n).map(|l| to_i64(&self.trace.c[(l, kk)])).collect();
        let margins: Vec<i64> = b_col.iter().map(|&b| (-eps * rk * b).max(0)).collect();

        let mut numerator = LaurentPoly::zero(nv);
        for t in 0..=(rk as usize) {
            let ti = t as i64;
            let mut mono = vec![0i32; nv];
            for l in 0..n {
                mono[self.vars.u(l)] = (eps * ti * c_col[l]) as i32;
            }
            let mut term = zpoly.coeff_poly(t, nv).mul_monomial(&mono, &Rat::one());
            for l in 0..m {
                let e = eps * ti * b_col[l] + margins[l];
                debug_assert!(e >= 0);
                if e > 0 {
                    term = term.mul(&self.fpolys.polys[l].pow(e as u32));
                }
            }
            numerator = numerator.add(&term);
        }
        let new_fk = numerator.exact_div(&self.fpolys.polys[kk])?;
        let mut polys = self.fpolys.polys.clone();
        polys[kk] = new_fk;
        Ok(FPolyFamily { polys })
    }

    /// Checks the F-polynomial invariants at the current vertex: genuine
    /// polynomials in u and z with constant term exactly 1, and frozen
    /// entries equal to 1.
    pub fn fpoly_invariants(&self) -> Result<()> {
        let v = &self.vars;
        for (j, f) in self.fpolys.polys.iter().enumerate() {
            if j >= v.n && !f.is_one() {
                return Err(Error::Domain(format!("frozen F_{} differs from 1", j + 1)));
            }
            if f.min_exponent_over(v.u_slots()) < 0 || f.min_exponent_over(v.z_slots()) < 0 {
                return Err(Error::Domain(format!(
                    "F_{} is not polynomial in u and z",
                    j + 1
                )));
            }
            if !f.constant_part_over(v.u_slots()).is_one() {
                return Err(Error::Domain(format!(
                    "F_{} does not have constant term 1",
                    j + 1
                )));
            }
        }
        Ok(())
    }
}

/// The Laurent monomials `yhat_k = prod_i x_i^{B_ik}` of the trace's current
/// exchange matrix.
pub fn yhat(trace: &MutationTrace, vars: &VarTable) -> Vec<LaurentPoly> {
    let ex = &trace.pair.exchange;
    (0..ex.n)
        .map(|k| {
            let mut exp = vec![0i32; vars.len()];
            for i in 0..ex.m {
                exp[vars.x(i)] = ex.b[(i, k)].to_i32().expect("exponent out of range");
            }
            LaurentPoly::monomial(exp, Rat::one())
        })
        .collect()
}

fn yhat0_exponents(state: &SeedState) -> Vec<Vec<i32>> {
    let ex = &state.trace.pair.exchange;
    (0..ex.n)
        .map(|k| {
            let mut exp = vec![0i32; state.vars.len()];
            for i in 0..ex.m {
                exp[state.vars.x(i)] = state.b0[(i, k)].to_i32().unwrap();
            }
            exp
        })
        .collect()
}

/// Closed-form pullbacks of the current x-coordinates to the seed chart:
/// `x_j -> (prod_i x_i^{G_ij}) * F_j(yhat_1, ..., yhat_n)` with yhat taken at
/// the seed exchange matrix.
pub fn separation_a(state: &SeedState) -> Vec<LaurentPoly> {
    let ex = &state.trace.pair.exchange;
    let v = &state.vars;
    let yhat0 = yhat0_exponents(state);
    let subs: Vec<(usize, Vec<i32>)> = (0..ex.n).map(|l| (v.u(l), yhat0[l].clone())).collect();
    (0..ex.m)
        .map(|j| {
            let mut exp = vec![0i32; v.len()];
            for i in 0..ex.m {
                exp[v.x(i)] = state.trace.g[(i, j)].to_i32().unwrap();
            }
            state.fpolys.polys[j]
                .subst_monomials(&subs)
                .mul_monomial(&exp, &Rat::one())
        })
        .collect()
}

/// Closed-form pullbacks of the current y-coordinates to the seed chart:
/// `y_l -> prod_k y_k^{C_kl} F_k(y_1, ..., y_n)^{B_kl}`.
pub fn separation_x(state: &SeedState) -> Result<Vec<LaurentRatio>> {
    let ex = &state.trace.pair.exchange;
    let v = &state.vars;
    let subs: Vec<(usize, Vec<i32>)> = (0..ex.n)
        .map(|l| {
            let mut e = vec![0i32; v.len()];
            e[v.y(l)] = 1;
            (v.u(l), e)
        })
        .collect();
    let f_at_y: Vec<LaurentPoly> = (0..ex.n)
        .map(|k| state.fpolys.polys[k].subst_monomials(&subs))
        .collect();
    let mut out = Vec::with_capacity(ex.n);
    for l in 0..ex.n {
        let mut acc = LaurentRatio::from_poly(LaurentPoly::one(v.len()));
        let mut mono = vec![0i32; v.len()];
        for k in 0..ex.n {
            mono[v.y(k)] = state.trace.c[(k, l)].to_i32().unwrap();
        }
        acc = acc.mul(&LaurentRatio::from_poly(LaurentPoly::monomial(
            mono,
            Rat::one(),
        )))?;
        for k in 0..ex.n {
            let b = ex.b[(k, l)].to_i64().unwrap();
            if b != 0 {
                acc = acc.mul(&LaurentRatio::from_poly(f_at_y[k].clone()).pow_i(b)?)?;
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Step-by-step symbolic mutation of both chart coordinate systems alongside
/// the trace; the independent route the separation formulas are checked
/// against.
#[derive(Clone, Debug)]
pub struct SymbolicWalker {
    pub state: SeedState,
    /// A-side coordinates as Laurent polynomials in the seed variables.
    pub xs: Vec<LaurentPoly>,
    /// X-side coordinates as rational expressions in the seed variables.
    pub ys: Vec<LaurentRatio>,
}

impl SymbolicWalker {
    pub fn seed(state: SeedState) -> Self {
        let v = &state.vars;
        let xs = (0..v.m)
            .map(|i| LaurentPoly::var(v.len(), v.x(i)))
            .collect();
        let ys = (0..v.n)
            .map(|l| LaurentRatio::from_poly(LaurentPoly::var(v.len(), v.y(l))))
            .collect();
        SymbolicWalker { state, xs, ys }
    }

    /// One mutation in direction `k` (1-based) at the tropical sign; updates
    /// coordinates first, then the trace and F-polynomials.
    pub fn step(&mut self, k: usize) -> Result<()> {
        let eps = self.state.trace.tropical_sign(k)? as i64;
        let kk = k - 1;
        let ex = &self.state.trace.pair.exchange;
        let (m, n) = (ex.m, ex.n);
        let nv = self.state.vars.len();
        let rk = ex.r[kk] as i64;
        let to_i64 = |v: &Int| v.to_i64().unwrap();
        let zpoly = {
            let vertex = self.state.vertex_zpoly(kk);
            if eps < 0 {
                vertex.star()
            } else {
                vertex
            }
        };

        // A-side: x'_k = (sum_t zo_t prod_i X_i^([-eps B_ik r_k]_+ + eps t B_ik)) / X_k.
        let b_col: Vec<i64> = (0..m).map(|i| to_i64(&ex.b[(i, kk)])).collect();
        let mut numerator = LaurentPoly::zero(nv);
        for t in 0..=(rk as usize) {
            let ti = t as i64;
            let mut term = zpoly.coeff_poly(t, nv);
            for i in 0..m {
                let e = (-eps * b_col[i] * rk).max(0) + eps * ti * b_col[i];
                debug_assert!(e >= 0);
                if e > 0 {
                    term = term.mul(&self.xs[i].pow(e as u32));
                }
            }
            numerator = numerator.add(&term);
        }
        let new_xk = numerator.exact_div(&self.xs[kk])?;

        // X-side: y'_k = 1/y_k and
        // y'_l = y_l y_k^([eps r_k B_kl]_+) Zo(y_k^eps)^(-B_kl).
        let mut zval = LaurentRatio::from_poly(LaurentPoly::zero(nv));
        for t in 0..=(rk as usize) {
            let term = LaurentRatio::from_poly(zpoly.coeff_poly(t, nv))
                .mul(&self.ys[kk].pow_i(eps * t as i64)?)?;
            zval = zval.add(&term)?;
        }
        let mut new_ys = Vec::with_capacity(n);
        for l in 0..n {
            if l == kk {
                new_ys.push(self.ys[kk].inv()?);
            } else {
                let bkl = to_i64(&ex.b[(kk, l)]);
                let mut y = self.ys[l].mul(&self.ys[kk].pow_i((eps * rk * bkl).max(0))?)?;
                y = y.mul(&zval.pow_i(-bkl)?)?;
                new_ys.push(y);
            }
        }

        self.xs[kk] = new_xk;
        self.ys = new_ys;
        self.state.step(k)
    }

    pub fn walk(&mut self, path: &[usize]) -> Result<()> {
        for &k in path {
            self.step(k)?;
        }
        Ok(())
    }

    /// Verifies the separation formulas and Laurent/F-polynomial invariants
    /// at the current vertex.
    pub fn check_vertex(&self) -> Result<()> {
        self.state.fpoly_invariants()?;
        let v = &self.state.vars;
        let sep_a = separation_a(&self.state);
        for (j, (mine, sep)) in self.xs.iter().zip(&sep_a).enumerate() {
            if mine != sep {
                return Err(Error::Domain(format!(
                    "separation mismatch for x_{} on path {:?}",
                    j + 1,
                    self.state.trace.path
                )));
            }
            if mine.min_exponent_over(v.z_slots()) < 0 {
                return Err(Error::Domain(format!(
                    "x_{} has non-polynomial z coefficients",
                    j + 1
                )));
            }
        }
        let sep_x = separation_x(&self.state)?;
        for (l, (mine, sep)) in self.ys.iter().zip(&sep_x).enumerate() {
            if !mine.eq_ratio(sep) {
                return Err(Error::Domain(format!(
                    "separation mismatch for y_{} on path {:?}",
                    l + 1,
                    self.state.trace.path
                )));
            }
        }
        Ok(())
    }
}

/// Walks every reduced path of length up to `max_len` from the seed,
/// verifying the Laurent phenomenon and separation formulas at each vertex.
pub fn laurent_phenomenon_check(seed: &SeedState, max_len: usize) -> VerificationReport {
    let n = seed.vars.n;
    let mut vertices = 0usize;
    let mut failure: Option<String> = None;

    fn recurse(
        walker: &SymbolicWalker,
        depth: usize,
        last: Option<usize>,
        n: usize,
        vertices: &mut usize,
        failure: &mut Option<String>,
    ) {
        if failure.is_some() {
            return;
        }
        *vertices += 1;
        if let Err(e) = walker.check_vertex() {
            *failure = Some(e.to_string());
            return;
        }
        if depth == 0 {
            return;
        }
        for k in 1..=n {
            if Some(k) == last {
                continue;
            }
            let mut next = walker.clone();
            match next.step(k) {
                Ok(()) => recurse(&next, depth - 1, Some(k), n, vertices, failure),
                Err(e) => {
                    *failure = Some(format!("step {k} failed: {e}"));
                    return;
                }
            }
        }
    }

    let walker = SymbolicWalker::seed(seed.clone());
    recurse(&walker, max_len, None, n, &mut vertices, &mut failure);
    let pass = failure.is_none();
    let notes = match failure {
        None => format!("all reduced paths of length <= {max_len}"),
        Some(msg) => msg,
    };
    VerificationReport::exact("laurent-phenomenon", vertices, pass, notes)
}
