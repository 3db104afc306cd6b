//! Prepackaged verification suites: each assembles the checks of one theme
//! over a given compatible pair and exchange-coefficient data, returning a
//! structured report set. The command-line driver dispatches to these.

use crate::charts::{self, ChartPoint, ChartWalker, Side};
use crate::exchange::CompatiblePair;
use crate::groupoids::{self, Family, GroupoidChart};
use crate::laurent::{self, SeedState, ZInit};
use crate::lifted::{self, GroupoidWalker};
use crate::numerics;
use crate::report::{ReportSet, ToleranceProfile, VerificationReport};
use crate::sample::Sampler;
use crate::trace::MutationTrace;
use crate::{Error, Result};

/// A compatible pair with its exchange-coefficient data in both symbolic and
/// numeric form. Symbolic coefficients stay formal in Laurent checks; their
/// numeric stand-ins are used by the double-precision sweeps.
#[derive(Clone, Debug)]
pub struct Instance {
    pub pair: CompatiblePair,
    pub zinit: Vec<Vec<ZInit>>,
    pub zvals: Vec<Vec<f64>>,
}

impl Instance {
    /// Classical instance: every exchange polynomial is 1 + u.
    pub fn classical(pair: CompatiblePair) -> Self {
        let n = pair.exchange.n;
        Instance {
            pair,
            zinit: vec![Vec::new(); n],
            zvals: vec![Vec::new(); n],
        }
    }

    pub fn new(pair: CompatiblePair, zinit: Vec<Vec<ZInit>>, seed: u64) -> Result<Self> {
        let mut sampler = Sampler::new(seed ^ 0x5eed_2a11);
        if zinit.len() != pair.exchange.n {
            return Err(Error::Dimension("z data must cover all n directions".into()));
        }
        let mut zvals = Vec::with_capacity(zinit.len());
        for (l, coeffs) in zinit.iter().enumerate() {
            if coeffs.len() + 1 != pair.exchange.r[l] {
                return Err(Error::Dimension(format!(
                    "direction {} needs {} coefficients, got {}",
                    l + 1,
                    pair.exchange.r[l] - 1,
                    coeffs.len()
                )));
            }
            let vals = coeffs
                .iter()
                .map(|c| match c {
                    ZInit::Value(v) => crate::exchange::rat_to_f64(v),
                    ZInit::Symbolic => sampler.uniform(0.6, 1.8),
                })
                .collect();
            zvals.push(vals);
        }
        Ok(Instance { pair, zinit, zvals })
    }

    pub fn seed_state(&self) -> Result<SeedState> {
        SeedState::new(MutationTrace::seed(self.pair.clone()), &self.zinit)
    }

    fn chart_point(&self, side: Side, coords: Vec<f64>) -> ChartPoint {
        ChartPoint::new(side, coords, self.zvals.clone()).expect("positive sample")
    }
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub samples: usize,
    pub seed: u64,
    pub tol: ToleranceProfile,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            samples: 100,
            seed: 20260810,
            tol: ToleranceProfile::default(),
        }
    }
}

fn side_tag(side: Side) -> &'static str {
    match side {
        Side::A => "A",
        Side::X => "X",
    }
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs() / y.abs().max(1.0)))
}

/// Groupoid axioms for all six charts of the instance, plus the same sweep
/// over freshly drawn random rank-2 and rank-3 compatible pairs, plus the
/// connecting-map and ensemble-lift identity checks.
pub fn suite_axioms(inst: &Instance, cfg: &VerifyConfig) -> ReportSet {
    let mut out = ReportSet::default();
    let mut sampler = Sampler::new(cfg.seed);
    let mut sweep = |pair: &CompatiblePair, label: &str, sampler: &mut Sampler| {
        for side in [Side::A, Side::X] {
            for family in Family::ALL {
                let chart = GroupoidChart::for_pair(pair, family, side);
                out.push(groupoids::check_axioms(
                    &chart,
                    &pair.exchange.r,
                    cfg.samples,
                    sampler,
                    &cfg.tol,
                    format!("{label}, {} side, seed={}", side_tag(side), cfg.seed),
                ));
            }
        }
    };
    sweep(&inst.pair, "scenario pair", &mut sampler);
    let rank2 = sampler.rank2_square_pair();
    sweep(&rank2, "random rank-2 pair", &mut sampler);
    let rank3 = sampler.principal_pair(3);
    sweep(&rank3, "random rank-3 principal pair", &mut sampler);

    // Connecting maps: identity preservation, nu . kappa = lambda, target
    // intertwining, and compatibility with multiplication.
    let mut max_res = 0.0f64;
    for side in [Side::A, Side::X] {
        let gchart = GroupoidChart::for_pair(&inst.pair, Family::Spray, side);
        let bchart = GroupoidChart::for_pair(&inst.pair, Family::Blowup, side);
        let dchart = GroupoidChart::for_pair(&inst.pair, Family::Double, side);
        for _ in 0..cfg.samples {
            let p = sampler.family_point(&gchart);
            let bk = groupoids::kappa(&p).expect("spray point");
            let dl = groupoids::lambda(&p).expect("spray point");
            let nk = groupoids::nu(&bk).expect("blow-up point");
            max_res = max_res.max(rel_diff(&nk.fiber, &dl.fiber));
            max_res = max_res.max(rel_diff(&bchart.target(&bk), &gchart.target(&p)));
            max_res = max_res.max(rel_diff(&dchart.target(&dl), &gchart.target(&p)));
            let g = sampler.point_over(&gchart, &gchart.target(&p), &p.z, &[]);
            let gh = gchart.multiply(&g, &p, 1e-9).expect("constructed pair");
            let lifted = dchart
                .multiply(
                    &groupoids::lambda(&g).unwrap(),
                    &groupoids::lambda(&p).unwrap(),
                    1e-7,
                )
                .expect("lifted pair");
            max_res = max_res.max(rel_diff(
                &groupoids::lambda(&gh).unwrap().fiber,
                &lifted.fiber,
            ));
        }
    }
    out.push(VerificationReport::numeric(
        "connecting-maps",
        2 * cfg.samples,
        max_res,
        cfg.tol.residual_for("axioms-spray"),
        format!("kappa/nu/lambda intertwining, seed={}", cfg.seed),
    ));

    // Ensemble lifts: comorphism and (square case) morphism respect
    // identities and targets.
    let pair = &inst.pair;
    let (m, n) = (pair.exchange.m, pair.exchange.n);
    let mut max_res = 0.0f64;
    let rho_base = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|k| {
                let mut acc = 1.0;
                for i in 0..m {
                    acc *= x[i].powi(charts::b_int(pair, i, k) as i32);
                }
                acc
            })
            .collect()
    };
    for family in Family::ALL {
        let chart_a = GroupoidChart::for_pair(pair, family, Side::A);
        let chart_x = GroupoidChart::for_pair(pair, family, Side::X);
        for _ in 0..cfg.samples {
            let base_a = sampler.base(m);
            let y = rho_base(&base_a);
            let xf = sampler.fiber(family, &y);
            let af = groupoids::ensemble_comorphism(pair, family, &base_a, &xf)
                .expect("comorphism in domain");
            let apt = crate::groupoids::GroupoidPoint::new(
                family,
                base_a.clone(),
                af,
                vec![],
                vec![],
            )
            .expect("comorphism image in domain");
            let xpt =
                crate::groupoids::GroupoidPoint::new(family, y.clone(), xf, vec![], vec![])
                    .expect("sampled point in domain");
            max_res = max_res.max(rel_diff(
                &rho_base(&chart_a.target(&apt)),
                &chart_x.target(&xpt),
            ));
            // Identity fibers pull back to identity fibers.
            let idx = chart_x.identity_at(&y, vec![]);
            let id_fiber =
                groupoids::ensemble_comorphism(pair, family, &base_a, &idx.fiber).unwrap();
            let ida = chart_a.identity_at(&base_a, vec![]);
            max_res = max_res.max(rel_diff(&id_fiber, &ida.fiber));
            if m == n {
                let g = sampler.family_point(&chart_a);
                let lifted = groupoids::ensemble_morphism(pair, &g).expect("square case");
                max_res = max_res.max(rel_diff(
                    &chart_x.target(&lifted),
                    &rho_base(&chart_a.target(&g)),
                ));
            }
        }
    }
    out.push(VerificationReport::numeric(
        "ensemble-lift",
        3 * cfg.samples,
        max_res,
        cfg.tol.residual_for("axioms-spray"),
        format!("comorphism/morphism intertwining, seed={}", cfg.seed),
    ));
    out
}

/// Multiplicativity of the symplectic forms on sampled composable pairs for
/// the spray and blow-up families (the double-family form is singular and
/// its tensor-side multiplicativity is covered by the axioms).
pub fn suite_multiplicativity(inst: &Instance, cfg: &VerifyConfig) -> ReportSet {
    let mut out = ReportSet::default();
    let mut sampler = Sampler::new(cfg.seed ^ 0x11);
    for side in [Side::A, Side::X] {
        for family in [Family::Spray, Family::Blowup] {
            let chart = GroupoidChart::for_pair(&inst.pair, family, side);
            out.push(groupoids::check_multiplicativity(
                &chart,
                cfg.samples,
                &mut sampler,
                &cfg.tol,
                format!("{} family, {} side, seed={}", family.tag(), side_tag(side), cfg.seed),
            ));
        }
    }
    out
}

/// Poisson structure checks: chart maps are Poisson under finite
/// differences, anchors push the multiplicative tensors correctly, the
/// tensors are mutual inverses, the volume normalization holds, and the
/// lifted maps are Poisson for the groupoid tensors.
pub fn suite_poisson(inst: &Instance, cfg: &VerifyConfig) -> ReportSet {
    let mut out = ReportSet::default();
    let mut sampler = Sampler::new(cfg.seed ^ 0x22);
    let pair = &inst.pair;
    let (m, n) = (pair.exchange.m, pair.exchange.n);
    let zv = inst.zvals.clone();
    let fd_samples = cfg.samples.min(25);

    // Chart-level maps.
    let a_points: Vec<Vec<f64>> = (0..fd_samples).map(|_| sampler.base(m)).collect();
    let x_points: Vec<Vec<f64>> = (0..fd_samples).map(|_| sampler.base(n)).collect();
    let mk_a = |c: &[f64]| ChartPoint::new(Side::A, c.to_vec(), zv.clone()).unwrap();
    let mk_x = |c: &[f64]| ChartPoint::new(Side::X, c.to_vec(), zv.clone()).unwrap();

    let rho_map = |c: &[f64]| charts::rho(pair, &mk_a(c)).unwrap().coords;
    out.push(charts::check_poisson_map(
        "poisson-map",
        &rho_map,
        &a_points,
        &|x| charts::chart_tensor(pair, Side::A, x),
        &|y| charts::chart_tensor(pair, Side::X, y),
        &cfg.tol,
        "ensemble map",
    ));

    for k in 1..=n {
        for eps in [1i8, -1] {
            let mutated = pair.mutate(k, eps).expect("valid direction");
            for side in [Side::A, Side::X] {
                let points = if side == Side::A { &a_points } else { &x_points };
                let mk = |c: &[f64]| match side {
                    Side::A => mk_a(c),
                    Side::X => mk_x(c),
                };
                let flow_map =
                    |c: &[f64]| charts::flow(pair, &mk(c), k, eps, 1.0).unwrap().coords;
                out.push(charts::check_poisson_map(
                    "poisson-map",
                    &flow_map,
                    points,
                    &|c| charts::chart_tensor(pair, side, c),
                    &|c| charts::chart_tensor(pair, side, c),
                    &cfg.tol,
                    format!("time-one flow, {} side, k={k}, eps={eps}", side_tag(side)),
                ));
                let trop_map =
                    |c: &[f64]| charts::tropical(pair, &mk(c), k, eps).unwrap().coords;
                out.push(charts::check_poisson_map(
                    "poisson-map",
                    &trop_map,
                    points,
                    &|c| charts::chart_tensor(pair, side, c),
                    &|c| charts::chart_tensor(&mutated, side, c),
                    &cfg.tol,
                    format!("tropical map, {} side, k={k}, eps={eps}", side_tag(side)),
                ));
                let mu_map = |c: &[f64]| charts::mutate(pair, &mk(c), k, eps).unwrap().coords;
                out.push(charts::check_poisson_map(
                    "poisson-map",
                    &mu_map,
                    points,
                    &|c| charts::chart_tensor(pair, side, c),
                    &|c| charts::chart_tensor(&mutated, side, c),
                    &cfg.tol,
                    format!("mutation, {} side, k={k}, eps={eps}", side_tag(side)),
                ));
            }
        }
    }

    // Groupoid tensors: inverse pair, volume, anchors.
    for side in [Side::A, Side::X] {
        for family in Family::ALL {
            let chart = GroupoidChart::for_pair(pair, family, side);
            let label = format!("{} family, {} side", family.tag(), side_tag(side));
            out.push(groupoids::check_tensor_inverse(
                &chart,
                cfg.samples,
                &mut sampler,
                &cfg.tol,
                label.clone(),
            ));
            out.push(groupoids::check_anchor_poisson(
                &chart,
                fd_samples,
                &mut sampler,
                &cfg.tol,
                label.clone(),
            ));
            if family != Family::Double {
                out.push(groupoids::check_volume_normalization(
                    &chart,
                    cfg.samples,
                    &mut sampler,
                    &cfg.tol,
                    label,
                ));
            }
        }
    }

    // Lifted maps are Poisson for the groupoid tensors (base + fiber block;
    // the z values act as parameters).
    let quad_tol = cfg.tol.quad_abs_tol;
    for side in [Side::A, Side::X] {
        let dim = match side {
            Side::A => m,
            Side::X => n,
        };
        for family in Family::ALL {
            let chart = GroupoidChart::for_pair(pair, family, side);
            let k = 1usize;
            let eps = 1i8;
            let mutated = pair.mutate(k, eps).unwrap();
            let chart_mut = GroupoidChart::for_pair(&mutated, family, side);
            let zc = zv.clone();
            let mk_pt = move |flat: &[f64]| crate::groupoids::GroupoidPoint {
                family,
                base: flat[0..dim].to_vec(),
                fiber: flat[dim..2 * dim].to_vec(),
                z: zc.clone(),
                a: zc.iter().map(|v| vec![0.0; v.len()]).collect(),
            };
            let mu_map = {
                let mk_pt = mk_pt.clone();
                move |flat: &[f64]| {
                    lifted::mutate_groupoid(pair, &mk_pt(flat), side, k, eps, quad_tol)
                        .unwrap()
                        .flat()
                }
            };
            let points: Vec<Vec<f64>> = (0..fd_samples)
                .map(|_| sampler.family_point(&chart).flat())
                .collect();
            let rep = charts::check_poisson_map(
                "poisson-lifted",
                &mu_map,
                &points,
                &|flat| chart.poisson_tensor(&mk_pt(flat)).unwrap(),
                &|flat| chart_mut.poisson_tensor(&mk_pt(flat)).unwrap(),
                &cfg.tol,
                format!(
                    "lifted mutation, {} family, {} side, k={k}",
                    family.tag(),
                    side_tag(side)
                ),
            );
            out.push(rep);
        }
    }
    out
}

/// Hamiltonian flows: conserved quantities, group law, the spray flow, the
/// two-route Hamiltonian evaluation and anchor intertwining of lifted flows.
pub fn suite_flows(inst: &Instance, cfg: &VerifyConfig) -> ReportSet {
    let mut out = ReportSet::default();
    let mut sampler = Sampler::new(cfg.seed ^ 0x33);
    let pair = &inst.pair;
    let (m, n) = (pair.exchange.m, pair.exchange.n);
    let quad_tol = cfg.tol.quad_abs_tol;

    // Chart-level conservation and group law.
    let mut conserved = 0.0f64;
    let mut group = 0.0f64;
    for _ in 0..cfg.samples {
        for side in [Side::A, Side::X] {
            let dim = if side == Side::A { m } else { n };
            let pt = inst.chart_point(side, sampler.base(dim));
            let k = 1 + (sampler.uniform(0.0, n as f64) as usize).min(n - 1);
            let eps = if sampler.uniform(0.0, 1.0) < 0.5 { 1 } else { -1 };
            let t = sampler.uniform(-1.2, 1.2);
            let moved = charts::flow(pair, &pt, k, eps, t).expect("interior");
            conserved = conserved.max(
                (charts::yhat_value(pair, &moved, k - 1) - charts::yhat_value(pair, &pt, k - 1))
                    .abs()
                    / charts::yhat_value(pair, &pt, k - 1).abs().max(1.0),
            );
            let s = sampler.uniform(-1.0, 1.0);
            let ab = charts::flow(pair, &charts::flow(pair, &pt, k, eps, t).unwrap(), k, eps, s)
                .unwrap();
            let once = charts::flow(pair, &pt, k, eps, s + t).unwrap();
            group = group.max(rel_diff(&ab.coords, &once.coords));
        }
    }
    out.push(VerificationReport::numeric(
        "conserved-quantity",
        2 * cfg.samples,
        conserved,
        cfg.tol.residual_for("conserved-quantity"),
        "y_k / yhat_k along chart flows",
    ));
    out.push(VerificationReport::numeric(
        "flow-composition",
        2 * cfg.samples,
        group,
        cfg.tol.residual_for("flow-composition"),
        "phi^s phi^t = phi^(s+t) on charts",
    ));

    // Li2 reference value of the Hamiltonian in the classical case.
    {
        let li2_pair = Sampler::new(1).rank2_square_pair();
        let pt = ChartPoint::new(Side::X, vec![1.0; 2], vec![vec![], vec![]]).unwrap();
        let h = charts::hamiltonian(&li2_pair, &pt, 1, 1, quad_tol).expect("quadrature");
        let expected = -std::f64::consts::PI.powi(2) / 12.0 / li2_pair.exchange.d[0] as f64;
        out.push(VerificationReport::numeric(
            "hamiltonian-li2",
            1,
            (h - expected).abs(),
            cfg.tol.residual_for("hamiltonian-li2"),
            "h at w = 1 vs dilogarithm closed form",
        ));
    }

    // Spray flow conservation and composition.
    let mut spray = 0.0f64;
    for side in [Side::A, Side::X] {
        let chart = GroupoidChart::for_pair(pair, Family::Spray, side);
        for _ in 0..cfg.samples {
            let p = sampler.family_point(&chart);
            let t = sampler.uniform(-4.0, 7.3);
            let moved = groupoids::spray_flow(&chart, &p, t).unwrap();
            for i in 0..chart.dim() {
                let before = p.base[i] * p.fiber[i];
                let after = moved.base[i] * moved.fiber[i];
                spray = spray.max((after - before).abs() / before.abs().max(1.0));
            }
            let s = sampler.uniform(-1.5, 1.5);
            let two = groupoids::spray_flow(&chart, &moved, s).unwrap();
            let once = groupoids::spray_flow(&chart, &p, s + t).unwrap();
            spray = spray.max(rel_diff(&two.base, &once.base));
            // The exponential map is the time-one flow.
            let e = groupoids::exp_map(&chart, &p).unwrap();
            let f1 = groupoids::spray_flow(&chart, &p, 1.0).unwrap();
            spray = spray.max(rel_diff(&e.base, &f1.base).max(rel_diff(&e.fiber, &f1.fiber)));
        }
    }
    out.push(VerificationReport::numeric(
        "conserved-quantity",
        2 * cfg.samples,
        spray,
        cfg.tol.residual_for("conserved-quantity"),
        "x_j p_j along the spray flow; flow composition; exp = time-one flow",
    ));

    // Lifted flows: two-route Hamiltonian, conserved bounds, intertwining.
    let mut two_route = 0.0f64;
    let mut bounds_conserved = 0.0f64;
    let mut intertwine = 0.0f64;
    for side in [Side::A, Side::X] {
        for family in Family::ALL {
            let chart = GroupoidChart::for_pair(pair, family, side);
            for _ in 0..cfg.samples.min(30) {
                let mut p = sampler.groupoid_point(&chart, &pair.exchange.r);
                p.z = inst.zvals.clone();
                let k = 1 + (sampler.uniform(0.0, n as f64) as usize).min(n - 1);
                let eps = if sampler.uniform(0.0, 1.0) < 0.5 { 1 } else { -1 };
                let h = lifted::lifted_hamiltonian(pair, &p, side, k, eps, quad_tol).unwrap();
                let alpha_pt = ChartPoint::new(side, p.base.clone(), p.z.clone()).unwrap();
                let beta_pt = ChartPoint::new(side, chart.target(&p), p.z.clone()).unwrap();
                let other = charts::hamiltonian(pair, &alpha_pt, k, eps, quad_tol).unwrap()
                    - charts::hamiltonian(pair, &beta_pt, k, eps, quad_tol).unwrap();
                two_route = two_route.max((h - other).abs());

                let t = sampler.uniform(0.2, 1.0);
                let moved = lifted::lifted_flow(pair, &p, side, k, eps, t, quad_tol).unwrap();
                let hb = |q: &crate::groupoids::GroupoidPoint| {
                    let w_a = match side {
                        Side::X => q.base[k - 1],
                        Side::A => (0..m)
                            .map(|i| q.base[i].powi(charts::b_int(pair, i, k - 1) as i32))
                            .product(),
                    };
                    let w_b = {
                        let tb = chart.target(q);
                        match side {
                            Side::X => tb[k - 1],
                            Side::A => (0..m)
                                .map(|i| tb[i].powi(charts::b_int(pair, i, k - 1) as i32))
                                .product(),
                        }
                    };
                    (w_a, w_b)
                };
                let (wa0, wb0) = hb(&p);
                let (wa1, wb1) = hb(&moved);
                bounds_conserved = bounds_conserved
                    .max((wa1 - wa0).abs() / wa0.abs().max(1.0))
                    .max((wb1 - wb0).abs() / wb0.abs().max(1.0));

                // alpha and beta intertwine the lifted and chart flows.
                let chart_alpha = charts::flow(pair, &alpha_pt, k, eps, t).unwrap();
                intertwine = intertwine.max(rel_diff(&moved.base, &chart_alpha.coords));
                let chart_beta = charts::flow(pair, &beta_pt, k, eps, t).unwrap();
                intertwine =
                    intertwine.max(rel_diff(&chart.target(&moved), &chart_beta.coords));
            }
        }
    }
    out.push(VerificationReport::numeric(
        "hamiltonian-two-route",
        6 * cfg.samples.min(30),
        two_route,
        cfg.tol.residual_for("hamiltonian-two-route"),
        "single integral vs alpha*h - beta*h",
    ));
    out.push(VerificationReport::numeric(
        "conserved-quantity",
        6 * cfg.samples.min(30),
        bounds_conserved,
        cfg.tol.residual_for("conserved-quantity"),
        "Hamiltonian bounds along lifted flows",
    ));
    out.push(VerificationReport::numeric(
        "lift-intertwines-base",
        6 * cfg.samples.min(30),
        intertwine,
        cfg.tol.residual_for("lift-intertwines-base"),
        "alpha/beta intertwine lifted and chart flows",
    ));
    out
}

/// Mutations: direct closed forms versus tropical-after-flow, involutivity,
/// anchor intertwining, and boundary continuity of the removable
/// singularities.
pub fn suite_mutations(inst: &Instance, cfg: &VerifyConfig) -> ReportSet {
    let mut out = ReportSet::default();
    let mut sampler = Sampler::new(cfg.seed ^ 0x44);
    let pair = &inst.pair;
    let (m, n) = (pair.exchange.m, pair.exchange.n);
    let quad_tol = cfg.tol.quad_abs_tol;

    // Chart level.
    let mut chart_comp = 0.0f64;
    let mut chart_inv = 0.0f64;
    for _ in 0..cfg.samples {
        for side in [Side::A, Side::X] {
            let dim = if side == Side::A { m } else { n };
            let pt = inst.chart_point(side, sampler.base(dim));
            let k = 1 + (sampler.uniform(0.0, n as f64) as usize).min(n - 1);
            let eps = if sampler.uniform(0.0, 1.0) < 0.5 { 1 } else { -1 };
            let direct = charts::mutate(pair, &pt, k, eps).unwrap();
            let composed = charts::tropical(
                pair,
                &charts::flow(pair, &pt, k, eps, 1.0).unwrap(),
                k,
                eps,
            )
            .unwrap();
            chart_comp = chart_comp.max(rel_diff(&direct.coords, &composed.coords));
            let mutated_pair = pair.mutate(k, eps).unwrap();
            let back = charts::mutate(&mutated_pair, &direct, k, -eps).unwrap();
            chart_inv = chart_inv.max(rel_diff(&back.coords, &pt.coords));
        }
    }
    out.push(VerificationReport::numeric(
        "mutation-vs-flow",
        2 * cfg.samples,
        chart_comp,
        cfg.tol.residual_for("mutation-vs-flow"),
        "chart mutation vs tropical after time-one flow",
    ));
    out.push(VerificationReport::numeric(
        "mutation-involution",
        2 * cfg.samples,
        chart_inv,
        cfg.tol.residual_for("mutation-involution"),
        "chart mutation involutivity",
    ));

    // Groupoid level.
    let mut lifted_comp = 0.0f64;
    let mut lifted_inv = 0.0f64;
    let mut anchor = 0.0f64;
    for side in [Side::A, Side::X] {
        for family in Family::ALL {
            let chart = GroupoidChart::for_pair(pair, family, side);
            for _ in 0..cfg.samples.min(30) {
                let mut p = sampler.groupoid_point(&chart, &pair.exchange.r);
                p.z = inst.zvals.clone();
                let k = 1 + (sampler.uniform(0.0, n as f64) as usize).min(n - 1);
                let eps = if sampler.uniform(0.0, 1.0) < 0.5 { 1 } else { -1 };
                let direct = lifted::mutate_groupoid(pair, &p, side, k, eps, quad_tol).unwrap();
                let composed = lifted::lifted_tropical(
                    pair,
                    &lifted::lifted_flow(pair, &p, side, k, eps, 1.0, quad_tol).unwrap(),
                    side,
                    k,
                    eps,
                )
                .unwrap();
                lifted_comp = lifted_comp
                    .max(rel_diff(&direct.base, &composed.base))
                    .max(rel_diff(&direct.fiber, &composed.fiber));
                let mutated_pair = pair.mutate(k, eps).unwrap();
                let back =
                    lifted::mutate_groupoid(&mutated_pair, &direct, side, k, -eps, quad_tol)
                        .unwrap();
                lifted_inv = lifted_inv
                    .max(rel_diff(&back.base, &p.base))
                    .max(rel_diff(&back.fiber, &p.fiber));
                for (ba, pa) in back.a.iter().zip(&p.a) {
                    lifted_inv = lifted_inv.max(rel_diff(ba, pa));
                }
                // alpha and beta intertwine groupoid and chart mutations.
                let base_pt = ChartPoint::new(side, p.base.clone(), p.z.clone()).unwrap();
                let chart_image = charts::mutate(pair, &base_pt, k, eps).unwrap();
                anchor = anchor.max(rel_diff(&direct.base, &chart_image.coords));
                let beta_pt = ChartPoint::new(side, chart.target(&p), p.z.clone()).unwrap();
                let chart_beta = charts::mutate(pair, &beta_pt, k, eps).unwrap();
                let chart_mut = GroupoidChart::for_pair(&mutated_pair, family, side);
                anchor = anchor.max(rel_diff(&chart_mut.target(&direct), &chart_beta.coords));
            }
        }
    }
    out.push(VerificationReport::numeric(
        "mutation-vs-flow-lifted",
        6 * cfg.samples.min(30),
        lifted_comp,
        cfg.tol.residual_for("mutation-vs-flow-lifted"),
        "groupoid mutation closed form vs tropical after flow",
    ));
    out.push(VerificationReport::numeric(
        "mutation-involution",
        6 * cfg.samples.min(30),
        lifted_inv,
        cfg.tol.residual_for("mutation-involution"),
        "groupoid mutation involutivity",
    ));
    out.push(VerificationReport::numeric(
        "lift-intertwines-base",
        6 * cfg.samples.min(30),
        anchor,
        cfg.tol.residual_for("lift-intertwines-base"),
        "alpha/beta intertwine groupoid and chart mutations",
    ));

    // Boundary continuity: interior mutations at x_j = 1e-7 against the
    // boundary limit formulas, for every admissible (j, k) pair.
    let mut boundary = 0.0f64;
    let mut boundary_samples = 0usize;
    for family in [Family::Spray, Family::Blowup] {
        for k in 1..=n {
            for j in 0..m {
                if j == k - 1 {
                    continue;
                }
                let mut base = sampler.base(m);
                let fiber = sampler.fiber(family, &base);
                base[j] = 0.0;
                let at_boundary = crate::groupoids::GroupoidPoint::new(
                    family,
                    base.clone(),
                    fiber.clone(),
                    inst.zvals.clone(),
                    inst.zvals.iter().map(|v| vec![0.0; v.len()]).collect(),
                )
                .unwrap();
                let limit = lifted::boundary_mutation(pair, &at_boundary, k, 1).unwrap();
                let mut interior_base = base.clone();
                interior_base[j] = 1e-7;
                let interior_pt = crate::groupoids::GroupoidPoint::new(
                    family,
                    interior_base,
                    fiber,
                    inst.zvals.clone(),
                    inst.zvals.iter().map(|v| vec![0.0; v.len()]).collect(),
                )
                .unwrap();
                let interior =
                    lifted::mutate_groupoid(pair, &interior_pt, Side::A, k, 1, quad_tol).unwrap();
                boundary = boundary
                    .max(rel_diff(&interior.fiber, &limit.fiber))
                    .max((interior.base[k - 1] - limit.base[k - 1]).abs()
                        / limit.base[k - 1].abs().max(1.0));
                boundary_samples += 1;
            }
        }
    }
    out.push(VerificationReport::numeric(
        "boundary-continuity",
        boundary_samples,
        boundary,
        cfg.tol.residual_for("boundary-continuity"),
        "interior mutation at x_j = 1e-7 vs boundary limit formulas",
    ));
    out
}

/// Symbolic Laurent-phenomenon and separation checks plus the numeric
/// groupoid separation against iterated mutations.
pub fn suite_separation(inst: &Instance, cfg: &VerifyConfig) -> ReportSet {
    let mut out = ReportSet::default();
    let pair = &inst.pair;
    let n = pair.exchange.n;
    let quad_tol = cfg.tol.quad_abs_tol;
    let max_len = if n <= 2 { 6 } else { 4 };
    match inst.seed_state() {
        Ok(state) => out.push(laurent::laurent_phenomenon_check(&state, max_len)),
        Err(e) => out.push(VerificationReport::exact(
            "laurent-phenomenon",
            0,
            false,
            e.to_string(),
        )),
    }

    let mut sampler = Sampler::new(cfg.seed ^ 0x55);
    let mut max_res = 0.0f64;
    let mut count = 0usize;
    let mut paths: Vec<Vec<usize>> = Vec::new();
    for len in 1..=5usize {
        let mut path = Vec::with_capacity(len);
        for i in 0..len {
            path.push(1 + (i % n));
        }
        paths.push(path);
        if n >= 2 {
            let mut path = Vec::with_capacity(len);
            for i in 0..len {
                path.push(1 + ((i + 1) % n));
            }
            paths.push(path);
        }
    }
    for path in &paths {
        for side in [Side::A, Side::X] {
            for family in Family::ALL {
                let chart = GroupoidChart::for_pair(pair, family, side);
                let mut p = sampler.groupoid_point(&chart, &pair.exchange.r);
                p.z = inst.zvals.clone();
                let mut state = match inst.seed_state() {
                    Ok(s) => s,
                    Err(_) => continue,
                };
                if state.walk(path).is_err() {
                    continue;
                }
                let closed = match lifted::gpd_separation(&state, pair, &p, side, quad_tol) {
                    Ok(c) => c,
                    Err(e) => {
                        out.push(VerificationReport::exact(
                            "groupoid-separation",
                            count,
                            false,
                            format!("closed form failed on {path:?}: {e}"),
                        ));
                        continue;
                    }
                };
                let mut walker = GroupoidWalker::new(
                    MutationTrace::seed(pair.clone()),
                    side,
                    p.clone(),
                    quad_tol,
                )
                .unwrap();
                if let Err(e) = walker.walk(path) {
                    out.push(VerificationReport::exact(
                        "groupoid-separation",
                        count,
                        false,
                        format!("iterated walk failed on {path:?}: {e}"),
                    ));
                    continue;
                }
                max_res = max_res
                    .max(rel_diff(&closed.base, &walker.point.base))
                    .max(rel_diff(&closed.fiber, &walker.point.fiber));
                for (ca, wa) in closed.a.iter().zip(&walker.point.a) {
                    max_res = max_res.max(rel_diff(ca, wa));
                }
                count += 1;
            }
        }
    }
    out.push(VerificationReport::numeric(
        "groupoid-separation",
        count,
        max_res,
        cfg.tol.residual_for("groupoid-separation"),
        format!("closed forms vs iterated mutations on paths up to length 5, seed={}", cfg.seed),
    ));
    out
}

pub fn suite_all(inst: &Instance, cfg: &VerifyConfig) -> ReportSet {
    let mut out = ReportSet::default();
    out.extend(suite_axioms(inst, cfg).checks);
    out.extend(suite_multiplicativity(inst, cfg).checks);
    out.extend(suite_poisson(inst, cfg).checks);
    out.extend(suite_flows(inst, cfg).checks);
    out.extend(suite_mutations(inst, cfg).checks);
    out.extend(suite_separation(inst, cfg).checks);
    out
}

pub fn suite_by_name(name: &str, inst: &Instance, cfg: &VerifyConfig) -> Result<ReportSet> {
    match name {
        "axioms" => Ok(suite_axioms(inst, cfg)),
        "multiplicativity" => Ok(suite_multiplicativity(inst, cfg)),
        "poisson" => Ok(suite_poisson(inst, cfg)),
        "flows" => Ok(suite_flows(inst, cfg)),
        "mutations" => Ok(suite_mutations(inst, cfg)),
        "separation" => Ok(suite_separation(inst, cfg)),
        "all" => Ok(suite_all(inst, cfg)),
        other => Err(Error::Domain(format!(
            "unknown suite {other:?}; expected axioms|multiplicativity|poisson|flows|mutations|separation|all"
        ))),
    }
}

/// Full periodicity verification: exact matrix/F-polynomial conditions,
/// symbolic coordinate pullbacks, numeric chart walks, groupoid lifts and
/// the applicable dilogarithm sums. Reports are ordered so the first failing
/// entry names the first violated equality.
pub fn periodicity_reports(
    inst: &Instance,
    sequence: &[usize],
    sigma: &[usize],
    cfg: &VerifyConfig,
) -> Result<ReportSet> {
    let pair = &inst.pair;
    let (m, n) = (pair.exchange.m, pair.exchange.n);
    if sigma.len() != m {
        return Err(Error::Dimension(format!("sigma must permute 1..={m}")));
    }
    let mut seen = vec![false; m];
    for &img in sigma {
        if img >= m || seen[img] {
            return Err(Error::Domain("sigma is not a permutation".into()));
        }
        seen[img] = true;
    }
    for j in n..m {
        if sigma[j] != j {
            return Err(Error::Domain("sigma must fix the frozen indices".into()));
        }
    }
    if sequence.iter().any(|&k| k == 0 || k > n) {
        return Err(Error::InvalidDirection {
            dir: *sequence.iter().find(|&&k| k == 0 || k > n).unwrap(),
            n,
        });
    }

    let mut out = ReportSet::default();
    let to_str = |v: &crate::Int| v.to_string();

    // Exact conditions on the exchange data and the control matrices.
    let mut walker = laurent::SymbolicWalker::seed(inst.seed_state()?);
    walker.walk(sequence)?;
    let end = &walker.state.trace;
    let start = MutationTrace::seed(pair.clone());

    let mut first_bad: Option<String> = None;
    let mut check_exact = |name: &str, ok: bool, detail: String| {
        if !ok && first_bad.is_none() {
            first_bad = Some(format!("{name}: {detail}"));
        }
        out.push(VerificationReport::exact(name, 1, ok, detail));
    };

    {
        let mut ok = true;
        let mut detail = String::from("B[i][j] = B[sigma(i)][sigma(j)] after the sequence");
        'outer_b: for i in 0..m {
            for j in 0..n {
                if start.pair.exchange.b[(i, j)] != end.pair.exchange.b[(sigma[i], sigma[j])] {
                    ok = false;
                    detail = format!(
                        "B[{}][{}] = {} but B'[{}][{}] = {}",
                        i + 1,
                        j + 1,
                        to_str(&start.pair.exchange.b[(i, j)]),
                        sigma[i] + 1,
                        sigma[j] + 1,
                        to_str(&end.pair.exchange.b[(sigma[i], sigma[j])])
                    );
                    break 'outer_b;
                }
            }
        }
        check_exact("periodicity-exchange-matrix", ok, detail);
    }
    {
        let mut ok = true;
        let mut detail = String::from("Omega[i][j] = Omega[sigma(i)][sigma(j)] after the sequence");
        'outer_o: for i in 0..m {
            for j in 0..m {
                if start.pair.omega[(i, j)] != end.pair.omega[(sigma[i], sigma[j])] {
                    ok = false;
                    detail = format!("Omega mismatch at ({}, {})", i + 1, j + 1);
                    break 'outer_o;
                }
            }
        }
        check_exact("periodicity-omega", ok, detail);
    }
    for (name, a, b) in [
        ("periodicity-c-matrix", &start.c, &end.c),
        ("periodicity-g-matrix", &start.g, &end.g),
    ] {
        let mut ok = true;
        let mut detail = format!("{name} columns permuted by sigma");
        'outer_c: for i in 0..m {
            for j in 0..m {
                if a[(i, j)] != b[(i, sigma[j])] {
                    ok = false;
                    detail = format!("entry ({}, {}) differs", i + 1, j + 1);
                    break 'outer_c;
                }
            }
        }
        check_exact(name, ok, detail);
    }
    {
        let mut ok = true;
        let mut detail = String::from("F-polynomials permuted by sigma");
        for j in 0..m {
            if walker.state.fpolys.polys[sigma[j]] != laurent::FPolyFamily::seed(m, walker.state.vars.len()).polys[j] {
                ok = false;
                detail = format!("F_{} differs from 1", sigma[j] + 1);
                break;
            }
        }
        check_exact("periodicity-f-polynomials", ok, detail);
    }
    // Symbolic coordinate pullbacks (Definition conditions on x, y, z).
    {
        let v = walker.state.vars.clone();
        let mut ok = true;
        let mut detail = String::from("y pullbacks are sigma-permuted coordinates");
        for l in 0..n {
            let expected = laurent::LaurentPoly::var(v.len(), v.y(sigma[l]));
            if !walker.ys[l].eq_poly(&expected) {
                ok = false;
                detail = format!("y_{} pullback differs from y_{}", l + 1, sigma[l] + 1);
                break;
            }
        }
        check_exact("periodicity-y-coordinates", ok, detail);
        let mut ok = true;
        let mut detail = String::from("x pullbacks are sigma-permuted coordinates");
        for j in 0..m {
            let expected = laurent::LaurentPoly::var(v.len(), v.x(sigma[j]));
            if walker.xs[j] != expected {
                ok = false;
                detail = format!("x_{} pullback differs from x_{}", j + 1, sigma[j] + 1);
                break;
            }
        }
        check_exact("periodicity-x-coordinates", ok, detail);
        let mut ok = true;
        let mut detail = String::from("z coordinates are sigma-permuted (slot-wise)");
        for l in 0..n {
            let rl = pair.exchange.r[l];
            if rl == 1 {
                continue;
            }
            if sigma[l] != l || pair.exchange.r[sigma[l]] != rl {
                ok = false;
                detail = format!("direction {} maps to {} with formal z slots", l + 1, sigma[l] + 1);
                break;
            }
            if end.z_parity[l] {
                // Odd star count: slot j must coincide with slot r - j.
                for j in 1..rl {
                    if rl - j != j {
                        ok = false;
                        detail = format!("direction {} has odd star parity", l + 1);
                        break;
                    }
                }
            }
        }
        check_exact("periodicity-z-coordinates", ok, detail);
    }

    // Numeric chart walks.
    let mut sampler = Sampler::new(cfg.seed ^ 0x66);
    let mut max_res = 0.0f64;
    for _ in 0..cfg.samples.min(25) {
        for side in [Side::A, Side::X] {
            let dim = if side == Side::A { m } else { n };
            let startp = inst.chart_point(side, sampler.base(dim));
            let mut w = ChartWalker::new(MutationTrace::seed(pair.clone()), startp.clone())?;
            w.walk(sequence)?;
            max_res = max_res.max(charts::periodicity_residual(&startp, &w.point, sigma, n));
        }
    }
    out.push(VerificationReport::numeric(
        "chart-periodicity",
        2 * cfg.samples.min(25),
        max_res,
        cfg.tol.residual_for("chart-periodicity"),
        format!("numeric chart walks, seed={}", cfg.seed),
    ));

    // Groupoid level.
    let gp = lifted::gpd_periodicity_check(
        pair,
        sequence,
        sigma,
        cfg.samples.min(25),
        &mut sampler,
        &cfg.tol,
    );
    out.extend(gp);

    // Dilogarithm sums for the theorem-backed index set.
    let mut dilog_applied = 0usize;
    let mut dilog_max = 0.0f64;
    for l in 0..n {
        if sigma[l] != l || pair.exchange.r[l] < 2 {
            continue;
        }
        for j in 1..pair.exchange.r[l] {
            for family in Family::ALL {
                let chart = GroupoidChart::for_pair(pair, family, Side::X);
                let mut p = sampler.groupoid_point(&chart, &pair.exchange.r);
                p.z = inst.zvals.clone();
                let s = lifted::dilog_sum_bounded(
                    pair,
                    Side::X,
                    family,
                    sequence,
                    &p,
                    l + 1,
                    j,
                    cfg.tol.quad_abs_tol,
                )?;
                dilog_max = dilog_max.max(s.abs());
                dilog_applied += 1;
            }
        }
    }
    out.push(VerificationReport::numeric(
        "dilogarithm-identity",
        dilog_applied,
        dilog_max,
        cfg.tol.residual_for("dilogarithm-identity"),
        if dilog_applied == 0 {
            "no fixed direction with formal coefficients; nothing to check".to_string()
        } else {
            "bounded integral sums over fixed directions".to_string()
        },
    ));

    Ok(out)
}
