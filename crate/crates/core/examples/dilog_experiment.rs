// Experiment: brute-force the star pattern per term to see which (if any)
// index conventions make the dilogarithm sums vanish on each periodicity.
use cluster_groupoids::charts::Side;
use cluster_groupoids::exchange::{CompatiblePair, ExchangeData, IMat};
use cluster_groupoids::groupoids::{Family, GroupoidChart};
use cluster_groupoids::lifted::{dilog_sum_pattern, Variant};
use cluster_groupoids::sample::Sampler;

fn pair2(b12: i64, b21: i64, d: Vec<i64>, r: Vec<usize>) -> CompatiblePair {
    let ex = ExchangeData::new(2, 2, IMat::from_i64_rows(&[vec![0, b12], vec![b21, 0]]).unwrap(), d, r).unwrap();
    CompatiblePair::solve_square(ex).unwrap()
}

fn main() {
    let cases: Vec<(&str, CompatiblePair, Vec<usize>)> = vec![
        ("a2-pentagon", pair2(1, -1, vec![1, 1], vec![1, 1]), vec![1, 2, 1, 2, 1]),
        ("b2-hexagon", pair2(1, -2, vec![2, 1], vec![1, 1]), vec![1, 2, 1, 2, 1, 2]),
        ("g2-octagon", pair2(1, -3, vec![3, 1], vec![1, 1]), vec![1, 2, 1, 2, 1, 2, 1, 2]),
    ];
    let mut sampler = Sampler::new(5);
    for (name, pair, seq) in &cases {
        for ell in 1..=2usize {
            let occurrences = seq.iter().filter(|&&k| k == ell).count();
            let chart = GroupoidChart::for_pair(pair, Family::Double, Side::X);
            let p1 = sampler.groupoid_point(&chart, &pair.exchange.r);
            let p2 = sampler.groupoid_point(&chart, &pair.exchange.r);
            for variant in [Variant::Bounded, Variant::ZeroBased] {
                for mask in 0..(1u32 << occurrences) {
                    let pattern: Vec<bool> = (0..occurrences).map(|i| mask >> i & 1 == 1).collect();
                    let r1 = dilog_sum_pattern(pair, Side::X, seq, &p1, ell, 1, 1e-11, &pattern, variant);
                    let r2 = dilog_sum_pattern(pair, Side::X, seq, &p2, ell, 1, 1e-11, &pattern, variant);
                    if let (Ok(v1), Ok(v2)) = (r1, r2) {
                        if v1.abs() < 1e-9 && v2.abs() < 1e-9 {
                            println!("{name:12} ell={ell} {variant:?} pattern {pattern:?} VANISHES ({v1:+.2e}, {v2:+.2e})");
                        }
                    }
                }
            }
        }
    }
    println!("done");
}
