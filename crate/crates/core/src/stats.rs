//! Correlation between benchmark columns and reward-model scores, with a
//! two-tailed Student-t significance test.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Category, RewardBenchTable, ScoreMatrix};

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::invalid(format!(
            "correlation needs at least 3 points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input".into()));
    }
    Ok(())
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the average of the positions they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// `r * sqrt(n - 2) / sqrt(1 - r^2)`.
pub fn t_statistic(r: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::invalid(format!("n must be at least 3, got {n}")));
    }
    if !r.is_finite() || r.abs() > 1.0 {
        return Err(Error::invalid(format!("r must lie in [-1, 1], got {r}")));
    }
    if r.abs() == 1.0 {
        return Err(Error::PerfectCorrelation);
    }
    Ok(r * ((n - 2) as f64).sqrt() / (1.0 - r * r).sqrt())
}

/// Lanczos approximation (g = 7, 9 terms), accurate to ~1e-15 for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-tailed p-value of Student's t with `df` degrees of freedom.
pub fn student_t_two_tailed(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
}

/// Two-tailed p-value for a sample correlation `r` over `n` points.
pub fn correlation_p_value(r: f64, n: usize) -> Result<f64> {
    match t_statistic(r, n) {
        Ok(t) => Ok(student_t_two_tailed(t, (n - 2) as f64)),
        Err(Error::PerfectCorrelation) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Critical |r| for a two-tailed test at level `alpha` with `n` samples:
/// the boundary where the p-value of `r` equals `alpha`.
pub fn significance_threshold(n: usize, alpha: f64) -> Result<f64> {
    if n < 4 {
        return Err(Error::invalid(format!("n must be at least 4, got {n}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    // p(r) falls monotonically from 1 at r = 0 to 0 at r = 1
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if correlation_p_value(mid, n)? < alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn is_significant(r: f64, r_crit: f64) -> bool {
    r.abs() >= r_crit
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub benchmark: String,
    pub category: Category,
    /// `None` when the correlation is undefined (constant column).
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub sig_pearson: Option<bool>,
    pub sig_spearman: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub n: usize,
    pub alpha: f64,
    pub r_crit: f64,
    pub models: Vec<String>,
    /// Sorted by benchmark name, then category.
    pub entries: Vec<CorrelationEntry>,
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::ConstantInput) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Correlates every matrix column against every RewardBench category over
/// the models present in both inputs.
pub fn correlation_report(
    matrix: &ScoreMatrix,
    rb: &RewardBenchTable,
    alpha: f64,
) -> Result<CorrelationReport> {
    let rows: Vec<usize> = (0..matrix.n_rows())
        .filter(|&i| rb.contains_key(&matrix.rows()[i]))
        .collect();
    if rows.is_empty() {
        return Err(Error::KeySetMismatch(
            "no model appears in both the score matrix and the RewardBench table".into(),
        ));
    }
    let n = rows.len();
    let r_crit = significance_threshold(n, alpha)?;
    let models: Vec<String> = rows.iter().map(|&i| matrix.rows()[i].clone()).collect();
    let targets: Vec<(Category, Vec<f64>)> = Category::ALL
        .into_iter()
        .map(|c| (c, models.iter().map(|m| rb[m].get(c)).collect()))
        .collect();

    let mut entries: Vec<CorrelationEntry> = (0..matrix.n_cols())
        .into_par_iter()
        .map(|col| {
            let x: Vec<f64> = rows.iter().map(|&i| matrix.value(i, col)).collect();
            targets
                .iter()
                .map(|(category, y)| {
                    let p = defined(pearson(&x, y))?;
                    let s = defined(spearman(&x, y))?;
                    Ok(CorrelationEntry {
                        benchmark: matrix.columns()[col].clone(),
                        category: *category,
                        pearson: p,
                        spearman: s,
                        sig_pearson: p.map(|r| is_significant(r, r_crit)),
                        sig_spearman: s.map(|r| is_significant(r, r_crit)),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    entries.sort_by(|a, b| a.benchmark.cmp(&b.benchmark).then(a.category.cmp(&b.category)));
    Ok(CorrelationReport {
        n,
        alpha,
        r_crit,
        models,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pearson_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&x, &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(pearson(&x, &[5.0; 4]), Err(Error::ConstantInput)));
        assert!(pearson(&[1.0, 2.0], &[2.0, 1.0]).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 3.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
        assert_eq!(average_ranks(&[7.0, 7.0, 7.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn spearman_monotone() {
        let x = [0.3, 1.0, 2.5, 4.0, 9.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| v.powi(3) + v.exp()).collect();
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn t_statistic_values() {
        assert_eq!(t_statistic(0.0, 40).unwrap(), 0.0);
        // 0.5 * sqrt(38) / sqrt(0.75)
        let expected = 0.5 * 38f64.sqrt() / 0.75f64.sqrt();
        assert!((t_statistic(0.5, 40).unwrap() - expected).abs() < 1e-12);
        assert!((t_statistic(0.5, 40).unwrap() - 3.559).abs() < 1e-3);
        assert!((t_statistic(0.316, 40).unwrap() - 2.053).abs() < 1e-3);
        assert!(matches!(t_statistic(1.0, 40), Err(Error::PerfectCorrelation)));
        assert!(matches!(t_statistic(-1.0, 40), Err(Error::PerfectCorrelation)));
        assert!(t_statistic(0.5, 2).is_err());
        assert!(t_statistic(1.5, 10).is_err());
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(19.5) - statrs::function::gamma::ln_gamma(19.5)).abs() < 1e-12);
    }

    #[test]
    fn t_distribution_matches_statrs() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        for df in [1.0, 2.0, 5.0, 38.0, 120.0] {
            let d = StudentsT::new(0.0, 1.0, df).unwrap();
            for t in [0.1, 0.7, 1.5, 2.0244, 3.3, 8.0] {
                let expected = 2.0 * (1.0 - d.cdf(t));
                let got = student_t_two_tailed(t, df);
                assert!((got - expected).abs() < 1e-10, "df={df} t={t}: {got} vs {expected}");
            }
        }
    }

    #[test]
    fn threshold_for_forty_models() {
        let r = significance_threshold(40, 0.05).unwrap();
        assert!((r - 0.312).abs() <= 0.001, "{r}");
        assert!((r - 0.316).abs() <= 0.01);
        // p-value at the threshold is alpha
        assert!((correlation_p_value(r, 40).unwrap() - 0.05).abs() < 1e-10);
    }

    #[test]
    fn threshold_limits_and_errors() {
        let near_one = significance_threshold(40, 0.999_999).unwrap();
        assert!(near_one < 1e-5, "{near_one}");
        assert!(significance_threshold(3, 0.05).is_err());
        assert!(significance_threshold(40, 0.0).is_err());
        assert!(significance_threshold(40, 1.0).is_err());
    }

    #[test]
    fn report_on_planted_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 40;
        let ids: Vec<String> = (0..n).map(|i| format!("m{i:02}")).collect();
        let target: Vec<f64> = (0..n).map(|_| rng.random_range(50.0..90.0)).collect();
        let z: Vec<f64> = (0..n)
            .map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng))
            .collect();
        // standardized target mixed with independent noise at r = 0.8
        let mt = target.iter().sum::<f64>() / n as f64;
        let st = (target.iter().map(|t| (t - mt).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let planted: Vec<f64> = target
            .iter()
            .zip(&z)
            .map(|(t, e)| 0.8 * (t - mt) / st + 0.6 * e)
            .collect();
        let rb: RewardBenchTable = ids
            .iter()
            .zip(&target)
            .map(|(id, &t)| {
                (
                    id.clone(),
                    crate::RewardBenchScores {
                        chat: t,
                        chat_hard: t,
                        safety: t,
                        reasoning: t,
                        overall: t,
                    },
                )
            })
            .collect();
        let values: Vec<Vec<f64>> = (0..n).map(|i| vec![target[i], planted[i], 3.0]).collect();
        let m = ScoreMatrix::new(
            ids.clone(),
            vec!["copy".into(), "planted".into(), "flat".into()],
            values,
        )
        .unwrap();
        let rep = correlation_report(&m, &rb, 0.05).unwrap();
        assert_eq!(rep.n, 40);
        assert_eq!(rep.entries.len(), 15);
        let get = |b: &str| {
            rep.entries
                .iter()
                .find(|e| e.benchmark == b && e.category == Category::Overall)
                .unwrap()
        };
        assert!((get("copy").pearson.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(get("copy").sig_pearson, Some(true));
        assert!((get("planted").pearson.unwrap() - 0.8).abs() < 0.15);
        assert_eq!(get("flat").pearson, None);
        assert_eq!(get("flat").sig_spearman, None);
        // sorted by benchmark
        assert_eq!(rep.entries[0].benchmark, "copy");
        assert_eq!(rep.entries[14].benchmark, "planted");
    }

    #[test]
    fn report_needs_overlap() {
        let m = ScoreMatrix::new(vec!["a".into()], vec!["x".into()], vec![vec![1.0]]).unwrap();
        assert!(matches!(
            correlation_report(&m, &RewardBenchTable::new(), 0.05),
            Err(Error::KeySetMismatch(_))
        ));
    }

    proptest! {
        #[test]
        fn symmetric_and_affine_invariant(
            x in prop::collection::vec(-100.0f64..100.0, 5..30),
            seed in any::<u64>(),
            a in 0.1f64..10.0,
            b in -50.0f64..50.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = x.iter().map(|v| v + rng.random_range(-30.0..30.0)).collect();
            if let (Ok(r1), Ok(r2)) = (pearson(&x, &y), pearson(&y, &x)) {
                prop_assert!((r1 - r2).abs() < 1e-12);
                let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                prop_assert!((pearson(&xt, &y).unwrap() - r1).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(&r1));
            }
            if let (Ok(s1), Ok(s2)) = (spearman(&x, &y), spearman(&y, &x)) {
                prop_assert!((s1 - s2).abs() < 1e-12);
                let xt: Vec<f64> = x.iter().map(|v| v.powi(3) + v).collect();
                prop_assert!((spearman(&xt, &y).unwrap() - s1).abs() < 1e-12);
            }
        }

        #[test]
        fn significance_is_monotone(r in 0.0f64..0.99, dr in 0.0f64..0.01, n in 4usize..200) {
            let crit = significance_threshold(n, 0.05).unwrap();
            if is_significant(r, crit) {
                prop_assert!(is_significant(r + dr, crit));
            }
        }

        #[test]
        fn t_statistic_increasing(r in 0.0f64..0.98, dr in 1e-6f64..0.01, n in 3usize..500) {
            prop_assert!(t_statistic(r + dr, n).unwrap() > t_statistic(r, n).unwrap());
            prop_assert!(t_statistic(-(r + dr), n).unwrap() < t_statistic(-r, n).unwrap());
        }
    }
}
