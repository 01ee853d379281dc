//! Statistics over per-user polarity scores: aggregation, follower
//! quartiles, one-way ANOVA with pairwise follow-ups, OLS regression,
//! retweet-rate comparison and per-category medians.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::beta::beta_reg;

use crate::corpus::{Category, EventLabel, UserId, UserTable};
use crate::error::{Error, Result};

/// Median; the mean of the middle two for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

pub fn median_abs(values: &[f64]) -> Option<f64> {
    median(&values.iter().map(|x| x.abs()).collect::<Vec<_>>())
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregatePolarity {
    pub user_id: UserId,
    pub median_abs_retweet_polarity: Option<f64>,
    pub median_abs_content_polarity: Option<f64>,
    pub events_covered: usize,
}

pub type PerEventScores = BTreeMap<EventLabel, BTreeMap<UserId, f64>>;

/// Median absolute score across the events in which each user is scored.
pub fn aggregate_polarity(retweet: &PerEventScores, content: &PerEventScores) -> Vec<AggregatePolarity> {
    let mut r: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut c: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut events: BTreeMap<&str, std::collections::BTreeSet<&EventLabel>> = BTreeMap::new();
    for (event, scores) in retweet {
        for (u, &s) in scores {
            r.entry(u).or_default().push(s);
            events.entry(u).or_default().insert(event);
        }
    }
    for (event, scores) in content {
        for (u, &s) in scores {
            c.entry(u).or_default().push(s);
            events.entry(u).or_default().insert(event);
        }
    }
    events
        .into_iter()
        .map(|(u, ev)| AggregatePolarity {
            user_id: u.to_string(),
            median_abs_retweet_polarity: r.get(u).and_then(|v| median_abs(v)),
            median_abs_content_polarity: c.get(u).and_then(|v| median_abs(v)),
            events_covered: ev.len(),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FollowerLevel {
    VeryLow,
    Low,
    Medium,
    High,
}

impl FollowerLevel {
    pub const ALL: [FollowerLevel; 4] = [
        FollowerLevel::VeryLow,
        FollowerLevel::Low,
        FollowerLevel::Medium,
        FollowerLevel::High,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FollowerLevel::VeryLow => "Very Low",
            FollowerLevel::Low => "Low",
            FollowerLevel::Medium => "Medium",
            FollowerLevel::High => "High",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FollowerCategory {
    pub levels: BTreeMap<UserId, FollowerLevel>,
    /// First quartile, median, third quartile.
    pub cuts: [f64; 3],
    pub warnings: Vec<String>,
}

impl FollowerCategory {
    pub fn sizes(&self) -> [usize; 4] {
        let mut n = [0; 4];
        for &l in self.levels.values() {
            n[l as usize] += 1;
        }
        n
    }
}

/// Assigns each user the quartile its follower count falls in. A count
/// equal to a cut point goes to the lower category.
pub fn follower_quartiles(followers: &[(UserId, u64)]) -> Result<FollowerCategory> {
    if followers.len() < 4 {
        return Err(Error::Stats(format!(
            "follower quartiles need at least 4 users, got {}",
            followers.len()
        )));
    }
    let mut sorted: Vec<f64> = followers.iter().map(|&(_, f)| f as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let cuts = [0.25, 0.5, 0.75].map(|q| quantile_sorted(&sorted, q));
    let mut warnings = Vec::new();
    if cuts[0] == cuts[1] || cuts[1] == cuts[2] {
        warnings.push(format!(
            "degenerate follower quartiles {:?}; categories are unbalanced",
            cuts
        ));
    }
    let levels = followers
        .iter()
        .map(|(u, f)| {
            let f = *f as f64;
            let level = if f <= cuts[0] {
                FollowerLevel::VeryLow
            } else if f <= cuts[1] {
                FollowerLevel::Low
            } else if f <= cuts[2] {
                FollowerLevel::Medium
            } else {
                FollowerLevel::High
            };
            (u.clone(), level)
        })
        .collect();
    Ok(FollowerCategory {
        levels,
        cuts,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnovaResult {
    pub f: f64,
    pub p_value: f64,
    pub df_between: f64,
    pub df_within: f64,
    pub ss_between: f64,
    pub ss_within: f64,
    pub group_means: Vec<f64>,
    pub group_sizes: Vec<usize>,
}

impl AnovaResult {
    pub fn ms_within(&self) -> f64 {
        self.ss_within / self.df_within
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Upper tail of the F distribution.
fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

/// Two-sided p-value of a t statistic.
fn t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t))
}

pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(Error::Stats("ANOVA needs at least two groups".into()));
    }
    if let Some(i) = groups.iter().position(|g| g.len() < 2) {
        return Err(Error::Stats(format!(
            "ANOVA group {i} has {} observations, need at least 2",
            groups[i].len()
        )));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = mean(&all);
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let ss_between: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.len() as f64 * (m - grand).powi(2))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|x| (x - m).powi(2)).sum::<f64>())
        .sum();
    let d1 = (groups.len() - 1) as f64;
    let d2 = (n - groups.len()) as f64;
    let spread = all.iter().map(|x| (x - grand).abs()).fold(0.0, f64::max);
    let negligible = |ss: f64| ss <= (spread * 1e-12).powi(2) * n as f64;
    let f = if negligible(ss_between) {
        0.0
    } else if negligible(ss_within) {
        f64::INFINITY
    } else {
        (ss_between / d1) / (ss_within / d2)
    };
    Ok(AnovaResult {
        f,
        p_value: f_survival(f, d1, d2),
        df_between: d1,
        df_within: d2,
        ss_between,
        ss_within,
        group_means: means,
        group_sizes: groups.iter().map(Vec::len).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Group mean ± t(df_within) · sqrt(MS_within / n_i).
pub fn anova_confidence_intervals(anova: &AnovaResult, level: f64) -> Vec<ConfidenceInterval> {
    let t = StudentsT::new(0.0, 1.0, anova.df_within)
        .map(|d| d.inverse_cdf(0.5 + level / 2.0))
        .unwrap_or(f64::NAN);
    anova
        .group_means
        .iter()
        .zip(&anova.group_sizes)
        .map(|(&m, &n)| {
            let half = t * (anova.ms_within() / n as f64).sqrt();
            ConfidenceInterval {
                mean: m,
                lower: m - half,
                upper: m + half,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairwiseTest {
    pub a: usize,
    pub b: usize,
    pub mean_difference: f64,
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    /// Multiplied by the number of pairs, capped at 1.
    pub p_bonferroni: f64,
}

/// Welch t-tests between every pair of groups with Bonferroni correction.
pub fn pairwise_welch(groups: &[Vec<f64>]) -> Result<Vec<PairwiseTest>> {
    if let Some(i) = groups.iter().position(|g| g.len() < 2) {
        return Err(Error::Stats(format!("group {i} has fewer than 2 observations")));
    }
    let summary: Vec<(f64, f64, f64)> = groups
        .iter()
        .map(|g| {
            let m = mean(g);
            let n = g.len() as f64;
            let var = g.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
            (m, var, n)
        })
        .collect();
    let pairs = groups.len() * (groups.len() - 1) / 2;
    let mut out = Vec::with_capacity(pairs);
    for a in 0..groups.len() {
        for b in a + 1..groups.len() {
            let (ma, va, na) = summary[a];
            let (mb, vb, nb) = summary[b];
            let (sa, sb) = (va / na, vb / nb);
            let se = (sa + sb).sqrt();
            let diff = ma - mb;
            let (t, df, p) = if se == 0.0 {
                let p = if diff == 0.0 { 1.0 } else { 0.0 };
                (if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY }, na + nb - 2.0, p)
            } else {
                let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
                let t = diff / se;
                (t, df, t_two_sided(t, df))
            };
            out.push(PairwiseTest {
                a,
                b,
                mean_difference: diff,
                t,
                df,
                p_value: p,
                p_bonferroni: (p * pairs as f64).min(1.0),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegressionResult {
    /// `intercept` followed by the predictor names.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub n: usize,
    pub df_residual: usize,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.coefficients[i], self.std_errors[i]))
    }
}

/// Lower-triangular Cholesky factor, or the index of the first column whose
/// pivot vanishes.
fn cholesky(g: &[Vec<f64>]) -> std::result::Result<Vec<Vec<f64>>, usize> {
    let p = g.len();
    let mut l = vec![vec![0.0; p]; p];
    for j in 0..p {
        let d = g[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if !(d > 1e-10 * g[j][j].abs()) || g[j][j] == 0.0 {
            return Err(j);
        }
        l[j][j] = d.sqrt();
        for i in j + 1..p {
            let s = g[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = s / l[j][j];
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let p = b.len();
    let mut y = vec![0.0; p];
    for i in 0..p {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        x[i] = (y[i] - (i + 1..p).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    x
}

/// Ordinary least squares with an intercept.
pub fn ols_regression(y: &[f64], predictors: &[(&str, &[f64])]) -> Result<RegressionResult> {
    let n = y.len();
    let p = predictors.len() + 1;
    if n <= p {
        return Err(Error::Stats(format!(
            "regression needs more than {p} observations, got {n}"
        )));
    }
    if let Some((name, _)) = predictors.iter().find(|(_, x)| x.len() != n) {
        return Err(Error::Stats(format!("predictor `{name}` length differs from y")));
    }
    let mut names = vec!["intercept".to_string()];
    names.extend(predictors.iter().map(|(n, _)| n.to_string()));
    let col = |j: usize, i: usize| if j == 0 { 1.0 } else { predictors[j - 1].1[i] };
    let mut gram = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for i in 0..n {
        for a in 0..p {
            xty[a] += col(a, i) * y[i];
            for b in 0..=a {
                gram[a][b] += col(a, i) * col(b, i);
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[b][a] = gram[a][b];
        }
    }
    let l = match cholesky(&gram) {
        Ok(l) => l,
        Err(j) => {
            let with = if j == 0 {
                Vec::new()
            } else {
                let head: Vec<Vec<f64>> = gram[..j].iter().map(|r| r[..j].to_vec()).collect();
                let lh = cholesky(&head).expect("leading block factored");
                let rhs: Vec<f64> = (0..j).map(|i| gram[i][j]).collect();
                cholesky_solve(&lh, &rhs)
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.abs() > 1e-8)
                    .map(|(i, _)| names[i].clone())
                    .collect()
            };
            return Err(Error::SingularDesign {
                column: names[j].clone(),
                with,
            });
        }
    };
    let mut beta = cholesky_solve(&l, &xty);
    let residuals = |beta: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| y[i] - (0..p).map(|j| beta[j] * col(j, i)).sum::<f64>())
            .collect()
    };
    // One step of iterative refinement.
    let r = residuals(&beta);
    let xtr: Vec<f64> = (0..p).map(|j| (0..n).map(|i| col(j, i) * r[i]).sum()).collect();
    for (b, d) in beta.iter_mut().zip(cholesky_solve(&l, &xtr)) {
        *b += d;
    }
    let resid = residuals(&beta);
    let ss_res: f64 = resid.iter().map(|e| e * e).sum();
    let y_mean = mean(y);
    let ss_tot: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let df = n - p;
    let sigma2 = ss_res / df as f64;
    let mut std_errors = Vec::with_capacity(p);
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        std_errors.push((sigma2 * cholesky_solve(&l, &e)[j]).sqrt());
    }
    let t_values: Vec<f64> = beta
        .iter()
        .zip(&std_errors)
        .map(|(&b, &se)| if se > 0.0 { b / se } else if b == 0.0 { 0.0 } else { b.signum() * f64::INFINITY })
        .collect();
    let p_values = t_values.iter().map(|&t| t_two_sided(t, df as f64)).collect();
    Ok(RegressionResult {
        names,
        coefficients: beta,
        std_errors,
        t_values,
        p_values,
        r_squared,
        n,
        df_residual: df,
        residuals: resid,
    })
}

/// Retweet counts of one user's original tweets, split by event relation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RateSplit {
    pub event: Vec<u64>,
    pub other: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UserRate {
    pub user_id: UserId,
    pub event_median: f64,
    pub other_median: f64,
    pub event_higher: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateComparison {
    pub users: Vec<UserRate>,
    pub excluded_missing_split: usize,
    /// Third quartile of polarity; the cohort lies strictly above it.
    pub cohort_threshold: Option<f64>,
    pub cohort_size: usize,
    pub cohort_event_higher: usize,
    pub fraction: Option<f64>,
}

pub fn retweet_rate_comparison(
    splits: &BTreeMap<UserId, RateSplit>,
    polarity: &BTreeMap<UserId, f64>,
) -> RateComparison {
    let as_f = |v: &[u64]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
    let mut users = Vec::new();
    let mut excluded = 0;
    for (u, s) in splits {
        match (median(&as_f(&s.event)), median(&as_f(&s.other))) {
            (Some(e), Some(o)) => users.push(UserRate {
                user_id: u.clone(),
                event_median: e,
                other_median: o,
                event_higher: e > o,
            }),
            _ => excluded += 1,
        }
    }
    let mut sorted: Vec<f64> = polarity.values().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let threshold = (!sorted.is_empty()).then(|| quantile_sorted(&sorted, 0.75));
    let cohort: Vec<&UserRate> = match threshold {
        Some(q3) => users
            .iter()
            .filter(|r| polarity.get(&r.user_id).is_some_and(|&p| p > q3))
            .collect(),
        None => Vec::new(),
    };
    let higher = cohort.iter().filter(|r| r.event_higher).count();
    RateComparison {
        cohort_threshold: threshold,
        cohort_size: cohort.len(),
        cohort_event_higher: higher,
        fraction: (!cohort.is_empty()).then(|| higher as f64 / cohort.len() as f64),
        users,
        excluded_missing_split: excluded,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CategoryRow {
    pub category: Category,
    pub median_r: f64,
    pub median_abs_c: Option<f64>,
    pub median_retweets: Option<f64>,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CategoryMedians {
    pub rows: Vec<CategoryRow>,
    pub omitted: Vec<Category>,
}

/// Per-category median signed retweet polarity, median |content polarity|
/// and median retweet count, over influencers with a retweet polarity.
pub fn category_medians(
    r_scores: &BTreeMap<UserId, f64>,
    c_scores: &BTreeMap<UserId, f64>,
    retweet_medians: &BTreeMap<UserId, f64>,
    users: &UserTable,
) -> CategoryMedians {
    let mut groups: BTreeMap<Category, Vec<&str>> = BTreeMap::new();
    for u in r_scores.keys() {
        if let Some(c) = users.category_of(u) {
            groups.entry(c).or_default().push(u);
        }
    }
    let mut rows = Vec::new();
    let mut omitted = Vec::new();
    for cat in Category::ALL {
        let Some(members) = groups.get(&cat) else {
            omitted.push(cat);
            continue;
        };
        let pick = |m: &BTreeMap<UserId, f64>| -> Vec<f64> {
            members.iter().filter_map(|u| m.get(*u).copied()).collect()
        };
        rows.push(CategoryRow {
            category: cat,
            median_r: median(&pick(r_scores)).expect("non-empty"),
            median_abs_c: median_abs(&pick(c_scores)),
            median_retweets: median(&pick(retweet_medians)),
            n: members.len(),
        });
    }
    CategoryMedians { rows, omitted }
}
