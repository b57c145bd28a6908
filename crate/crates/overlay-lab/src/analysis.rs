/*!
Degree-distribution measurement: histograms, multiplicative binning,
power-law exponent estimation, cutoff-spike quantification, and a crude
power-law / exponential classifier.

Binning uses integer boundaries `u_0 = lo`,
`u_{j+1} = max(u_j + 1, round(lo * 10^((j+1)/bpd)))`, so every bin spans at
least one integer degree and boundaries grow multiplicatively once bins are
wider than one. Density is bin mass divided by bin width; the bin center is
`sqrt(a * (b - 1))` for the half-open integer span `[a, b)`, which degrades
gracefully to `k` itself for width-one bins.

Exponent fits come in two flavors: least squares on the log-binned
(ln center, ln density) points, and a truncated maximum-likelihood fit that
solves `E_gamma[ln k] = mean observed ln k` over the fit range. Both report
the fitted amplitude so a tail value can be extrapolated, which is how the
cutoff spike is measured against the body of the distribution.
*/

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("invalid fit range [{lo}, {hi}]")]
    InvalidRange { lo: usize, hi: usize },
    #[error("not enough support in [{lo}, {hi}] for a fit: {detail}")]
    InsufficientSupport {
        lo: usize,
        hi: usize,
        detail: String,
    },
}

/// Exact degree counts for one graph or an ensemble of graphs.
#[derive(Clone, Debug, Default)]
pub struct DegreeHistogram {
    counts: BTreeMap<usize, u64>,
    n_nodes: u64,
}

impl DegreeHistogram {
    pub fn from_graph(g: &Graph) -> Self {
        let mut counts = BTreeMap::new();
        for u in 0..g.node_count() {
            *counts.entry(g.degree(u)).or_insert(0u64) += 1;
        }
        DegreeHistogram {
            counts,
            n_nodes: g.node_count() as u64,
        }
    }

    /// Builds from explicit `degree -> node count` pairs; the node total is
    /// the sum of counts.
    pub fn from_counts<I: IntoIterator<Item = (usize, u64)>>(pairs: I) -> Self {
        let mut counts = BTreeMap::new();
        for (k, c) in pairs {
            if c > 0 {
                *counts.entry(k).or_insert(0u64) += c;
            }
        }
        let n_nodes = counts.values().sum();
        DegreeHistogram { counts, n_nodes }
    }

    /// Pools another histogram into this one (ensemble accumulation).
    pub fn merge(&mut self, other: &DegreeHistogram) {
        for (&k, &c) in &other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
        self.n_nodes += other.n_nodes;
    }

    pub fn n_nodes(&self) -> u64 {
        self.n_nodes
    }

    pub fn count(&self, k: usize) -> u64 {
        self.counts.get(&k).copied().unwrap_or(0)
    }

    /// Empirical probability that a node has degree `k`.
    pub fn pk(&self, k: usize) -> f64 {
        if self.n_nodes == 0 {
            0.0
        } else {
            self.count(k) as f64 / self.n_nodes as f64
        }
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.counts.keys().next_back().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&k, &c)| (k, c))
    }

    /// Degrees with nonzero count inside the inclusive range.
    pub fn distinct_degrees_in(&self, lo: usize, hi: usize) -> usize {
        self.counts.range(lo..=hi).count()
    }

    /// `k,count,pk` rows in ascending degree order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "k,count,pk")?;
        for (k, c) in self.iter() {
            writeln!(w, "{},{},{}", k, c, self.pk(k))?;
        }
        Ok(())
    }
}

/// One occupied multiplicative bin: integer degrees `lo..hi` (half-open),
/// clipped at the analysis range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogBin {
    pub lo: usize,
    pub hi: usize,
    pub center: f64,
    /// probability mass in the bin divided by its integer width
    pub density: f64,
}

/// Integer bin boundaries from `lo` until `hi` is covered (both inclusive).
fn bin_boundaries(lo: usize, hi: usize, bins_per_decade: usize) -> Vec<usize> {
    let mut bounds = vec![lo];
    let mut j = 0usize;
    while *bounds.last().unwrap() <= hi {
        j += 1;
        let geo = (lo as f64 * 10f64.powf(j as f64 / bins_per_decade as f64)).round() as usize;
        let next = geo.max(bounds.last().unwrap() + 1);
        bounds.push(next);
    }
    bounds
}

/// Log-bins the histogram mass falling in the inclusive degree range
/// `[lo, hi]`; bins with no mass are omitted.
pub fn log_bin_histogram(
    hist: &DegreeHistogram,
    bins_per_decade: usize,
    lo: usize,
    hi: usize,
) -> Result<Vec<LogBin>, AnalysisError> {
    if hist.n_nodes == 0 {
        return Err(AnalysisError::EmptyHistogram);
    }
    if lo == 0 || hi < lo || bins_per_decade == 0 {
        return Err(AnalysisError::InvalidRange { lo, hi });
    }
    let bounds = bin_boundaries(lo, hi, bins_per_decade);
    let mut bins = Vec::new();
    for pair in bounds.windows(2) {
        let a = pair[0];
        if a > hi {
            break;
        }
        let b_eff = pair[1].min(hi + 1);
        let mass: f64 = hist
            .counts
            .range(a..b_eff)
            .map(|(_, &c)| c as f64)
            .sum::<f64>()
            / hist.n_nodes as f64;
        if mass > 0.0 {
            bins.push(LogBin {
                lo: a,
                hi: b_eff,
                center: (a as f64 * (b_eff - 1) as f64).sqrt(),
                density: mass / (b_eff - a) as f64,
            });
        }
    }
    Ok(bins)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FitMethod {
    LogBinnedLs { bins_per_decade: usize },
    TruncatedMle,
}

/// A fitted `p(k) ~ exp(amplitude_ln) * k^(-gamma_hat)` over an inclusive
/// degree range.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExponentFit {
    pub gamma_hat: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub fit_lo: usize,
    pub fit_hi: usize,
    pub method: FitMethod,
    /// natural log of the fitted amplitude, for tail extrapolation
    pub amplitude_ln: f64,
}

impl ExponentFit {
    /// Model value of `p(k)` extrapolated to any degree.
    pub fn extrapolate_pk(&self, k: usize) -> f64 {
        (self.amplitude_ln - self.gamma_hat * (k as f64).ln()).exp()
    }
}

struct LsFit {
    slope: f64,
    intercept: f64,
    r_squared: f64,
    slope_stderr: f64,
}

/// Ordinary least squares of y on x. Caller guarantees >= 3 points and
/// non-degenerate x spread.
fn linear_ls(xs: &[f64], ys: &[f64]) -> LsFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    let slope_stderr = if n > 2.0 {
        (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    LsFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
    }
}

/// Default fit window: starts at `max(min_degree, 2)` (degree-1 mass is
/// distorted by discreteness) and stops just below the cutoff spike when a
/// hard cutoff exists, or at a third of the maximum degree otherwise (the
/// natural-cutoff knee).
pub fn default_fit_range(
    hist: &DegreeHistogram,
    min_degree: usize,
    hard_cutoff: Option<usize>,
) -> Result<(usize, usize), AnalysisError> {
    let kmax = hist.max_degree().ok_or(AnalysisError::EmptyHistogram)?;
    let lo = min_degree.max(2);
    let hi = match hard_cutoff {
        Some(kc) => kc.saturating_sub(1),
        None => kmax / 3,
    };
    if hi < lo {
        return Err(AnalysisError::InvalidRange { lo, hi });
    }
    Ok((lo, hi))
}

/// Fits the exponent of `p(k) ~ k^-gamma` over the inclusive range
/// `[lo, hi]`.
pub fn fit_powerlaw_exponent(
    hist: &DegreeHistogram,
    method: FitMethod,
    lo: usize,
    hi: usize,
) -> Result<ExponentFit, AnalysisError> {
    if hist.n_nodes == 0 {
        return Err(AnalysisError::EmptyHistogram);
    }
    if lo == 0 || hi < lo {
        return Err(AnalysisError::InvalidRange { lo, hi });
    }
    match method {
        FitMethod::LogBinnedLs { bins_per_decade } => {
            let bins = log_bin_histogram(hist, bins_per_decade, lo, hi)?;
            if bins.len() < 3 {
                return Err(AnalysisError::InsufficientSupport {
                    lo,
                    hi,
                    detail: format!("{} occupied bins, need 3", bins.len()),
                });
            }
            let xs: Vec<f64> = bins.iter().map(|b| b.center.ln()).collect();
            let ys: Vec<f64> = bins.iter().map(|b| b.density.ln()).collect();
            let ls = linear_ls(&xs, &ys);
            Ok(ExponentFit {
                gamma_hat: -ls.slope,
                stderr: ls.slope_stderr,
                r_squared: ls.r_squared,
                fit_lo: lo,
                fit_hi: hi,
                method,
                amplitude_ln: ls.intercept,
            })
        }
        FitMethod::TruncatedMle => fit_mle(hist, lo, hi),
    }
}

fn fit_mle(hist: &DegreeHistogram, lo: usize, hi: usize) -> Result<ExponentFit, AnalysisError> {
    let support: Vec<(usize, u64)> = hist
        .counts
        .range(lo..=hi)
        .map(|(&k, &c)| (k, c))
        .collect();
    if support.len() < 3 {
        return Err(AnalysisError::InsufficientSupport {
            lo,
            hi,
            detail: format!("{} distinct degrees, need 3", support.len()),
        });
    }
    let n_obs: f64 = support.iter().map(|&(_, c)| c as f64).sum();
    let observed_mean_ln: f64 = support
        .iter()
        .map(|&(k, c)| c as f64 * (k as f64).ln())
        .sum::<f64>()
        / n_obs;

    // E_gamma[ln k] over the truncated integer support is strictly
    // decreasing in gamma, so bisection is safe.
    let model_mean_ln = |gamma: f64| -> f64 {
        let mut z = 0.0f64;
        let mut s = 0.0f64;
        for &(k, _) in &support {
            let lk = (k as f64).ln();
            let w = (-gamma * lk).exp();
            z += w;
            s += w * lk;
        }
        s / z
    };
    let (mut g_lo, mut g_hi) = (-5.0f64, 30.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (g_lo + g_hi);
        if model_mean_ln(mid) > observed_mean_ln {
            g_lo = mid;
        } else {
            g_hi = mid;
        }
    }
    let gamma_hat = 0.5 * (g_lo + g_hi);

    // Asymptotic stderr from the Fisher information: Var(gamma_hat) =
    // 1 / (n * Var_model[ln k]).
    let mut z = 0.0f64;
    let mut s1 = 0.0f64;
    let mut s2 = 0.0f64;
    for &(k, _) in &support {
        let lk = (k as f64).ln();
        let w = (-gamma_hat * lk).exp();
        z += w;
        s1 += w * lk;
        s2 += w * lk * lk;
    }
    let var_ln = (s2 / z - (s1 / z).powi(2)).max(0.0);
    let stderr = if var_ln > 0.0 {
        1.0 / (n_obs * var_ln).sqrt()
    } else {
        f64::INFINITY
    };

    // Amplitude that matches the in-range mass, and an r^2 of observed vs
    // model log-probabilities over the support.
    let mass_in_range = n_obs / hist.n_nodes as f64;
    let amplitude_ln = (mass_in_range / z).ln();
    let xs: Vec<f64> = support.iter().map(|&(k, _)| (k as f64).ln()).collect();
    let ys: Vec<f64> = support
        .iter()
        .map(|&(k, _)| hist.pk(k).ln())
        .collect();
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (amplitude_ln - gamma_hat * x)).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(ExponentFit {
        gamma_hat,
        stderr,
        r_squared,
        fit_lo: lo,
        fit_hi: hi,
        method: FitMethod::TruncatedMle,
        amplitude_ln,
    })
}

/// How much probability mass piles up exactly at the cutoff degree,
/// relative to what the fitted body predicts there.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpikeReport {
    pub observed_pk: f64,
    pub extrapolated_pk: f64,
    /// observed / extrapolated; > 1 means surplus mass at the cutoff
    pub excess_ratio: f64,
}

pub fn cutoff_spike_fraction(
    hist: &DegreeHistogram,
    hard_cutoff: usize,
    fit: &ExponentFit,
) -> SpikeReport {
    let observed_pk = hist.pk(hard_cutoff);
    let extrapolated_pk = fit.extrapolate_pk(hard_cutoff);
    let excess_ratio = if extrapolated_pk > 0.0 {
        observed_pk / extrapolated_pk
    } else {
        0.0
    };
    SpikeReport {
        observed_pk,
        extrapolated_pk,
        excess_ratio,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionClass {
    PowerLaw,
    Exponential,
    Ambiguous,
}

/// Compares a power-law and an exponential description of the log-binned
/// tail on r^2; calls it only when one wins by a clear margin and the data
/// spans at least five distinct degrees.
pub fn classify_distribution(
    hist: &DegreeHistogram,
    bins_per_decade: usize,
    lo: usize,
    hi: usize,
) -> Result<(DistributionClass, f64, f64), AnalysisError> {
    const MARGIN: f64 = 0.05;
    if hist.distinct_degrees_in(lo, hi) < 5 {
        return Ok((DistributionClass::Ambiguous, f64::NAN, f64::NAN));
    }
    let bins = log_bin_histogram(hist, bins_per_decade, lo, hi)?;
    if bins.len() < 3 {
        return Ok((DistributionClass::Ambiguous, f64::NAN, f64::NAN));
    }
    let ln_density: Vec<f64> = bins.iter().map(|b| b.density.ln()).collect();
    let ln_centers: Vec<f64> = bins.iter().map(|b| b.center.ln()).collect();
    let centers: Vec<f64> = bins.iter().map(|b| b.center).collect();
    let power_r2 = linear_ls(&ln_centers, &ln_density).r_squared;
    let exp_r2 = linear_ls(&centers, &ln_density).r_squared;
    let class = if power_r2 > exp_r2 + MARGIN {
        DistributionClass::PowerLaw
    } else if exp_r2 > power_r2 + MARGIN {
        DistributionClass::Exponential
    } else {
        DistributionClass::Ambiguous
    };
    Ok((class, power_r2, exp_r2))
}

/// `k_center,density` rows for the occupied bins.
pub fn write_logbinned_csv<W: Write>(bins: &[LogBin], mut w: W) -> io::Result<()> {
    writeln!(w, "k_center,density")?;
    for b in bins {
        writeln!(w, "{},{}", b.center, b.density)?;
    }
    Ok(())
}
