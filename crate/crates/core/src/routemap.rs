//! The route map: OLS and residual autocorrelation (step 1), MS-GWR and its
//! bandwidths (step 2), then classification of the bandwidths and a model
//! recommendation with every rule firing recorded (step 3).

use serde::{Deserialize, Serialize};

use crate::dataset::{DistanceMatrix, SpatialDataset};
use crate::diagnostics::{build_weight_matrix, morans_i, MoranInput, MoranResult, WeightScheme};
use crate::error::{Error, Result};
use crate::fit::CoefficientSurface;
use crate::formula::{is_intercept, Design, Formula, INTERCEPT};
use crate::global::{fit_ols, fit_sam, GlobalFit, SamOptions};
use crate::gwr::{fit_gwr, optimize_bandwidth, BandwidthCurve, Criterion, GwrFit};
use crate::kernel::{Bandwidth, BandwidthForm, KernelSpec, KernelType};
use crate::mixed::{fit_mxgwr, MxGwrFit};
use crate::multiscale::{fit_msgwr, MsGwrFit, MsGwrOptions};
use crate::scalar::Real;

/// Correlation with a coordinate above which a predictor is reported as
/// spatial.
pub const SPATIAL_PREDICTOR_CORRELATION: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct RouteMapConfig<T> {
    /// Bandwidth ratio at or above which a term is global.
    pub global_threshold: T,
    /// Largest max/min bandwidth ratio for local terms to count as similar.
    pub local_similarity_ratio: T,
    pub alpha: T,
    /// Adaptive bandwidths below this fraction of n are over-fitted.
    pub overfit_fraction: T,
    pub kernel: KernelType,
    pub form: BandwidthForm,
    pub weights: WeightScheme<T>,
    pub row_standardize: bool,
    /// Largest surface disagreement for a simpler candidate to be kept.
    pub disagreement_threshold: T,
    /// Local bandwidth for the MX-GWR candidate; the median of the local
    /// cluster when unset.
    pub mx_bandwidth: Option<T>,
    pub msgwr: MsGwrOptions,
    pub sam: SamOptions<T>,
    /// Global thresholds re-evaluated in the sensitivity table.
    pub sensitivity_grid: Vec<T>,
}

impl<T: Real> Default for RouteMapConfig<T> {
    fn default() -> Self {
        Self {
            global_threshold: T::lit(0.8),
            local_similarity_ratio: T::lit(3.0),
            alpha: T::lit(0.05),
            overfit_fraction: T::lit(0.02),
            kernel: KernelType::Bisquare,
            form: BandwidthForm::Fixed,
            weights: WeightScheme::Knn(8),
            row_standardize: true,
            disagreement_threshold: T::lit(0.2),
            mx_bandwidth: None,
            msgwr: MsGwrOptions::default(),
            sam: SamOptions::default(),
            sensitivity_grid: (10..=19).map(|k| T::lit(k as f64 / 20.0)).collect(),
        }
    }
}

impl<T: Real> RouteMapConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Contract(m.to_string()));
        if !(self.global_threshold > T::zero() && self.global_threshold <= T::one()) {
            return bad("global_threshold must lie in (0, 1]");
        }
        if !(self.local_similarity_ratio >= T::one()) {
            return bad("local_similarity_ratio must be at least 1");
        }
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(self.overfit_fraction >= T::zero() && self.overfit_fraction < T::one()) {
            return bad("overfit_fraction must lie in [0, 1)");
        }
        if !(self.disagreement_threshold >= T::zero() && self.disagreement_threshold <= T::one()) {
            return bad("disagreement_threshold must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermLabel {
    Global,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    Similar,
    Dispersed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthClassification<T> {
    pub terms: Vec<String>,
    pub bandwidths: Vec<T>,
    /// `b_k / d_max` (fixed) or `N_k / n` (adaptive).
    pub ratios: Vec<T>,
    pub labels: Vec<TermLabel>,
    pub intercept_label: TermLabel,
    /// Local terms that drive the similarity verdict (over-fitted ones
    /// excluded).
    pub local_cluster: Vec<String>,
    /// Max/min bandwidth within the local cluster.
    pub cluster_spread: Option<T>,
    /// `None` when no term is local.
    pub similarity: Option<Similarity>,
    /// Adaptive bandwidths below `overfit_fraction * n`.
    pub overfit: Vec<String>,
    pub global_threshold: T,
    pub local_similarity_ratio: T,
}

impl<T: Real> BandwidthClassification<T> {
    pub fn global_terms(&self) -> Vec<String> {
        self.with_label(TermLabel::Global)
    }

    pub fn local_terms(&self) -> Vec<String> {
        self.with_label(TermLabel::Local)
    }

    fn with_label(&self, label: TermLabel) -> Vec<String> {
        self.terms
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == label)
            .map(|(t, _)| t.clone())
            .collect()
    }
}

/// Labels each MS-GWR term global or local and judges whether the local
/// bandwidths form one cluster.
pub fn classify_bandwidths<T: Real>(
    fit: &MsGwrFit<T>,
    cfg: &RouteMapConfig<T>,
) -> BandwidthClassification<T> {
    if !fit.converged {
        log::warn!("classifying bandwidths of an MS-GWR fit that did not converge");
    }
    classify(
        &fit.terms,
        &fit.bandwidths,
        fit.max_pair_distance,
        fit.n,
        cfg.global_threshold,
        cfg.local_similarity_ratio,
        cfg.overfit_fraction,
    )
}

fn classify<T: Real>(
    terms: &[String],
    bandwidths: &[Bandwidth<T>],
    d_max: T,
    n: usize,
    theta_g: T,
    theta_s: T,
    overfit_fraction: T,
) -> BandwidthClassification<T> {
    let nf = T::from_usize_lossy(n);
    let ratios: Vec<T> = bandwidths
        .iter()
        .map(|b| match b {
            Bandwidth::Fixed(d) => *d / d_max,
            Bandwidth::Adaptive(k) => T::from_usize_lossy(*k) / nf,
        })
        .collect();
    let labels: Vec<TermLabel> = ratios
        .iter()
        .map(|&r| {
            if r >= theta_g {
                TermLabel::Global
            } else {
                TermLabel::Local
            }
        })
        .collect();
    let overfit: Vec<usize> = bandwidths
        .iter()
        .enumerate()
        .filter(|(_, b)| matches!(b, Bandwidth::Adaptive(k) if T::from_usize_lossy(*k) < overfit_fraction * nf))
        .map(|(k, _)| k)
        .collect();
    let cluster: Vec<usize> = (0..terms.len())
        .filter(|&k| labels[k] == TermLabel::Local && !overfit.contains(&k))
        .collect();
    let any_local = labels.contains(&TermLabel::Local);
    let cluster_spread = if cluster.is_empty() {
        None
    } else {
        let values: Vec<T> = cluster.iter().map(|&k| bandwidths[k].value()).collect();
        let hi = values.iter().fold(-T::infinity(), |a, &v| a.max(v));
        let lo = values.iter().fold(T::infinity(), |a, &v| a.min(v));
        Some(hi / lo)
    };
    let similarity = if !any_local {
        None
    } else {
        match cluster_spread {
            Some(s) if s <= theta_s => Some(Similarity::Similar),
            _ => Some(Similarity::Dispersed),
        }
    };
    let intercept_label = terms
        .iter()
        .position(|t| is_intercept(t))
        .map(|k| labels[k])
        .unwrap_or(TermLabel::Global);
    BandwidthClassification {
        terms: terms.to_vec(),
        bandwidths: bandwidths.iter().map(|b| b.value()).collect(),
        ratios,
        labels,
        intercept_label,
        local_cluster: cluster.iter().map(|&k| terms[k].clone()).collect(),
        cluster_spread,
        similarity,
        overfit: overfit.iter().map(|&k| terms[k].clone()).collect(),
        global_threshold: theta_g,
        local_similarity_ratio: theta_s,
    }
}

/// Which branch of the decision cascade the bandwidths select.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// R1: every term global.
    AllGlobal,
    /// R2: every predictor global, intercept local.
    LocalInterceptOnly,
    /// R3: every term local with similar bandwidths.
    AllLocalSimilar,
    /// R4: global and local terms, local bandwidths similar.
    MixedSimilar,
    /// R5: anything else.
    Multiscale,
}

impl Rule {
    pub fn code(self) -> &'static str {
        match self {
            Rule::AllGlobal => "R1",
            Rule::LocalInterceptOnly => "R2",
            Rule::AllLocalSimilar => "R3",
            Rule::MixedSimilar => "R4",
            Rule::Multiscale => "R5",
        }
    }
}

pub fn select_rule<T: Real>(cls: &BandwidthClassification<T>) -> Rule {
    let n_global = cls
        .labels
        .iter()
        .filter(|&&l| l == TermLabel::Global)
        .count();
    let all_global = n_global == cls.labels.len();
    let predictors_global = cls
        .terms
        .iter()
        .zip(&cls.labels)
        .filter(|(t, _)| !is_intercept(t))
        .all(|(_, &l)| l == TermLabel::Global);
    let similar = cls.similarity == Some(Similarity::Similar);
    if all_global {
        Rule::AllGlobal
    } else if predictors_global && cls.intercept_label == TermLabel::Local {
        Rule::LocalInterceptOnly
    } else if n_global == 0 && similar {
        Rule::AllLocalSimilar
    } else if similar {
        Rule::MixedSimilar
    } else {
        Rule::Multiscale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recommendation {
    #[serde(rename = "LINEAR")]
    Linear,
    #[serde(rename = "SAM")]
    Sam,
    #[serde(rename = "GWR")]
    Gwr,
    #[serde(rename = "MX-GWR")]
    MxGwr,
    #[serde(rename = "MS-GWR")]
    MsGwr,
}

impl Recommendation {
    pub fn label(self) -> &'static str {
        match self {
            Recommendation::Linear => "LINEAR",
            Recommendation::Sam => "SAM",
            Recommendation::Gwr => "GWR",
            Recommendation::MxGwr => "MX-GWR",
            Recommendation::MsGwr => "MS-GWR",
        }
    }
}

impl std::fmt::Display for Recommendation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Disagreement<T> {
    /// Fraction of locations where the fits disagree on sign or on
    /// significance, per shared term.
    pub per_term: Vec<(String, T)>,
    pub max: T,
}

/// Compares two sets of coefficient surfaces over the same locations.
pub fn surface_disagreement<T: Real>(
    a: &[CoefficientSurface<T>],
    b: &[CoefficientSurface<T>],
    alpha: T,
) -> Result<Disagreement<T>> {
    let mut names_a: Vec<&str> = a.iter().map(|s| s.term.as_str()).collect();
    let mut names_b: Vec<&str> = b.iter().map(|s| s.term.as_str()).collect();
    names_a.sort_unstable();
    names_b.sort_unstable();
    if names_a != names_b {
        return Err(Error::Contract(format!(
            "surfaces cover different terms: {names_a:?} vs {names_b:?}"
        )));
    }
    let mut per_term = Vec::with_capacity(a.len());
    for sa in a {
        let sb = b.iter().find(|s| s.term == sa.term).expect("same term set");
        if sa.len() != sb.len() {
            return Err(Error::Contract(format!(
                "surfaces for `{}` differ in length",
                sa.term
            )));
        }
        let n = sa.len();
        let differ = (0..n)
            .filter(|&i| {
                let sign = (sa.estimate[i] > T::zero()) != (sb.estimate[i] > T::zero());
                let sig = (sa.p_value[i] < alpha) != (sb.p_value[i] < alpha);
                sign || sig
            })
            .count();
        per_term.push((
            sa.term.clone(),
            T::from_usize_lossy(differ) / T::from_usize_lossy(n.max(1)),
        ));
    }
    let max = per_term.iter().fold(T::zero(), |m, &(_, v)| m.max(v));
    Ok(Disagreement { per_term, max })
}

/// A simpler local model weighed against the MS-GWR.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateComparison<T> {
    pub model: Recommendation,
    pub aicc: T,
    pub msgwr_aicc: T,
    pub disagreement: Disagreement<T>,
    /// Whether the simpler model was kept.
    pub kept: bool,
}

/// Candidate fits made for the comparison.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Candidates<T: Real> {
    pub sam: Option<GlobalFit<T>>,
    pub gwr: Option<GwrFit<T>>,
    pub gwr_curve: Option<BandwidthCurve<T>>,
    pub mxgwr: Option<MxGwrFit<T>>,
    pub comparison: Option<CandidateComparison<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub rule: Rule,
    pub recommendation: Recommendation,
    /// Set when the SAM and the linear regression agree, so a linear
    /// regression suffices.
    pub linear_fallback: bool,
    pub rationale: Vec<String>,
}

fn fmt_terms(terms: &[String]) -> String {
    if terms.is_empty() {
        "none".into()
    } else {
        terms.join(", ")
    }
}

/// Whether every predictor coefficient of the SAM agrees with the linear
/// regression: same sign, same significance and a difference within the sum
/// of the two standard errors.
pub fn sam_agrees_with_ols<T: Real>(ols: &GlobalFit<T>, sam: &GlobalFit<T>, alpha: T) -> bool {
    ols.coefficients
        .iter()
        .filter(|c| !is_intercept(&c.term))
        .all(|c| match sam.coefficient(&c.term) {
            Some(s) => {
                (c.estimate - s.estimate).abs() <= c.std_error + s.std_error
                    && (c.estimate > T::zero()) == (s.estimate > T::zero())
                    && c.significant(alpha) == s.significant(alpha)
            }
            None => false,
        })
}

/// Applies the decision cascade to the step-1 and step-2 evidence and any
/// candidate fits.
pub fn recommend<T: Real>(
    step1: &Step1<T>,
    step2: &Step2<T>,
    cls: &BandwidthClassification<T>,
    cfg: &RouteMapConfig<T>,
    candidates: &Candidates<T>,
) -> Decision {
    let rule = select_rule(cls);
    let mut rationale = vec![format!(
        "{}: global terms (ratio >= {}) = [{}]; local terms = [{}]",
        rule.code(),
        cls.global_threshold,
        fmt_terms(&cls.global_terms()),
        fmt_terms(&cls.local_terms())
    )];
    if let Some(s) = cls.cluster_spread {
        rationale.push(format!(
            "local cluster [{}] spread {s:.3} vs threshold {}: {:?}",
            fmt_terms(&cls.local_cluster),
            cls.local_similarity_ratio,
            cls.similarity.expect("local terms present")
        ));
    }
    if !cls.overfit.is_empty() {
        rationale.push(format!(
            "over-fitted bandwidths excluded from the cluster: [{}]",
            fmt_terms(&cls.overfit)
        ));
    }
    let mut linear_fallback = false;
    let recommendation = match rule {
        Rule::AllGlobal => {
            let p = step1.moran.p_value;
            if p >= cfg.alpha {
                rationale.push(format!(
                    "R1: all terms global and OLS residual Moran's I not significant (p = {p:.4} >= {}) -> LINEAR",
                    cfg.alpha
                ));
                Recommendation::Linear
            } else {
                rationale.push(format!(
                    "R1: all terms global but OLS residuals autocorrelated (p = {p:.4} < {}) -> SAM",
                    cfg.alpha
                ));
                Recommendation::Sam
            }
        }
        Rule::LocalInterceptOnly => {
            rationale.push("R2: all predictors global, intercept local -> SAM".into());
            if let Some(sam) = &candidates.sam {
                if sam_agrees_with_ols(&step1.ols, sam, cfg.alpha) {
                    linear_fallback = true;
                    rationale.push(
                        "R2: SAM and linear regression coefficients agree within their standard errors; \
                         a linear regression suffices (LINEAR fallback)"
                            .into(),
                    );
                }
            }
            Recommendation::Sam
        }
        Rule::AllLocalSimilar | Rule::MixedSimilar => {
            let simpler = if rule == Rule::AllLocalSimilar {
                Recommendation::Gwr
            } else {
                Recommendation::MxGwr
            };
            match &candidates.comparison {
                Some(c) if c.kept => {
                    rationale.push(format!(
                        "{}: {simpler} AICc {:.1} vs MS-GWR {:.1}; max surface disagreement {:.3} <= {} -> {simpler}",
                        rule.code(),
                        c.aicc,
                        c.msgwr_aicc,
                        c.disagreement.max,
                        cfg.disagreement_threshold
                    ));
                    simpler
                }
                Some(c) => {
                    rationale.push(format!(
                        "{}: {simpler} AICc {:.1} vs MS-GWR {:.1}; max surface disagreement {:.3} > {} -> MS-GWR",
                        rule.code(),
                        c.aicc,
                        c.msgwr_aicc,
                        c.disagreement.max,
                        cfg.disagreement_threshold
                    ));
                    Recommendation::MsGwr
                }
                None => {
                    rationale.push(format!(
                        "{}: no {simpler} candidate available -> MS-GWR",
                        rule.code()
                    ));
                    Recommendation::MsGwr
                }
            }
        }
        Rule::Multiscale => {
            rationale.push("R5: local bandwidths dispersed -> MS-GWR".into());
            Recommendation::MsGwr
        }
    };
    if step2.moran.p_value < cfg.alpha {
        rationale.push(format!(
            "note: MS-GWR residuals remain autocorrelated (p = {:.4})",
            step2.moran.p_value
        ));
    }
    Decision {
        rule,
        recommendation,
        linear_fallback,
        rationale,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Step1<T: Real> {
    pub ols: GlobalFit<T>,
    pub moran: MoranResult<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Step2<T: Real> {
    pub msgwr: MsGwrFit<T>,
    pub moran: MoranResult<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow<T> {
    pub model: String,
    pub aicc: T,
}

/// AICc of every fitted model, plus the linear, MS-GWR and chosen columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AiccComparison<T> {
    pub rows: Vec<ComparisonRow<T>>,
    pub ols_aicc: T,
    pub msgwr_aicc: T,
    pub chosen_model: String,
    pub chosen_aicc: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityRow<T> {
    pub global_threshold: T,
    pub rule: Rule,
    pub global_terms: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RouteMapReport<T: Real> {
    pub formula: Formula,
    pub n: usize,
    pub max_pair_distance: T,
    pub config: RouteMapConfig<T>,
    pub step1: Step1<T>,
    pub step2: Step2<T>,
    pub classification: BandwidthClassification<T>,
    pub decision: Decision,
    pub candidates: Candidates<T>,
    pub comparison: AiccComparison<T>,
    /// Rule selected at each global threshold of the sensitivity grid.
    pub sensitivity: Vec<SensitivityRow<T>>,
    pub warnings: Vec<String>,
}

impl<T: Real> RouteMapReport<T> {
    pub fn recommendation(&self) -> Recommendation {
        self.decision.recommendation
    }

    /// Plain-text account of the run.
    pub fn narrative(&self) -> String {
        let mut out = String::new();
        let push = |out: &mut String, s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        push(
            &mut out,
            format!("Route map for {} (n = {})", self.formula, self.n),
        );
        push(&mut out, String::new());
        push(
            &mut out,
            format!(
                "Step 1  OLS: R2 = {:.3}, AICc = {:.1}; residual Moran's I = {:.3} (p = {:.4})",
                self.step1.ols.r_squared,
                self.step1.ols.aicc,
                self.step1.moran.i,
                self.step1.moran.p_value
            ),
        );
        push(
            &mut out,
            format!(
                "Step 2  MS-GWR: R2 = {:.3}, AICc = {:.1}; residual Moran's I = {:.3} (p = {:.4}){}",
                self.step2.msgwr.r_squared,
                self.step2.msgwr.aicc,
                self.step2.moran.i,
                self.step2.moran.p_value,
                if self.step2.msgwr.converged { "" } else { " [NOT CONVERGED]" }
            ),
        );
        for k in 0..self.classification.terms.len() {
            push(
                &mut out,
                format!(
                    "        {:<12} bandwidth {:>10.1}  ratio {:.3}  {:?}",
                    self.classification.terms[k],
                    self.classification.bandwidths[k],
                    self.classification.ratios[k],
                    self.classification.labels[k]
                ),
            );
        }
        push(&mut out, "Step 3".into());
        for r in &self.decision.rationale {
            push(&mut out, format!("        {r}"));
        }
        push(
            &mut out,
            format!(
                "Recommendation: {}{}",
                self.decision.recommendation,
                if self.decision.linear_fallback {
                    " (a linear regression suffices)"
                } else {
                    ""
                }
            ),
        );
        push(&mut out, String::new());
        push(&mut out, "AICc comparison".into());
        for row in &self.comparison.rows {
            push(
                &mut out,
                format!("        {:<8} {:.1}", row.model, row.aicc),
            );
        }
        push(&mut out, String::new());
        push(&mut out, "Global-threshold sensitivity".into());
        for s in &self.sensitivity {
            push(
                &mut out,
                format!(
                    "        {:.2}  {}  global = [{}]",
                    s.global_threshold,
                    s.rule.code(),
                    fmt_terms(&s.global_terms)
                ),
            );
        }
        if !self.warnings.is_empty() {
            push(&mut out, String::new());
            push(&mut out, "Warnings".into());
            for w in &self.warnings {
                push(&mut out, format!("        - {w}"));
            }
        }
        out
    }
}

fn correlation<T: Real>(a: &[T], b: &[T]) -> T {
    let n = T::from_usize_lossy(a.len());
    let ma = a.iter().fold(T::zero(), |s, &v| s + v) / n;
    let mb = b.iter().fold(T::zero(), |s, &v| s + v) / n;
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Predictors nearly collinear with a coordinate or with the distance to
/// the centroid.
fn spatial_predictor_warnings<T: Real>(
    ds: &SpatialDataset<T>,
    formula: &Formula,
) -> Result<Vec<String>> {
    let coords = ds.coords();
    let n = T::from_usize_lossy(coords.len());
    let u: Vec<T> = coords.iter().map(|c| c[0]).collect();
    let v: Vec<T> = coords.iter().map(|c| c[1]).collect();
    let cu = u.iter().fold(T::zero(), |a, &x| a + x) / n;
    let cv = v.iter().fold(T::zero(), |a, &x| a + x) / n;
    let dist: Vec<T> = coords
        .iter()
        .map(|c| ((c[0] - cu) * (c[0] - cu) + (c[1] - cv) * (c[1] - cv)).sqrt())
        .collect();
    let mut out = Vec::new();
    for name in &formula.predictors {
        let x = ds.variable(name)?;
        for (what, s) in [
            ("x coordinate", &u),
            ("y coordinate", &v),
            ("distance to centroid", &dist),
        ] {
            let r = correlation(x, s);
            if r.abs() > T::lit(SPATIAL_PREDICTOR_CORRELATION) {
                out.push(format!(
                    "predictor `{name}` correlates with the {what} (r = {r:.3}); spatial predictors confound local coefficients"
                ));
            }
        }
    }
    Ok(out)
}

fn median<T: Real>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) / T::lit(2.0)
    }
}

fn aborted(stage: &str, partial: &[String], warnings: &[String], source: Error) -> Error {
    let mut lines = partial.to_vec();
    lines.extend(warnings.iter().map(|w| format!("warning: {w}")));
    Error::RouteMap {
        stage: stage.into(),
        source: Box::new(source),
        partial: lines,
    }
}

/// Runs steps 1-3 of the route map. A failing fit aborts the run; the
/// error carries the steps completed so far.
pub fn run_routemap<T: Real>(
    ds: &SpatialDataset<T>,
    formula: &Formula,
    cfg: &RouteMapConfig<T>,
) -> Result<RouteMapReport<T>> {
    cfg.validate()?;
    let dm = DistanceMatrix::new(ds);
    let design = Design::new(ds, formula)?;
    let w = build_weight_matrix(&dm, cfg.weights, cfg.row_standardize)?;
    let mut warnings = Vec::new();
    if !w.islands.is_empty() {
        warnings.push(format!(
            "{} observation(s) have no neighbours under {}",
            w.islands.len(),
            cfg.weights
        ));
    }
    warnings.extend(spatial_predictor_warnings(ds, formula)?);

    // step 1
    log::info!("route map step 1: linear regression");
    let mut partial: Vec<String> = Vec::new();
    let step1_err = |e| aborted("step 1 (linear regression)", &[], &warnings, e);
    let ols = fit_ols(ds, formula).map_err(step1_err)?;
    let moran1 =
        morans_i(&ols.residuals, &w, MoranInput::ResidualAdjusted(&design.x)).map_err(step1_err)?;
    partial.push(format!(
        "Step 1  OLS: R2 = {:.3}, AICc = {:.1}; residual Moran's I = {:.3} (p = {:.4})",
        ols.r_squared, ols.aicc, moran1.i, moran1.p_value
    ));
    if let Some(p) = ols.f_p_value {
        if p >= cfg.alpha {
            warnings.push(format!(
                "OLS F-test not significant (p = {p:.4}): no worthwhile relationships between the response and predictors"
            ));
        }
    }
    let step1 = Step1 { ols, moran: moran1 };

    // step 2
    log::info!("route map step 2: multiscale GWR");
    let msgwr = fit_msgwr(ds, formula, &dm, cfg.kernel, cfg.form, &cfg.msgwr)
        .map_err(|e| aborted("step 2 (multiscale GWR)", &partial, &warnings, e))?;
    if !msgwr.converged {
        warnings
            .push("MS-GWR did not converge; the bandwidth classification is provisional".into());
    }
    let moran2 = morans_i(&msgwr.residuals, &w, MoranInput::Raw)
        .map_err(|e| aborted("step 2 (multiscale GWR)", &partial, &warnings, e))?;
    partial.push(format!(
        "Step 2  MS-GWR: R2 = {:.3}, AICc = {:.1}; residual Moran's I = {:.3} (p = {:.4})",
        msgwr.r_squared, msgwr.aicc, moran2.i, moran2.p_value
    ));
    for (t, b) in msgwr.terms.iter().zip(&msgwr.bandwidths) {
        partial.push(format!("        {t} bandwidth {b}"));
    }
    let step2 = Step2 {
        msgwr,
        moran: moran2,
    };

    // step 3
    let cls = classify_bandwidths(&step2.msgwr, cfg);
    if !cls.overfit.is_empty() {
        warnings.push(format!(
            "bandwidths below {} of n indicate over-fitting: [{}]",
            cfg.overfit_fraction,
            fmt_terms(&cls.overfit)
        ));
    }
    let tenth = T::lit(0.1);
    for (t, &r) in cls.terms.iter().zip(&cls.ratios) {
        if (r - cfg.global_threshold).abs() <= tenth * cfg.global_threshold {
            warnings.push(format!(
                "`{t}` bandwidth ratio {r:.3} is within 10% of the global threshold {}; see the sensitivity table",
                cfg.global_threshold
            ));
        }
    }
    if let Some(s) = cls.cluster_spread {
        if (s - cfg.local_similarity_ratio).abs() <= tenth * cfg.local_similarity_ratio {
            warnings.push(format!(
                "local cluster spread {s:.3} is within 10% of the similarity threshold {}",
                cfg.local_similarity_ratio
            ));
        }
    }
    let rule = select_rule(&cls);
    partial.push(format!("Step 3  rule {}", rule.code()));
    let mut candidates = Candidates::default();
    let d_max = dm.max_pair_distance();
    const STEP3: &str = "step 3 (candidate model)";
    match rule {
        Rule::AllGlobal if step1.moran.p_value < cfg.alpha => {
            candidates.sam = Some(
                fit_sam(ds, formula, &dm, &cfg.sam)
                    .map_err(|e| aborted(STEP3, &partial, &warnings, e))?,
            );
        }
        Rule::LocalInterceptOnly => {
            candidates.sam = Some(
                fit_sam(ds, formula, &dm, &cfg.sam)
                    .map_err(|e| aborted(STEP3, &partial, &warnings, e))?,
            );
        }
        Rule::AllLocalSimilar => {
            log::info!("route map step 3: standard GWR candidate");
            let (bw, curve) =
                optimize_bandwidth(ds, formula, &dm, cfg.kernel, cfg.form, Criterion::Aicc)
                    .map_err(|e| aborted(STEP3, &partial, &warnings, e))?;
            if curve.plateau {
                warnings.push(
                    "GWR bandwidth curve is plateaued: a linear regression would likely suffice"
                        .into(),
                );
            }
            if curve.boundary_minimum {
                warnings.push(format!(
                    "GWR bandwidth optimum {bw} lies on the search boundary"
                ));
            }
            if curve.overfit {
                warnings.push(format!("GWR bandwidth {bw} indicates over-fitting"));
            }
            let gwr = fit_gwr(ds, formula, &dm, &KernelSpec::new(cfg.kernel, bw))
                .map_err(|e| aborted(STEP3, &partial, &warnings, e))?;
            let disagreement =
                surface_disagreement(&gwr.surfaces, &step2.msgwr.surfaces, cfg.alpha)?;
            candidates.comparison = Some(CandidateComparison {
                model: Recommendation::Gwr,
                aicc: gwr.aicc,
                msgwr_aicc: step2.msgwr.aicc,
                kept: disagreement.max <= cfg.disagreement_threshold,
                disagreement,
            });
            candidates.gwr = Some(gwr);
            candidates.gwr_curve = Some(curve);
        }
        Rule::MixedSimilar => {
            log::info!("route map step 3: mixed GWR candidate");
            let cluster_bw: Vec<T> = cls
                .terms
                .iter()
                .zip(&cls.bandwidths)
                .filter(|(t, _)| cls.local_cluster.contains(t))
                .map(|(_, &b)| b)
                .collect();
            let b = cfg.mx_bandwidth.unwrap_or_else(|| median(cluster_bw));
            let bandwidth = match cfg.form {
                BandwidthForm::Fixed => Bandwidth::Fixed(b.min(d_max)),
                BandwidthForm::Adaptive => {
                    Bandwidth::Adaptive((b.as_f64().round() as usize).clamp(1, ds.n()))
                }
            };
            if cfg.mx_bandwidth.is_none() {
                warnings.push(format!(
                    "MX-GWR local bandwidth {bandwidth} is the median of the local-cluster MS-GWR bandwidths (a user-specified value can be set with mx_bandwidth)"
                ));
            }
            let global = cls.global_terms();
            let local = cls.local_terms();
            let mx = fit_mxgwr(
                ds,
                formula,
                &dm,
                &global,
                &local,
                &KernelSpec::new(cfg.kernel, bandwidth),
            )
            .map_err(|e| aborted(STEP3, &partial, &warnings, e))?;
            let disagreement =
                surface_disagreement(&mx.all_surfaces(), &step2.msgwr.surfaces, cfg.alpha)?;
            candidates.comparison = Some(CandidateComparison {
                model: Recommendation::MxGwr,
                aicc: mx.aicc,
                msgwr_aicc: step2.msgwr.aicc,
                kept: disagreement.max <= cfg.disagreement_threshold,
                disagreement,
            });
            candidates.mxgwr = Some(mx);
        }
        _ => {}
    }
    let decision = recommend(&step1, &step2, &cls, cfg, &candidates);

    let mut rows = vec![ComparisonRow {
        model: "LINEAR".into(),
        aicc: step1.ols.aicc,
    }];
    if let Some(s) = &candidates.sam {
        rows.push(ComparisonRow {
            model: "SAM".into(),
            aicc: s.aicc,
        });
    }
    if let Some(g) = &candidates.gwr {
        rows.push(ComparisonRow {
            model: "GWR".into(),
            aicc: g.aicc,
        });
    }
    if let Some(m) = &candidates.mxgwr {
        rows.push(ComparisonRow {
            model: "MX-GWR".into(),
            aicc: m.aicc,
        });
    }
    rows.push(ComparisonRow {
        model: "MS-GWR".into(),
        aicc: step2.msgwr.aicc,
    });
    let chosen = decision.recommendation.label();
    let chosen_aicc = rows
        .iter()
        .find(|r| r.model == chosen)
        .map(|r| r.aicc)
        .expect("the chosen model was fitted");
    let comparison = AiccComparison {
        ols_aicc: step1.ols.aicc,
        msgwr_aicc: step2.msgwr.aicc,
        chosen_model: chosen.to_string(),
        chosen_aicc,
        rows,
    };

    let sensitivity = cfg
        .sensitivity_grid
        .iter()
        .map(|&theta| {
            let c = classify(
                &step2.msgwr.terms,
                &step2.msgwr.bandwidths,
                step2.msgwr.max_pair_distance,
                step2.msgwr.n,
                theta,
                cfg.local_similarity_ratio,
                cfg.overfit_fraction,
            );
            SensitivityRow {
                global_threshold: theta,
                rule: select_rule(&c),
                global_terms: c.global_terms(),
            }
        })
        .collect::<Vec<_>>();
    if sensitivity.iter().any(|s| s.rule != decision.rule) {
        warnings.push(format!(
            "the selected rule changes across the global-threshold grid (here {} at {}); see the sensitivity table",
            decision.rule.code(),
            cfg.global_threshold
        ));
    }

    Ok(RouteMapReport {
        formula: formula.clone(),
        n: ds.n(),
        max_pair_distance: d_max,
        config: cfg.clone(),
        step1,
        step2,
        classification: cls,
        decision,
        candidates,
        comparison,
        sensitivity,
        warnings,
    })
}

/// Name used for the intercept in reports and configuration files.
pub const INTERCEPT_NAME: &str = INTERCEPT;

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn fixed(v: &[f64]) -> Vec<Bandwidth<f64>> {
        v.iter().map(|&b| Bandwidth::Fixed(b)).collect()
    }

    #[test]
    fn intercept_local_predictors_global() {
        let c = classify(
            &names(&["Intercept", "SOCgkg", "NH4Ngkg"]),
            &fixed(&[424.9, 3741.4, 3741.8]),
            3741.8,
            689,
            0.8,
            3.0,
            0.02,
        );
        assert_eq!(
            c.labels,
            vec![TermLabel::Local, TermLabel::Global, TermLabel::Global]
        );
        assert_eq!(select_rule(&c), Rule::LocalInterceptOnly);
    }

    #[test]
    fn all_at_maximum_is_all_global() {
        let c = classify(
            &names(&["Intercept", "a"]),
            &fixed(&[10.0, 10.0]),
            10.0,
            50,
            0.8,
            3.0,
            0.02,
        );
        assert_eq!(select_rule(&c), Rule::AllGlobal);
        assert_eq!(c.similarity, None);
    }

    #[test]
    fn lowered_threshold_groups_a_similar_local_cluster() {
        let terms = names(&[
            "Intercept",
            "SOCgkg",
            "ClayPC",
            "SiltPC",
            "NO3Ngkg",
            "NH4Ngkg",
        ]);
        let bws = fixed(&[555.9, 2483.9, 3741.7, 1080.8, 382.5, 3741.7]);
        let c = classify(&terms, &bws, 3742.0, 689, 0.6, 3.0, 0.02);
        assert_eq!(c.global_terms(), names(&["SOCgkg", "ClayPC", "NH4Ngkg"]));
        assert_eq!(c.local_terms(), names(&["Intercept", "SiltPC", "NO3Ngkg"]));
        assert!((c.cluster_spread.unwrap() - 1080.8 / 382.5).abs() < 1e-12);
        assert_eq!(select_rule(&c), Rule::MixedSimilar);
        let c = classify(&terms, &bws, 3742.0, 689, 0.8, 3.0, 0.02);
        assert_eq!(select_rule(&c), Rule::Multiscale);
    }

    #[test]
    fn dispersed_locals_go_multiscale() {
        let c = classify(
            &names(&["Intercept", "SOCgkg", "SandPC", "NO3Ngkg"]),
            &fixed(&[573.6, 2214.6, 1066.5, 378.4]),
            3742.0,
            689,
            0.8,
            3.0,
            0.02,
        );
        assert!(c.global_terms().is_empty());
        assert_eq!(c.similarity, Some(Similarity::Dispersed));
        assert_eq!(select_rule(&c), Rule::Multiscale);
    }

    #[test]
    fn overfitted_bandwidths_leave_the_cluster() {
        let c = classify(
            &names(&["Intercept", "a", "b"]),
            &[
                Bandwidth::Adaptive(5),
                Bandwidth::Adaptive(100),
                Bandwidth::Adaptive(150),
            ],
            1.0,
            500,
            0.8,
            3.0,
            0.02,
        );
        assert_eq!(c.overfit, names(&["Intercept"]));
        assert_eq!(c.local_cluster, names(&["a", "b"]));
        assert_eq!(c.similarity, Some(Similarity::Similar));
    }

    #[test]
    fn raising_the_threshold_never_globalizes() {
        let terms = names(&["Intercept", "a", "b", "c"]);
        let bws = fixed(&[100.0, 700.0, 850.0, 999.0]);
        let mut prev: Vec<TermLabel> = vec![TermLabel::Global; 4];
        for k in 1..=20 {
            let c = classify(&terms, &bws, 1000.0, 100, k as f64 * 0.05, 3.0, 0.02);
            for (a, b) in prev.iter().zip(&c.labels) {
                assert!(!(*a == TermLabel::Local && *b == TermLabel::Global));
            }
            prev = c.labels;
        }
    }

    #[test]
    fn disagreement_extremes() {
        let s = CoefficientSurface::from_estimates(
            "a",
            vec![1.0, 2.0, -1.0],
            vec![0.1, 0.1, 0.1],
            50.0,
        );
        let d =
            surface_disagreement(std::slice::from_ref(&s), std::slice::from_ref(&s), 0.05).unwrap();
        assert_eq!(d.max, 0.0);
        let flipped = CoefficientSurface::from_estimates(
            "a",
            vec![-1.0, -2.0, 1.0],
            vec![0.1, 0.1, 0.1],
            50.0,
        );
        let d = surface_disagreement(std::slice::from_ref(&s), &[flipped], 0.05).unwrap();
        assert_eq!(d.max, 1.0);
        let other = CoefficientSurface::from_estimates(
            "b",
            vec![1.0, 2.0, -1.0],
            vec![0.1, 0.1, 0.1],
            50.0,
        );
        assert!(surface_disagreement(&[s], &[other], 0.05).is_err());
    }

    #[test]
    fn config_round_trips_and_validates() {
        let cfg = RouteMapConfig::<f64> {
            global_threshold: 0.6,
            ..Default::default()
        };
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RouteMapConfig<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        let bad = RouteMapConfig::<f64> {
            local_similarity_ratio: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
