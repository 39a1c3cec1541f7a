//! Sweeps over domain families, experiment records, power-law fits,
//! inequality verification and report writers.

mod config;
mod fit;
mod report;
mod verify;

pub use config::{Config, FamilyConfig};
pub use fit::{fit_power_law, fit_power_law_named, FitResult};
pub use report::{plot_svg, read_jsonl, write_csv, write_jsonl, write_plots};
pub use verify::{verify_inequalities, CheckResult, Status, VerificationReport, Violation};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymmetry::{epsilon, fraenkel_asymmetry};
use crate::ball_oracle::ball_spectrum;
use crate::eigensolver::{assemble, extrapolate, lowest_eigenpairs_seeded, SpectrumResult, DEFAULT_SEED, DEFAULT_TOL};
use crate::geometry::{make_family, rasterize, FamilyKind, FamilySpec, RasterDomain};
use crate::surgery::{hat_extension, radial_cutoff, ratio_competitors, shell_scan, SurgeryConfig};
use crate::{Error, Result};

/// Largest number of eigenvalues a sweep may request.
pub const MAX_K: usize = 20;

/// Constant of the eigenfunction sup-norm bound, read as `e^{π/8}`.
pub fn linf_constant() -> f64 {
    (std::f64::consts::PI / 8.0).exp()
}

/// The alternative reading `e^{1/(8π)}`, recorded alongside.
pub fn linf_constant_alt() -> f64 {
    (1.0 / (8.0 * std::f64::consts::PI)).exp()
}

/// Everything needed to recompute one record from scratch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordParams {
    pub family: String,
    pub spec: FamilySpec,
    pub s: f64,
    pub k: usize,
    /// Values of `1/h`; the two finest drive the extrapolation.
    pub resolutions: Vec<usize>,
    pub alpha: Option<f64>,
    pub seed: u64,
    pub surgery: bool,
}

impl RecordParams {
    pub fn id(&self) -> String {
        format!("{}/{}d@{}", self.family, self.spec.dim, self.s)
    }

    /// Whether the domains sit inside the unit-volume ball by construction.
    pub fn inscribed(&self) -> bool {
        !self.spec.normalize && matches!(self.spec.kind, FamilyKind::BallWithHole | FamilyKind::BallMinusCap)
    }

    fn finest_pair(&self) -> Result<(usize, usize)> {
        let mut res = self.resolutions.clone();
        res.sort_unstable();
        res.dedup();
        match res.as_slice() {
            [.., coarse, fine] if *fine == 2 * *coarse => Ok((*coarse, *fine)),
            [.., coarse, fine] => Err(Error::SpacingMismatch {
                coarse: 1.0 / *coarse as f64,
                fine: 1.0 / *fine as f64,
            }),
            _ => Err(Error::Resolution(format!(
                "need at least two resolutions in halving relation, got {:?}",
                self.resolutions
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordStatus {
    Ok,
    Failed,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Ok => "ok",
            RecordStatus::Failed => "failed",
        }
    }
}

/// Shell scan, hat extension and radial cutoff diagnostics on the fine grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurgerySummary {
    pub alpha: f64,
    pub n: usize,
    pub shell_index: usize,
    /// `ε^α`.
    pub shell_width: f64,
    pub delta: f64,
    pub t_bar: f64,
    pub exterior_energy: Vec<f64>,
    pub exterior_energy_inner: Vec<f64>,
    pub total_energy: Vec<f64>,
    pub gamma_eff: Vec<Option<f64>>,
    pub theta_eff: Vec<Option<f64>>,
    pub hat_rayleigh: Vec<f64>,
    /// `R(û_j) - λ_j(Ω)` with both sides on the fine grid.
    pub hat_excess: Vec<f64>,
    pub hat_gram_offdiag: f64,
    pub hat_gram_diag_min: f64,
    /// The same construction at the active radius, when there is one.
    pub t_bar_active: Option<f64>,
    pub hat_excess_active: Option<Vec<f64>>,
    pub hat_gram_offdiag_active: Option<f64>,
    pub cutoff_rayleigh: f64,
    /// `R(ũ) - λ_1(Ω)` on the fine grid.
    pub cutoff_excess: f64,
}

/// Ratio competitors on an inscribed domain, fine grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompetitorSummary {
    pub sigma_min: f64,
    pub rayleigh: Vec<f64>,
    /// `R(ṽ_j) - λ_j(B)`.
    pub excess: Vec<f64>,
    pub gram_offdiag: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    pub h_fine: f64,
    pub nodes: usize,
    pub volume: f64,
    pub eigenvalues_coarse: Vec<f64>,
    pub eigenvalues_fine: Vec<f64>,
    /// Extrapolated eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// `max(2|extrapolated - fine|, 1e-3 λ_j(B))`.
    pub tolerance: Vec<f64>,
    pub ball: Vec<f64>,
    pub d: f64,
    /// `|d(h) - d(2h)|`.
    pub d_err: f64,
    pub center: [f64; 3],
    pub eps: f64,
    pub deficit_first: f64,
    pub deficit_last: f64,
    pub ratio21: Option<f64>,
    pub ratio_k1: f64,
    /// `min_j 1 - ‖u_j‖_∞ / (C λ_j^{N/4})` with `C = e^{π/8}`.
    pub linf_margin: f64,
    /// Same with `C = e^{1/(8π)}`.
    pub linf_margin_alt: f64,
    pub sup_norms: Vec<f64>,
    pub surgery: Option<SurgerySummary>,
    pub surgery_error: Option<String>,
    pub competitors: Option<CompetitorSummary>,
    pub competitor_error: Option<String>,
}

impl Measurements {
    pub fn deficit(&self, j: usize) -> f64 {
        self.eigenvalues[j] - self.ball[j]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub id: String,
    pub params: RecordParams,
    pub status: RecordStatus,
    pub error: Option<String>,
    pub measured: Option<Measurements>,
}

impl ExperimentRecord {
    pub fn is_ok(&self) -> bool {
        self.status == RecordStatus::Ok
    }
}

/// One family swept over `params` at fixed `k` and resolutions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub family: String,
    pub spec: FamilySpec,
    pub params: Vec<f64>,
    pub k: usize,
    pub resolutions: Vec<usize>,
    pub alpha: Option<f64>,
    pub seed: u64,
    pub surgery: bool,
}

impl SweepSpec {
    pub fn new(spec: FamilySpec, params: Vec<f64>, k: usize, resolutions: Vec<usize>) -> Self {
        Self {
            family: spec.kind.name().to_string(),
            spec,
            params,
            k,
            resolutions,
            alpha: None,
            seed: DEFAULT_SEED,
            surgery: true,
        }
    }

    pub fn named(mut self, family: impl Into<String>) -> Self {
        self.family = family.into();
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_surgery(mut self, on: bool) -> Self {
        self.surgery = on;
        self
    }

    pub fn record_params(&self) -> Vec<RecordParams> {
        self.params
            .iter()
            .map(|&s| RecordParams {
                family: self.family.clone(),
                spec: self.spec.clone(),
                s,
                k: self.k,
                resolutions: self.resolutions.clone(),
                alpha: self.alpha,
                seed: self.seed,
                surgery: self.surgery,
            })
            .collect()
    }

    /// Rejects requests that could not produce any record.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > MAX_K {
            return Err(Error::ParameterOutOfRange {
                what: "k".into(),
                value: self.k as f64,
                range: format!("1..={MAX_K}"),
            });
        }
        if self.params.is_empty() {
            return Err(Error::Invalid("empty parameter list".into()));
        }
        if let Some(alpha) = self.alpha {
            SurgeryConfig::new(self.spec.dim, alpha)?;
        }
        for &s in &self.params {
            make_family(&self.spec, s)?;
        }
        self.record_params()[0].finest_pair().map(|_| ())
    }
}

/// Runs every parameter of a sweep on `workers` threads. Records come back
/// sorted by `s`; failures are tagged on the record.
pub fn run_sweep(sweep: &SweepSpec, workers: usize) -> Result<Vec<ExperimentRecord>> {
    sweep.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let params = sweep.record_params();
    let mut records: Vec<ExperimentRecord> = pool.install(|| params.par_iter().map(run_record).collect());
    records.sort_by(|a, b| a.params.s.total_cmp(&b.params.s));
    Ok(records)
}

/// Recomputes a record from its serialized parameters.
pub fn rerun_record(record: &ExperimentRecord) -> ExperimentRecord {
    run_record(&record.params)
}

pub fn run_record(params: &RecordParams) -> ExperimentRecord {
    let (status, error, measured) = match measure(params) {
        Ok(m) => (RecordStatus::Ok, None, Some(m)),
        Err(e) => (RecordStatus::Failed, Some(e.to_string()), None),
    };
    ExperimentRecord {
        id: params.id(),
        params: params.clone(),
        status,
        error,
        measured,
    }
}

fn solve(raster: &RasterDomain, k: usize, seed: u64) -> Result<SpectrumResult> {
    lowest_eigenpairs_seeded(&assemble(raster), k, DEFAULT_TOL, seed)
}

fn measure(params: &RecordParams) -> Result<Measurements> {
    let (n_coarse, n_fine) = params.finest_pair()?;
    let dim = params.spec.dim;
    let k = params.k;
    let domain = make_family(&params.spec, params.s)?;
    let (h_coarse, h_fine) = (1.0 / n_coarse as f64, 1.0 / n_fine as f64);
    let coarse_raster = rasterize(&domain, h_coarse)?;
    let coarse = solve(&coarse_raster, k, params.seed)?;
    let raster = rasterize(&domain, h_fine)?;
    let fine = solve(&raster, k, params.seed)?;
    let ball = ball_spectrum(dim, k)?.eigenvalues();

    let eigenvalues = (0..k)
        .map(|j| extrapolate((h_coarse, coarse.eigenvalues[j]), (h_fine, fine.eigenvalues[j])))
        .collect::<Result<Vec<_>>>()?;
    let tolerance = (0..k)
        .map(|j| (2.0 * (eigenvalues[j] - fine.eigenvalues[j]).abs()).max(1e-3 * ball[j]))
        .collect();

    let asym = fraenkel_asymmetry(&raster);
    let d_err = (asym.d - fraenkel_asymmetry(&coarse_raster).d).abs();
    let eps = epsilon(&raster);

    let sup_norms: Vec<f64> = fine
        .eigenvectors
        .iter()
        .map(|u| u.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();
    let margin = |c: f64| {
        (0..k)
            .map(|j| 1.0 - sup_norms[j] / (c * fine.eigenvalues[j].powf(dim as f64 / 4.0)))
            .fold(f64::INFINITY, f64::min)
    };

    let (mut surgery, mut surgery_error) = (None, None);
    if params.surgery && params.spec.kind.is_near_ball() && eps > 0.0 {
        match surgery_summary(&raster, &fine, params.alpha, eps) {
            Ok(s) => surgery = Some(s),
            Err(e) => surgery_error = Some(e.to_string()),
        }
    }
    let (mut competitors, mut competitor_error) = (None, None);
    if params.inscribed() {
        match competitor_summary(&raster, &fine, &ball) {
            Ok(c) => competitors = Some(c),
            Err(e) => competitor_error = Some(e.to_string()),
        }
    }

    Ok(Measurements {
        h_fine,
        nodes: raster.len(),
        volume: raster.volume(),
        deficit_first: eigenvalues[0] - ball[0],
        deficit_last: eigenvalues[k - 1] - ball[k - 1],
        ratio21: (k >= 2).then(|| eigenvalues[1] / eigenvalues[0]),
        ratio_k1: eigenvalues[k - 1] / eigenvalues[0],
        eigenvalues_coarse: coarse.eigenvalues,
        eigenvalues_fine: fine.eigenvalues.clone(),
        eigenvalues,
        tolerance,
        ball,
        d: asym.d,
        d_err,
        center: asym.center,
        eps,
        linf_margin: margin(linf_constant()),
        linf_margin_alt: margin(linf_constant_alt()),
        sup_norms,
        surgery,
        surgery_error,
        competitors,
        competitor_error,
    })
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn offdiag_max(gram: &[Vec<f64>]) -> f64 {
    let mut m = 0.0f64;
    for (i, row) in gram.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if i != j {
                m = m.max(v.abs());
            }
        }
    }
    m
}

fn surgery_summary(raster: &RasterDomain, spectrum: &SpectrumResult, alpha: Option<f64>, eps: f64) -> Result<SurgerySummary> {
    let dim = raster.dim();
    let cfg = match alpha {
        Some(a) => SurgeryConfig::new(dim, a)?,
        None => SurgeryConfig::default_for(dim)?,
    };
    let scan = shell_scan(raster, spectrum, &cfg, eps, 0)?;
    let delta = cfg.delta(eps);
    let hat = hat_extension(raster, spectrum, scan.t_bar, delta)?;
    let cut = radial_cutoff(raster, &spectrum.eigenvectors[0], &cfg, eps)?;
    let lam = &spectrum.eigenvalues;
    let active = match scan.t_bar_active {
        Some(t) => Some(hat_extension(raster, spectrum, t, delta)?),
        None => None,
    };
    Ok(SurgerySummary {
        alpha: cfg.alpha,
        n: cfg.n,
        shell_index: scan.shell_index,
        shell_width: cfg.shell_width(eps),
        delta,
        t_bar: scan.t_bar,
        gamma_eff: scan.gamma_eff.iter().copied().map(finite).collect(),
        theta_eff: scan.theta_eff.iter().copied().map(finite).collect(),
        exterior_energy: scan.exterior_energy,
        exterior_energy_inner: scan.exterior_energy_inner,
        total_energy: scan.total_energy,
        hat_excess: hat.rayleigh.iter().zip(lam).map(|(r, l)| r - l).collect(),
        hat_gram_offdiag: offdiag_max(&hat.gram_l2),
        hat_gram_diag_min: (0..hat.gram_l2.len()).map(|j| hat.gram_l2[j][j]).fold(f64::INFINITY, f64::min),
        hat_rayleigh: hat.rayleigh,
        t_bar_active: scan.t_bar_active,
        hat_excess_active: active.as_ref().map(|a| a.rayleigh.iter().zip(lam).map(|(r, l)| r - l).collect()),
        hat_gram_offdiag_active: active.as_ref().map(|a| offdiag_max(&a.gram_l2)),
        cutoff_rayleigh: cut.rayleigh[0],
        cutoff_excess: cut.rayleigh[0] - lam[0],
    })
}

fn competitor_summary(raster: &RasterDomain, spectrum: &SpectrumResult, ball: &[f64]) -> Result<CompetitorSummary> {
    let out = ratio_competitors(raster, &spectrum.eigenvectors[0], spectrum.len(), None)?;
    Ok(CompetitorSummary {
        sigma_min: out.sigma_min,
        excess: out.rayleigh.iter().zip(ball).map(|(r, b)| r - b).collect(),
        gram_offdiag: offdiag_max(&out.gram_l2),
        rayleigh: out.rayleigh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolutions_must_halve() {
        let base = SweepSpec::new(FamilySpec::new(FamilyKind::Ellipse, 2), vec![0.1], 2, vec![16, 32]);
        assert!(base.validate().is_ok());
        let bad = SweepSpec {
            resolutions: vec![16, 24],
            ..base.clone()
        };
        assert!(matches!(bad.validate(), Err(Error::SpacingMismatch { .. })));
        let single = SweepSpec {
            resolutions: vec![16],
            ..base.clone()
        };
        assert!(matches!(single.validate(), Err(Error::Resolution(_))));
        let out_of_range = SweepSpec {
            params: vec![2.0],
            ..base.clone()
        };
        assert!(out_of_range.validate().is_err());
        let big_k = SweepSpec { k: 21, ..base };
        assert!(big_k.validate().is_err());
    }

    #[test]
    fn coarse_record_is_complete() {
        let sweep = SweepSpec::new(FamilySpec::new(FamilyKind::Ellipse, 2), vec![0.2, 0.0], 3, vec![16, 32]);
        let records = run_sweep(&sweep, 2).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].params.s, 0.0);
        for r in &records {
            let m = r.measured.as_ref().unwrap();
            assert_eq!(m.eigenvalues.len(), 3);
            assert_eq!(m.ball.len(), 3);
            assert!((m.volume - 1.0).abs() < 0.1);
            assert!(m.linf_margin > 0.0);
        }
        assert!(records[0].measured.as_ref().unwrap().surgery.is_none());
        let s = records[1].measured.as_ref().unwrap();
        assert!(s.surgery.is_some() || s.surgery_error.is_some());
        assert_eq!(rerun_record(&records[1]), records[1]);
    }

    #[test]
    fn ids_are_distinct() {
        let sweep = SweepSpec::new(FamilySpec::new(FamilyKind::BallWithHole, 2).unnormalized(), vec![0.1, 0.2], 1, vec![8, 16]);
        let p = sweep.record_params();
        assert_ne!(p[0].id(), p[1].id());
        assert!(p[0].inscribed());
    }

    #[test]
    fn linf_readings() {
        assert!((linf_constant() - 1.4809).abs() < 1e-4);
        assert!((linf_constant_alt() - 1.0406).abs() < 1e-4);
    }
}
