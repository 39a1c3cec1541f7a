use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::fit::{fit_power_law_named, FitResult};
use super::{ExperimentRecord, Measurements, SurgerySummary};

/// Largest allowed ratio between the constant needed over the smaller half
/// of a family's abscissae and the one needed over the larger half.
pub const STABILITY_FACTOR: f64 = 3.0;
/// Fitted exponents may fall this far below the guaranteed ones.
pub const EXPONENT_SLACK: f64 = 0.3;
/// Floor on the exponent of higher deficits against the first on
/// inscribed domains.
pub const INSCRIBED_FLOOR: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    NotApplicable,
    Holds,
    HoldsWithinTolerance,
    Violated,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::NotApplicable => "not-applicable",
            Status::Holds => "holds",
            Status::HoldsWithinTolerance => "holds-within-tolerance",
            Status::Violated => "violated",
        }
    }

    fn from_margin(margin: f64, tol: f64) -> Self {
        if margin >= 0.0 {
            Status::Holds
        } else if margin >= -tol {
            Status::HoldsWithinTolerance
        } else {
            Status::Violated
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub record: String,
    pub margin: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    /// Smallest margin seen; negative beyond tolerance means violated.
    pub margin: Option<f64>,
    pub worst_record: Option<String>,
    /// Fitted constant where the check has one.
    pub constant: Option<f64>,
    pub fits: Vec<FitResult>,
    pub violations: Vec<Violation>,
    pub note: String,
    /// Reported only; does not affect the exit code.
    pub advisory: bool,
}

impl CheckResult {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            status: Status::NotApplicable,
            margin: None,
            worst_record: None,
            constant: None,
            fits: Vec::new(),
            violations: Vec::new(),
            note: String::new(),
            advisory: false,
        }
    }

    fn observe(&mut self, record: &str, margin: f64, tol: f64, detail: impl FnOnce() -> String) {
        let status = Status::from_margin(margin, tol);
        if self.margin.map_or(true, |m| margin < m) {
            self.margin = Some(margin);
            self.worst_record = Some(record.to_string());
        }
        if status == Status::Violated {
            self.violations.push(Violation {
                record: record.to_string(),
                margin,
                detail: detail(),
            });
        }
        self.status = self.status.max(status);
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub records: usize,
    pub failed_records: Vec<String>,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// 2 when any record failed to solve, 1 on a violation, else 0.
    pub fn exit_code(&self) -> i32 {
        if !self.failed_records.is_empty() {
            2
        } else if self.checks.iter().any(|c| !c.advisory && c.status == Status::Violated) {
            1
        } else {
            0
        }
    }

    pub fn summary(&self) -> String {
        let mut out = format!("{} records, {} failed\n", self.records, self.failed_records.len());
        for c in &self.checks {
            let status = if c.advisory {
                format!("{} (advisory)", c.status.as_str())
            } else {
                c.status.as_str().to_string()
            };
            out.push_str(&format!("{:<28} {:<34}", c.name, status));
            if let Some(m) = c.margin {
                out.push_str(&format!(" margin {m:.6e}"));
            }
            if let Some(r) = &c.worst_record {
                out.push_str(&format!(" worst {r}"));
            }
            if !c.note.is_empty() {
                out.push_str(&format!(" ({})", c.note));
            }
            out.push('\n');
        }
        out
    }
}

type Group<'a> = Vec<(&'a ExperimentRecord, &'a Measurements)>;

// Successful records grouped by (family, dimension), each sorted by s.
fn groups(records: &[ExperimentRecord]) -> BTreeMap<(String, usize), Group<'_>> {
    let mut out: BTreeMap<(String, usize), Group<'_>> = BTreeMap::new();
    for r in records {
        if let Some(m) = &r.measured {
            out.entry((r.params.family.clone(), r.params.spec.dim)).or_default().push((r, m));
        }
    }
    for g in out.values_mut() {
        g.sort_by(|a, b| a.0.params.s.total_cmp(&b.0.params.s));
    }
    out
}

/// One-sided stability of `C_i = y_i / x_i^β`: the constant needed over
/// the smaller half of the abscissae divided by the constant needed over the
/// larger half. Returns the ratio, the record setting the numerator, and the
/// overall constant.
fn stability<'a>(points: &[(&'a str, f64, f64)], beta: f64) -> Option<(f64, String, f64)> {
    if points.len() < 2 {
        return None;
    }
    let mut c: Vec<(&'a str, f64, f64)> = points.iter().map(|p| (p.0, p.1, p.2.max(0.0) / p.1.powf(beta))).collect();
    c.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (small, large) = c.split_at(c.len() / 2);
    let peak = |s: &[(&'a str, f64, f64)]| s.iter().copied().max_by(|a, b| a.2.total_cmp(&b.2)).unwrap();
    let (lo, hi) = (peak(small), peak(large));
    let overall = lo.2.max(hi.2);
    if overall == 0.0 {
        return None;
    }
    Some((lo.2 / hi.2, lo.0.to_string(), overall))
}

fn stability_check(check: &mut CheckResult, label: &str, points: &[(&str, f64, f64)], beta: f64) {
    if points.len() < 2 {
        return;
    }
    match stability(points, beta) {
        Some((ratio, worst, c)) => {
            check.observe(&worst, STABILITY_FACTOR - ratio, 0.0, || {
                format!("{label}: constant varies by factor {ratio:.3} > {STABILITY_FACTOR}")
            });
            check.constant = Some(check.constant.map_or(c, |m: f64| m.max(c)));
        }
        None => check.status = check.status.max(Status::Holds),
    }
}

fn exponent_floor(check: &mut CheckResult, points: &[(&str, f64, f64)], floor: f64, x: &str, y: &str) {
    let data: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 0.0 && p.2 > 0.0).map(|p| (p.1, p.2)).collect();
    if let Ok(fit) = fit_power_law_named(&data, x, y) {
        let worst = points.first().map(|p| p.0).unwrap_or_default();
        let exponent = fit.exponent;
        check.observe(worst, exponent - floor, 0.0, || format!("{y} vs {x}: exponent {exponent:.3} below {floor:.3}"));
        check.fits.push(fit);
    }
}

/// Rayleigh quotient excesses this small relative to the eigenvalue are
/// rounding, not signal.
const NOISE: f64 = 1e-9;

fn above_noise(excess: f64, lambda: f64) -> f64 {
    if excess.abs() <= NOISE * lambda {
        0.0
    } else {
        excess
    }
}

/// Checks every inequality the records can speak to.
pub fn verify_inequalities(records: &[ExperimentRecord]) -> VerificationReport {
    let ok: Vec<(&ExperimentRecord, &Measurements)> =
        records.iter().filter_map(|r| r.measured.as_ref().map(|m| (r, m))).collect();
    let failed_records = records.iter().filter(|r| !r.is_ok()).map(|r| r.id.clone()).collect();
    let families = groups(records);

    let mut fk = CheckResult::new("faber-krahn");
    let mut qfk = CheckResult::new("quantitative-faber-krahn").note("deficit ≥ c·d² with c > 0");
    let mut ab = CheckResult::new("ashbaugh-benguria");
    let mut linear = CheckResult::new("linear-second-eigenvalue");
    let mut linf = CheckResult::new("linf-bound").note("C = e^{π/8}");
    let mut exterior = CheckResult::new("exterior-energy");
    let mut span = CheckResult::new("competitor-span");
    let mut qfk_c = f64::INFINITY;

    for (r, m) in &ok {
        let id = r.id.as_str();
        let (l1, b1, t1) = (m.eigenvalues[0], m.ball[0], m.tolerance[0]);
        fk.observe(id, l1 - b1, t1, || format!("λ_1 = {l1} below λ_1(B) = {b1}"));

        if m.d > 0.0 {
            qfk_c = qfk_c.min((l1 - b1) / (m.d * m.d));
            qfk.observe(id, l1 - b1, t1, || format!("deficit {} at d = {}", l1 - b1, m.d));
        }

        if m.eigenvalues.len() >= 2 {
            let (l2, b2, t2) = (m.eigenvalues[1], m.ball[1], m.tolerance[1]);
            let rb = b2 / b1;
            let ratio = l2 / l1;
            ab.observe(id, rb - ratio, rb * (t1 / l1 + t2 / l2), || format!("λ_2/λ_1 = {ratio} exceeds {rb}"));
            let lin = rb * (l1 - b1) - (l2 - b2);
            linear.observe(id, lin, t2 + rb * t1, || format!("λ_2 deficit exceeds {rb}·λ_1 deficit by {}", -lin));
        }

        linf.observe(id, m.linf_margin, 0.0, || format!("sup-norm margin {}", m.linf_margin));

        if let Some(s) = &m.surgery {
            for (j, e) in s.exterior_energy_inner.iter().enumerate() {
                let lam = m.eigenvalues_fine[j];
                exterior.observe(id, lam - e, 1e-8 * lam, || format!("exterior energy {e} exceeds λ_{} = {lam}", j + 1));
            }
        }
        if r.params.inscribed() {
            match (&m.competitors, &m.competitor_error) {
                (Some(c), _) => span.observe(id, c.sigma_min - 0.5, 0.0, || format!("σ_min = {}", c.sigma_min)),
                (None, err) => span.observe(id, -1.0, 0.0, || err.clone().unwrap_or_else(|| "no competitors".into())),
            }
        }
    }
    if qfk_c.is_finite() {
        qfk.constant = Some(qfk_c);
    }

    let mut upper = CheckResult::new("theorem-upper");
    let mut lower = CheckResult::new("theorem-lower");
    let mut ratio_bound = CheckResult::new("eigenvalue-ratio-bound");
    let mut inscribed = CheckResult::new("inscribed-deficits");
    let mut hat = CheckResult::new("hat-extension");
    let mut hat_active = CheckResult::new("hat-extension-active");
    let mut cutoff = CheckResult::new("radial-cutoff");

    for ((family, dim), group) in &families {
        let (beta_up, beta_low) = if *dim == 2 { (1.0 / 8.0, 0.5) } else { (1.0 / 12.0, 1.0 / 3.0) };
        let k = group.iter().map(|(_, m)| m.eigenvalues.len()).min().unwrap_or(0);
        let near_ball = group[0].0.params.spec.kind.is_near_ball();
        let is_inscribed = group[0].0.params.inscribed();

        let max_ratio = group.iter().map(|(_, m)| m.ratio_k1).fold(0.0f64, f64::max);
        for (r, m) in group {
            let finite = m.ratio_k1.is_finite() && m.ratio_k1 >= 1.0 - m.tolerance[0] / m.eigenvalues[0];
            ratio_bound.observe(&r.id, if finite { 1.0 } else { -1.0 }, 0.0, || format!("λ_k/λ_1 = {}", m.ratio_k1));
        }
        ratio_bound.constant = Some(ratio_bound.constant.map_or(max_ratio, |c: f64| c.max(max_ratio)));

        if near_ball && !is_inscribed {
            for j in 0..k {
                let up: Vec<(&str, f64, f64)> = group
                    .iter()
                    .filter(|(_, m)| m.deficit_first > m.tolerance[0])
                    .map(|(r, m)| (r.id.as_str(), m.deficit_first, m.deficit(j).abs()))
                    .collect();
                stability_check(&mut upper, &format!("{family} λ_{}", j + 1), &up, beta_up);
                exponent_floor(&mut upper, &up, beta_up - EXPONENT_SLACK, "deficit_1", &format!("|deficit_{}|", j + 1));

                let low: Vec<(&str, f64, f64)> = group
                    .iter()
                    .filter(|(_, m)| m.d > 0.0)
                    .map(|(r, m)| (r.id.as_str(), m.d, -m.deficit(j)))
                    .collect();
                stability_check(&mut lower, &format!("{family} λ_{}", j + 1), &low, beta_low);
            }
        }

        if is_inscribed {
            for j in 1..k {
                let pts: Vec<(&str, f64, f64)> = group
                    .iter()
                    .filter(|(_, m)| m.deficit_first > m.tolerance[0])
                    .map(|(r, m)| (r.id.as_str(), m.deficit_first, m.deficit(j)))
                    .collect();
                let c = pts.iter().map(|p| p.2.max(0.0) / p.1.sqrt()).fold(0.0f64, f64::max);
                inscribed.constant = Some(inscribed.constant.map_or(c, |m: f64| m.max(c)));
                exponent_floor(&mut inscribed, &pts, INSCRIBED_FLOOR, "deficit_1", &format!("deficit_{}", j + 1));
            }
        }

        let with_surgery: Vec<(&str, &Measurements, &SurgerySummary)> = group
            .iter()
            .filter_map(|(r, m)| m.surgery.as_ref().map(|s| (r.id.as_str(), *m, s)))
            .collect();
        let alpha = with_surgery.first().map_or(0.0, |x| x.2.alpha);
        for j in 0..k {
            let lam = |m: &Measurements| m.eigenvalues_fine[j];
            let pts: Vec<(&str, f64, f64)> = with_surgery
                .iter()
                .map(|(id, m, s)| (*id, m.eps, above_noise(s.hat_excess[j], lam(m))))
                .collect();
            stability_check(&mut hat, &format!("{family} û_{}", j + 1), &pts, alpha);
            let active: Vec<(&str, f64, f64)> = with_surgery
                .iter()
                .filter_map(|(id, m, s)| s.hat_excess_active.as_ref().map(|e| (*id, m.eps, above_noise(e[j], lam(m)))))
                .collect();
            stability_check(&mut hat_active, &format!("{family} û_{} active", j + 1), &active, alpha);
        }
        let pts: Vec<(&str, f64, f64)> = with_surgery
            .iter()
            .map(|(id, m, s)| (*id, m.eps, above_noise(s.cutoff_excess, m.eigenvalues_fine[0])))
            .collect();
        stability_check(&mut cutoff, &format!("{family} ũ"), &pts, alpha);
    }

    upper = upper.note("|λ_k - λ_k(B)| ≤ C·(λ_1 deficit)^β, small-half C within 3x of large-half C");
    lower = lower.note("λ_k(B) - λ_k ≤ C·d^β', small-half C within 3x of large-half C");
    hat = hat.note("R(û_j) - λ_j ≤ C·ε^α");
    hat_active = hat_active.note("same at the best radius where S_t is nonempty");
    hat_active.advisory = true;
    cutoff = cutoff.note("R(ũ) - λ_1 ≤ C·ε^α");
    inscribed = inscribed.note("deficit_k ≤ C·√deficit_1, exponent floor 0.4");

    VerificationReport {
        records: records.len(),
        failed_records,
        checks: vec![fk, qfk, ab, upper, lower, ratio_bound, inscribed, linear, linf, exterior, span, hat, hat_active, cutoff],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_from_margin() {
        assert_eq!(Status::from_margin(0.1, 0.0), Status::Holds);
        assert_eq!(Status::from_margin(-0.1, 0.2), Status::HoldsWithinTolerance);
        assert_eq!(Status::from_margin(-0.3, 0.2), Status::Violated);
    }

    #[test]
    fn stability_is_one_sided() {
        // Constants shrinking toward small x are fine; growing ones are not.
        let shrinking = [("a", 1.0, 1.0), ("b", 0.1, 0.05), ("c", 0.01, 0.002), ("d", 0.5, 0.4)];
        assert!(stability(&shrinking, 0.5).unwrap().0 <= 1.0);
        let growing = [("a", 1.0, 1.0), ("b", 0.1, 0.9), ("c", 0.01, 0.8), ("d", 0.5, 0.9)];
        let (ratio, worst, _) = stability(&growing, 0.5).unwrap();
        assert!(ratio > 3.0);
        assert_eq!(worst, "c");
        // A single near-zero value at the largest abscissa does not set the scale.
        let crossing = [("a", 1.0, 0.01), ("b", 0.5, 0.6), ("c", 0.1, 0.2), ("d", 0.05, 0.1)];
        assert!(stability(&crossing, 0.5).unwrap().0 < 3.0);
        assert!(stability(&[("a", 1.0, 0.0), ("b", 0.5, 0.0)], 0.5).is_none());
        assert!(stability(&[("a", 1.0, 1.0)], 0.5).is_none());
    }

    #[test]
    fn violation_carries_record_and_margin() {
        let mut c = CheckResult::new("x");
        c.observe("r1", 0.5, 0.0, String::new);
        c.observe("r2", -1.0, 0.1, || "bad".into());
        assert_eq!(c.status, Status::Violated);
        assert_eq!(c.worst_record.as_deref(), Some("r2"));
        assert_eq!(c.violations[0].record, "r2");
        assert_eq!(c.violations[0].margin, -1.0);
    }

    #[test]
    fn empty_report_is_clean() {
        let r = verify_inequalities(&[]);
        assert_eq!(r.exit_code(), 0);
        assert!(r.checks.iter().all(|c| c.status == Status::NotApplicable));
    }
}
