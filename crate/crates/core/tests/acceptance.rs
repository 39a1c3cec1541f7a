// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::f64::consts::PI;
use std::time::Instant;

use speclab::eigensolver::{assemble, clusters, lowest_eigenpairs, DEFAULT_TOL};
use speclab::geometry::{make_family, rasterize, ConcentricBall, FamilyKind, FamilySpec, ImplicitDomain};
use speclab::harness::{fit_power_law, run_record, run_sweep, verify_inequalities, write_csv, ExperimentRecord, Status, SweepSpec};

const AB_RATIO: f64 = 2.5387;

struct Outcome {
    lines: Vec<String>,
    failed: usize,
}

impl Outcome {
    fn report(&mut self, id: &str, pass: bool, detail: String) {
        let line = format!("{id} {} {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.failed += usize::from(!pass);
        self.lines.push(line);
    }
}

fn sweep(kind: FamilyKind, dim: usize, params: &[f64], k: usize, res: [usize; 2], surgery: bool) -> Vec<ExperimentRecord> {
    let spec = SweepSpec::new(FamilySpec::new(kind, dim), params.to_vec(), k, res.to_vec()).with_surgery(surgery);
    run_sweep(&spec, 1).expect("sweep")
}

fn inscribed_sweep(kind: FamilyKind, params: &[f64]) -> Vec<ExperimentRecord> {
    let spec = SweepSpec::new(FamilySpec::new(kind, 2).unnormalized(), params.to_vec(), 5, vec![128, 256]).with_surgery(false);
    run_sweep(&spec, 1).expect("sweep")
}

fn all_ok(records: &[ExperimentRecord]) -> bool {
    records.iter().all(ExperimentRecord::is_ok)
}

fn status_ok(s: Status) -> bool {
    matches!(s, Status::Holds | Status::HoldsWithinTolerance)
}

fn ac1(out: &mut Outcome) {
    let start = Instant::now();
    let spec = SweepSpec::new(FamilySpec::new(FamilyKind::Rectangle, 2), vec![1.0], 1, vec![128, 256]).with_surgery(false);
    let record = run_record(&spec.record_params()[0]);
    let secs = start.elapsed().as_secs_f64();
    let exact = 2.0 * PI * PI;
    match &record.measured {
        Some(m) => {
            let rel = (m.eigenvalues[0] - exact).abs() / exact;
            out.report("AC1", rel <= 1e-3 && secs <= 60.0, format!("λ1 = {:.6} vs 2π² = {exact:.6}, rel {rel:.2e}, {secs:.1}s", m.eigenvalues[0]));
        }
        None => out.report("AC1", false, format!("solve failed: {:?}", record.error)),
    }
}

fn ac2_and_disk(out: &mut Outcome) -> Option<f64> {
    let start = Instant::now();
    let spec = SweepSpec::new(FamilySpec::new(FamilyKind::Ellipse, 2), vec![0.0], 6, vec![128, 256]).with_surgery(false);
    let record = run_record(&spec.record_params()[0]);
    let secs = start.elapsed().as_secs_f64();
    let Some(m) = &record.measured else {
        out.report("AC2", false, format!("solve failed: {:?}", record.error));
        return None;
    };
    let worst = m.eigenvalues.iter().zip(&m.ball).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
    let groups = clusters(&m.eigenvalues, 1e-3);
    let paired = groups.iter().any(|g| g == &vec![1, 2]);
    out.report(
        "AC2",
        worst <= 0.01 && paired && secs <= 120.0,
        format!("worst rel err {worst:.2e}, clusters {groups:?}, {secs:.1}s"),
    );
    Some(m.eigenvalues[1] / m.eigenvalues[0])
}

fn fk_suite() -> Vec<ExperimentRecord> {
    let plane: [(FamilyKind, [f64; 5]); 6] = [
        (FamilyKind::Ellipse, [0.0, 0.1, 0.3, 0.6, 1.0]),
        (FamilyKind::FourierPerturbedBall, [0.05, 0.1, 0.2, 0.3, 0.5]),
        (FamilyKind::BallWithHole, [0.05, 0.1, 0.2, 0.4, 0.8]),
        (FamilyKind::BallMinusCap, [0.1, 0.3, 0.5, 0.8, 1.0]),
        (FamilyKind::Rectangle, [0.25, 0.5, 1.0, 2.0, 4.0]),
        (FamilyKind::Stadium, [0.0, 0.5, 1.0, 2.0, 4.0]),
    ];
    let space: [(FamilyKind, [f64; 2]); 6] = [
        (FamilyKind::Ellipse, [0.1, 0.3]),
        (FamilyKind::FourierPerturbedBall, [0.1, 0.3]),
        (FamilyKind::BallWithHole, [0.1, 0.3]),
        (FamilyKind::BallMinusCap, [0.2, 0.5]),
        (FamilyKind::Rectangle, [1.0, 2.0]),
        (FamilyKind::Stadium, [0.5, 1.0]),
    ];
    let mut records = Vec::new();
    for (kind, s) in plane {
        records.extend(sweep(kind, 2, &s, 5, [64, 128], false));
    }
    for (kind, s) in space {
        records.extend(sweep(kind, 3, &s, 5, [16, 32], false));
    }
    records
}

fn ac3(out: &mut Outcome, records: &[ExperimentRecord]) {
    let report = verify_inequalities(records);
    let fk = report.check("faber-krahn").expect("faber-krahn check");
    let mut kinds: Vec<FamilyKind> = records.iter().map(|r| r.params.spec.kind).collect();
    kinds.sort();
    kinds.dedup();
    let pass = records.len() >= 40 && kinds.len() == 6 && all_ok(records) && fk.violations.is_empty() && status_ok(fk.status);
    out.report(
        "AC3",
        pass,
        format!("{} domains, {} families, status {}, {} violations", records.len(), kinds.len(), fk.status.as_str(), fk.violations.len()),
    );
}

fn ac4(out: &mut Outcome, ellipses: &[ExperimentRecord]) {
    let points: Vec<(f64, f64)> = ellipses.iter().filter_map(|r| r.measured.as_ref()).map(|m| (m.d, m.deficit_first)).collect();
    match fit_power_law(&points) {
        Ok(fit) => out.report(
            "AC4",
            all_ok(ellipses) && (1.7..=2.3).contains(&fit.exponent) && fit.r_squared >= 0.97,
            format!("slope {:.3}, R² {:.4} over {} ellipses", fit.exponent, fit.r_squared, fit.points),
        ),
        Err(e) => out.report("AC4", false, e.to_string()),
    }
}

fn ac5(out: &mut Outcome, records: &[ExperimentRecord], disk_ratio: Option<f64>) {
    let bound = AB_RATIO * 1.01;
    let worst = records
        .iter()
        .filter_map(|r| r.measured.as_ref()?.ratio21.map(|v| (v, r.id.as_str())))
        .fold((0.0, ""), |a, b| if b.0 > a.0 { b } else { a });
    let disk_ok = disk_ratio.is_some_and(|r| (r / AB_RATIO - 1.0).abs() <= 0.01);
    out.report(
        "AC5",
        worst.0 <= bound && disk_ok,
        format!("max λ2/λ1 {:.5} ({}) over {} records, disk {:?}", worst.0, worst.1, records.len(), disk_ratio),
    );
}

fn deficit_span(records: &[ExperimentRecord]) -> f64 {
    let d: Vec<f64> = records.iter().filter_map(|r| r.measured.as_ref()).map(|m| m.deficit_first).collect();
    d.iter().copied().fold(0.0, f64::max) / d.iter().copied().fold(f64::INFINITY, f64::min)
}

fn ac6(out: &mut Outcome, holes: &[ExperimentRecord], fourier: &[ExperimentRecord]) {
    let mut records = holes.to_vec();
    records.extend_from_slice(fourier);
    let report = verify_inequalities(&records);
    let upper = report.check("theorem-upper").expect("theorem-upper check");
    let mut decay = true;
    let mut detail = Vec::new();
    for family in [holes, fourier] {
        let ms: Vec<_> = family.iter().filter_map(|r| r.measured.as_ref()).collect();
        let lo = ms.iter().min_by(|a, b| a.deficit_first.total_cmp(&b.deficit_first)).unwrap();
        let hi = ms.iter().max_by(|a, b| a.deficit_first.total_cmp(&b.deficit_first)).unwrap();
        for j in 1..lo.eigenvalues.len() {
            decay &= lo.deficit(j).abs() <= 0.5 * hi.deficit(j).abs();
        }
        detail.push(format!("span {:.1}", deficit_span(family)));
    }
    let spans = deficit_span(holes) >= 10.0 && deficit_span(fourier) >= 10.0;
    out.report(
        "AC6",
        all_ok(&records) && spans && status_ok(upper.status) && upper.violations.is_empty() && decay,
        format!("theorem-upper {} (margin {:?}), {}, deficits shrink: {decay}", upper.status.as_str(), upper.margin, detail.join(", ")),
    );
}

fn ac7(out: &mut Outcome, caps: &[ExperimentRecord]) {
    let report = verify_inequalities(caps);
    let inscribed = report.check("inscribed-deficits").expect("inscribed-deficits check");
    let span = report.check("competitor-span").expect("competitor-span check");
    let exponents: Vec<f64> = inscribed.fits.iter().map(|f| f.exponent).collect();
    let sigma = caps
        .iter()
        .filter_map(|r| r.measured.as_ref()?.competitors.as_ref().map(|c| c.sigma_min))
        .fold(f64::INFINITY, f64::min);
    let certified = caps.iter().all(|r| r.measured.as_ref().is_some_and(|m| m.competitors.is_some()));
    let pass = all_ok(caps)
        && deficit_span(caps) >= 10.0
        && exponents.len() == 4
        && exponents.iter().all(|e| *e >= 0.4)
        && certified
        && sigma >= 0.5
        && status_ok(inscribed.status)
        && status_ok(span.status);
    out.report(
        "AC7",
        pass,
        format!("exponents {exponents:.3?}, min σ {sigma:.3}, span {:.1}", deficit_span(caps)),
    );
}

fn ac8(out: &mut Outcome, holes: &[ExperimentRecord]) {
    let report = verify_inequalities(holes);
    let names = ["hat-extension", "hat-extension-active", "radial-cutoff"];
    let checks: Vec<_> = names.iter().map(|n| report.check(n).expect("surgery check")).collect();
    let eps: Vec<f64> = holes
        .iter()
        .filter_map(|r| r.measured.as_ref())
        .filter(|m| m.surgery.is_some())
        .map(|m| m.eps)
        .collect();
    let decade = eps.iter().copied().fold(0.0, f64::max) / eps.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = eps.len() == holes.len() && decade >= 10.0 && checks.iter().all(|c| status_ok(c.status) || c.status == Status::NotApplicable) && checks[1].status != Status::NotApplicable;
    let statuses: Vec<String> = checks.iter().map(|c| format!("{} {}", c.name, c.status.as_str())).collect();
    out.report("AC8", pass, format!("ε span {decade:.1}, {}", statuses.join(", ")));
}

fn nested_pairs() -> Vec<(ImplicitDomain, ImplicitDomain)> {
    let mut pairs = Vec::new();
    let ball = |g: f64| ConcentricBall::new(2, g).unwrap().domain();
    for g in [-0.3, -0.2, -0.1, 0.0, 0.1] {
        pairs.push((ball(g - 0.05), ball(g)));
    }
    let hole = FamilySpec::new(FamilyKind::BallWithHole, 2).unnormalized();
    for s in [0.1, 0.2, 0.3, 0.4, 0.5] {
        pairs.push((make_family(&hole, s + 0.1).unwrap(), make_family(&hole, s).unwrap()));
    }
    let cap = FamilySpec::new(FamilyKind::BallMinusCap, 2).unnormalized();
    for s in [0.1, 0.2, 0.4, 0.6, 0.8] {
        pairs.push((make_family(&cap, s + 0.1).unwrap(), make_family(&cap, s).unwrap()));
    }
    for s in [0.05, 0.1, 0.2, 0.3, 0.4] {
        let f = make_family(&FamilySpec::new(FamilyKind::FourierPerturbedBall, 2), s).unwrap();
        pairs.push((f.intersect_ball(0.45), f));
    }
    pairs
}

fn ac9(out: &mut Outcome) {
    let h = 1.0 / 48.0;
    let base = make_family(&FamilySpec::new(FamilyKind::FourierPerturbedBall, 2), 0.2).unwrap();
    let raster = rasterize(&base, h).unwrap();
    let op = assemble(&raster);
    let spectrum = lowest_eigenpairs(&op, 5, DEFAULT_TOL).unwrap();

    let mut scaling = 0.0f64;
    let mut masks = true;
    for t in [0.5, 2.0] {
        let scaled = rasterize(&base.scaled(t), t * h).unwrap();
        masks &= scaled.nodes() == raster.nodes();
        let s = lowest_eigenpairs(&assemble(&scaled), 5, DEFAULT_TOL).unwrap();
        for (a, b) in s.eigenvalues.iter().zip(&spectrum.eigenvalues) {
            scaling = scaling.max((a * t * t - b).abs() / b);
        }
    }

    let pairs = nested_pairs();
    let mut violations = 0;
    let mut subsets = true;
    for (small, large) in &pairs {
        let (rs, rl) = (rasterize(small, h).unwrap(), rasterize(large, h).unwrap());
        subsets &= rs.is_subset_of(&rl);
        let ls = lowest_eigenpairs(&assemble(&rs), 3, DEFAULT_TOL).unwrap();
        let ll = lowest_eigenpairs(&assemble(&rl), 3, DEFAULT_TOL).unwrap();
        violations += ls.eigenvalues.iter().zip(&ll.eigenvalues).filter(|(a, b)| **a < **b * (1.0 - 1e-12)).count();
    }

    let mut ortho = 0.0f64;
    for i in 0..spectrum.len() {
        for j in 0..spectrum.len() {
            let m = op.mass(&spectrum.eigenvectors[i], &spectrum.eigenvectors[j]);
            ortho = ortho.max((m - if i == j { 1.0 } else { 0.0 }).abs());
        }
        let rq = op.rayleigh_quotient(&spectrum.eigenvectors[i]).unwrap();
        ortho = ortho.max((rq - spectrum.eigenvalues[i]).abs() / spectrum.eigenvalues[i]);
    }
    let pass = masks && scaling <= 1e-12 && pairs.len() >= 20 && subsets && violations == 0 && ortho <= 1e-8;
    out.report(
        "AC9",
        pass,
        format!("scaling rel {scaling:.1e}, {} nested pairs with {violations} violations, orthonormality {ortho:.1e}", pairs.len()),
    );
}

fn ac10(out: &mut Outcome, records: &[ExperimentRecord]) {
    let mut dims: Vec<usize> = records.iter().filter(|r| r.is_ok()).map(|r| r.params.spec.dim).collect();
    dims.sort_unstable();
    dims.dedup();
    let worst = records
        .iter()
        .filter_map(|r| r.measured.as_ref().map(|m| (m.linf_margin, r.id.as_str())))
        .fold((f64::INFINITY, ""), |a, b| if b.0 < a.0 { b } else { a });
    out.report(
        "AC10",
        dims == [2, 3] && worst.0 >= 0.0,
        format!("min margin {:.4} ({}) over {} records", worst.0, worst.1, records.len()),
    );
}

fn ac11(out: &mut Outcome) {
    let spec = SweepSpec::new(FamilySpec::new(FamilyKind::FourierPerturbedBall, 2), vec![0.0, 0.1, 0.2], 3, vec![32, 64]).with_seed(11);
    let render = || {
        let records = run_sweep(&spec, 1).expect("sweep");
        let mut bytes = Vec::new();
        write_csv(&records, &mut bytes).expect("csv");
        bytes
    };
    let (a, b) = (render(), render());
    out.report("AC11", a == b && !a.is_empty(), format!("{} bytes, identical: {}", a.len(), a == b));
}

fn main() {
    let mut out = Outcome { lines: Vec::new(), failed: 0 };
    ac1(&mut out);
    let disk_ratio = ac2_and_disk(&mut out);

    let suite = fk_suite();
    ac3(&mut out, &suite);

    let ellipses = sweep(FamilyKind::Ellipse, 2, &[0.02, 0.04, 0.07, 0.1, 0.15, 0.2, 0.3], 5, [128, 256], false);
    ac4(&mut out, &ellipses);

    let holes = sweep(FamilyKind::BallWithHole, 2, &[0.015, 0.02, 0.03, 0.05, 0.1, 0.2, 0.3, 0.5], 5, [128, 256], true);
    let fourier = sweep(FamilyKind::FourierPerturbedBall, 2, &[0.03, 0.05, 0.1, 0.15, 0.2, 0.3], 5, [128, 256], false);
    let caps = inscribed_sweep(FamilyKind::BallMinusCap, &[0.02, 0.04, 0.07, 0.1, 0.15, 0.2]);

    let mut all: Vec<ExperimentRecord> = suite;
    for group in [&ellipses, &holes, &fourier, &caps] {
        all.extend(group.iter().cloned());
    }
    ac5(&mut out, &all, disk_ratio);
    ac6(&mut out, &holes, &fourier);
    ac7(&mut out, &caps);
    ac8(&mut out, &holes);
    ac9(&mut out);
    ac10(&mut out, &all);
    ac11(&mut out);

    println!("{} of {} criteria pass", out.lines.len() - out.failed, out.lines.len());
    if out.failed > 0 {
        std::process::exit(1);
    }
}
