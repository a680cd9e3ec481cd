//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain program so the lines always reach the test log. Failures
//! are reported, not raised; set `ACCEPTANCE_STRICT=1` to exit non-zero when
//! any criterion fails.

mod common;

use std::fs;
use std::time::{Duration, Instant};

use common::{autocorrelation, kendall_tau, ks_critical_1pct, ks_distance, normal_rows};
use dntest::calibrate::{calibrate_null, CalibrationBudget, GaussianSurrogate, Summary};
use dntest::copula::gaussian_channels;
use dntest::harness::{
    reproduce_tables, run_experiment, table_config, HarnessTest, RejectionRateReport, SourceFamily, TableSettings,
    TABLES,
};
use dntest::projection::rotate_2d;
use dntest::{
    colored_scalar_null_moments, generate, mardia_kurtosis, run_test, run_test_with, sample_direction,
    ArchimedeanFamily, CovarianceSequence, GeneratorConfig, RngStream, TestKind, TestOptions, TimeSeriesSample,
};
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

struct Outcome {
    id: usize,
    pass: bool,
    detail: String,
}

fn record(out: &mut Vec<Outcome>, id: usize, pass: bool, detail: String) {
    println!("criterion {id:>2}: {}  {detail}", if pass { "PASS" } else { "FAIL" });
    out.push(Outcome { id, pass, detail });
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

// Desk-scale table runs shared by criteria 4 to 7.
struct Desk {
    reports: Vec<((usize, SourceFamily), RejectionRateReport)>,
    elapsed: Vec<((usize, SourceFamily), Duration)>,
}

impl Desk {
    fn run(tables: &[usize]) -> Self {
        let settings = TableSettings { m: 1000, realizations: 5, ..TableSettings::default() };
        let mut reports = Vec::new();
        let mut elapsed = Vec::new();
        for &t in tables {
            for family in [SourceFamily::Gumbel, SourceFamily::Clayton] {
                let start = Instant::now();
                let report = run_experiment(&table_config(&TABLES[t - 1], family, &settings)).expect("table run");
                elapsed.push(((t, family), start.elapsed()));
                reports.push(((t, family), report));
            }
        }
        Self { reports, elapsed }
    }

    fn rate(&self, table: usize, family: SourceFamily, test: HarnessTest) -> f64 {
        let report = &self.reports.iter().find(|(k, _)| *k == (table, family)).expect("table ran").1;
        report.rate(test, 0.05).expect("test ran")
    }

    fn time(&self, table: usize) -> Duration {
        self.elapsed.iter().filter(|((t, _), _)| *t == table).map(|(_, d)| *d).sum()
    }
}

fn size_and_moments(out: &mut Vec<Outcome>) {
    let start = Instant::now();
    let base = RngStream::new(0, 1);
    let results: Vec<(f64, bool)> = (0..2000u64)
        .into_par_iter()
        .map(|r| {
            let rows = normal_rows(2, 1000, &mut base.substream(r).rng());
            let x = TimeSeriesSample::from_rows(&rows).unwrap();
            let report = run_test(&x, TestKind::MardiaIid(2), 0.05).unwrap();
            (report.statistic, report.reject)
        })
        .collect();
    let elapsed = start.elapsed();
    let rate = results.iter().filter(|r| r.1).count() as f64 / 2000.0;
    let pass = (0.035..=0.065).contains(&rate) && elapsed < Duration::from_secs(30);
    record(out, 1, pass, format!("i.i.d. size at 5%: {rate:.4} in [0.035, 0.065], {} < 30s", secs(elapsed)));

    let stats: Vec<f64> = results.iter().map(|r| r.0).collect();
    let s = Summary::of(&stats);
    let target = 8.0 * 999.0 / 1001.0;
    let ratio = s.variance / 0.064;
    let pass = (s.mean - target).abs() < 3.0 * s.se_mean && (0.8..=1.25).contains(&ratio);
    record(
        out,
        2,
        pass,
        format!(
            "mean {:.5} vs {target:.5} (|d| = {:.2} SE), variance ratio {ratio:.3} in [0.8, 1.25]",
            s.mean,
            (s.mean - target).abs() / s.se_mean
        ),
    );
}

fn closed_form_vs_calibration(out: &mut Vec<Outcome>) {
    let (a, n) = (0.8f64, 1000usize);
    let gamma: Vec<f64> = (0..n).map(|t| a.powi(t as i32) / (1.0 - a * a)).collect();
    let cov = CovarianceSequence::scalar(&gamma).unwrap();
    let cf = colored_scalar_null_moments(&cov, n).unwrap();
    let budget = CalibrationBudget { seed: RngStream::new(0, 3), ..CalibrationBudget::default() };
    let surrogate = GaussianSurrogate::new(&cov.truncate(budget.lag_for(n)), n).unwrap();
    let c = calibrate_null(&surrogate, |x| mardia_kurtosis(x).map(|k| k.value), &budget).unwrap();
    let zm = (c.moments.mean - cf.mean) / c.se_mean;
    let zv = (c.moments.variance - cf.variance) / c.se_variance;
    record(
        out,
        3,
        zm.abs() < 3.0 && zv.abs() < 3.0,
        format!(
            "AR(1) a=0.8 N=1000, {} reps: mean {:.5} vs {:.5} ({zm:+.2} SE), variance {:.5} vs {:.5} ({zv:+.2} SE)",
            c.replicates, c.moments.mean, cf.mean, c.moments.variance, cf.variance
        ),
    );
}

fn tables(out: &mut Vec<Outcome>, desk: &Desk) {
    use HarnessTest::*;
    use SourceFamily::*;
    let g3 = desk.rate(3, Gumbel, Colored2);
    let c3 = desk.rate(3, Clayton, Colored2);
    let t3 = desk.time(3);
    record(
        out,
        4,
        g3 >= 0.85 && c3 >= 0.90 && t3 < Duration::from_secs(600),
        format!("2-D joint test, M=1000 x 5: Gumbel {g3:.4} >= 0.85, Clayton {c3:.4} >= 0.90, {} < 600s", secs(t3)),
    );

    let g1 = desk.rate(1, Gumbel, Colored1);
    let g1i = desk.rate(1, Gumbel, Iid);
    let c1 = desk.rate(1, Clayton, Colored1);
    record(
        out,
        5,
        g1 <= 0.35 && g1i <= 0.35 && (0.45..=0.85).contains(&c1),
        format!("1-D colored: Gumbel B1 {g1:.4}, B1_iid {g1i:.4} <= 0.35; Clayton B1 {c1:.4} in [0.45, 0.85]"),
    );

    let gap = g3 - g1;
    record(out, 6, gap >= 0.5, format!("Gumbel 2-D minus 1-D rate: {g3:.4} - {g1:.4} = {gap:.4} >= 0.5"));

    let mut pass = true;
    let mut parts = Vec::new();
    for family in [Gumbel, Clayton] {
        for test in [Colored1, Iid] {
            let colored = desk.rate(1, family, test);
            let white = desk.rate(2, family, test);
            pass &= colored <= white;
            parts.push(format!("{} {} {colored:.4} <= {white:.4}", family.name(), test.label(1)));
        }
    }
    record(out, 7, pass, format!("colored <= uncolored: {}", parts.join(", ")));
}

fn sampler(out: &mut Vec<Outcome>) {
    let mut pass = true;
    let mut parts = Vec::new();
    let families = [ArchimedeanFamily::gumbel(5.0).unwrap(), ArchimedeanFamily::clayton(2.0).unwrap()];
    for (k, f) in families.iter().enumerate() {
        let x = generate(&GeneratorConfig::new(*f, 2, 10_000), RngStream::new(8, k as u64)).unwrap();
        let tau = kendall_tau(&x.variable(0), &x.variable(1));
        let ok = (tau - f.kendall_tau()).abs() <= 0.02;
        pass &= ok;
        parts.push(format!("{:?} tau {tau:.4} vs {:.4}", f.kind, f.kendall_tau()));
    }

    let n = 10_000;
    let mut worst: f64 = 0.0;
    for (k, f) in families.iter().enumerate() {
        for colored in [false, true] {
            let cfg = GeneratorConfig::new(*f, 3, n).colored(colored);
            let x = generate(&cfg, RngStream::new(8, 10 + 2 * k as u64 + colored as u64)).unwrap();
            for i in 0..3 {
                worst = worst.max(ks_distance(&x.variable(i)));
            }
        }
    }
    pass &= worst < ks_critical_1pct(n);
    parts.push(format!("max KS {worst:.4} < {:.4}", ks_critical_1pct(n)));

    let ch = gaussian_channels(2, 100_000, Some((0.8, 1000)), &mut RngStream::new(8, 20).rng()).unwrap();
    let mut max_dev: f64 = 0.0;
    for c in &ch {
        for tau in 1..=5 {
            max_dev = max_dev.max((autocorrelation(c, tau) - 0.8f64.powi(tau as i32)).abs());
        }
    }
    pass &= max_dev <= 0.03;
    parts.push(format!("AR(1) input autocorrelation max |dev| {max_dev:.4} <= 0.03"));

    let x = generate(&GeneratorConfig::new(families[1], 2, 100_000), RngStream::new(8, 21)).unwrap();
    parts.push(format!("(output lag-1 autocorrelation {:.3})", autocorrelation(&x.variable(0), 1)));
    record(out, 8, pass, parts.join(", "));
}

fn invariance(out: &mut Vec<Outcome>) {
    let f = ArchimedeanFamily::gumbel(5.0).unwrap();
    let x = generate(&GeneratorConfig::new(f, 2, 1000), RngStream::new(9, 0)).unwrap();
    let x3 = generate(&GeneratorConfig::new(f, 3, 1000), RngStream::new(9, 1)).unwrap();
    let mut rng = RngStream::new(9, 2).rng();

    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let sample = if k % 2 == 0 { &x } else { &x3 };
        let p = sample.dim();
        let a = loop {
            let a = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-3.0..3.0));
            let s = a.clone().svd(false, false).singular_values;
            if s.min() > 1e-3 * s.max() {
                break a;
            }
        };
        let before = mardia_kurtosis(sample).unwrap().value;
        let after = mardia_kurtosis(&sample.transform(&a).unwrap()).unwrap().value;
        worst = worst.max((after - before).abs() / before);
    }

    let opts = TestOptions { max_lag: None, calibration: CalibrationBudget::new(2000, RngStream::new(9, 3)) };
    let base = run_test_with(&x, TestKind::ColoredBivariate, 0.05, &opts).unwrap();
    let base_iid = run_test(&x, TestKind::MardiaIid(2), 0.05).unwrap();
    let mut flips = 0;
    for _ in 0..100 {
        let y = rotate_2d(&x, &sample_direction(&mut rng)).unwrap();
        let r = run_test_with(&y, TestKind::ColoredBivariate, 0.05, &opts).unwrap();
        let r_iid = run_test(&y, TestKind::MardiaIid(2), 0.05).unwrap();
        flips += (r.reject != base.reject) as usize + (r_iid.reject != base_iid.reject) as usize;
    }
    record(
        out,
        9,
        worst < 1e-8 && flips == 0,
        format!(
            "max relative change {worst:.2e} < 1e-8 over 100 transforms; {flips} decision changes over 100 rotations (z = {:.3})",
            base.z
        ),
    );
}

fn determinism(out: &mut Vec<Outcome>) {
    let start = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    reproduce_tables(a.path(), &TableSettings::fast()).unwrap();
    reproduce_tables(b.path(), &TableSettings::fast()).unwrap();
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let identical = names.len() == 12
        && names.iter().all(|name| fs::read(a.path().join(name)).ok() == fs::read(b.path().join(name)).ok());
    record(out, 10, identical, format!("{} files byte-identical across two fast runs ({})", names.len(), secs(start.elapsed())));
}

fn main() {
    let mut out = Vec::new();
    size_and_moments(&mut out);
    closed_form_vs_calibration(&mut out);
    let desk = Desk::run(&[1, 2, 3]);
    tables(&mut out, &desk);
    sampler(&mut out);
    invariance(&mut out);
    determinism(&mut out);

    out.sort_by_key(|o| o.id);
    let failed: Vec<&Outcome> = out.iter().filter(|o| !o.pass).collect();
    println!("acceptance: {} of {} criteria pass", out.len() - failed.len(), out.len());
    for o in &failed {
        println!("  failed {}: {}", o.id, o.detail);
    }
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
