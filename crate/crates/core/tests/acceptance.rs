//! Acceptance suite: every criterion at its stated tolerance, one line each.
//!
//! Runs without the libtest harness so the lines always print:
//! `cargo test -p switchcert-core --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use switchcert::analysis::AnalysisOptions;
use switchcert::certificates::{
    aggregate_generator, all_real_eigenvalues_positive, build_partition, fredholm_solve, is_nonsingular_m_matrix,
    verdict_partition, MMatrixMode, DEFAULT_RATE_CAP,
};
use switchcert::chain::{reversing_measure, stationary_distribution, Reversibility};
use switchcert::montecarlo::{estimate_sup_exceedance, SimConfig};
use switchcert::presets::{Preset, PresetId};
use switchcert::scenario::default_sample_points;
use switchcert::spectral::{
    bilinear_form, inner, localization_set, localized_sequence, principal_eigenvalue, variational_check, OmegaOperator,
};
use switchcert::{Criterion, VerdictKind};

use common::{birth_death_matrix, max_abs_diff, random_generator, random_reversible};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took <= budget, || format!("took {took:.1?}, budget {budget:?}"))
}

fn fredholm_residuals() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut min_c) = (0.0f64, f64::INFINITY);
    for _ in 0..200 {
        let n = rng.random_range(2..=8);
        let q = random_generator(&mut rng, n);
        let mu = stationary_distribution(&q).map_err(|e| e.to_string())?;
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        // Shift so that Σμβ lands in [-2, -0.01).
        let mean: f64 = mu.as_slice().iter().zip(&raw).map(|(m, b)| m * b).sum();
        let target = -rng.random_range(0.01..2.0);
        let beta: Vec<f64> = raw.iter().map(|b| b - mean + target).collect();
        let cert = fredholm_solve(&q, &beta).map_err(|e| e.to_string())?;
        let qxi = &q * nalgebra::DVector::from_column_slice(&cert.xi);
        let resid = (0..n).map(|i| (qxi[i] + cert.c + beta[i]).abs()).fold(0.0, f64::max);
        worst = worst.max(resid);
        min_c = min_c.min(cert.c);
    }
    ensure(worst <= 1e-9, || format!("residual {worst:e} > 1e-9"))?;
    ensure(min_c > 0.0, || format!("c = {min_c} not positive"))?;
    within_budget(start, Duration::from_secs(5))?;
    Ok(format!("200 generators, max residual {worst:.1e}, min c {min_c:.3}"))
}

fn m_matrix_equivalence() -> Outcome {
    let start = Instant::now();
    let off = [0.0, -1.0, -2.0];
    let mut count = 0;
    let mut accepted = 0;
    for code in 0..729usize {
        let mut c = code;
        let mut o = [0.0; 6];
        for v in &mut o {
            *v = off[c % 3];
            c /= 3;
        }
        for d in 0..125usize {
            let diag = [(d % 5) as f64, ((d / 5) % 5) as f64, (d / 25) as f64];
            let a = DMatrix::from_row_slice(
                3,
                3,
                &[diag[0], o[0], o[1], o[2], diag[1], o[3], o[4], o[5], diag[2]],
            );
            let minors = is_nonsingular_m_matrix(&a, MMatrixMode::ZMatrixLeadingMinors).map_err(|e| e.to_string())?;
            let semi = is_nonsingular_m_matrix(&a, MMatrixMode::Semipositivity).map_err(|e| e.to_string())?;
            let eig = all_real_eigenvalues_positive(&a);
            if minors.accepted() != semi.accepted() || minors.accepted() != eig {
                return Err(format!(
                    "disagreement on {a}: minors {}, semipositivity {}, eigenvalues {eig}",
                    minors.accepted(),
                    semi.accepted()
                ));
            }
            count += 1;
            accepted += minors.accepted() as usize;
        }
    }
    within_budget(start, Duration::from_secs(30))?;
    Ok(format!("{count} Z-matrices, {accepted} accepted, 0 disagreements"))
}

fn spectral_exactness() -> Outcome {
    let q = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
    let mut lines = Vec::new();
    for (gamma, expect) in [([-1.0, -3.0], 3.0 - 2f64.sqrt()), ([1.0, -3.0], 2.0 - 5f64.sqrt())] {
        let cert = principal_eigenvalue(&q, &gamma, false).map_err(|e| e.to_string())?;
        let err = (cert.lambda0 - expect).abs();
        ensure(err <= 1e-10, || format!("γ = {gamma:?}: λ₀ = {} vs {expect}", cert.lambda0))?;
        ensure(cert.residual <= 1e-8, || format!("eigen-residual {:e}", cert.residual))?;
        ensure(cert.g.iter().all(|v| *v > 0.0), || format!("eigenfunction not positive: {:?}", cert.g))?;
        lines.push(format!("λ₀ = {:.12} (err {err:.0e})", cert.lambda0));
    }
    Ok(lines.join(", "))
}

fn rayleigh_floor() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_gap = f64::INFINITY;
    for _ in 0..50 {
        let n = rng.random_range(2..=6);
        let (pi, q) = random_reversible(&mut rng, n);
        let gamma: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let cert = principal_eigenvalue(&q, &gamma, false).map_err(|e| e.to_string())?;
        let mut f = vec![0.0; n];
        for _ in 0..100_000 {
            for v in f.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            let norm2 = inner(&pi, &f, &f);
            if norm2 < 1e-12 {
                continue;
            }
            let rq = bilinear_form(&f, &pi, &q, &gamma).map_err(|e| e.to_string())? / norm2;
            worst_gap = worst_gap.min(rq - cert.lambda0);
        }
    }
    ensure(worst_gap >= -1e-9, || format!("Rayleigh quotient below λ₀ by {:e}", -worst_gap))?;
    Ok(format!("50 chains x 1e5 vectors, min(R(f) − λ₀) = {worst_gap:.2e}"))
}

fn variational_inequality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::INFINITY;
    let mut worst_equality = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.random_range(2..=6);
        let (pi, q) = random_reversible(&mut rng, n);
        let gamma: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
        let (e, rhs) = variational_check(&f, &g, &pi, &q, &gamma).map_err(|e| e.to_string())?;
        worst = worst.min(e - rhs);
        let (e, rhs) = variational_check(&g, &g, &pi, &q, &gamma).map_err(|e| e.to_string())?;
        worst_equality = worst_equality.max((e - rhs).abs());
    }
    ensure(worst >= -1e-10, || format!("E(f) − ⟨f²/g, −Ωg⟩ = {worst:e}"))?;
    ensure(worst_equality <= 1e-10, || format!("equality at g = f off by {worst_equality:e}"))?;
    Ok(format!("1e4 pairs, min gap {worst:.2e}, equality defect {worst_equality:.1e}"))
}

fn localization_monotone() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 20;
    let birth: Vec<f64> = (0..n).map(|i| 0.5 + 0.3 * i as f64 + rng.random_range(0.0..0.5)).collect();
    let death: Vec<f64> = (0..n).map(|i| 1.0 + 0.6 * i as f64 + rng.random_range(0.0..0.5)).collect();
    let q = birth_death_matrix(&birth, &death);
    let gamma: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..1.0)).collect();
    let pi = match reversing_measure(&q).map_err(|e| e.to_string())? {
        Reversibility::Reversible(p) => p.into_inner(),
        other => return Err(format!("birth-death chain not reversible: {other:?}")),
    };
    let exact = principal_eigenvalue(&q, &gamma, false).map_err(|e| e.to_string())?;
    let op = OmegaOperator::new(q.clone(), gamma.clone()).map_err(|e| e.to_string())?;
    let mut sets: Vec<Vec<usize>> = Vec::new();
    for k in 0..40 {
        let level = 1.5f64.powi(k);
        let set = localization_set(&op, &exact.g, level, level);
        if !set.is_empty() && sets.last() != Some(&set) {
            sets.push(set);
        }
    }
    ensure(sets.last().map(Vec::len) == Some(n), || "localization sets never reach the full space".into())?;
    ensure(sets.windows(2).all(|w| w[0].iter().all(|i| w[1].contains(i))), || "sets are not nested".into())?;
    let cert = localized_sequence(&pi, &q, &gamma, &sets).map_err(|e| e.to_string())?;
    let seq = &cert.sequence;
    ensure(seq.windows(2).all(|w| w[1] <= w[0] + 1e-12), || format!("sequence increases: {seq:?}"))?;
    let err = (cert.lambda0 - exact.lambda0).abs();
    ensure(err <= 1e-8, || format!("full-set λ {} vs λ₀ {}", cert.lambda0, exact.lambda0))?;
    Ok(format!("{} nested sets, λ from {:.4} down to {:.10} (err {err:.0e})", seq.len(), seq[0], cert.lambda0))
}

fn preset(id: PresetId, params: &[(&str, f64)]) -> Result<switchcert::analysis::AnalysisReport, String> {
    let o: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    Preset::build(id, &o, Some(200))
        .and_then(|p| p.reproduce(&AnalysisOptions::default()))
        .map_err(|e| e.to_string())
}

fn lambda_of(report: &switchcert::analysis::AnalysisReport, c: Criterion) -> Result<(VerdictKind, f64), String> {
    let v = report.verdict(c).ok_or_else(|| format!("no {c} verdict"))?;
    match &v.certificate {
        Some(switchcert::Certificate::Eigen(e)) => Ok((v.verdict, e.lambda0)),
        _ => Err(format!("{c} has no eigen certificate: {:?}", v.notes)),
    }
}

fn countable_examples() -> Outcome {
    let params = [("a", 3.0), ("b", 1.0), ("gamma", 1.0), ("c", 2.0)];
    let rec = preset(PresetId::SwitchedOrnsteinUhlenbeck, &params)?;
    let (kind, lambda) = lambda_of(&rec, Criterion::SpectralRecurrenceCountable)?;
    ensure((lambda - 1.0).abs() <= 1e-12, || format!("recurrence bound λ = {lambda}"))?;
    ensure(kind == VerdictKind::Recurrent, || format!("verdict {kind}"))?;
    let stab = preset(PresetId::SwitchedQuadraticNoise, &params)?;
    let (kind3, lambda3) = lambda_of(&stab, Criterion::SpectralStabilityCountable)?;
    ensure(kind3 == VerdictKind::AsymptoticallyStableInProbability, || format!("stability verdict {kind3}"))?;
    Ok(format!("recurrence λ = {lambda} ({kind}); stability λ = {lambda3} ({kind3})"))
}

fn unbounded_example() -> Outcome {
    let r = preset(PresetId::UnboundedDrift, &[("mu0", -2.0)])?;
    let (kind, lambda) = lambda_of(&r, Criterion::SpectralRecurrenceCountable)?;
    ensure((lambda - 1.0).abs() <= 1e-12, || format!("λ = {lambda}"))?;
    ensure(kind == VerdictKind::Recurrent, || format!("verdict {kind}"))?;
    let notes = &r.verdict(Criterion::SpectralRecurrenceCountable).unwrap().notes;
    ensure(notes.iter().any(|n| n.contains("a_i > i²+i+1")), || "gap note missing".into())?;
    Ok(format!("λ = {lambda}, {kind}, gap note present"))
}

fn partition_modes() -> Outcome {
    let mut lines = Vec::new();
    for (kappa, expect_minors) in [(1.4, true), (1.6, false)] {
        let o = BTreeMap::from([("a2".to_string(), 3.0), ("c1".to_string(), 1.0), ("kappa".to_string(), kappa)]);
        let p = Preset::build(PresetId::SineBirthDeath, &o, Some(200)).map_err(|e| e.to_string())?;
        let s = p.file.build().map_err(|e| e.to_string())?;
        let beta = s.declared.a2.clone().ok_or("no declared rates")?.rates;
        let spec = p.file.partition.clone().ok_or("no partition spec")?;
        let thresholds: Vec<f64> = spec.thresholds.iter().map(|t| t.unwrap()).collect();
        let part = build_partition(&beta, &thresholds).map_err(|e| e.to_string())?;
        let mut agg = aggregate_generator(&s.model.generator, &part, &beta, &default_sample_points(1), DEFAULT_RATE_CAP)
            .map_err(|e| e.to_string())?;
        let top = agg.beta_f.len() - 1;
        agg.beta_f[top] = spec.tail_sup.unwrap();
        let minors = verdict_partition(&agg, &s.rho, MMatrixMode::LeadingMinorsOnly).map_err(|e| e.to_string())?;
        let semi = verdict_partition(&agg, &s.rho, MMatrixMode::Semipositivity).map_err(|e| e.to_string())?;
        ensure(minors.is_conclusive() == expect_minors, || format!("κ = {kappa}: minors mode gave {}", minors.verdict))?;
        ensure(!semi.is_conclusive(), || format!("κ = {kappa}: semipositivity accepted"))?;
        if expect_minors {
            ensure(
                semi.notes.iter().chain(&minors.notes).any(|n| n.contains("documented discrepancy")),
                || "discrepancy note missing".into(),
            )?;
        }
        lines.push(format!("κ = {kappa}: minors {}, semipositivity {}", minors.verdict, semi.verdict));
    }
    Ok(lines.join("; "))
}

#[derive(Deserialize)]
struct Calibration {
    stable_max: f64,
    unstable_min: f64,
    min_gap: f64,
}

fn monte_carlo_gap() -> Outcome {
    let start = Instant::now();
    let cal: Calibration = serde_json::from_str(include_str!("fixtures/mc_calibration.json")).map_err(|e| e.to_string())?;
    let config = SimConfig::new(1e-3, 50.0, 1000, 42);
    let mut est = Vec::new();
    for (b1, b2) in [(-2.0, 1.0), (-1.0, 2.0)] {
        let o = BTreeMap::from([("b1".to_string(), b1), ("b2".to_string(), b2)]);
        let s = Preset::build(PresetId::PowerLaw, &o, None).and_then(|p| p.file.build()).map_err(|e| e.to_string())?;
        let e = estimate_sup_exceedance(&s.model, &[0.05], 0, 0.5, &config).map_err(|e| e.to_string())?;
        est.push(e.estimate);
    }
    let (stable, unstable) = (est[0], est[1]);
    ensure(unstable - stable >= cal.min_gap, || format!("gap {} < {}", unstable - stable, cal.min_gap))?;
    ensure(stable <= cal.stable_max, || format!("stable p̂ {stable} above calibrated {}", cal.stable_max))?;
    ensure(unstable >= cal.unstable_min, || format!("unstable p̂ {unstable} below calibrated {}", cal.unstable_min))?;
    within_budget(start, Duration::from_secs(120))?;
    Ok(format!("p̂ stable {stable}, unstable {unstable}, gap {:.3} ({:.1?})", unstable - stable, start.elapsed()))
}

fn determinism() -> Outcome {
    let s = Preset::build(PresetId::PowerLaw, &BTreeMap::from([("b1".into(), -1.0), ("b2".into(), 2.0)]), None)
        .and_then(|p| p.file.build())
        .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for workers in [1, 1, 2, 4] {
        let config = SimConfig::new(1e-3, 5.0, 300, 7).with_workers(workers);
        let e = estimate_sup_exceedance(&s.model, &[0.05], 0, 0.5, &config).map_err(|e| e.to_string())?;
        outputs.push(serde_json::to_vec(&e).map_err(|e| e.to_string())?);
    }
    ensure(outputs.windows(2).all(|w| w[0] == w[1]), || "outputs differ".into())?;
    Ok(format!("4 runs (workers 1, 1, 2, 4), {} identical bytes each", outputs[0].len()))
}

fn birth_death_closed_form() -> Outcome {
    let (a, b, n) = (3.0, 1.0, 101);
    let birth: Vec<f64> = (0..n).map(|i| b * (i + 1) as f64).collect();
    let death: Vec<f64> = (0..n).map(|i| a * (i + 1) as f64).collect();
    let q = birth_death_matrix(&birth, &death);
    let numeric = match reversing_measure(&q).map_err(|e| e.to_string())? {
        Reversibility::Reversible(p) => p.into_inner(),
        other => return Err(format!("not reversible: {other:?}")),
    };
    let raw: Vec<f64> = (0..n).map(|i| (1.0f64 / 3.0).powi(i as i32) / (i + 1) as f64).collect();
    let total: f64 = raw.iter().sum();
    let closed: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let err = max_abs_diff(&numeric, &closed);
    ensure(err <= 1e-12, || format!("max deviation {err:e}"))?;
    Ok(format!("101 states, max deviation {err:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("Fredholm residual", fredholm_residuals),
        ("M-matrix equivalences", m_matrix_equivalence),
        ("spectral exactness", spectral_exactness),
        ("Rayleigh floor", rayleigh_floor),
        ("variational inequality", variational_inequality),
        ("localization monotonicity", localization_monotone),
        ("countable examples", countable_examples),
        ("unbounded-rate example", unbounded_example),
        ("partition modes", partition_modes),
        ("Monte Carlo cross-check", monte_carlo_gap),
        ("determinism", determinism),
        ("birth-death closed form", birth_death_closed_form),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS {:>2} {name}: {msg} [{secs:.2}s]", k + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg} [{secs:.2}s]", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
