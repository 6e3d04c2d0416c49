use std::path::PathBuf;

use serde_json::json;

use super::config::RunConfig;
use super::records::{Emitter, Record};
use crate::environment::{imbalance_of_law, Environment, SeededEnvironment};
use crate::error::{Error, Result};
use crate::exact_kernel::{
    check_point_budget,
    annealed_point_log_prob, brute_force_log_partition, brute_force_point_log_prob, dn_derivative, dn_value,
    partition_function, quenched_point_log_prob, second_moment_exact, DnEstimate, DpKind, DpResult, Mode, Sampling,
};
use crate::geometry::{admissible_sequence, Face};
use crate::phase_scan::{estimate_eps_c, lipschitz_check, richardson, scan, ScanOptions, ScanResult};
use crate::rate_functions::{annealed_rate_boundary, face_minimizer, legendre_sup, psi};
use crate::rng::{keyed_hash, STREAM_WALK};
use crate::stochastics::{
    fourier_bound, green_function, khasminskii_bound, max_collision_potential, simulate_walk, tilted_weight, TiltedLaw,
};

/// Largest path enumeration accepted by the brute-force cross-check.
const ORACLE_MAX_PATHS: u128 = 1 << 24;
/// Agreement threshold of the brute-force cross-check.
const ORACLE_TOL: f64 = 1e-10;

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Exact => "exact",
        Mode::Mc => "mc",
    }
}

fn dn_record(kind: &str, n: usize, eps: f64, est: &DnEstimate<f64>) -> Record {
    Record::new(
        kind,
        mode_name(est.mode),
        &json!({"n": n, "eps": eps, "value": est.value, "samples": est.samples}),
    )
    .with_stderr(est.stderr)
}

fn low_dimension_warning(cfg: &RunConfig, out: &mut Emitter) {
    if cfg.d < 4 {
        out.push(Record::new(
            "warning",
            "exact",
            &json!({"message": format!("d = {} < 4: quenched/annealed equality is only claimed for d >= 4", cfg.d)}),
        ));
    }
}

pub fn rate(cfg: &RunConfig, out: &mut Emitter) -> Result<()> {
    let alpha = cfg.jump_law()?;
    let face = cfg.face()?;
    let x = cfg.point()?;
    let fs = face_minimizer(&alpha, &face)?;
    out.push(Record::new("face_summary", "exact", &fs));
    out.push(Record::new(
        "annealed_rate",
        "exact",
        &json!({"delta": x.delta(), "on_facet": x.on_facet(), "value": annealed_rate_boundary(&alpha, &x)}),
    ));
    out.push(Record::new("tilt", "exact", &legendre_sup(&alpha, &x)?));
    Ok(())
}

pub fn exact(cfg: &RunConfig, budget: u128, oracle: bool, out: &mut Emitter) -> Result<()> {
    let spec = cfg.spec()?;
    let face = cfg.face()?;
    let theta = cfg.theta()?;
    let x = cfg.point()?;
    let n = cfg.n;
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let counts = admissible_sequence(&x, n);
    let env = SeededEnvironment::new(&spec, cfg.seed);

    let ann = annealed_point_log_prob(&spec.alpha, &face, &counts)?;
    let mut r = Record::new("annealed_prob", "exact", &DpResult::new(DpKind::AnnealedProb, ann, n));
    r.body.insert("counts".into(), json!(counts));
    out.push(r);

    check_point_budget::<f64>(&counts, budget)?;
    let q = quenched_point_log_prob(&env, &face, &counts)?;
    let mut r = Record::new("quenched_prob", "exact", &DpResult::new(DpKind::QuenchedProb, q, n).with_seed(cfg.seed));
    r.body.insert("counts".into(), json!(counts));
    r.body.insert("eps".into(), json!(spec.eps));
    out.push(r);

    let z = partition_function(&env, &spec.alpha, &face, &theta, n, budget)?;
    let mut r = Record::new(
        "partition",
        "exact",
        &DpResult::new(DpKind::Partition, z, n).with_theta(&theta).with_seed(cfg.seed),
    );
    r.body.insert("eps".into(), json!(spec.eps));
    out.push(r);

    let m2 = second_moment_exact(&spec, &face, &theta, n, budget)?;
    let mut r = Record::new(
        "second_moment",
        "exact",
        &DpResult::new(DpKind::SecondMoment, m2.ln(), n).with_theta(&theta),
    );
    r.body.insert("value".into(), json!(m2));
    r.body.insert("eps".into(), json!(spec.eps));
    out.push(r);

    let sampling = Sampling::Auto {
        max_assignments: cfg.max_assignments as u128,
        samples: cfg.samples,
        seed: cfg.seed,
    };
    out.push(dn_record("dn_value", n, spec.eps, &dn_value(&spec, &face, &counts, sampling)?));
    if spec.eps > 0.0 {
        out.push(dn_record("dn_derivative", n, spec.eps, &dn_derivative(&spec, &face, &counts, sampling)?));
    }

    if oracle {
        let zb = brute_force_log_partition(&env, &spec.alpha, &face, &theta, n, ORACLE_MAX_PATHS)?;
        let qb = brute_force_point_log_prob(&env, &face, &counts, ORACLE_MAX_PATHS)?;
        let diff = (zb - z).abs().max((qb - q).abs());
        let status = if diff <= ORACLE_TOL { "match" } else { "mismatch" };
        out.push(Record::new(
            "oracle",
            "exact",
            &json!({"n": n, "oracle": status, "max_abs_diff": diff, "partition_brute": zb, "quenched_brute": qb}),
        ));
    }
    Ok(())
}

pub fn green(cfg: &RunConfig, budget: u128, out: &mut Emitter) -> Result<()> {
    let spec = cfg.spec()?;
    let face = cfg.face()?;
    let theta = cfg.theta()?;
    let law = TiltedLaw::new(&spec.alpha, &face, &theta);
    let g = green_function(&law, cfg.green_truncation, budget)?;
    let last = *g.terms.last().expect("J >= 1");
    out.push(Record::new(
        "green",
        "exact",
        &json!({
            "theta": theta,
            "partial_sum": g.partial_sum,
            "truncation": g.truncation,
            "last_term": last,
            "tail_estimate": g.tail_estimate,
            "tail_exponent": g.tail_exponent,
            "tail_label": "heuristic",
            "divergent": g.divergent,
        }),
    ));
    if g.divergent {
        out.push(Record::new(
            "warning",
            "exact",
            &json!({"message": format!(
                "collision Green sum does not converge in projected dimension {}",
                face.dim() - 1
            )}),
        ));
    }
    match fourier_bound(&law, cfg.fourier_radius, cfg.fourier_grid, None) {
        Ok(fb) => out.push(Record::new("fourier", "exact", &fb)),
        Err(e @ Error::Invalid(_)) => out.push(Record::new("warning", "exact", &json!({"message": e.to_string()}))),
        Err(e) => return Err(e),
    }
    let vmax = max_collision_potential(&spec, &face);
    match khasminskii_bound(vmax, g.partial_sum) {
        Ok(b) => out.push(Record::new(
            "khasminskii",
            "exact",
            &json!({"potential": vmax, "eta": g.partial_sum, "bound": b, "applicable": true}),
        )),
        Err(Error::BoundInapplicable { product }) => out.push(Record::new(
            "khasminskii",
            "exact",
            &json!({"potential": vmax, "eta": g.partial_sum, "product": product, "applicable": false,
                    "message": "bound inapplicable"}),
        )),
        Err(e) => return Err(e),
    }
    out.push(Record::new(
        "threshold",
        "exact",
        &json!({"eps_prime": 1.0 / g.partial_sum, "eta": g.partial_sum}),
    ));
    low_dimension_warning(cfg, out);
    Ok(())
}

pub struct PhaseOutput {
    pub scan: ScanResult<f64>,
}

pub fn phase(cfg: &RunConfig, budget: u128, out: &mut Emitter) -> Result<PhaseOutput> {
    let family = cfg.spec()?;
    let x = cfg.point()?;
    for &n in &cfg.n_list {
        check_point_budget::<f64>(&admissible_sequence(&x, n), budget)?;
    }
    let grid = cfg.eps_grid();
    let opts = ScanOptions {
        samples: cfg.samples,
        seed: cfg.seed,
        max_assignments: cfg.max_assignments as u128,
    };
    let result = scan(&family, &x, &cfg.n_list, &grid, opts)?;
    for c in &result.cells {
        out.push(
            Record::new(
                "scan_cell",
                mode_name(c.mode),
                &json!({"n": c.n, "eps": c.eps, "value": c.value, "samples": c.samples}),
            )
            .with_stderr(c.stderr),
        );
    }
    let est = estimate_eps_c(&result, cfg.tau)?;
    out.push(Record::new("eps_c", "mixed", &est));
    let eps_prime = cfg
        .eps_prime
        .unwrap_or_else(|| grid.iter().copied().fold(0.0, f64::max));
    out.push(Record::new("lipschitz", "mixed", &lipschitz_check(&result, eps_prime)?));
    for (e, &eps) in result.eps_grid.iter().enumerate() {
        let vals: Vec<f64> = (0..result.n_list.len()).map(|k| result.cell(e, k).value).collect();
        if let Some(v) = richardson(&result.n_list, &vals) {
            out.push(Record::new(
                "extrapolation",
                "mixed",
                &json!({"eps": eps, "value": v, "label": "heuristic"}),
            ));
        }
    }
    low_dimension_warning(cfg, out);
    Ok(PhaseOutput { scan: result })
}

pub fn simulate(cfg: &RunConfig, trajectories: Option<&PathBuf>, out: &mut Emitter) -> Result<()> {
    let spec = cfg.spec()?;
    let face = cfg.face()?;
    let theta = cfg.theta()?;
    let env = SeededEnvironment::new(&spec, cfg.seed);
    let walks = cfg.samples.max(1);
    let runs: Vec<_> = (0..walks)
        .map(|m| simulate_walk(&env, &face, cfg.n, keyed_hash(cfg.seed, STREAM_WALK, &[m as i64])))
        .collect();
    let hits: Vec<f64> = runs.iter().map(|t| if t.in_face { 1.0 } else { 0.0 }).collect();
    let weights: Vec<f64> = runs.iter().map(|t| tilted_weight(t, &spec.alpha, &face, &theta)).collect();
    let (p, p_se) = mean_se(&hits);
    let (w, w_se) = mean_se(&weights);
    let first: f64 = (0..face.dim()).map(|i| env.omega(&vec![0; face.dim()], face.jump(i).index())).sum();
    out.push(
        Record::new(
            "simulate",
            "mc",
            &json!({
                "n": cfg.n,
                "eps": spec.eps,
                "walks": walks,
                "value": p,
                "face_event_prob_annealed_eps0": psi(&spec.alpha, &face, &vec![0.0; face.dim() - 1]).powi(cfg.n as i32),
                "first_step_face_mass": first,
                "mean_tilted_weight": w,
                "mean_tilted_weight_stderr": w_se,
            }),
        )
        .with_stderr(p_se),
    );
    if let Some(path) = trajectories {
        let mut wtr = csv::Writer::from_path(path)?;
        let mut header = vec!["walk".to_string(), "step".to_string()];
        header.extend((1..=face.dim()).map(|i| format!("x{i}")));
        header.push("jump".into());
        wtr.write_record(&header)?;
        for (m, t) in runs.iter().enumerate().take(10) {
            for (step, site) in t.path.iter().enumerate() {
                let mut row = vec![m.to_string(), step.to_string()];
                row.extend(site.coords.iter().map(|c| c.to_string()));
                row.push(if step == 0 { String::new() } else { t.jumps[step - 1].to_string() });
                wtr.write_record(&row)?;
            }
        }
        wtr.flush()?;
    }
    Ok(())
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn validate(cfg: &RunConfig, out: &mut Emitter) -> Result<()> {
    let report = cfg.assumption_b()?;
    let passes = report.passes();
    out.push(Record::new("assumption_b", "exact", &json!({"report": report, "passes": passes})));
    if !passes {
        return Err(Error::invalid("eta law fails Assumption B"));
    }
    let spec = cfg.spec()?;
    let face = cfg.face()?;
    out.push(Record::new(
        "environment",
        "exact",
        &json!({
            "eps": spec.eps,
            "disorder": spec.disorder(),
            "ellipticity": spec.ellipticity(),
            "imbalance": imbalance_of_law(&spec, &face),
            "face": face,
        }),
    ));
    let all_faces: Vec<f64> = (0..1usize << cfg.d)
        .map(|mask| {
            let signs = (0..cfg.d).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
            imbalance_of_law(&spec, &Face::new(signs).expect("valid signs"))
        })
        .collect();
    out.push(Record::new(
        "imbalance_by_face",
        "exact",
        &json!({"value": all_faces.iter().copied().fold(0.0, f64::max), "per_face": all_faces}),
    ));
    low_dimension_warning(cfg, out);
    Ok(())
}
