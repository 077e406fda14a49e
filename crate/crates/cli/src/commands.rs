use std::collections::BTreeMap;
use std::fs;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use mixgen_core::analyze::{
    self, benchmark_compare, convex_hull_3d, default_benchmarks, filter_dominating, group_strength_range,
    strength_progression, AnalyzeError, DominanceQuery, ScoredMix,
};
use mixgen_core::bundle::to_json;
use mixgen_core::cvae::{batch_generate, SamplerSpec};
use mixgen_core::data::reference::{LAB_MIXES, PSI_PER_MPA};
use mixgen_core::data::{calibrate_reference, compute_impacts, AgeGroup, CALIBRATION_HEADER};
use mixgen_core::{ModelBundle, PredictorConfig, Target, TrainConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::*;
use crate::manifest::RunDir;
use crate::samples::{read_mixes, read_samples, samples_to_csv, to_csv, SampleRecord};
use crate::Usage;

fn parse_group(s: &str) -> Result<AgeGroup> {
    s.parse().map_err(|e: mixgen_core::DataError| Usage(e.to_string()).into())
}

fn parse_groups(raw: &[String]) -> Result<Vec<AgeGroup>> {
    let mut out = Vec::new();
    for s in raw {
        if s.eq_ignore_ascii_case("all") {
            out.extend(AgeGroup::ALL);
        } else {
            out.push(parse_group(s)?);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn load_bundle(dir: &std::path::Path) -> Result<ModelBundle> {
    ModelBundle::load(dir).with_context(|| format!("loading model directory {}", dir.display()))
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let data = fs::read(&args.data).with_context(|| format!("reading dataset {}", args.data.display()))?;
    let coeffs =
        fs::read_to_string(&args.epd).with_context(|| format!("reading coefficient table {}", args.epd.display()))?;
    let cvae = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        seed: args.seed,
        kl_weight: args.kl_weight,
    };
    let predictors = PredictorConfig {
        epochs: args.predictor_epochs,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        seed: args.seed,
        test_fraction: args.test_fraction,
    };
    let mut run = RunDir::create(&args.out, "train", args)?;
    let (bundle, report) = ModelBundle::train(data, coeffs, cvae, predictors, args.seed)?;
    if let Some(note) = &bundle.metadata.kl_weight_note {
        warn!("{note}");
    }
    run.record(bundle.save(&run.path, &report)?);

    let mut r2 = BTreeMap::new();
    for m in report.metrics.impact.iter().chain(&report.metrics.strength) {
        info!("{:<14} held-out R2 {:>8} MAE {:.4} {}", m.target.to_string(), fmt_opt(m.physical.r2), m.physical.mae, m.units);
        r2.insert(m.target.to_string(), m.physical.r2);
    }
    let last = report.loss_history.last().map(|e| e.loss);
    run.finish(
        Some(bundle.metadata.dataset_sha256.clone()),
        Some(args.seed),
        json!({"held_out_r2": r2, "final_loss": last, "rejected_rows": bundle.metadata.rejected_rows}),
    )?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.4}"))
}

pub fn samples_file(group: AgeGroup) -> String {
    format!("samples_{}.csv", group.label())
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let groups = parse_groups(&args.groups)?;
    if args.count == 0 {
        bail!(Usage("--count must be at least 1".into()));
    }
    if !(args.superplasticizer_scale.is_finite() && args.superplasticizer_scale >= 0.0) {
        bail!(Usage("--superplasticizer-scale must be finite and >= 0".into()));
    }
    let bundle = load_bundle(&args.model_dir)?;
    let stats = &bundle.metadata.stats;
    let mut run = RunDir::create(&args.out, "generate", args)?;
    let mut counts = BTreeMap::new();
    for group in groups {
        let samples = batch_generate(&bundle.cvae, args.count, group, &SamplerSpec::default(), args.seed)?;
        let rows: Vec<SampleRecord> = samples
            .par_iter()
            .enumerate()
            .map(|(index, s)| -> Result<SampleRecord> {
                let mix = s.mix.with_superplasticizer_scale(args.superplasticizer_scale);
                let (cond_strength, cond) = s.condition.to_physical(stats);
                let score = bundle.score(&mix, group)?;
                let lca = compute_impacts(&mix, &bundle.coefficients);
                Ok(SampleRecord {
                    index,
                    age_group: group,
                    cement: mix.cement,
                    slag: mix.slag,
                    fly_ash: mix.fly_ash,
                    water: mix.water,
                    superplasticizer: mix.superplasticizer,
                    coarse_aggregate: mix.coarse_aggregate,
                    fine_aggregate: mix.fine_aggregate,
                    cond_strength,
                    cond_gwp: cond.gwp,
                    cond_ap: cond.ap,
                    cond_cbw: cond.cbw,
                    z0: s.z.0[0],
                    z1: s.z.0[1],
                    predicted_strength: score.strength,
                    predicted_gwp: score.impacts.gwp,
                    predicted_ap: score.impacts.ap,
                    predicted_cbw: score.impacts.cbw,
                    lca_gwp: lca.gwp,
                    lca_ap: lca.ap,
                    lca_cbw: lca.cbw,
                    out_of_domain: score.out_of_domain,
                })
            })
            .collect::<Result<_>>()?;
        let name = samples_file(group);
        run.write(&name, &samples_to_csv(&rows)?)?;
        info!("{group}: wrote {} samples to {name}", rows.len());
        counts.insert(group.label(), rows.len());
    }
    run.finish(
        Some(bundle.metadata.dataset_sha256.clone()),
        Some(args.seed),
        json!({"rows": counts, "model_seed": bundle.metadata.seed}),
    )?;
    Ok(())
}

/// Training rows scored by observation: measured strength plus coefficient-table impacts.
fn training_refs(bundle: &ModelBundle) -> Vec<ScoredMix> {
    bundle
        .dataset
        .rows
        .iter()
        .map(|r| ScoredMix { mix: r.mix, age_group: r.age_group(), strength: r.strength, impacts: r.impacts })
        .collect()
}

fn samples_for(path: &std::path::Path, group: AgeGroup) -> Result<Vec<SampleRecord>> {
    let rows: Vec<SampleRecord> = read_samples(path)?.into_iter().filter(|r| r.age_group == group).collect();
    if rows.is_empty() {
        warn!("{} has no {group} samples", path.display());
    }
    Ok(rows)
}

/// One row of `reduction.csv`. Column order is the field order.
#[derive(Debug, Serialize)]
struct ReductionRow {
    age_group: AgeGroup,
    strength_center: f64,
    strength_tolerance: f64,
    gwp_reduction_pct: f64,
    ap_reduction_pct: f64,
    cbw_reduction_pct: f64,
    count: usize,
    generated_in_band: usize,
    reference_count: usize,
    best_gwp: f64,
    best_ap: f64,
    best_cbw: f64,
}

pub fn reduce(args: &ReduceArgs) -> Result<()> {
    let group = parse_group(&args.group)?;
    let bundle = load_bundle(&args.model_dir)?;
    let samples = samples_for(&args.samples, group)?;
    let scored: Vec<ScoredMix> = samples.iter().map(SampleRecord::scored).collect();
    let training = training_refs(&bundle);
    let mut rows = Vec::new();
    let mut passing = Vec::new();
    for &center in &args.strengths {
        let q = DominanceQuery { age_group: group, strength_center: center, strength_tolerance: args.tol };
        let (idx, r) = filter_dominating(&scored, &training, &q).map_err(|e| match e {
            AnalyzeError::InvalidQuery(m) => Usage(m).into(),
            other => anyhow::Error::from(other),
        })?;
        info!(
            "{group} {center}±{}: {} of {} in-band samples dominate; mean reduction GWP {:.2}% AP {:.2}% CBW {:.2}%",
            args.tol, r.count, r.generated_in_band, r.reduction_pct.gwp, r.reduction_pct.ap, r.reduction_pct.cbw
        );
        passing.push((center, idx.iter().map(|&i| &samples[i]).collect::<Vec<_>>()));
        rows.push(ReductionRow {
            age_group: group,
            strength_center: center,
            strength_tolerance: args.tol,
            gwp_reduction_pct: r.reduction_pct.gwp,
            ap_reduction_pct: r.reduction_pct.ap,
            cbw_reduction_pct: r.reduction_pct.cbw,
            count: r.count,
            generated_in_band: r.generated_in_band,
            reference_count: r.reference_count,
            best_gwp: r.best_reference.gwp,
            best_ap: r.best_reference.ap,
            best_cbw: r.best_reference.cbw,
        });
    }
    let mut run = RunDir::create(&args.out, "analyze reduce", args)?;
    run.write("reduction.csv", &to_csv(&rows)?)?;
    for (center, rows) in &passing {
        run.write(&format!("dominating_{center}.csv"), &samples_to_csv(rows)?)?;
    }
    run.finish(Some(bundle.metadata.dataset_sha256.clone()), None, json!({"rows": rows.len()}))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Extremal {
    sample_index: usize,
    impacts: [f64; 3],
    nearest_sample_index: usize,
    mix: mixgen_core::MixComposition,
    predicted_strength: f64,
}

pub fn hull(args: &HullArgs) -> Result<()> {
    let group = parse_group(&args.group)?;
    let bundle = load_bundle(&args.model_dir)?;
    let samples = samples_for(&args.samples, group)?;
    let scored: Vec<ScoredMix> = samples.iter().map(SampleRecord::scored).collect();
    let training = training_refs(&bundle);
    let q = DominanceQuery { age_group: group, strength_center: args.strength, strength_tolerance: args.tol };
    let (idx, report) = filter_dominating(&scored, &training, &q)?;
    let points: Vec<[f64; 3]> = idx.iter().map(|&i| scored[i].impacts.to_array()).collect();
    let in_band: Vec<usize> = (0..scored.len()).filter(|&i| q.contains(scored[i].strength)).collect();
    let in_band_points: Vec<[f64; 3]> = in_band.iter().map(|&i| scored[i].impacts.to_array()).collect();
    let training_points: Vec<[f64; 3]> = training
        .iter()
        .filter(|t| t.age_group == group && q.contains(t.strength))
        .map(|t| t.impacts.to_array())
        .collect();

    let mut warning = None;
    let hull = if points.is_empty() {
        warning = Some("no dominating samples; hull is empty".to_string());
        None
    } else {
        let h = convex_hull_3d(&points)?;
        if h.degenerate {
            warning = Some(format!("hull is degenerate (dimension {}) over {} points", h.dimension, points.len()));
        }
        Some(h)
    };
    if let Some(w) = &warning {
        warn!("{w}");
    }
    let nearest = hull
        .as_ref()
        .map(|h| {
            let vertices: Vec<[f64; 3]> = h.vertices.iter().map(|&v| points[v]).collect();
            analyze::nearest_indices(&vertices, &in_band_points)
        })
        .unwrap_or_default();
    let extremal: Vec<Extremal> = hull
        .iter()
        .flat_map(|h| h.vertices.iter())
        .zip(&nearest)
        .filter_map(|(&v, n)| {
            let j = in_band[(*n)?];
            Some(Extremal {
                sample_index: samples[idx[v]].index,
                impacts: points[v],
                nearest_sample_index: samples[j].index,
                mix: scored[j].mix,
                predicted_strength: scored[j].strength,
            })
        })
        .collect();
    let body = json!({
        "age_group": group,
        "strength_center": args.strength,
        "strength_tolerance": args.tol,
        "best_reference": report.best_reference,
        "points": points,
        "point_sample_index": idx.iter().map(|&i| samples[i].index).collect::<Vec<_>>(),
        "hull": hull,
        "extremal": extremal,
        "training_points": training_points,
        "warning": warning,
    });
    let mut run = RunDir::create(&args.out, "analyze hull", args)?;
    run.write("hull.json", &to_json(&body))?;
    run.finish(
        Some(bundle.metadata.dataset_sha256.clone()),
        None,
        json!({"points": points.len(), "vertices": hull.as_ref().map(|h| h.vertices.len()), "warning": warning}),
    )?;
    Ok(())
}

pub fn isomap(args: &IsomapArgs) -> Result<()> {
    let (labels, mixes) = read_mixes(&args.mixes)?;
    if args.k == 0 || args.k_max.is_some_and(|m| m < args.k) {
        bail!(Usage("need 1 <= --k <= --k-max".into()));
    }
    let result = match args.k_max {
        Some(max) => analyze::isomap_auto(&mixes, args.k, max)?,
        None => analyze::isomap(&mixes, args.k)?,
    };
    info!("embedded {} mixes with k = {}", mixes.len(), result.k);
    let mut run = RunDir::create(&args.out, "analyze isomap", args)?;
    run.write("embedding.json", &to_json(&json!({"labels": labels, "embedding": result})))?;
    run.finish(None, None, json!({"k": result.k, "eigenvalues": result.eigenvalues}))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ProgressionCsvRow {
    index: usize,
    conditioned_strength: f64,
    predicted_strength: f64,
    cement: f64,
    slag: f64,
    fly_ash: f64,
    water: f64,
    superplasticizer: f64,
    coarse_aggregate: f64,
    fine_aggregate: f64,
}

pub fn progression_file(group: AgeGroup) -> String {
    format!("progression_{}.csv", group.label())
}

pub fn progression(args: &ProgressionArgs) -> Result<()> {
    let groups = parse_groups(&args.groups)?;
    let bundle = load_bundle(&args.model_dir)?;
    let mut run = RunDir::create(&args.out, "analyze progression", args)?;
    let mut results = serde_json::Map::new();
    for group in groups {
        let range = group_strength_range(&bundle.dataset.rows, group)
            .with_context(|| format!("no training rows for {group}"))?;
        let model = bundle
            .predictors
            .get(Target::Strength(group))
            .with_context(|| format!("no strength predictor for {group}"))?;
        let res = strength_progression(&bundle.cvae, |s| model.predict(&s.mix).value, group, range, args.count, args.seed)?;
        let rows: Vec<ProgressionCsvRow> = res
            .rows
            .iter()
            .enumerate()
            .map(|(index, r)| ProgressionCsvRow {
                index,
                conditioned_strength: r.conditioned_strength,
                predicted_strength: r.predicted_strength,
                cement: r.sample.mix.cement,
                slag: r.sample.mix.slag,
                fly_ash: r.sample.mix.fly_ash,
                water: r.sample.mix.water,
                superplasticizer: r.sample.mix.superplasticizer,
                coarse_aggregate: r.sample.mix.coarse_aggregate,
                fine_aggregate: r.sample.mix.fine_aggregate,
            })
            .collect();
        run.write(&progression_file(group), &to_csv(&rows)?)?;
        info!("{group}: RMSE {:.3} MPa over {} samples in {:.1}..{:.1} MPa", res.rmse, rows.len(), range.0, range.1);
        results.insert(group.label().into(), json!({"rmse": res.rmse, "rows": rows.len(), "strength_range": range}));
    }
    let best = results
        .iter()
        .min_by(|a, b| a.1["rmse"].as_f64().unwrap_or(f64::MAX).total_cmp(&b.1["rmse"].as_f64().unwrap_or(f64::MAX)))
        .map(|(k, _)| k.clone());
    if let Some(b) = &best {
        info!("lowest progression RMSE: {b}");
    }
    results.insert("lowest_rmse_group".into(), json!(best));
    run.finish(Some(bundle.metadata.dataset_sha256.clone()), Some(args.seed), Value::Object(results))?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct BenchmarkInput {
    label: String,
    strength_mpa: f64,
    gwp: f64,
}

#[derive(Debug, Serialize)]
struct BenchmarkCsvRow {
    label: String,
    strength_mpa: f64,
    gwp: f64,
    benchmark_psi: Option<f64>,
    benchmark_gwp: Option<f64>,
    percent_below: Option<f64>,
    flagged: bool,
}

pub fn benchmark(args: &BenchmarkArgs) -> Result<()> {
    let inputs: Vec<(String, f64, f64)> = match &args.mixes {
        Some(p) => {
            let mut r = csv::Reader::from_path(p).with_context(|| format!("opening {}", p.display()))?;
            r.deserialize::<BenchmarkInput>()
                .map(|row| row.map(|b| (b.label, b.strength_mpa, b.gwp)).with_context(|| format!("parsing {}", p.display())))
                .collect::<Result<_>>()?
        }
        None => LAB_MIXES
            .iter()
            .map(|m| {
                let psi = match args.strength_basis {
                    StrengthBasis::Target => m.target_28d_psi,
                    StrengthBasis::Measured => m.measured_28d_psi,
                };
                (format!("Mix {}", m.id), psi / PSI_PER_MPA, m.impacts.gwp)
            })
            .collect(),
    };
    let rows: Vec<BenchmarkCsvRow> = benchmark_compare(&inputs, &default_benchmarks())
        .into_iter()
        .map(|r| BenchmarkCsvRow {
            label: r.label,
            strength_mpa: r.strength_mpa,
            gwp: r.gwp,
            benchmark_psi: r.benchmark.map(|b| b.strength_psi),
            benchmark_gwp: r.benchmark.map(|b| b.gwp),
            percent_below: r.percent_below,
            flagged: r.flagged,
        })
        .collect();
    for r in &rows {
        match r.percent_below {
            Some(p) => info!("{}: {:.1}% below the {} psi benchmark", r.label, p, r.benchmark_psi.unwrap_or_default()),
            None => warn!("{}: no benchmark class at {:.1} MPa", r.label, r.strength_mpa),
        }
    }
    let mut run = RunDir::create(&args.out, "analyze benchmark", args)?;
    run.write("benchmark.csv", &to_csv(&rows)?)?;
    run.finish(None, None, json!({"flagged": rows.iter().filter(|r| r.flagged).count()}))?;
    Ok(())
}

pub fn calibrate(args: &CalibrateArgs) -> Result<()> {
    let table = calibrate_reference()?;
    let mut run = RunDir::create(&args.out, "calibrate", args)?;
    run.write("coefficients.txt", table.to_text(CALIBRATION_HEADER).as_bytes())?;
    run.finish(None, None, Value::Null)?;
    Ok(())
}

pub fn serve(args: &ServeArgs) -> Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(mixgen_service::run((args.host, args.port).into(), args.model_dir.clone()))?;
    Ok(())
}
