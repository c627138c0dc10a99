use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use super::args::*;
use super::RunManifest;
use crate::client::{
    read_records, run_sweep, CachedClient, Completer, EndpointConfig, HttpClient, MockClient,
    ResponseCache, RetryPolicy, SweepSpec,
};
use crate::meta_opt::{
    linear_attention_curve, ols_expected_risk, ols_saturation_curve, verify_theorem1,
    LinearAttentionConfig, OlsConfig, SaturationCurve,
};
use crate::metrics::{accuracy, kendall_w, mean_cumulative_accuracy, write_mca_csv, Axis, RankTable};
use crate::prompt::make_prompt;
use crate::tsne::{
    best_projection, load_embeddings, render_svg, silhouette_summary, tsne_seeds,
    write_projection_csv, write_silhouette_csv, TsneConfig,
};

struct Run {
    command: &'static str,
    args: Vec<String>,
    started: String,
    seeds: Vec<u64>,
    inputs: Vec<PathBuf>,
}

impl Run {
    fn finish(self, outputs: &[PathBuf]) -> Result<()> {
        let Some(anchor) = outputs.first() else {
            return Ok(());
        };
        let manifest = RunManifest {
            command: self.command.to_string(),
            args: self.args,
            seeds: self.seeds,
            inputs: self.inputs,
            outputs: outputs.to_vec(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            started: self.started,
            finished: now(),
        };
        manifest.write(anchor)?;
        Ok(())
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

pub(super) fn execute(command: Command, args: Vec<String>) -> Result<()> {
    let run = |command, seeds, inputs| Run {
        command,
        args: args.clone(),
        started: now(),
        seeds,
        inputs,
    };
    match command {
        Command::Gen(a) => gen(run("gen", vec![a.prompt.seed], vec![]), a),
        Command::Run(a) => {
            let seeds = vec![a.prompt.seed, a.mock_seed.unwrap_or(a.prompt.seed)];
            sweep(run("run", seeds, vec![]), a)
        }
        Command::Score(a) => score(run("score", vec![], vec![a.records.clone()]), a),
        Command::Mca(a) => mca(run("mca", vec![], vec![a.records.clone()]), a),
        Command::Kendall(a) => kendall(a),
        Command::Theorem1(a) => theorem1(run("theorem1", vec![a.seed], vec![]), a),
        Command::Saturate(a) => saturate(run("saturate", vec![a.seed], vec![]), a),
        Command::Tsne(a) => {
            let seeds = a.seed_list.clone().unwrap_or_else(|| (0..a.seeds).collect());
            tsne(run("tsne", seeds, vec![a.input.clone()]), a)
        }
        Command::Report(a) => report(run("report", vec![], a.inputs.clone()), a),
    }
}

fn gen(run: Run, a: GenArgs) -> Result<()> {
    let mut out = sink(a.out.as_deref())?;
    for k in a.k.clone() {
        for c in a.c.clone() {
            let p = make_prompt(a.prompt.kind, k, c, a.prompt.count(), a.prompt.seed, a.prompt.style)?;
            if p.stats.realized < p.stats.requested {
                log::warn!(
                    "{}: only {} of {} evaluation points are feasible",
                    p.id,
                    p.stats.realized,
                    p.stats.requested
                );
            }
            if a.text {
                writeln!(out, "{}", p.render())?;
            } else {
                serde_json::to_writer(&mut out, &p)?;
                writeln!(out)?;
            }
        }
    }
    out.flush()?;
    drop(out);
    run.finish(&a.out.into_iter().collect::<Vec<_>>())
}

fn sweep(run: Run, a: RunArgs) -> Result<()> {
    let (k_range, c_range) = match (a.grid, &a.k, &a.c) {
        (Some((k, c)), _, _) => (1..=k, 1..=c),
        (None, Some(k), Some(c)) => (k.clone(), c.clone()),
        _ => bail!("give either --grid KxC or both --k and --c"),
    };
    if !(0.0..=1.0).contains(&a.error_rate) {
        bail!("--error-rate must lie in [0, 1]");
    }
    let spec = SweepSpec {
        kind: a.prompt.kind,
        k_range,
        c_range,
        count: a.prompt.count(),
        seed: a.prompt.seed,
        style: a.prompt.style,
        workers: a.max_in_flight.max(1),
    };
    let mock;
    let http;
    let base: &dyn Completer = if a.mock {
        mock = MockClient::new(a.error_rate, a.mock_seed.unwrap_or(a.prompt.seed));
        &mock
    } else {
        http = HttpClient::new(EndpointConfig {
            base_url: a.base_url.clone(),
            model: a.model.clone(),
            api_key_env: a.api_key_env.clone(),
            temperature: 0.0,
            max_tokens: a.max_tokens,
            timeout_secs: a.timeout,
            max_in_flight: a.max_in_flight,
            retry: RetryPolicy {
                max_attempts: a.max_attempts,
                backoff_base_ms: a.backoff_ms,
            },
            context_char_budget: a.context_budget,
        })?;
        &http
    };
    let cache = a.cache.as_ref().map(ResponseCache::open).transpose()?;
    let cached = cache.as_ref().map(|c| CachedClient::new(base, c));
    let client: &dyn Completer = match &cached {
        Some(c) => c,
        None => base,
    };
    let outcome = run_sweep(&spec, client, &a.out)?;
    let failed = outcome.records.iter().filter(|r| !r.is_ok()).count();
    eprintln!(
        "{} cells run, {} skipped, {} failed",
        outcome.records.len(),
        outcome.skipped,
        failed
    );
    let mut outputs = vec![a.out.clone()];
    outputs.extend(a.cache.clone());
    run.finish(&outputs)
}

fn score(run: Run, a: ScoreArgs) -> Result<()> {
    let mut records = read_records(&a.records).with_context(|| format!("reading {}", a.records.display()))?;
    records.sort_by(|x, y| (x.kind.as_str(), x.k, x.c).cmp(&(y.kind.as_str(), y.k, y.c)));
    let mut w = csv::Writer::from_writer(sink(a.out.as_deref())?);
    w.write_record([
        "prompt_id", "kind", "k", "c", "correct", "total", "unknown", "unparseable", "status",
        "accuracy",
    ])?;
    for r in &records {
        let acc = accuracy(r).map(|v| v.to_string()).unwrap_or_default();
        let status = serde_json::to_value(r.status)?;
        w.write_record([
            r.prompt_id.clone(),
            r.kind.to_string(),
            r.k.to_string(),
            r.c.to_string(),
            r.correct.to_string(),
            r.total.to_string(),
            r.unknown.to_string(),
            r.unparseable.to_string(),
            status.as_str().unwrap_or_default().to_string(),
            acc,
        ])?;
    }
    w.flush()?;
    drop(w);
    run.finish(&a.out.into_iter().collect::<Vec<_>>())
}

fn mca(run: Run, a: McaArgs) -> Result<()> {
    let records = read_records(&a.records).with_context(|| format!("reading {}", a.records.display()))?;
    let limit = a.limit.unwrap_or_else(|| {
        records
            .iter()
            .map(|r| if a.axis == Axis::Shots { r.k } else { r.c })
            .max()
            .unwrap_or(0)
    });
    let points = mean_cumulative_accuracy(&records, a.axis, limit)?;
    write_mca_csv(&points, sink(a.out.as_deref())?)?;
    run.finish(&a.out.into_iter().collect::<Vec<_>>())
}

fn kendall(a: KendallArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.table).with_context(|| format!("reading {}", a.table.display()))?;
    let table: RankTable = serde_json::from_str(&text)?;
    println!("{:.6}", kendall_w(&table, a.weighted)?);
    Ok(())
}

fn theorem1(run: Run, a: Theorem1Args) -> Result<()> {
    let obs = verify_theorem1(a.d, a.kmax, a.trials, a.seed)?;
    let mut w = csv::Writer::from_writer(sink(a.out.as_deref())?);
    w.write_record(["k", "trial", "rank", "expected", "duplicated_rank"])?;
    let mut mismatches = 0;
    for o in &obs {
        let expected = o.expected(a.d);
        if o.rank != expected || o.duplicated_rank > o.rank {
            mismatches += 1;
        }
        w.write_record([
            o.k.to_string(),
            o.trial.to_string(),
            o.rank.to_string(),
            expected.to_string(),
            o.duplicated_rank.to_string(),
        ])?;
    }
    w.flush()?;
    drop(w);
    eprintln!("{} contexts, {mismatches} deviate from min(k, d)", obs.len());
    run.finish(&a.out.into_iter().collect::<Vec<_>>())
}

fn describe(name: &str, curve: &SaturationCurve, d: usize) {
    let ratio = curve.plateau_ratio((8, 16), (24, 32));
    let violations = curve.monotone_violations(d + 2, 2.0);
    eprintln!(
        "{name}: plateau ratio {} ; rises beyond 2 standard errors at k = {violations:?}",
        ratio.map_or("n/a".into(), |r| format!("{r:.4}"))
    );
}

fn saturate(run: Run, a: SaturateArgs) -> Result<()> {
    if !a.ols && !a.linattn {
        bail!("choose --ols, --linattn or both");
    }
    let k_list = a.k_list.clone().unwrap_or_else(|| (1..=a.kmax).collect());
    std::fs::create_dir_all(&a.out_dir)?;
    let mut outputs = Vec::new();
    if a.ols {
        let cfg = OlsConfig {
            d: a.d,
            sigma: a.sigma,
            k_list: k_list.clone(),
            trials: a.trials,
            seeds: a.seeds,
            seed: a.seed,
            estimator: a.estimator.into(),
        };
        let curve = ols_saturation_curve(&cfg)?;
        let path = a.out_dir.join("ols_curve.csv");
        curve.write_csv(File::create(&path)?)?;
        describe("ols", &curve, a.d);
        if let (Some(p), Some(want)) = (curve.points.last(), ols_expected_risk(a.d, *k_list.last().unwrap_or(&0), a.sigma)) {
            eprintln!("ols: MSE at k = {} is {:.6}, least-squares risk {:.6}", p.k, p.mean, want);
        }
        outputs.push(path);
    }
    if a.linattn {
        let cfg = LinearAttentionConfig {
            d: a.d,
            steps: a.steps,
            lr: a.lr,
            batch: a.batch,
            sigma: a.sigma,
            seed: a.seed,
            ..Default::default()
        };
        let (_, curve) = linear_attention_curve(&cfg, &k_list, a.trials, a.seeds)?;
        let path = a.out_dir.join("linattn_curve.csv");
        curve.write_csv(File::create(&path)?)?;
        describe("linattn", &curve, a.d);
        outputs.push(path);
    }
    outputs.insert(0, a.out_dir.clone());
    run.finish(&outputs)
}

fn tsne(run: Run, a: TsneArgs) -> Result<()> {
    let set = load_embeddings(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let cfg = TsneConfig {
        perplexity: a.perplexity,
        iterations: a.iterations,
        learning_rate: a.learning_rate,
        ..Default::default()
    };
    let runs = tsne_seeds(&set, &cfg, &run.seeds)?;
    let best = best_projection(&runs).expect("at least one seed");
    std::fs::create_dir_all(&a.out_dir)?;
    let proj_path = a.out_dir.join("projections.csv");
    write_projection_csv(File::create(&proj_path)?, &set, &runs)?;
    let sil_path = a.out_dir.join("silhouette.csv");
    write_silhouette_csv(File::create(&sil_path)?, &silhouette_summary(&set, best)?)?;
    let mut outputs = vec![a.out_dir.clone(), proj_path, sil_path];
    if a.svg {
        let svg_path = a.out_dir.join("best.svg");
        std::fs::write(&svg_path, render_svg(&set, best))?;
        outputs.push(svg_path);
    }
    eprintln!("{} seeds; lowest KL {:.6} at seed {}", runs.len(), best.kl, best.seed);
    run.finish(&outputs)
}

fn report(run: Run, a: ReportArgs) -> Result<()> {
    let mut tables = Vec::new();
    let mut columns: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    for path in &a.inputs {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let headers: Vec<String> = r.headers()?.iter().map(String::from).collect();
        for h in &headers {
            if seen.insert(h.clone()) {
                columns.push(h.clone());
            }
        }
        let rows: Vec<csv::StringRecord> = r.records().collect::<Result<_, _>>()?;
        tables.push((path, headers, rows));
    }
    let mut w = csv::Writer::from_writer(sink(a.out.as_deref())?);
    let mut header = vec!["source".to_string()];
    header.extend(columns.iter().cloned());
    w.write_record(&header)?;
    for (path, headers, rows) in &tables {
        for row in rows {
            let mut out = vec![path.display().to_string()];
            out.extend(columns.iter().map(|c| {
                headers
                    .iter()
                    .position(|h| h == c)
                    .and_then(|i| row.get(i))
                    .unwrap_or("")
                    .to_string()
            }));
            w.write_record(&out)?;
        }
    }
    w.flush()?;
    drop(w);
    run.finish(&a.out.into_iter().collect::<Vec<_>>())
}
